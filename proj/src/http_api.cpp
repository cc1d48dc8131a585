#include "styleval/http_api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "styleval/errors.hpp"

namespace styleval {
namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, {{"code", code}, {"message", message}}, status);
}

// Every handler shares one error mapping.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, http_status_for(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, to_string(ErrorCode::kParse), e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "Internal", e.what());
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body);
  if (!j.is_object()) throw Error(ErrorCode::kParse, "request body must be a JSON object");
  return j;
}

}  // namespace

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kCampaignFull:
    case ErrorCode::kAlreadyEnrolled:
    case ErrorCode::kOutOfOrder:
    case ErrorCode::kSessionClosed: return 409;
    case ErrorCode::kManifestIncomplete:
    case ErrorCode::kConstraintInfeasible: return 422;
    case ErrorCode::kParse:
    case ErrorCode::kInvalidArgument: return 400;
    default: return 500;
  }
}

void register_routes(httplib::Server& server, EvalService& service, const HttpOptions& options) {
  server.Post("/api/campaigns", guarded([&service, options](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto cfg = body.value("config", nlohmann::json::object()).get<CampaignConfig>();
    const auto manifest = ImageManifest::from_json(body.at("manifest"), options.image_root);
    const auto id = service.create_campaign(cfg, manifest);
    send_json(res, {{"campaign_id", id}, {"combos", cfg.combos()}, {"evaluator_slots", cfg.evaluator_slots()}},
              201);
  }));

  server.Post(R"(/api/campaigns/([^/]+)/sessions)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                const auto opened = service.open_session(req.matches[1], body.at("evaluator_id").get<std::string>());
                auto j = to_json(opened.view);
                nlohmann::json cal = nlohmann::json::array();
                for (const auto& t : opened.calibration_tokens) {
                  cal.push_back({{"image_id", t}, {"url", "/api/images/" + t}});
                }
                j["calibration"] = std::move(cal);
                send_json(res, j, 201);
              }));

  server.Get(R"(/api/sessions/([^/]+)/next)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, to_json(service.next(req.matches[1])));
  }));

  server.Post(R"(/api/sessions/([^/]+)/labels)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req);
                const auto& jr = body.at("judged_real");
                const int judged = jr.is_boolean() ? (jr.get<bool>() ? 1 : 0) : jr.get<int>();
                const auto ack = service.submit_label(req.matches[1], body.at("image_id").get<std::string>(), judged,
                                                      body.value("elapsed_ms", std::int64_t{0}));
                send_json(res, to_json(ack));
              }));

  server.Get(R"(/api/campaigns/([^/]+)/results)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, to_json(service.get_results(req.matches[1])));
             }));

  server.Get(R"(/api/campaigns/([^/]+)/labels\.csv)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               res.set_content(service.export_labels_csv(req.matches[1]), "text/csv");
             }));

  server.Get(R"(/api/images/([^/]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    auto blob = service.serve_image(req.matches[1]);
    res.set_header("Cache-Control", "no-store");
    res.set_content(std::move(blob.bytes), blob.content_type);
  }));
}

}  // namespace styleval
