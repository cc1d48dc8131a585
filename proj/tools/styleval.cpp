#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "styleval/embedding_file.hpp"
#include "styleval/errors.hpp"
#include "styleval/http_api.hpp"
#include "styleval/onnx_backend.hpp"
#include "styleval/pipeline.hpp"

// After Eigen: resolv.h, pulled in here, defines `_res`.
#include <httplib.h>

using namespace styleval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNumerical:
    case ErrorCode::kBootstrapUnstable:
    case ErrorCode::kDegenerateVariance:
    case ErrorCode::kInvalidCovariance:
      return kExitNumerical;
    default:
      return kExitValidation;
  }
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
};

void emit(const Globals& g, const std::string& content) {
  if (g.out.empty()) {
    std::cout << content;
  } else {
    write_text_file(g.out, content);
  }
}

std::unique_ptr<InferenceBackend> make_backend(const PipelineConfig& cfg) {
  if (cfg.backend == "onnx") {
    if (cfg.model.empty()) throw Error(ErrorCode::kInvalidArgument, "backend onnx needs --model");
    return std::make_unique<OnnxBackend>(cfg.model, default_inception_outputs());
  }
  if (cfg.backend == "projection") return std::make_unique<ProjectionBackend>(cfg.seed, cfg.dims);
  if (cfg.backend == "constant") return std::make_unique<ConstantBackend>(std::vector<float>{0.0f}, cfg.dims);
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown backend '{}'", cfg.backend));
}

void require(const std::filesystem::path& p, std::string_view what) {
  if (p.empty()) throw Error(ErrorCode::kInvalidArgument, fmt::format("{} path is required", what));
  if (!std::filesystem::exists(p)) throw Error(ErrorCode::kIo, fmt::format("{} not found: {}", what, p.string()));
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style-realism evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for every seeded step");
  app.add_option("--out", g.out, "Output file (or directory for embed/simulate)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv", "md"}));
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress");

  std::optional<std::string> images, embeddings, labels, truth, scores, human, model, backend, plan_path;
  std::vector<std::string> layers;

  auto* embed = app.add_subcommand("embed", "Extract per-layer embeddings from an image directory");
  embed->add_option("--images", images, "Image directory");
  embed->add_option("--backend", backend, "onnx | projection | constant");
  embed->add_option("--model", model, "ONNX model file");
  embed->add_option("--layers", layers, "Layers to extract")->delimiter(',');

  auto* score = app.add_subcommand("score", "Per-style FID/KID against the real pool");
  score->add_option("--embeddings", embeddings, "Directory of <layer>.emb files");

  auto* aggregate = app.add_subcommand("aggregate", "HYPE-Style scores from a labels CSV");
  aggregate->add_option("--labels", labels, "Labels CSV");
  aggregate->add_option("--ground-truth", truth, "Ground-truth JSON");

  auto* correlate = app.add_subcommand("correlate", "Bootstrap correlation of automated and human scores");
  correlate->add_option("--embeddings", embeddings, "Directory of <layer>.emb files");
  correlate->add_option("--labels", labels, "Labels CSV");
  correlate->add_option("--ground-truth", truth, "Ground-truth JSON");
  correlate->add_option("--scores", scores, "Style-score CSV (point estimates only)");
  correlate->add_option("--human", human, "Aggregate JSON (point estimates only)");
  std::string report_path;
  correlate->add_option("--report", report_path, "Also write the markdown grid here");

  auto* serve = app.add_subcommand("serve", "Run the human-evaluation HTTP service");
  std::string data_dir = "campaigns", host = "127.0.0.1", image_root;
  int port = 8080;
  bool no_fsync = false;
  serve->add_option("--data-dir", data_dir, "Campaign storage directory");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--image-root", image_root, "Base for relative manifest paths");
  serve->add_flag("--no-fsync", no_fsync, "Skip fsync on append (testing only)");

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic campaign dataset");
  auto* assign = app.add_subcommand("assign", "Build the evaluator assignment plan");
  auto* validate = app.add_subcommand("validate", "Check an assignment plan against its constraints");
  validate->add_option("--plan", plan_path, "Plan JSON from `assign` (default: rebuild from config)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
  spdlog::set_pattern("%^%l%$: %v");

  try {
    PipelineConfig cfg;
    if (simulate->parsed()) cfg.dims = kSimulationDims;
    if (!g.config.empty()) {
      apply_settings(read_flat_config(g.config), cfg, std::filesystem::path(g.config).parent_path());
    }
    if (g.seed) cfg.set_seed(*g.seed);
    if (images) cfg.images = *images;
    if (embeddings) cfg.embeddings = *embeddings;
    if (labels) cfg.labels = *labels;
    if (truth) cfg.ground_truth = *truth;
    if (scores) cfg.scores = *scores;
    if (model) cfg.model = *model;
    if (backend) cfg.backend = *backend;
    if (!layers.empty()) {
      cfg.layers.clear();
      for (const auto& l : layers) cfg.layers.push_back(layer_kind_from_string(l));
    }
    const OutputFormat format = output_format_from_string(g.format);

    if (embed->parsed()) {
      require(cfg.images, "images");
      if (g.out.empty()) throw Error(ErrorCode::kInvalidArgument, "embed needs --out DIR");
      auto net = make_backend(cfg);
      const auto result = cmd_embed(cfg.images, cfg.layers, *net, cfg.dims, g.out);
      for (const auto& f : result.failures) std::cerr << f.file.string() << ": " << f.message << "\n";
      std::cout << fmt::format("{} rows, {} files, {} failures\n", result.rows, result.files.size(),
                               result.failures.size());
      return result.failures.empty() ? kExitOk : kExitValidation;
    }

    if (score->parsed()) {
      require(cfg.embeddings, "embeddings");
      const auto metrics = cfg.metric_set();
      std::vector<LayerKind> needed;
      for (const auto& m : metrics) {
        if (std::find(needed.begin(), needed.end(), m.layer.kind) == needed.end()) needed.push_back(m.layer.kind);
      }
      const auto result = cmd_score(load_layer_embeddings(cfg.embeddings, needed), metrics, cfg.campaign);
      emit(g, render_scores(result, format));
      if (!result.missing_styles.empty()) {
        std::cerr << fmt::format("missing styles: {}\n", fmt::join(result.missing_styles, ", "));
        return kExitValidation;
      }
      for (const auto& e : result.errors) std::cerr << e.style.label << ": " << e.message << "\n";
      return result.errors.empty() ? kExitOk : kExitNumerical;
    }

    if (aggregate->parsed()) {
      require(cfg.labels, "labels");
      require(cfg.ground_truth, "ground truth");
      const auto gt = read_ground_truth(cfg.ground_truth);
      const auto records = labels_from_csv(read_text_file(cfg.labels), gt);
      emit(g, render_aggregate(cmd_aggregate(records, gt, cfg.campaign), format));
      return kExitOk;
    }

    if (correlate->parsed()) {
      std::vector<CorrelationResult> results;
      if (human) {
        require(cfg.scores, "scores");
        const auto doc = nlohmann::json::parse(read_text_file(*human));
        const auto hs = doc.at("styles").get<std::vector<StyleHumanScore>>();
        const auto ss = scores_from_csv(read_text_file(cfg.scores), cfg.dims);
        results = correlate_scores(hs, ss, cfg.bootstrap.negate_distances);
      } else {
        require(cfg.embeddings, "embeddings");
        require(cfg.labels, "labels");
        require(cfg.ground_truth, "ground truth");
        const auto metrics = cfg.metric_set();
        std::vector<LayerKind> needed;
        for (const auto& m : metrics) {
          if (std::find(needed.begin(), needed.end(), m.layer.kind) == needed.end()) needed.push_back(m.layer.kind);
        }
        const auto gt = read_ground_truth(cfg.ground_truth);
        const auto records = labels_from_csv(read_text_file(cfg.labels), gt);
        results = cmd_correlate(load_layer_embeddings(cfg.embeddings, needed), records, gt, metrics, cfg.campaign,
                                cfg.bootstrap);
      }
      emit(g, render_correlation(results, format));
      if (!report_path.empty()) write_text_file(report_path, rank_table(results).markdown);
      return kExitOk;
    }

    if (serve->parsed()) {
      EvalService service(data_dir, EvalService::Options{.fsync = !no_fsync});
      httplib::Server server;
      register_routes(server, service, HttpOptions{image_root});
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      spdlog::set_level(spdlog::level::info);
      spdlog::info("listening on {}:{}", host, port);
      if (!server.listen(host, port)) throw Error(ErrorCode::kIo, fmt::format("cannot bind {}:{}", host, port));
      return kExitOk;
    }

    if (simulate->parsed()) {
      if (g.out.empty()) throw Error(ErrorCode::kInvalidArgument, "simulate needs --out DIR");
      const auto data = simulate_campaign(cfg);
      write_simulation(data, g.out);
      std::cout << fmt::format("{} labels, {} spammers, written to {}\n", data.labels.size(), data.spammers.size(),
                               g.out);
      return kExitOk;
    }

    if (assign->parsed()) {
      emit(g, render_plan(build_assignments(cfg.campaign), cfg.campaign));
      return kExitOk;
    }

    if (validate->parsed()) {
      AssignmentPlan plan;
      CampaignConfig campaign = cfg.campaign;
      if (plan_path) {
        const auto doc = nlohmann::json::parse(read_text_file(*plan_path));
        if (doc.contains("config")) campaign = doc.at("config").get<CampaignConfig>();
        plan = doc.at("plan").get<AssignmentPlan>();
      } else {
        plan = build_assignments(campaign);
      }
      const auto report = validate_assignments(plan, campaign);
      emit(g, validation_json(report).dump(2) + "\n");
      return report.ok() ? kExitOk : kExitValidation;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
