#pragma once

#include <filesystem>
#include <string>

#include "styleval/errors.hpp"
#include "styleval/eval_service.hpp"

namespace httplib {
class Server;
}

namespace styleval {

struct HttpOptions {
  // Relative manifest paths in POST /api/campaigns resolve against this.
  std::filesystem::path image_root;
};

// Routes:
//   POST /api/campaigns                    {config, manifest} -> {campaign_id, ...}
//   POST /api/campaigns/{id}/sessions      {evaluator_id} -> session view + calibration
//   GET  /api/sessions/{id}/next           -> session view
//   POST /api/sessions/{id}/labels         {image_id, judged_real, elapsed_ms} -> session view
//   GET  /api/campaigns/{id}/results       -> live aggregates
//   GET  /api/campaigns/{id}/labels.csv    -> exported labels
//   GET  /api/images/{image_id}            -> image bytes
// Errors are {code, message}.
void register_routes(httplib::Server& server, EvalService& service, const HttpOptions& options = {});

int http_status_for(ErrorCode code);

}  // namespace styleval
