#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "styleval/core_types.hpp"
#include "styleval/event_log.hpp"
#include "styleval/hype_style.hpp"

namespace styleval {

// Canonical image token -> file on disk.
struct ImageManifest {
  std::map<std::string, std::filesystem::path> files;

  // Paths that are relative are resolved against `base`.
  static ImageManifest from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  nlohmann::json to_json() const;
};

enum class SessionState { kCalibrating, kPassed, kFailed, kInProgress, kComplete };

std::string_view to_string(SessionState state);
SessionState session_state_from_string(std::string_view s);

struct Session {
  std::string session_id;
  std::string evaluator_id;
  int slot = 0;
  SessionState state = SessionState::kCalibrating;
  int cursor = 0;  // next unanswered position in calibration + items
  int calibration_correct = 0;
};

// Wire/persisted form of one label.
struct LabelEvent {
  std::uint64_t seq = 0;
  std::string session_id;
  LabelRecord record;
};

void to_json(nlohmann::json& j, const LabelEvent& e);
void from_json(const nlohmann::json& j, LabelEvent& e);

// What the client sees: never the kind of an unanswered image.
struct ItemView {
  std::string image_token;
  std::string url;
};

struct SessionView {
  std::string session_id;
  int slot = 0;
  SessionState state = SessionState::kCalibrating;
  Phase phase = Phase::kCalibration;
  int answered = 0;
  int total = 0;
  int calibration_total = 0;
  std::optional<ItemView> next;
};

struct OpenedSession {
  SessionView view;
  std::vector<std::string> calibration_tokens;
};

struct CompletionStats {
  int slots = 0;
  int sessions_opened = 0;
  int sessions_failed = 0;
  int sessions_complete = 0;
  int measurement_labels = 0;
  int expected_measurement_labels = 0;
  double fraction_complete = 0.0;
};

struct CampaignResults {
  HypeStyleResult hype;
  std::map<std::string, double> image_error_rates;
  FilterResult filter;
  CompletionStats completion;
};

struct ImageBlob {
  std::string content_type;
  std::string bytes;
};

nlohmann::json to_json(const SessionView& v);
nlohmann::json to_json(const CampaignResults& r);

// Aggregates from labels alone. The service and offline analysis both use it.
CampaignResults aggregate_campaign(std::span<const LabelRecord> labels, const GroundTruth& truth,
                                   const CampaignConfig& cfg);

// Runs human-evaluation campaigns. Every mutation goes through one writer
// lock and is appended to the campaign's event log before it is
// acknowledged; reads share the lock. Constructing a service over an existing
// data directory replays every campaign found there.
class EvalService {
 public:
  struct Options {
    bool fsync = true;
    int snapshot_every = 256;  // label events between snapshots; 0 disables
  };

  EvalService(std::filesystem::path data_dir, Options options);
  explicit EvalService(std::filesystem::path data_dir) : EvalService(std::move(data_dir), Options{}) {}
  ~EvalService();

  EvalService(const EvalService&) = delete;
  EvalService& operator=(const EvalService&) = delete;

  // Same config and manifest give the same id; re-creating returns it.
  std::string create_campaign(const CampaignConfig& cfg, const ImageManifest& manifest);

  OpenedSession open_session(const std::string& campaign_id, const std::string& evaluator_id);
  SessionView next(const std::string& session_id) const;
  SessionView submit_label(const std::string& session_id, const std::string& image_token,
                           int judged_real, std::int64_t elapsed_ms,
                           std::optional<UtcMillis> timestamp = std::nullopt);

  CampaignResults get_results(const std::string& campaign_id) const;
  ImageBlob serve_image(const std::string& image_token) const;

  // Offline-analysis exports.
  std::string export_labels_csv(const std::string& campaign_id) const;
  std::vector<LabelRecord> labels(const std::string& campaign_id) const;
  GroundTruth ground_truth(const std::string& campaign_id) const;
  AssignmentPlan plan(const std::string& campaign_id) const;
  std::vector<Session> sessions(const std::string& campaign_id) const;
  std::vector<std::string> campaign_ids() const;

  // Token used in image URLs; identical shape for every kind of image.
  std::string image_token(const std::string& campaign_id, const ImageId& id) const;

 private:
  struct Campaign;

  Campaign& campaign(const std::string& id);
  const Campaign& campaign(const std::string& id) const;
  void load_campaign(const std::filesystem::path& dir);
  void maybe_snapshot(Campaign& c);

  std::filesystem::path data_dir_;
  Options options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<Campaign>> campaigns_;
  std::map<std::string, std::string> session_to_campaign_;
  std::map<std::string, std::pair<std::string, std::string>> image_tokens_;  // token -> (campaign, image)
};

}  // namespace styleval
