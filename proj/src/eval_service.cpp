#include "styleval/eval_service.hpp"

#include <fstream>
#include <iterator>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "styleval/errors.hpp"

namespace styleval {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_id(std::string_view prefix, std::string_view material) {
  return fmt::format("{}{:016x}", prefix, fnv1a(material));
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

bool is_open_state(SessionState s) {
  return s != SessionState::kFailed && s != SessionState::kComplete;
}

}  // namespace

ImageManifest ImageManifest::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  ImageManifest m;
  const auto& images = j.contains("images") ? j.at("images") : j;
  for (const auto& [token, path] : images.items()) {
    std::filesystem::path p = path.get<std::string>();
    if (p.is_relative() && !base.empty()) p = base / p;
    m.files.emplace(token, p);
  }
  return m;
}

nlohmann::json ImageManifest::to_json() const {
  nlohmann::json images = nlohmann::json::object();
  for (const auto& [token, path] : files) images[token] = path.string();
  return {{"images", std::move(images)}};
}

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::kCalibrating: return "calibrating";
    case SessionState::kPassed: return "passed";
    case SessionState::kFailed: return "failed";
    case SessionState::kInProgress: return "in_progress";
    case SessionState::kComplete: return "complete";
  }
  return "unknown";
}

SessionState session_state_from_string(std::string_view s) {
  if (s == "calibrating") return SessionState::kCalibrating;
  if (s == "passed") return SessionState::kPassed;
  if (s == "failed") return SessionState::kFailed;
  if (s == "in_progress") return SessionState::kInProgress;
  if (s == "complete") return SessionState::kComplete;
  throw Error(ErrorCode::kParse, fmt::format("unknown session state '{}'", s));
}

void to_json(nlohmann::json& j, const LabelEvent& e) {
  j = {{"type", "label"},
       {"seq", e.seq},
       {"session_id", e.session_id},
       {"evaluator_id", e.record.evaluator_id},
       {"image_id", e.record.image.to_string()},
       {"phase", to_string(e.record.phase)},
       {"judged_real", e.record.judged_real},
       {"elapsed_ms", e.record.elapsed_ms},
       {"timestamp", e.record.timestamp.to_iso8601()}};
}

// The image is resolved from its token only; callers with a ground truth
// replace it with the authoritative id.
void from_json(const nlohmann::json& j, LabelEvent& e) {
  e.seq = j.at("seq").get<std::uint64_t>();
  e.session_id = j.at("session_id").get<std::string>();
  e.record.evaluator_id = j.at("evaluator_id").get<std::string>();
  e.record.image = ImageId::parse(j.at("image_id").get<std::string>());
  e.record.phase = phase_from_string(j.at("phase").get<std::string>());
  e.record.judged_real = j.at("judged_real").get<int>();
  e.record.elapsed_ms = j.at("elapsed_ms").get<std::int64_t>();
  e.record.timestamp = UtcMillis::parse_iso8601(j.at("timestamp").get<std::string>());
}

nlohmann::json to_json(const SessionView& v) {
  nlohmann::json j = {{"session_id", v.session_id},
                      {"slot", v.slot},
                      {"state", to_string(v.state)},
                      {"phase", to_string(v.phase)},
                      {"answered", v.answered},
                      {"total", v.total},
                      {"calibration_total", v.calibration_total}};
  if (v.next) {
    j["next"] = {{"image_id", v.next->image_token}, {"url", v.next->url}};
  } else {
    j["next"] = nullptr;
  }
  return j;
}

namespace {

SessionView session_view_from_json(const nlohmann::json& j) {
  SessionView v;
  v.session_id = j.at("session_id").get<std::string>();
  v.slot = j.at("slot").get<int>();
  v.state = session_state_from_string(j.at("state").get<std::string>());
  v.phase = phase_from_string(j.at("phase").get<std::string>());
  v.answered = j.at("answered").get<int>();
  v.total = j.at("total").get<int>();
  v.calibration_total = j.at("calibration_total").get<int>();
  if (!j.at("next").is_null()) {
    v.next = ItemView{j["next"].at("image_id").get<std::string>(), j["next"].at("url").get<std::string>()};
  }
  return v;
}

}  // namespace

nlohmann::json to_json(const CampaignResults& r) {
  nlohmann::json excluded = nlohmann::json::object();
  for (const auto& [evaluator, ex] : r.filter.excluded) {
    excluded[evaluator] = {{"reason", to_string(ex.reason)}, {"accuracy", ex.accuracy}};
  }
  return {{"styles", r.hype.scores},
          {"unscored_styles", r.hype.unscored},
          {"image_error_rates", r.image_error_rates},
          {"retained_evaluators", r.filter.retained},
          {"excluded_evaluators", std::move(excluded)},
          {"completion",
           {{"slots", r.completion.slots},
            {"sessions_opened", r.completion.sessions_opened},
            {"sessions_failed", r.completion.sessions_failed},
            {"sessions_complete", r.completion.sessions_complete},
            {"measurement_labels", r.completion.measurement_labels},
            {"expected_measurement_labels", r.completion.expected_measurement_labels},
            {"fraction_complete", r.completion.fraction_complete}}}};
}

CampaignResults aggregate_campaign(std::span<const LabelRecord> labels, const GroundTruth& truth,
                                   const CampaignConfig& cfg) {
  CampaignResults r;
  r.filter = filter_evaluators(labels, truth, cfg);
  const auto kept = retained_generated_labels(labels, r.filter);
  std::vector<StyleId> styles;
  for (int s = 0; s < cfg.n_styles; ++s) styles.push_back(make_style(s));
  r.hype = hype_style_scores(kept, styles);
  r.image_error_rates = per_image_error_rates(kept);

  CompletionStats& c = r.completion;
  const AssignmentPlan plan = build_assignments(cfg);
  c.slots = static_cast<int>(plan.evaluators.size());
  for (const auto& t : plan.evaluators) c.expected_measurement_labels += static_cast<int>(t.items.size());

  struct Counts {
    int calibration = 0;
    int measurement = 0;
    int task_items = -1;
  };
  std::map<std::string, Counts> per_evaluator;
  for (const auto& l : labels) {
    Counts& counts = per_evaluator[l.evaluator_id];
    if (l.phase == Phase::kCalibration) {
      ++counts.calibration;
      continue;
    }
    ++counts.measurement;
    // Style offset and input chunk identify the task shape; blocks share it.
    if (counts.task_items < 0 && l.image.is_generated()) {
      const int input = *l.image.input_index;
      const int offset = ((l.image.style->index - input) % cfg.n_styles + cfg.n_styles) % cfg.n_styles;
      const int chunk = input / cfg.session_generated;
      const auto slot = static_cast<std::size_t>(chunk * cfg.n_styles + offset);
      if (slot < plan.evaluators.size()) counts.task_items = static_cast<int>(plan.evaluators[slot].items.size());
    }
  }
  c.sessions_opened = static_cast<int>(per_evaluator.size());
  for (const auto& [evaluator, counts] : per_evaluator) {
    c.measurement_labels += counts.measurement;
    if (counts.measurement == counts.task_items) ++c.sessions_complete;
    auto ex = r.filter.excluded.find(evaluator);
    if (counts.calibration == cfg.calibration_size && ex != r.filter.excluded.end() &&
        ex->second.reason == ExclusionReason::kCalibrationFail) {
      ++c.sessions_failed;
    }
  }
  c.fraction_complete = c.expected_measurement_labels == 0
                            ? 0.0
                            : static_cast<double>(c.measurement_labels) / c.expected_measurement_labels;
  return r;
}

struct EvalService::Campaign {
  std::string id;
  std::filesystem::path dir;
  CampaignConfig cfg;
  ImageManifest manifest;
  AssignmentPlan plan;
  GroundTruth truth;
  std::map<std::string, std::string> token_of;      // canonical -> opaque
  std::map<std::string, std::string> canonical_of;  // opaque -> canonical

  std::vector<Session> sessions;
  std::map<std::string, std::size_t> by_session;
  std::map<std::string, std::size_t> by_evaluator;
  std::vector<std::vector<SessionView>> acks;  // per session, one per answered item
  std::vector<LabelEvent> labels;

  std::uint64_t last_seq = 0;
  int labels_since_snapshot = 0;
  std::unique_ptr<EventLog> log;

  int calibration_total(const Session& s) const {
    return static_cast<int>(plan.evaluators[s.slot].calibration.size());
  }
  int total(const Session& s) const {
    return calibration_total(s) + static_cast<int>(plan.evaluators[s.slot].items.size());
  }
  const ImageId& item_at(const Session& s, int k) const {
    const auto& task = plan.evaluators[s.slot];
    const int cal = static_cast<int>(task.calibration.size());
    return k < cal ? task.calibration[k] : task.items[k - cal];
  }

  SessionView view(const Session& s) const {
    SessionView v;
    v.session_id = s.session_id;
    v.slot = s.slot;
    v.state = s.state;
    v.calibration_total = calibration_total(s);
    v.total = total(s);
    v.answered = s.cursor;
    v.phase = s.cursor < v.calibration_total ? Phase::kCalibration : Phase::kMeasurement;
    if (is_open_state(s.state) && s.cursor < v.total) {
      const std::string& token = token_of.at(item_at(s, s.cursor).to_string());
      v.next = ItemView{token, "/api/images/" + token};
    }
    return v;
  }

  void apply_open(const std::string& session_id, const std::string& evaluator_id, int slot) {
    if (slot != static_cast<int>(sessions.size()) || slot >= static_cast<int>(plan.evaluators.size())) {
      throw Error(ErrorCode::kParse, fmt::format("campaign {}: session for slot {} out of order", id, slot));
    }
    Session s;
    s.session_id = session_id;
    s.evaluator_id = evaluator_id;
    s.slot = slot;
    s.state = calibration_total(s) > 0 ? SessionState::kCalibrating : SessionState::kPassed;
    by_session[session_id] = sessions.size();
    by_evaluator[evaluator_id] = sessions.size();
    sessions.push_back(std::move(s));
    acks.emplace_back();
  }

  // Shared by live submission and replay; `event.record.image` must be the
  // session's cursor item.
  const SessionView& apply_label(const LabelEvent& event) {
    const std::size_t idx = by_session.at(event.session_id);
    Session& s = sessions[idx];
    const int cal = calibration_total(s);
    if (s.cursor < cal) {
      const bool truth_real = item_at(s, s.cursor).kind == ImageKind::kReal;
      if ((event.record.judged_real == 1) == truth_real) ++s.calibration_correct;
    }
    ++s.cursor;
    if (s.cursor == cal && s.state == SessionState::kCalibrating) {
      const double acc = cal == 0 ? 1.0 : static_cast<double>(s.calibration_correct) / cal;
      s.state = acc >= cfg.calibration_pass_threshold ? SessionState::kPassed : SessionState::kFailed;
    } else if (s.cursor > cal) {
      s.state = s.cursor == total(s) ? SessionState::kComplete : SessionState::kInProgress;
    }
    labels.push_back(event);
    last_seq = std::max(last_seq, event.seq);
    acks[idx].push_back(view(s));
    return acks[idx].back();
  }

  LabelEvent resolve(LabelEvent e) const {
    e.record.image = truth.lookup(e.record.image.to_string());
    return e;
  }

  nlohmann::json snapshot() const {
    nlohmann::json sessions_json = nlohmann::json::array();
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      const Session& s = sessions[i];
      nlohmann::json acks_json = nlohmann::json::array();
      for (const auto& a : acks[i]) acks_json.push_back(to_json(a));
      sessions_json.push_back({{"session_id", s.session_id},
                               {"evaluator_id", s.evaluator_id},
                               {"slot", s.slot},
                               {"state", to_string(s.state)},
                               {"cursor", s.cursor},
                               {"calibration_correct", s.calibration_correct},
                               {"acks", std::move(acks_json)}});
    }
    return {{"seq", last_seq}, {"sessions", std::move(sessions_json)}, {"labels", labels}};
  }

  void restore(const nlohmann::json& snap) {
    for (const auto& sj : snap.at("sessions")) {
      apply_open(sj.at("session_id").get<std::string>(), sj.at("evaluator_id").get<std::string>(),
                 sj.at("slot").get<int>());
      Session& s = sessions.back();
      s.state = session_state_from_string(sj.at("state").get<std::string>());
      s.cursor = sj.at("cursor").get<int>();
      s.calibration_correct = sj.at("calibration_correct").get<int>();
      for (const auto& a : sj.at("acks")) acks.back().push_back(session_view_from_json(a));
    }
    for (const auto& lj : snap.at("labels")) labels.push_back(resolve(lj.get<LabelEvent>()));
    last_seq = snap.at("seq").get<std::uint64_t>();
  }
};

EvalService::EvalService(std::filesystem::path data_dir, Options options)
    : data_dir_(std::move(data_dir)), options_(options) {
  std::filesystem::create_directories(data_dir_);
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir_)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "campaign.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) load_campaign(d);
}

EvalService::~EvalService() = default;

void EvalService::load_campaign(const std::filesystem::path& dir) {
  std::ifstream in(dir / "campaign.json");
  const auto meta = nlohmann::json::parse(in);
  auto c = std::make_unique<Campaign>();
  c->id = meta.at("campaign_id").get<std::string>();
  c->dir = dir;
  c->cfg = meta.at("config").get<CampaignConfig>();
  c->manifest = ImageManifest::from_json(meta.at("manifest"));
  c->plan = build_assignments(c->cfg);
  c->truth = GroundTruth::for_campaign(c->cfg);
  for (const auto& [canonical, id] : c->truth.images()) {
    const std::string token = image_token(c->id, id);
    c->token_of[canonical] = token;
    c->canonical_of[token] = canonical;
  }

  std::uint64_t snap_seq = 0;
  if (std::filesystem::exists(dir / "snapshot.json")) {
    std::ifstream sin(dir / "snapshot.json");
    c->restore(nlohmann::json::parse(sin));
    snap_seq = c->last_seq;
  }
  c->log = std::make_unique<EventLog>(dir / "events.jsonl", EventLog::Options{options_.fsync});
  for (const auto& rec : c->log->recovered()) {
    const auto seq = rec.at("seq").get<std::uint64_t>();
    if (seq <= snap_seq) continue;
    if (seq <= c->last_seq) {
      throw Error(ErrorCode::kParse, fmt::format("campaign {}: sequence {} repeats", c->id, seq));
    }
    const auto type = rec.at("type").get<std::string>();
    if (type == "session_opened") {
      c->apply_open(rec.at("session_id").get<std::string>(), rec.at("evaluator_id").get<std::string>(),
                    rec.at("slot").get<int>());
      c->last_seq = seq;
    } else if (type == "label") {
      const LabelEvent e = c->resolve(rec.get<LabelEvent>());
      const Session& s = c->sessions.at(c->by_session.at(e.session_id));
      if (c->item_at(s, s.cursor) != e.record.image) {
        throw Error(ErrorCode::kParse, fmt::format("campaign {}: event {} is out of order", c->id, seq));
      }
      c->apply_label(e);
    } else {
      throw Error(ErrorCode::kParse, fmt::format("campaign {}: unknown event type '{}'", c->id, type));
    }
  }

  for (const auto& s : c->sessions) session_to_campaign_[s.session_id] = c->id;
  for (const auto& [token, canonical] : c->canonical_of) image_tokens_[token] = {c->id, canonical};
  spdlog::info("campaign {}: replayed {} sessions, {} labels", c->id, c->sessions.size(), c->labels.size());
  campaigns_.emplace(c->id, std::move(c));
}

EvalService::Campaign& EvalService::campaign(const std::string& id) {
  auto it = campaigns_.find(id);
  if (it == campaigns_.end()) throw Error(ErrorCode::kNotFound, fmt::format("unknown campaign '{}'", id));
  return *it->second;
}

const EvalService::Campaign& EvalService::campaign(const std::string& id) const {
  auto it = campaigns_.find(id);
  if (it == campaigns_.end()) throw Error(ErrorCode::kNotFound, fmt::format("unknown campaign '{}'", id));
  return *it->second;
}

std::string EvalService::image_token(const std::string& campaign_id, const ImageId& id) const {
  return hex_id("img_", campaign_id + "|" + id.to_string());
}

std::string EvalService::create_campaign(const CampaignConfig& cfg, const ImageManifest& manifest) {
  cfg.validate();
  const AssignmentPlan plan = build_assignments(cfg);
  const ValidationReport report = validate_assignments(plan, cfg);
  if (!report.ok()) {
    throw Error(ErrorCode::kConstraintInfeasible,
                fmt::format("assignment plan has {} violations", report.violations.size()));
  }
  const GroundTruth truth = GroundTruth::for_campaign(cfg);
  std::vector<std::string> gaps;
  for (const auto& [canonical, id] : truth.images()) {
    auto it = manifest.files.find(canonical);
    if (it == manifest.files.end() || !std::filesystem::exists(it->second)) {
      gaps.push_back(id.is_generated()
                         ? fmt::format("{} (input {}, style {})", canonical, *id.input_index, id.style->index)
                         : canonical);
    }
  }
  if (!gaps.empty()) {
    const std::size_t shown = std::min<std::size_t>(gaps.size(), 10);
    throw Error(ErrorCode::kManifestIncomplete,
                fmt::format("manifest is missing {} image(s): {}{}", gaps.size(),
                            fmt::join(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(shown), ", "),
                            gaps.size() > shown ? ", ..." : ""));
  }

  nlohmann::json cfg_json = cfg;
  const nlohmann::json manifest_json = manifest.to_json();
  const std::string id = hex_id("camp_", cfg_json.dump() + manifest_json.dump());

  std::unique_lock lock(mutex_);
  if (campaigns_.contains(id)) return id;
  const auto dir = data_dir_ / id;
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "campaign.json",
                    nlohmann::json{{"campaign_id", id}, {"config", cfg_json}, {"manifest", manifest_json}}.dump(1) + "\n");
  load_campaign(dir);
  return id;
}

OpenedSession EvalService::open_session(const std::string& campaign_id, const std::string& evaluator_id) {
  if (evaluator_id.empty()) throw Error(ErrorCode::kInvalidArgument, "evaluator_id must not be empty");
  std::unique_lock lock(mutex_);
  Campaign& c = campaign(campaign_id);
  if (c.by_evaluator.contains(evaluator_id)) {
    throw Error(ErrorCode::kAlreadyEnrolled, fmt::format("evaluator '{}' already enrolled", evaluator_id));
  }
  const int slot = static_cast<int>(c.sessions.size());
  if (slot >= static_cast<int>(c.plan.evaluators.size())) {
    throw Error(ErrorCode::kCampaignFull, fmt::format("all {} evaluator slots are taken", slot));
  }
  const std::string session_id = hex_id("sess_", fmt::format("{}|{}|{}", c.id, slot, evaluator_id));
  c.log->append({{"type", "session_opened"},
                 {"seq", c.last_seq + 1},
                 {"session_id", session_id},
                 {"evaluator_id", evaluator_id},
                 {"slot", slot},
                 {"timestamp", UtcMillis::now().to_iso8601()}});
  ++c.last_seq;
  c.apply_open(session_id, evaluator_id, slot);
  session_to_campaign_[session_id] = c.id;

  OpenedSession out;
  out.view = c.view(c.sessions.back());
  for (const auto& id : c.plan.evaluators[slot].calibration) out.calibration_tokens.push_back(c.token_of.at(id.to_string()));
  return out;
}

SessionView EvalService::next(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  auto it = session_to_campaign_.find(session_id);
  if (it == session_to_campaign_.end()) {
    throw Error(ErrorCode::kNotFound, fmt::format("unknown session '{}'", session_id));
  }
  const Campaign& c = campaign(it->second);
  return c.view(c.sessions[c.by_session.at(session_id)]);
}

SessionView EvalService::submit_label(const std::string& session_id, const std::string& image_token,
                                      int judged_real, std::int64_t elapsed_ms,
                                      std::optional<UtcMillis> timestamp) {
  if (judged_real != 0 && judged_real != 1) {
    throw Error(ErrorCode::kInvalidArgument, "judged_real must be 0 or 1");
  }
  if (elapsed_ms < 0) throw Error(ErrorCode::kInvalidArgument, "elapsed_ms must be >= 0");
  std::unique_lock lock(mutex_);
  auto cit = session_to_campaign_.find(session_id);
  if (cit == session_to_campaign_.end()) {
    throw Error(ErrorCode::kNotFound, fmt::format("unknown session '{}'", session_id));
  }
  Campaign& c = campaign(cit->second);
  const std::size_t idx = c.by_session.at(session_id);
  const Session& s = c.sessions[idx];

  // Replayed request for an item already answered with the same judgement.
  for (int k = s.cursor - 1; k >= 0; --k) {
    if (c.token_of.at(c.item_at(s, k).to_string()) != image_token) continue;
    for (const auto& e : c.labels) {
      if (e.session_id == session_id && e.record.image == c.item_at(s, k)) {
        if (e.record.judged_real == judged_real) return c.acks[idx][k];
        break;
      }
    }
    throw Error(ErrorCode::kOutOfOrder, "item already answered with a different judgement");
  }
  if (!is_open_state(s.state)) {
    throw Error(ErrorCode::kSessionClosed, fmt::format("session is {}", to_string(s.state)));
  }
  const ImageId& expected = c.item_at(s, s.cursor);
  if (c.token_of.at(expected.to_string()) != image_token) {
    throw Error(ErrorCode::kOutOfOrder, fmt::format("expected image {}, got {}",
                                                    c.token_of.at(expected.to_string()), image_token));
  }

  LabelEvent e;
  e.seq = c.last_seq + 1;
  e.session_id = session_id;
  e.record.evaluator_id = s.evaluator_id;
  e.record.image = expected;
  e.record.judged_real = judged_real;
  e.record.phase = s.cursor < c.calibration_total(s) ? Phase::kCalibration : Phase::kMeasurement;
  e.record.elapsed_ms = elapsed_ms;
  e.record.timestamp = timestamp.value_or(UtcMillis::now());
  c.log->append(e);
  const SessionView ack = c.apply_label(e);
  maybe_snapshot(c);
  return ack;
}

void EvalService::maybe_snapshot(Campaign& c) {
  if (options_.snapshot_every <= 0) return;
  if (++c.labels_since_snapshot < options_.snapshot_every) return;
  write_file_atomic(c.dir / "snapshot.json", c.snapshot().dump() + "\n");
  c.labels_since_snapshot = 0;
}

CampaignResults EvalService::get_results(const std::string& campaign_id) const {
  std::vector<LabelRecord> all;
  CampaignConfig cfg;
  GroundTruth truth;
  int opened = 0;
  {
    std::shared_lock lock(mutex_);
    const Campaign& c = campaign(campaign_id);
    cfg = c.cfg;
    truth = c.truth;
    for (const auto& e : c.labels) all.push_back(e.record);
    opened = static_cast<int>(c.sessions.size());
  }
  CampaignResults r = aggregate_campaign(all, truth, cfg);
  r.completion.sessions_opened = opened;
  return r;
}

ImageBlob EvalService::serve_image(const std::string& token) const {
  std::filesystem::path path;
  {
    std::shared_lock lock(mutex_);
    auto it = image_tokens_.find(token);
    if (it == image_tokens_.end()) throw Error(ErrorCode::kNotFound, "unknown image");
    const Campaign& c = campaign(it->second.first);
    auto f = c.manifest.files.find(it->second.second);
    if (f == c.manifest.files.end()) throw Error(ErrorCode::kNotFound, "unknown image");
    path = f->second;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "image file unavailable");
  return {content_type_for(path), std::string(std::istreambuf_iterator<char>(in), {})};
}

std::vector<LabelRecord> EvalService::labels(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  std::vector<LabelRecord> out;
  for (const auto& e : campaign(campaign_id).labels) out.push_back(e.record);
  return out;
}

std::string EvalService::export_labels_csv(const std::string& campaign_id) const {
  return labels_to_csv(labels(campaign_id));
}

GroundTruth EvalService::ground_truth(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  return campaign(campaign_id).truth;
}

AssignmentPlan EvalService::plan(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  return campaign(campaign_id).plan;
}

std::vector<Session> EvalService::sessions(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  return campaign(campaign_id).sessions;
}

std::vector<std::string> EvalService::campaign_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, c] : campaigns_) ids.push_back(id);
  return ids;
}

}  // namespace styleval
