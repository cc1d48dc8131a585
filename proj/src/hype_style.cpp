#include "styleval/hype_style.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "styleval/csv.hpp"
#include "styleval/errors.hpp"
#include "styleval/rng.hpp"

namespace styleval {
namespace {

int chunk_count(const CampaignConfig& cfg) {
  return (cfg.n_inputs + cfg.session_generated - 1) / cfg.session_generated;
}

// Inputs [first, first + size) are judged by slot `slot`.
std::pair<int, int> chunk_of_slot(const CampaignConfig& cfg, int slot) {
  const int chunk = (slot / cfg.n_styles) % chunk_count(cfg);
  const int first = chunk * cfg.session_generated;
  return {first, std::min(cfg.session_generated, cfg.n_inputs - first)};
}

// Seed streams per slot.
enum Stream : std::uint64_t { kRealDraw = 0, kTaskOrder = 1, kCalibrationOrder = 2 };

std::uint64_t slot_seed(const CampaignConfig& cfg, int slot, Stream stream) {
  return mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(slot) * 3 + stream);
}

}  // namespace

int CampaignConfig::evaluator_slots() const {
  return repetitions * n_styles * chunk_count(*this);
}

void CampaignConfig::validate() const {
  if (n_inputs < 1 || n_styles < 1) {
    throw Error(ErrorCode::kInvalidArgument, "campaign needs at least one input and one style");
  }
  if (repetitions < 1) throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  if (session_generated < 1) {
    throw Error(ErrorCode::kInvalidArgument, "session_generated must be >= 1");
  }
  if (session_generated > n_inputs) {
    throw Error(ErrorCode::kConstraintInfeasible,
                fmt::format("session_generated={} exceeds n_inputs={}: an evaluator would see two "
                            "styles of one input",
                            session_generated, n_inputs));
  }
  if (session_real < 0 || session_real > real_pool_size) {
    throw Error(ErrorCode::kConstraintInfeasible,
                fmt::format("session_real={} cannot be drawn from a real pool of {}", session_real,
                            real_pool_size));
  }
  if (calibration_size < 0 || calibration_size % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "calibration_size must be even and >= 0");
  }
  if (calibration_pass_threshold < 0.0 || calibration_pass_threshold > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "calibration_pass_threshold must be in [0, 1]");
  }
}

ImageId generated_image(const CampaignConfig& cfg, int input_index, int style) {
  return ImageId::generated(input_index * cfg.n_styles + style, input_index, make_style(style));
}

std::vector<ImageId> measurement_generated_images(const CampaignConfig& cfg) {
  std::vector<ImageId> out;
  out.reserve(cfg.combos());
  for (int i = 0; i < cfg.n_inputs; ++i) {
    for (int s = 0; s < cfg.n_styles; ++s) out.push_back(generated_image(cfg, i, s));
  }
  return out;
}

std::vector<ImageId> measurement_real_images(const CampaignConfig& cfg) {
  std::vector<ImageId> out;
  for (int r = 0; r < cfg.real_pool_size; ++r) out.push_back(ImageId::real(r));
  return out;
}

std::vector<ImageId> calibration_images(const CampaignConfig& cfg) {
  const int half = cfg.calibration_size / 2;
  std::vector<ImageId> out;
  for (int j = 0; j < half; ++j) out.push_back(ImageId::real(cfg.real_pool_size + j));
  for (int j = 0; j < half; ++j) out.push_back(generated_image(cfg, cfg.n_inputs + j, j % cfg.n_styles));
  return out;
}

GroundTruth::GroundTruth(std::span<const ImageId> images) {
  for (const auto& id : images) {
    validate(id);
    images_.emplace(id.to_string(), id);
  }
}

GroundTruth GroundTruth::for_campaign(const CampaignConfig& cfg) {
  std::vector<ImageId> all = measurement_generated_images(cfg);
  for (auto& id : measurement_real_images(cfg)) all.push_back(std::move(id));
  for (auto& id : calibration_images(cfg)) all.push_back(std::move(id));
  return GroundTruth(all);
}

const ImageId& GroundTruth::lookup(std::string_view token) const {
  auto it = images_.find(token);
  if (it == images_.end()) {
    throw Error(ErrorCode::kNotFound, fmt::format("image '{}' is not in the ground truth", token));
  }
  return it->second;
}

bool GroundTruth::contains(std::string_view token) const { return images_.find(token) != images_.end(); }

AssignmentPlan build_assignments(const CampaignConfig& cfg) {
  cfg.validate();
  const auto tutorial = calibration_images(cfg);
  AssignmentPlan plan;
  plan.evaluators.reserve(cfg.evaluator_slots());
  for (int slot = 0; slot < cfg.evaluator_slots(); ++slot) {
    const int offset = slot % cfg.n_styles;
    const auto [first, size] = chunk_of_slot(cfg, slot);

    EvaluatorTask task;
    task.slot = slot;
    for (int i = first; i < first + size; ++i) {
      task.items.push_back(generated_image(cfg, i, (offset + i) % cfg.n_styles));
    }

    std::vector<int> pool(cfg.real_pool_size);
    std::iota(pool.begin(), pool.end(), 0);
    Rng draw(slot_seed(cfg, slot, kRealDraw));
    draw.shuffle(std::span<int>(pool));
    for (int r = 0; r < cfg.session_real; ++r) task.items.push_back(ImageId::real(pool[r]));

    Rng order(slot_seed(cfg, slot, kTaskOrder));
    order.shuffle(std::span<ImageId>(task.items));

    task.calibration = tutorial;
    Rng cal(slot_seed(cfg, slot, kCalibrationOrder));
    cal.shuffle(std::span<ImageId>(task.calibration));

    plan.evaluators.push_back(std::move(task));
  }
  return plan;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kCoverage: return "coverage";
    case ViolationKind::kDuplicateInput: return "duplicate_input";
    case ViolationKind::kWrongSessionSize: return "wrong_session_size";
    case ViolationKind::kCalibration: return "calibration";
    case ViolationKind::kUnknownImage: return "unknown_image";
  }
  return "unknown";
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [kind](const Violation& v) { return v.kind == kind; }));
}

ValidationReport validate_assignments(const AssignmentPlan& plan, const CampaignConfig& cfg) {
  ValidationReport report;
  auto add = [&](Violation v) { report.violations.push_back(v); };

  const bool shape_ok = cfg.n_inputs >= 1 && cfg.n_styles >= 1 && cfg.session_generated >= 1;
  std::vector<int> coverage(shape_ok ? static_cast<std::size_t>(cfg.combos()) : 0, 0);
  std::set<std::string> measured;
  for (const auto& id : measurement_generated_images(cfg)) measured.insert(id.to_string());
  for (const auto& id : measurement_real_images(cfg)) measured.insert(id.to_string());

  for (const auto& task : plan.evaluators) {
    std::map<int, int> inputs_seen;
    int generated = 0;
    int real = 0;
    for (const auto& id : task.items) {
      if (id.is_generated() && id.input_index && id.style) {
        const int in = *id.input_index;
        const int st = id.style->index;
        if (in < 0 || in >= cfg.n_inputs || st < 0 || st >= cfg.n_styles) {
          add({ViolationKind::kUnknownImage, task.slot, in, st, 0, 0});
          continue;
        }
        ++generated;
        ++coverage[static_cast<std::size_t>(in) * cfg.n_styles + st];
        ++inputs_seen[in];
      } else if (id.kind == ImageKind::kReal) {
        if (id.index < 0 || id.index >= cfg.real_pool_size) {
          add({ViolationKind::kUnknownImage, task.slot, -1, -1, 0, 0});
          continue;
        }
        ++real;
      } else {
        add({ViolationKind::kUnknownImage, task.slot, -1, -1, 0, 0});
      }
    }
    for (const auto& [input, n] : inputs_seen) {
      if (n > 1) add({ViolationKind::kDuplicateInput, task.slot, input, -1, 1, n});
    }
    if (shape_ok) {
      const int expected = chunk_of_slot(cfg, task.slot).second;
      if (generated != expected) {
        add({ViolationKind::kWrongSessionSize, task.slot, -1, -1, expected, generated});
      }
    }
    if (real != cfg.session_real) {
      add({ViolationKind::kWrongSessionSize, task.slot, -1, -1, cfg.session_real, real});
    }

    int cal_real = 0;
    bool overlap = false;
    for (const auto& id : task.calibration) {
      if (id.kind == ImageKind::kReal) ++cal_real;
      if (measured.contains(id.to_string())) overlap = true;
    }
    const int cal_total = static_cast<int>(task.calibration.size());
    if (overlap || cal_total != cfg.calibration_size || 2 * cal_real != cal_total) {
      add({ViolationKind::kCalibration, task.slot, -1, -1, cfg.calibration_size, cal_total});
    }
  }

  for (std::size_t c = 0; c < coverage.size(); ++c) {
    if (coverage[c] != cfg.repetitions) {
      add({ViolationKind::kCoverage, -1, static_cast<int>(c) / cfg.n_styles,
           static_cast<int>(c) % cfg.n_styles, cfg.repetitions, coverage[c]});
    }
  }
  return report;
}

double calibration_accuracy(std::span<const LabelRecord> labels, const GroundTruth& truth) {
  if (labels.empty()) throw Error(ErrorCode::kNoCalibrationData, "no calibration labels");
  int correct = 0;
  for (const auto& l : labels) {
    if (l.phase != Phase::kCalibration) {
      throw Error(ErrorCode::kInvalidArgument, "calibration_accuracy given a measurement label");
    }
    const bool is_real = truth.lookup(l.image.to_string()).kind == ImageKind::kReal;
    if ((l.judged_real == 1) == is_real) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::string_view to_string(ExclusionReason reason) {
  return reason == ExclusionReason::kCalibrationFail ? "CalibrationFail" : "NoCalibrationData";
}

FilterResult filter_evaluators(std::span<const LabelRecord> labels, const GroundTruth& truth,
                               const CampaignConfig& cfg) {
  std::map<std::string, std::vector<LabelRecord>> calibration;
  std::set<std::string> everyone;
  for (const auto& l : labels) {
    everyone.insert(l.evaluator_id);
    if (l.phase == Phase::kCalibration) calibration[l.evaluator_id].push_back(l);
  }
  FilterResult result;
  for (const auto& evaluator : everyone) {
    auto it = calibration.find(evaluator);
    if (it == calibration.end()) {
      result.excluded[evaluator] = {ExclusionReason::kNoCalibrationData, 0.0};
      continue;
    }
    const double acc = calibration_accuracy(it->second, truth);
    if (acc >= cfg.calibration_pass_threshold) {
      result.retained.insert(evaluator);
    } else {
      result.excluded[evaluator] = {ExclusionReason::kCalibrationFail, acc};
    }
  }
  return result;
}

std::vector<LabelRecord> retained_generated_labels(std::span<const LabelRecord> labels,
                                                   const FilterResult& filter) {
  std::vector<LabelRecord> out;
  for (const auto& l : labels) {
    if (l.phase == Phase::kMeasurement && l.image.is_generated() &&
        filter.retained.contains(l.evaluator_id)) {
      out.push_back(l);
    }
  }
  return out;
}

double image_error_rate(std::span<const LabelRecord> labels) {
  if (labels.empty()) throw Error(ErrorCode::kNoData, "no labels for image");
  int sum = 0;
  for (const auto& l : labels) sum += l.judged_real;
  return static_cast<double>(sum) / static_cast<double>(labels.size());
}

std::map<std::string, double> per_image_error_rates(std::span<const LabelRecord> labels) {
  std::map<std::string, std::vector<LabelRecord>> by_image;
  for (const auto& l : labels) by_image[l.image.to_string()].push_back(l);
  std::map<std::string, double> out;
  for (const auto& [token, ls] : by_image) out[token] = image_error_rate(ls);
  return out;
}

HypeStyleResult hype_style_scores(std::span<const LabelRecord> labels,
                                  std::span<const StyleId> expected_styles) {
  std::map<StyleId, std::pair<int, int>> acc;  // sum, count
  for (const auto& l : labels) {
    if (!l.image.style) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("label on {} has no style", l.image.to_string()));
    }
    auto& [sum, count] = acc[*l.image.style];
    sum += l.judged_real;
    ++count;
  }
  HypeStyleResult result;
  for (const auto& [style, sc] : acc) {
    result.scores.push_back({style, static_cast<double>(sc.first) / sc.second, sc.first, sc.second});
  }
  for (const auto& s : expected_styles) {
    if (!acc.contains(s)) result.unscored.push_back(s);
  }
  std::sort(result.unscored.begin(), result.unscored.end());
  return result;
}

// ---- JSON / CSV ----

void to_json(nlohmann::json& j, const CampaignConfig& c) {
  j = {{"n_inputs", c.n_inputs},
       {"n_styles", c.n_styles},
       {"repetitions", c.repetitions},
       {"session_generated", c.session_generated},
       {"session_real", c.session_real},
       {"real_pool_size", c.real_pool_size},
       {"calibration_size", c.calibration_size},
       {"calibration_pass_threshold", c.calibration_pass_threshold},
       {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, CampaignConfig& c) {
  const CampaignConfig d;
  c.n_inputs = j.value("n_inputs", d.n_inputs);
  c.n_styles = j.value("n_styles", d.n_styles);
  c.repetitions = j.value("repetitions", d.repetitions);
  c.session_generated = j.value("session_generated", d.session_generated);
  c.session_real = j.value("session_real", d.session_real);
  c.real_pool_size = j.value("real_pool_size", d.real_pool_size);
  c.calibration_size = j.value("calibration_size", d.calibration_size);
  c.calibration_pass_threshold = j.value("calibration_pass_threshold", d.calibration_pass_threshold);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
}

void to_json(nlohmann::json& j, const AssignmentPlan& p) {
  nlohmann::json evaluators = nlohmann::json::array();
  for (const auto& t : p.evaluators) {
    evaluators.push_back({{"slot", t.slot}, {"calibration", t.calibration}, {"items", t.items}});
  }
  j = {{"evaluators", std::move(evaluators)}};
}

void from_json(const nlohmann::json& j, AssignmentPlan& p) {
  p.evaluators.clear();
  for (const auto& e : j.at("evaluators")) {
    p.evaluators.push_back({e.at("slot").get<int>(), e.at("calibration").get<std::vector<ImageId>>(),
                            e.at("items").get<std::vector<ImageId>>()});
  }
}

void to_json(nlohmann::json& j, const GroundTruth& g) {
  j = nlohmann::json::object();
  for (const auto& [token, id] : g.images()) j[token] = id;
}

void from_json(const nlohmann::json& j, GroundTruth& g) {
  std::vector<ImageId> ids;
  for (const auto& [token, value] : j.items()) {
    ImageId id = value.get<ImageId>();
    if (id.to_string() != token) {
      throw Error(ErrorCode::kParse,
                  fmt::format("ground truth key '{}' does not match its image {}", token, id.to_string()));
    }
    ids.push_back(std::move(id));
  }
  g = GroundTruth(ids);
}

void to_json(nlohmann::json& j, const StyleHumanScore& s) {
  j = {{"style", s.style},
       {"micro_average", s.micro_average},
       {"label_sum", s.label_sum},
       {"label_count", s.label_count}};
}

void from_json(const nlohmann::json& j, StyleHumanScore& s) {
  s.style = j.at("style").get<StyleId>();
  s.micro_average = j.at("micro_average").get<double>();
  s.label_sum = j.at("label_sum").get<int>();
  s.label_count = j.at("label_count").get<int>();
}

void to_json(nlohmann::json& j, const Violation& v) {
  j = {{"kind", to_string(v.kind)}, {"slot", v.slot},         {"input_index", v.input_index},
       {"style", v.style},          {"expected", v.expected}, {"actual", v.actual}};
}

std::string labels_to_csv(std::span<const LabelRecord> labels) {
  std::string out = "evaluator_id,image_id,phase,judged_real,elapsed_ms,timestamp\n";
  for (const auto& l : labels) {
    out += csv::join({l.evaluator_id, l.image.to_string(), std::string(to_string(l.phase)),
                      std::to_string(l.judged_real), std::to_string(l.elapsed_ms),
                      l.timestamp.to_iso8601()});
    out += '\n';
  }
  return out;
}

std::vector<LabelRecord> labels_from_csv(std::string_view text, const GroundTruth& truth) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows[0] != "evaluator_id,image_id,phase,judged_real,elapsed_ms,timestamp") {
    throw Error(ErrorCode::kParse,
                "labels CSV line 1: expected header evaluator_id,image_id,phase,judged_real,elapsed_ms,timestamp");
  }
  std::vector<LabelRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    try {
      const auto f = csv::split_line(rows[i]);
      if (f.size() != 6) throw Error(ErrorCode::kParse, fmt::format("expected 6 fields, got {}", f.size()));
      LabelRecord l;
      l.evaluator_id = f[0];
      l.image = truth.lookup(f[1]);
      l.phase = phase_from_string(f[2]);
      if (f[3] != "0" && f[3] != "1") throw Error(ErrorCode::kParse, "judged_real must be 0 or 1");
      l.judged_real = f[3] == "1" ? 1 : 0;
      std::size_t used = 0;
      l.elapsed_ms = std::stoll(f[4], &used);
      if (used != f[4].size() || l.elapsed_ms < 0) throw Error(ErrorCode::kParse, "bad elapsed_ms");
      l.timestamp = UtcMillis::parse_iso8601(f[5]);
      out.push_back(std::move(l));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParse, fmt::format("labels CSV line {}: {}", i + 1, e.what()));
    }
  }
  return out;
}

}  // namespace styleval
