#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "styleval/core_types.hpp"

namespace styleval {

struct CampaignConfig {
  int n_inputs = 25;   // conditioning images I
  int n_styles = 20;   // styles S
  int repetitions = 3; // K: times each (input, style) combo is judged
  int session_generated = 25;
  int session_real = 25;
  int real_pool_size = 25;
  int calibration_size = 50;  // half real, half generated
  double calibration_pass_threshold = 0.65;
  std::uint64_t rng_seed = 0;

  int combos() const { return n_inputs * n_styles; }
  // Number of evaluator tasks the Latin-square layout produces.
  int evaluator_slots() const;
  // Throws ConstraintInfeasible or InvalidArgument.
  void validate() const;

  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

// Image numbering used by a campaign:
//   generated  index = input * S + style; inputs [0, I) are measured, inputs
//              [I, I + calibration_size / 2) exist only for the tutorial
//   real       [0, real_pool_size) measured, the next calibration_size / 2 tutorial-only
ImageId generated_image(const CampaignConfig& cfg, int input_index, int style);
std::vector<ImageId> measurement_generated_images(const CampaignConfig& cfg);
std::vector<ImageId> measurement_real_images(const CampaignConfig& cfg);
std::vector<ImageId> calibration_images(const CampaignConfig& cfg);

// Authoritative kind (and input/style) for every image token a campaign uses.
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(std::span<const ImageId> images);
  static GroundTruth for_campaign(const CampaignConfig& cfg);

  const ImageId& lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::map<std::string, ImageId, std::less<>>& images() const { return images_; }

 private:
  std::map<std::string, ImageId, std::less<>> images_;
};

struct EvaluatorTask {
  int slot = 0;
  std::vector<ImageId> calibration;  // shown first
  std::vector<ImageId> items;        // generated and real, interleaved

  friend bool operator==(const EvaluatorTask&, const EvaluatorTask&) = default;
};

struct AssignmentPlan {
  std::vector<EvaluatorTask> evaluators;

  friend bool operator==(const AssignmentPlan&, const AssignmentPlan&) = default;
};

// Latin square: in each block of S evaluators, evaluator e gives input i the
// style (e + i) mod S, so a block covers every combo once and K blocks cover
// each exactly K times. If session_generated < I the inputs are split into
// chunks and each block repeats per chunk.
AssignmentPlan build_assignments(const CampaignConfig& cfg);

enum class ViolationKind {
  kCoverage,          // combo not judged exactly K times
  kDuplicateInput,    // evaluator sees two styles of one input
  kWrongSessionSize,
  kCalibration,       // tutorial of wrong size/balance or overlapping measurement
  kUnknownImage,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  int slot = -1;
  int input_index = -1;
  int style = -1;
  int expected = 0;
  int actual = 0;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

ValidationReport validate_assignments(const AssignmentPlan& plan, const CampaignConfig& cfg);

// Fraction of calibration labels whose judgement matches the ground truth.
double calibration_accuracy(std::span<const LabelRecord> labels, const GroundTruth& truth);

enum class ExclusionReason { kCalibrationFail, kNoCalibrationData };

std::string_view to_string(ExclusionReason reason);

struct Exclusion {
  ExclusionReason reason;
  double accuracy = 0.0;

  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

struct FilterResult {
  std::set<std::string> retained;
  std::map<std::string, Exclusion> excluded;
};

// Evaluators at or above the pass threshold are retained.
FilterResult filter_evaluators(std::span<const LabelRecord> labels, const GroundTruth& truth,
                               const CampaignConfig& cfg);

// Measurement labels on generated images by retained evaluators.
std::vector<LabelRecord> retained_generated_labels(std::span<const LabelRecord> labels,
                                                   const FilterResult& filter);

// Proportion of labels that judged the image real.
double image_error_rate(std::span<const LabelRecord> labels);
std::map<std::string, double> per_image_error_rates(std::span<const LabelRecord> labels);

struct StyleHumanScore {
  StyleId style;
  double micro_average = 0.0;
  int label_sum = 0;
  int label_count = 0;
};

struct HypeStyleResult {
  std::vector<StyleHumanScore> scores;  // sorted by style
  std::vector<StyleId> unscored;        // expected styles without any label
};

// Per style: the sum of all labels and their micro-average. Every label must
// be on a generated image.
HypeStyleResult hype_style_scores(std::span<const LabelRecord> labels,
                                  std::span<const StyleId> expected_styles = {});

void to_json(nlohmann::json& j, const CampaignConfig& c);
void from_json(const nlohmann::json& j, CampaignConfig& c);
void to_json(nlohmann::json& j, const AssignmentPlan& p);
void from_json(const nlohmann::json& j, AssignmentPlan& p);
void to_json(nlohmann::json& j, const GroundTruth& g);
void from_json(const nlohmann::json& j, GroundTruth& g);
void to_json(nlohmann::json& j, const StyleHumanScore& s);
void from_json(const nlohmann::json& j, StyleHumanScore& s);
void to_json(nlohmann::json& j, const Violation& v);

// Header: evaluator_id,image_id,phase,judged_real,elapsed_ms,timestamp.
// image_id is the canonical token, resolved against the ground truth on read.
std::string labels_to_csv(std::span<const LabelRecord> labels);
std::vector<LabelRecord> labels_from_csv(std::string_view text, const GroundTruth& truth);

}  // namespace styleval
