#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "styleval/core_types.hpp"
#include "styleval/hype_style.hpp"
#include "styleval/style_metrics.hpp"

namespace styleval {

struct BootstrapConfig {
  int replicates = 25;
  std::uint64_t rng_seed = 0;
  double ci_level = 0.95;
  // Distances are lower-is-better; negating them makes "more realistic"
  // point the same way on both axes.
  bool negate_distances = true;
  int threads = 1;

  void validate() const;
};

struct CorrelationResult {
  Metric metric = Metric::kFid;
  FeatureLayer layer;
  double r_point = 0.0;
  std::vector<double> r_replicates;  // successful replicates, in replicate order
  std::vector<int> missing_replicates;
  double r_median = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Product-moment correlation. Throws DegenerateVariance if either side is constant.
double pearson_r(std::span<const double> xs, std::span<const double> ys);

// Linear interpolation between order statistics at position q * (n - 1).
double quantile_linear(std::vector<double> values, double q);

// Pearson r between human micro-averages and automated scores, aligned by style.
double correlate_method(std::span<const StyleHumanScore> human, std::span<const StyleScore> automated,
                        bool negate_distances = true);

// Real and generated rows of one layer. Generated row ids carry input and style.
struct LayerEmbeddings {
  EmbeddingMatrix real;
  EmbeddingMatrix generated;
};

struct BootstrapInputs {
  std::vector<LabelRecord> labels;  // retained measurement labels on generated images
  std::map<LayerKind, LayerEmbeddings> embeddings;
  std::vector<MetricConfig> metrics;
  CampaignConfig campaign;
};

// Draws the multiset of input indices for one replicate: (sub-seed, n_inputs) -> indices.
using InputResampler = std::function<std::vector<int>(std::uint64_t, int)>;

// Uniform draws with replacement.
std::vector<int> resample_with_replacement(std::uint64_t seed, int n_inputs);

// For each replicate, input images are resampled with replacement; labels and
// generated rows follow their input, the real reference stays fixed. r_point
// uses the unresampled data. Throws BootstrapUnstable if more than 20 % of the
// replicates of any method are degenerate.
std::vector<CorrelationResult> bootstrap_correlation(const BootstrapInputs& inputs,
                                                      const BootstrapConfig& boot,
                                                      const InputResampler& resampler = resample_with_replacement);

void to_json(nlohmann::json& j, const BootstrapConfig& b);
void from_json(const nlohmann::json& j, BootstrapConfig& b);
void to_json(nlohmann::json& j, const CorrelationResult& r);
void from_json(const nlohmann::json& j, CorrelationResult& r);

struct ReportDocument {
  std::string markdown;
  std::string text;
  nlohmann::json json;
};

// "median (lo, hi)" to three decimals.
std::string format_cell(double median, double lo, double hi);

// Metrics as rows, layers as columns; the highest median is marked bold and
// missing cells are rendered as an em dash.
ReportDocument rank_table(std::span<const CorrelationResult> results);

}  // namespace styleval
