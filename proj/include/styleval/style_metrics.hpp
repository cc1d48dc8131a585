#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "styleval/core_types.hpp"
#include "styleval/errors.hpp"

namespace styleval {

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric
  int n = 0;
};

enum class Metric { kFid, kKid };

std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view s);

struct MetricConfig {
  Metric metric = Metric::kFid;
  FeatureLayer layer;
  double eps = 1e-6;
  std::optional<int> kid_subset_size;
  int kid_subsets = 1;
  std::uint64_t kid_seed = 0;

  void validate() const;

  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

// {FID, KID} x {pool1, pool2, pre_aux, pool3}, FID first.
std::vector<MetricConfig> all_metric_configs(const LayerDims& dims = {});

// Lower is better for both metrics. KID may dip slightly below zero.
struct StyleScore {
  StyleId style;
  MetricConfig config;
  double value = 0.0;
};

struct StyleError {
  StyleId style;
  ErrorCode code;
  std::string message;
};

struct ScoreReport {
  std::vector<StyleScore> scores;  // sorted by style
  std::vector<StyleError> errors;
};

Eigen::MatrixXd to_eigen(const EmbeddingMatrix& m);

// Column means and the unbiased (n - 1) covariance, symmetrized.
GaussianMoments mean_and_cov(const Eigen::MatrixXd& samples);
GaussianMoments mean_and_cov(const EmbeddingMatrix& samples);

struct TraceSqrtResult {
  double value = 0.0;
  bool regularized = false;  // eps * I was added to both inputs
};

// Tr((c1 c2)^1/2) computed as Tr((c1^1/2 c2 c1^1/2)^1/2) from symmetric
// eigendecompositions. When either input is not numerically positive definite both
// inputs are shifted by eps * I and the computation is repeated.
TraceSqrtResult trace_sqrt_product_detailed(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2,
                                            double eps);
double trace_sqrt_product(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2, double eps);

// |mu1 - mu2|^2 + Tr(S1) + Tr(S2) - 2 Tr((S1 S2)^1/2), clamped at zero. If the
// eps shift was needed, the trace terms use the shifted covariances too so
// that identical inputs still give zero.
double frechet_distance(const GaussianMoments& g1, const GaussianMoments& g2, double eps = 1e-6);

// (x.y / d + 1)^3
double polynomial_kernel(std::span<const double> x, std::span<const double> y);
Eigen::MatrixXd polynomial_kernel_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// Unbiased MMD^2 under the cubic polynomial kernel. With cfg.kid_subsets > 1
// the estimate is averaged over seeded subsamples drawn without replacement.
double kid_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MetricConfig& cfg);

// One score per style, each against the same real reference set. Numerical
// failures for one style are recorded and do not stop the others.
ScoreReport score_styles(const EmbeddingMatrix& real,
                         const std::map<StyleId, EmbeddingMatrix>& generated_by_style,
                         const MetricConfig& cfg);

// Same, with the reference moments computed once by the caller. Used by the
// bootstrap, which rescores many resamples against one reference.
struct RealReference {
  Eigen::MatrixXd samples;
  GaussianMoments moments;
};
RealReference make_real_reference(const EmbeddingMatrix& real);
double score_one(const RealReference& real, const Eigen::MatrixXd& generated,
                 const MetricConfig& cfg);

void to_json(nlohmann::json& j, const MetricConfig& c);
void from_json(const nlohmann::json& j, MetricConfig& c);
void to_json(nlohmann::json& j, const StyleScore& s);
void from_json(const nlohmann::json& j, StyleScore& s);

// CSV with header style,label,metric,layer,value. Values printed with 17
// significant digits so a reread is exact.
std::string scores_to_csv(const std::vector<StyleScore>& scores);
std::vector<StyleScore> scores_from_csv(std::string_view csv, const LayerDims& dims = {});

}  // namespace styleval
