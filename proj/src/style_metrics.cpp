#include "styleval/style_metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "styleval/csv.hpp"
#include "styleval/rng.hpp"

namespace styleval {

std::string_view to_string(Metric metric) { return metric == Metric::kFid ? "FID" : "KID"; }

Metric metric_from_string(std::string_view s) {
  if (s == "FID" || s == "fid") return Metric::kFid;
  if (s == "KID" || s == "kid") return Metric::kKid;
  throw Error(ErrorCode::kParse, fmt::format("unknown metric '{}'", s));
}

void MetricConfig::validate() const {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be > 0");
  if (kid_subsets < 1) throw Error(ErrorCode::kInvalidArgument, "kid_subsets must be >= 1");
  if (kid_subset_size && *kid_subset_size < 2) {
    throw Error(ErrorCode::kInvalidArgument, "kid_subset_size must be >= 2");
  }
}

std::vector<MetricConfig> all_metric_configs(const LayerDims& dims) {
  std::vector<MetricConfig> out;
  for (Metric m : {Metric::kFid, Metric::kKid}) {
    for (LayerKind l : kAllLayers) {
      MetricConfig cfg;
      cfg.metric = m;
      cfg.layer = FeatureLayer::make(l, dims);
      out.push_back(cfg);
    }
  }
  return out;
}

Eigen::MatrixXd to_eigen(const EmbeddingMatrix& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    for (int c = 0; c < m.cols; ++c) out(r, c) = row[c];
  }
  return out;
}

GaussianMoments mean_and_cov(const Eigen::MatrixXd& samples) {
  const auto n = samples.rows();
  if (n < 2) {
    throw Error(ErrorCode::kInsufficientSamples,
                fmt::format("covariance needs at least 2 samples, got {}", n));
  }
  GaussianMoments g;
  g.n = static_cast<int>(n);
  g.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - g.mean.transpose();
  const Eigen::MatrixXd c = centered.transpose() * centered / static_cast<double>(n - 1);
  g.cov = (c + c.transpose()) * 0.5;
  return g;
}

GaussianMoments mean_and_cov(const EmbeddingMatrix& samples) { return mean_and_cov(to_eigen(samples)); }

namespace {

void check_covariance(const Eigen::MatrixXd& c, const char* name) {
  if (c.rows() != c.cols()) {
    throw Error(ErrorCode::kDimension, fmt::format("{} is {}x{}, not square", name, c.rows(), c.cols()));
  }
  if (!c.allFinite()) throw Error(ErrorCode::kInvalidCovariance, fmt::format("{} has non-finite entries", name));
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double asym = (c - c.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) {
    throw Error(ErrorCode::kInvalidCovariance,
                fmt::format("{} is not symmetric (max |c - c^T| = {:.3g})", name, asym));
  }
}

// Positive definite up to the eigensolver's backward error.
bool numerically_pd(const Eigen::VectorXd& eigenvalues) {
  const double top = eigenvalues.cwiseAbs().maxCoeff();
  const double tol = static_cast<double>(eigenvalues.size()) * DBL_EPSILON * top;
  return eigenvalues.minCoeff() > tol;
}

double trace_sqrt_once(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& eig1,
                       const Eigen::MatrixXd& c2) {
  const Eigen::VectorXd root = eig1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = eig1.eigenvectors();
  const Eigen::MatrixXd s1 = v * root.asDiagonal() * v.transpose();
  Eigen::MatrixXd a = s1 * c2 * s1;
  a = (a + a.transpose()) * 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

TraceSqrtResult trace_sqrt_product_detailed(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2,
                                            double eps) {
  check_covariance(c1, "c1");
  check_covariance(c2, "c2");
  if (c1.rows() != c2.rows()) {
    throw Error(ErrorCode::kDimension,
                fmt::format("covariance dims differ: {} vs {}", c1.rows(), c2.rows()));
  }
  if (c1.rows() == 0) return {};

  // A failed Cholesky factorization settles singular inputs at a fraction of
  // the cost of an eigendecomposition.
  if (c1.llt().info() == Eigen::Success && c2.llt().info() == Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig1(c1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig2(c2, Eigen::EigenvaluesOnly);
    // Both inputs are checked so the decision does not depend on argument order.
    const bool ok = eig1.info() == Eigen::Success && eig2.info() == Eigen::Success &&
                    numerically_pd(eig1.eigenvalues()) && numerically_pd(eig2.eigenvalues());
    if (ok) {
      const double v = trace_sqrt_once(eig1, c2);
      if (std::isfinite(v)) return {v, false};
    }
  }

  const auto shift = Eigen::MatrixXd::Identity(c1.rows(), c1.cols()) * eps;
  const Eigen::MatrixXd r1 = c1 + shift;
  const Eigen::MatrixXd r2 = c2 + shift;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_r(r1);
  const double v = eig_r.info() == Eigen::Success ? trace_sqrt_once(eig_r, r2)
                                                  : std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNumerical, "matrix square root is not finite after eps regularization");
  }
  return {v, true};
}

double trace_sqrt_product(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2, double eps) {
  return trace_sqrt_product_detailed(c1, c2, eps).value;
}

double frechet_distance(const GaussianMoments& g1, const GaussianMoments& g2, double eps) {
  if (g1.mean.size() != g2.mean.size() || g1.cov.rows() != g2.cov.rows() ||
      g1.cov.rows() != g1.mean.size()) {
    throw Error(ErrorCode::kDimension,
                fmt::format("moment dims differ: {} vs {}", g1.mean.size(), g2.mean.size()));
  }
  const TraceSqrtResult ts = trace_sqrt_product_detailed(g1.cov, g2.cov, eps);
  double traces = g1.cov.trace() + g2.cov.trace();
  if (ts.regularized) traces += 2.0 * eps * static_cast<double>(g1.cov.rows());
  double value = (g1.mean - g2.mean).squaredNorm() + traces - 2.0 * ts.value;
  if (!std::isfinite(value)) throw Error(ErrorCode::kNumerical, "FID is not finite");
  if (value < 0.0) {
    if (-value > 1e-6) spdlog::warn("FID clamped to 0 from {:.3g}", value);
    value = 0.0;
  }
  return value;
}

double polynomial_kernel(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kDimension, fmt::format("kernel dims differ: {} vs {}", x.size(), y.size()));
  }
  if (x.empty()) throw Error(ErrorCode::kDimension, "kernel on zero-dimensional vectors");
  const double dot = std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
  const double base = dot / static_cast<double>(x.size()) + 1.0;
  return base * base * base;
}

Eigen::MatrixXd polynomial_kernel_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.cols() != y.cols()) {
    throw Error(ErrorCode::kDimension, fmt::format("kernel dims differ: {} vs {}", x.cols(), y.cols()));
  }
  const Eigen::ArrayXXd base = (x * y.transpose()).array() / static_cast<double>(x.cols()) + 1.0;
  return (base * base * base).matrix();
}

namespace {

// Every kernel value is taken relative to one pivot entry before averaging;
// the pivot cancels exactly in the estimator, so sets where all kernel values
// coincide give exactly zero.
double mmd_unbiased_once(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const auto m = x.rows();
  const auto n = y.rows();
  const Eigen::MatrixXd kxx = polynomial_kernel_matrix(x, x);
  const Eigen::MatrixXd kyy = polynomial_kernel_matrix(y, y);
  const Eigen::MatrixXd kxy = polynomial_kernel_matrix(x, y);
  const double pivot = kxy(0, 0);

  auto off_diagonal_mean = [pivot](const Eigen::MatrixXd& k) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      for (Eigen::Index i = 0; i < k.rows(); ++i) {
        if (i != j) sum += k(i, j) - pivot;
      }
    }
    const double count = static_cast<double>(k.rows()) * static_cast<double>(k.rows() - 1);
    return sum / count;
  };
  const double cross = (kxy.array() - pivot).sum() / (static_cast<double>(m) * static_cast<double>(n));
  return off_diagonal_mean(kxx) + off_diagonal_mean(kyy) - 2.0 * cross;
}

Eigen::MatrixXd sample_rows(const Eigen::MatrixXd& x, Eigen::Index size, Rng& rng) {
  std::vector<Eigen::Index> idx(x.rows());
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  // Partial Fisher-Yates: the first `size` slots become the sample.
  for (Eigen::Index i = 0; i < size; ++i) {
    auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(x.rows() - i)));
    std::swap(idx[i], idx[j]);
  }
  Eigen::MatrixXd out(size, x.cols());
  for (Eigen::Index i = 0; i < size; ++i) out.row(i) = x.row(idx[i]);
  return out;
}

}  // namespace

double kid_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MetricConfig& cfg) {
  cfg.validate();
  if (x.rows() < 2 || y.rows() < 2) {
    throw Error(ErrorCode::kInsufficientSamples,
                fmt::format("KID needs at least 2 samples per set, got {} and {}", x.rows(), y.rows()));
  }
  if (x.cols() != y.cols()) {
    throw Error(ErrorCode::kDimension, fmt::format("KID dims differ: {} vs {}", x.cols(), y.cols()));
  }
  double value = 0.0;
  if (cfg.kid_subsets <= 1) {
    value = mmd_unbiased_once(x, y);
  } else {
    Eigen::Index size = std::min(x.rows(), y.rows());
    if (cfg.kid_subset_size) size = std::min<Eigen::Index>(size, *cfg.kid_subset_size);
    double acc = 0.0;
    for (int s = 0; s < cfg.kid_subsets; ++s) {
      Rng rng(mix_seed(cfg.kid_seed, static_cast<std::uint64_t>(s)));
      const Eigen::MatrixXd xs = sample_rows(x, size, rng);
      const Eigen::MatrixXd ys = sample_rows(y, size, rng);
      acc += mmd_unbiased_once(xs, ys);
    }
    value = acc / cfg.kid_subsets;
  }
  if (!std::isfinite(value)) throw Error(ErrorCode::kNumerical, "KID is not finite");
  return value;
}

RealReference make_real_reference(const EmbeddingMatrix& real) {
  validate(real);
  if (real.rows < 2) {
    throw Error(ErrorCode::kInsufficientSamples,
                fmt::format("real reference needs at least 2 rows, got {}", real.rows));
  }
  RealReference ref;
  ref.samples = to_eigen(real);
  ref.moments = mean_and_cov(ref.samples);
  return ref;
}

double score_one(const RealReference& real, const Eigen::MatrixXd& generated,
                 const MetricConfig& cfg) {
  if (cfg.metric == Metric::kFid) {
    return frechet_distance(real.moments, mean_and_cov(generated), cfg.eps);
  }
  return kid_unbiased(real.samples, generated, cfg);
}

ScoreReport score_styles(const EmbeddingMatrix& real,
                         const std::map<StyleId, EmbeddingMatrix>& generated_by_style,
                         const MetricConfig& cfg) {
  cfg.validate();
  auto check_layer = [&](const EmbeddingMatrix& m, const std::string& what) {
    if (m.layer != cfg.layer) {
      throw Error(ErrorCode::kLayerMismatch,
                  fmt::format("{} is from layer {}/{} but the metric expects {}/{}", what,
                              to_string(m.layer.kind), m.layer.dim, to_string(cfg.layer.kind),
                              cfg.layer.dim));
    }
  };
  check_layer(real, "real set");
  for (const auto& [style, m] : generated_by_style) check_layer(m, "style " + style.label);

  const RealReference ref = make_real_reference(real);
  ScoreReport report;
  for (const auto& [style, m] : generated_by_style) {
    try {
      validate(m);
      report.scores.push_back({style, cfg, score_one(ref, to_eigen(m), cfg)});
    } catch (const Error& e) {
      report.errors.push_back({style, e.code(), e.what()});
    }
  }
  return report;
}

void to_json(nlohmann::json& j, const MetricConfig& c) {
  j = {{"metric", to_string(c.metric)}, {"layer", c.layer}, {"eps", c.eps},
       {"kid_subsets", c.kid_subsets}, {"kid_seed", c.kid_seed}};
  if (c.kid_subset_size) j["kid_subset_size"] = *c.kid_subset_size;
}

void from_json(const nlohmann::json& j, MetricConfig& c) {
  c.metric = metric_from_string(j.at("metric").get<std::string>());
  c.layer = j.at("layer").get<FeatureLayer>();
  c.eps = j.value("eps", 1e-6);
  c.kid_subsets = j.value("kid_subsets", 1);
  c.kid_seed = j.value("kid_seed", std::uint64_t{0});
  c.kid_subset_size.reset();
  if (j.contains("kid_subset_size")) c.kid_subset_size = j["kid_subset_size"].get<int>();
  c.validate();
}

void to_json(nlohmann::json& j, const StyleScore& s) {
  j = {{"style", s.style}, {"config", s.config}, {"value", s.value}};
}

void from_json(const nlohmann::json& j, StyleScore& s) {
  s.style = j.at("style").get<StyleId>();
  s.config = j.at("config").get<MetricConfig>();
  s.value = j.at("value").get<double>();
}

std::string scores_to_csv(const std::vector<StyleScore>& scores) {
  std::string out = "style,label,metric,layer,value\n";
  for (const auto& s : scores) {
    out += csv::join({std::to_string(s.style.index), s.style.label,
                      std::string(to_string(s.config.metric)),
                      std::string(to_string(s.config.layer.kind)), fmt::format("{:.17g}", s.value)});
    out += '\n';
  }
  return out;
}

std::vector<StyleScore> scores_from_csv(std::string_view text, const LayerDims& dims) {
  const auto rows = csv::lines(text);
  if (rows.empty() || rows[0] != "style,label,metric,layer,value") {
    throw Error(ErrorCode::kParse, "scores CSV: missing header style,label,metric,layer,value");
  }
  std::vector<StyleScore> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    try {
      const auto f = csv::split_line(rows[i]);
      if (f.size() != 5) throw Error(ErrorCode::kParse, fmt::format("expected 5 fields, got {}", f.size()));
      StyleScore s;
      s.style = StyleId{std::stoi(f[0]), f[1]};
      s.config.metric = metric_from_string(f[2]);
      s.config.layer = FeatureLayer::make(layer_kind_from_string(f[3]), dims);
      s.value = std::stod(f[4]);
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParse, fmt::format("scores CSV line {}: {}", i + 1, e.what()));
    }
  }
  return out;
}

}  // namespace styleval
