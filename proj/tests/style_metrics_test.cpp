#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "styleval/errors.hpp"
#include "styleval/style_metrics.hpp"

using namespace styleval;

namespace {

GaussianMoments moments(Eigen::VectorXd mean, Eigen::MatrixXd cov) { return {std::move(mean), std::move(cov), 0}; }

Eigen::MatrixXd gaussian_samples(int n, int d, std::mt19937_64& gen, double shift = 0.0, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = shift + scale * normal(gen);
  }
  return x;
}

EmbeddingMatrix to_matrix(const Eigen::MatrixXd& x, FeatureLayer layer, int style) {
  EmbeddingMatrix m = EmbeddingMatrix::zeros(static_cast<int>(x.rows()), layer);
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) m.row(i)[j] = static_cast<float>(x(i, j));
    m.row_ids[i] = style < 0 ? ImageId::real(i) : ImageId::generated(i, i, make_style(style));
  }
  return m;
}

}  // namespace

TEST(MeanAndCov, MatchesDoubleLoop) {
  std::mt19937_64 gen(1);
  const auto x = gaussian_samples(17, 5, gen, 0.3, 2.0);
  const auto g = mean_and_cov(x);
  EXPECT_LT((g.mean - oracle::mean(x)).norm(), 1e-12);
  EXPECT_LT((g.cov - oracle::covariance(x)).norm(), 1e-12);
  EXPECT_EQ(g.cov, g.cov.transpose());
  EXPECT_EQ(g.n, 17);
}

TEST(MeanAndCov, NeedsTwoSamples) {
  try {
    mean_and_cov(Eigen::MatrixXd::Zero(1, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSamples);
  }
}

TEST(TraceSqrtProduct, MatchesGeneralSquareRoot) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 30; ++t) {
    const int d = 1 + t % 12;
    const auto c1 = oracle::random_psd(d, d + 3, gen);
    const auto c2 = oracle::random_psd(d, d + 1, gen);
    const double want = oracle::trace_sqrt_product(c1, c2);
    const auto got = trace_sqrt_product_detailed(c1, c2, 1e-6);
    EXPECT_FALSE(got.regularized);
    EXPECT_NEAR(got.value, want, 1e-8 * std::abs(want)) << "d=" << d;
  }
}

TEST(TraceSqrtProduct, SymmetricInArguments) {
  std::mt19937_64 gen(8);
  for (int rank : {2, 6}) {
    const auto c1 = oracle::random_psd(6, rank, gen);
    const auto c2 = oracle::random_psd(6, 6, gen);
    const auto a = trace_sqrt_product_detailed(c1, c2, 1e-6);
    const auto b = trace_sqrt_product_detailed(c2, c1, 1e-6);
    EXPECT_EQ(a.regularized, b.regularized);
    EXPECT_NEAR(a.value, b.value, 1e-9 * std::max(1.0, a.value));
  }
}

TEST(TraceSqrtProduct, SingularInputTakesEpsPath) {
  std::mt19937_64 gen(9);
  const auto c1 = oracle::random_psd(8, 3, gen);
  const auto c2 = oracle::random_psd(8, 8, gen);
  const auto r = trace_sqrt_product_detailed(c1, c2, 1e-6);
  EXPECT_TRUE(r.regularized);
  const Eigen::MatrixXd shift = Eigen::MatrixXd::Identity(8, 8) * 1e-6;
  EXPECT_NEAR(r.value, oracle::trace_sqrt_product(c1 + shift, c2 + shift), 1e-7);
}

TEST(TraceSqrtProduct, RejectsBadCovariances) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.1, 1;
  auto code = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    try {
      trace_sqrt_product(a, b, 1e-6);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_EQ(code(asym, eye), ErrorCode::kInvalidCovariance);
  EXPECT_EQ(code(eye, Eigen::MatrixXd::Identity(3, 3)), ErrorCode::kDimension);
  Eigen::MatrixXd nan = eye;
  nan(0, 0) = NAN;
  EXPECT_EQ(code(nan, eye), ErrorCode::kInvalidCovariance);
}

TEST(Frechet, ClosedForms) {
  Eigen::VectorXd m0(1), m1(1);
  m0 << 0;
  m1 << 1;
  Eigen::MatrixXd v1(1, 1), v4(1, 1);
  v1 << 1;
  v4 << 4;
  // (0-1)^2 + 1 + 4 - 2*sqrt(4)
  EXPECT_NEAR(frechet_distance(moments(m0, v1), moments(m1, v4)), 2.0, 1e-9);

  Eigen::VectorXd a(2), b(2);
  a << 0, 0;
  b << 1, 1;
  Eigen::MatrixXd d1 = Eigen::Vector2d(1, 4).asDiagonal();
  Eigen::MatrixXd d2 = Eigen::Vector2d(4, 9).asDiagonal();
  // 2 + (1 + 4 - 4) + (4 + 9 - 12)
  EXPECT_NEAR(frechet_distance(moments(a, d1), moments(b, d2)), 4.0, 1e-9);
}

TEST(Frechet, IdenticalIsZeroEvenWhenRegularized) {
  std::mt19937_64 gen(10);
  for (int rank : {1, 4, 10}) {
    const auto c = oracle::random_psd(10, rank, gen);
    Eigen::VectorXd mu = Eigen::VectorXd::Random(10);
    EXPECT_NEAR(frechet_distance(moments(mu, c), moments(mu, c)), 0.0, 1e-9) << rank;
  }
}

TEST(Frechet, NonNegativeAndSymmetric) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 20; ++t) {
    const auto x = mean_and_cov(gaussian_samples(12, 6, gen));
    const auto y = mean_and_cov(gaussian_samples(15, 6, gen, 0.1 * t));
    const double a = frechet_distance(x, y), b = frechet_distance(y, x);
    EXPECT_GE(a, 0.0);
    EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, a));
  }
}

TEST(Frechet, SmallSampleHighDimensionIsFinite) {
  std::mt19937_64 gen(12);
  const auto x = mean_and_cov(gaussian_samples(25, 256, gen));
  const auto y = mean_and_cov(gaussian_samples(25, 256, gen, 0.2));
  const double v = frechet_distance(x, y);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
}

TEST(PolynomialKernel, Definition) {
  const double x[] = {1, 2}, y[] = {3, -1};
  // (1*3 - 2 + 0)/2 + 1 = 1.5
  EXPECT_DOUBLE_EQ(polynomial_kernel(x, y), 3.375);
  const double z[] = {1};
  EXPECT_THROW(polynomial_kernel(x, z), Error);
}

TEST(Kid, HandComputedOneDimensional) {
  Eigen::MatrixXd x(2, 1), y(2, 1);
  x << 0, 2;
  y << 1, 3;
  MetricConfig cfg;
  cfg.metric = Metric::kKid;
  // XX: k(0,2) = 1; YY: k(1,3) = 64; XY mean = (1 + 1 + 27 + 343) / 4 = 93.
  EXPECT_DOUBLE_EQ(oracle::kid(x, y), -121.0);
  EXPECT_NEAR(kid_unbiased(x, y, cfg), -121.0, 1e-9);
}

TEST(Kid, MatchesBruteForce) {
  std::mt19937_64 gen(13);
  MetricConfig cfg;
  cfg.metric = Metric::kKid;
  for (int t = 0; t < 10; ++t) {
    const auto x = gaussian_samples(7 + t, 4, gen);
    const auto y = gaussian_samples(9, 4, gen, 0.5);
    const double want = oracle::kid(x, y);
    EXPECT_NEAR(kid_unbiased(x, y, cfg), want, 1e-9 * std::max(1.0, std::abs(want)));
  }
}

TEST(Kid, PointMassIsExactlyZero) {
  MetricConfig cfg;
  cfg.metric = Metric::kKid;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(6, 3, 0.7);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(4, 3, 0.7);
  EXPECT_EQ(kid_unbiased(x, y, cfg), 0.0);
}

TEST(Kid, SubsetsAreSeededAndAverageAroundFullEstimate) {
  std::mt19937_64 gen(14);
  const auto x = gaussian_samples(40, 3, gen);
  const auto y = gaussian_samples(40, 3, gen, 1.0);
  MetricConfig cfg;
  cfg.metric = Metric::kKid;
  cfg.kid_subset_size = 20;
  cfg.kid_subsets = 50;
  cfg.kid_seed = 3;
  const double a = kid_unbiased(x, y, cfg);
  EXPECT_EQ(a, kid_unbiased(x, y, cfg));
  cfg.kid_seed = 4;
  EXPECT_NE(a, kid_unbiased(x, y, cfg));
  MetricConfig full;
  full.metric = Metric::kKid;
  const double f = kid_unbiased(x, y, full);
  EXPECT_NEAR(a, f, 0.25 * std::abs(f));
}

TEST(Kid, NeedsTwoSamplesPerSide) {
  MetricConfig cfg;
  cfg.metric = Metric::kKid;
  try {
    kid_unbiased(Eigen::MatrixXd::Zero(1, 2), Eigen::MatrixXd::Zero(3, 2), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSamples);
  }
}

TEST(AllMetricConfigs, EightFidFirst) {
  const auto all = all_metric_configs();
  ASSERT_EQ(all.size(), 8u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(all[i].metric, Metric::kFid);
    EXPECT_EQ(all[i + 4].metric, Metric::kKid);
    EXPECT_EQ(all[i].layer.kind, kAllLayers[i]);
  }
  EXPECT_EQ(all[2].layer.dim, 768);
}

TEST(ScoreStyles, OneScorePerStyleAgainstSharedReference) {
  std::mt19937_64 gen(15);
  const FeatureLayer layer{LayerKind::kPreAux, 4};
  const auto real = to_matrix(gaussian_samples(30, 4, gen), layer, -1);
  std::map<StyleId, EmbeddingMatrix> gen_by_style;
  for (int s = 0; s < 3; ++s) gen_by_style.emplace(make_style(s), to_matrix(gaussian_samples(30, 4, gen, s), layer, s));
  MetricConfig cfg;
  cfg.layer = layer;
  const auto report = score_styles(real, gen_by_style, cfg);
  ASSERT_EQ(report.scores.size(), 3u);
  EXPECT_TRUE(report.errors.empty());
  EXPECT_LT(report.scores[0].value, report.scores[1].value);
  EXPECT_LT(report.scores[1].value, report.scores[2].value);
  EXPECT_EQ(report.scores[2].style, make_style(2));
}

TEST(ScoreStyles, IdenticalSetsFidZeroKidNegative) {
  std::mt19937_64 gen(16);
  const FeatureLayer layer{LayerKind::kPool1, 3};
  const auto x = gaussian_samples(10, 3, gen);
  const auto real = to_matrix(x, layer, -1);
  std::map<StyleId, EmbeddingMatrix> by_style{{make_style(0), to_matrix(x, layer, 0)}};
  MetricConfig cfg;
  cfg.layer = layer;
  EXPECT_NEAR(score_styles(real, by_style, cfg).scores.at(0).value, 0.0, 1e-9);
  // The unbiased estimator drops the diagonal within sets but not across.
  cfg.metric = Metric::kKid;
  const double kid = score_styles(real, by_style, cfg).scores.at(0).value;
  EXPECT_LT(kid, 0.0);
  const Eigen::MatrixXd stored = x.cast<float>().cast<double>();
  EXPECT_NEAR(kid, oracle::kid(stored, stored), 1e-9 * std::abs(kid));
}

TEST(ScoreStyles, PerStyleFailureDoesNotStopOthers) {
  std::mt19937_64 gen(17);
  const FeatureLayer layer{LayerKind::kPool1, 3};
  std::map<StyleId, EmbeddingMatrix> by_style{{make_style(0), to_matrix(gaussian_samples(8, 3, gen), layer, 0)},
                                              {make_style(1), to_matrix(gaussian_samples(1, 3, gen), layer, 1)}};
  MetricConfig cfg;
  cfg.layer = layer;
  const auto report = score_styles(to_matrix(gaussian_samples(8, 3, gen), layer, -1), by_style, cfg);
  ASSERT_EQ(report.scores.size(), 1u);
  ASSERT_EQ(report.errors.size(), 1u);
  EXPECT_EQ(report.errors[0].style, make_style(1));
  EXPECT_EQ(report.errors[0].code, ErrorCode::kInsufficientSamples);
}

TEST(ScoreStyles, LayerMismatchRejected) {
  std::mt19937_64 gen(18);
  const auto real = to_matrix(gaussian_samples(5, 3, gen), FeatureLayer{LayerKind::kPool1, 3}, -1);
  MetricConfig cfg;
  cfg.layer = FeatureLayer{LayerKind::kPool2, 3};
  EXPECT_THROW(score_styles(real, {}, cfg), Error);
}

TEST(ScoresCsv, RoundTripIsExact) {
  std::vector<StyleScore> scores;
  for (auto cfg : all_metric_configs()) {
    for (int s = 0; s < 3; ++s) scores.push_back({make_style(s), cfg, std::sqrt(2.0) * (s + 1) - 1e-17});
  }
  const auto csv = scores_to_csv(scores);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "style,label,metric,layer,value");
  const auto back = scores_from_csv(csv);
  ASSERT_EQ(back.size(), scores.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].value, scores[i].value);
    EXPECT_EQ(back[i].style, scores[i].style);
    EXPECT_EQ(back[i].config.layer, scores[i].config.layer);
  }
  EXPECT_EQ(scores_to_csv(back), csv);
  EXPECT_THROW(scores_from_csv("style,label,metric,layer,value\n0,a,FID,pool1\n"), Error);
}
