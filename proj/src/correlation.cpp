#include "styleval/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "styleval/errors.hpp"
#include "styleval/rng.hpp"

namespace styleval {

void BootstrapConfig::validate() const {
  if (replicates < 2) throw Error(ErrorCode::kInvalidArgument, "replicates must be >= 2");
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "ci_level must be in (0, 1)");
  }
  if (threads < 1) throw Error(ErrorCode::kInvalidArgument, "threads must be >= 1");
}

double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::kDimension, fmt::format("pearson_r: lengths {} and {}", xs.size(), ys.size()));
  }
  if (xs.size() < 2) throw Error(ErrorCode::kDimension, "pearson_r needs at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0, ax = 0.0, ay = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
    ax = std::max(ax, std::abs(xs[i]));
    ay = std::max(ay, std::abs(ys[i]));
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // Below this, the centred values are rounding noise of a constant vector.
  auto negligible = [n](double ss, double scale) {
    const double noise = 1e-14 * scale;
    return ss <= n * noise * noise;
  };
  if (negligible(sxx, ax) || negligible(syy, ay)) {
    throw Error(ErrorCode::kDegenerateVariance, "pearson_r: zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kNoData, "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double correlate_method(std::span<const StyleHumanScore> human, std::span<const StyleScore> automated,
                        bool negate_distances) {
  std::map<StyleId, double> by_style;
  for (const auto& a : automated) {
    if (!by_style.emplace(a.style, a.value).second) {
      throw Error(ErrorCode::kStyleMismatch, fmt::format("style {} scored twice", a.style.index));
    }
  }
  if (by_style.size() != human.size()) {
    throw Error(ErrorCode::kStyleMismatch,
                fmt::format("{} human styles vs {} automated", human.size(), by_style.size()));
  }
  std::vector<double> hs, as;
  for (const auto& h : human) {
    auto it = by_style.find(h.style);
    if (it == by_style.end()) {
      throw Error(ErrorCode::kStyleMismatch, fmt::format("style {} has no automated score", h.style.index));
    }
    hs.push_back(h.micro_average);
    as.push_back(negate_distances ? -it->second : it->second);
  }
  return pearson_r(hs, as);
}

std::vector<int> resample_with_replacement(std::uint64_t seed, int n_inputs) {
  Rng rng(seed);
  std::vector<int> out(n_inputs);
  for (int& v : out) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_inputs)));
  return out;
}

namespace {

struct PreparedLayer {
  RealReference real;
  Eigen::MatrixXd generated;
  // rows[style][input] = generated row indices
  std::vector<std::vector<std::vector<int>>> rows;
};

struct Prepared {
  int n_inputs = 0;
  int n_styles = 0;
  // label sum / count per [style][input]
  std::vector<std::vector<std::pair<int, int>>> labels;
  std::map<LayerKind, PreparedLayer> layers;
};

Prepared prepare(const BootstrapInputs& in) {
  Prepared p;
  p.n_inputs = in.campaign.n_inputs;
  p.n_styles = in.campaign.n_styles;
  auto in_range = [&](const ImageId& id) {
    return id.is_generated() && id.input_index && id.style && *id.input_index >= 0 &&
           *id.input_index < p.n_inputs && id.style->index >= 0 && id.style->index < p.n_styles;
  };

  p.labels.assign(p.n_styles, std::vector<std::pair<int, int>>(p.n_inputs, {0, 0}));
  for (const auto& l : in.labels) {
    if (!in_range(l.image)) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("label on {} is outside the campaign's inputs and styles", l.image.to_string()));
    }
    auto& cell = p.labels[l.image.style->index][*l.image.input_index];
    cell.first += l.judged_real;
    ++cell.second;
  }

  for (const auto& cfg : in.metrics) {
    const LayerKind kind = cfg.layer.kind;
    if (p.layers.contains(kind)) continue;
    auto it = in.embeddings.find(kind);
    if (it == in.embeddings.end()) {
      throw Error(ErrorCode::kLayerMismatch, fmt::format("no embeddings for layer {}", to_string(kind)));
    }
    const LayerEmbeddings& e = it->second;
    if (e.real.layer != cfg.layer || e.generated.layer != cfg.layer) {
      throw Error(ErrorCode::kLayerMismatch,
                  fmt::format("embeddings for {} do not match the metric's layer", to_string(kind)));
    }
    validate(e.generated);
    PreparedLayer pl;
    pl.real = make_real_reference(e.real);
    pl.generated = to_eigen(e.generated);
    pl.rows.assign(p.n_styles, std::vector<std::vector<int>>(p.n_inputs));
    for (int r = 0; r < e.generated.rows; ++r) {
      const ImageId& id = e.generated.row_ids[r];
      if (!in_range(id)) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("generated row {} ({}) is outside the campaign", r, id.to_string()));
      }
      pl.rows[id.style->index][*id.input_index].push_back(r);
    }
    p.layers.emplace(kind, std::move(pl));
  }
  for (const auto& cfg : in.metrics) {
    for (int s = 0; s < p.n_styles; ++s) {
      for (int i = 0; i < p.n_inputs; ++i) {
        if (p.layers.at(cfg.layer.kind).rows[s][i].empty()) {
          throw Error(ErrorCode::kInvalidArgument,
                      fmt::format("layer {} has no generated row for input {} style {}",
                                  to_string(cfg.layer.kind), i, s));
        }
      }
    }
  }
  return p;
}

// r for every metric on one resample; nullopt marks a degenerate replicate.
std::vector<std::optional<double>> evaluate_resample(const Prepared& p, const BootstrapInputs& in,
                                                     std::span<const int> resample, bool negate) {
  std::vector<int> multiplicity(p.n_inputs, 0);
  for (int i : resample) {
    if (i < 0 || i >= p.n_inputs) throw Error(ErrorCode::kInvalidArgument, "resampler index out of range");
    ++multiplicity[i];
  }

  std::vector<std::optional<double>> out(in.metrics.size());
  std::vector<double> human(p.n_styles);
  for (int s = 0; s < p.n_styles; ++s) {
    long sum = 0, count = 0;
    for (int i = 0; i < p.n_inputs; ++i) {
      sum += static_cast<long>(multiplicity[i]) * p.labels[s][i].first;
      count += static_cast<long>(multiplicity[i]) * p.labels[s][i].second;
    }
    if (count == 0) return out;
    human[s] = static_cast<double>(sum) / static_cast<double>(count);
  }

  for (std::size_t m = 0; m < in.metrics.size(); ++m) {
    const MetricConfig& cfg = in.metrics[m];
    const PreparedLayer& layer = p.layers.at(cfg.layer.kind);
    try {
      std::vector<double> automated(p.n_styles);
      for (int s = 0; s < p.n_styles; ++s) {
        std::vector<int> rows;
        for (int i = 0; i < p.n_inputs; ++i) {
          for (int k = 0; k < multiplicity[i]; ++k) {
            rows.insert(rows.end(), layer.rows[s][i].begin(), layer.rows[s][i].end());
          }
        }
        Eigen::MatrixXd gen(static_cast<Eigen::Index>(rows.size()), layer.generated.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) gen.row(static_cast<Eigen::Index>(r)) = layer.generated.row(rows[r]);
        const double v = score_one(layer.real, gen, cfg);
        automated[s] = negate ? -v : v;
      }
      out[m] = pearson_r(human, automated);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateVariance && e.code() != ErrorCode::kNumerical &&
          e.code() != ErrorCode::kInsufficientSamples) {
        throw;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<CorrelationResult> bootstrap_correlation(const BootstrapInputs& inputs,
                                                      const BootstrapConfig& boot,
                                                      const InputResampler& resampler) {
  boot.validate();
  inputs.campaign.validate();
  if (inputs.metrics.empty()) throw Error(ErrorCode::kInvalidArgument, "no metrics to correlate");
  for (const auto& m : inputs.metrics) m.validate();
  const Prepared prepared = prepare(inputs);

  std::vector<int> identity(prepared.n_inputs);
  for (int i = 0; i < prepared.n_inputs; ++i) identity[i] = i;
  const auto point = evaluate_resample(prepared, inputs, identity, boot.negate_distances);

  std::vector<std::vector<std::optional<double>>> reps(boot.replicates);
  auto run = [&](int first, int stride) {
    for (int r = first; r < boot.replicates; r += stride) {
      const auto sample = resampler(mix_seed(boot.rng_seed, static_cast<std::uint64_t>(r)), prepared.n_inputs);
      if (static_cast<int>(sample.size()) != prepared.n_inputs) {
        throw Error(ErrorCode::kInvalidArgument, "resampler returned the wrong number of inputs");
      }
      reps[r] = evaluate_resample(prepared, inputs, sample, boot.negate_distances);
    }
  };
  const int workers = std::min(boot.threads, boot.replicates);
  if (workers <= 1) {
    run(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            run(w, workers);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<CorrelationResult> results;
  std::vector<std::string> unstable;
  for (std::size_t m = 0; m < inputs.metrics.size(); ++m) {
    CorrelationResult res;
    res.metric = inputs.metrics[m].metric;
    res.layer = inputs.metrics[m].layer;
    const std::string name = fmt::format("{}/{}", to_string(res.metric), to_string(res.layer.kind));
    if (!point[m]) {
      throw Error(ErrorCode::kDegenerateVariance, fmt::format("{}: point estimate is degenerate", name));
    }
    res.r_point = *point[m];
    for (int r = 0; r < boot.replicates; ++r) {
      if (reps[r][m]) {
        res.r_replicates.push_back(*reps[r][m]);
      } else {
        res.missing_replicates.push_back(r);
      }
    }
    if (res.missing_replicates.size() * 5 > static_cast<std::size_t>(boot.replicates) ||
        res.r_replicates.empty()) {
      unstable.push_back(fmt::format("{} ({} of {} replicates degenerate)", name,
                                     res.missing_replicates.size(), boot.replicates));
    } else {
      res.r_median = quantile_linear(res.r_replicates, 0.5);
      res.ci_lo = quantile_linear(res.r_replicates, (1.0 - boot.ci_level) / 2.0);
      res.ci_hi = quantile_linear(res.r_replicates, (1.0 + boot.ci_level) / 2.0);
    }
    results.push_back(std::move(res));
  }
  if (!unstable.empty()) {
    throw Error(ErrorCode::kBootstrapUnstable, fmt::format("bootstrap unstable: {}", fmt::join(unstable, "; ")));
  }
  return results;
}

void to_json(nlohmann::json& j, const BootstrapConfig& b) {
  j = {{"replicates", b.replicates}, {"rng_seed", b.rng_seed}, {"ci_level", b.ci_level},
       {"negate_distances", b.negate_distances}};
}

void from_json(const nlohmann::json& j, BootstrapConfig& b) {
  const BootstrapConfig d;
  b.replicates = j.value("replicates", d.replicates);
  b.rng_seed = j.value("rng_seed", d.rng_seed);
  b.ci_level = j.value("ci_level", d.ci_level);
  b.negate_distances = j.value("negate_distances", d.negate_distances);
}

void to_json(nlohmann::json& j, const CorrelationResult& r) {
  j = {{"metric", to_string(r.metric)},   {"layer", r.layer},
       {"r_point", r.r_point},            {"r_replicates", r.r_replicates},
       {"missing_replicates", r.missing_replicates},
       {"r_median", r.r_median},          {"ci_lo", r.ci_lo},
       {"ci_hi", r.ci_hi}};
}

void from_json(const nlohmann::json& j, CorrelationResult& r) {
  r.metric = metric_from_string(j.at("metric").get<std::string>());
  r.layer = j.at("layer").get<FeatureLayer>();
  r.r_point = j.value("r_point", 0.0);
  r.r_replicates = j.value("r_replicates", std::vector<double>{});
  r.missing_replicates = j.value("missing_replicates", std::vector<int>{});
  r.r_median = j.at("r_median").get<double>();
  r.ci_lo = j.at("ci_lo").get<double>();
  r.ci_hi = j.at("ci_hi").get<double>();
}

std::string format_cell(double median, double lo, double hi) {
  return fmt::format("{:.3f} ({:.3f}, {:.3f})", median, lo, hi);
}

ReportDocument rank_table(std::span<const CorrelationResult> results) {
  constexpr Metric kRows[] = {Metric::kFid, Metric::kKid};
  constexpr const char* kHeaders[] = {"pool1", "pool2", "pre-aux", "pool3"};
  constexpr const char* kGap = "—";

  const CorrelationResult* grid[2][4] = {};
  for (const auto& r : results) {
    grid[r.metric == Metric::kFid ? 0 : 1][static_cast<int>(r.layer.kind)] = &r;
  }
  const CorrelationResult* best = nullptr;
  for (auto& row : grid) {
    for (const auto* cell : row) {
      if (cell && (!best || cell->r_median > best->r_median)) best = cell;
    }
  }

  ReportDocument doc;
  doc.markdown = "| | pool1 | pool2 | pre-aux | pool3 |\n|---|---|---|---|---|\n";
  std::vector<std::vector<std::string>> text_rows = {{"", "pool1", "pool2", "pre-aux", "pool3"}};
  nlohmann::json cells = nlohmann::json::array();
  for (int m = 0; m < 2; ++m) {
    const std::string metric(to_string(kRows[m]));
    doc.markdown += "| **" + metric + "** |";
    std::vector<std::string> text_row = {metric};
    for (int l = 0; l < 4; ++l) {
      const CorrelationResult* cell = grid[m][l];
      if (!cell) {
        doc.markdown += std::string(" ") + kGap + " |";
        text_row.push_back(kGap);
        continue;
      }
      const std::string body = format_cell(cell->r_median, cell->ci_lo, cell->ci_hi);
      const bool is_best = cell == best;
      doc.markdown += is_best ? " **" + body + "** |" : " " + body + " |";
      text_row.push_back(is_best ? "*" + body + "*" : body);
      cells.push_back({{"metric", metric},
                       {"layer", to_string(cell->layer.kind)},
                       {"header", kHeaders[l]},
                       {"r_median", cell->r_median},
                       {"ci_lo", cell->ci_lo},
                       {"ci_hi", cell->ci_hi},
                       {"text", body},
                       {"best", is_best}});
    }
    doc.markdown += "\n";
    text_rows.push_back(std::move(text_row));
  }

  // Plain text: columns padded to their widest cell (counting code points).
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
      return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
  };
  std::vector<std::size_t> widths(5, 0);
  for (const auto& row : text_rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  for (const auto& row : text_rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += row[c] + std::string(widths[c] - width(row[c]), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    doc.text += line + "\n";
  }

  doc.json = {{"rows", {"FID", "KID"}},
              {"columns", {"pool1", "pool2", "pre_aux", "pool3"}},
              {"cells", std::move(cells)},
              {"results", std::vector<CorrelationResult>(results.begin(), results.end())}};
  if (best) {
    doc.json["best"] = {{"metric", to_string(best->metric)}, {"layer", to_string(best->layer.kind)}};
  }
  return doc;
}

}  // namespace styleval
