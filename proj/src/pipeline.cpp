#include "styleval/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "styleval/embedding_file.hpp"
#include "styleval/errors.hpp"
#include "styleval/onnx_backend.hpp"
#include "styleval/rng.hpp"

namespace styleval {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = s.find(',', pos);
    auto item = trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (!item.empty()) out.push_back(std::move(item));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(value, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
      out = std::stoull(value, &used);
    } else {
      out = std::stoi(value, &used);
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("config key '{}': bad number '{}'", key, value));
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("config key '{}': expected true or false", key));
}

std::string format_double(double v) { return fmt::format("{}", v); }

nlohmann::json style_error_json(const StyleError& e) {
  return {{"style", e.style.index}, {"label", e.style.label}, {"code", to_string(e.code)}, {"message", e.message}};
}

std::string method_name(Metric m, LayerKind l) { return fmt::format("{}:{}", to_string(m), to_string(l)); }

}  // namespace

OutputFormat output_format_from_string(std::string_view s) {
  if (s == "json") return OutputFormat::kJson;
  if (s == "csv") return OutputFormat::kCsv;
  if (s == "md") return OutputFormat::kMarkdown;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown format '{}'", s));
}

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  campaign.rng_seed = s;
  bootstrap.rng_seed = mix_seed(s, 0xB007);
}

std::vector<MetricConfig> PipelineConfig::metric_set() const {
  std::vector<MetricConfig> out;
  if (methods.empty()) {
    out = all_metric_configs(dims);
  } else {
    for (const auto& [metric, layer] : methods) {
      MetricConfig m;
      m.metric = metric;
      m.layer = FeatureLayer::make(layer, dims);
      out.push_back(m);
    }
  }
  for (auto& m : out) {
    m.eps = eps;
    m.kid_subset_size = kid_subset_size;
    m.kid_subsets = kid_subsets;
    m.kid_seed = mix_seed(seed, 0x1C1D);
    m.validate();
  }
  return out;
}

std::map<std::string, std::string> parse_flat_config(std::string_view text) {
  std::map<std::string, std::string> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kParse, fmt::format("config line {}: expected key = value", line_no));
    }
    auto key = trim(std::string_view(stripped).substr(0, eq));
    auto value = trim(std::string_view(stripped).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw Error(ErrorCode::kParse, fmt::format("config line {}: empty key", line_no));
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_flat_config(const std::filesystem::path& path) {
  return parse_flat_config(read_text_file(path));
}

void apply_settings(const std::map<std::string, std::string>& settings, PipelineConfig& cfg,
                    const std::filesystem::path& base) {
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p = v;
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  // Seed first so explicit sub-seeds in the same document win.
  if (auto it = settings.find("seed"); it != settings.end()) {
    cfg.set_seed(parse_number<std::uint64_t>(it->first, it->second));
  }
  for (const auto& [key, value] : settings) {
    CampaignConfig& c = cfg.campaign;
    SimulationParams& sim = cfg.simulation;
    if (key == "seed") continue;
    if (key == "images") cfg.images = path_of(value);
    else if (key == "embeddings") cfg.embeddings = path_of(value);
    else if (key == "labels") cfg.labels = path_of(value);
    else if (key == "ground_truth") cfg.ground_truth = path_of(value);
    else if (key == "scores") cfg.scores = path_of(value);
    else if (key == "model") cfg.model = path_of(value);
    else if (key == "backend") cfg.backend = value;
    else if (key == "layers") {
      cfg.layers.clear();
      for (const auto& l : split_list(value)) cfg.layers.push_back(layer_kind_from_string(l));
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& m : split_list(value)) {
        const auto colon = m.find(':');
        if (colon == std::string::npos) {
          throw Error(ErrorCode::kInvalidArgument, fmt::format("method '{}' must be metric:layer", m));
        }
        cfg.methods.emplace_back(metric_from_string(m.substr(0, colon)), layer_kind_from_string(m.substr(colon + 1)));
      }
    } else if (key == "dims.pool1") cfg.dims.pool1 = parse_number<int>(key, value);
    else if (key == "dims.pool2") cfg.dims.pool2 = parse_number<int>(key, value);
    else if (key == "dims.pre_aux") cfg.dims.pre_aux = parse_number<int>(key, value);
    else if (key == "dims.pool3") cfg.dims.pool3 = parse_number<int>(key, value);
    else if (key == "metric.eps") cfg.eps = parse_number<double>(key, value);
    else if (key == "metric.kid_subset_size") cfg.kid_subset_size = parse_number<int>(key, value);
    else if (key == "metric.kid_subsets") cfg.kid_subsets = parse_number<int>(key, value);
    else if (key == "campaign.n_inputs") c.n_inputs = parse_number<int>(key, value);
    else if (key == "campaign.n_styles") c.n_styles = parse_number<int>(key, value);
    else if (key == "campaign.repetitions") c.repetitions = parse_number<int>(key, value);
    else if (key == "campaign.session_generated") c.session_generated = parse_number<int>(key, value);
    else if (key == "campaign.session_real") c.session_real = parse_number<int>(key, value);
    else if (key == "campaign.real_pool_size") c.real_pool_size = parse_number<int>(key, value);
    else if (key == "campaign.calibration_size") c.calibration_size = parse_number<int>(key, value);
    else if (key == "campaign.threshold") c.calibration_pass_threshold = parse_number<double>(key, value);
    else if (key == "campaign.seed") c.rng_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "bootstrap.replicates") cfg.bootstrap.replicates = parse_number<int>(key, value);
    else if (key == "bootstrap.ci_level") cfg.bootstrap.ci_level = parse_number<double>(key, value);
    else if (key == "bootstrap.negate") cfg.bootstrap.negate_distances = parse_bool(key, value);
    else if (key == "bootstrap.threads") cfg.bootstrap.threads = parse_number<int>(key, value);
    else if (key == "bootstrap.seed") cfg.bootstrap.rng_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "sim.max_degradation") sim.max_degradation = parse_number<double>(key, value);
    else if (key == "sim.embedding_noise") sim.embedding_noise = parse_number<double>(key, value);
    else if (key == "sim.latent_dim") sim.latent_dim = parse_number<int>(key, value);
    else if (key == "sim.spammer_fraction") sim.spammer_fraction = parse_number<double>(key, value);
    else if (key == "sim.real_accuracy") sim.real_accuracy = parse_number<double>(key, value);
    else if (key == "sim.base_fool") sim.base_fool = parse_number<double>(key, value);
    else if (key == "sim.fool_slope") sim.fool_slope = parse_number<double>(key, value);
    else if (key == "sim.image_effect") sim.image_effect = parse_number<double>(key, value);
    else if (key == "sim.style_effect") sim.style_effect = parse_number<double>(key, value);
    else if (key == "sim.shift_scale") sim.shift_scale = parse_number<double>(key, value);
    else throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown config key '{}'", key));
  }
}

std::string to_flat_config(const PipelineConfig& cfg) {
  std::string out;
  auto put = [&](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  auto put_path = [&](std::string_view key, const std::filesystem::path& p) {
    if (!p.empty()) put(key, p.generic_string());
  };
  put("seed", std::to_string(cfg.seed));
  put_path("images", cfg.images);
  put_path("embeddings", cfg.embeddings);
  put_path("labels", cfg.labels);
  put_path("ground_truth", cfg.ground_truth);
  put_path("scores", cfg.scores);
  put_path("model", cfg.model);
  put("backend", cfg.backend);
  std::vector<std::string> layers;
  for (auto l : cfg.layers) layers.emplace_back(to_string(l));
  put("layers", fmt::format("{}", fmt::join(layers, ",")));
  if (!cfg.methods.empty()) {
    std::vector<std::string> methods;
    for (const auto& [m, l] : cfg.methods) methods.push_back(method_name(m, l));
    put("methods", fmt::format("{}", fmt::join(methods, ",")));
  }
  put("dims.pool1", std::to_string(cfg.dims.pool1));
  put("dims.pool2", std::to_string(cfg.dims.pool2));
  put("dims.pre_aux", std::to_string(cfg.dims.pre_aux));
  put("dims.pool3", std::to_string(cfg.dims.pool3));
  put("metric.eps", format_double(cfg.eps));
  if (cfg.kid_subset_size) put("metric.kid_subset_size", std::to_string(*cfg.kid_subset_size));
  put("metric.kid_subsets", std::to_string(cfg.kid_subsets));
  const CampaignConfig& c = cfg.campaign;
  put("campaign.n_inputs", std::to_string(c.n_inputs));
  put("campaign.n_styles", std::to_string(c.n_styles));
  put("campaign.repetitions", std::to_string(c.repetitions));
  put("campaign.session_generated", std::to_string(c.session_generated));
  put("campaign.session_real", std::to_string(c.session_real));
  put("campaign.real_pool_size", std::to_string(c.real_pool_size));
  put("campaign.calibration_size", std::to_string(c.calibration_size));
  put("campaign.threshold", format_double(c.calibration_pass_threshold));
  put("campaign.seed", std::to_string(c.rng_seed));
  put("bootstrap.replicates", std::to_string(cfg.bootstrap.replicates));
  put("bootstrap.ci_level", format_double(cfg.bootstrap.ci_level));
  put("bootstrap.negate", cfg.bootstrap.negate_distances ? "true" : "false");
  put("bootstrap.threads", std::to_string(cfg.bootstrap.threads));
  put("bootstrap.seed", std::to_string(cfg.bootstrap.rng_seed));
  const SimulationParams& s = cfg.simulation;
  put("sim.max_degradation", format_double(s.max_degradation));
  put("sim.embedding_noise", format_double(s.embedding_noise));
  put("sim.latent_dim", std::to_string(s.latent_dim));
  put("sim.spammer_fraction", format_double(s.spammer_fraction));
  put("sim.real_accuracy", format_double(s.real_accuracy));
  put("sim.base_fool", format_double(s.base_fool));
  put("sim.fool_slope", format_double(s.fool_slope));
  put("sim.image_effect", format_double(s.image_effect));
  put("sim.style_effect", format_double(s.style_effect));
  put("sim.shift_scale", format_double(s.shift_scale));
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path)).get<GroundTruth>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::map<std::string, std::filesystem::path> discover_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, fmt::format("{} is not a directory", dir.string()));
  }
  if (std::filesystem::exists(dir / "manifest.json")) {
    return ImageManifest::from_json(nlohmann::json::parse(read_text_file(dir / "manifest.json")), dir).files;
  }
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string token = entry.path().stem().string();
    std::replace(token.begin(), token.end(), '_', ':');
    try {
      ImageId::parse(token);
    } catch (const Error&) {
      continue;
    }
    out[token] = entry.path();
  }
  return out;
}

std::filesystem::path layer_file(const std::filesystem::path& dir, LayerKind kind) {
  return dir / fmt::format("{}.emb", to_string(kind));
}

EmbedResult cmd_embed(const std::filesystem::path& images_dir, std::span<const LayerKind> layers,
                      InferenceBackend& backend, const LayerDims& dims,
                      const std::filesystem::path& out_dir) {
  if (layers.empty()) throw Error(ErrorCode::kInvalidArgument, "no layers requested");
  for (auto l : layers) {
    if (!backend.supports(l)) {
      throw Error(ErrorCode::kBackendCapability, fmt::format("backend does not provide layer {}", to_string(l)));
    }
  }
  const auto images = discover_images(images_dir);
  EmbedResult result;
  std::vector<EmbeddingMatrix> out;
  for (auto l : layers) {
    EmbeddingMatrix m;
    m.layer = FeatureLayer::make(l, dims);
    m.cols = m.layer.dim;
    out.push_back(std::move(m));
  }

  constexpr std::size_t kBatch = 16;
  std::vector<PreprocessedImage> batch;
  std::vector<ImageId> ids;
  auto flush = [&] {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto part = extract_features(batch, out[k].layer, backend, ids);
      out[k].data.insert(out[k].data.end(), part.data.begin(), part.data.end());
      out[k].row_ids.insert(out[k].row_ids.end(), part.row_ids.begin(), part.row_ids.end());
      out[k].rows += part.rows;
    }
    batch.clear();
    ids.clear();
  };
  for (const auto& [token, path] : images) {
    try {
      const ImageId id = ImageId::parse(token);
      batch.push_back(preprocess_image(load_rgb_image(path)));
      ids.push_back(id);
    } catch (const Error& e) {
      spdlog::warn("{}: {}", path.string(), e.what());
      result.failures.push_back({path, e.what()});
      continue;
    }
    if (batch.size() == kBatch) flush();
  }
  if (!batch.empty()) flush();

  std::filesystem::create_directories(out_dir);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto file = layer_file(out_dir, layers[k]);
    write_embeddings(out[k], file);
    result.files.push_back(file);
  }
  result.rows = out.front().rows;
  return result;
}

std::map<LayerKind, EmbeddingMatrix> load_layer_embeddings(const std::filesystem::path& dir,
                                                           std::span<const LayerKind> layers) {
  std::map<LayerKind, EmbeddingMatrix> out;
  for (auto l : layers) out.emplace(l, read_embeddings(layer_file(dir, l)));
  return out;
}

LayerEmbeddings split_embeddings(const EmbeddingMatrix& all, const CampaignConfig& cfg) {
  std::vector<int> real_rows, gen_rows;
  for (int r = 0; r < all.rows; ++r) {
    const ImageId& id = all.row_ids[r];
    if (id.kind == ImageKind::kReal && id.index < cfg.real_pool_size) real_rows.push_back(r);
    if (id.is_generated() && *id.input_index < cfg.n_inputs && id.style->index < cfg.n_styles) {
      gen_rows.push_back(r);
    }
  }
  return {all.select_rows(real_rows), all.select_rows(gen_rows)};
}

std::map<StyleId, EmbeddingMatrix> group_by_style(const EmbeddingMatrix& generated) {
  std::map<StyleId, std::vector<int>> rows;
  for (int r = 0; r < generated.rows; ++r) {
    const ImageId& id = generated.row_ids[r];
    if (id.is_generated()) rows[*id.style].push_back(r);
  }
  std::map<StyleId, EmbeddingMatrix> out;
  for (const auto& [style, idx] : rows) out.emplace(style, generated.select_rows(idx));
  return out;
}

ScoreResult cmd_score(const std::map<LayerKind, EmbeddingMatrix>& embeddings,
                      std::span<const MetricConfig> metrics, const CampaignConfig& cfg) {
  if (metrics.empty()) throw Error(ErrorCode::kInvalidArgument, "no metrics configured");
  ScoreResult result;
  std::set<int> missing;
  for (const auto& m : metrics) {
    auto it = embeddings.find(m.layer.kind);
    if (it == embeddings.end()) {
      throw Error(ErrorCode::kLayerMismatch, fmt::format("no embeddings for layer {}", to_string(m.layer.kind)));
    }
    const auto split = split_embeddings(it->second, cfg);
    const auto groups = group_by_style(split.generated);
    for (int s = 0; s < cfg.n_styles; ++s) {
      if (!groups.contains(make_style(s))) missing.insert(s);
    }
    auto report = score_styles(split.real, groups, m);
    result.scores.insert(result.scores.end(), report.scores.begin(), report.scores.end());
    result.errors.insert(result.errors.end(), report.errors.begin(), report.errors.end());
  }
  result.missing_styles.assign(missing.begin(), missing.end());
  return result;
}

std::string render_scores(const ScoreResult& result, OutputFormat format) {
  switch (format) {
    case OutputFormat::kCsv:
      return scores_to_csv(result.scores);
    case OutputFormat::kMarkdown: {
      std::string out = "| style | metric | layer | value |\n|---|---|---|---|\n";
      for (const auto& s : result.scores) {
        out += fmt::format("| {} | {} | {} | {:.6g} |\n", s.style.label, to_string(s.config.metric),
                           to_string(s.config.layer.kind), s.value);
      }
      return out;
    }
    case OutputFormat::kJson: {
      nlohmann::json errors = nlohmann::json::array();
      for (const auto& e : result.errors) errors.push_back(style_error_json(e));
      return nlohmann::json{{"scores", result.scores},
                            {"missing_styles", result.missing_styles},
                            {"errors", std::move(errors)}}
                 .dump(2) +
             "\n";
    }
  }
  return {};
}

CampaignResults cmd_aggregate(std::span<const LabelRecord> labels, const GroundTruth& truth,
                              const CampaignConfig& cfg) {
  return aggregate_campaign(labels, truth, cfg);
}

std::string render_aggregate(const CampaignResults& results, OutputFormat format) {
  switch (format) {
    case OutputFormat::kCsv: {
      std::string out = "style,label,micro_average,label_sum,label_count\n";
      for (const auto& s : results.hype.scores) {
        out += fmt::format("{},{},{:.17g},{},{}\n", s.style.index, s.style.label, s.micro_average, s.label_sum,
                           s.label_count);
      }
      return out;
    }
    case OutputFormat::kMarkdown: {
      std::string out = "| style | HYPE-Style | labels |\n|---|---|---|\n";
      for (const auto& s : results.hype.scores) {
        out += fmt::format("| {} | {:.3f} | {} |\n", s.style.label, s.micro_average, s.label_count);
      }
      return out;
    }
    case OutputFormat::kJson:
      return to_json(results).dump(2) + "\n";
  }
  return {};
}

std::vector<CorrelationResult> cmd_correlate(const std::map<LayerKind, EmbeddingMatrix>& embeddings,
                                             std::span<const LabelRecord> labels, const GroundTruth& truth,
                                             std::span<const MetricConfig> metrics, const CampaignConfig& cfg,
                                             const BootstrapConfig& boot) {
  BootstrapInputs in;
  const auto filter = filter_evaluators(labels, truth, cfg);
  in.labels = retained_generated_labels(labels, filter);
  for (const auto& [kind, matrix] : embeddings) in.embeddings.emplace(kind, split_embeddings(matrix, cfg));
  in.metrics.assign(metrics.begin(), metrics.end());
  in.campaign = cfg;
  return bootstrap_correlation(in, boot);
}

std::vector<CorrelationResult> correlate_scores(std::span<const StyleHumanScore> human,
                                                std::span<const StyleScore> scores, bool negate_distances) {
  std::vector<std::pair<Metric, FeatureLayer>> order;
  std::map<std::pair<int, int>, std::vector<StyleScore>> groups;
  for (const auto& s : scores) {
    const auto key = std::make_pair(static_cast<int>(s.config.metric), static_cast<int>(s.config.layer.kind));
    if (!groups.contains(key)) order.emplace_back(s.config.metric, s.config.layer);
    groups[key].push_back(s);
  }
  std::vector<CorrelationResult> out;
  for (const auto& [metric, layer] : order) {
    CorrelationResult r;
    r.metric = metric;
    r.layer = layer;
    r.r_point = correlate_method(human, groups.at({static_cast<int>(metric), static_cast<int>(layer.kind)}),
                                 negate_distances);
    r.r_median = r.ci_lo = r.ci_hi = r.r_point;
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_correlation(std::span<const CorrelationResult> results, OutputFormat format) {
  const auto report = rank_table(results);
  switch (format) {
    case OutputFormat::kMarkdown:
      return report.markdown;
    case OutputFormat::kCsv: {
      std::string out = "metric,layer,r_point,r_median,ci_lo,ci_hi,replicates,missing_replicates\n";
      for (const auto& r : results) {
        out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", to_string(r.metric),
                           to_string(r.layer.kind), r.r_point, r.r_median, r.ci_lo, r.ci_hi, r.r_replicates.size(),
                           r.missing_replicates.size());
      }
      return out;
    }
    case OutputFormat::kJson:
      return nlohmann::json{{"results", std::vector<CorrelationResult>(results.begin(), results.end())},
                            {"report", report.json}}
                 .dump(2) +
             "\n";
  }
  return {};
}

SimulatedDataset simulate_campaign(const PipelineConfig& cfg) {
  const CampaignConfig& c = cfg.campaign;
  const SimulationParams& p = cfg.simulation;
  c.validate();
  cfg.dims.validate();
  if (p.latent_dim < 1) throw Error(ErrorCode::kInvalidArgument, "sim.latent_dim must be >= 1");

  SimulatedDataset data;
  data.config = cfg;
  data.truth = GroundTruth::for_campaign(c);
  const int S = c.n_styles;
  const int k = p.latent_dim;

  // Degradation grows with a seeded ranking of the styles.
  std::vector<int> rank(S);
  std::iota(rank.begin(), rank.end(), 0);
  Rng order(mix_seed(cfg.seed, 1));
  order.shuffle(std::span<int>(rank));
  data.degradation.resize(S);
  for (int s = 0; s < S; ++s) data.degradation[s] = S > 1 ? p.max_degradation * rank[s] / (S - 1) : 0.0;

  const int n_latent_inputs = c.n_inputs + c.calibration_size / 2;
  std::vector<std::vector<double>> input_latent(n_latent_inputs, std::vector<double>(k));
  std::vector<std::vector<double>> real_latent(c.real_pool_size, std::vector<double>(k));
  Rng latents(mix_seed(cfg.seed, 2));
  for (auto& z : input_latent) {
    for (auto& v : z) v = latents.normal();
  }
  for (auto& z : real_latent) {
    for (auto& v : z) v = latents.normal();
  }

  std::vector<ImageId> real_ids = measurement_real_images(c);
  std::vector<ImageId> gen_ids = measurement_generated_images(c);
  for (LayerKind kind : cfg.layers) {
    const FeatureLayer layer = FeatureLayer::make(kind, cfg.dims);
    const int d = layer.dim;
    Rng w(mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(kind)));
    std::vector<double> A(static_cast<std::size_t>(d) * k);
    for (auto& v : A) v = w.normal() / std::sqrt(static_cast<double>(k));
    // Per-style shift direction: a shared component plus a style-specific one.
    std::vector<double> common(d);
    for (auto& v : common) v = w.normal();
    std::vector<std::vector<double>> shift(S, std::vector<double>(d));
    for (int s = 0; s < S; ++s) {
      double norm = 0.0;
      for (int j = 0; j < d; ++j) {
        shift[s][j] = common[j] + 0.5 * w.normal();
        norm += shift[s][j] * shift[s][j];
      }
      const double scale = p.shift_scale * std::sqrt(data.degradation[s]) / std::sqrt(norm);
      for (auto& v : shift[s]) v *= scale;
    }

    EmbeddingMatrix m;
    m.layer = layer;
    m.cols = d;
    Rng noise(mix_seed(cfg.seed, 200 + static_cast<std::uint64_t>(kind)));
    auto emit = [&](const ImageId& id, const std::vector<double>& z, const std::vector<double>* offset) {
      for (int j = 0; j < d; ++j) {
        double v = 0.0;
        for (int t = 0; t < k; ++t) v += A[static_cast<std::size_t>(j) * k + t] * z[t];
        if (offset) v += (*offset)[j];
        v += p.embedding_noise * noise.normal();
        m.data.push_back(static_cast<float>(v));
      }
      m.row_ids.push_back(id);
      ++m.rows;
    };
    for (const auto& id : real_ids) emit(id, real_latent[id.index], nullptr);
    for (const auto& id : gen_ids) emit(id, input_latent[*id.input_index], &shift[id.style->index]);
    data.embeddings.emplace(kind, std::move(m));
  }

  // Human judgements follow the plan's presentation order.
  const AssignmentPlan plan = build_assignments(c);
  Rng effects(mix_seed(cfg.seed, 3));
  Rng style_effects(mix_seed(cfg.seed, 5));
  std::vector<double> style_offset(S);
  for (auto& v : style_offset) v = p.style_effect * style_effects.normal();
  std::map<std::string, double> fool;
  for (const auto& [token, id] : data.truth.images()) {
    if (!id.is_generated()) continue;
    const int s = id.style->index;
    const double base = p.base_fool - p.fool_slope * data.degradation[s] + style_offset[s];
    fool[token] = std::clamp(base + p.image_effect * effects.normal(), 0.02, 0.98);
  }
  Rng judge(mix_seed(cfg.seed, 4));
  const std::int64_t t0 = 1'700'000'000'000;
  std::int64_t clock = t0;
  for (const auto& task : plan.evaluators) {
    const std::string evaluator = fmt::format("sim_{:03d}", task.slot);
    const bool spammer = judge.uniform() < p.spammer_fraction;
    if (spammer) data.spammers.insert(evaluator);
    auto label = [&](const ImageId& id, Phase phase) {
      const std::string token = id.to_string();
      double p_real = 0.5;
      if (!spammer) p_real = id.is_generated() ? fool.at(token) : p.real_accuracy;
      LabelRecord r;
      r.evaluator_id = evaluator;
      r.image = id;
      r.phase = phase;
      r.judged_real = judge.uniform() < p_real ? 1 : 0;
      r.elapsed_ms = 600 + static_cast<std::int64_t>(judge.below(4000));
      clock += r.elapsed_ms + 250;
      r.timestamp = UtcMillis{clock};
      data.labels.push_back(std::move(r));
    };
    for (const auto& id : task.calibration) label(id, Phase::kCalibration);
    // Evaluators who fail the tutorial never reach the measurement phase.
    std::vector<LabelRecord> tutorial(data.labels.end() - static_cast<std::ptrdiff_t>(task.calibration.size()),
                                      data.labels.end());
    if (calibration_accuracy(tutorial, data.truth) < c.calibration_pass_threshold) continue;
    for (const auto& id : task.items) label(id, Phase::kMeasurement);
  }
  return data;
}

void write_simulation(const SimulatedDataset& data, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "embeddings");
  PipelineConfig cfg = data.config;
  cfg.embeddings = "embeddings";
  cfg.labels = "labels.csv";
  cfg.ground_truth = "ground_truth.json";
  write_text_file(out_dir / "config.txt", to_flat_config(cfg));
  for (const auto& [kind, m] : data.embeddings) write_embeddings(m, layer_file(out_dir / "embeddings", kind));
  write_text_file(out_dir / "labels.csv", labels_to_csv(data.labels));
  write_text_file(out_dir / "ground_truth.json", nlohmann::json(data.truth).dump(1) + "\n");
  nlohmann::json styles = nlohmann::json::array();
  for (std::size_t s = 0; s < data.degradation.size(); ++s) {
    styles.push_back({{"style", s}, {"label", make_style(static_cast<int>(s)).label}, {"degradation", data.degradation[s]}});
  }
  write_text_file(out_dir / "simulation.json",
                  nlohmann::json{{"seed", data.config.seed},
                                 {"styles", std::move(styles)},
                                 {"spammers", data.spammers}}
                          .dump(2) +
                      "\n");
}

std::string render_plan(const AssignmentPlan& plan, const CampaignConfig& cfg) {
  return nlohmann::json{{"config", cfg}, {"plan", plan}}.dump(1) + "\n";
}

nlohmann::json validation_json(const ValidationReport& report) {
  nlohmann::json counts = nlohmann::json::object();
  for (auto kind : {ViolationKind::kCoverage, ViolationKind::kDuplicateInput, ViolationKind::kWrongSessionSize,
                    ViolationKind::kCalibration, ViolationKind::kUnknownImage}) {
    counts[std::string(to_string(kind))] = report.count(kind);
  }
  return {{"ok", report.ok()}, {"counts", std::move(counts)}, {"violations", report.violations}};
}

}  // namespace styleval
