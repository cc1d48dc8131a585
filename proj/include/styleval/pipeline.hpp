#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "styleval/correlation.hpp"
#include "styleval/embeddings.hpp"
#include "styleval/eval_service.hpp"
#include "styleval/hype_style.hpp"
#include "styleval/style_metrics.hpp"

namespace styleval {

enum class OutputFormat { kJson, kCsv, kMarkdown };

OutputFormat output_format_from_string(std::string_view s);

struct SimulationParams {
  double max_degradation = 1.0;  // 0 gives a null model with identical styles
  double embedding_noise = 0.1;
  int latent_dim = 8;
  double spammer_fraction = 0.1;  // evaluators answering at random
  double real_accuracy = 0.9;     // P(judged real | real) for attentive evaluators
  double base_fool = 0.75;        // P(judged real | generated, no degradation)
  double fool_slope = 0.7;        // drop in fool probability at full degradation
  double image_effect = 0.02;     // sd of per-image fool offsets
  double style_effect = 0.08;     // sd of per-style fool offsets that no embedding reflects
  double shift_scale = 6.0;       // mean shift of generated embeddings at full degradation
};

struct PipelineConfig {
  std::filesystem::path images;
  std::filesystem::path embeddings;
  std::filesystem::path labels;
  std::filesystem::path ground_truth;
  std::filesystem::path scores;
  std::filesystem::path model;
  std::string backend = "onnx";  // onnx | projection | constant
  std::vector<LayerKind> layers{std::begin(kAllLayers), std::end(kAllLayers)};
  LayerDims dims;
  CampaignConfig campaign;
  std::vector<std::pair<Metric, LayerKind>> methods;  // empty means all eight
  double eps = 1e-6;
  std::optional<int> kid_subset_size;
  int kid_subsets = 1;
  BootstrapConfig bootstrap;
  SimulationParams simulation;
  std::uint64_t seed = 0;

  // Also reseeds the campaign and the bootstrap.
  void set_seed(std::uint64_t s);
  std::vector<MetricConfig> metric_set() const;
};

// Dims of the synthetic embeddings written by cmd_simulate.
inline constexpr LayerDims kSimulationDims{8, 16, 32, 64};

// Flat `key = value` documents; '#' starts a comment.
std::map<std::string, std::string> parse_flat_config(std::string_view text);
std::map<std::string, std::string> read_flat_config(const std::filesystem::path& path);
// Relative paths resolve against `base`. Unknown keys throw InvalidArgument.
void apply_settings(const std::map<std::string, std::string>& settings, PipelineConfig& cfg,
                    const std::filesystem::path& base = {});
std::string to_flat_config(const PipelineConfig& cfg);

// embed
struct EmbedFailure {
  std::filesystem::path file;
  std::string message;
};

struct EmbedResult {
  std::vector<std::filesystem::path> files;  // one per layer
  std::vector<EmbedFailure> failures;
  int rows = 0;
};

// Images are taken from `manifest.json` in the directory when present,
// otherwise every image whose stem is a token with ':' written as '_'
// (real_3.png, gen_41_2_1.png).
std::map<std::string, std::filesystem::path> discover_images(const std::filesystem::path& dir);

EmbedResult cmd_embed(const std::filesystem::path& images_dir, std::span<const LayerKind> layers,
                      InferenceBackend& backend, const LayerDims& dims,
                      const std::filesystem::path& out_dir);

std::filesystem::path layer_file(const std::filesystem::path& dir, LayerKind kind);
std::map<LayerKind, EmbeddingMatrix> load_layer_embeddings(const std::filesystem::path& dir,
                                                           std::span<const LayerKind> layers);

// Measurement real pool and measured generated rows of one layer file.
LayerEmbeddings split_embeddings(const EmbeddingMatrix& all, const CampaignConfig& cfg);
std::map<StyleId, EmbeddingMatrix> group_by_style(const EmbeddingMatrix& generated);

// score
struct ScoreResult {
  std::vector<StyleScore> scores;
  std::vector<int> missing_styles;
  std::vector<StyleError> errors;
};

ScoreResult cmd_score(const std::map<LayerKind, EmbeddingMatrix>& embeddings,
                      std::span<const MetricConfig> metrics, const CampaignConfig& cfg);
std::string render_scores(const ScoreResult& result, OutputFormat format);

// aggregate
CampaignResults cmd_aggregate(std::span<const LabelRecord> labels, const GroundTruth& truth,
                              const CampaignConfig& cfg);
std::string render_aggregate(const CampaignResults& results, OutputFormat format);

// correlate
std::vector<CorrelationResult> cmd_correlate(const std::map<LayerKind, EmbeddingMatrix>& embeddings,
                                             std::span<const LabelRecord> labels, const GroundTruth& truth,
                                             std::span<const MetricConfig> metrics, const CampaignConfig& cfg,
                                             const BootstrapConfig& boot);
// Point estimates only, from precomputed style scores. The interval collapses
// onto the point and no replicates are reported.
std::vector<CorrelationResult> correlate_scores(std::span<const StyleHumanScore> human,
                                                std::span<const StyleScore> scores, bool negate_distances);
std::string render_correlation(std::span<const CorrelationResult> results, OutputFormat format);

// simulate
struct SimulatedDataset {
  PipelineConfig config;
  std::map<LayerKind, EmbeddingMatrix> embeddings;
  std::vector<LabelRecord> labels;
  GroundTruth truth;
  std::vector<double> degradation;  // per style
  std::set<std::string> spammers;
};

SimulatedDataset simulate_campaign(const PipelineConfig& cfg);

// Writes config.txt, embeddings/<layer>.emb, labels.csv, ground_truth.json and
// simulation.json under `out_dir`.
void write_simulation(const SimulatedDataset& data, const std::filesystem::path& out_dir);

// assign / validate
std::string render_plan(const AssignmentPlan& plan, const CampaignConfig& cfg);
nlohmann::json validation_json(const ValidationReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
GroundTruth read_ground_truth(const std::filesystem::path& path);

}  // namespace styleval
