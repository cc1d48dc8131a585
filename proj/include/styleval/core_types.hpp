#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace styleval {

// One mode of the conditional generator. The label is display-only; identity
// and ordering use the index.
struct StyleId {
  int index = 0;
  std::string label;

  friend bool operator==(const StyleId& a, const StyleId& b) { return a.index == b.index; }
  friend auto operator<=>(const StyleId& a, const StyleId& b) { return a.index <=> b.index; }
};

StyleId make_style(int index);

enum class ImageKind { kReal, kInput, kGenerated };

std::string_view to_string(ImageKind kind);
ImageKind image_kind_from_string(std::string_view s);

// Generated images carry both the conditioning input and the style; real and
// input images carry neither.
struct ImageId {
  int index = 0;
  ImageKind kind = ImageKind::kReal;
  std::optional<int> input_index;
  std::optional<StyleId> style;

  static ImageId real(int index);
  static ImageId input(int index);
  static ImageId generated(int index, int input_index, StyleId style);

  bool is_generated() const { return kind == ImageKind::kGenerated; }

  // Canonical token: "real:<idx>", "input:<idx>", "gen:<idx>:<input>:<style>".
  std::string to_string() const;
  static ImageId parse(std::string_view token);

  friend bool operator==(const ImageId& a, const ImageId& b) {
    return a.kind == b.kind && a.index == b.index && a.input_index == b.input_index &&
           a.style == b.style;
  }
  friend auto operator<=>(const ImageId& a, const ImageId& b) {
    if (auto c = a.kind <=> b.kind; c != 0) return c;
    return a.index <=> b.index;
  }
};

void validate(const ImageId& id);

enum class LayerKind { kPool1, kPool2, kPreAux, kPool3 };

inline constexpr LayerKind kAllLayers[] = {LayerKind::kPool1, LayerKind::kPool2,
                                            LayerKind::kPreAux, LayerKind::kPool3};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view s);

// Dimensionality of each feature tap. Defaults follow Inception-V3: the first
// two pooling maps have 64 and 192 channels, the tap ahead of the auxiliary
// head 768 and the final pool 2048.
struct LayerDims {
  int pool1 = 64;
  int pool2 = 192;
  int pre_aux = 768;
  int pool3 = 2048;

  int dim(LayerKind kind) const;
  // Throws unless the dims strictly increase pool1 < pool2 < pre_aux < pool3.
  void validate() const;

  friend bool operator==(const LayerDims&, const LayerDims&) = default;
};

struct FeatureLayer {
  LayerKind kind = LayerKind::kPool3;
  int dim = 2048;

  static FeatureLayer make(LayerKind kind, const LayerDims& dims = {});

  friend bool operator==(const FeatureLayer&, const FeatureLayer&) = default;
};

// n x d row-major float32 features, one row per image, all from one layer.
struct EmbeddingMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;
  std::vector<ImageId> row_ids;
  FeatureLayer layer;

  static EmbeddingMatrix zeros(int rows, FeatureLayer layer);

  std::span<const float> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<float> row(int i) {
    return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
  }

  // Rows whose index is listed, in order; duplicates are allowed.
  EmbeddingMatrix select_rows(std::span<const int> indices) const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

// Throws unless cols == layer.dim, row_ids.size() == rows, and every entry is finite.
void validate(const EmbeddingMatrix& m);

enum class Phase { kCalibration, kMeasurement };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view s);

// Milliseconds since the Unix epoch, UTC.
struct UtcMillis {
  std::int64_t value = 0;

  std::string to_iso8601() const;
  static UtcMillis parse_iso8601(std::string_view s);
  static UtcMillis now();

  friend auto operator<=>(const UtcMillis&, const UtcMillis&) = default;
};

struct LabelRecord {
  std::string evaluator_id;
  ImageId image;
  int judged_real = 0;  // 1 = "real", 0 = "generated"
  Phase phase = Phase::kMeasurement;
  std::int64_t elapsed_ms = 0;
  UtcMillis timestamp;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

void validate(const LabelRecord& label);

void to_json(nlohmann::json& j, const StyleId& s);
void from_json(const nlohmann::json& j, StyleId& s);
void to_json(nlohmann::json& j, const ImageId& id);
void from_json(const nlohmann::json& j, ImageId& id);
void to_json(nlohmann::json& j, const LayerDims& d);
void from_json(const nlohmann::json& j, LayerDims& d);
void to_json(nlohmann::json& j, const FeatureLayer& l);
void from_json(const nlohmann::json& j, FeatureLayer& l);
void to_json(nlohmann::json& j, const EmbeddingMatrix& m);
void from_json(const nlohmann::json& j, EmbeddingMatrix& m);
void to_json(nlohmann::json& j, const LabelRecord& r);
void from_json(const nlohmann::json& j, LabelRecord& r);

}  // namespace styleval
