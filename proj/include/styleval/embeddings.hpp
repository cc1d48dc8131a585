#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "styleval/core_types.hpp"

namespace styleval {

// 8-bit interleaved RGB, row-major (height x width x 3).
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

inline constexpr int kNetworkInputSize = 299;

// 299 x 299 x 3 interleaved floats in [-1, 1].
struct PreprocessedImage {
  static constexpr int kWidth = kNetworkInputSize;
  static constexpr int kHeight = kNetworkInputSize;
  static constexpr int kChannels = 3;

  std::vector<float> values;

  float at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * kWidth + x) * kChannels + c]; }
};

// Bilinear (half-pixel centres, edge clamped) resize to 299 x 299, then v / 127.5 - 1.
PreprocessedImage preprocess_image(const RgbImage& image);

// Spatial activation map, height x width x channels interleaved. Vector
// outputs are 1 x 1 x C.
struct FeatureMap {
  int height = 1;
  int width = 1;
  int channels = 0;
  std::vector<float> values;
};

// A network that maps a preprocessed image to per-layer activations. Output
// must be deterministic for a fixed instance and input. Instances may keep
// state, so callers serialize access per instance.
class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;

  virtual bool supports(LayerKind layer) const = 0;
  virtual FeatureMap infer(const PreprocessedImage& image, LayerKind layer) = 0;
};

// Averages each channel over the spatial map.
std::vector<float> global_average_pool(const FeatureMap& map);

// One row per batch entry, in batch order, each the pooled activation of `layer`.
EmbeddingMatrix extract_features(std::span<const PreprocessedImage> batch, FeatureLayer layer,
                                 InferenceBackend& backend,
                                 std::span<const ImageId> row_ids = {});

// Returns the same vector for every image and layer (resized to the layer dim).
class ConstantBackend final : public InferenceBackend {
 public:
  ConstantBackend(std::vector<float> value, LayerDims dims = {});

  bool supports(LayerKind) const override { return true; }
  FeatureMap infer(const PreprocessedImage& image, LayerKind layer) override;

 private:
  std::vector<float> value_;
  LayerDims dims_;
};

// Deterministic offline stand-in for a real network: each layer is a seeded
// random projection of block-averaged pixels on a layer-specific spatial grid,
// squashed with tanh. Preserves coarse image similarity, which is all the
// tests and simulations need.
class ProjectionBackend final : public InferenceBackend {
 public:
  explicit ProjectionBackend(std::uint64_t seed, LayerDims dims = {});

  bool supports(LayerKind) const override { return true; }
  FeatureMap infer(const PreprocessedImage& image, LayerKind layer) override;

 private:
  struct LayerWeights {
    int grid = 1;
    int dim = 0;
    std::vector<float> weights;  // dim x kCellInputs
    std::vector<float> bias;
  };
  static constexpr int kSubBlocks = 4;
  static constexpr int kCellInputs = kSubBlocks * kSubBlocks * 3;

  const LayerWeights& weights_for(LayerKind layer) const;

  LayerWeights layers_[4];
};

}  // namespace styleval
