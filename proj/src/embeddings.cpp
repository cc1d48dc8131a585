#include "styleval/embeddings.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "styleval/errors.hpp"
#include "styleval/rng.hpp"

namespace styleval {

PreprocessedImage preprocess_image(const RgbImage& image) {
  if (image.width < 1 || image.height < 1) {
    throw Error(ErrorCode::kInvalidImage,
                fmt::format("image has zero dimension ({}x{})", image.width, image.height));
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorCode::kInvalidImage, "pixel buffer does not match width x height x 3");
  }

  constexpr int kOut = kNetworkInputSize;
  const double sx = static_cast<double>(image.width) / kOut;
  const double sy = static_cast<double>(image.height) / kOut;

  struct Tap {
    int lo, hi;
    double frac;
  };
  auto taps = [](int out_size, int in_size, double scale) {
    std::vector<Tap> t(out_size);
    for (int o = 0; o < out_size; ++o) {
      double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in_size - 1));
      int lo = static_cast<int>(std::floor(src));
      t[o] = {lo, std::min(lo + 1, in_size - 1), src - lo};
    }
    return t;
  };
  const auto xt = taps(kOut, image.width, sx);
  const auto yt = taps(kOut, image.height, sy);

  auto px = [&](int y, int x, int c) {
    return static_cast<double>(image.pixels[(static_cast<std::size_t>(y) * image.width + x) * 3 + c]);
  };

  PreprocessedImage out;
  out.values.resize(static_cast<std::size_t>(kOut) * kOut * 3);
  for (int y = 0; y < kOut; ++y) {
    const Tap& ty = yt[y];
    for (int x = 0; x < kOut; ++x) {
      const Tap& tx = xt[x];
      for (int c = 0; c < 3; ++c) {
        double top = px(ty.lo, tx.lo, c) * (1.0 - tx.frac) + px(ty.lo, tx.hi, c) * tx.frac;
        double bot = px(ty.hi, tx.lo, c) * (1.0 - tx.frac) + px(ty.hi, tx.hi, c) * tx.frac;
        double v = std::clamp(top * (1.0 - ty.frac) + bot * ty.frac, 0.0, 255.0);
        out.values[(static_cast<std::size_t>(y) * kOut + x) * 3 + c] =
            static_cast<float>(v / 127.5 - 1.0);
      }
    }
  }
  return out;
}

std::vector<float> global_average_pool(const FeatureMap& map) {
  const std::size_t cells = static_cast<std::size_t>(map.height) * map.width;
  if (cells == 0 || map.values.size() != cells * map.channels) {
    throw Error(ErrorCode::kDimension, "feature map shape does not match its payload");
  }
  std::vector<double> acc(map.channels, 0.0);
  for (std::size_t i = 0; i < cells; ++i) {
    for (int c = 0; c < map.channels; ++c) acc[c] += map.values[i * map.channels + c];
  }
  std::vector<float> pooled(map.channels);
  for (int c = 0; c < map.channels; ++c) pooled[c] = static_cast<float>(acc[c] / cells);
  return pooled;
}

EmbeddingMatrix extract_features(std::span<const PreprocessedImage> batch, FeatureLayer layer,
                                 InferenceBackend& backend, std::span<const ImageId> row_ids) {
  if (!backend.supports(layer.kind)) {
    throw Error(ErrorCode::kBackendCapability,
                fmt::format("backend cannot emit layer {}", to_string(layer.kind)));
  }
  if (!row_ids.empty() && row_ids.size() != batch.size()) {
    throw Error(ErrorCode::kDimension, "row_ids length differs from batch length");
  }
  EmbeddingMatrix m = EmbeddingMatrix::zeros(static_cast<int>(batch.size()), layer);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::vector<float> pooled = global_average_pool(backend.infer(batch[i], layer.kind));
    if (static_cast<int>(pooled.size()) != layer.dim) {
      throw Error(ErrorCode::kDimension,
                  fmt::format("backend emitted {} channels for {}, expected {}", pooled.size(),
                              to_string(layer.kind), layer.dim));
    }
    for (float v : pooled) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNumerical, fmt::format("non-finite feature for batch item {}", i));
      }
    }
    std::copy(pooled.begin(), pooled.end(), m.row(static_cast<int>(i)).begin());
    if (!row_ids.empty()) m.row_ids[i] = row_ids[i];
  }
  return m;
}

ConstantBackend::ConstantBackend(std::vector<float> value, LayerDims dims)
    : value_(std::move(value)), dims_(dims) {}

FeatureMap ConstantBackend::infer(const PreprocessedImage&, LayerKind layer) {
  const int dim = dims_.dim(layer);
  FeatureMap map{1, 1, dim, std::vector<float>(dim, 0.0f)};
  for (int c = 0; c < dim && !value_.empty(); ++c) {
    map.values[c] = value_[static_cast<std::size_t>(c) % value_.size()];
  }
  return map;
}

ProjectionBackend::ProjectionBackend(std::uint64_t seed, LayerDims dims) {
  dims.validate();
  constexpr int kGrids[] = {8, 4, 2, 1};
  for (int l = 0; l < 4; ++l) {
    LayerWeights& w = layers_[l];
    w.grid = kGrids[l];
    w.dim = dims.dim(kAllLayers[l]);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(l)));
    const double scale = 1.0 / std::sqrt(static_cast<double>(kCellInputs));
    w.weights.resize(static_cast<std::size_t>(w.dim) * kCellInputs);
    for (float& v : w.weights) v = static_cast<float>(rng.normal() * scale);
    w.bias.resize(w.dim);
    for (float& v : w.bias) v = static_cast<float>(rng.normal() * 0.1);
  }
}

const ProjectionBackend::LayerWeights& ProjectionBackend::weights_for(LayerKind layer) const {
  return layers_[static_cast<int>(layer)];
}

FeatureMap ProjectionBackend::infer(const PreprocessedImage& image, LayerKind layer) {
  const LayerWeights& w = weights_for(layer);
  const int fine = w.grid * kSubBlocks;
  constexpr int kSize = PreprocessedImage::kWidth;

  // Block means on a fine grid; each output cell then reads its 4x4 sub-blocks.
  std::vector<double> sums(static_cast<std::size_t>(fine) * fine * 3, 0.0);
  std::vector<int> counts(static_cast<std::size_t>(fine) * fine, 0);
  for (int y = 0; y < kSize; ++y) {
    const int by = y * fine / kSize;
    for (int x = 0; x < kSize; ++x) {
      const int bx = x * fine / kSize;
      const std::size_t b = static_cast<std::size_t>(by) * fine + bx;
      ++counts[b];
      for (int c = 0; c < 3; ++c) sums[b * 3 + c] += image.at(y, x, c);
    }
  }

  FeatureMap map{w.grid, w.grid, w.dim,
                 std::vector<float>(static_cast<std::size_t>(w.grid) * w.grid * w.dim)};
  std::vector<double> cell(kCellInputs);
  for (int gy = 0; gy < w.grid; ++gy) {
    for (int gx = 0; gx < w.grid; ++gx) {
      int k = 0;
      for (int sy = 0; sy < kSubBlocks; ++sy) {
        for (int sx = 0; sx < kSubBlocks; ++sx) {
          const std::size_t b =
              static_cast<std::size_t>(gy * kSubBlocks + sy) * fine + (gx * kSubBlocks + sx);
          for (int c = 0; c < 3; ++c) cell[k++] = sums[b * 3 + c] / std::max(counts[b], 1);
        }
      }
      float* outp = &map.values[(static_cast<std::size_t>(gy) * w.grid + gx) * w.dim];
      for (int o = 0; o < w.dim; ++o) {
        double acc = w.bias[o];
        const float* row = &w.weights[static_cast<std::size_t>(o) * kCellInputs];
        for (int i = 0; i < kCellInputs; ++i) acc += row[i] * cell[i];
        outp[o] = static_cast<float>(std::tanh(acc));
      }
    }
  }
  return map;
}

}  // namespace styleval
