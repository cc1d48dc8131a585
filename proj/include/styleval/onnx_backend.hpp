#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "styleval/embeddings.hpp"

namespace styleval {

// Output tensor names for the four taps of a stock Inception-V3 ONNX export.
std::map<LayerKind, std::string> default_inception_outputs();

// Runs an ONNX network through OpenCV's DNN module. Each supported layer maps
// to a named output tensor of shape [1, C, H, W] or [1, C]; the input is fed
// as a [1, 3, 299, 299] NCHW blob.
class OnnxBackend final : public InferenceBackend {
 public:
  OnnxBackend(const std::filesystem::path& model, std::map<LayerKind, std::string> outputs);
  ~OnnxBackend() override;

  bool supports(LayerKind layer) const override;
  FeatureMap infer(const PreprocessedImage& image, LayerKind layer) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Decodes PNG/JPEG/etc. into 8-bit RGB. Throws InvalidImage on failure.
RgbImage load_rgb_image(const std::filesystem::path& path);

}  // namespace styleval
