#include "styleval/onnx_backend.hpp"

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "styleval/errors.hpp"

namespace styleval {

std::map<LayerKind, std::string> default_inception_outputs() {
  return {{LayerKind::kPool1, "pool1"},
          {LayerKind::kPool2, "pool2"},
          {LayerKind::kPreAux, "pre_aux"},
          {LayerKind::kPool3, "pool3"}};
}

struct OnnxBackend::Impl {
  cv::dnn::Net net;
  std::map<LayerKind, std::string> outputs;
};

OnnxBackend::OnnxBackend(const std::filesystem::path& model,
                         std::map<LayerKind, std::string> outputs)
    : impl_(std::make_unique<Impl>()) {
  try {
    impl_->net = cv::dnn::readNetFromONNX(model.string());
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kIo, fmt::format("cannot load model {}: {}", model.string(), e.what()));
  }
  if (impl_->net.empty()) {
    throw Error(ErrorCode::kIo, fmt::format("model {} is empty", model.string()));
  }
  impl_->net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  impl_->net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
  impl_->outputs = std::move(outputs);
}

OnnxBackend::~OnnxBackend() = default;

bool OnnxBackend::supports(LayerKind layer) const { return impl_->outputs.contains(layer); }

FeatureMap OnnxBackend::infer(const PreprocessedImage& image, LayerKind layer) {
  auto it = impl_->outputs.find(layer);
  if (it == impl_->outputs.end()) {
    throw Error(ErrorCode::kBackendCapability,
                fmt::format("model has no output mapped to {}", to_string(layer)));
  }
  constexpr int kSize = PreprocessedImage::kWidth;
  const int shape[] = {1, 3, kSize, kSize};
  cv::Mat blob(4, shape, CV_32F);
  auto* dst = blob.ptr<float>();
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < kSize; ++y) {
      for (int x = 0; x < kSize; ++x) {
        dst[(static_cast<std::size_t>(c) * kSize + y) * kSize + x] = image.at(y, x, c);
      }
    }
  }

  cv::Mat out;
  try {
    impl_->net.setInput(blob);
    out = impl_->net.forward(it->second);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kNumerical, fmt::format("inference failed: {}", e.what()));
  }

  FeatureMap map;
  if (out.dims == 4) {
    map.channels = out.size[1];
    map.height = out.size[2];
    map.width = out.size[3];
  } else if (out.dims == 2) {
    map.channels = out.size[1];
  } else {
    throw Error(ErrorCode::kDimension, fmt::format("unexpected output rank {}", out.dims));
  }
  // NCHW -> HWC
  const std::size_t plane = static_cast<std::size_t>(map.height) * map.width;
  const float* src = out.ptr<float>();
  map.values.resize(plane * map.channels);
  for (int c = 0; c < map.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) map.values[p * map.channels + c] = src[c * plane + p];
  }
  return map;
}

RgbImage load_rgb_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw Error(ErrorCode::kInvalidImage, fmt::format("cannot decode {}", path.string()));
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage img{rgb.cols, rgb.rows, {}};
  img.pixels.resize(static_cast<std::size_t>(rgb.cols) * rgb.rows * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + rgb.cols * 3, img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
  }
  return img;
}

}  // namespace styleval
