#include "styleval/core_types.hpp"

#include <charconv>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "styleval/errors.hpp"

namespace styleval {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidImage: return "InvalidImage";
    case ErrorCode::kBackendCapability: return "BackendCapabilityError";
    case ErrorCode::kNumerical: return "NumericalError";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kInvalidCovariance: return "InvalidCovariance";
    case ErrorCode::kDimension: return "DimensionError";
    case ErrorCode::kLayerMismatch: return "LayerMismatch";
    case ErrorCode::kConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorCode::kNoCalibrationData: return "NoCalibrationData";
    case ErrorCode::kNoData: return "NoData";
    case ErrorCode::kDegenerateVariance: return "DegenerateVariance";
    case ErrorCode::kStyleMismatch: return "StyleMismatch";
    case ErrorCode::kBootstrapUnstable: return "BootstrapUnstable";
    case ErrorCode::kManifestIncomplete: return "ManifestIncomplete";
    case ErrorCode::kCampaignFull: return "CampaignFull";
    case ErrorCode::kAlreadyEnrolled: return "AlreadyEnrolled";
    case ErrorCode::kOutOfOrder: return "OutOfOrder";
    case ErrorCode::kSessionClosed: return "SessionClosed";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

std::string_view to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "BadMagic";
    case FormatErrorKind::kVersionMismatch: return "VersionMismatch";
    case FormatErrorKind::kTruncated: return "Truncated";
    case FormatErrorKind::kTrailingData: return "TrailingData";
    case FormatErrorKind::kDimMismatch: return "DimMismatch";
    case FormatErrorKind::kBadManifest: return "BadManifest";
  }
  return "Unknown";
}

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::kParse, fmt::format("bad integer '{}' in {}", s, what));
  }
  return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

StyleId make_style(int index) { return StyleId{index, fmt::format("style_{:02d}", index)}; }

std::string_view to_string(ImageKind kind) {
  switch (kind) {
    case ImageKind::kReal: return "real";
    case ImageKind::kInput: return "input";
    case ImageKind::kGenerated: return "generated";
  }
  return "unknown";
}

ImageKind image_kind_from_string(std::string_view s) {
  if (s == "real") return ImageKind::kReal;
  if (s == "input") return ImageKind::kInput;
  if (s == "generated") return ImageKind::kGenerated;
  throw Error(ErrorCode::kParse, fmt::format("unknown image kind '{}'", s));
}

ImageId ImageId::real(int index) { return ImageId{index, ImageKind::kReal, std::nullopt, std::nullopt}; }

ImageId ImageId::input(int index) { return ImageId{index, ImageKind::kInput, std::nullopt, std::nullopt}; }

ImageId ImageId::generated(int index, int input_index, StyleId style) {
  return ImageId{index, ImageKind::kGenerated, input_index, std::move(style)};
}

std::string ImageId::to_string() const {
  switch (kind) {
    case ImageKind::kReal: return fmt::format("real:{}", index);
    case ImageKind::kInput: return fmt::format("input:{}", index);
    case ImageKind::kGenerated:
      return fmt::format("gen:{}:{}:{}", index, input_index.value_or(-1),
                         style ? style->index : -1);
  }
  return {};
}

ImageId ImageId::parse(std::string_view token) {
  auto parts = split(token, ':');
  if (parts.size() == 2 && parts[0] == "real") return real(parse_int(parts[1], token));
  if (parts.size() == 2 && parts[0] == "input") return input(parse_int(parts[1], token));
  if (parts.size() == 4 && parts[0] == "gen") {
    return generated(parse_int(parts[1], token), parse_int(parts[2], token),
                     make_style(parse_int(parts[3], token)));
  }
  throw Error(ErrorCode::kParse, fmt::format("malformed image id '{}'", token));
}

void validate(const ImageId& id) {
  const bool has_both = id.input_index.has_value() && id.style.has_value();
  const bool has_none = !id.input_index.has_value() && !id.style.has_value();
  if (id.is_generated() ? !has_both : !has_none) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("image {}: generated images need input_index and style, others neither",
                            id.to_string()));
  }
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kPool1: return "pool1";
    case LayerKind::kPool2: return "pool2";
    case LayerKind::kPreAux: return "pre_aux";
    case LayerKind::kPool3: return "pool3";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "pool1") return LayerKind::kPool1;
  if (s == "pool2") return LayerKind::kPool2;
  if (s == "pre_aux" || s == "pre-aux") return LayerKind::kPreAux;
  if (s == "pool3") return LayerKind::kPool3;
  throw Error(ErrorCode::kParse, fmt::format("unknown layer '{}'", s));
}

int LayerDims::dim(LayerKind kind) const {
  switch (kind) {
    case LayerKind::kPool1: return pool1;
    case LayerKind::kPool2: return pool2;
    case LayerKind::kPreAux: return pre_aux;
    case LayerKind::kPool3: return pool3;
  }
  return 0;
}

void LayerDims::validate() const {
  if (!(0 < pool1 && pool1 < pool2 && pool2 < pre_aux && pre_aux < pool3)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("layer dims must strictly increase, got {}/{}/{}/{}", pool1, pool2,
                            pre_aux, pool3));
  }
}

FeatureLayer FeatureLayer::make(LayerKind kind, const LayerDims& dims) {
  return FeatureLayer{kind, dims.dim(kind)};
}

EmbeddingMatrix EmbeddingMatrix::zeros(int rows, FeatureLayer layer) {
  EmbeddingMatrix m;
  m.rows = rows;
  m.cols = layer.dim;
  m.layer = layer;
  m.data.assign(static_cast<std::size_t>(rows) * layer.dim, 0.0f);
  m.row_ids.resize(rows);
  return m;
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const int> indices) const {
  EmbeddingMatrix out;
  out.rows = static_cast<int>(indices.size());
  out.cols = cols;
  out.layer = layer;
  out.data.reserve(indices.size() * cols);
  out.row_ids.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= rows) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("row {} out of range [0, {})", i, rows));
    }
    auto r = row(i);
    out.data.insert(out.data.end(), r.begin(), r.end());
    out.row_ids.push_back(row_ids[i]);
  }
  return out;
}

void validate(const EmbeddingMatrix& m) {
  if (m.cols != m.layer.dim) {
    throw Error(ErrorCode::kDimension,
                fmt::format("matrix has {} columns but layer {} has dim {}", m.cols,
                            to_string(m.layer.kind), m.layer.dim));
  }
  if (m.rows < 0 || m.data.size() != static_cast<std::size_t>(m.rows) * m.cols) {
    throw Error(ErrorCode::kDimension, "matrix payload does not match rows x cols");
  }
  if (m.row_ids.size() != static_cast<std::size_t>(m.rows)) {
    throw Error(ErrorCode::kDimension, "row_ids length differs from row count");
  }
  for (float v : m.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNumerical, "embedding contains non-finite value");
  }
}

std::string_view to_string(Phase phase) {
  return phase == Phase::kCalibration ? "calibration" : "measurement";
}

Phase phase_from_string(std::string_view s) {
  if (s == "calibration") return Phase::kCalibration;
  if (s == "measurement") return Phase::kMeasurement;
  throw Error(ErrorCode::kParse, fmt::format("unknown phase '{}'", s));
}

std::string UtcMillis::to_iso8601() const {
  using namespace std::chrono;
  const sys_time<milliseconds> tp{milliseconds{value}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hms.hours().count(), hms.minutes().count(), hms.seconds().count(),
                     hms.subseconds().count());
}

UtcMillis UtcMillis::parse_iso8601(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.mmm]Z
  auto fail = [&] { return Error(ErrorCode::kParse, fmt::format("bad timestamp '{}'", s)); };
  if (s.size() < 20 || s.back() != 'Z' || s[4] != '-' || s[7] != '-' || s[10] != 'T' ||
      s[13] != ':' || s[16] != ':') {
    throw fail();
  }
  auto num = [&](std::size_t pos, std::size_t len) { return parse_int(s.substr(pos, len), s); };
  int ms = 0;
  if (s.size() == 24 && s[19] == '.') {
    ms = num(20, 3);
  } else if (s.size() != 20) {
    throw fail();
  }
  using namespace std::chrono;
  const year_month_day ymd{year{num(0, 4)}, month{static_cast<unsigned>(num(5, 2))},
                           day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok() || num(11, 2) > 23 || num(14, 2) > 59 || num(17, 2) > 59) throw fail();
  const auto tp = sys_days{ymd} + hours{num(11, 2)} + minutes{num(14, 2)} + seconds{num(17, 2)} +
                  milliseconds{ms};
  return UtcMillis{duration_cast<milliseconds>(tp.time_since_epoch()).count()};
}

UtcMillis UtcMillis::now() {
  using namespace std::chrono;
  return UtcMillis{
      duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count()};
}

void validate(const LabelRecord& label) {
  if (label.judged_real != 0 && label.judged_real != 1) {
    throw Error(ErrorCode::kInvalidArgument, "judged_real must be 0 or 1");
  }
  if (label.elapsed_ms < 0) throw Error(ErrorCode::kInvalidArgument, "elapsed_ms must be >= 0");
  validate(label.image);
}

// ---- JSON ----

void to_json(nlohmann::json& j, const StyleId& s) { j = {{"index", s.index}, {"label", s.label}}; }

void from_json(const nlohmann::json& j, StyleId& s) {
  s.index = j.at("index").get<int>();
  s.label = j.value("label", make_style(s.index).label);
}

void to_json(nlohmann::json& j, const ImageId& id) {
  j = {{"index", id.index}, {"kind", to_string(id.kind)}};
  if (id.input_index) j["input_index"] = *id.input_index;
  if (id.style) j["style"] = *id.style;
}

void from_json(const nlohmann::json& j, ImageId& id) {
  id.index = j.at("index").get<int>();
  id.kind = image_kind_from_string(j.at("kind").get<std::string>());
  id.input_index.reset();
  id.style.reset();
  if (j.contains("input_index")) id.input_index = j["input_index"].get<int>();
  if (j.contains("style")) id.style = j["style"].get<StyleId>();
  validate(id);
}

void to_json(nlohmann::json& j, const LayerDims& d) {
  j = {{"pool1", d.pool1}, {"pool2", d.pool2}, {"pre_aux", d.pre_aux}, {"pool3", d.pool3}};
}

void from_json(const nlohmann::json& j, LayerDims& d) {
  const LayerDims defaults;
  d.pool1 = j.value("pool1", defaults.pool1);
  d.pool2 = j.value("pool2", defaults.pool2);
  d.pre_aux = j.value("pre_aux", defaults.pre_aux);
  d.pool3 = j.value("pool3", defaults.pool3);
}

void to_json(nlohmann::json& j, const FeatureLayer& l) {
  j = {{"kind", to_string(l.kind)}, {"dim", l.dim}};
}

void from_json(const nlohmann::json& j, FeatureLayer& l) {
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  l.dim = j.at("dim").get<int>();
}

void to_json(nlohmann::json& j, const EmbeddingMatrix& m) {
  j = {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}, {"row_ids", m.row_ids},
       {"layer", m.layer}};
}

void from_json(const nlohmann::json& j, EmbeddingMatrix& m) {
  m.rows = j.at("rows").get<int>();
  m.cols = j.at("cols").get<int>();
  m.data = j.at("data").get<std::vector<float>>();
  m.row_ids = j.at("row_ids").get<std::vector<ImageId>>();
  m.layer = j.at("layer").get<FeatureLayer>();
  validate(m);
}

void to_json(nlohmann::json& j, const LabelRecord& r) {
  j = {{"evaluator_id", r.evaluator_id}, {"image", r.image},
       {"judged_real", r.judged_real},   {"phase", to_string(r.phase)},
       {"elapsed_ms", r.elapsed_ms},     {"timestamp", r.timestamp.to_iso8601()}};
}

void from_json(const nlohmann::json& j, LabelRecord& r) {
  r.evaluator_id = j.at("evaluator_id").get<std::string>();
  r.image = j.at("image").get<ImageId>();
  r.judged_real = j.at("judged_real").get<int>();
  r.phase = phase_from_string(j.at("phase").get<std::string>());
  r.elapsed_ms = j.at("elapsed_ms").get<std::int64_t>();
  r.timestamp = UtcMillis::parse_iso8601(j.at("timestamp").get<std::string>());
  validate(r);
}

}  // namespace styleval
