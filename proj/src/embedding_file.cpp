#include "styleval/embedding_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "styleval/errors.hpp"

namespace styleval {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, fmt::format("short write to {}", path.string()));
}

ImageId row_descriptor_to_id(const nlohmann::json& d) {
  const auto kind = image_kind_from_string(d.at("kind").get<std::string>());
  const int index = ImageId::parse(d.at("image_id").get<std::string>()).index;
  if (kind != ImageKind::kGenerated) {
    return kind == ImageKind::kReal ? ImageId::real(index) : ImageId::input(index);
  }
  StyleId style = make_style(d.at("style").get<int>());
  if (d.contains("style_label")) style.label = d["style_label"].get<std::string>();
  return ImageId::generated(index, d.at("input_index").get<int>(), std::move(style));
}

}  // namespace

std::vector<std::uint8_t> encode_embedding_payload(const EmbeddingMatrix& m) {
  validate(m);
  std::vector<std::uint8_t> out;
  out.reserve(kEmbeddingHeaderBytes + m.data.size() * 4);
  out.insert(out.end(), std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
  put_u32(out, kEmbeddingVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  for (float v : m.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

nlohmann::json encode_embedding_manifest(const EmbeddingMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows; ++r) {
    const ImageId& id = m.row_ids[r];
    nlohmann::json d = {{"row", r}, {"image_id", id.to_string()}, {"kind", to_string(id.kind)}};
    if (id.input_index) d["input_index"] = *id.input_index;
    if (id.style) {
      d["style"] = id.style->index;
      d["style_label"] = id.style->label;
    }
    rows.push_back(std::move(d));
  }
  return {{"layer", to_string(m.layer.kind)}, {"layer_dim", m.layer.dim}, {"rows", std::move(rows)}};
}

EmbeddingMatrix decode_embedding(std::span<const std::uint8_t> payload,
                                 const nlohmann::json& manifest) {
  if (payload.size() < 4 || std::memcmp(payload.data(), kEmbeddingMagic, 4) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic, "payload does not start with EMB1");
  }
  if (payload.size() < kEmbeddingHeaderBytes) {
    throw FormatError(FormatErrorKind::kTruncated,
                      fmt::format("header needs {} bytes, have {}", kEmbeddingHeaderBytes,
                                  payload.size()));
  }
  const std::uint32_t version = get_u32(payload, 4);
  if (version != kEmbeddingVersion) {
    throw FormatError(FormatErrorKind::kVersionMismatch,
                      fmt::format("version {} (expected {})", version, kEmbeddingVersion));
  }
  const std::uint64_t n = get_u32(payload, 8);
  const std::uint64_t d = get_u32(payload, 12);
  const std::uint64_t expected = kEmbeddingHeaderBytes + n * d * 4;
  if (payload.size() < expected) {
    throw FormatError(FormatErrorKind::kTruncated,
                      fmt::format("{}x{} needs {} bytes, have {}", n, d, expected, payload.size()));
  }
  if (payload.size() > expected) {
    throw FormatError(FormatErrorKind::kTrailingData,
                      fmt::format("{} bytes past the {}x{} payload", payload.size() - expected, n, d));
  }

  EmbeddingMatrix m;
  try {
    const LayerKind kind = layer_kind_from_string(manifest.at("layer").get<std::string>());
    m.layer = manifest.contains("layer_dim")
                  ? FeatureLayer{kind, manifest["layer_dim"].get<int>()}
                  : FeatureLayer::make(kind);
    const auto& rows = manifest.at("rows");
    if (rows.size() != n) {
      throw FormatError(FormatErrorKind::kBadManifest,
                        fmt::format("manifest lists {} rows, payload has {}", rows.size(), n));
    }
    m.row_ids.reserve(n);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].at("row").get<std::size_t>() != r) {
        throw FormatError(FormatErrorKind::kBadManifest, fmt::format("row {} out of order", r));
      }
      m.row_ids.push_back(row_descriptor_to_id(rows[r]));
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorKind::kBadManifest, e.what());
  }
  if (d != static_cast<std::uint64_t>(m.layer.dim)) {
    throw FormatError(FormatErrorKind::kDimMismatch,
                      fmt::format("payload d={} but layer {} has dim {}", d,
                                  to_string(m.layer.kind), m.layer.dim));
  }

  m.rows = static_cast<int>(n);
  m.cols = static_cast<int>(d);
  m.data.resize(n * d);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = std::bit_cast<float>(get_u32(payload, kEmbeddingHeaderBytes + 4 * i));
  }
  return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".manifest.json");
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  const auto payload = encode_embedding_payload(m);
  write_file(path, {reinterpret_cast<const char*>(payload.data()), payload.size()});
  const std::string manifest = encode_embedding_manifest(m).dump(1) + "\n";
  write_file(manifest_path_for(path), manifest);
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  const auto payload = read_file(path);
  const auto manifest_bytes = read_file(manifest_path_for(path));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::kBadManifest, e.what());
  }
  return decode_embedding(payload, manifest);
}

}  // namespace styleval
