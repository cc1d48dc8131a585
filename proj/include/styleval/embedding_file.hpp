#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "styleval/core_types.hpp"

namespace styleval {

// Binary layout, all integers little-endian:
//   "EMB1" | u32 version (=1) | u32 n | u32 d | n*d float32 row-major
// plus a JSON sidecar "<file>.manifest.json" carrying the layer tag and the
// ImageId of every row.
inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

std::vector<std::uint8_t> encode_embedding_payload(const EmbeddingMatrix& m);
nlohmann::json encode_embedding_manifest(const EmbeddingMatrix& m);

// Throws FormatError with a distinct kind per defect.
EmbeddingMatrix decode_embedding(std::span<const std::uint8_t> payload,
                                 const nlohmann::json& manifest);

std::filesystem::path manifest_path_for(const std::filesystem::path& path);

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

}  // namespace styleval
