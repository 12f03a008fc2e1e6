#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pecas/model.hpp"

namespace pecas {

// Weights file layout, little-endian, no padding:
//
//   "PECAS001"                      8 bytes
//   u16 name length, name bytes     UTF-8 model name ("pedestrian" | "eye")
//   u16 record count                one record per parameter tensor
//   record:
//     u8  layer kind                LayerKind value of the owning layer
//     u8  rank
//     u32 dims[rank]
//     f64 values[product(dims)]     row-major
inline constexpr std::string_view kWeightsMagic = "PECAS001";

std::vector<std::uint8_t> encode_model(const ModelWeights& weights);

/// Throws FormatError naming the offending field. Never returns a partial model.
ModelWeights decode_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelWeights& weights, const std::filesystem::path& path);

/// With `expected` set, a file holding the other architecture raises
/// SpecMismatchError.
ModelWeights load_model(const std::filesystem::path& path, std::optional<std::string_view> expected = std::nullopt);

}  // namespace pecas
