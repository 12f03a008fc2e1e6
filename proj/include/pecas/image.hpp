#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pecas/geometry.hpp"
#include "pecas/tensor.hpp"

namespace pecas {

// Grayscale images are Tensor[1,H,W] with values in [0,1].

/// Decodes binary PGM (P5), binary PPM (P6) or a non-interlaced 8-bit
/// grayscale/RGB PNG. Colour is reduced with luma weights 0.299/0.587/0.114
/// and samples are divided by the format's maximum value.
Tensor decode_image(std::span<const std::uint8_t> bytes);
Tensor read_image(const std::filesystem::path& path);

/// 8-bit P5 with maxval 255; values are clamped to [0,1] and rounded.
std::vector<std::uint8_t> encode_pgm(const Tensor& image);
void write_pgm(const Tensor& image, const std::filesystem::path& path);

/// Bilinear resampling of `region` onto an out_h x out_w grid. Sample
/// corners are aligned: output (0,0) reads region (x,y) and output
/// (out_h-1,out_w-1) reads (x+w-1, y+h-1). The region must lie inside the image.
Tensor resample_region(const Tensor& image, const BBox& region, std::size_t out_h, std::size_t out_w);

/// Corner-aligned bilinear resize of the whole image.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Integer crop (no interpolation).
Tensor crop(const Tensor& image, std::size_t x, std::size_t y, std::size_t w, std::size_t h);

}  // namespace pecas
