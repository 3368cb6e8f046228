#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace sdgan {

/// Interleaved 8-bit RGB raster, row-major.
struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // width * height * 3
};

/// (3, H, W) float in [-1, 1] -> 8-bit RGB; values are clamped then rounded.
Rgb8 to_rgb8(const torch::Tensor& chw);
/// 8-bit RGB -> (3, H, W) float in [-1, 1] via v / 127.5 - 1.
torch::Tensor from_rgb8(const Rgb8& img);

/// Hex SHA-256 of the raw RGB buffer.
std::string content_hash(const Rgb8& img);

std::vector<std::uint8_t> encode_png(const Rgb8& img);
std::optional<Rgb8> decode_image(const std::vector<std::uint8_t>& bytes);
/// Returns nullopt when the file cannot be read or decoded.
std::optional<Rgb8> read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Rgb8& img);

/// Area-averaging resize to size x size.
Rgb8 resize_square(const Rgb8& img, int size);

/// Lays out a (rows, cols, 3, H, W) tensor as one edge-to-edge image.
Rgb8 tile(const torch::Tensor& grid);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace sdgan
