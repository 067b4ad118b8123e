#pragma once

// IDX container (MNIST family): big-endian magic, big-endian u32 dimensions,
// raw unsigned-byte payload.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "feddtg/nn/tensor.hpp"

namespace feddtg::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
    std::size_t rows = 0;
    std::size_t cols = 0;
    nn::Tensor pixels;  // (count, rows * cols), values v / 127.5 - 1

    std::size_t count() const noexcept { return pixels.rows(); }
};

/// Maps a pixel byte to [-1, 1]; 0 -> -1 and 255 -> 1 exactly.
inline double pixel_to_unit(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }
std::uint8_t unit_to_pixel(double x);

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_idx_images(const IdxImages& images);
std::vector<std::uint8_t> serialize_idx_labels(std::span<const int> labels);

/// True when bytes start with the gzip magic 1f 8b.
bool is_gzip(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);

/// Reads a whole file, transparently inflating gzip content.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace feddtg::data
