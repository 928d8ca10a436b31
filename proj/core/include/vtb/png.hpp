#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "vtb/chart.hpp"

namespace vtb {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit RGB, no alpha, non-interlaced, filter 0 on every row, zlib level 9.
// Output bytes depend only on the pixels (for a fixed zlib build).
std::vector<std::uint8_t> encode_png(const RasterImage& img);

// Decodes 8-bit RGB non-interlaced PNGs with any standard row filter.
RasterImage decode_png(std::span<const std::uint8_t> bytes);

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace vtb
