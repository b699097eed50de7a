#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace lssat {

// 8-bit raster as stored in a PGM (1 channel) or PPM (3 channels) file,
// interleaved row-major.
struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  bool operator==(const Raster&) const = default;
};

// Reads P2/P3/P5/P6 with maxval <= 255. Throws DataError on anything else.
Raster read_netpbm(const std::filesystem::path& path);
// Writes binary P5 (1 channel) or P6 (3 channels).
void write_netpbm(const Raster& raster, const std::filesystem::path& path);

}  // namespace lssat
