#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "thermoloss/core_types.hpp"

namespace thermoloss {

enum class PgmFormat { kAscii /* P2 */, kBinary /* P5 */ };

// Thermal images are 16-bit PGM (maxval 65535); pixel p maps to p / 65535.
// Segmentation masks are PGM with maxval 255 holding labels 0..17.
// Both P2 and P5 are accepted; binary samples are big-endian.
ThermalImage decode_thermal_pgm(std::string_view bytes);
std::string encode_thermal_pgm(const ThermalImage& img, PgmFormat format);

SegmentationMask decode_mask_pgm(std::string_view bytes);
std::string encode_mask_pgm(const SegmentationMask& mask, PgmFormat format);

ThermalImage load_thermal_pgm(const std::filesystem::path& path);
void save_thermal_pgm(const ThermalImage& img, const std::filesystem::path& path,
                      PgmFormat format = PgmFormat::kBinary);

SegmentationMask load_mask_pgm(const std::filesystem::path& path);
void save_mask_pgm(const SegmentationMask& mask, const std::filesystem::path& path,
                   PgmFormat format = PgmFormat::kBinary);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace thermoloss
