#pragma once

#include <filesystem>

#include "unmix/hsi.hpp"

namespace unmix {

// Bundle directory layout:
//   header.json         name, height, width, bands, dtype:"f32le",
//                       interleave:"bsq", optional wavelengths
//   cube.raw            H*W*L float32 little-endian, band-sequential
//   gt_endmembers.csv   optional, p rows x L comma-separated decimals
//   gt_abundances.raw   optional, H*W*p float32 LE, pixel-major then endmember
DatasetBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

// Raw float32 little-endian block helpers (shared with checkpoints and the CLI).
void write_f32le(const std::filesystem::path& file, const double* values, std::size_t count);
std::vector<double> read_f32le(const std::filesystem::path& file, std::size_t expected_count);

}  // namespace unmix
