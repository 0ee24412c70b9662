#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "detailpp/latent.hpp"
#include "detailpp/mask.hpp"
#include "detailpp/numerics.hpp"
#include "detailpp/pdi.hpp"

namespace detailpp::io {

// Latent dump: "DPP1", then H, W, C as little-endian uint32, then H*W*C
// little-endian float32 values, row-major and channel-last.
std::vector<std::uint8_t> encode_latent(const LatentGrid& grid);
// Throws IoError on bad magic or truncated payload.
LatentGrid decode_latent(const std::vector<std::uint8_t>& bytes);

void write_latent(const std::filesystem::path& path, const LatentGrid& grid);
LatentGrid read_latent(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255) with linear min-max scaling; a flat input maps
// to 0.
std::vector<std::uint8_t> encode_pgm(std::size_t height, std::size_t width,
                                     std::span<const double> values);
// Masks map to exactly 0 and 255.
std::vector<std::uint8_t> encode_mask_pgm(const BinaryMask& mask);

// Binary PPM (P6); each channel clamped to [0, 1] and scaled to 0..255.
std::vector<std::uint8_t> encode_ppm(const LatentGrid& rgb);
// Reads P6 with maxval 255 into [0, 1]. Throws IoError.
LatentGrid decode_ppm(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

// Everything needed to reproduce a `generate` run.
struct RunManifest {
  std::string prompt;
  std::uint64_t seed = 0;
  std::uint64_t model_seed = 0;
  ModelDims dims;
  PDIConfig config;
  bool trace = false;
  std::string version;

  std::string to_json() const;
  // Throws ConfigError on missing or ill-typed fields.
  static RunManifest from_json(const std::string& text);
};

// "t,branch,align,entropy,total" header plus one row per record.
std::string format_nurse_csv(const std::vector<NurseRecord>& records);

}  // namespace detailpp::io
