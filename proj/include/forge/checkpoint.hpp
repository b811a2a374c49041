#pragma once

#include <filesystem>
#include <string>

#include "forge/pipeline.hpp"

namespace forge {

// Binary checkpoint, little-endian throughout:
//   "FORGECKP" u32 version
//   config text (u64 length + bytes)
//   config base directory (u64 length + bytes)
//   stage u32, iteration i64, skipped i64
//   rng state (u64 length + text)
//   avatar: seed u64, vertex count u64, offsets f64 x 3N,
//           albedo width u32, height u32, texels f64 x 3WH
//   Adam state for offsets, then albedo: step i64, count u64, m f64 x count, v f64 x count
//   SHA-256 of everything above (32 bytes)

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string config_text;
    std::string base_dir;  // directory the config's relative paths refer to
    TrainState state;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws ParseError for a bad magic, unknown version, truncation or digest
/// mismatch.
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source = "<memory>");

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace forge
