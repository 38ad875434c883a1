#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "janus/hierarchy.hpp"

namespace janus {

/// How the level payload bytes are produced.
enum class PayloadMode { synthetic, files };

struct ManifestLevel {
  int index = 0;                 // 1-based level index
  std::uint64_t size_bytes = 0;
  double error_bound = 0.0;
  std::string checksum;          // "crc32:xxxxxxxx" over the level bytes
  std::string file;              // relative path for PayloadMode::files
};

/// Versioned description of a dataset to transfer: level sizes, the error
/// bound each level prefix guarantees, and payload checksums.
struct Manifest {
  static constexpr int kVersion = 1;

  int version = kVersion;
  PayloadMode payload_mode = PayloadMode::synthetic;
  std::uint64_t seed = 0;        // payload seed for synthetic mode
  std::vector<ManifestLevel> levels;

  HierarchySpec hierarchy() const;
  void validate() const;

  std::string to_json() const;
  static Manifest from_json(const std::string& text);

  void save(const std::filesystem::path& path) const;
  static Manifest load(const std::filesystem::path& path);
};

/// CRC32 (zlib polynomial) of a byte range, rendered as "crc32:xxxxxxxx".
std::string crc32_label(std::span<const std::uint8_t> bytes);

/// Deterministically fills `out` with the synthetic payload of one level.
/// The stream depends only on (seed, level_index).
void fill_synthetic_level(std::uint64_t seed, int level_index,
                          std::span<std::uint8_t> out);

/// Builds a synthetic manifest for the given hierarchy, computing level
/// checksums from the seeded payload stream.
Manifest make_synthetic_manifest(const HierarchySpec& hierarchy,
                                 std::uint64_t seed);

/// Built-in dataset presets.  "nyx-full" is the four-level hierarchy used
/// throughout the docs (28.7 GB); "nyx-mini" is the same shape at 1/1000
/// scale (28.7 MB) for tests and demos.
HierarchySpec preset_hierarchy(const std::string& name);

}  // namespace janus
