#include "janus/manifest.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "janus/errors.hpp"
#include "janus/rng.hpp"

namespace janus {

using nlohmann::json;

HierarchySpec Manifest::hierarchy() const {
  HierarchySpec h;
  h.levels.reserve(levels.size());
  for (const auto& lv : levels)
    h.levels.push_back({lv.size_bytes, lv.error_bound});
  return h;
}

void Manifest::validate() const {
  if (version != kVersion) throw ConfigError("unsupported manifest version");
  hierarchy().validate();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].index != static_cast<int>(i) + 1)
      throw ConfigError("manifest level indices must be 1..L in order");
    if (payload_mode == PayloadMode::files && levels[i].file.empty())
      throw ConfigError("file-mode manifest level missing file path");
  }
}

std::string Manifest::to_json() const {
  json j;
  j["format"] = "janus-manifest";
  j["version"] = version;
  j["payload"]["mode"] =
      payload_mode == PayloadMode::synthetic ? "synthetic" : "files";
  if (payload_mode == PayloadMode::synthetic) j["payload"]["seed"] = seed;
  j["levels"] = json::array();
  for (const auto& lv : levels) {
    json e;
    e["index"] = lv.index;
    e["size_bytes"] = lv.size_bytes;
    e["error_bound"] = lv.error_bound;
    e["checksum"] = lv.checksum;
    if (!lv.file.empty()) e["file"] = lv.file;
    j["levels"].push_back(std::move(e));
  }
  return j.dump(2);
}

Manifest Manifest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest parse error: ") + e.what());
  }
  try {
    if (j.value("format", "") != "janus-manifest")
      throw ConfigError("not a janus manifest");
    Manifest m;
    m.version = j.at("version").get<int>();
    const std::string mode = j.at("payload").at("mode").get<std::string>();
    if (mode == "synthetic") {
      m.payload_mode = PayloadMode::synthetic;
      m.seed = j["payload"].value("seed", std::uint64_t{0});
    } else if (mode == "files") {
      m.payload_mode = PayloadMode::files;
    } else {
      throw ConfigError("unknown payload mode: " + mode);
    }
    for (const auto& e : j.at("levels")) {
      ManifestLevel lv;
      lv.index = e.at("index").get<int>();
      lv.size_bytes = e.at("size_bytes").get<std::uint64_t>();
      lv.error_bound = e.at("error_bound").get<double>();
      lv.checksum = e.value("checksum", "");
      lv.file = e.value("file", "");
      m.levels.push_back(std::move(lv));
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest field error: ") + e.what());
  }
}

void Manifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest: " + path.string());
  out << to_json() << "\n";
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string crc32_label(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk =
        static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "crc32:%08lx", static_cast<unsigned long>(crc));
  return buf;
}

void fill_synthetic_level(std::uint64_t seed, int level_index,
                          std::span<std::uint8_t> out) {
  std::uint64_t mix = seed ^ (0xA5A5A5A500000000ULL + level_index);
  Rng rng(Rng::splitmix64(mix));
  std::size_t i = 0;
  while (i + 8 <= out.size()) {
    const std::uint64_t word = rng.next_u64();
    for (int b = 0; b < 8; ++b)
      out[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
    i += 8;
  }
  if (i < out.size()) {
    const std::uint64_t word = rng.next_u64();
    for (int b = 0; i < out.size(); ++b, ++i)
      out[i] = static_cast<std::uint8_t>(word >> (8 * b));
  }
}

Manifest make_synthetic_manifest(const HierarchySpec& hierarchy,
                                 std::uint64_t seed) {
  hierarchy.validate();
  Manifest m;
  m.payload_mode = PayloadMode::synthetic;
  m.seed = seed;
  std::vector<std::uint8_t> buf;
  for (int i = 0; i < hierarchy.level_count(); ++i) {
    const auto& lv = hierarchy.levels[i];
    buf.resize(lv.size_bytes);
    fill_synthetic_level(seed, i + 1, buf);
    ManifestLevel entry;
    entry.index = i + 1;
    entry.size_bytes = lv.size_bytes;
    entry.error_bound = lv.error_bound;
    entry.checksum = crc32_label(buf);
    m.levels.push_back(std::move(entry));
  }
  return m;
}

HierarchySpec preset_hierarchy(const std::string& name) {
  // Four-level progressive hierarchy: 668 MiB, 2.67 GiB, 5.42 GiB,
  // 17.99 GiB with error bounds 4e-3 / 5e-4 / 6e-5 / 1e-7.
  HierarchySpec full;
  full.levels = {{700448768ULL, 4e-3},
                 {2866890670ULL, 5e-4},
                 {5819680686ULL, 6e-5},
                 {19316615414ULL, 1e-7}};
  if (name == "nyx-full") return full;
  if (name == "nyx-mini") return full.scaled(1000.0);
  throw ConfigError("unknown preset: " + name);
}

}  // namespace janus
