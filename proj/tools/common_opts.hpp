#pragma once

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "janus/errors.hpp"
#include "janus/hierarchy.hpp"
#include "janus/manifest.hpp"

namespace janus::cli {

struct NetOpts {
  double latency = 0.01;
  double rate = 19144.0;
  unsigned fragment = 4096;
  unsigned group = 32;

  NetworkParams params() const {
    NetworkParams p;
    p.latency_s = latency;
    p.link_rate = rate;
    p.ec_rate = rate;
    p.fragment_size = fragment;
    p.group_size = group;
    p.validate();
    return p;
  }
};

inline void add_net_options(CLI::App* cmd, NetOpts& net) {
  cmd->add_option("--latency", net.latency, "one-way latency t, seconds");
  cmd->add_option("--rate", net.rate, "sustained send rate r, packets/s");
  cmd->add_option("--fragment-size", net.fragment, "fragment payload bytes");
  cmd->add_option("--group-size", net.group,
                  "fragments per transmission group (n = k + m)");
}

struct HierOpts {
  std::string preset;
  std::vector<std::string> level_specs;

  HierarchySpec hierarchy() const {
    if (!preset.empty() && !level_specs.empty())
      throw ConfigError("give either --preset or --level, not both");
    if (!preset.empty()) return preset_hierarchy(preset);
    if (level_specs.empty())
      throw ConfigError("no hierarchy given; use --preset or --level");
    HierarchySpec h;
    for (const auto& spec : level_specs) {
      const auto colon = spec.find(':');
      if (colon == std::string::npos)
        throw ConfigError("--level expects SIZE_BYTES:ERROR_BOUND, got " +
                          spec);
      try {
        h.levels.push_back({std::stoull(spec.substr(0, colon)),
                            std::stod(spec.substr(colon + 1))});
      } catch (const std::exception&) {
        throw ConfigError("cannot parse --level " + spec);
      }
    }
    h.validate();
    return h;
  }
};

inline void add_hier_options(CLI::App* cmd, HierOpts& hier) {
  cmd->add_option("--preset", hier.preset,
                  "built-in hierarchy (nyx-full, nyx-mini)");
  cmd->add_option("--level", hier.level_specs,
                  "explicit level as SIZE_BYTES:ERROR_BOUND (repeatable)");
}

/// Comma-separated integers ("5,4,2,0") into a vector.
inline std::vector<int> parse_int_csv(const std::string& csv) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t end = csv.find(',', pos);
    if (end == std::string::npos) end = csv.size();
    const std::string tok = csv.substr(pos, end - pos);
    if (!tok.empty()) {
      try {
        out.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("cannot parse integer list entry: " + tok);
      }
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace janus::cli
