#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "common_opts.hpp"
#include "janus/errors.hpp"
#include "janus/manifest.hpp"

namespace janus::cli {

namespace {

struct GenOpts {
  HierOpts hier;
  std::string outdir;
  std::uint64_t seed = 1;
  std::string mode = "files";
  bool force = false;
};

constexpr std::uint64_t kFilesModeLimit = 2ull << 30;

}  // namespace

void setup_gen_data(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "gen-data", "write a synthetic dataset manifest (and level files)");
  auto opt = std::make_shared<GenOpts>();
  cmd->add_option("-o,--outdir", opt->outdir, "output directory")->required();
  cmd->add_option("--seed", opt->seed, "payload seed");
  cmd->add_option("--mode", opt->mode,
                  "files (write level payloads) | synthetic (manifest only, "
                  "payload regenerated from the seed at send time)");
  cmd->add_flag("--force", opt->force,
                "allow writing level files larger than 2 GiB total");
  add_hier_options(cmd, opt->hier);

  cmd->callback([opt] {
    HierarchySpec h;
    if (opt->hier.preset.empty() && opt->hier.level_specs.empty())
      h = preset_hierarchy("nyx-mini");
    else
      h = opt->hier.hierarchy();
    if (opt->mode != "files" && opt->mode != "synthetic")
      throw ConfigError("--mode must be files or synthetic");
    const bool files = opt->mode == "files";
    if (files && h.total_bytes() > kFilesModeLimit && !opt->force)
      throw ConfigError(
          "refusing to write more than 2 GiB of level files; pass --force "
          "or use --mode synthetic");

    const std::filesystem::path out = opt->outdir;
    std::filesystem::create_directories(out);

    Manifest man = make_synthetic_manifest(h, opt->seed);
    if (files) {
      man.payload_mode = PayloadMode::files;
      for (std::size_t i = 0; i < man.levels.size(); ++i) {
        auto& level = man.levels[i];
        std::vector<std::uint8_t> bytes(level.size_bytes);
        fill_synthetic_level(opt->seed, level.index, bytes);
        level.file = "level-" + std::to_string(level.index) + ".bin";
        std::ofstream file(out / level.file,
                           std::ios::binary | std::ios::trunc);
        if (!file) throw Error("cannot write " + (out / level.file).string());
        file.write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
      }
    }
    man.save(out / "manifest.json");
    std::printf("wrote %s (%d levels, %llu bytes, %s payload)\n",
                (out / "manifest.json").c_str(), h.level_count(),
                static_cast<unsigned long long>(h.total_bytes()),
                files ? "file" : "synthetic");
  });
}

}  // namespace janus::cli
