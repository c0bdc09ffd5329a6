#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "upisp/mapper/train.hpp"
#include "upisp/otmatch/sinkhorn.hpp"
#include "upisp/rawproc/rawproc.hpp"

namespace upisp::pipeline {

// A small TOML subset: [table] and [dotted.table] headers, bare or dotted
// keys, basic and literal strings, integers, floats, booleans, and arrays
// of those (which may span lines). '#' starts a comment. Errors carry the
// origin and line number and are reported as ConfigError.
nlohmann::json parse_toml(std::string_view text, const std::string& origin = "<string>");

// Applies "dotted.key=value"; the value is parsed like a TOML value, and a
// bare word that is not a number or boolean is taken as a string.
void apply_override(nlohmann::json& tree, std::string_view assignment);

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned workers = 1;

  std::filesystem::path source_dir;
  std::filesystem::path target_dir;
  std::filesystem::path output_dir;
  std::filesystem::path reference_dir;  // optional paired references for eval
  std::filesystem::path source_image_embeddings;  // optional EMB1 files
  std::filesystem::path target_image_embeddings;
  std::filesystem::path source_patch_embeddings;
  std::filesystem::path target_patch_embeddings;

  int raw_height = 0;  // 0: read the per-file JSON sidecar
  int raw_width = 0;
  rawproc::RawProcConfig raw{};

  int stitch_border = 4;

  double alpha = 0.5;
  ot::SinkhornConfig sinkhorn{};
  int outer_iters = 10;
  int top_images = 10;
  int top_patches = 8;
  // Append the Y/UV histogram block to ingested image embeddings.
  bool image_histogram = true;

  std::string head = "cnn";  // ccm | lut3d | cnn, or several joined by '+'
  int lut_lattice = 9;
  int hidden = 128;
  mapper::TrainConfig train{};

  // Builds from a parsed tree; unknown keys are rejected. Relative paths
  // are resolved against `base_dir`.
  static RunConfig from_json(const nlohmann::json& tree, const std::filesystem::path& base_dir);
  nlohmann::json to_json() const;

  // Checks values and that every referenced input exists.
  void validate() const;
};

// Reads a .toml or .json config and applies overrides in order.
RunConfig load_run_config(const std::filesystem::path& path,
                          std::span<const std::string> overrides = {});

}  // namespace upisp::pipeline
