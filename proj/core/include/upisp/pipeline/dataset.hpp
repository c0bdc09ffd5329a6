#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace upisp::pipeline {

// Orders embedded digit runs by value: "p2" < "p10".
bool natural_less(std::string_view a, std::string_view b);

struct PatchRecord {
  std::string id;  // "<parent>/<stem>"
  std::filesystem::path file;
  std::string parent;
  int index = 0;  // position in the parent's scan order
  int row = -1;   // grid position, known after stitching
  int col = -1;
};

struct Manifest {
  std::vector<PatchRecord> records;  // grouped by parent, scan order within
  std::vector<std::string> parents;  // natural order

  // Throws ConfigError on duplicate ids or parents that are not contiguous.
  void validate() const;
  std::vector<std::size_t> records_of(std::string_view parent) const;
  int parent_index(std::string_view parent) const;  // -1 if absent
  std::vector<std::string> ids() const;
  // Parent index for every record.
  std::vector<int> parent_indices() const;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

// Dataset layout: one subdirectory per parent image holding its patches,
// natural-sorted by filename. Files placed directly in `root` form one
// parent named after `root`. Only files whose extension (lower case) is in
// `extensions` are listed.
Manifest scan_dataset(const std::filesystem::path& root, const std::vector<std::string>& extensions);

void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace upisp::pipeline
