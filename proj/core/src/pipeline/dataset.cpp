#include "upisp/pipeline/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "upisp/errors.hpp"

namespace upisp::pipeline {

namespace fs = std::filesystem;

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && digit(a[ie])) ++ie;
      while (je < b.size() && digit(b[je])) ++je;
      std::string_view da = a.substr(i, ie - i), db = b.substr(j, je - j);
      while (da.size() > 1 && da.front() == '0') da.remove_prefix(1);
      while (db.size() > 1 && db.front() == '0') db.remove_prefix(1);
      if (da.size() != db.size()) return da.size() < db.size();
      if (da != db) return da < db;
      if (ie - i != je - j) return ie - i < je - j;  // fewer leading zeros first
      i = ie;
      j = je;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  return a.size() - i < b.size() - j;
}

void Manifest::validate() const {
  std::set<std::string> ids;
  std::set<std::string> closed;
  std::string current;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw ConfigError("manifest: duplicate patch id '" + r.id + "'");
    if (r.parent != current) {
      if (closed.count(r.parent)) throw ConfigError("manifest: parent '" + r.parent + "' is split");
      if (!current.empty()) closed.insert(current);
      current = r.parent;
    }
    if (parent_index(r.parent) < 0) throw ConfigError("manifest: unknown parent '" + r.parent + "'");
  }
}

std::vector<std::size_t> Manifest::records_of(std::string_view parent) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].parent == parent) out.push_back(i);
  }
  return out;
}

int Manifest::parent_index(std::string_view parent) const {
  const auto it = std::find(parents.begin(), parents.end(), parent);
  return it == parents.end() ? -1 : static_cast<int>(it - parents.begin());
}

std::vector<std::string> Manifest::ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.id);
  return out;
}

std::vector<int> Manifest::parent_indices() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(parent_index(r.parent));
  return out;
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) {
    recs.push_back({{"id", r.id},
                    {"file", r.file.string()},
                    {"parent_image_id", r.parent},
                    {"index", r.index},
                    {"row", r.row},
                    {"col", r.col}});
  }
  return {{"parents", parents}, {"records", recs}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.parents = j.at("parents").get<std::vector<std::string>>();
    for (const auto& r : j.at("records")) {
      m.records.push_back({r.at("id").get<std::string>(), fs::path(r.at("file").get<std::string>()),
                           r.at("parent_image_id").get<std::string>(), r.at("index").get<int>(),
                           r.at("row").get<int>(), r.at("col").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
  m.validate();
  return m;
}

Manifest scan_dataset(const fs::path& root, const std::vector<std::string>& extensions) {
  if (!fs::is_directory(root)) throw ConfigError("not a directory: " + root.string());
  auto wanted = [&](const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return std::find(extensions.begin(), extensions.end(), ext) != extensions.end();
  };
  auto by_name = [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  };

  std::vector<fs::path> dirs, loose;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
    else if (e.is_regular_file() && wanted(e.path())) loose.push_back(e.path());
  }
  std::vector<std::pair<std::string, std::vector<fs::path>>> groups;
  if (!loose.empty()) {
    fs::path self = fs::absolute(root).lexically_normal();
    if (self.filename().empty()) self = self.parent_path();
    groups.emplace_back(self.filename().string(), loose);
  }
  for (const auto& d : dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.is_regular_file() && wanted(e.path())) files.push_back(e.path());
    }
    if (!files.empty()) groups.emplace_back(d.filename().string(), std::move(files));
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return natural_less(a.first, b.first); });

  Manifest m;
  for (auto& [parent, files] : groups) {
    std::sort(files.begin(), files.end(), by_name);
    m.parents.push_back(parent);
    for (std::size_t i = 0; i < files.size(); ++i) {
      m.records.push_back({parent + "/" + files[i].stem().string(), files[i], parent,
                           static_cast<int>(i), -1, -1});
    }
  }
  m.validate();
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read manifest " + path.string());
  try {
    return Manifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace upisp::pipeline
