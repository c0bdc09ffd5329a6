#include "upisp/pipeline/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "upisp/errors.hpp"

namespace upisp::pipeline {

namespace {

using nlohmann::json;

class TomlParser {
 public:
  TomlParser(std::string_view text, std::string origin) : s_(text), origin_(std::move(origin)) {}

  json parse_document() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        parse_assignment(*table);
      }
      end_of_line();
    }
    return root;
  }

  json parse_single_value() {
    skip_spaces();
    json v = parse_value();
    skip_spaces();
    if (!eof() && peek() != '#') fail("unexpected text after value");
    return v;
  }

 private:
  bool eof() const noexcept { return pos_ >= s_.size(); }
  char peek() const noexcept { return s_[pos_]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(origin_ + ":" + std::to_string(line_) + ": " + msg);
  }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (!eof() && peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }
  void skip_blank_lines() {
    while (true) {
      skip_spaces();
      skip_comment();
      if (eof()) return;
      if (peek() == '\r') {
        ++pos_;
        continue;
      }
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }
  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (!eof() && peek() == '\r') ++pos_;
    if (eof()) return;
    if (peek() != '\n') fail("expected end of line");
    ++pos_;
    ++line_;
  }

  std::string parse_key_part() {
    if (eof()) fail("expected a key");
    if (peek() == '"' || peek() == '\'') return parse_string();
    const std::size_t start = pos_;
    while (!eof()) {
      const char c = peek();
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) break;
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path;
    skip_spaces();
    path.push_back(parse_key_part());
    skip_spaces();
    while (!eof() && peek() == '.') {
      ++pos_;
      skip_spaces();
      path.push_back(parse_key_part());
      skip_spaces();
    }
    return path;
  }

  json& descend(json& node, const std::vector<std::string>& path, std::size_t count) {
    json* cur = &node;
    for (std::size_t i = 0; i < count; ++i) {
      json& next = (*cur)[path[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
      cur = &next;
    }
    return *cur;
  }

  json& open_table(json& root) {
    ++pos_;
    if (!eof() && peek() == '[') fail("arrays of tables are not supported");
    const auto path = parse_key_path();
    if (eof() || peek() != ']') fail("expected ']'");
    ++pos_;
    std::string dotted;
    for (const auto& p : path) dotted += (dotted.empty() ? "" : ".") + p;
    if (!tables_.insert(dotted).second) fail("table [" + dotted + "] defined twice");
    return descend(root, path, path.size());
  }

  void parse_assignment(json& table) {
    const auto path = parse_key_path();
    if (eof() || peek() != '=') fail("expected '=' after key");
    ++pos_;
    skip_spaces();
    json value = parse_value();
    json& parent = descend(table, path, path.size() - 1);
    if (parent.contains(path.back())) fail("duplicate key '" + path.back() + "'");
    parent[path.back()] = std::move(value);
  }

  std::string parse_string() {
    const char quote = peek();
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = peek();
      ++pos_;
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (eof()) fail("unterminated escape");
        const char e = peek();
        ++pos_;
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  json parse_array() {
    ++pos_;
    json arr = json::array();
    while (true) {
      skip_blank_lines();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_blank_lines();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_value() {
    if (eof()) fail("expected a value");
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    const std::size_t start = pos_;
    while (!eof()) {
      const char d = peek();
      if (d == ',' || d == ']' || d == '#' || d == ' ' || d == '\t' || d == '\n' || d == '\r') break;
      ++pos_;
    }
    std::string tok(s_.substr(start, pos_ - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    return parse_number(tok);
  }

  json parse_number(std::string tok) {
    if (tok.empty()) fail("expected a value");
    std::erase(tok, '_');
    const std::string body = (tok[0] == '+' || tok[0] == '-') ? tok.substr(1) : tok;
    if (body == "inf" || body == "nan") {
      const double v = body == "inf" ? INFINITY : NAN;
      return tok[0] == '-' ? -v : v;
    }
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    errno = 0;
    char* end = nullptr;
    if (is_float) {
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || errno == ERANGE) fail("bad number '" + tok + "'");
      return v;
    }
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || errno == ERANGE) {
      fail("bad value '" + tok + "' (strings need quotes)");
    }
    return v;
  }

  std::string_view s_;
  std::string origin_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> tables_;
};

// Reads typed keys out of one table and rejects anything left unread.
class TableReader {
 public:
  TableReader(const json& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.is_null() && !node_.is_object()) throw ConfigError("'" + name_ + "' must be a table");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (node_.is_null() || !node_.contains(key)) return;
    const json& v = node_.at(key);
    try {
      if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw ConfigError(where(key) + " must be non-negative");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void get_path(const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    get(key, s);
    if (!s.empty()) {
      const std::filesystem::path p(s);
      out = p.is_absolute() ? p : base / p;
    }
  }

  TableReader sub(const char* key) {
    used_.insert(key);
    static const json kNull;
    const json& child = (!node_.is_null() && node_.contains(key)) ? node_.at(key) : kNull;
    return TableReader(child, name_.empty() ? key : name_ + "." + key);
  }

  void finish() const {
    if (node_.is_null()) return;
    for (const auto& [k, _] : node_.items()) {
      if (!used_.count(k)) throw ConfigError("unknown config key '" + where(k.c_str()) + "'");
    }
  }

 private:
  std::string where(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  const json& node_;
  std::string name_;
  std::set<std::string> used_;
};

void read_stage(TableReader t, mapper::StageConfig& s) {
  t.get("epochs", s.epochs);
  t.get("lr", s.lr);
  t.get("mom", s.weights.mom);
  t.get("luma", s.weights.luma);
  t.get("chroma", s.weights.chroma);
  t.get("gram", s.weights.gram);
  t.get("tv", s.weights.tv);
  t.finish();
}

json stage_json(const mapper::StageConfig& s) {
  return {{"epochs", s.epochs}, {"lr", s.lr},         {"mom", s.weights.mom},
          {"luma", s.weights.luma}, {"chroma", s.weights.chroma}, {"gram", s.weights.gram},
          {"tv", s.weights.tv}};
}

void require_dir(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string(what) + " is not set");
  if (!std::filesystem::is_directory(p)) {
    throw ConfigError(std::string(what) + " does not exist: " + p.string());
  }
}

void require_optional_file(const std::filesystem::path& p, const char* what) {
  if (!p.empty() && !std::filesystem::is_regular_file(p)) {
    throw ConfigError(std::string(what) + " does not exist: " + p.string());
  }
}

}  // namespace

nlohmann::json parse_toml(std::string_view text, const std::string& origin) {
  return TomlParser(text, origin).parse_document();
}

void apply_override(nlohmann::json& tree, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like key=value");
  }
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  const std::string_view key = trim(assignment.substr(0, eq));
  const std::string_view raw = trim(assignment.substr(eq + 1));
  if (key.empty()) throw ConfigError("override has an empty key");

  json value;
  try {
    value = TomlParser(raw, "override").parse_single_value();
  } catch (const ConfigError&) {
    value = std::string(raw);
  }
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part(key.substr(start, dot == std::string_view::npos ? key.npos : dot - start));
    if (part.empty()) throw ConfigError("override key '" + std::string(key) + "' is malformed");
    if (dot == std::string_view::npos) {
      (*node)[part] = value;
      return;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError("override key '" + std::string(key) + "' crosses a value");
    node = &next;
    start = dot + 1;
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& tree, const std::filesystem::path& base_dir) {
  RunConfig c;
  TableReader root(tree, "");
  root.get("seed", c.seed);
  root.get("workers", c.workers);

  {
    TableReader t = root.sub("paths");
    t.get_path("source_dir", c.source_dir, base_dir);
    t.get_path("target_dir", c.target_dir, base_dir);
    t.get_path("output_dir", c.output_dir, base_dir);
    t.get_path("reference_dir", c.reference_dir, base_dir);
    t.get_path("source_image_embeddings", c.source_image_embeddings, base_dir);
    t.get_path("target_image_embeddings", c.target_image_embeddings, base_dir);
    t.get_path("source_patch_embeddings", c.source_patch_embeddings, base_dir);
    t.get_path("target_patch_embeddings", c.target_patch_embeddings, base_dir);
    t.finish();
  }
  {
    TableReader t = root.sub("raw");
    t.get("height", c.raw_height);
    t.get("width", c.raw_width);
    t.get("black_level", c.raw.black_level);
    t.get("white_level", c.raw.white_level);
    std::vector<double> gains(c.raw.wb_gains.begin(), c.raw.wb_gains.end());
    t.get("wb_gains", gains);
    if (gains.size() != 4) throw ConfigError("raw.wb_gains needs four values (R, Gr, Gb, B)");
    std::copy(gains.begin(), gains.end(), c.raw.wb_gains.begin());
    t.get("gamma", c.raw.gamma);
    std::string denoise = "off";
    t.get("denoise", denoise);
    if (denoise == "off") c.raw.denoise = rawproc::Denoise::kOff;
    else if (denoise == "box3") c.raw.denoise = rawproc::Denoise::kBox3;
    else throw ConfigError("raw.denoise must be \"off\" or \"box3\"");
    t.finish();
  }
  {
    TableReader t = root.sub("stitch");
    t.get("border", c.stitch_border);
    t.finish();
  }
  {
    TableReader t = root.sub("match");
    t.get("alpha", c.alpha);
    t.get("epsilon", c.sinkhorn.epsilon);
    t.get("max_iters", c.sinkhorn.max_iters);
    t.get("tol", c.sinkhorn.tol);
    t.get("outer_iters", c.outer_iters);
    t.get("top_images", c.top_images);
    t.get("top_patches", c.top_patches);
    t.get("image_histogram", c.image_histogram);
    t.finish();
  }
  {
    TableReader t = root.sub("train");
    t.get("head", c.head);
    t.get("lut_lattice", c.lut_lattice);
    t.get("hidden", c.hidden);
    t.get("batch", c.train.batch);
    t.get("beta1", c.train.beta1);
    t.get("beta2", c.train.beta2);
    t.get("eps", c.train.eps);
    t.get("weight_decay", c.train.weight_decay);
    read_stage(t.sub("stage1"), c.train.stage1);
    read_stage(t.sub("stage2"), c.train.stage2);
    TableReader h = t.sub("histogram");
    h.get("bins_y", c.train.hist.bins_y);
    h.get("bins_uv", c.train.hist.bins_uv);
    h.finish();
    t.finish();
  }
  root.finish();
  c.train.seed = c.seed;
  c.train.workers = c.workers;
  return c;
}

nlohmann::json RunConfig::to_json() const {
  auto path = [](const std::filesystem::path& p) { return p.empty() ? std::string() : p.string(); };
  return {
      {"seed", seed},
      {"workers", workers},
      {"paths",
       {{"source_dir", path(source_dir)},
        {"target_dir", path(target_dir)},
        {"output_dir", path(output_dir)},
        {"reference_dir", path(reference_dir)},
        {"source_image_embeddings", path(source_image_embeddings)},
        {"target_image_embeddings", path(target_image_embeddings)},
        {"source_patch_embeddings", path(source_patch_embeddings)},
        {"target_patch_embeddings", path(target_patch_embeddings)}}},
      {"raw",
       {{"height", raw_height},
        {"width", raw_width},
        {"black_level", raw.black_level},
        {"white_level", raw.white_level},
        {"wb_gains", raw.wb_gains},
        {"gamma", raw.gamma},
        {"denoise", raw.denoise == rawproc::Denoise::kBox3 ? "box3" : "off"}}},
      {"stitch", {{"border", stitch_border}}},
      {"match",
       {{"alpha", alpha},
        {"epsilon", sinkhorn.epsilon},
        {"max_iters", sinkhorn.max_iters},
        {"tol", sinkhorn.tol},
        {"outer_iters", outer_iters},
        {"top_images", top_images},
        {"top_patches", top_patches},
        {"image_histogram", image_histogram}}},
      {"train",
       {{"head", head},
        {"lut_lattice", lut_lattice},
        {"hidden", hidden},
        {"batch", train.batch},
        {"beta1", train.beta1},
        {"beta2", train.beta2},
        {"eps", train.eps},
        {"weight_decay", train.weight_decay},
        {"stage1", stage_json(train.stage1)},
        {"stage2", stage_json(train.stage2)},
        {"histogram", {{"bins_y", train.hist.bins_y}, {"bins_uv", train.hist.bins_uv}}}}},
  };
}

void RunConfig::validate() const {
  require_dir(source_dir, "paths.source_dir");
  require_dir(target_dir, "paths.target_dir");
  if (output_dir.empty()) throw ConfigError("paths.output_dir is not set");
  if (!reference_dir.empty()) require_dir(reference_dir, "paths.reference_dir");
  require_optional_file(source_image_embeddings, "paths.source_image_embeddings");
  require_optional_file(target_image_embeddings, "paths.target_image_embeddings");
  require_optional_file(source_patch_embeddings, "paths.source_patch_embeddings");
  require_optional_file(target_patch_embeddings, "paths.target_patch_embeddings");
  if (raw_height < 0 || raw_width < 0 || (raw_height == 0) != (raw_width == 0)) {
    throw ConfigError("raw.height and raw.width must both be set (> 0) or both be 0");
  }
  raw.validate();
  if (stitch_border < 1) throw ConfigError("stitch.border must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("match.alpha must lie in [0, 1]");
  sinkhorn.validate();
  if (outer_iters < 1) throw ConfigError("match.outer_iters must be >= 1");
  if (top_images < 1) throw ConfigError("match.top_images must be >= 1");
  if (top_patches < 1) throw ConfigError("match.top_patches must be >= 1");
  if (lut_lattice < 2) throw ConfigError("train.lut_lattice must be >= 2");
  if (hidden < 1) throw ConfigError("train.hidden must be >= 1");
  train.validate();
}

RunConfig load_run_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json tree;
  if (path.extension() == ".json") {
    try {
      tree = json::parse(ss.str());
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  } else {
    tree = parse_toml(ss.str(), path.string());
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return RunConfig::from_json(tree, std::filesystem::absolute(path).parent_path());
}

}  // namespace upisp::pipeline
