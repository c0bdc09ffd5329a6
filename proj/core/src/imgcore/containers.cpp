#include "upisp/imgcore/containers.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <utility>

#include "byteio.hpp"
#include "upisp/errors.hpp"

namespace upisp {

namespace {

constexpr std::string_view kEmbMagic = "EMB1";
constexpr std::string_view kFmpMagic = "FMP1";
constexpr std::uint32_t kVersion = 1;

void check_name(const std::string& name) {
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw FormatError("record name longer than 65535 bytes");
  }
}

void check_magic(detail::ByteReader& in, std::string_view magic) {
  const std::string got = in.string(4);
  if (got != magic) {
    throw FormatError("bad magic: expected " + std::string(magic));
  }
  const std::uint32_t version = in.u32();
  if (version != kVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
}

}  // namespace

void EmbeddingSet::add(std::string name, std::vector<float> values) {
  if (records_.empty() && dim_ == 0) dim_ = static_cast<std::uint32_t>(values.size());
  if (values.size() != dim_) {
    throw FormatError("embedding '" + name + "' has dimension " +
                      std::to_string(values.size()) + ", expected " + std::to_string(dim_));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw RangeError("embedding '" + name + "' is not finite");
  }
  check_name(name);
  if (index_.contains(name)) throw FormatError("duplicate embedding name '" + name + "'");
  index_.emplace(name, records_.size());
  records_.push_back({std::move(name), std::move(values)});
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void FeatureMapSet::add(FeatureMap map) {
  const std::size_t expected = static_cast<std::size_t>(map.channels) * map.spatial();
  if (map.channels <= 0 || map.height <= 0 || map.width <= 0 ||
      map.values.size() != expected) {
    throw FormatError("feature map '" + map.name + "' size does not match C*H*W");
  }
  if (map.channels > 0xFFFF || map.height > 0xFFFF || map.width > 0xFFFF) {
    throw FormatError("feature map '" + map.name + "' dimension exceeds 65535");
  }
  for (double v : map.values) {
    if (!std::isfinite(v)) throw RangeError("feature map '" + map.name + "' is not finite");
  }
  check_name(map.name);
  for (const auto& m : maps_) {
    if (m.name == map.name && m.layer == map.layer) {
      throw FormatError("duplicate feature map '" + map.name + "' layer " +
                        std::to_string(map.layer));
    }
  }
  maps_.push_back(std::move(map));
}

FeatureMapSet FeatureMapSet::select(std::string_view name) const {
  FeatureMapSet out;
  for (const auto& m : maps_) {
    if (m.name == name) out.maps_.push_back(m);
  }
  return out;
}

std::vector<std::byte> encode_embeddings(const EmbeddingSet& set) {
  detail::ByteWriter out;
  out.bytes(kEmbMagic);
  out.u32(kVersion);
  out.u32(static_cast<std::uint32_t>(set.size()));
  out.u32(set.dim());
  for (const auto& rec : set.records()) {
    out.u16(static_cast<std::uint16_t>(rec.name.size()));
    out.bytes(rec.name);
    for (float v : rec.values) out.f32(v);
  }
  return std::move(out).take();
}

EmbeddingSet decode_embeddings(std::span<const std::byte> bytes) {
  detail::ByteReader in(bytes, "EMB1");
  check_magic(in, kEmbMagic);
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  EmbeddingSet set(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.string(in.u16());
    std::vector<float> values(dim);
    for (auto& v : values) v = in.f32();
    set.add(std::move(name), std::move(values));
  }
  if (in.remaining() != 0) throw FormatError("EMB1: trailing bytes after last record");
  return set;
}

std::vector<std::byte> encode_feature_maps(const FeatureMapSet& set) {
  detail::ByteWriter out;
  out.bytes(kFmpMagic);
  out.u32(kVersion);
  out.u32(static_cast<std::uint32_t>(set.size()));
  out.u32(0);
  for (const auto& m : set.maps()) {
    out.u16(static_cast<std::uint16_t>(m.name.size()));
    out.bytes(m.name);
    out.u16(m.layer);
    out.u16(static_cast<std::uint16_t>(m.channels));
    out.u16(static_cast<std::uint16_t>(m.height));
    out.u16(static_cast<std::uint16_t>(m.width));
    for (double v : m.values) out.f32(static_cast<float>(v));
  }
  return std::move(out).take();
}

FeatureMapSet decode_feature_maps(std::span<const std::byte> bytes) {
  detail::ByteReader in(bytes, "FMP1");
  check_magic(in, kFmpMagic);
  const std::uint32_t count = in.u32();
  if (in.u32() != 0) throw FormatError("FMP1: header dim field must be 0");
  FeatureMapSet set;
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureMap m;
    m.name = in.string(in.u16());
    m.layer = in.u16();
    m.channels = in.u16();
    m.height = in.u16();
    m.width = in.u16();
    m.values.resize(static_cast<std::size_t>(m.channels) * m.spatial());
    for (auto& v : m.values) v = in.f32();
    set.add(std::move(m));
  }
  if (in.remaining() != 0) throw FormatError("FMP1: trailing bytes after last record");
  return set;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file_bytes(path));
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_file_bytes(path, encode_embeddings(set));
}

FeatureMapSet read_feature_maps(const std::filesystem::path& path) {
  return decode_feature_maps(read_file_bytes(path));
}

void write_feature_maps(const FeatureMapSet& set, const std::filesystem::path& path) {
  write_file_bytes(path, encode_feature_maps(set));
}

}  // namespace upisp
