#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace upisp {

// EMB1 container
//   "EMB1" | version u32 = 1 | count u32 | dim u32
//   per record: name_len u16 | name bytes (UTF-8) | dim x f32
// FMP1 container
//   "FMP1" | version u32 = 1 | count u32 | dim u32 = 0
//   per record: name_len u16 | name | layer u16 | C u16 | H u16 | W u16 | C*H*W x f32
// All integers and floats are little-endian.

struct EmbeddingRecord {
  std::string name;
  std::vector<float> values;
};

class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(std::uint32_t dim) : dim_(dim) {}

  // Throws FormatError on a dimension mismatch or duplicate name, RangeError
  // on non-finite values.
  void add(std::string name, std::vector<float> values);

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
  std::optional<std::size_t> find(std::string_view name) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    if (a.dim_ != b.dim_ || a.records_.size() != b.records_.size()) return false;
    for (std::size_t i = 0; i < a.records_.size(); ++i) {
      if (a.records_[i].name != b.records_[i].name ||
          a.records_[i].values != b.records_[i].values) {
        return false;
      }
    }
    return true;
  }

 private:
  std::uint32_t dim_ = 0;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One layer activation of one image. Values are held in double so loss
// gradients can be checked numerically; the container stores f32.
struct FeatureMap {
  std::string name;
  std::uint16_t layer = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // C x H x W

  std::size_t spatial() const noexcept {
    return static_cast<std::size_t>(height) * width;
  }
};

// Records are unique by (name, layer); one image usually contributes one
// record per tapped layer.
class FeatureMapSet {
 public:
  void add(FeatureMap map);

  std::size_t size() const noexcept { return maps_.size(); }
  bool empty() const noexcept { return maps_.empty(); }
  const FeatureMap& operator[](std::size_t i) const { return maps_[i]; }
  FeatureMap& operator[](std::size_t i) { return maps_[i]; }
  const std::vector<FeatureMap>& maps() const noexcept { return maps_; }

  // All layers recorded for `name`, in insertion order.
  FeatureMapSet select(std::string_view name) const;

 private:
  std::vector<FeatureMap> maps_;
};

std::vector<std::byte> encode_embeddings(const EmbeddingSet& set);
EmbeddingSet decode_embeddings(std::span<const std::byte> bytes);
EmbeddingSet read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

std::vector<std::byte> encode_feature_maps(const FeatureMapSet& set);
FeatureMapSet decode_feature_maps(std::span<const std::byte> bytes);
FeatureMapSet read_feature_maps(const std::filesystem::path& path);
void write_feature_maps(const FeatureMapSet& set, const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace upisp
