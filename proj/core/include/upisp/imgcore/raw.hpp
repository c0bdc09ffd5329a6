#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace upisp {

inline constexpr int kRawChannels = 4;
inline constexpr std::uint16_t kRawMaxSample = 1023;

// Channel order of the packed Bayer layout.
enum class RawChannel : int { kR = 0, kGr = 1, kGb = 2, kB = 3 };

// Packed RGGB sensor patch: H x W x 4 samples, row-major and channel-last,
// each a 10-bit value stored in 16 bits.
class RawPatch {
 public:
  RawPatch() = default;
  // Throws ShapeError for H or W < 2 or a wrong buffer size, RangeError for
  // any sample above 1023.
  RawPatch(int height, int width, std::vector<std::uint16_t> samples);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  std::uint16_t at(int y, int x, RawChannel c) const noexcept {
    return samples_[(static_cast<std::size_t>(y) * width_ + x) * kRawChannels +
                    static_cast<int>(c)];
  }
  std::span<const std::uint16_t> samples() const noexcept { return samples_; }

  friend bool operator==(const RawPatch&, const RawPatch&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint16_t> samples_;
};

RawPatch decode_raw(std::span<const std::byte> bytes, int height, int width);
std::vector<std::byte> encode_raw(const RawPatch& patch);

RawPatch read_raw_file(const std::filesystem::path& path, int height, int width);

// Reads `<stem>.json` next to the buffer for {"height", "width"}.
RawPatch read_raw_file(const std::filesystem::path& path);

// Writes the buffer and, when `with_sidecar`, its JSON sidecar.
void write_raw_file(const std::filesystem::path& path, const RawPatch& patch,
                    bool with_sidecar = true);

}  // namespace upisp
