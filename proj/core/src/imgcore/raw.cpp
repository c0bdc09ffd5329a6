#include "upisp/imgcore/raw.hpp"

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "byteio.hpp"
#include "upisp/errors.hpp"
#include "upisp/imgcore/containers.hpp"

namespace upisp {

RawPatch::RawPatch(int height, int width, std::vector<std::uint16_t> samples)
    : height_(height), width_(width), samples_(std::move(samples)) {
  if (height < 2 || width < 2) {
    throw ShapeError("raw patch must be at least 2x2, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  const std::size_t expected = static_cast<std::size_t>(height) * width * kRawChannels;
  if (samples_.size() != expected) {
    throw ShapeError("raw patch holds " + std::to_string(samples_.size()) +
                     " samples, expected " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i] > kRawMaxSample) {
      throw RangeError("raw sample " + std::to_string(samples_[i]) + " at index " +
                       std::to_string(i) + " exceeds 1023");
    }
  }
}

RawPatch decode_raw(std::span<const std::byte> bytes, int height, int width) {
  if (height < 0 || width < 0) throw ShapeError("negative raw dimensions");
  const std::size_t count = static_cast<std::size_t>(height) * width * kRawChannels;
  if (bytes.size() != count * 2) {
    throw FormatError("raw buffer is " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(count * 2));
  }
  detail::ByteReader in(bytes, "raw patch");
  std::vector<std::uint16_t> samples(count);
  for (auto& s : samples) s = in.u16();
  return RawPatch(height, width, std::move(samples));
}

std::vector<std::byte> encode_raw(const RawPatch& patch) {
  detail::ByteWriter out;
  for (std::uint16_t s : patch.samples()) out.u16(s);
  return std::move(out).take();
}

RawPatch read_raw_file(const std::filesystem::path& path, int height, int width) {
  return decode_raw(read_file_bytes(path), height, width);
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

RawPatch read_raw_file(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw FormatError("missing raw sidecar " + side.string());
  nlohmann::json j;
  try {
    in >> j;
    return read_raw_file(path, j.at("height").get<int>(), j.at("width").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad raw sidecar " + side.string() + ": " + e.what());
  }
}

void write_raw_file(const std::filesystem::path& path, const RawPatch& patch,
                    bool with_sidecar) {
  write_file_bytes(path, encode_raw(patch));
  if (with_sidecar) {
    std::ofstream out(sidecar_path(path));
    out << nlohmann::json{{"height", patch.height()}, {"width", patch.width()}}.dump()
        << '\n';
    if (!out) throw Error("cannot write sidecar for " + path.string());
  }
}

}  // namespace upisp
