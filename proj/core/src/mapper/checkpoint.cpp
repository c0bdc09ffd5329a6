#include "upisp/mapper/checkpoint.hpp"

#include <algorithm>
#include <string>

#include <nlohmann/json.hpp>

#include "../imgcore/byteio.hpp"
#include "upisp/errors.hpp"
#include "upisp/imgcore/containers.hpp"

namespace upisp::mapper {

void save_checkpoint(const ColorHead& head, std::uint64_t seed, int stage,
                     const std::filesystem::path& path) {
  const nlohmann::json shapes = head.shapes();
  nlohmann::json header = {{"head_type", shapes.at("head_type")},
                           {"shapes", shapes},
                           {"seed", seed},
                           {"stage", stage},
                           {"param_count", head.parameter_count()}};
  detail::ByteWriter w;
  const std::string text = header.dump() + "\n";
  w.bytes(text);
  for (double v : head.parameters()) w.f32(static_cast<float>(v));
  write_file_bytes(path, std::move(w).take());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::byte> bytes = read_file_bytes(path);
  const auto nl = std::find(bytes.begin(), bytes.end(), std::byte{'\n'});
  if (nl == bytes.end()) throw FormatError(path.string() + ": missing checkpoint header");
  const std::string text(reinterpret_cast<const char*>(bytes.data()),
                         static_cast<std::size_t>(nl - bytes.begin()));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
  Checkpoint ck;
  try {
    ck.head = make_head(header.at("shapes"));
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.stage = header.at("stage").get<int>();
    if (header.at("param_count").get<std::size_t>() != ck.head->parameter_count()) {
      throw FormatError(path.string() + ": parameter count does not match the head shapes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": incomplete checkpoint header: " + e.what());
  }
  const std::size_t offset = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  detail::ByteReader r(std::span<const std::byte>(bytes).subspan(offset), "checkpoint");
  auto params = ck.head->parameters();
  for (double& v : params) v = r.f32();
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after parameters");
  return ck;
}

}  // namespace upisp::mapper
