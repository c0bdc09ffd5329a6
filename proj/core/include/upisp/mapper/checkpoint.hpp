#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "upisp/mapper/heads.hpp"

namespace upisp::mapper {

struct Checkpoint {
  std::unique_ptr<ColorHead> head;
  std::uint64_t seed = 0;
  int stage = 0;
};

// One JSON header line {head_type, shapes, seed, stage, param_count}, then
// the parameters as little-endian f32.
void save_checkpoint(const ColorHead& head, std::uint64_t seed, int stage,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace upisp::mapper
