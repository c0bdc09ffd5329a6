#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "upisp/imgcore/containers.hpp"
#include "upisp/otmatch/sinkhorn.hpp"

namespace upisp::ot {

inline constexpr int kDefaultTopImages = 10;
inline constexpr int kDefaultTopPatches = 8;

// For every row, column indices ordered by descending plan mass (ties by
// ascending index), truncated to k.
std::vector<std::vector<int>> top_k_images(const Matrix& plan, int k = kDefaultTopImages);

struct Candidate {
  int target = 0;  // index into PairGraph::target_names
  double weight = 0.0;
};

struct PairEntry {
  int source = 0;  // index into PairGraph::source_names
  std::vector<Candidate> candidates;  // descending weight, sums to 1
};

struct PairGraph {
  std::vector<std::string> source_names;
  std::vector<std::string> target_names;
  std::vector<PairEntry> entries;  // one per source patch, in source order

  const PairEntry& entry(int source) const;
  // Throws RangeError when weights do not sum to one or exceed max_k entries.
  void validate(int max_k = kDefaultTopPatches) const;
};

struct PairGraphConfig {
  int top_images = kDefaultTopImages;
  int top_patches = kDefaultTopPatches;
  SinkhornConfig sinkhorn{};
  unsigned workers = 1;
};

// Coarse-to-fine graph. For each source image, the candidate pool is every
// patch of its top-ranked target images; one patch-level Sinkhorn between
// the image's patches and the pool gives P_patch, and
//   w_st ~ P_patch(s, t) * P_image(I_s, I_t),
// truncated to the top patches per source and renormalized.
PairGraph build_pair_graph(const Matrix& image_plan, const EmbeddingSet& source_patches,
                           std::span<const int> source_parent,
                           const EmbeddingSet& target_patches,
                           std::span<const int> target_parent,
                           const PairGraphConfig& cfg = {});

// Baseline: each source gets k distinct uniformly drawn targets, equal weights.
PairGraph random_pair_graph(std::vector<std::string> source_names,
                            std::vector<std::string> target_names, int k,
                            std::uint64_t seed);

// Categorical draw over the stored weights.
int sample_target(const PairGraph& graph, int source, std::mt19937_64& rng);

// JSON lines: {"source_id": ..., "candidates": [{"target_id": ..., "weight": ...}]}
void write_pair_graph(const PairGraph& graph, const std::filesystem::path& path);
PairGraph read_pair_graph(const std::filesystem::path& path);

}  // namespace upisp::ot
