#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "upisp/imgcore/raw.hpp"
#include "upisp/mapper/heads.hpp"
#include "upisp/mapper/optimizer.hpp"
#include "upisp/objective/losses.hpp"
#include "upisp/otmatch/pair_graph.hpp"
#include "upisp/rawproc/rawproc.hpp"

namespace upisp::mapper {

struct StageConfig {
  int epochs = 10;
  double lr = 1e-4;
  objective::LossWeights weights{};
};

struct TrainConfig {
  StageConfig stage1{10, 1e-4, objective::LossWeights::stage1()};
  StageConfig stage2{5, 1e-4, objective::LossWeights::stage2()};
  int batch = 24;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  objective::SoftHistogramSpec hist{};

  void validate() const;
};

struct EpochRecord {
  int stage = 1;
  int epoch = 0;  // 1-based within the run
  double mean_loss = 0.0;
  objective::LossTerms terms;  // unweighted means
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  std::uint64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Two-stage training over sampled pseudo-pairs. `sources` follow
// graph.source_names and `targets` follow graph.target_names. Each epoch
// shuffles the sources, draws one target per source from its candidates,
// and takes one AdamW step per batch. One optimizer state spans both stages.
// Results depend only on the seed, not on `workers`.
TrainResult train(ColorHead& head, const ot::PairGraph& graph, std::span<const RgbImage> sources,
                  std::span<const RgbImage> targets, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

std::vector<RgbImage> infer(const ColorHead& head, std::span<const RawPatch> raws,
                            const rawproc::RawProcConfig& cfg, unsigned workers = 1);

}  // namespace upisp::mapper
