#include "upisp/mapper/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "upisp/errors.hpp"
#include "upisp/util/numeric.hpp"
#include "upisp/util/parallel.hpp"

namespace upisp::mapper {

namespace {

void validate_stage(const StageConfig& s, const char* name) {
  if (s.epochs < 1) throw ConfigError(std::string(name) + ": epochs must be >= 1");
  if (!std::isfinite(s.lr) || s.lr < 0.0) {
    throw ConfigError(std::string(name) + ": learning rate must be finite and >= 0");
  }
  s.weights.validate();
}

// Names the first non-finite term so the failure can be traced.
void check_finite(const objective::TotalLoss& loss, int source) {
  if (std::isfinite(loss.value)) return;
  const std::pair<const char*, double> terms[] = {{"mom", loss.terms.mom},
                                                   {"luma", loss.terms.luma},
                                                   {"chroma", loss.terms.chroma},
                                                   {"gram", loss.terms.gram},
                                                   {"tv", loss.terms.tv}};
  std::string bad = "total";
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      bad = name;
      break;
    }
  }
  throw NumericalError("non-finite loss in term '" + bad + "' for source " + std::to_string(source));
}

}  // namespace

void TrainConfig::validate() const {
  validate_stage(stage1, "stage1");
  validate_stage(stage2, "stage2");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  AdamWConfig{stage1.lr, beta1, beta2, eps, weight_decay}.validate();
  hist.validate();
}

TrainResult train(ColorHead& head, const ot::PairGraph& graph, std::span<const RgbImage> sources,
                  std::span<const RgbImage> targets, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (graph.entries.empty()) throw ConfigError("train: pair graph is empty");
  if (sources.size() != graph.source_names.size() || targets.size() != graph.target_names.size()) {
    throw ShapeError("train: patch lists do not match the pair graph");
  }
  for (const auto& e : graph.entries) {
    if (e.candidates.empty()) {
      throw ConfigError("train: source '" + graph.source_names.at(e.source) + "' has no candidates");
    }
  }

  AdamW opt(head.parameter_count(), {cfg.stage1.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  std::vector<std::size_t> order(graph.entries.size());
  std::vector<double> grad(head.parameter_count());
  const std::size_t batch = static_cast<std::size_t>(cfg.batch);

  int epoch = 0;
  for (int stage = 1; stage <= 2; ++stage) {
    const StageConfig& sc = stage == 1 ? cfg.stage1 : cfg.stage2;
    opt.set_lr(sc.lr);
    for (int e = 0; e < sc.epochs; ++e) {
      ++epoch;
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      CompensatedSum epoch_loss;
      CompensatedSum t_mom, t_luma, t_chroma, t_gram, t_tv;
      std::size_t batches = 0;

      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t n = std::min(batch, order.size() - start);
        std::vector<int> src(n), tgt(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& entry = graph.entries[order[start + i]];
          src[i] = entry.source;
          tgt[i] = ot::sample_target(graph, static_cast<int>(order[start + i]), rng);
        }

        std::vector<std::vector<double>> slot_grad(n);
        std::vector<objective::TotalLoss> slot_loss(n);
        const double scale = 1.0 / static_cast<double>(n);
        parallel_for(
            n,
            [&](std::size_t i) {
              const RgbImage& x = sources[src[i]];
              const RgbImage pred = head.forward(x);
              objective::TotalLoss loss =
                  objective::total_loss(pred, targets[tgt[i]], sc.weights, cfg.hist);
              check_finite(loss, src[i]);
              for (double& g : loss.grad.data()) g *= scale;
              slot_grad[i].assign(head.parameter_count(), 0.0);
              head.backward(x, loss.grad, slot_grad[i]);
              loss.grad = {};
              slot_loss[i] = std::move(loss);
            },
            cfg.workers);

        std::fill(grad.begin(), grad.end(), 0.0);
        CompensatedSum batch_loss;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += slot_grad[i][k];
          batch_loss.add(slot_loss[i].value);
          t_mom.add(slot_loss[i].terms.mom * scale);
          t_luma.add(slot_loss[i].terms.luma * scale);
          t_chroma.add(slot_loss[i].terms.chroma * scale);
          t_gram.add(slot_loss[i].terms.gram * scale);
          t_tv.add(slot_loss[i].terms.tv * scale);
        }
        for (double g : grad) {
          if (!std::isfinite(g)) throw NumericalError("non-finite parameter gradient");
        }
        opt.step(head.parameters(), grad);
        head.project();
        epoch_loss.add(batch_loss.value() * scale);
        ++batches;
      }

      const double inv = 1.0 / static_cast<double>(batches);
      EpochRecord rec;
      rec.stage = stage;
      rec.epoch = epoch;
      rec.mean_loss = epoch_loss.value() * inv;
      rec.terms = {t_mom.value() * inv, t_luma.value() * inv, t_chroma.value() * inv,
                   t_gram.value() * inv, t_tv.value() * inv};
      result.trace.push_back(rec);
      if (on_epoch) on_epoch(rec);
    }
  }
  result.steps = opt.steps();
  return result;
}

std::vector<RgbImage> infer(const ColorHead& head, std::span<const RawPatch> raws,
                            const rawproc::RawProcConfig& cfg, unsigned workers) {
  cfg.validate();
  std::vector<RgbImage> out(raws.size());
  parallel_for(
      raws.size(), [&](std::size_t i) { out[i] = head.forward(rawproc::preprocess(raws[i], cfg)); },
      workers);
  return out;
}

}  // namespace upisp::mapper
