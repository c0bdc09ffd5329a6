#include "upisp/otmatch/pair_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "upisp/errors.hpp"
#include "upisp/util/parallel.hpp"

namespace upisp::ot {

std::vector<std::vector<int>> top_k_images(const Matrix& plan, int k) {
  if (k < 1) throw ConfigError("top_k_images: k must be at least 1");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(plan.rows()));
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    std::vector<int> order(static_cast<std::size_t>(plan.cols()));
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](int l, int r) {
                        if (plan(i, l) != plan(i, r)) return plan(i, l) > plan(i, r);
                        return l < r;
                      });
    order.resize(keep);
    out[static_cast<std::size_t>(i)] = std::move(order);
  }
  return out;
}

const PairEntry& PairGraph::entry(int source) const {
  if (source < 0 || static_cast<std::size_t>(source) >= entries.size() ||
      entries[static_cast<std::size_t>(source)].candidates.empty()) {
    throw RangeError("pair graph has no entry for source " + std::to_string(source));
  }
  return entries[static_cast<std::size_t>(source)];
}

void PairGraph::validate(int max_k) const {
  for (const auto& e : entries) {
    if (static_cast<int>(e.candidates.size()) > max_k) {
      throw RangeError("pair graph entry exceeds " + std::to_string(max_k) + " candidates");
    }
    double s = 0.0;
    for (const auto& c : e.candidates) {
      if (!(c.weight >= 0.0)) throw RangeError("pair graph weight is negative or NaN");
      if (c.target < 0 || static_cast<std::size_t>(c.target) >= target_names.size()) {
        throw RangeError("pair graph target index out of range");
      }
      s += c.weight;
    }
    if (!e.candidates.empty() && std::abs(s - 1.0) > 1e-9) {
      throw RangeError("pair graph weights of source " + std::to_string(e.source) +
                       " sum to " + std::to_string(s));
    }
  }
}

namespace {

std::vector<std::string> names_of(const EmbeddingSet& set) {
  std::vector<std::string> out;
  out.reserve(set.size());
  for (const auto& r : set.records()) out.push_back(r.name);
  return out;
}

void keep_top(std::vector<Candidate>& cands, int k) {
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& l, const Candidate& r) {
    if (l.weight != r.weight) return l.weight > r.weight;
    return l.target < r.target;
  });
  if (static_cast<int>(cands.size()) > k) cands.resize(static_cast<std::size_t>(k));
  double total = 0.0;
  for (const auto& c : cands) total += c.weight;
  if (!(total > 0.0)) throw NumericalError("pair graph: all candidate weights vanished");
  for (auto& c : cands) c.weight /= total;
}

}  // namespace

PairGraph build_pair_graph(const Matrix& image_plan, const EmbeddingSet& source_patches,
                           std::span<const int> source_parent,
                           const EmbeddingSet& target_patches,
                           std::span<const int> target_parent, const PairGraphConfig& cfg) {
  if (cfg.top_patches < 1) throw ConfigError("pair graph: top_patches must be at least 1");
  if (source_parent.size() != source_patches.size() ||
      target_parent.size() != target_patches.size()) {
    throw ShapeError("pair graph: every patch needs a parent image");
  }
  if (source_patches.dim() != target_patches.dim()) {
    throw ShapeError("pair graph: patch embedding dimensions differ");
  }
  for (int p : source_parent) {
    if (p < 0 || p >= image_plan.rows()) throw ShapeError("pair graph: source parent out of range");
  }
  for (int p : target_parent) {
    if (p < 0 || p >= image_plan.cols()) throw ShapeError("pair graph: target parent out of range");
  }

  const Matrix xs = to_matrix(source_patches);
  const Matrix ys = to_matrix(target_patches);
  const auto ranked = top_k_images(image_plan, cfg.top_images);

  std::vector<std::vector<int>> patches_of_source(static_cast<std::size_t>(image_plan.rows()));
  for (std::size_t s = 0; s < source_parent.size(); ++s) {
    patches_of_source[static_cast<std::size_t>(source_parent[s])].push_back(static_cast<int>(s));
  }
  std::vector<std::vector<int>> patches_of_target(static_cast<std::size_t>(image_plan.cols()));
  for (std::size_t t = 0; t < target_parent.size(); ++t) {
    patches_of_target[static_cast<std::size_t>(target_parent[t])].push_back(static_cast<int>(t));
  }

  PairGraph graph;
  graph.source_names = names_of(source_patches);
  graph.target_names = names_of(target_patches);
  graph.entries.resize(source_patches.size());
  for (std::size_t s = 0; s < graph.entries.size(); ++s) graph.entries[s].source = static_cast<int>(s);

  parallel_for(
      static_cast<std::size_t>(image_plan.rows()),
      [&](std::size_t img) {
        const auto& srcs = patches_of_source[img];
        if (srcs.empty()) return;
        std::vector<int> pool;
        for (int t_img : ranked[img]) {
          const auto& members = patches_of_target[static_cast<std::size_t>(t_img)];
          pool.insert(pool.end(), members.begin(), members.end());
        }
        if (pool.empty()) {
          throw ConfigError("pair graph: empty candidate pool for source image " +
                            std::to_string(img));
        }
        Matrix xsub(static_cast<Eigen::Index>(srcs.size()), xs.cols());
        for (std::size_t r = 0; r < srcs.size(); ++r) xsub.row(static_cast<Eigen::Index>(r)) = xs.row(srcs[r]);
        Matrix ysub(static_cast<Eigen::Index>(pool.size()), ys.cols());
        for (std::size_t r = 0; r < pool.size(); ++r) ysub.row(static_cast<Eigen::Index>(r)) = ys.row(pool[r]);

        const TransportPlan patch_plan =
            sinkhorn(pairwise_sq_dist(xsub, ysub), uniform_marginal(xsub.rows()),
                     uniform_marginal(ysub.rows()), cfg.sinkhorn);

        for (std::size_t r = 0; r < srcs.size(); ++r) {
          std::vector<Candidate> cands;
          cands.reserve(pool.size());
          for (std::size_t q = 0; q < pool.size(); ++q) {
            const int t = pool[q];
            const double w = patch_plan.plan(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) *
                             image_plan(static_cast<Eigen::Index>(img), target_parent[static_cast<std::size_t>(t)]);
            cands.push_back({t, w});
          }
          keep_top(cands, cfg.top_patches);
          graph.entries[static_cast<std::size_t>(srcs[r])].candidates = std::move(cands);
        }
      },
      cfg.workers);
  return graph;
}

PairGraph random_pair_graph(std::vector<std::string> source_names,
                            std::vector<std::string> target_names, int k, std::uint64_t seed) {
  if (target_names.empty()) throw ConfigError("random pair graph: no targets");
  if (k < 1) throw ConfigError("random pair graph: k must be at least 1");
  PairGraph graph;
  graph.source_names = std::move(source_names);
  graph.target_names = std::move(target_names);
  std::mt19937_64 rng(seed);
  const int n_tgt = static_cast<int>(graph.target_names.size());
  const int keep = std::min(k, n_tgt);
  std::vector<int> all(static_cast<std::size_t>(n_tgt));
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t s = 0; s < graph.source_names.size(); ++s) {
    std::vector<int> chosen;
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), keep, rng);
    PairEntry e;
    e.source = static_cast<int>(s);
    for (int t : chosen) e.candidates.push_back({t, 1.0 / keep});
    graph.entries.push_back(std::move(e));
  }
  return graph;
}

int sample_target(const PairGraph& graph, int source, std::mt19937_64& rng) {
  const PairEntry& e = graph.entry(source);
  if (e.candidates.size() == 1) return e.candidates.front().target;
  std::vector<double> w;
  w.reserve(e.candidates.size());
  for (const auto& c : e.candidates) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return e.candidates[pick(rng)].target;
}

void write_pair_graph(const PairGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write pair graph " + path.string());
  for (const auto& e : graph.entries) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : e.candidates) {
      cands.push_back({{"target_id", graph.target_names[static_cast<std::size_t>(c.target)]},
                       {"weight", c.weight}});
    }
    out << nlohmann::json{{"source_id", graph.source_names[static_cast<std::size_t>(e.source)]},
                          {"candidates", std::move(cands)}}
               .dump()
        << '\n';
  }
  if (!out) throw Error("cannot write pair graph " + path.string());
}

PairGraph read_pair_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open pair graph " + path.string());
  PairGraph graph;
  std::unordered_map<std::string, int> target_index;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PairEntry e;
      e.source = static_cast<int>(graph.source_names.size());
      graph.source_names.push_back(j.at("source_id").get<std::string>());
      for (const auto& c : j.at("candidates")) {
        const auto name = c.at("target_id").get<std::string>();
        auto [it, inserted] = target_index.try_emplace(name, static_cast<int>(graph.target_names.size()));
        if (inserted) graph.target_names.push_back(name);
        e.candidates.push_back({it->second, c.at("weight").get<double>()});
      }
      graph.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return graph;
}

}  // namespace upisp::ot
