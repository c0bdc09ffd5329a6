#include "upisp/otmatch/costs.hpp"

#include <cmath>
#include <string>

#include "upisp/errors.hpp"

namespace upisp::ot {

Matrix to_matrix(const EmbeddingSet& set) {
  Matrix m(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(set.dim()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& v = set[i].values;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!std::isfinite(v[k])) {
        throw RangeError("embedding '" + set[i].name + "' is not finite");
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[k];
    }
  }
  return m;
}

Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("pairwise_sq_dist: dimension mismatch");
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    }
  }
  return d;
}

CostMatrices build_costs(const EmbeddingSet& source, const EmbeddingSet& target,
                         double alpha) {
  if (source.empty() || target.empty()) throw ShapeError("build_costs: empty embedding set");
  if (source.dim() != target.dim()) {
    throw ShapeError("build_costs: source dim " + std::to_string(source.dim()) +
                     " != target dim " + std::to_string(target.dim()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("build_costs: alpha must lie in [0, 1]");
  const Matrix x = to_matrix(source);
  const Matrix y = to_matrix(target);
  CostMatrices c;
  c.cross = pairwise_sq_dist(x, y);
  c.dist_source = pairwise_sq_dist(x, x);
  c.dist_target = pairwise_sq_dist(y, y);
  c.alpha = alpha;
  return c;
}

EmbeddingSet compose_descriptors(std::span<const EmbeddingSet> blocks) {
  if (blocks.empty()) throw ShapeError("compose_descriptors: no blocks");
  const EmbeddingSet& first = blocks.front();
  std::uint32_t dim = 0;
  for (const auto& b : blocks) {
    if (b.size() != first.size()) {
      throw ShapeError("compose_descriptors: blocks have different record counts");
    }
    dim += b.dim();
  }
  EmbeddingSet out(dim);
  for (std::size_t i = 0; i < first.size(); ++i) {
    const std::string& name = first[i].name;
    std::vector<float> joined;
    joined.reserve(dim);
    for (const auto& block : blocks) {
      const auto idx = block.find(name);
      if (!idx) throw FormatError("compose_descriptors: '" + name + "' missing from a block");
      const auto& v = block[*idx].values;
      double norm = 0.0;
      for (float e : v) norm += static_cast<double>(e) * e;
      norm = std::sqrt(norm);
      for (float e : v) joined.push_back(norm > 0.0 ? static_cast<float>(e / norm) : 0.0f);
    }
    out.add(name, std::move(joined));
  }
  return out;
}

Vector uniform_marginal(Eigen::Index n) {
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

}  // namespace upisp::ot
