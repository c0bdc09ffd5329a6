#pragma once

#include <span>

#include <Eigen/Dense>

#include "upisp/imgcore/containers.hpp"

namespace upisp::ot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultAlpha = 0.5;

struct CostMatrices {
  Matrix cross;        // N_s x N_t, ||x_i - y_j||^2
  Matrix dist_source;  // N_s x N_s, ||x_i - x_i'||^2
  Matrix dist_target;  // N_t x N_t, ||y_j - y_j'||^2
  double alpha = kDefaultAlpha;
};

// Row i of the result is the embedding of record i, widened to double.
Matrix to_matrix(const EmbeddingSet& set);

// Squared Euclidean distance between every row of `a` and every row of `b`.
Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b);

// Throws ShapeError on a dimension mismatch or an empty set, RangeError if
// alpha lies outside [0, 1].
CostMatrices build_costs(const EmbeddingSet& source, const EmbeddingSet& target,
                         double alpha = kDefaultAlpha);

// Concatenates several descriptor blocks for the same records. Each block is
// L2-normalized per record before concatenation so that all blocks weigh the
// same. Record order and names follow the first block.
EmbeddingSet compose_descriptors(std::span<const EmbeddingSet> blocks);

// Uniform probability vector of length n.
Vector uniform_marginal(Eigen::Index n);

}  // namespace upisp::ot
