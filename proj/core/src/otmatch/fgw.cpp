#include "upisp/otmatch/fgw.hpp"

#include <algorithm>
#include <string>

#include "upisp/errors.hpp"

namespace upisp::ot {

namespace {

void check_costs(const CostMatrices& c) {
  const auto ns = c.cross.rows(), nt = c.cross.cols();
  if (c.dist_source.rows() != ns || c.dist_source.cols() != ns ||
      c.dist_target.rows() != nt || c.dist_target.cols() != nt) {
    throw ShapeError("fgw: intra-domain matrices do not match the cross cost");
  }
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw RangeError("fgw: alpha must lie in [0, 1]");
  if (!c.cross.allFinite() || !c.dist_source.allFinite() || !c.dist_target.allFinite()) {
    throw NumericalError("fgw: cost matrices contain non-finite entries");
  }
}

}  // namespace

CostMatrices normalized(const CostMatrices& costs) {
  CostMatrices n = costs;
  const double cross_max = n.cross.size() ? n.cross.maxCoeff() : 0.0;
  if (cross_max > 0.0) n.cross /= cross_max;
  const double intra_max = std::max(n.dist_source.size() ? n.dist_source.maxCoeff() : 0.0,
                                    n.dist_target.size() ? n.dist_target.maxCoeff() : 0.0);
  if (intra_max > 0.0) {
    n.dist_source /= intra_max;
    n.dist_target /= intra_max;
  }
  return n;
}

Matrix gw_linearization(const Matrix& dist_source, const Matrix& dist_target,
                        const Matrix& coupling) {
  // (D_X(i,i') - D_Y(j,j'))^2 expands into two separable terms and one
  // cross product, which avoids the O(N^2 M^2) four-index sum.
  const Vector rows = coupling.rowwise().sum();
  const Vector cols = coupling.colwise().sum().transpose();
  const Vector source_term = dist_source.array().square().matrix() * rows;
  const Vector target_term = dist_target.array().square().matrix() * cols;
  Matrix s = -2.0 * dist_source * coupling * dist_target.transpose();
  s.colwise() += source_term;
  s.rowwise() += target_term.transpose();
  return s;
}

double fused_objective(const CostMatrices& costs, const Matrix& coupling) {
  check_costs(costs);
  const CostMatrices n = normalized(costs);
  const double linear = (coupling.array() * n.cross.array()).sum();
  const double quadratic =
      (coupling.array() * gw_linearization(n.dist_source, n.dist_target, coupling).array()).sum();
  return (1.0 - n.alpha) * linear + n.alpha * quadratic;
}

TransportPlan fgw_match(const CostMatrices& costs, const Vector& a, const Vector& b,
                        const SinkhornConfig& cfg, int outer_iters) {
  check_costs(costs);
  if (outer_iters < 1) throw ConfigError("fgw: outer_iters must be at least 1");
  if (a.size() != costs.cross.rows() || b.size() != costs.cross.cols()) {
    throw ShapeError("fgw: marginal sizes do not match the cost");
  }
  const CostMatrices n = normalized(costs);
  SinkhornConfig inner = cfg;
  inner.normalize_cost = false;

  Matrix coupling = a * b.transpose();
  TransportPlan plan;
  for (int it = 0; it < outer_iters; ++it) {
    Matrix fused = (1.0 - n.alpha) * n.cross;
    if (n.alpha > 0.0) {
      fused += n.alpha * gw_linearization(n.dist_source, n.dist_target, coupling);
    }
    plan = sinkhorn(fused, a, b, inner);
    coupling = plan.plan;
  }
  return plan;
}

}  // namespace upisp::ot
