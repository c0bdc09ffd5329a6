#pragma once

#include "upisp/otmatch/costs.hpp"
#include "upisp/otmatch/sinkhorn.hpp"

namespace upisp::ot {

inline constexpr int kDefaultOuterIters = 10;

// Cost matrices rescaled the way fgw_match solves them: the cross cost by
// its maximum, both intra-domain matrices by their common maximum.
CostMatrices normalized(const CostMatrices& costs);

// Linearized Gromov-Wasserstein term
//   S_ij(T) = sum_{i', j'} (D_X(i, i') - D_Y(j, j'))^2 T_{i'j'}
Matrix gw_linearization(const Matrix& dist_source, const Matrix& dist_target,
                        const Matrix& coupling);

// <T, (1 - alpha) C> + alpha * sum_ij T_ij S_ij(T), on normalized(costs).
double fused_objective(const CostMatrices& costs, const Matrix& coupling);

// Entropic fused Gromov-Wasserstein by alternation: start from a b^T, then
// repeatedly solve sinkhorn((1 - alpha) C + alpha S(T)). Costs are
// normalized once up front so epsilon keeps one meaning across iterations.
TransportPlan fgw_match(const CostMatrices& costs, const Vector& a, const Vector& b,
                        const SinkhornConfig& cfg = {},
                        int outer_iters = kDefaultOuterIters);

}  // namespace upisp::ot
