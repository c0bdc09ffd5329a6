#pragma once

#include "upisp/otmatch/costs.hpp"

namespace upisp::ot {

struct SinkhornConfig {
  double epsilon = 0.05;
  int max_iters = 1000;
  double tol = 1e-6;             // L1 marginal violation
  bool normalize_cost = true;    // divide the cost by its largest entry

  void validate() const;
};

struct TransportPlan {
  Matrix plan;
  Vector a;
  Vector b;
  bool converged = false;
  int iterations = 0;
  double violation = 0.0;  // ||P 1 - a||_1 + ||P^T 1 - b||_1
};

// Entropic OT by alternating marginal scaling in the log domain:
//   P = diag(u) exp(-cost / eps) diag(v)
// Stops once the marginal violation is below tol or after max_iters; in the
// latter case the plan is returned with converged = false. Throws
// ShapeError for mismatched marginals, RangeError for non-positive or
// non-normalized marginals and NumericalError for non-finite costs or
// potentials.
TransportPlan sinkhorn(const Matrix& cost, const Vector& a, const Vector& b,
                       const SinkhornConfig& cfg = {});

double marginal_violation(const Matrix& plan, const Vector& a, const Vector& b);

}  // namespace upisp::ot
