#include "upisp/otmatch/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "upisp/errors.hpp"

namespace upisp::ot {

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("sinkhorn: epsilon must be positive");
  if (!(tol > 0.0)) throw ConfigError("sinkhorn: tol must be positive");
  if (max_iters < 1) throw ConfigError("sinkhorn: max_iters must be at least 1");
}

double marginal_violation(const Matrix& plan, const Vector& a, const Vector& b) {
  return (plan.rowwise().sum() - a).lpNorm<1>() + (plan.colwise().sum().transpose() - b).lpNorm<1>();
}

namespace {

void check_marginal(const Vector& m, const char* which) {
  if (m.size() == 0) throw ShapeError(std::string("sinkhorn: empty marginal ") + which);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!(m[i] > 0.0) || !std::isfinite(m[i])) {
      throw RangeError(std::string("sinkhorn: marginal ") + which + " must be strictly positive");
    }
  }
  if (std::abs(m.sum() - 1.0) > 1e-9) {
    throw RangeError(std::string("sinkhorn: marginal ") + which + " must sum to 1");
  }
}

// eps * log sum_k exp(z_k / eps), stabilized by the running maximum.
template <class Fn>
double soft_min_sum(Eigen::Index n, double eps, Fn&& value) {
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) hi = std::max(hi, value(k));
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) s += std::exp((value(k) - hi) / eps);
  return hi + eps * std::log(s);
}

}  // namespace

TransportPlan sinkhorn(const Matrix& cost, const Vector& a, const Vector& b,
                       const SinkhornConfig& cfg) {
  cfg.validate();
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw ShapeError("sinkhorn: cost is " + std::to_string(cost.rows()) + "x" +
                     std::to_string(cost.cols()) + " but marginals have sizes " +
                     std::to_string(a.size()) + ", " + std::to_string(b.size()));
  }
  check_marginal(a, "a");
  check_marginal(b, "b");
  if (!cost.allFinite()) throw NumericalError("sinkhorn: cost contains non-finite entries");

  Matrix c = cost;
  if (cfg.normalize_cost) {
    const double hi = c.maxCoeff();
    if (hi > 0.0) c /= hi;
  }

  const Eigen::Index n = c.rows(), m = c.cols();
  const double eps = cfg.epsilon;
  const Vector log_a = a.array().log();
  const Vector log_b = b.array().log();
  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  Vector f_next(n);

  TransportPlan out;
  out.a = a;
  out.b = b;

  int iter = 0;
  bool converged = false;
  for (; iter < cfg.max_iters; ++iter) {
    // Row update. The shift between old and new f also yields the row sums
    // of the current plan: r_i = a_i exp((f_i - f_next_i) / eps).
    double row_violation = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = soft_min_sum(m, eps, [&](Eigen::Index j) { return g[j] - c(i, j); });
      f_next[i] = eps * log_a[i] - lse;
      row_violation += std::abs(a[i] * std::exp((f[i] - f_next[i]) / eps) - a[i]);
    }
    if (iter > 0 && row_violation < cfg.tol) {
      converged = true;
      break;
    }
    f = f_next;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lse = soft_min_sum(n, eps, [&](Eigen::Index i) { return f[i] - c(i, j); });
      g[j] = eps * log_b[j] - lse;
    }
    if (!f.allFinite() || !g.allFinite()) {
      throw NumericalError("sinkhorn: dual potentials became non-finite at iteration " +
                           std::to_string(iter));
    }
  }

  out.plan.resize(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) out.plan(i, j) = std::exp((f[i] + g[j] - c(i, j)) / eps);
  }
  if (!out.plan.allFinite()) throw NumericalError("sinkhorn: plan contains non-finite entries");
  out.iterations = iter;
  out.violation = marginal_violation(out.plan, a, b);
  out.converged = converged && out.violation < cfg.tol;
  return out;
}

}  // namespace upisp::ot
