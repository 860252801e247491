#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "ocsmm/errors.hpp"
#include "ocsmm/kernel.hpp"
#include "ocsmm/types.hpp"

namespace ocsmm {

template <typename Scalar>
struct SolverSettings {
  Scalar kkt_tol = Scalar(1e-6);
  /// Defaults to 1e5 * ell when unset.
  std::optional<long long> max_iter;
  Scalar bound_tol = Scalar(1e-9);

  void validate() const {
    if (!(kkt_tol > 0)) throw std::invalid_argument("kkt_tol must be positive");
    if (!(bound_tol > 0)) throw std::invalid_argument("bound_tol must be positive");
    if (max_iter && *max_iter <= 0) throw std::invalid_argument("max_iter must be positive");
  }
};

/// The one-class dual:  minimize 1/2 a^T K a  s.t.  0 <= a_i <= 1/(nu l), sum a_i = 1.
template <typename Scalar>
class DualProblem {
 public:
  DualProblem(Matrix<Scalar> gram, Scalar nu) : gram_(std::move(gram)), nu_(nu) {
    if (!(nu > 0) || nu > 1) throw std::invalid_argument("nu must lie in (0, 1]");
    if (gram_.rows() < 1 || gram_.rows() != gram_.cols())
      throw std::invalid_argument("gram must be a non-empty square matrix");
    if (!gram_.allFinite()) throw std::invalid_argument("gram contains non-finite values");
    const Scalar scale = std::max(Scalar(1), gram_.cwiseAbs().maxCoeff());
    if ((gram_ - gram_.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale)
      throw std::invalid_argument("gram is not symmetric");
  }

  DualProblem(const GramMatrix<Scalar>& gram, Scalar nu) : DualProblem(gram.entries, nu) {}

  const Matrix<Scalar>& gram() const { return gram_; }
  Scalar nu() const { return nu_; }
  Index size() const { return gram_.rows(); }
  Scalar upper_bound() const { return Scalar(1) / (nu_ * Scalar(size())); }

 private:
  Matrix<Scalar> gram_;
  Scalar nu_;
};

template <typename Scalar>
struct DualSolution {
  Vector<Scalar> alpha;
  Scalar rho = 0;
  Scalar objective = 0;
  /// 0 < alpha_i < 1/(nu l): on the margin.
  std::vector<Index> margin_sv;
  /// alpha_i at the upper bound: margin violators.
  std::vector<Index> bound_sv;
  Scalar kkt_residual = 0;
  long long iterations = 0;

  Index support_size(Scalar bound_tol = Scalar(1e-9)) const {
    return (alpha.array() > bound_tol).count();
  }
};

/// Raised when the solver exhausts its iteration budget. Carries the best
/// iterate found so far.
template <typename Scalar>
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, DualSolution<Scalar> best)
      : NumericalError(what), best_(std::move(best)) {}

  const DualSolution<Scalar>& best() const { return best_; }
  Scalar residual() const { return best_.kkt_residual; }

 private:
  DualSolution<Scalar> best_;
};

namespace detail {

enum class BoundStatus { lower, free, upper };

template <typename Scalar>
BoundStatus classify(Scalar alpha, Scalar upper, Scalar bound_tol) {
  if (alpha <= bound_tol) return BoundStatus::lower;
  if (alpha >= upper - bound_tol) return BoundStatus::upper;
  return BoundStatus::free;
}

}  // namespace detail

/// Offset rho from a feasible alpha. With margin SVs present rho is the mean
/// of f_i = (K alpha)_i over them; otherwise it is the midpoint between the
/// largest f over bound SVs and the smallest f over zero coefficients.
template <typename Scalar>
Scalar compute_rho(const Vector<Scalar>& alpha, const Matrix<Scalar>& gram, Scalar nu,
                   Scalar bound_tol = Scalar(1e-9)) {
  if (alpha.size() == 0) throw std::invalid_argument("compute_rho: empty alpha");
  if (gram.rows() != alpha.size() || gram.cols() != alpha.size())
    throw std::invalid_argument("compute_rho: gram size does not match alpha");
  const Scalar upper = Scalar(1) / (nu * Scalar(alpha.size()));
  const Vector<Scalar> f = gram * alpha;

  Scalar margin_sum = 0;
  Index margin_count = 0;
  Scalar lo = -std::numeric_limits<Scalar>::infinity();
  Scalar hi = std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < alpha.size(); ++i) {
    switch (detail::classify(alpha[i], upper, bound_tol)) {
      case detail::BoundStatus::free:
        margin_sum += f[i];
        ++margin_count;
        break;
      case detail::BoundStatus::upper:
        lo = std::max(lo, f[i]);
        break;
      case detail::BoundStatus::lower:
        hi = std::min(hi, f[i]);
        break;
    }
  }
  if (margin_count > 0) return margin_sum / Scalar(margin_count);
  if (!std::isfinite(hi)) return lo;
  if (!std::isfinite(lo)) return hi;
  return (lo + hi) / Scalar(2);
}

/// Largest violation of the KKT sign conditions on f_i - rho:
/// zero coefficients need f_i >= rho, bound ones f_i <= rho, free ones equality.
template <typename Scalar>
Scalar kkt_violation(const DualProblem<Scalar>& problem, const DualSolution<Scalar>& solution,
                     Scalar bound_tol = Scalar(1e-9)) {
  const Vector<Scalar> f = problem.gram() * solution.alpha;
  const Scalar upper = problem.upper_bound();
  Scalar worst = 0;
  for (Index i = 0; i < f.size(); ++i) {
    const Scalar gap = f[i] - solution.rho;
    Scalar residual = 0;
    switch (detail::classify(solution.alpha[i], upper, bound_tol)) {
      case detail::BoundStatus::lower: residual = std::max(Scalar(0), -gap); break;
      case detail::BoundStatus::upper: residual = std::max(Scalar(0), gap); break;
      case detail::BoundStatus::free: residual = std::abs(gap); break;
    }
    worst = std::max(worst, residual);
  }
  return worst;
}

namespace detail {

template <typename Scalar>
void finalize(const DualProblem<Scalar>& problem, DualSolution<Scalar>& sol, Scalar bound_tol) {
  const Scalar upper = problem.upper_bound();
  sol.objective = Scalar(0.5) * sol.alpha.dot(problem.gram() * sol.alpha);
  sol.rho = compute_rho(sol.alpha, problem.gram(), problem.nu(), bound_tol);
  sol.margin_sv.clear();
  sol.bound_sv.clear();
  for (Index i = 0; i < sol.alpha.size(); ++i) {
    const auto status = classify(sol.alpha[i], upper, bound_tol);
    if (status == BoundStatus::free) sol.margin_sv.push_back(i);
    if (status == BoundStatus::upper) sol.bound_sv.push_back(i);
  }
  sol.kkt_residual = kkt_violation(problem, sol, bound_tol);
}

}  // namespace detail

/// Sequential minimal optimization with maximal-violating-pair selection.
///
/// Each step moves mass from the coefficient with the largest gradient that
/// can still decrease to the one with the smallest gradient that can still
/// increase, which keeps sum(alpha) = 1 invariant. Terminates once the
/// gradient gap is at most `kkt_tol`. Ties are broken by lowest index, so the
/// result is deterministic.
template <typename Scalar>
DualSolution<Scalar> solve_smo(const DualProblem<Scalar>& problem,
                               const SolverSettings<Scalar>& settings = {}) {
  settings.validate();
  const Index n = problem.size();
  const Scalar upper = problem.upper_bound();
  const Matrix<Scalar>& k = problem.gram();

  DualSolution<Scalar> sol;
  sol.alpha = Vector<Scalar>::Zero(n);

  // At nu = 1 the box bound is 1/ell and the only feasible point is uniform.
  if (upper * Scalar(n) <= Scalar(1) + Scalar(1e-12)) {
    sol.alpha.setConstant(Scalar(1) / Scalar(n));
    detail::finalize(problem, sol, settings.bound_tol);
    return sol;
  }

  Scalar remaining = 1;
  for (Index i = 0; i < n && remaining > 0; ++i) {
    sol.alpha[i] = std::min(upper, remaining);
    remaining -= sol.alpha[i];
  }

  Vector<Scalar> grad = k * sol.alpha;
  const long long max_iter = settings.max_iter.value_or(100000LL * static_cast<long long>(n));
  const Scalar tau = Scalar(1e-12);

  for (long long iter = 0;; ++iter) {
    Index up = -1;
    Index down = -1;
    for (Index i = 0; i < n; ++i) {
      if (sol.alpha[i] < upper && (up < 0 || grad[i] < grad[up])) up = i;
      if (sol.alpha[i] > 0 && (down < 0 || grad[i] > grad[down])) down = i;
    }
    const Scalar gap = grad[down] - grad[up];
    if (gap <= settings.kkt_tol || up == down) {
      sol.iterations = iter;
      break;
    }
    if (iter >= max_iter) {
      sol.iterations = iter;
      detail::finalize(problem, sol, settings.bound_tol);
      throw SolverError<Scalar>("solve_smo: iteration limit reached with gradient gap " +
                                    std::to_string(static_cast<double>(gap)),
                                sol);
    }

    const Scalar curvature = std::max(k(up, up) + k(down, down) - Scalar(2) * k(up, down), tau);
    Scalar step = gap / curvature;
    const Scalar room_up = upper - sol.alpha[up];
    const Scalar room_down = sol.alpha[down];
    if (step >= room_up || step >= room_down) {
      step = std::min(room_up, room_down);
      if (room_up <= room_down) {
        sol.alpha[up] = upper;
        sol.alpha[down] -= step;
        if (room_up == room_down) sol.alpha[down] = 0;
      } else {
        sol.alpha[up] += step;
        sol.alpha[down] = 0;
      }
    } else {
      sol.alpha[up] += step;
      sol.alpha[down] -= step;
    }
    grad += step * (k.col(up) - k.col(down));
  }

  detail::finalize(problem, sol, settings.bound_tol);
  return sol;
}

/// Euclidean projection onto {a : sum a = 1, 0 <= a <= upper}. The sum of
/// clip(v - t, 0, upper) is piecewise linear and non-increasing in t; the root
/// is found exactly between consecutive breakpoints.
template <typename Scalar>
Vector<Scalar> project_capped_simplex(const Vector<Scalar>& v, Scalar upper) {
  const Index n = v.size();
  auto clipped_sum = [&](Scalar t) { return (v.array() - t).max(Scalar(0)).min(upper).sum(); };

  std::vector<Scalar> breaks;
  breaks.reserve(2 * n);
  for (Index i = 0; i < n; ++i) {
    breaks.push_back(v[i]);
    breaks.push_back(v[i] - upper);
  }
  std::sort(breaks.begin(), breaks.end());

  // clipped_sum(breaks.front()) = n * upper >= 1 and clipped_sum(breaks.back()) = 0.
  std::size_t hi = 0;
  while (hi < breaks.size() && clipped_sum(breaks[hi]) >= Scalar(1)) ++hi;
  Scalar t;
  if (hi == 0) {
    t = breaks.front();
  } else if (hi == breaks.size()) {
    t = breaks.back();
  } else {
    const Scalar t0 = breaks[hi - 1];
    const Scalar t1 = breaks[hi];
    const Scalar s0 = clipped_sum(t0);
    const Scalar s1 = clipped_sum(t1);
    t = (s0 == s1) ? t0 : t0 + (s0 - Scalar(1)) * (t1 - t0) / (s0 - s1);
  }
  return (v.array() - t).max(Scalar(0)).min(upper).matrix();
}

/// Reference solver: projected gradient descent with step 1/L (L the largest
/// Gram eigenvalue) and exact projection. The objective is non-increasing.
/// Stops early once an iteration leaves alpha unchanged up to rounding.
template <typename Scalar>
DualSolution<Scalar> brute_force_solve(const DualProblem<Scalar>& problem, long long iters,
                                       std::vector<Scalar>* objective_trace = nullptr,
                                       Scalar bound_tol = Scalar(1e-9)) {
  if (iters <= 0) throw std::invalid_argument("brute_force_solve: iters must be positive");
  if (problem.size() > 50) throw std::invalid_argument("brute_force_solve: at most 50 groups");
  const Index n = problem.size();
  const Matrix<Scalar>& k = problem.gram();
  const Scalar upper = problem.upper_bound();

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(k, Eigen::EigenvaluesOnly);
  const Scalar lipschitz = std::max(eig.eigenvalues().maxCoeff(), Scalar(1e-12));

  DualSolution<Scalar> sol;
  sol.alpha = Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  if (objective_trace) objective_trace->push_back(Scalar(0.5) * sol.alpha.dot(k * sol.alpha));

  long long iter = 0;
  for (; iter < iters; ++iter) {
    Vector<Scalar> next = project_capped_simplex<Scalar>(sol.alpha - (k * sol.alpha) / lipschitz,
                                                         upper);
    const bool stalled = (next - sol.alpha).cwiseAbs().maxCoeff() <=
                         Scalar(4) * std::numeric_limits<Scalar>::epsilon();
    sol.alpha = std::move(next);
    if (objective_trace) objective_trace->push_back(Scalar(0.5) * sol.alpha.dot(k * sol.alpha));
    if (stalled) break;
  }
  sol.iterations = iter;
  detail::finalize(problem, sol, bound_tol);
  return sol;
}

}  // namespace ocsmm
