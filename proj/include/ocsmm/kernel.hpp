#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "ocsmm/errors.hpp"
#include "ocsmm/types.hpp"

namespace ocsmm {

/// Symmetric matrix of distribution-kernel values together with the kernel
/// configuration that produced it.
template <typename Scalar>
struct GramMatrix {
  Matrix<Scalar> entries;
  KernelConfig<Scalar> config;

  Index size() const { return entries.rows(); }
};

/// Gaussian RBF kernel exp(-|x - y|^2 / (2 sigma_sq)) between two points.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar base_rbf(const Eigen::MatrixBase<DerivedA>& x,
                                   const Eigen::MatrixBase<DerivedB>& y,
                                   typename DerivedA::Scalar sigma_sq) {
  using Scalar = typename DerivedA::Scalar;
  if (x.size() != y.size()) throw std::invalid_argument("base_rbf: dimension mismatch");
  if (!(sigma_sq > 0)) throw std::invalid_argument("base_rbf: sigma_sq must be positive");
  const Scalar sq = (x.derived() - y.derived()).squaredNorm();
  return std::exp(-sq / (Scalar(2) * sigma_sq));
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> pool_points(std::span<const DistributionRepr<Scalar>> groups) {
  if (groups.empty()) throw std::invalid_argument("median_heuristic: no groups");
  Index total = 0;
  const Index d = groups.front().dim();
  for (const auto& g : groups) {
    if (!g.is_empirical())
      throw std::invalid_argument("median_heuristic: requires empirical groups");
    if (g.dim() != d) throw std::invalid_argument("median_heuristic: dimension mismatch");
    total += g.as_empirical().size();
  }
  Matrix<Scalar> pooled(total, d);
  Index row = 0;
  for (const auto& g : groups) {
    const auto& pts = g.as_empirical().points;
    pooled.middleRows(row, pts.rows()) = pts;
    row += pts.rows();
  }
  return pooled;
}

// Calls visit(d2) for every unordered pair {i, j}, i < j, of rows.
template <typename Scalar, typename Visit>
void for_each_pair_distance(const Matrix<Scalar>& points, Visit&& visit) {
  const Index n = points.rows();
  Vector<Scalar> d2;
  for (Index i = 0; i + 1 < n; ++i) {
    const Index rest = n - i - 1;
    d2 = (points.bottomRows(rest).rowwise() - points.row(i)).rowwise().squaredNorm();
    for (Index k = 0; k < rest; ++k) visit(d2[k]);
  }
}

/// Median of squared distances over all unordered pairs of rows. Small
/// inputs are selected directly; large ones by a two-pass bucketed select
/// so the full pair list is never materialized. Both paths are exact.
template <typename Scalar>
Scalar median_pair_sq_distance(const Matrix<Scalar>& points,
                               std::uint64_t direct_limit = std::uint64_t{1} << 22) {
  const auto n = static_cast<std::uint64_t>(points.rows());
  const std::uint64_t pairs = n * (n - 1) / 2;
  if (n < 2 || pairs == 0) throw NumericalError("degenerate bandwidth: fewer than two points");

  const std::uint64_t hi_rank = pairs / 2;
  const std::uint64_t lo_rank = (pairs % 2 == 1) ? hi_rank : hi_rank - 1;

  if (pairs <= direct_limit) {
    std::vector<Scalar> all;
    all.reserve(pairs);
    for_each_pair_distance(points, [&](Scalar v) { all.push_back(v); });
    std::nth_element(all.begin(), all.begin() + hi_rank, all.end());
    const Scalar hi = all[hi_rank];
    if (lo_rank == hi_rank) return hi;
    const Scalar lo = *std::max_element(all.begin(), all.begin() + hi_rank);
    return (lo + hi) / Scalar(2);
  }

  const Scalar upper = (points.colwise().maxCoeff() - points.colwise().minCoeff()).squaredNorm();
  if (!(upper > 0)) return Scalar(0);

  constexpr std::size_t buckets = std::size_t{1} << 20;
  const Scalar scale = Scalar(buckets) / upper;
  auto bucket_of = [&](Scalar v) {
    const auto b = static_cast<std::size_t>(v * scale);
    return std::min(b, buckets - 1);
  };

  std::vector<std::uint64_t> counts(buckets, 0);
  for_each_pair_distance(points, [&](Scalar v) { ++counts[bucket_of(v)]; });

  // Locate the bucket holding each requested rank, and the rank's offset in it.
  auto locate = [&](std::uint64_t rank) {
    std::uint64_t before = 0;
    for (std::size_t b = 0; b < buckets; ++b) {
      if (before + counts[b] > rank) return std::pair{b, rank - before};
      before += counts[b];
    }
    throw NumericalError("median selection failed");
  };
  const auto [lo_bucket, lo_offset] = locate(lo_rank);
  const auto [hi_bucket, hi_offset] = locate(hi_rank);

  std::vector<Scalar> lo_vals, hi_vals;
  for_each_pair_distance(points, [&](Scalar v) {
    const auto b = bucket_of(v);
    if (b == lo_bucket) lo_vals.push_back(v);
    if (b == hi_bucket && hi_bucket != lo_bucket) hi_vals.push_back(v);
  });
  if (hi_bucket == lo_bucket) hi_vals = lo_vals;

  std::nth_element(lo_vals.begin(), lo_vals.begin() + lo_offset, lo_vals.end());
  const Scalar lo = lo_vals[lo_offset];
  std::nth_element(hi_vals.begin(), hi_vals.begin() + hi_offset, hi_vals.end());
  const Scalar hi = hi_vals[hi_offset];
  return (lo + hi) / Scalar(2);
}

}  // namespace detail

/// Median heuristic for sigma^2: the median squared Euclidean distance over
/// all unordered pairs of pooled points (self-pairs excluded). For an even
/// pair count the two middle values are averaged.
template <typename Scalar>
Scalar median_heuristic(std::span<const DistributionRepr<Scalar>> groups) {
  const Matrix<Scalar> pooled = detail::pool_points(groups);
  const Scalar median = detail::median_pair_sq_distance(pooled);
  if (!(median > 0)) throw NumericalError("degenerate bandwidth: median squared distance is zero");
  return median;
}

template <typename Scalar>
Scalar median_heuristic(const std::vector<DistributionRepr<Scalar>>& groups) {
  return median_heuristic(std::span<const DistributionRepr<Scalar>>(groups));
}

/// Empirical mean-map kernel: the average base kernel value over all
/// cross pairs of the two samples.
template <typename Scalar>
Scalar emp_mean_kernel(const EmpiricalSample<Scalar>& a, const EmpiricalSample<Scalar>& b,
                       Scalar sigma_sq) {
  if (a.size() < 1 || b.size() < 1) throw std::invalid_argument("emp_mean_kernel: empty group");
  if (a.points.cols() != b.points.cols())
    throw std::invalid_argument("emp_mean_kernel: dimension mismatch");
  if (!(sigma_sq > 0)) throw std::invalid_argument("emp_mean_kernel: sigma_sq must be positive");

  const Scalar scale = Scalar(-1) / (Scalar(2) * sigma_sq);
  Scalar sum = 0;
  for (Index k = 0; k < a.size(); ++k) {
    sum += ((b.points.rowwise() - a.points.row(k)).rowwise().squaredNorm().array() * scale)
               .exp()
               .sum();
  }
  return sum / (Scalar(a.size()) * Scalar(b.size()));
}

namespace detail {

// Cholesky of I + (cov_a + cov_b) / sigma_sq. Its eigenvalues are >= 1 for
// PSD covariances, so it factors without jitter, and
// B^{-1} = (sigma_sq * A)^{-1} with B = cov_a + cov_b + sigma_sq * I.
template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> normalized_gaussian_factor(const Matrix<Scalar>& cov_sum,
                                                      Scalar sigma_sq) {
  Matrix<Scalar> a = cov_sum / sigma_sq;
  a.diagonal().array() += Scalar(1);
  Eigen::LLT<Matrix<Scalar>> llt(a);
  if (llt.info() != Eigen::Success || !llt.matrixLLT().allFinite())
    throw NumericalError("gauss_mean_kernel: covariance sum is not positive definite");
  return llt;
}

template <typename Scalar>
Scalar half_log_det(const Eigen::LLT<Matrix<Scalar>>& llt) {
  return llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Closed-form mean-map kernel between N(m_a, S_a) and N(m_b, S_b) under the
/// Gaussian RBF kernel:
///   exp(-1/2 d^T B^{-1} d) / |S_a/sigma^2 + S_b/sigma^2 + I|^{1/2},
/// with d = m_a - m_b and B = S_a + S_b + sigma^2 I.
template <typename Scalar>
Scalar gauss_mean_kernel(const GaussianParams<Scalar>& a, const GaussianParams<Scalar>& b,
                         Scalar sigma_sq) {
  if (a.mean.size() != b.mean.size())
    throw std::invalid_argument("gauss_mean_kernel: dimension mismatch");
  if (!(sigma_sq > 0)) throw std::invalid_argument("gauss_mean_kernel: sigma_sq must be positive");
  const Matrix<Scalar> cov_sum = a.covariance + b.covariance;
  const auto llt = detail::normalized_gaussian_factor(cov_sum, sigma_sq);
  const Vector<Scalar> diff = a.mean - b.mean;
  const Scalar quad = llt.matrixL().solve(diff).squaredNorm() / sigma_sq;
  return std::exp(Scalar(-0.5) * quad - detail::half_log_det(llt));
}

/// Kernel between an empirical sample and a Gaussian: the closed-form Gaussian kernel with zero
/// covariance on the point side, averaged over the sample points.
template <typename Scalar>
Scalar emp_gauss_mean_kernel(const EmpiricalSample<Scalar>& a, const GaussianParams<Scalar>& b,
                             Scalar sigma_sq) {
  if (a.size() < 1) throw std::invalid_argument("mean_kernel: empty group");
  if (a.points.cols() != b.mean.size())
    throw std::invalid_argument("mean_kernel: dimension mismatch");
  if (!(sigma_sq > 0)) throw std::invalid_argument("mean_kernel: sigma_sq must be positive");
  const auto llt = detail::normalized_gaussian_factor<Scalar>(b.covariance, sigma_sq);
  Matrix<Scalar> diffs = (a.points.rowwise() - b.mean.transpose()).transpose();
  llt.matrixL().solveInPlace(diffs);
  const Scalar log_norm = detail::half_log_det(llt);
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> quad =
      diffs.colwise().squaredNorm().array() / sigma_sq;
  return (Scalar(-0.5) * quad - log_norm).exp().sum() / Scalar(a.size());
}

/// Mean-map kernel <mu_a, mu_b> for any pair of representations.
template <typename Scalar>
Scalar mean_kernel(const DistributionRepr<Scalar>& a, const DistributionRepr<Scalar>& b,
                   const KernelConfig<Scalar>& config) {
  if (a.dim() != b.dim()) throw std::invalid_argument("mean_kernel: dimension mismatch");
  const Scalar sigma_sq = config.bandwidth();
  if (a.is_empirical() && b.is_empirical())
    return emp_mean_kernel(a.as_empirical(), b.as_empirical(), sigma_sq);
  if (a.is_gaussian() && b.is_gaussian())
    return gauss_mean_kernel(a.as_gaussian(), b.as_gaussian(), sigma_sq);
  if (a.is_empirical()) return emp_gauss_mean_kernel(a.as_empirical(), b.as_gaussian(), sigma_sq);
  return emp_gauss_mean_kernel(b.as_empirical(), a.as_gaussian(), sigma_sq);
}

/// Gaussian kernel on the RKHS distance between two mean embeddings, from
/// their mean-map kernel values.
template <typename Scalar>
Scalar level2_kernel(Scalar k_aa, Scalar k_ab, Scalar k_bb, Scalar gamma) {
  if (!(gamma > 0)) throw std::invalid_argument("level2_kernel: gamma must be positive");
  Scalar dist_sq = k_aa - Scalar(2) * k_ab + k_bb;
  if (dist_sq < Scalar(-1e-8))
    throw NumericalError("level2_kernel: negative squared RKHS distance (non-PSD inputs)");
  dist_sq = std::max(dist_sq, Scalar(0));
  return std::exp(-dist_sq / (Scalar(2) * gamma * gamma));
}

/// K_ij / sqrt(K_ii K_jj); the diagonal becomes exactly 1.
template <typename Scalar>
GramMatrix<Scalar> spherical_normalize(const GramMatrix<Scalar>& gram) {
  const Vector<Scalar> diag = gram.entries.diagonal();
  if (!(diag.array() > Scalar(0)).all())
    throw NumericalError("spherical_normalize: non-positive diagonal entry");
  const Index n = gram.size();
  GramMatrix<Scalar> out{Matrix<Scalar>(n, n), gram.config};
  for (Index i = 0; i < n; ++i) {
    out.entries(i, i) = Scalar(1);
    for (Index j = i + 1; j < n; ++j) {
      const Scalar v = gram.entries(i, j) / std::sqrt(diag[i] * diag[j]);
      out.entries(i, j) = v;
      out.entries(j, i) = v;
    }
  }
  return out;
}

/// Applies the post-processing pipeline (level-2, then normalization) to a
/// single kernel value given the raw self-kernels of both arguments.
template <typename Scalar>
Scalar pipeline_entry(Scalar k_ab, Scalar k_aa, Scalar k_bb, const KernelConfig<Scalar>& config) {
  Scalar value = k_ab;
  if (config.level2_gamma) {
    value = level2_kernel(k_aa, k_ab, k_bb, *config.level2_gamma);
    k_aa = Scalar(1);
    k_bb = Scalar(1);
  }
  if (config.spherical_normalize) {
    if (!(k_aa > 0) || !(k_bb > 0))
      throw NumericalError("spherical_normalize: non-positive self-kernel");
    value /= std::sqrt(k_aa * k_bb);
  }
  return value;
}

/// Raw mean-map kernel matrix, before level-2 or normalization.
template <typename Scalar>
Matrix<Scalar> mean_kernel_matrix(std::span<const DistributionRepr<Scalar>> groups,
                                  const KernelConfig<Scalar>& config) {
  if (groups.empty()) throw std::invalid_argument("gram: no groups");
  const Index n = static_cast<Index>(groups.size());
  const Index d = groups.front().dim();
  for (const auto& g : groups)
    if (g.dim() != d) throw std::invalid_argument("gram: groups have different dimensions");
  Matrix<Scalar> k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      k(i, j) = mean_kernel(groups[i], groups[j], config);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

template <typename Scalar>
Scalar min_eigenvalue(const Matrix<Scalar>& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// Turns a raw mean-map kernel matrix into the final Gram: level-2 (if
/// configured), then spherical normalization (if configured), then a PSD check.
template <typename Scalar>
GramMatrix<Scalar> finish_gram(const Matrix<Scalar>& raw, const KernelConfig<Scalar>& config) {
  GramMatrix<Scalar> gram{raw, config};
  const Index n = raw.rows();
  if (config.level2_gamma) {
    for (Index i = 0; i < n; ++i) {
      gram.entries(i, i) = Scalar(1);
      for (Index j = i + 1; j < n; ++j) {
        gram.entries(i, j) = level2_kernel(raw(i, i), raw(i, j), raw(j, j), *config.level2_gamma);
        gram.entries(j, i) = gram.entries(i, j);
      }
    }
  }
  if (config.spherical_normalize) gram = spherical_normalize(gram);

  Matrix<Scalar> shifted = gram.entries;
  shifted.diagonal().array() += config.jitter;
  if (min_eigenvalue(shifted) < Scalar(-1e-8))
    throw NumericalError("gram: kernel matrix is not positive semi-definite");
  return gram;
}

/// Gram matrix of a list of groups under the full kernel pipeline.
template <typename Scalar>
GramMatrix<Scalar> gram(std::span<const DistributionRepr<Scalar>> groups,
                        const KernelConfig<Scalar>& config) {
  config.validate();
  return finish_gram(mean_kernel_matrix(groups, config), config);
}

template <typename Scalar>
GramMatrix<Scalar> gram(const std::vector<DistributionRepr<Scalar>>& groups,
                        const KernelConfig<Scalar>& config) {
  return gram(std::span<const DistributionRepr<Scalar>>(groups), config);
}

/// Pipeline kernel values between every training group and one test group,
/// reusing cached raw training self-kernels.
template <typename Scalar>
Vector<Scalar> kernel_column(std::span<const DistributionRepr<Scalar>> train,
                             const Vector<Scalar>& train_diag, const DistributionRepr<Scalar>& test,
                             const KernelConfig<Scalar>& config) {
  const Index n = static_cast<Index>(train.size());
  const Scalar k_tt = config.plain() ? Scalar(0) : mean_kernel(test, test, config);
  Vector<Scalar> column(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar raw = mean_kernel(train[i], test, config);
    column[i] = config.plain() ? raw : pipeline_entry(raw, train_diag[i], k_tt, config);
  }
  return column;
}

}  // namespace ocsmm
