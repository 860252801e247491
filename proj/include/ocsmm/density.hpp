#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

#include <Eigen/Core>

#include "ocsmm/kernel.hpp"
#include "ocsmm/model.hpp"
#include "ocsmm/types.hpp"

namespace ocsmm {

/// Test distribution N(point, variance * I); variance 0 is a point mass.
template <typename Scalar>
struct DensityQuery {
  Vector<Scalar> point;
  Scalar variance = 0;
};

/// Gaussian kernel density estimate (1 / (n h^d)) sum_i phi((y - x_i) / h),
/// phi the standard normal density in d dimensions. `points` holds one
/// sample per row.
template <typename Scalar, typename Derived>
Scalar kde(const Matrix<Scalar>& points, Scalar h, const Eigen::MatrixBase<Derived>& query) {
  if (!(h > 0)) throw std::invalid_argument("kde: bandwidth must be positive");
  if (points.rows() < 1) throw std::invalid_argument("kde: no sample points");
  if (points.cols() != query.size()) throw std::invalid_argument("kde: dimension mismatch");
  const auto d = static_cast<Scalar>(points.cols());
  const Scalar sq_scale = Scalar(-0.5) / (h * h);
  const Scalar sum =
      ((points.rowwise() - query.derived().transpose()).rowwise().squaredNorm().array() * sq_scale)
          .exp()
          .sum();
  const Scalar norm = std::pow(Scalar(2) * std::numbers::pi_v<Scalar>, d / Scalar(2)) *
                      std::pow(h, d) * Scalar(points.rows());
  return sum / norm;
}

namespace detail {

template <typename Scalar>
bool isotropic(const Matrix<Scalar>& cov) {
  const Scalar scale = std::max(Scalar(1e-300), cov.diagonal().cwiseAbs().maxCoeff());
  Matrix<Scalar> target = Matrix<Scalar>::Identity(cov.rows(), cov.cols()) * cov(0, 0);
  return (cov - target).cwiseAbs().maxCoeff() <= Scalar(1e-12) * scale;
}

template <typename Scalar>
void require_density_model(const TrainedModel<Scalar>& model) {
  if (!model.config().plain())
    throw std::invalid_argument(
        "density evaluation needs the plain mean kernel (no level-2, no normalization)");
  for (const auto& g : model.train_reprs()) {
    const bool point_mass = g.is_empirical() && g.as_empirical().size() == 1;
    const bool iso_gaussian = g.is_gaussian() && isotropic(g.as_gaussian().covariance);
    if (!point_mass && !iso_gaussian)
      throw std::invalid_argument(
          "density evaluation needs isotropic Gaussian (or point-mass) training groups");
  }
}

template <typename Scalar>
Scalar weighted_kernel_sum(const TrainedModel<Scalar>& model, const DensityQuery<Scalar>& query) {
  if (query.point.size() != model.dim())
    throw std::invalid_argument("density query dimension does not match model");
  if (!(query.variance >= 0)) throw std::invalid_argument("query variance must be non-negative");
  const Index d = query.point.size();
  const auto test = DistributionRepr<Scalar>::gaussian(
      query.point, Matrix<Scalar>::Identity(d, d) * query.variance);
  Scalar sum = 0;
  for (Index i = 0; i < model.size(); ++i) {
    if (model.alpha()[i] == Scalar(0)) continue;
    sum += model.alpha()[i] * mean_kernel(model.train_reprs()[i], test, model.config());
  }
  return sum;
}

}  // namespace detail

/// Unnormalized variable-bandwidth density: sum_i alpha_i K(N(m_i, s_i^2 I),
/// N(m_t, s_t^2 I)) for a model fitted with nu = 1 (alpha_i = 1/ell). Equal
/// s_i with varying s_t gives the balloon shape; varying s_i with s_t = 0
/// gives the sample-smoothing shape.
template <typename Scalar>
Scalar smm_density(const TrainedModel<Scalar>& model, const DensityQuery<Scalar>& query) {
  if (model.nu() != Scalar(1)) throw std::invalid_argument("smm_density: model must use nu = 1");
  detail::require_density_model(model);
  return detail::weighted_kernel_sum(model, query);
}

/// Same evaluation with the sparse coefficients of a nu < 1 fit; only
/// support measures contribute.
template <typename Scalar>
Scalar vkde_sparse(const TrainedModel<Scalar>& model, const DensityQuery<Scalar>& query) {
  detail::require_density_model(model);
  return detail::weighted_kernel_sum(model, query);
}

}  // namespace ocsmm
