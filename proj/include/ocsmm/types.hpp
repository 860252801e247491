#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ocsmm/errors.hpp"

namespace ocsmm {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

enum class Label { normal, anomalous };

inline std::string_view to_string(Label label) {
  return label == Label::anomalous ? "anomalous" : "normal";
}

inline std::optional<Label> parse_label(std::string_view text) {
  if (text == "anomalous" || text == "1") return Label::anomalous;
  if (text == "normal" || text == "0") return Label::normal;
  return std::nullopt;
}

/// Parameters of a multivariate normal N(mean, covariance).
template <typename Scalar>
struct GaussianParams {
  Vector<Scalar> mean;
  Matrix<Scalar> covariance;
};

/// An observed sample, one point per row, with uniform weights 1/n.
template <typename Scalar>
struct EmpiricalSample {
  Matrix<Scalar> points;

  Index size() const { return points.rows(); }
};

/// One group: either an empirical sample or a Gaussian. Validated on
/// construction, immutable afterwards.
template <typename Scalar>
class DistributionRepr {
 public:
  using Empirical = EmpiricalSample<Scalar>;
  using Gaussian = GaussianParams<Scalar>;

  static DistributionRepr empirical(Matrix<Scalar> points) {
    if (points.rows() < 1) throw std::invalid_argument("empirical group has no points");
    if (points.cols() < 1) throw std::invalid_argument("points must have dimension >= 1");
    if (!points.allFinite()) throw std::invalid_argument("points contain non-finite values");
    return DistributionRepr(Empirical{std::move(points)});
  }

  static DistributionRepr gaussian(Vector<Scalar> mean, Matrix<Scalar> covariance,
                                   Scalar jitter = Scalar(1e-10)) {
    const Index d = mean.size();
    if (d < 1) throw std::invalid_argument("gaussian mean must have dimension >= 1");
    if (covariance.rows() != d || covariance.cols() != d)
      throw std::invalid_argument("covariance shape does not match mean dimension");
    if (!mean.allFinite() || !covariance.allFinite())
      throw std::invalid_argument("gaussian parameters contain non-finite values");
    const Scalar scale = std::max(Scalar(1), covariance.cwiseAbs().maxCoeff());
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale)
      throw std::invalid_argument("covariance is not symmetric");
    Matrix<Scalar> shifted = covariance;
    shifted.diagonal().array() += jitter * scale;
    if (Eigen::LLT<Matrix<Scalar>>(shifted).info() != Eigen::Success)
      throw std::invalid_argument("covariance is not positive semi-definite");
    return DistributionRepr(Gaussian{std::move(mean), std::move(covariance)});
  }

  /// Point mass at `point`, stored as a single-point empirical sample.
  template <typename Derived>
  static DistributionRepr dirac(const Eigen::MatrixBase<Derived>& point) {
    return empirical(point.transpose().eval());
  }

  bool is_empirical() const { return std::holds_alternative<Empirical>(repr_); }
  bool is_gaussian() const { return std::holds_alternative<Gaussian>(repr_); }

  const Empirical& as_empirical() const { return std::get<Empirical>(repr_); }
  const Gaussian& as_gaussian() const { return std::get<Gaussian>(repr_); }

  const std::variant<Empirical, Gaussian>& value() const { return repr_; }

  Index dim() const {
    return is_empirical() ? as_empirical().points.cols() : as_gaussian().mean.size();
  }

 private:
  explicit DistributionRepr(std::variant<Empirical, Gaussian> repr) : repr_(std::move(repr)) {}

  std::variant<Empirical, Gaussian> repr_;
};

/// Kernel pipeline settings.
///
/// `sigma_sq` is the squared bandwidth of the base RBF kernel; leaving it
/// unset asks `fit` to pick it with the median heuristic. A set
/// `level2_gamma` enables the Gaussian kernel on RKHS distances between mean
/// embeddings. `spherical_normalize` projects every embedding onto the unit
/// sphere.
template <typename Scalar>
struct KernelConfig {
  std::optional<Scalar> sigma_sq;
  std::optional<Scalar> level2_gamma;
  bool spherical_normalize = false;
  Scalar jitter = Scalar(1e-10);

  Scalar bandwidth() const {
    if (!sigma_sq) throw std::invalid_argument("kernel bandwidth sigma_sq is not set");
    return *sigma_sq;
  }

  bool plain() const { return !level2_gamma && !spherical_normalize; }

  void validate() const {
    if (sigma_sq && !(*sigma_sq > 0)) throw std::invalid_argument("sigma_sq must be positive");
    if (level2_gamma && !(*level2_gamma > 0))
      throw std::invalid_argument("level2_gamma must be positive");
    if (!(jitter >= 0)) throw std::invalid_argument("jitter must be non-negative");
  }
};

/// The level-2 default used for real data: gamma equal to the base bandwidth sigma.
template <typename Scalar>
KernelConfig<Scalar> with_default_gamma(KernelConfig<Scalar> config) {
  config.level2_gamma = std::sqrt(config.bandwidth());
  return config;
}

}  // namespace ocsmm
