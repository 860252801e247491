#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ocsmm/kernel.hpp"
#include "ocsmm/qp_solver.hpp"
#include "ocsmm/types.hpp"

namespace ocsmm {

/// A fitted one-class support measure machine. Immutable; the decision
/// region is {P : sum_i alpha_i K(P_i, P) >= rho}.
template <typename Scalar>
class TrainedModel {
 public:
  TrainedModel(std::vector<DistributionRepr<Scalar>> train_reprs, KernelConfig<Scalar> config,
               Scalar nu, Vector<Scalar> alpha, Scalar rho, Vector<Scalar> train_diag)
      : train_reprs_(std::move(train_reprs)),
        config_(std::move(config)),
        nu_(nu),
        alpha_(std::move(alpha)),
        rho_(rho),
        train_diag_(std::move(train_diag)) {
    config_.validate();
    config_.bandwidth();
    const auto n = static_cast<Index>(train_reprs_.size());
    if (n < 1) throw std::invalid_argument("model has no training groups");
    if (!(nu_ > 0) || nu_ > 1) throw std::invalid_argument("nu must lie in (0, 1]");
    if (alpha_.size() != n || train_diag_.size() != n)
      throw std::invalid_argument("alpha and train_diag must have one entry per training group");
    const Scalar upper = Scalar(1) / (nu_ * Scalar(n));
    if ((alpha_.array() < Scalar(-1e-9)).any() || (alpha_.array() > upper + Scalar(1e-9)).any() ||
        std::abs(alpha_.sum() - Scalar(1)) > Scalar(1e-9))
      throw std::invalid_argument("alpha is not feasible for the given nu");
    for (const auto& g : train_reprs_)
      if (g.dim() != dim()) throw std::invalid_argument("training groups differ in dimension");
  }

  const std::vector<DistributionRepr<Scalar>>& train_reprs() const { return train_reprs_; }
  const KernelConfig<Scalar>& config() const { return config_; }
  Scalar nu() const { return nu_; }
  const Vector<Scalar>& alpha() const { return alpha_; }
  Scalar rho() const { return rho_; }
  /// Raw self-kernels K(P_i, P_i) of the training groups.
  const Vector<Scalar>& train_diag() const { return train_diag_; }
  Index size() const { return alpha_.size(); }
  Index dim() const { return train_reprs_.front().dim(); }

  Scalar upper_bound() const { return Scalar(1) / (nu_ * Scalar(size())); }

  std::vector<Index> margin_indices(Scalar bound_tol = Scalar(1e-9)) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (detail::classify(alpha_[i], upper_bound(), bound_tol) == detail::BoundStatus::free)
        out.push_back(i);
    return out;
  }

  std::vector<Index> bound_indices(Scalar bound_tol = Scalar(1e-9)) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (detail::classify(alpha_[i], upper_bound(), bound_tol) == detail::BoundStatus::upper)
        out.push_back(i);
    return out;
  }

 private:
  std::vector<DistributionRepr<Scalar>> train_reprs_;
  KernelConfig<Scalar> config_;
  Scalar nu_;
  Vector<Scalar> alpha_;
  Scalar rho_;
  Vector<Scalar> train_diag_;
};

template <typename Scalar>
struct ScoreReport {
  /// Position of the scored group in the input list.
  Index index = 0;
  /// f(P) - rho.
  Scalar decision = 0;
  /// rho - f(P); larger is more anomalous.
  Scalar score = 0;
  Label label = Label::normal;
};

/// Fills in sigma_sq with the median heuristic when it is unset.
template <typename Scalar>
KernelConfig<Scalar> resolve_bandwidth(std::span<const DistributionRepr<Scalar>> groups,
                                       KernelConfig<Scalar> config) {
  if (!config.sigma_sq) config.sigma_sq = median_heuristic(groups);
  config.validate();
  return config;
}

template <typename Scalar>
TrainedModel<Scalar> fit(std::vector<DistributionRepr<Scalar>> groups, KernelConfig<Scalar> config,
                         Scalar nu, const SolverSettings<Scalar>& settings = {}) {
  if (groups.empty()) throw std::invalid_argument("fit: no training groups");
  if (!(nu > 0) || nu > 1) throw std::invalid_argument("nu must lie in (0, 1]");
  const std::span<const DistributionRepr<Scalar>> view(groups);
  config = resolve_bandwidth(view, std::move(config));

  const Matrix<Scalar> raw = mean_kernel_matrix(view, config);
  const GramMatrix<Scalar> gram = finish_gram(raw, config);
  const DualSolution<Scalar> sol = solve_smo(DualProblem<Scalar>(gram, nu), settings);
  Vector<Scalar> diag = raw.diagonal();
  return TrainedModel<Scalar>(std::move(groups), std::move(config), nu, sol.alpha, sol.rho,
                              std::move(diag));
}

/// f(P_t) - rho, with the training kernel pipeline applied to the test column.
template <typename Scalar>
Scalar decision_function(const TrainedModel<Scalar>& model, const DistributionRepr<Scalar>& test) {
  if (test.dim() != model.dim())
    throw std::invalid_argument("decision_function: test dimension does not match training");
  const std::span<const DistributionRepr<Scalar>> train(model.train_reprs());
  const Vector<Scalar> column = kernel_column(train, model.train_diag(), test, model.config());
  return model.alpha().dot(column) - model.rho();
}

/// Scores every test group and returns the reports sorted by descending
/// anomaly score; ties keep input order.
template <typename Scalar>
std::vector<ScoreReport<Scalar>> anomaly_scores(const TrainedModel<Scalar>& model,
                                                std::span<const DistributionRepr<Scalar>> tests) {
  if (tests.empty()) throw std::invalid_argument("anomaly_scores: no test groups");
  std::vector<ScoreReport<Scalar>> reports;
  reports.reserve(tests.size());
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const Scalar decision = decision_function(model, tests[i]);
    reports.push_back({static_cast<Index>(i), decision, -decision,
                       decision < 0 ? Label::anomalous : Label::normal});
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return reports;
}

template <typename Scalar>
std::vector<ScoreReport<Scalar>> anomaly_scores(const TrainedModel<Scalar>& model,
                                                const std::vector<DistributionRepr<Scalar>>& tests) {
  return anomaly_scores(model, std::span<const DistributionRepr<Scalar>>(tests));
}

/// Replaces every group by a single point at its mean. Fitting on the result
/// gives the one-class SVM on group means.
template <typename Scalar>
std::vector<DistributionRepr<Scalar>> reduce_to_means(
    std::span<const DistributionRepr<Scalar>> groups) {
  if (groups.empty()) throw std::invalid_argument("reduce_to_means: no groups");
  std::vector<DistributionRepr<Scalar>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.is_empirical()) {
      const auto& pts = g.as_empirical().points;
      out.push_back(DistributionRepr<Scalar>::dirac(pts.colwise().mean().transpose()));
    } else {
      out.push_back(DistributionRepr<Scalar>::dirac(g.as_gaussian().mean));
    }
  }
  return out;
}

template <typename Scalar>
std::vector<DistributionRepr<Scalar>> reduce_to_means(
    const std::vector<DistributionRepr<Scalar>>& groups) {
  return reduce_to_means(std::span<const DistributionRepr<Scalar>>(groups));
}

}  // namespace ocsmm
