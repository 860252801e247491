#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ocsmm/types.hpp"

namespace ocsmm {

struct LabeledGroupDataset {
  std::vector<std::string> ids;
  std::vector<DistributionRepr<double>> groups;
  std::vector<Label> labels;
  std::uint64_t seed = 0;
  std::string descriptor;

  std::size_t size() const { return groups.size(); }
  std::size_t count(Label label) const;
};

/// Gaussian groups whose anomalies differ only in covariance orientation,
/// plus one normal-recipe group pushed away from the rest.
struct RotatedRecipe {
  int normal_groups = 20;
  int rotated_groups = 2;
  int samples_per_group = 100;
  double rotation_degrees = 60.0;
  /// Added to both mean coordinates of the last normal-recipe group.
  double perturbation_shift = 3.0;
  Eigen::Matrix2d covariance = (Eigen::Matrix2d() << 0.01, 0.008, 0.008, 0.01).finished();
};

/// Groups drawn from a shared four-component Gaussian mixture; anomalous
/// groups use a different mixing proportion.
struct MixtureRecipe {
  int normal_groups = 47;
  int anomalous_groups = 3;
  double mean_group_size = 300.0;
  double component_variance = 0.15;
  std::array<Eigen::Vector2d, 4> component_means = {
      Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, -1), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)};
  std::array<std::array<double, 4>, 2> normal_proportions = {
      {{0.22, 0.64, 0.03, 0.11}, {0.22, 0.03, 0.64, 0.11}}};
  /// Probability of picking each normal proportion.
  std::array<double, 2> normal_type_probability = {0.48, 0.52};
  std::array<double, 4> anomalous_proportion = {0.61, 0.1, 0.06, 0.23};
};

enum class NoisyShape { circle, flower };

struct NoisyRecipe {
  int points = 500;
  /// Spread of the circle's shape noise epsilon.
  double shape_noise = 0.05;
  /// Read `shape_noise` as a variance (true) or a standard deviation (false).
  bool shape_noise_is_variance = true;
  double omega_min = 0.2;
  double omega_max = 0.3;
};

/// One corrupted observation and the variance of its corruption noise.
struct NoisyObservation {
  Eigen::Vector2d point;
  double omega = 0;
};

LabeledGroupDataset gen_rotated_gaussians(std::uint64_t seed, const RotatedRecipe& recipe = {});

LabeledGroupDataset gen_mixture_groups(std::uint64_t seed, const MixtureRecipe& recipe = {});

std::vector<NoisyObservation> gen_noisy_circle(std::uint64_t seed, NoisyShape shape,
                                               const NoisyRecipe& recipe = {});

/// Radius of the flower curve at angle theta.
double flower_radius(double theta);

/// Wraps each observation as the Gaussian N(point, omega * I).
LabeledGroupDataset observations_as_gaussians(const std::vector<NoisyObservation>& observations,
                                              std::uint64_t seed, std::string descriptor);

}  // namespace ocsmm
