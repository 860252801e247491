#include "ocsmm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

namespace ocsmm {

namespace {

// Independent stream per (seed, recipe, group), so changing the number of
// groups never reshuffles the ones before it.
std::mt19937_64 group_stream(std::uint64_t seed, std::uint32_t recipe, std::uint64_t group) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    recipe, static_cast<std::uint32_t>(group),
                    static_cast<std::uint32_t>(group >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kRotatedTag = 0x524f54;
constexpr std::uint32_t kMixtureTag = 0x4d4958;
constexpr std::uint32_t kCircleTag = 0x434952;
constexpr std::uint32_t kFlowerTag = 0x464c57;

std::string group_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "g%03zu", index);
  return buf;
}

Eigen::MatrixXd sample_gaussian(std::mt19937_64& rng, const Eigen::Vector2d& mean,
                                const Eigen::Matrix2d& cov, int n) {
  const Eigen::Matrix2d chol = Eigen::LLT<Eigen::Matrix2d>(cov).matrixL();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd pts(n, 2);
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector2d z(normal(rng), normal(rng));
    pts.row(k) = (mean + chol * z).transpose();
  }
  return pts;
}

Eigen::MatrixXd sample_mixture(std::mt19937_64& rng, const MixtureRecipe& recipe,
                               const std::array<double, 4>& proportion, int n) {
  std::discrete_distribution<int> component(proportion.begin(), proportion.end());
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(recipe.component_variance);
  Eigen::MatrixXd pts(n, 2);
  for (int k = 0; k < n; ++k) {
    const auto& mean = recipe.component_means[static_cast<std::size_t>(component(rng))];
    const Eigen::Vector2d z(normal(rng), normal(rng));
    pts.row(k) = (mean + sd * z).transpose();
  }
  return pts;
}

}  // namespace

std::size_t LabeledGroupDataset::count(Label label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

LabeledGroupDataset gen_rotated_gaussians(std::uint64_t seed, const RotatedRecipe& recipe) {
  LabeledGroupDataset data;
  data.seed = seed;
  data.descriptor = "rotated: " + std::to_string(recipe.normal_groups) + " normal-recipe groups (" +
                    "last shifted by " + std::to_string(recipe.perturbation_shift) + "), " +
                    std::to_string(recipe.rotated_groups) + " groups with covariance rotated by " +
                    std::to_string(recipe.rotation_degrees) + " degrees, " +
                    std::to_string(recipe.samples_per_group) + " samples each";

  const double angle = recipe.rotation_degrees * std::numbers::pi / 180.0;
  Eigen::Matrix2d rot;
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const Eigen::Matrix2d rotated_cov = rot * recipe.covariance * rot.transpose();

  const int total = recipe.normal_groups + recipe.rotated_groups;
  for (int g = 0; g < total; ++g) {
    auto rng = group_stream(seed, kRotatedTag, static_cast<std::uint64_t>(g));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::Vector2d mean;
    mean.x() = unit(rng);
    mean.y() = unit(rng);

    const bool rotated = g >= recipe.normal_groups;
    const bool perturbed = g == recipe.normal_groups - 1;
    if (perturbed) mean.array() += recipe.perturbation_shift;

    const Eigen::Matrix2d& cov = rotated ? rotated_cov : recipe.covariance;
    data.ids.push_back(group_id(static_cast<std::size_t>(g)));
    data.groups.push_back(DistributionRepr<double>::empirical(
        sample_gaussian(rng, mean, cov, recipe.samples_per_group)));
    data.labels.push_back(rotated || perturbed ? Label::anomalous : Label::normal);
  }
  return data;
}

LabeledGroupDataset gen_mixture_groups(std::uint64_t seed, const MixtureRecipe& recipe) {
  LabeledGroupDataset data;
  data.seed = seed;
  data.descriptor = "mixture: " + std::to_string(recipe.normal_groups) + " normal + " +
                    std::to_string(recipe.anomalous_groups) +
                    " anomalous groups, Poisson(" + std::to_string(recipe.mean_group_size) +
                    ") points from a 4-component Gaussian mixture";

  const int total = recipe.normal_groups + recipe.anomalous_groups;
  for (int g = 0; g < total; ++g) {
    auto rng = group_stream(seed, kMixtureTag, static_cast<std::uint64_t>(g));
    std::poisson_distribution<int> size_dist(recipe.mean_group_size);
    const int n = std::max(1, size_dist(rng));

    const bool anomalous = g >= recipe.normal_groups;
    std::array<double, 4> proportion = recipe.anomalous_proportion;
    if (!anomalous) {
      std::bernoulli_distribution second_type(recipe.normal_type_probability[1] /
                                              (recipe.normal_type_probability[0] +
                                               recipe.normal_type_probability[1]));
      proportion = recipe.normal_proportions[second_type(rng) ? 1 : 0];
    }
    data.ids.push_back(group_id(static_cast<std::size_t>(g)));
    data.groups.push_back(
        DistributionRepr<double>::empirical(sample_mixture(rng, recipe, proportion, n)));
    data.labels.push_back(anomalous ? Label::anomalous : Label::normal);
  }
  return data;
}

double flower_radius(double theta) { return std::sin(4.0 * theta) + 2.0; }

std::vector<NoisyObservation> gen_noisy_circle(std::uint64_t seed, NoisyShape shape,
                                               const NoisyRecipe& recipe) {
  const double pi = std::numbers::pi;
  const double shape_sd =
      recipe.shape_noise_is_variance ? std::sqrt(recipe.shape_noise) : recipe.shape_noise;
  const std::uint32_t tag = shape == NoisyShape::circle ? kCircleTag : kFlowerTag;

  std::vector<NoisyObservation> out;
  out.reserve(static_cast<std::size_t>(recipe.points));
  for (int i = 0; i < recipe.points; ++i) {
    auto rng = group_stream(seed, tag, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;

    Eigen::Vector2d p;
    if (shape == NoisyShape::circle) {
      // theta in (-pi, pi]
      const double theta = pi - 2.0 * pi * unit(rng);
      p << std::cos(theta) + shape_sd * normal(rng), std::sin(theta) + shape_sd * normal(rng);
    } else {
      // theta in (0, 2 pi]
      const double theta = 2.0 * pi * (1.0 - unit(rng));
      const double r = flower_radius(theta);
      p << r * std::cos(theta), r * std::sin(theta);
    }
    std::uniform_real_distribution<double> omega_dist(recipe.omega_min, recipe.omega_max);
    double omega = omega_dist(rng);
    while (omega <= recipe.omega_min) omega = omega_dist(rng);
    const double corruption_sd = std::sqrt(omega);
    p.x() += corruption_sd * normal(rng);
    p.y() += corruption_sd * normal(rng);
    out.push_back({p, omega});
  }
  return out;
}

LabeledGroupDataset observations_as_gaussians(const std::vector<NoisyObservation>& observations,
                                              std::uint64_t seed, std::string descriptor) {
  LabeledGroupDataset data;
  data.seed = seed;
  data.descriptor = std::move(descriptor);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& obs = observations[i];
    data.ids.push_back(group_id(i));
    data.groups.push_back(DistributionRepr<double>::gaussian(
        obs.point, Eigen::Matrix2d::Identity() * obs.omega));
    data.labels.push_back(Label::normal);
  }
  return data;
}

}  // namespace ocsmm
