// ocsmm: group anomaly detection with one-class support measure machines.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ocsmm/datagen.hpp"
#include "ocsmm/density.hpp"
#include "ocsmm/eval.hpp"
#include "ocsmm/io.hpp"
#include "ocsmm/kernel.hpp"
#include "ocsmm/model.hpp"

namespace {

using namespace ocsmm;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KernelFlags {
  std::optional<double> sigma_sq;
  std::optional<double> gamma;
  bool level2 = false;
  bool normalize = false;
  double jitter = 1e-10;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sigma-sq", sigma_sq, "Squared RBF bandwidth (default: median heuristic)");
    cmd->add_option("--gamma", gamma, "Level-2 kernel bandwidth (enables the level-2 kernel)");
    cmd->add_flag("--level2", level2, "Enable the level-2 kernel with gamma = sigma");
    cmd->add_flag("--normalize", normalize, "Apply spherical normalization");
    cmd->add_option("--jitter", jitter, "Diagonal jitter for PSD checks")->capture_default_str();
  }

  // Resolves the bandwidth against `groups`, logging when the median heuristic is used.
  KernelConfig<double> resolve(const std::vector<DistributionRepr<double>>& groups) const {
    KernelConfig<double> cfg;
    cfg.sigma_sq = sigma_sq;
    cfg.spherical_normalize = normalize;
    cfg.jitter = jitter;
    if (sigma_sq && !(*sigma_sq > 0)) throw UsageError("--sigma-sq must be positive");
    if (gamma && !(*gamma > 0)) throw UsageError("--gamma must be positive");
    if (!cfg.sigma_sq) {
      cfg.sigma_sq = median_heuristic(groups);
      std::cerr << "sigma_sq=" << io::format_double(*cfg.sigma_sq) << " (median heuristic)\n";
    }
    if (gamma) cfg.level2_gamma = gamma;
    else if (level2) cfg = with_default_gamma(cfg);
    cfg.validate();
    return cfg;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

int run_synth(const std::string& recipe, std::uint64_t seed, int points, const std::string& out) {
  io::GroupedData data;
  if (recipe == "rotated") {
    data = io::from_dataset(gen_rotated_gaussians(seed));
  } else if (recipe == "mixture") {
    data = io::from_dataset(gen_mixture_groups(seed));
  } else {
    NoisyRecipe noisy;
    noisy.points = points;
    const auto shape = recipe == "circle" ? NoisyShape::circle : NoisyShape::flower;
    data = io::from_dataset(
        observations_as_gaussians(gen_noisy_circle(seed, shape, noisy), seed, recipe));
  }
  io::write_grouped_file(out, data);
  return 0;
}

std::vector<DistributionRepr<double>> maybe_means(std::vector<DistributionRepr<double>> groups,
                                                  bool means) {
  return means ? reduce_to_means(groups) : std::move(groups);
}

int run_train(const std::string& data_path, const KernelFlags& kernel, double nu, double kkt_tol,
              bool means, const std::string& model_out) {
  if (!(nu > 0) || nu > 1) throw UsageError("--nu must lie in (0, 1]");
  auto data = io::read_grouped_file(data_path);
  // The bandwidth always comes from the raw points, also for the means baseline.
  const auto cfg = kernel.resolve(data.groups);
  SolverSettings<double> settings;
  settings.kkt_tol = kkt_tol;
  const auto model = fit(maybe_means(std::move(data.groups), means), cfg, nu, settings);
  io::save_model_file(model_out, model, data.ids);
  std::cerr << "trained on " << model.size() << " groups: rho=" << io::format_double(model.rho())
            << ", margin SVs=" << model.margin_indices().size()
            << ", bound SVs=" << model.bound_indices().size() << '\n';
  return 0;
}

int run_score(const std::string& model_path, const std::string& data_path, bool means,
              const std::string& out_path) {
  const auto model = io::load_model_file(model_path);
  auto data = io::read_grouped_file(data_path);
  const auto tests = maybe_means(data.groups, means);
  const auto reports = anomaly_scores(model, tests);
  std::vector<io::ScoreRow> rows;
  for (const auto& r : reports) {
    const auto i = static_cast<std::size_t>(r.index);
    rows.push_back({data.ids[i], r.decision, r.score, r.label, data.labels[i]});
  }
  auto out = open_out(out_path);
  io::write_scores_csv(out, rows);
  return 0;
}

int run_eval(const std::string& scores_path, const std::string& roc_out) {
  std::ifstream in(scores_path);
  if (!in) throw DataError("cannot open '" + scores_path + "' for reading");
  const auto rows = io::read_scores_csv(in);
  ScoredLabels data;
  for (const auto& r : rows) {
    if (!r.true_label) throw DataError("group '" + r.group_id + "': missing true_label");
    data.scores.push_back(r.score);
    data.labels.push_back(*r.true_label);
  }
  std::cout << "AP=" << io::format_double(average_precision(data)) << '\n'
            << "AUC=" << io::format_double(auc(data)) << '\n';
  if (!roc_out.empty()) {
    auto out = open_out(roc_out);
    io::write_roc_csv(out, roc_curve(data));
  }
  return 0;
}

struct Grid {
  double xmin = -3, xmax = 3, ymin = -3, ymax = 3;
  int steps = 50;
  double query_variance = 0;
};

int run_density(const std::string& model_path, const Grid& grid, const std::string& out_path) {
  if (grid.steps < 2) throw UsageError("--steps must be at least 2");
  if (!(grid.query_variance >= 0)) throw UsageError("--query-variance must be non-negative");
  const auto model = io::load_model_file(model_path);
  const Index d = model.dim();
  if (d > 2) throw UsageError("density grids support models of dimension 1 or 2");
  auto out = open_out(out_path);
  out << (d == 1 ? "x,value\n" : "x,y,value\n");
  auto lerp = [&](double lo, double hi, int k) { return lo + (hi - lo) * k / (grid.steps - 1); };
  const int ysteps = d == 1 ? 1 : grid.steps;
  for (int i = 0; i < grid.steps; ++i) {
    for (int j = 0; j < ysteps; ++j) {
      DensityQuery<double> q;
      q.point = Eigen::VectorXd(d);
      q.point[0] = lerp(grid.xmin, grid.xmax, i);
      if (d == 2) q.point[1] = lerp(grid.ymin, grid.ymax, j);
      q.variance = grid.query_variance;
      const double value = vkde_sparse(model, q);
      out << io::format_double(q.point[0]);
      if (d == 2) out << ',' << io::format_double(q.point[1]);
      out << ',' << io::format_double(value) << '\n';
    }
  }
  return 0;
}

int run_gram(const std::string& data_path, const KernelFlags& kernel, const std::string& out_path) {
  const auto data = io::read_grouped_file(data_path);
  const auto cfg = kernel.resolve(data.groups);
  const auto g = gram(data.groups, cfg);
  auto out = open_out(out_path);
  io::write_matrix_csv(out, g.entries, data.ids);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-class support measure machines for group anomaly detection"};
  app.require_subcommand(1);

  std::string recipe;
  std::uint64_t seed = 0;
  int points = 500;
  std::string out_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled group dataset");
  synth->add_option("--recipe", recipe, "rotated | mixture | circle | flower")
      ->required()
      ->check(CLI::IsMember({"rotated", "mixture", "circle", "flower"}));
  synth->add_option("--seed", seed, "Random seed")->capture_default_str();
  synth->add_option("--points", points, "Observations for circle/flower")->capture_default_str();
  synth->add_option("--out", out_path, "Output file (.json or .csv)")->required();

  std::string data_path, model_path;
  double nu = 0.1;
  double kkt_tol = 1e-6;
  bool means = false;
  KernelFlags kernel;
  auto* train = app.add_subcommand("train", "Fit a model on grouped data");
  train->add_option("--data", data_path, "Grouped data file")->required();
  train->add_option("--nu", nu, "Outlier fraction bound, in (0, 1]")->capture_default_str();
  train->add_option("--kkt-tol", kkt_tol, "Solver KKT tolerance")->capture_default_str();
  train->add_flag("--means", means, "Train the one-class SVM on group means");
  train->add_option("--model-out", model_path, "Model output path")->required();
  kernel.attach(train);

  auto* score = app.add_subcommand("score", "Score groups with a trained model");
  score->add_option("--model", model_path, "Model file")->required();
  score->add_option("--data", data_path, "Grouped data file")->required();
  score->add_flag("--means", means, "Reduce test groups to their means (for --means models)");
  score->add_option("--out", out_path, "Scores CSV output")->required();

  std::string scores_path, roc_out;
  auto* eval = app.add_subcommand("eval", "AP, AUC and ROC from a scores file with true labels");
  eval->add_option("--scores", scores_path, "Scores CSV")->required();
  eval->add_option("--roc-out", roc_out, "Optional ROC curve CSV output");

  Grid grid;
  auto* density = app.add_subcommand("density", "Evaluate the model density on a grid");
  density->add_option("--model", model_path, "Model file")->required();
  density->add_option("--xmin", grid.xmin)->capture_default_str();
  density->add_option("--xmax", grid.xmax)->capture_default_str();
  density->add_option("--ymin", grid.ymin)->capture_default_str();
  density->add_option("--ymax", grid.ymax)->capture_default_str();
  density->add_option("--steps", grid.steps, "Grid points per axis")->capture_default_str();
  density->add_option("--query-variance", grid.query_variance, "Test distribution variance")
      ->capture_default_str();
  density->add_option("--out", out_path, "Density CSV output")->required();

  KernelFlags gram_kernel;
  auto* gram_cmd = app.add_subcommand("gram", "Write the Gram matrix of grouped data");
  gram_cmd->add_option("--data", data_path, "Grouped data file")->required();
  gram_cmd->add_option("--out", out_path, "Gram CSV output")->required();
  gram_kernel.attach(gram_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) return run_synth(recipe, seed, points, out_path);
    if (*train) return run_train(data_path, kernel, nu, kkt_tol, means, model_path);
    if (*score) return run_score(model_path, data_path, means, out_path);
    if (*eval) return run_eval(scores_path, roc_out);
    if (*density) return run_density(model_path, grid, out_path);
    if (*gram_cmd) return run_gram(data_path, gram_kernel, out_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
