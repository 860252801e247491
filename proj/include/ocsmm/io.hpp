#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ocsmm/datagen.hpp"
#include "ocsmm/eval.hpp"
#include "ocsmm/kernel.hpp"
#include "ocsmm/model.hpp"
#include "ocsmm/types.hpp"

namespace ocsmm::io {

inline constexpr int kModelFormatVersion = 1;

/// Groups read from (or written to) a grouped data file. Labels are optional
/// per group.
struct GroupedData {
  std::vector<std::string> ids;
  std::vector<DistributionRepr<double>> groups;
  std::vector<std::optional<Label>> labels;

  std::size_t size() const { return groups.size(); }
  bool fully_labeled() const;
  void push_back(std::string id, DistributionRepr<double> group, std::optional<Label> label);
};

GroupedData from_dataset(const LabeledGroupDataset& data);

// Structured JSON:
//   {"groups": [{"id": "a", "points": [[x1, ...], ...], "label": "normal"},
//               {"id": "b", "mean": [...], "cov": [[...], ...]}]}
GroupedData read_grouped_json(std::istream& in);
void write_grouped_json(std::ostream& out, const GroupedData& data);

// Tabular CSV with a header: group_id,x1,...,xd[,label]. Rows of one group
// need not be contiguous; groups keep first-appearance order.
GroupedData read_grouped_csv(std::istream& in);
void write_grouped_csv(std::ostream& out, const GroupedData& data);

/// Dispatches on extension: ".csv" is tabular, anything else JSON.
GroupedData read_grouped_file(const std::filesystem::path& path);
void write_grouped_file(const std::filesystem::path& path, const GroupedData& data);

/// Versioned JSON model file. `ids` (optional) names the training groups.
void save_model(std::ostream& out, const TrainedModel<double>& model,
                const std::vector<std::string>& ids = {});
TrainedModel<double> load_model(std::istream& in);
void save_model_file(const std::filesystem::path& path, const TrainedModel<double>& model,
                     const std::vector<std::string>& ids = {});
TrainedModel<double> load_model_file(const std::filesystem::path& path);

struct ScoreRow {
  std::string group_id;
  double decision = 0;
  double score = 0;
  Label label = Label::normal;
  std::optional<Label> true_label;
};

// group_id,decision,score,label,true_label (true_label empty when unknown)
void write_scores_csv(std::ostream& out, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores_csv(std::istream& in);

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& curve);

/// Square matrix as CSV, optionally with a header row of ids.
void write_matrix_csv(std::ostream& out, const Matrix<double>& matrix,
                      const std::vector<std::string>& ids = {});

/// %.17g: enough digits to round-trip any double.
std::string format_double(double value);

}  // namespace ocsmm::io
