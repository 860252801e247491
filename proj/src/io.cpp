#include "ocsmm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

#include <json.hpp>

namespace ocsmm::io {

using nlohmann::json;

namespace {

std::string group_context(const std::string& id) { return "group '" + id + "': "; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

Label label_or_throw(std::string_view text, const std::string& context) {
  const auto label = parse_label(text);
  if (!label) throw DataError(context + "unknown label '" + std::string(text) + "'");
  return *label;
}

Eigen::MatrixXd matrix_from_json(const json& rows, const std::string& context, const char* what) {
  if (!rows.is_array() || rows.empty())
    throw DataError(context + "'" + what + "' must be a non-empty array of rows");
  const std::size_t cols = rows.front().is_array() ? rows.front().size() : 0;
  if (cols == 0) throw DataError(context + "'" + what + "' rows must be non-empty arrays");
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols)
      throw DataError(context + "'" + what + "' has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!rows[r][c].is_number()) throw DataError(context + "'" + what + "' has a non-numeric entry");
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& values, const std::string& context, const char* what) {
  if (!values.is_array() || values.empty())
    throw DataError(context + "'" + what + "' must be a non-empty array");
  Eigen::VectorXd v(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) throw DataError(context + "'" + what + "' has a non-numeric entry");
    v[static_cast<Index>(i)] = values[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

DistributionRepr<double> group_from_json(const json& record, const std::string& id) {
  const std::string context = group_context(id);
  try {
    if (record.contains("points")) {
      return DistributionRepr<double>::empirical(matrix_from_json(record["points"], context, "points"));
    }
    if (record.contains("mean") && record.contains("cov")) {
      return DistributionRepr<double>::gaussian(vector_from_json(record["mean"], context, "mean"),
                                                matrix_from_json(record["cov"], context, "cov"));
    }
  } catch (const std::invalid_argument& e) {
    throw DataError(context + e.what());
  }
  throw DataError(context + "record needs either 'points' or 'mean' and 'cov'");
}

json group_to_json(const DistributionRepr<double>& group, const std::string& id,
                   const std::optional<Label>& label) {
  json record;
  record["id"] = id;
  if (group.is_empirical()) {
    record["points"] = matrix_to_json(group.as_empirical().points);
  } else {
    record["mean"] = vector_to_json(group.as_gaussian().mean);
    record["cov"] = matrix_to_json(group.as_gaussian().covariance);
  }
  if (label) record["label"] = std::string(to_string(*label));
  return record;
}

GroupedData groups_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("groups") || !doc["groups"].is_array())
    throw DataError("grouped data: expected an object with a 'groups' array");
  GroupedData data;
  std::size_t index = 0;
  for (const auto& record : doc["groups"]) {
    if (!record.is_object()) throw DataError("grouped data: group records must be objects");
    std::string id = "#" + std::to_string(index);
    if (record.contains("id")) {
      if (record["id"].is_string()) id = record["id"].get<std::string>();
      else if (record["id"].is_number_integer()) id = std::to_string(record["id"].get<long long>());
      else throw DataError("grouped data: group " + id + " has a non-string id");
    }
    std::optional<Label> label;
    if (record.contains("label") && !record["label"].is_null()) {
      if (!record["label"].is_string())
        throw DataError(group_context(id) + "label must be a string");
      label = label_or_throw(record["label"].get<std::string>(), group_context(id));
    }
    auto group = group_from_json(record, id);
    if (!data.groups.empty() && group.dim() != data.groups.front().dim())
      throw DataError(group_context(id) + "dimension " + std::to_string(group.dim()) +
                      " differs from earlier groups (" +
                      std::to_string(data.groups.front().dim()) + ")");
    data.push_back(std::move(id), std::move(group), label);
    ++index;
  }
  if (data.groups.empty()) throw DataError("grouped data: no groups");
  return data;
}

json groups_to_json(const std::vector<DistributionRepr<double>>& groups,
                    const std::vector<std::string>& ids,
                    const std::vector<std::optional<Label>>& labels) {
  json arr = json::array();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const std::string id = i < ids.size() ? ids[i] : "#" + std::to_string(i);
    const std::optional<Label> label = i < labels.size() ? labels[i] : std::nullopt;
    arr.push_back(group_to_json(groups[i], id, label));
  }
  return arr;
}

json parse_json(std::istream& in, const char* what) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

bool GroupedData::fully_labeled() const {
  for (const auto& l : labels)
    if (!l) return false;
  return !labels.empty();
}

void GroupedData::push_back(std::string id, DistributionRepr<double> group,
                            std::optional<Label> label) {
  ids.push_back(std::move(id));
  groups.push_back(std::move(group));
  labels.push_back(label);
}

GroupedData from_dataset(const LabeledGroupDataset& data) {
  GroupedData out;
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(data.ids[i], data.groups[i], data.labels[i]);
  return out;
}

GroupedData read_grouped_json(std::istream& in) {
  return groups_from_json(parse_json(in, "grouped data"));
}

void write_grouped_json(std::ostream& out, const GroupedData& data) {
  json doc;
  doc["groups"] = groups_to_json(data.groups, data.ids, data.labels);
  out << doc.dump(1) << '\n';
}

GroupedData read_grouped_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("grouped csv: empty input");
  const auto header = split_csv(line);
  if (header.empty() || header.front() != "group_id")
    throw DataError("grouped csv: header must start with 'group_id'");
  std::optional<std::size_t> label_col;
  std::vector<std::size_t> coord_cols;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == "label") label_col = c;
    else coord_cols.push_back(c);
  }
  if (coord_cols.empty()) throw DataError("grouped csv: no coordinate columns");

  struct Pending {
    std::vector<double> values;
    std::optional<Label> label;
    bool label_seen = false;
  };
  std::vector<std::string> order;
  std::map<std::string, Pending> pending;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    const std::string id(fields.front());
    const std::string context = group_context(id) + "line " + std::to_string(line_no) + ": ";
    if (fields.size() != header.size())
      throw DataError(context + "expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    auto [it, inserted] = pending.try_emplace(id);
    if (inserted) order.push_back(id);
    for (std::size_t c : coord_cols) {
      const auto v = parse_double(fields[c]);
      if (!v) throw DataError(context + "non-numeric coordinate '" + std::string(fields[c]) + "'");
      it->second.values.push_back(*v);
    }
    if (label_col) {
      std::optional<Label> label;
      if (!fields[*label_col].empty()) label = label_or_throw(fields[*label_col], context);
      if (it->second.label_seen && it->second.label != label)
        throw DataError(context + "conflicting labels within one group");
      it->second.label = label;
      it->second.label_seen = true;
    }
  }

  GroupedData data;
  const auto d = static_cast<Index>(coord_cols.size());
  for (const auto& id : order) {
    auto& p = pending[id];
    const Index n = static_cast<Index>(p.values.size()) / d;
    Eigen::MatrixXd pts =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            p.values.data(), n, d);
    try {
      data.push_back(id, DistributionRepr<double>::empirical(std::move(pts)), p.label);
    } catch (const std::invalid_argument& e) {
      throw DataError(group_context(id) + e.what());
    }
  }
  if (data.groups.empty()) throw DataError("grouped csv: no data rows");
  return data;
}

void write_grouped_csv(std::ostream& out, const GroupedData& data) {
  if (data.groups.empty()) throw DataError("grouped csv: nothing to write");
  const Index d = data.groups.front().dim();
  bool any_label = false;
  for (const auto& l : data.labels) any_label = any_label || l.has_value();
  out << "group_id";
  for (Index c = 0; c < d; ++c) out << ",x" << (c + 1);
  if (any_label) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.groups[i].is_empirical())
      throw DataError(group_context(data.ids[i]) + "gaussian groups cannot be written as csv");
    const auto& pts = data.groups[i].as_empirical().points;
    for (Index r = 0; r < pts.rows(); ++r) {
      out << data.ids[i];
      for (Index c = 0; c < d; ++c) out << ',' << format_double(pts(r, c));
      if (any_label) out << ',' << (data.labels[i] ? to_string(*data.labels[i]) : "");
      out << '\n';
    }
  }
}

GroupedData read_grouped_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return path.extension() == ".csv" ? read_grouped_csv(in) : read_grouped_json(in);
}

void write_grouped_file(const std::filesystem::path& path, const GroupedData& data) {
  auto out = open_output(path);
  if (path.extension() == ".csv") write_grouped_csv(out, data);
  else write_grouped_json(out, data);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void save_model(std::ostream& out, const TrainedModel<double>& model,
                const std::vector<std::string>& ids) {
  const auto& cfg = model.config();
  json doc;
  doc["format"] = "ocsmm-model";
  doc["version"] = kModelFormatVersion;
  doc["kernel"] = {{"sigma_sq", cfg.bandwidth()},
                   {"level2_gamma", cfg.level2_gamma ? json(*cfg.level2_gamma) : json(nullptr)},
                   {"spherical_normalize", cfg.spherical_normalize},
                   {"jitter", cfg.jitter}};
  doc["nu"] = model.nu();
  doc["rho"] = model.rho();
  doc["alpha"] = vector_to_json(model.alpha());
  doc["train_diag"] = vector_to_json(model.train_diag());
  doc["groups"] = groups_to_json(model.train_reprs(), ids, {});
  out << doc.dump(1) << '\n';
}

TrainedModel<double> load_model(std::istream& in) {
  const json doc = parse_json(in, "model");
  try {
    if (doc.value("format", std::string()) != "ocsmm-model")
      throw DataError("model: not an ocsmm model file");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("model: unsupported format version " + std::to_string(version));
    const auto& k = doc.at("kernel");
    KernelConfig<double> cfg;
    cfg.sigma_sq = k.at("sigma_sq").get<double>();
    if (!k.at("level2_gamma").is_null()) cfg.level2_gamma = k.at("level2_gamma").get<double>();
    cfg.spherical_normalize = k.at("spherical_normalize").get<bool>();
    cfg.jitter = k.at("jitter").get<double>();
    GroupedData train = groups_from_json(doc);
    return TrainedModel<double>(std::move(train.groups), cfg, doc.at("nu").get<double>(),
                                vector_from_json(doc.at("alpha"), "model: ", "alpha"),
                                doc.at("rho").get<double>(),
                                vector_from_json(doc.at("train_diag"), "model: ", "train_diag"));
  } catch (const json::exception& e) {
    throw DataError(std::string("model: malformed file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model: inconsistent contents: ") + e.what());
  }
}

void save_model_file(const std::filesystem::path& path, const TrainedModel<double>& model,
                     const std::vector<std::string>& ids) {
  auto out = open_output(path);
  save_model(out, model, ids);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

TrainedModel<double> load_model_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return load_model(in);
}

void write_scores_csv(std::ostream& out, const std::vector<ScoreRow>& rows) {
  out << "group_id,decision,score,label,true_label\n";
  for (const auto& r : rows) {
    out << r.group_id << ',' << format_double(r.decision) << ',' << format_double(r.score) << ','
        << to_string(r.label) << ',' << (r.true_label ? to_string(*r.true_label) : "") << '\n';
  }
}

std::vector<ScoreRow> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("scores csv: empty input");
  const auto header = split_csv(line);
  const std::size_t width = header.size();
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < width; ++c) col[std::string(header[c])] = c;
  for (const char* name : {"group_id", "score"})
    if (!col.count(name)) throw DataError(std::string("scores csv: missing column '") + name + "'");

  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != width)
      throw DataError("scores csv: line " + std::to_string(line_no) + ": wrong field count");
    ScoreRow row;
    row.group_id = std::string(fields[col["group_id"]]);
    const std::string context = group_context(row.group_id);
    const auto score = parse_double(fields[col["score"]]);
    if (!score) throw DataError(context + "non-numeric score");
    row.score = *score;
    row.decision = -row.score;
    if (col.count("decision")) {
      const auto decision = parse_double(fields[col["decision"]]);
      if (!decision) throw DataError(context + "non-numeric decision");
      row.decision = *decision;
    }
    row.label = row.decision < 0 ? Label::anomalous : Label::normal;
    if (col.count("label") && !fields[col["label"]].empty())
      row.label = label_or_throw(fields[col["label"]], context);
    if (col.count("true_label") && !fields[col["true_label"]].empty())
      row.true_label = label_or_throw(fields[col["true_label"]], context);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& curve) {
  out << "fpr,tpr\n";
  for (const auto& p : curve) out << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
}

void write_matrix_csv(std::ostream& out, const Matrix<double>& matrix,
                      const std::vector<std::string>& ids) {
  if (!ids.empty()) {
    for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << ids[i];
    out << '\n';
  }
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) out << (c ? "," : "") << format_double(matrix(r, c));
    out << '\n';
  }
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace ocsmm::io
