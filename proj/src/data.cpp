#include "ciftree/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ciftree/errors.hpp"

namespace ciftree {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& value) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::string> read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV: header row required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  std::vector<std::string> header;
  for (auto f : split_line(line)) header.emplace_back(f);
  return header;
}

}  // namespace

Dataset::Dataset(std::vector<ObservedRecord> records, int causes, std::vector<std::string> names)
    : records_(std::move(records)), causes_(causes), names_(std::move(names)) {
  if (records_.empty()) throw ValidationError("dataset must contain at least one record");
  dim_ = static_cast<int>(records_.front().covariates.size());
  int max_cause = 0;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    const std::string where = " (record " + std::to_string(i + 1) + ")";
    if (static_cast<int>(r.covariates.size()) != dim_)
      throw ValidationError("inconsistent covariate dimension" + where);
    if (!(r.time > 0.0) || !std::isfinite(r.time))
      throw ValidationError("follow-up time must be positive and finite" + where);
    if (r.event != (r.cause != 0))
      throw ValidationError("cause must be 0 exactly when the record is censored" + where);
    if (r.cause < 0) throw ValidationError("negative cause" + where);
    for (double x : r.covariates)
      if (!std::isfinite(x)) throw ValidationError("non-finite covariate" + where);
    max_cause = std::max(max_cause, r.cause);
  }
  if (causes_ == 0) causes_ = std::max(1, max_cause);
  if (max_cause > causes_)
    throw ValidationError("cause " + std::to_string(max_cause) + " exceeds K=" + std::to_string(causes_));
  if (names_.empty()) {
    for (int k = 0; k < dim_; ++k) names_.push_back("W" + std::to_string(k + 1));
  } else if (static_cast<int>(names_.size()) != dim_) {
    throw ValidationError("covariate name count does not match dimension");
  }
  covariates_.resize(static_cast<Eigen::Index>(records_.size()), dim_);
  for (std::size_t i = 0; i < records_.size(); ++i)
    for (int k = 0; k < dim_; ++k) covariates_(static_cast<Eigen::Index>(i), k) = records_[i].covariates[k];
}

std::size_t Dataset::censored_count() const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return !r.event; }));
}

int Dataset::covariate_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw SchemaError("unknown covariate '" + name + "'");
  return static_cast<int>(it - names_.begin());
}

TimeGrid::TimeGrid(std::vector<double> times, std::vector<double> weights)
    : times_(std::move(times)), weights_(std::move(weights)) {
  if (times_.empty()) throw ParameterError("time grid must not be empty");
  if (weights_.size() != times_.size()) throw ParameterError("time grid weight count mismatch");
  for (std::size_t j = 0; j < times_.size(); ++j) {
    if (!(times_[j] > 0.0) || !std::isfinite(times_[j])) throw ParameterError("grid times must be positive");
    if (j > 0 && !(times_[j] > times_[j - 1])) throw ParameterError("grid times must be strictly increasing");
    if (!(weights_[j] > 0.0)) throw ParameterError("grid weights must be positive");
  }
  double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw ParameterError("grid weights must sum to 1");
}

TimeGrid TimeGrid::equal_weights(std::vector<double> times) {
  std::vector<double> w(times.size(), times.empty() ? 0.0 : 1.0 / static_cast<double>(times.size()));
  return TimeGrid(std::move(times), std::move(w));
}

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  const auto header = read_header(in);
  const std::size_t time_col = find_column(header, schema.time_column);
  const std::size_t status_col = find_column(header, schema.status_column);
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> names;
  if (schema.covariate_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == time_col || c == status_col) continue;
      cov_cols.push_back(c);
      names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.covariate_columns) {
      cov_cols.push_back(find_column(header, name));
      names.push_back(name);
    }
  }

  std::vector<ObservedRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_line(line);
    const std::string where = "row " + std::to_string(row);
    if (fields.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    ObservedRecord r;
    double status = 0.0;
    if (!parse_double(fields[time_col], r.time)) throw ParseError(where + ": non-numeric time");
    if (!parse_double(fields[status_col], status) || status != std::floor(status) || status < 0)
      throw ParseError(where + ": status must be a non-negative integer");
    if (!(r.time > 0.0) || !std::isfinite(r.time))
      throw ValidationError(where + ": follow-up time must be positive and finite");
    r.cause = static_cast<int>(status);
    r.event = r.cause != 0;
    if (schema.causes > 0 && r.cause > schema.causes)
      throw ValidationError(where + ": cause exceeds K=" + std::to_string(schema.causes));
    r.covariates.reserve(cov_cols.size());
    for (std::size_t c : cov_cols) {
      double x = 0.0;
      if (!parse_double(fields[c], x))
        throw ParseError(where + ": non-numeric value in column '" + header[c] + "'");
      r.covariates.push_back(x);
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ValidationError("CSV contains no data rows");
  return Dataset(std::move(records), schema.causes, std::move(names));
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& data) {
  out << "time,status";
  for (const auto& n : data.covariate_names()) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (const auto& r : data.records()) {
    out << r.time << ',' << r.cause;
    for (double x : r.covariates) out << ',' << x;
    out << '\n';
  }
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_csv(out, data);
}

Matrix read_matrix_csv(std::istream& in, std::vector<std::string>* header_out) {
  const auto header = read_header(in);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    const std::string where = "row " + std::to_string(rows.size() + 1);
    if (fields.size() != header.size()) throw ParseError(where + ": wrong field count");
    std::vector<double> v(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      if (!parse_double(fields[c], v[c])) throw ParseError(where + ": non-numeric value");
    rows.push_back(std::move(v));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < header.size(); ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  if (header_out) *header_out = header;
  return m;
}

Matrix load_matrix_csv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_matrix_csv(in, header);
}

std::vector<double> empirical_quantiles(std::vector<double> values, std::span<const double> probs) {
  if (values.empty()) throw EstimationError("quantiles of an empty sample");
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (!(probs[k] > 0.0 && probs[k] < 1.0)) throw ParameterError("quantile probabilities must lie in (0,1)");
    if (k > 0 && !(probs[k] > probs[k - 1])) throw ParameterError("quantile probabilities must be strictly increasing");
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) {
    // smallest order statistic x_(k) with k/n >= p
    auto k = static_cast<std::size_t>(std::ceil(n * p - 1e-9));
    k = std::clamp<std::size_t>(k, 1, values.size());
    out.push_back(values[k - 1]);
  }
  return out;
}

std::vector<double> marginal_event_quantiles(const Dataset& data, std::span<const double> probs) {
  std::vector<double> times;
  for (const auto& r : data.records())
    if (r.event) times.push_back(r.time);
  if (times.empty()) throw EstimationError("no uncensored records: event-time quantiles undefined");
  return empirical_quantiles(std::move(times), probs);
}

}  // namespace ciftree
