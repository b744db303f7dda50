#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ciftree {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One subject's observed data: follow-up time min(T, C), the any-cause
/// event indicator, the cause (0 iff censored) and the covariate vector.
struct ObservedRecord {
  double time = 0.0;
  bool event = false;
  int cause = 0;
  std::vector<double> covariates;

  /// I(time <= t, cause == m) for an observed event of cause m.
  double incidence(int m, double t) const {
    return (event && cause == m && time <= t) ? 1.0 : 0.0;
  }
};

/// Validated, immutable collection of records sharing one covariate dimension.
class Dataset {
 public:
  /// `causes` = 0 infers K from the largest observed cause (at least 1).
  explicit Dataset(std::vector<ObservedRecord> records, int causes = 0,
                   std::vector<std::string> covariate_names = {});

  std::size_t size() const { return records_.size(); }
  int dim() const { return dim_; }
  int causes() const { return causes_; }
  const std::vector<ObservedRecord>& records() const { return records_; }
  const ObservedRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const Matrix& covariates() const { return covariates_; }
  std::size_t censored_count() const;

  /// Index of a named covariate; throws SchemaError when absent.
  int covariate_index(const std::string& name) const;

 private:
  std::vector<ObservedRecord> records_;
  int dim_ = 0;
  int causes_ = 0;
  std::vector<std::string> names_;
  Matrix covariates_;
};

/// Strictly increasing evaluation times with positive weights summing to one.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> times, std::vector<double> weights);
  static TimeGrid equal_weights(std::vector<double> times);

  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& weights() const { return weights_; }
  double operator[](std::size_t j) const { return times_[j]; }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> times_;
  std::vector<double> weights_;
};

struct CsvSchema {
  std::string time_column = "time";
  std::string status_column = "status";
  /// Empty: every column other than time and status, in file order.
  std::vector<std::string> covariate_columns;
  /// 0 infers K from the data.
  int causes = 0;
};

Dataset read_csv(std::istream& in, const CsvSchema& schema = {});
Dataset load_csv(const std::string& path, const CsvSchema& schema = {});

/// Writes time,status,<covariates> with 17 significant digits.
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const std::string& path, const Dataset& data);

/// Reads a header + numeric matrix CSV (e.g. test covariates).
Matrix read_matrix_csv(std::istream& in, std::vector<std::string>* header = nullptr);
Matrix load_matrix_csv(const std::string& path, std::vector<std::string>* header = nullptr);

/// Type-1 (lower order statistic) empirical quantiles of `values`.
/// `probs` must lie in (0,1) and be strictly increasing.
std::vector<double> empirical_quantiles(std::vector<double> values, std::span<const double> probs);

/// Quantiles of the follow-up time among uncensored records.
std::vector<double> marginal_event_quantiles(const Dataset& data, std::span<const double> probs);

}  // namespace ciftree
