#ifndef LAIMPUTE_EVAL_HPP
#define LAIMPUTE_EVAL_HPP

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "laimpute/baselines.hpp"
#include "laimpute/series.hpp"
#include "laimpute/train.hpp"

namespace laimpute {

/// Root mean squared error over the selected entries.
template <typename DerivedA, typename DerivedB, typename DerivedS>
double rmse(const Eigen::DenseBase<DerivedA>& pred, const Eigen::DenseBase<DerivedB>& ref,
            const Eigen::DenseBase<DerivedS>& selector) {
  if (pred.size() != ref.size() || pred.size() != selector.size()) throw DimensionError("rmse: length mismatch");
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    if (!selector.derived().coeff(i)) continue;
    const double d = static_cast<double>(pred.derived().coeff(i)) - static_cast<double>(ref.derived().coeff(i));
    sum += d * d;
    ++count;
  }
  if (count == 0) throw InsufficientDataError("rmse: empty selection");
  return std::sqrt(sum / static_cast<double>(count));
}

enum class Method { kBiLstm, kLstm, kPoly, kExp };

Method parse_method(const std::string& name);
std::string to_string(Method method);
std::vector<Method> parse_method_list(const std::string& comma_separated);

/// Squared-error accumulator for one group of scored points.
struct SegmentScore {
  double sse = 0.0;
  Index count = 0;

  std::optional<double> rmse() const {
    if (count == 0) return std::nullopt;
    return std::sqrt(sse / static_cast<double>(count));
  }
};

struct MethodReport {
  std::string name;
  SegmentScore overall;
  SegmentScore green_up;
  SegmentScore senescence;
  std::vector<std::optional<double>> per_series_rmse;  // nullopt: failed or nothing to score
  Index failed_series = 0;
  bool wholly_failed = false;
  std::string failure;  // first failure message, if any
};

struct EvalReport {
  std::vector<MethodReport> methods;
  std::vector<std::string> test_series;
  std::vector<std::pair<std::string, std::string>> metadata;

  const MethodReport& method(const std::string& name) const;
};

struct BenchmarkConfig {
  Index n_train = 200;             // leading series used for training; the rest are scored
  double boundary_time = 160.0;    // green-up before, senescence from this day on
  TrainConfig train;               // `bidirectional` is set per network method
  BaselineOptions baseline;        // `method` is set per baseline method
};

struct BenchmarkResult {
  EvalReport report;
  std::vector<TimeSeriesRecord> test_gapped;
  std::vector<TimeSeriesRecord> test_truth;
  // method name -> imputed test records (nullopt where the method failed)
  std::map<std::string, std::vector<std::optional<TimeSeriesRecord>>> imputed;
  std::map<std::string, std::vector<double>> loss_traces;
};

/// Scores only the points masked in `gapped`, against `truth`.
void score_series(const TimeSeriesRecord& gapped, const TimeSeriesRecord& truth, const TimeSeriesRecord& imputed,
                  double boundary_time, MethodReport& report);

/// Trains the network methods on the first n_train gapped series, fits the
/// baselines per test series, imputes the test gaps and scores them.
BenchmarkResult run_benchmark(const std::vector<TimeSeriesRecord>& gapped, const std::vector<TimeSeriesRecord>& truth,
                              const std::vector<Method>& methods, const BenchmarkConfig& config);

/// Scores already imputed records (one vector per method name).
EvalReport score_imputations(const std::vector<TimeSeriesRecord>& gapped, const std::vector<TimeSeriesRecord>& truth,
                             const std::map<std::string, std::vector<std::optional<TimeSeriesRecord>>>& imputed,
                             const std::vector<std::string>& method_order, double boundary_time);

/// `key=value` lines in a stable order; empty segments print as "empty".
std::string to_report_text(const EvalReport& report);

/// Writes `<dir>/<series_id>.csv` (time,truth,observed,<method>...) per
/// selected series plus `<dir>/report.txt`.
void emit_plot_data(const BenchmarkResult& result, const std::vector<std::string>& series_ids,
                    const std::filesystem::path& dir);

}  // namespace laimpute

#endif  // LAIMPUTE_EVAL_HPP
