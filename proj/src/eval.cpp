#include "laimpute/eval.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace laimpute {

Method parse_method(const std::string& name) {
  if (name == "bilstm") return Method::kBiLstm;
  if (name == "lstm") return Method::kLstm;
  if (name == "poly") return Method::kPoly;
  if (name == "exp") return Method::kExp;
  throw ConfigError("unknown method '" + name + "' (expected bilstm, lstm, poly or exp)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kBiLstm:
      return "bilstm";
    case Method::kLstm:
      return "lstm";
    case Method::kPoly:
      return "poly";
    case Method::kExp:
      return "exp";
  }
  return "unknown";
}

std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Method m = parse_method(item);
    for (const Method seen : out)
      if (seen == m) throw ConfigError("method '" + item + "' listed twice");
    out.push_back(m);
  }
  if (out.empty()) throw ConfigError("empty method list");
  return out;
}

const MethodReport& EvalReport::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  throw ParameterError("report has no method '" + name + "'");
}

namespace {

void check_pair(const TimeSeriesRecord& gapped, const TimeSeriesRecord& truth) {
  if (gapped.series_id != truth.series_id)
    throw AlignmentError("series '" + gapped.series_id + "' paired with truth '" + truth.series_id + "'");
  if (gapped.size() != truth.size() || gapped.times != truth.times)
    throw AlignmentError("series '" + gapped.series_id + "' differs from its truth in time steps");
  if (!truth.lai_mask.all()) throw AlignmentError("truth series '" + truth.series_id + "' has missing LAI");
}

std::string digest(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(derive_seed(0, text)));
  return buf;
}

}  // namespace

void score_series(const TimeSeriesRecord& gapped, const TimeSeriesRecord& truth, const TimeSeriesRecord& imputed,
                  double boundary_time, MethodReport& report) {
  check_pair(gapped, truth);
  if (imputed.size() != truth.size()) throw AlignmentError("imputed series '" + imputed.series_id + "' has wrong length");
  SegmentScore series;
  for (Index t = 0; t < truth.size(); ++t) {
    if (gapped.lai_mask[t]) continue;  // pass-through points are never scored
    const double d = imputed.lai[t] - truth.lai[t];
    const double sq = d * d;
    series.sse += sq;
    ++series.count;
    SegmentScore& seg = truth.times[t] < boundary_time ? report.green_up : report.senescence;
    seg.sse += sq;
    ++seg.count;
  }
  report.overall.sse += series.sse;
  report.overall.count += series.count;
  report.per_series_rmse.push_back(series.rmse());
}

EvalReport score_imputations(const std::vector<TimeSeriesRecord>& gapped, const std::vector<TimeSeriesRecord>& truth,
                             const std::map<std::string, std::vector<std::optional<TimeSeriesRecord>>>& imputed,
                             const std::vector<std::string>& method_order, double boundary_time) {
  if (gapped.size() != truth.size()) throw AlignmentError("gapped and truth corpora differ in series count");
  EvalReport report;
  for (std::size_t i = 0; i < gapped.size(); ++i) {
    check_pair(gapped[i], truth[i]);
    report.test_series.push_back(gapped[i].series_id);
  }
  for (const auto& name : method_order) {
    const auto it = imputed.find(name);
    if (it == imputed.end()) throw ParameterError("no imputations for method '" + name + "'");
    if (it->second.size() != gapped.size()) throw AlignmentError("method '" + name + "' imputed a different series count");
    MethodReport m;
    m.name = name;
    for (std::size_t i = 0; i < gapped.size(); ++i) {
      if (!it->second[i]) {
        ++m.failed_series;
        m.per_series_rmse.push_back(std::nullopt);
        continue;
      }
      score_series(gapped[i], truth[i], *it->second[i], boundary_time, m);
    }
    m.wholly_failed = !gapped.empty() && m.failed_series == static_cast<Index>(gapped.size());
    report.methods.push_back(std::move(m));
  }
  return report;
}

BenchmarkResult run_benchmark(const std::vector<TimeSeriesRecord>& gapped, const std::vector<TimeSeriesRecord>& truth,
                              const std::vector<Method>& methods, const BenchmarkConfig& config) {
  if (gapped.size() != truth.size()) throw AlignmentError("gapped and truth corpora differ in series count");
  for (std::size_t i = 0; i < gapped.size(); ++i) check_pair(gapped[i], truth[i]);
  if (config.n_train < 0 || static_cast<std::size_t>(config.n_train) >= gapped.size())
    throw ParameterError("n_train must leave at least one test series");
  if (methods.empty()) throw ParameterError("run_benchmark: no methods");

  BenchmarkResult result;
  const auto split = gapped.begin() + config.n_train;
  const std::vector<TimeSeriesRecord> train_set(gapped.begin(), split);
  result.test_gapped.assign(split, gapped.end());
  result.test_truth.assign(truth.begin() + config.n_train, truth.end());
  const std::size_t n_test = result.test_gapped.size();

  std::vector<std::string> order;
  std::map<std::string, std::string> failures;
  for (const Method method : methods) {
    const std::string name = to_string(method);
    order.push_back(name);
    auto& slots = result.imputed[name];
    slots.assign(n_test, std::nullopt);

    if (method == Method::kBiLstm || method == Method::kLstm) {
      TrainConfig tc = config.train;
      tc.bidirectional = method == Method::kBiLstm;
      try {
        const TrainResult trained = train(train_set, tc);
        result.loss_traces[name] = trained.loss_trace;
        for (std::size_t i = 0; i < n_test; ++i) {
          try {
            slots[i] = impute(result.test_gapped[i], trained.checkpoint);
          } catch (const Error& e) {
            failures.emplace(name, e.what());
          }
        }
      } catch (const Error& e) {
        failures.emplace(name, e.what());
      }
    } else {
      BaselineOptions opts = config.baseline;
      opts.method = method == Method::kPoly ? BaselineMethod::kPolynomial : BaselineMethod::kExponential;
      for (std::size_t i = 0; i < n_test; ++i) {
        try {
          slots[i] = baseline_impute(result.test_gapped[i], opts).imputed;
        } catch (const Error& e) {
          failures.emplace(name, e.what());
        }
      }
    }
  }

  result.report = score_imputations(result.test_gapped, result.test_truth, result.imputed, order, config.boundary_time);
  for (auto& m : result.report.methods) {
    if (const auto it = failures.find(m.name); it != failures.end()) m.failure = it->second;
  }
  result.report.metadata = {{"n_train", std::to_string(config.n_train)},
                            {"n_test", std::to_string(n_test)},
                            {"boundary_time", format_double(config.boundary_time)},
                            {"train_seed", std::to_string(config.train.seed)},
                            {"train_config_digest", digest(config.train.to_config_text())},
                            {"baseline_degree", std::to_string(config.baseline.degree)},
                            {"baseline_smooth_window", std::to_string(config.baseline.smooth_window)}};
  return result;
}

std::string to_report_text(const EvalReport& report) {
  std::vector<std::pair<std::string, std::string>> kv = report.metadata;
  auto fmt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("empty"); };
  std::string names;
  for (const auto& m : report.methods) names += (names.empty() ? "" : ",") + m.name;
  kv.emplace_back("methods", names);
  for (const auto& m : report.methods) {
    const std::string p = "method." + m.name + ".";
    kv.emplace_back(p + "overall_rmse", fmt(m.overall.rmse()));
    kv.emplace_back(p + "overall_count", std::to_string(m.overall.count));
    kv.emplace_back(p + "green_up_rmse", fmt(m.green_up.rmse()));
    kv.emplace_back(p + "green_up_count", std::to_string(m.green_up.count));
    kv.emplace_back(p + "senescence_rmse", fmt(m.senescence.rmse()));
    kv.emplace_back(p + "senescence_count", std::to_string(m.senescence.count));
    kv.emplace_back(p + "failed_series", std::to_string(m.failed_series));
    kv.emplace_back(p + "wholly_failed", m.wholly_failed ? "1" : "0");
    std::string per_series;
    for (const auto& v : m.per_series_rmse) per_series += (per_series.empty() ? "" : ",") + fmt(v);
    kv.emplace_back(p + "per_series_rmse", per_series);
  }
  return format_key_values(kv);
}

void emit_plot_data(const BenchmarkResult& result, const std::vector<std::string>& series_ids,
                    const std::filesystem::path& dir) {
  std::vector<std::size_t> picks;
  for (const auto& id : series_ids) {
    std::size_t found = result.test_gapped.size();
    for (std::size_t i = 0; i < result.test_gapped.size(); ++i)
      if (result.test_gapped[i].series_id == id) found = i;
    if (found == result.test_gapped.size()) throw ParameterError("unknown series id '" + id + "'");
    picks.push_back(found);
  }
  std::filesystem::create_directories(dir);
  for (const std::size_t i : picks) {
    const auto& gapped = result.test_gapped[i];
    const auto& truth = result.test_truth[i];
    std::ofstream out(dir / (gapped.series_id + ".csv"));
    if (!out) throw FormatError("cannot write plot data for '" + gapped.series_id + "'");
    out << "time,truth,observed";
    for (const auto& m : result.report.methods) out << ',' << m.name;
    out << '\n';
    for (Index t = 0; t < gapped.size(); ++t) {
      out << format_double(truth.times[t]) << ',' << format_double(truth.lai[t]) << ',';
      if (gapped.lai_mask[t]) out << format_double(gapped.lai[t]);
      for (const auto& m : result.report.methods) {
        out << ',';
        const auto& imputed = result.imputed.at(m.name)[i];
        if (imputed) out << format_double(imputed->lai[t]);
      }
      out << '\n';
    }
  }
  std::ofstream report(dir / "report.txt");
  if (!report) throw FormatError("cannot write report in " + dir.string());
  report << to_report_text(result.report);
}

}  // namespace laimpute
