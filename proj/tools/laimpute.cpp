// laimpute: simulate, denoise, train, impute, baseline, evaluate, gradcheck.
//
// Every command ends by printing one `key=value` summary line on stdout.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "laimpute/baselines.hpp"
#include "laimpute/checkpoint.hpp"
#include "laimpute/eval.hpp"
#include "laimpute/kv_config.hpp"
#include "laimpute/sar.hpp"
#include "laimpute/series.hpp"
#include "laimpute/synth.hpp"
#include "laimpute/train.hpp"

namespace fs = std::filesystem;
using namespace laimpute;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitMethodFailed = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_config = true) {
  if (with_config) {
    cmd->add_option("--config", opts.config_path, "flat key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", opts.overrides, "config override key=value (repeatable)");
  }
  cmd->add_option("--seed", opts.seed, "seed for every random component of this invocation");
  cmd->add_option("--threads", opts.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("-v,--verbose", opts.verbose, "extra diagnostics on stderr");
}

/// defaults < file < --set < dedicated flags
KeyValueConfig load_config(const CommonOptions& opts) {
  KeyValueConfig kv;
  if (!opts.config_path.empty()) kv = KeyValueConfig::from_file(opts.config_path);
  for (const auto& o : opts.overrides) kv.set(o);
  if (opts.seed) kv.set("seed", std::to_string(*opts.seed));
  return kv;
}

void summary(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string line;
  for (const auto& [k, v] : kv) line += (line.empty() ? "" : " ") + k + "=" + v;
  std::cout << line << std::endl;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  CommonOptions common;
  std::string out_dir;
};

int run_simulate(const SimulateArgs& args) {
  const KeyValueConfig kv = load_config(args.common);
  const Index n_series = kv.get_int("n_series", 250);
  const Index stack_size = kv.get_int("stack_size", 0);
  const Index stack_bands = kv.get_int("stack_bands", 32);
  const double stack_looks = kv.get_double("stack_looks", 4.0);
  const PhenologyConfig pc = PhenologyConfig::from_config(kv);
  kv.reject_unused();
  if (n_series < 1) throw ConfigError("n_series must be positive");
  if (stack_size < 0 || stack_bands < 1) throw ConfigError("stack_size must be >= 0 and stack_bands >= 1");

  Rng rng(derive_seed(pc.seed, "simulate"));
  const SyntheticCorpus corpus = gen_dataset(pc, n_series, rng);
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  write_csv(corpus.gapped, dir / "series.csv");
  write_csv(corpus.truth, dir / "series_truth.csv");
  {
    std::ofstream cfg(dir / "simulate.cfg");
    cfg << pc.to_config_text() << "n_series=" << n_series << "\n";
  }

  Index observed = 0;
  Index total = 0;
  for (const auto& r : corpus.gapped) {
    observed += r.lai_mask.count();
    total += r.size();
  }
  std::vector<std::pair<std::string, std::string>> out{{"command", "simulate"},
                                                       {"n_series", std::to_string(n_series)},
                                                       {"steps", std::to_string(corpus.gapped.front().size())},
                                                       {"lai_observed_fraction", fmt(double(observed) / double(total))},
                                                       {"seed", std::to_string(pc.seed)}};
  if (stack_size > 0) {
    // VV truth with a few field patches; VH follows from the season-mean VH/VV curve.
    Image vv_truth(stack_size, stack_size);
    for (Index y = 0; y < stack_size; ++y)
      for (Index x = 0; x < stack_size; ++x) vv_truth(y, x) = 0.05 + 0.05 * static_cast<double>(((x / 16) + (y / 16)) % 3);
    const RasterStack vv = gen_speckle_stack(vv_truth, stack_bands, stack_looks, derive_seed(pc.seed, "stack.vv"));
    const Vector times = Eigen::Map<const Vector>(vv.times.data(), static_cast<Index>(vv.times.size()));
    const Vector lai = gen_lai_curve(pc, times.cwiseMin(pc.season_days));
    const Vector ratio_db = gen_vhvv_curve(pc, lai);
    RasterStack vh = vv;
    Rng vh_rng(derive_seed(pc.seed, "stack.vh"));
    std::gamma_distribution<double> speckle(stack_looks, 1.0 / stack_looks);
    for (Index b = 0; b < vh.band_count(); ++b) {
      const double gain = std::pow(10.0, ratio_db[b] / 10.0);
      for (Index y = 0; y < stack_size; ++y)
        for (Index x = 0; x < stack_size; ++x) vh.bands[b](y, x) = vv_truth(y, x) * gain * speckle(vh_rng);
    }
    write_stack(vv, dir / "vv.hdr");
    write_stack(vh, dir / "vh.hdr");
    out.emplace_back("stack_size", std::to_string(stack_size));
    out.emplace_back("stack_bands", std::to_string(stack_bands));
  }
  summary(out);
  return 0;
}

// ---------------------------------------------------------------------------

struct DenoiseArgs {
  CommonOptions common;
  std::string input;
  std::string out_dir;
  int window = 14;
  double looks = 4.0;
  bool squared = false;
};

double mean_temporal_variance(const RasterStack& s) {
  const Index m = s.band_count();
  if (m < 2) return 0.0;
  double acc = 0.0;
  for (Index y = 0; y < s.height; ++y) {
    for (Index x = 0; x < s.width; ++x) {
      double mean = 0.0;
      for (Index t = 0; t < m; ++t) mean += s.bands[t](y, x);
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (Index t = 0; t < m; ++t) var += (s.bands[t](y, x) - mean) * (s.bands[t](y, x) - mean);
      acc += var / static_cast<double>(m - 1);
    }
  }
  return acc / static_cast<double>(s.width * s.height);
}

int run_denoise(const DenoiseArgs& args) {
  const RasterStack input = read_stack(args.input);
  QueganOptions opts;
  opts.window = args.window;
  opts.looks = args.looks;
  opts.variance_form = args.squared ? VarianceForm::kSquared : VarianceForm::kAsPrinted;
  const FilterOutput out = quegan_filter(input, opts);

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  write_stack(out.denoised, dir / "denoised.hdr");
  write_stack(out.variance, dir / "variance.hdr");

  double max_shift = 0.0;
  for (Index t = 0; t < input.band_count(); ++t) {
    const double before = input.bands[t].mean();
    const double after = out.denoised.bands[t].mean();
    const double shift = before != 0.0 ? std::abs(after - before) / std::abs(before) : std::abs(after);
    max_shift = std::max(max_shift, shift);
    std::cout << "band=" << t << " mean_before=" << fmt(before) << " mean_after=" << fmt(after) << "\n";
  }
  const double var_in = mean_temporal_variance(input);
  const double var_out = mean_temporal_variance(out.denoised);
  summary({{"command", "denoise"},
           {"bands", std::to_string(input.band_count())},
           {"width", std::to_string(input.width)},
           {"height", std::to_string(input.height)},
           {"window", std::to_string(args.window)},
           {"looks", fmt(args.looks)},
           {"invalid_pixels", std::to_string((!out.valid).count())},
           {"max_mean_shift", fmt(max_shift)},
           {"variance_ratio", var_in > 0.0 ? fmt(var_out / var_in) : std::string("nan")}});
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  CommonOptions common;
  std::string data;
  std::string arch = "bilstm";
  std::string checkpoint;
  std::string loss_trace;
};

TrainConfig train_config_from(const KeyValueConfig& kv, const CommonOptions& common) {
  TrainConfig defaults;
  defaults.threads = common.threads;
  return TrainConfig::from_config(kv, defaults);
}

int run_train(const TrainArgs& args) {
  KeyValueConfig kv = load_config(args.common);
  kv.set("arch", args.arch);
  if (args.common.threads) kv.set("threads", std::to_string(args.common.threads));
  const TrainConfig config = train_config_from(kv, args.common);
  kv.reject_unused();
  const auto records = read_csv(fs::path(args.data));
  const TrainResult result = train(records, config);

  ensure_parent(args.checkpoint);
  save_checkpoint(result.checkpoint, fs::path(args.checkpoint));
  if (!args.loss_trace.empty()) {
    ensure_parent(args.loss_trace);
    std::ofstream out(args.loss_trace);
    out << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < result.loss_trace.size(); ++e) out << e << ',' << format_double(result.loss_trace[e]) << '\n';
  }
  summary({{"command", "train"},
           {"arch", args.arch},
           {"records", std::to_string(records.size())},
           {"epochs", std::to_string(config.epochs)},
           {"initial_loss", fmt(result.loss_trace.front())},
           {"final_loss", fmt(result.loss_trace.back())},
           {"train_eval_loss", fmt(evaluate_loss(result.checkpoint, records))},
           {"seed", std::to_string(config.seed)}});
  return 0;
}

// ---------------------------------------------------------------------------

struct ImputeArgs {
  CommonOptions common;
  std::string data;
  std::string checkpoint;
  std::string out;
};

int run_impute(const ImputeArgs& args) {
  const Checkpoint ck = load_checkpoint(fs::path(args.checkpoint));
  const auto records = read_csv(fs::path(args.data));
  std::vector<TimeSeriesRecord> imputed;
  Index filled = 0;
  for (const auto& r : records) {
    filled += r.size() - r.lai_mask.count();
    imputed.push_back(impute(r, ck));
  }
  ensure_parent(args.out);
  write_csv(imputed, fs::path(args.out));
  summary({{"command", "impute"},
           {"records", std::to_string(records.size())},
           {"filled", std::to_string(filled)},
           {"arch", ck.params.arch.bidirectional ? "bilstm" : "lstm"}});
  return 0;
}

// ---------------------------------------------------------------------------

struct BaselineArgs {
  CommonOptions common;
  std::string data;
  std::string method = "poly";
  int degree = 3;
  int smooth_window = 5;
  std::string out;
  std::string models;
};

int run_baseline(const BaselineArgs& args) {
  BaselineOptions opts;
  opts.method = parse_baseline_method(args.method);
  opts.degree = args.degree;
  opts.smooth_window = args.smooth_window;
  const auto records = read_csv(fs::path(args.data));
  std::vector<TimeSeriesRecord> imputed;
  std::string models;
  Index failed = 0;
  for (const auto& r : records) {
    try {
      const BaselineResult res = baseline_impute(r, opts);
      imputed.push_back(res.imputed);
      models += "# series " + r.series_id + "\n" + to_config_text(res.model);
    } catch (const Error& e) {
      ++failed;
      imputed.push_back(r);  // left unfilled
      models += "# series " + r.series_id + " failed: " + e.what() + "\n";
      if (args.common.verbose) std::cerr << r.series_id << ": " << e.what() << "\n";
    }
  }
  // Failed series keep their gaps, which breaks the all-true output mask;
  // they are still written so row counts match the input.
  ensure_parent(args.out);
  write_csv(imputed, fs::path(args.out));
  if (!args.models.empty()) {
    ensure_parent(args.models);
    std::ofstream(args.models) << models;
  }
  summary({{"command", "baseline"},
           {"method", args.method},
           {"records", std::to_string(records.size())},
           {"failed", std::to_string(failed)}});
  return failed == static_cast<Index>(records.size()) && !records.empty() ? kExitMethodFailed : 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  CommonOptions common;
  std::string gapped;
  std::string truth;
  std::string methods = "bilstm,lstm,poly,exp";
  std::string report;
  std::string plot_dir;
  std::vector<std::string> plot_series;
};

int run_evaluate(const EvaluateArgs& args) {
  KeyValueConfig kv = load_config(args.common);
  const auto methods = parse_method_list(args.methods);
  const auto gapped = read_csv(fs::path(args.gapped));
  const auto truth = read_csv(fs::path(args.truth));

  BenchmarkConfig bc;
  bc.n_train = kv.get_int("n_train", static_cast<std::int64_t>(gapped.size() * 4 / 5));
  bc.boundary_time = kv.get_double("boundary_time", PhenologyConfig{}.senescence_time);
  bc.baseline.degree = static_cast<int>(kv.get_int("degree", 3));
  bc.baseline.smooth_window = static_cast<int>(kv.get_int("smooth_window", 5));
  if (args.common.threads) kv.set("threads", std::to_string(args.common.threads));
  bc.train = train_config_from(kv, args.common);
  kv.reject_unused();

  const BenchmarkResult result = run_benchmark(gapped, truth, methods, bc);
  ensure_parent(args.report);
  std::ofstream(args.report) << to_report_text(result.report);
  if (!args.plot_dir.empty()) {
    std::vector<std::string> ids = args.plot_series;
    if (ids.empty()) ids.push_back(result.test_gapped.front().series_id);
    emit_plot_data(result, ids, args.plot_dir);
  }

  std::vector<std::pair<std::string, std::string>> out{{"command", "evaluate"},
                                                       {"n_train", std::to_string(bc.n_train)},
                                                       {"n_test", std::to_string(result.test_gapped.size())}};
  bool any_failed = false;
  for (const auto& m : result.report.methods) {
    const auto r = m.overall.rmse();
    out.emplace_back(m.name + "_rmse", r ? fmt(*r) : "empty");
    any_failed = any_failed || m.wholly_failed;
    if (m.wholly_failed) std::cerr << "method " << m.name << " failed: " << m.failure << "\n";
  }
  summary(out);
  return any_failed ? kExitMethodFailed : 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  CommonOptions common;
  int hidden = 60;
  int dense = 50;
  double step = 1e-5;
  double tolerance = 1e-6;
};

int run_gradcheck(const GradcheckArgs& args) {
  const std::uint64_t seed = args.common.seed.value_or(1);
  double worst = 0.0;
  bool passed = true;
  for (const bool bidirectional : {false, true}) {
    for (const Index steps : {1, 3, 8}) {
      Architecture arch;
      arch.bidirectional = bidirectional;
      arch.hidden = args.hidden;
      arch.dense = args.dense;
      const std::string tag = std::string(bidirectional ? "bilstm" : "lstm") + "." + std::to_string(steps);
      const auto params = init_params(derive_seed(seed, "params." + tag), arch);
      auto problem = random_gradient_problem(derive_seed(seed, "problem." + tag), arch, steps);
      Rng rng(derive_seed(seed, "dropout." + tag));
      problem.dropout_scale = make_dropout_scale<double>(rng, arch.dense, steps, arch.dropout_p);
      const auto report = gradient_check(params, problem, args.step, args.tolerance);
      if (args.common.verbose) {
        for (const auto& b : report.blocks)
          std::cerr << tag << ' ' << b.name << " rel=" << b.worst_relative_error << (b.passed ? "" : " FAIL") << "\n";
      }
      worst = std::max(worst, report.worst_relative_error);
      passed = passed && report.passed;
    }
  }
  std::ostringstream w;
  w.precision(3);
  w << std::scientific << worst;
  summary({{"command", "gradcheck"},
           {"seed", std::to_string(seed)},
           {"worst_relative_error", w.str()},
           {"tolerance", fmt(args.tolerance)},
           {"passed", passed ? "1" : "0"}});
  return passed ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gap filling of LAI time series from SAR VH/VV with recurrent networks"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic gapped/truth corpus");
  add_common(c_sim, sim.common);
  c_sim->add_option("--out", sim.out_dir, "output directory")->required();

  DenoiseArgs den;
  auto* c_den = app.add_subcommand("denoise", "multitemporal speckle filtering of a raster stack");
  add_common(c_den, den.common, false);
  c_den->add_option("--input", den.input, "stack header (.hdr)")->required()->check(CLI::ExistingFile);
  c_den->add_option("--out", den.out_dir, "output directory")->required();
  c_den->add_option("--window", den.window, "multilook window")->check(CLI::PositiveNumber);
  c_den->add_option("--looks", den.looks, "equivalent number of looks")->check(CLI::PositiveNumber);
  c_den->add_flag("--squared-variance", den.squared, "variance from the squared multilooked value");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train a recurrent imputation network");
  add_common(c_tr, tr.common);
  c_tr->add_option("--data", tr.data, "series CSV")->required()->check(CLI::ExistingFile);
  c_tr->add_option("--arch", tr.arch, "bilstm or lstm")->check(CLI::IsMember({"bilstm", "lstm"}));
  c_tr->add_option("--checkpoint", tr.checkpoint, "checkpoint output")->required();
  c_tr->add_option("--loss-trace", tr.loss_trace, "epoch,mean_loss CSV output");

  ImputeArgs im;
  auto* c_im = app.add_subcommand("impute", "fill LAI gaps with a trained network");
  add_common(c_im, im.common, false);
  c_im->add_option("--data", im.data, "series CSV")->required()->check(CLI::ExistingFile);
  c_im->add_option("--checkpoint", im.checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  c_im->add_option("--out", im.out, "imputed series CSV")->required();

  BaselineArgs bl;
  auto* c_bl = app.add_subcommand("baseline", "fill LAI gaps by per-series regression on VH/VV");
  add_common(c_bl, bl.common, false);
  c_bl->add_option("--data", bl.data, "series CSV")->required()->check(CLI::ExistingFile);
  c_bl->add_option("--method", bl.method, "poly or exp")->check(CLI::IsMember({"poly", "exp"}));
  c_bl->add_option("--degree", bl.degree, "polynomial degree")->check(CLI::NonNegativeNumber);
  c_bl->add_option("--smooth-window", bl.smooth_window, "odd Gaussian window for VH/VV (1 = off)")
      ->check(CLI::PositiveNumber);
  c_bl->add_option("--out", bl.out, "imputed series CSV")->required();
  c_bl->add_option("--models", bl.models, "fitted models as key=value text");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "benchmark imputation methods against ground truth");
  add_common(c_ev, ev.common);
  c_ev->add_option("--gapped", ev.gapped, "gapped series CSV")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--truth", ev.truth, "ground-truth series CSV")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--methods", ev.methods, "comma list of bilstm,lstm,poly,exp");
  c_ev->add_option("--report", ev.report, "report output")->required();
  c_ev->add_option("--plot-dir", ev.plot_dir, "directory for per-series plot CSVs");
  c_ev->add_option("--plot-series", ev.plot_series, "series ids to emit (default: first test series)");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "compare BPTT gradients with central differences");
  add_common(c_gc, gc.common, false);
  c_gc->add_option("--hidden", gc.hidden)->check(CLI::PositiveNumber);
  c_gc->add_option("--dense", gc.dense)->check(CLI::PositiveNumber);
  c_gc->add_option("--step", gc.step)->check(CLI::PositiveNumber);
  c_gc->add_option("--tolerance", gc.tolerance)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_den->parsed()) return run_denoise(den);
    if (c_tr->parsed()) return run_train(tr);
    if (c_im->parsed()) return run_impute(im);
    if (c_bl->parsed()) return run_baseline(bl);
    if (c_ev->parsed()) return run_evaluate(ev);
    if (c_gc->parsed()) return run_gradcheck(gc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
  return kExitFailure;
}
