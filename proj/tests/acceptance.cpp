// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "laimpute/baselines.hpp"
#include "laimpute/bptt.hpp"
#include "laimpute/checkpoint.hpp"
#include "laimpute/eval.hpp"
#include "laimpute/sar.hpp"
#include "laimpute/synth.hpp"
#include "laimpute/train.hpp"

using namespace laimpute;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int number, const std::string& title, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.passed) ++failures;
  std::printf("%s [%d] %s: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", number, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::string fix(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

double mean_temporal_variance(const RasterStack& s) {
  const Index m = s.band_count();
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

TimeSeriesRecord sparse_record() {
  Vector lai(11), vv(11);
  Mask lm(11), vm(11);
  lai << 0.32, 0, 0.43, 0.53, 0, 0, 0, 1.8, 2.16, 0, 0;
  lm << true, false, true, true, false, false, false, true, true, false, false;
  vv << 0, -8.28, 0, -7.85, -7.56, -7.21, -6.84, 0, -6.12, -5.83, -5.65;
  vm << false, true, false, true, true, true, true, false, true, true, true;
  return make_record("sparse11", Vector::LinSpaced(11, 31.0, 81.0), lai, lm, vv, vm);
}

// Shared between the overfit, pass-through and determinism criteria.
struct OverfitRun {
  TrainResult first;
  TrainResult second;
  std::vector<TimeSeriesRecord> records;
  double loss = 0.0;
};
OverfitRun overfit;

}  // namespace

int main() {
  report(1, "gradient correctness (hidden 60, dense 50, T in {1,3,8}, step 1e-5, tol 1e-6, < 60 s)", [] {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool ok = true;
    for (bool bidirectional : {false, true}) {
      for (Index steps : {1, 3, 8}) {
        Architecture arch;
        arch.bidirectional = bidirectional;
        const auto params = init_params(derive_seed(1, "accept.params") + steps, arch);
        auto problem = random_gradient_problem(derive_seed(1, "accept.problem") + steps, arch, steps);
        Rng rng(steps);
        problem.dropout_scale = make_dropout_scale<double>(rng, arch.dense, steps, arch.dropout_p);
        const auto r = gradient_check(params, problem, 1e-5, 1e-6);
        worst = std::max(worst, r.worst_relative_error);
        ok = ok && r.passed;
      }
    }
    const double secs = seconds_since(start);
    return Outcome{ok && worst < 1e-6 && secs < 60.0, "worst relative error " + sci(worst) + " over 6 configurations"};
  });

  report(2, "cell and loss hand examples within 1e-12", [] {
    const auto p = LstmCellParams<double>::Zero(4, 3);
    double worst = 0.0;
    for (double c : {1.0, -0.7, 2.5}) {
      CellState<double> s = CellState<double>::Zero(3);
      s.c.setConstant(c);
      const auto next = lstm_cell_forward<double>(VectorX<double>::Constant(4, 0.3), s, p);
      worst = std::max(worst, (next.h.array() - 0.5 * std::tanh(0.5 * c)).abs().maxCoeff());
      worst = std::max(worst, (next.c.array() - 0.5 * c).abs().maxCoeff());
    }
    MatrixX<double> p1(1, 1), y1(1, 1), p2(1, 2), y2(1, 2);
    p1 << 2.0;
    y1 << 0.0;
    p2 << 1.0, -3.0;
    y2 << 0.0, 0.0;
    const double l1 = half_mse_loss(p1, y1, ResponseMask::Constant(1, 1, true)).value;
    const double l2 = half_mse_loss(p2, y2, ResponseMask::Constant(1, 2, true)).value;
    worst = std::max({worst, std::abs(l1 - 2.0), std::abs(l2 - 2.5)});
    return Outcome{worst <= 1e-12, "h' = 0.5 tanh(0.5 c), losses " + fix(l1) + " and " + fix(l2) + ", worst deviation " +
                                       sci(worst)};
  });

  report(3, "temporal filter identities and 128x128 M=32 L=4 speckle (ratio < 0.3, mean shift < 2%, < 30 s)", [] {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(3);
    Image img(32, 32);
    for (Index i = 0; i < img.size(); ++i) img.data()[i] = uniform(rng, 0.01, 2.0);
    const bool m1 = quegan_filter(RasterStack{32, 32, {0.0}, {img}}).denoised.bands[0] == img;
    RasterStack flat{32, 32, {0.0, 6.0, 12.0}, {}};
    for (double c : {0.3, 0.05, 1.7}) flat.bands.push_back(Image::Constant(32, 32, c));
    const auto flat_out = quegan_filter(flat).denoised;
    bool constant = true;
    for (int t = 0; t < 3; ++t) constant = constant && flat_out.bands[t] == flat.bands[t];

    const auto stack = gen_speckle_stack(Image::Constant(128, 128, 1.0), 32, 4.0, derive_seed(1, "accept.speckle"));
    QueganOptions opts;
    opts.looks = 4.0;
    const auto out = quegan_filter(stack, opts);
    const double ratio = mean_temporal_variance(out.denoised) / mean_temporal_variance(stack);
    double shift = 0.0;
    for (Index t = 0; t < 32; ++t)
      shift = std::max(shift, std::abs(out.denoised.bands[t].mean() - stack.bands[t].mean()) / stack.bands[t].mean());
    const double secs = seconds_since(start);
    return Outcome{m1 && constant && ratio < 0.3 && shift < 0.02 && secs < 30.0,
                   std::string("M=1 exact ") + (m1 ? "yes" : "no") + ", constant exact " + (constant ? "yes" : "no") +
                       ", variance ratio " + fix(ratio) + " (window 14), max mean shift " + fix(100.0 * shift) + "%"};
  });

  report(4, "overfit 10 series with 30% gaps to masked loss < 0.01 within 2000 epochs, deterministic, < 5 min", [] {
    const auto start = std::chrono::steady_clock::now();
    PhenologyConfig pc;
    pc.midseason_gap_frac = 0.3;
    Rng rng(derive_seed(1, "accept.overfit"));
    overfit.records = gen_dataset(pc, 10, rng).gapped;
    TrainConfig tc;
    tc.epochs = 2000;
    tc.seed = 1;
    overfit.first = train(overfit.records, tc);
    const double secs = seconds_since(start);
    overfit.second = train(overfit.records, tc);
    overfit.loss = evaluate_loss(overfit.first.checkpoint, overfit.records);
    const bool same = overfit.first.loss_trace == overfit.second.loss_trace;
    return Outcome{overfit.loss < 0.01 && same && secs < 300.0,
                   "masked half-MSE on the training series (inference mode) " + sci(overfit.loss) +
                       ", last dropout/hold-out epoch loss " + sci(overfit.first.loss_trace.back()) +
                       ", repeat run identical " + (same ? "yes" : "no")};
  });

  report(5, "benchmark 200/50 series, 40% mid-season gaps, 3 seeds: BiLSTM < poly, exp; senescence BiLSTM < LSTM in >= 2",
         [] {
           const auto start = std::chrono::steady_clock::now();
           bool ordering = true;
           int senescence_wins = 0;
           std::ostringstream detail;
           for (std::uint64_t seed : {1u, 2u, 3u}) {
             PhenologyConfig pc;
             pc.midseason_gap_frac = 0.4;
             Rng rng(derive_seed(seed, "accept.corpus"));
             const auto corpus = gen_dataset(pc, 250, rng);
             BenchmarkConfig bc;
             bc.n_train = 200;
             bc.train.seed = seed;
             const auto res = run_benchmark(corpus.gapped, corpus.truth, parse_method_list("bilstm,lstm,poly,exp"), bc);
             const auto& r = res.report;
             const double bi = *r.method("bilstm").overall.rmse();
             const double po = *r.method("poly").overall.rmse();
             const double ex = *r.method("exp").overall.rmse();
             const double bi_sen = *r.method("bilstm").senescence.rmse();
             const double ls_sen = *r.method("lstm").senescence.rmse();
             ordering = ordering && bi < po && bi < ex;
             senescence_wins += bi_sen < ls_sen;
             detail << (seed > 1 ? "; " : "") << "seed " << seed << ": bilstm " << fix(bi) << " lstm "
                    << fix(*r.method("lstm").overall.rmse()) << " poly " << fix(po) << " exp " << fix(ex)
                    << ", senescence bilstm " << fix(bi_sen) << " lstm " << fix(ls_sen);
           }
           const double secs = seconds_since(start);
           detail << "; senescence wins " << senescence_wins << "/3";
           return Outcome{ordering && senescence_wins >= 2 && secs < 1800.0, detail.str()};
         });

  report(6, "pass-through: five observed values exact, six gaps finite", [] {
    const auto r = sparse_record();
    const auto out = impute(r, overfit.first.checkpoint);
    const double observed[] = {0.32, 0.43, 0.53, 1.8, 2.16};
    const Index at[] = {0, 2, 3, 7, 8};
    bool exact = true;
    for (int k = 0; k < 5; ++k) exact = exact && out.lai[at[k]] == observed[k];
    int finite_gaps = 0;
    std::ostringstream fills;
    for (Index t = 0; t < 11; ++t) {
      if (r.lai_mask[t]) continue;
      finite_gaps += std::isfinite(out.lai[t]);
      fills << (finite_gaps > 1 ? " " : "") << fix(out.lai[t]);
    }
    return Outcome{exact && finite_gaps == 6 && out.lai_mask.all(),
                   std::string("observed exact ") + (exact ? "yes" : "no") + ", gap fills " + fills.str()};
  });

  report(7, "baseline exactness: poly degree <= 3 to 1e-9, exp (2, 0.5, 0) to 1e-6", [] {
    const Vector x = Vector::LinSpaced(15, -14.0, -6.0);
    Vector c(4);
    c << 3.2, -0.9, 0.11, 0.006;
    double poly_err = 0.0;
    for (int degree = 0; degree <= 3; ++degree) {
      Vector y = Vector::Zero(15);
      for (Index i = 0; i < 15; ++i)
        for (int k = degree; k >= 0; --k) y[i] = y[i] * x[i] + c[k];
      const Vector got = poly_fit(x, y, degree).power_basis_coefficients();
      poly_err = std::max(poly_err, (got - c.head(degree + 1)).cwiseAbs().maxCoeff());
    }
    const Vector xe = Vector::LinSpaced(6, 0.0, 5.0);
    const Vector ye = (0.5 * xe.array()).exp() * 2.0;
    const auto m = exp_fit(xe, ye);
    const double exp_err = std::max({std::abs(m.a - 2.0), std::abs(m.b - 0.5), std::abs(m.c)});
    return Outcome{poly_err < 1e-9 && exp_err < 1e-6,
                   "poly coefficient error " + sci(poly_err) + ", exp parameter error " + sci(exp_err)};
  });

  report(8, "determinism and round trips (loss traces, CSV, raster, checkpoint)", [] {
    const fs::path dir = fs::temp_directory_path() / "laimpute_acceptance";
    fs::create_directories(dir);
    const bool traces = !overfit.first.loss_trace.empty() && overfit.first.loss_trace == overfit.second.loss_trace;

    PhenologyConfig pc;
    pc.midseason_gap_frac = 0.4;
    Rng rng(derive_seed(1, "accept.roundtrip"));
    const auto corpus = gen_dataset(pc, 40, rng);
    write_csv(corpus.gapped, dir / "series.csv");
    const bool csv = read_csv(dir / "series.csv") == corpus.gapped;

    auto stack = gen_speckle_stack(Image::Constant(20, 30, 0.2), 5, 4.0, 8);
    for (auto& b : stack.bands) b = b.cast<float>().cast<double>();
    write_stack(stack, dir / "stack.hdr");
    const auto back = read_stack(dir / "stack.hdr");
    bool raster = back.times == stack.times && back.width == stack.width && back.height == stack.height;
    for (Index t = 0; raster && t < stack.band_count(); ++t) raster = back.bands[t] == stack.bands[t];

    save_checkpoint(overfit.first.checkpoint, dir / "model.ckpt");
    const auto ck = load_checkpoint(dir / "model.ckpt");
    const bool checkpoint = ck.params == overfit.first.checkpoint.params &&
                            ck.stats.lai.mean == overfit.first.checkpoint.stats.lai.mean &&
                            ck.stats.vhvv.std == overfit.first.checkpoint.stats.vhvv.std;
    fs::remove_all(dir);
    auto yn = [](bool b) { return b ? "yes" : "no"; };
    return Outcome{traces && csv && raster && checkpoint, std::string("traces identical ") + yn(traces) +
                                                              ", CSV bit-exact " + yn(csv) + ", raster exact " +
                                                              yn(raster) + ", checkpoint bit-exact " + yn(checkpoint)};
  });

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
