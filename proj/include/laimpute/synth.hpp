#ifndef LAIMPUTE_SYNTH_HPP
#define LAIMPUTE_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "laimpute/kv_config.hpp"
#include "laimpute/sar.hpp"
#include "laimpute/series.hpp"

namespace laimpute {

/// Synthetic winter-wheat season: double-logistic LAI, a saturating VH/VV
/// response, observation noise and cloud gaps.
struct PhenologyConfig {
  double season_days = 240.0;
  double step_days = 4.0;

  double lai_min = 0.1;
  double lai_max = 5.5;
  double green_up_time = 60.0;
  double senescence_time = 160.0;
  double green_up_slope = 0.12;
  double senescence_slope = 0.10;

  // VH/VV(dB) = alpha + beta * (1 - exp(-lai / gamma))
  double alpha = -14.0;
  double beta = 8.0;
  double gamma = 2.0;
  double saturation_lai = 0.0;  // > 0 flattens the response above this LAI

  double noise_sd_lai = 0.05;
  double noise_sd_vhvv = 0.3;

  // Cloud model: each optical step starts a run of masked LAI with
  // probability gap_prob; run lengths are uniform in [gap_min_len, gap_max_len].
  double gap_prob = 0.1;
  std::int64_t gap_min_len = 1;
  std::int64_t gap_max_len = 3;
  // One contiguous run covering this fraction of the steps, placed uniformly
  // inside [midseason_window_start, midseason_window_end] (days).
  double midseason_gap_frac = 0.0;
  double midseason_window_start = 40.0;
  double midseason_window_end = 220.0;
  // Fixed window [forced_gap_start, forced_gap_end] masked in every record
  // when forced_gap_end > forced_gap_start.
  double forced_gap_start = 0.0;
  double forced_gap_end = 0.0;
  double vhvv_drop_prob = 0.05;

  // Per-series perturbations (uniform, symmetric).
  double jitter_time_days = 10.0;
  double jitter_slope_frac = 0.2;
  double jitter_lai_frac = 0.15;

  std::uint64_t seed = 7;

  void validate() const;
  static PhenologyConfig from_config(const KeyValueConfig& kv, PhenologyConfig defaults);
  static PhenologyConfig from_config(const KeyValueConfig& kv) { return from_config(kv, PhenologyConfig()); }
  std::string to_config_text() const;
};

/// 0, step, 2 step, ... up to season_days.
Vector season_times(const PhenologyConfig& config);

/// lai_min + (lai_max - lai_min) * (s(k1 (t - t1)) - s(k2 (t - t2))), s logistic.
Vector gen_lai_curve(const PhenologyConfig& config, const Eigen::Ref<const Vector>& times);

/// Noiseless when `noise` is null; otherwise adds N(0, noise_sd_vhvv).
Vector gen_vhvv_curve(const PhenologyConfig& config, const Eigen::Ref<const Vector>& lai, Rng* noise = nullptr);

/// Masks LAI according to the gap model and drops isolated VH/VV samples
/// (only where LAI stays observed). Input must be fully observed.
TimeSeriesRecord apply_gaps(const TimeSeriesRecord& record, const PhenologyConfig& config, Rng& rng);

/// truth * Gamma(shape L, mean 1), independent per pixel and band.
RasterStack gen_speckle_stack(const Image& truth, Index bands, double looks, std::uint64_t seed,
                              double interval_days = 6.0);

struct SyntheticCorpus {
  std::vector<TimeSeriesRecord> gapped;
  std::vector<TimeSeriesRecord> truth;  // same values, all masks true
};

SyntheticCorpus gen_dataset(const PhenologyConfig& config, Index n_series, Rng& rng);

}  // namespace laimpute

#endif  // LAIMPUTE_SYNTH_HPP
