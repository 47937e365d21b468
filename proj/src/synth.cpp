#include "laimpute/synth.hpp"

#include <cmath>
#include <cstdio>

namespace laimpute {

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

void PhenologyConfig::validate() const {
  if (!(season_days > 0.0) || !(step_days > 0.0)) throw ConfigError("season_days and step_days must be positive");
  if (!(lai_min >= 0.0)) throw ConfigError("lai_min must be non-negative");
  if (!(lai_max > lai_min)) throw ConfigError("lai_max must exceed lai_min");
  if (!(green_up_time < senescence_time)) throw ConfigError("green_up_time must precede senescence_time");
  if (!(green_up_slope > 0.0) || !(senescence_slope > 0.0)) throw ConfigError("slopes must be positive");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(noise_sd_lai >= 0.0) || !(noise_sd_vhvv >= 0.0)) throw ConfigError("noise levels must be non-negative");
  if (!(gap_prob >= 0.0 && gap_prob < 1.0)) throw ConfigError("gap_prob must lie in [0, 1)");
  if (gap_min_len < 1 || gap_max_len < gap_min_len) throw ConfigError("need 1 <= gap_min_len <= gap_max_len");
  if (!(midseason_gap_frac >= 0.0 && midseason_gap_frac < 1.0))
    throw ConfigError("midseason_gap_frac must lie in [0, 1)");
  if (!(midseason_window_end > midseason_window_start)) throw ConfigError("midseason window is empty");
  if (!(vhvv_drop_prob >= 0.0 && vhvv_drop_prob < 1.0)) throw ConfigError("vhvv_drop_prob must lie in [0, 1)");
  if (!(jitter_time_days >= 0.0) || !(jitter_slope_frac >= 0.0 && jitter_slope_frac < 1.0) ||
      !(jitter_lai_frac >= 0.0 && jitter_lai_frac < 1.0))
    throw ConfigError("jitter amplitudes out of range");
  if (forced_gap_end > forced_gap_start && forced_gap_start <= 0.0 && forced_gap_end >= season_days)
    throw ConfigError("forced gap masks the whole season");
}

PhenologyConfig PhenologyConfig::from_config(const KeyValueConfig& kv, PhenologyConfig d) {
  PhenologyConfig c = d;
  c.season_days = kv.get_double("season_days", d.season_days);
  c.step_days = kv.get_double("step_days", d.step_days);
  c.lai_min = kv.get_double("lai_min", d.lai_min);
  c.lai_max = kv.get_double("lai_max", d.lai_max);
  c.green_up_time = kv.get_double("green_up_time", d.green_up_time);
  c.senescence_time = kv.get_double("senescence_time", d.senescence_time);
  c.green_up_slope = kv.get_double("green_up_slope", d.green_up_slope);
  c.senescence_slope = kv.get_double("senescence_slope", d.senescence_slope);
  c.alpha = kv.get_double("alpha", d.alpha);
  c.beta = kv.get_double("beta", d.beta);
  c.gamma = kv.get_double("gamma", d.gamma);
  c.saturation_lai = kv.get_double("saturation_lai", d.saturation_lai);
  c.noise_sd_lai = kv.get_double("noise_sd_lai", d.noise_sd_lai);
  c.noise_sd_vhvv = kv.get_double("noise_sd_vhvv", d.noise_sd_vhvv);
  c.gap_prob = kv.get_double("gap_prob", d.gap_prob);
  c.gap_min_len = kv.get_int("gap_min_len", d.gap_min_len);
  c.gap_max_len = kv.get_int("gap_max_len", d.gap_max_len);
  c.midseason_gap_frac = kv.get_double("midseason_gap_frac", d.midseason_gap_frac);
  c.midseason_window_start = kv.get_double("midseason_window_start", d.midseason_window_start);
  c.midseason_window_end = kv.get_double("midseason_window_end", d.midseason_window_end);
  c.forced_gap_start = kv.get_double("forced_gap_start", d.forced_gap_start);
  c.forced_gap_end = kv.get_double("forced_gap_end", d.forced_gap_end);
  c.vhvv_drop_prob = kv.get_double("vhvv_drop_prob", d.vhvv_drop_prob);
  c.jitter_time_days = kv.get_double("jitter_time_days", d.jitter_time_days);
  c.jitter_slope_frac = kv.get_double("jitter_slope_frac", d.jitter_slope_frac);
  c.jitter_lai_frac = kv.get_double("jitter_lai_frac", d.jitter_lai_frac);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(d.seed)));
  c.validate();
  return c;
}

std::string PhenologyConfig::to_config_text() const {
  return format_key_values({{"season_days", format_double(season_days)},
                            {"step_days", format_double(step_days)},
                            {"lai_min", format_double(lai_min)},
                            {"lai_max", format_double(lai_max)},
                            {"green_up_time", format_double(green_up_time)},
                            {"senescence_time", format_double(senescence_time)},
                            {"green_up_slope", format_double(green_up_slope)},
                            {"senescence_slope", format_double(senescence_slope)},
                            {"alpha", format_double(alpha)},
                            {"beta", format_double(beta)},
                            {"gamma", format_double(gamma)},
                            {"saturation_lai", format_double(saturation_lai)},
                            {"noise_sd_lai", format_double(noise_sd_lai)},
                            {"noise_sd_vhvv", format_double(noise_sd_vhvv)},
                            {"gap_prob", format_double(gap_prob)},
                            {"gap_min_len", std::to_string(gap_min_len)},
                            {"gap_max_len", std::to_string(gap_max_len)},
                            {"midseason_gap_frac", format_double(midseason_gap_frac)},
                            {"midseason_window_start", format_double(midseason_window_start)},
                            {"midseason_window_end", format_double(midseason_window_end)},
                            {"forced_gap_start", format_double(forced_gap_start)},
                            {"forced_gap_end", format_double(forced_gap_end)},
                            {"vhvv_drop_prob", format_double(vhvv_drop_prob)},
                            {"jitter_time_days", format_double(jitter_time_days)},
                            {"jitter_slope_frac", format_double(jitter_slope_frac)},
                            {"jitter_lai_frac", format_double(jitter_lai_frac)},
                            {"seed", std::to_string(seed)}});
}

Vector season_times(const PhenologyConfig& config) {
  const auto n = static_cast<Index>(std::floor(config.season_days / config.step_days + 1e-9)) + 1;
  return Vector::LinSpaced(n, 0.0, config.step_days * static_cast<double>(n - 1));
}

Vector gen_lai_curve(const PhenologyConfig& config, const Eigen::Ref<const Vector>& times) {
  config.validate();
  for (Index i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw ParameterError("gen_lai_curve: times must increase");
  return times.unaryExpr([&](double t) {
    return config.lai_min +
           (config.lai_max - config.lai_min) * (logistic(config.green_up_slope * (t - config.green_up_time)) -
                                                logistic(config.senescence_slope * (t - config.senescence_time)));
  });
}

Vector gen_vhvv_curve(const PhenologyConfig& config, const Eigen::Ref<const Vector>& lai, Rng* noise) {
  if (!(config.gamma > 0.0)) throw ConfigError("gamma must be positive");
  if ((lai.array() < 0.0).any()) throw ParameterError("gen_vhvv_curve: negative LAI");
  Vector out = lai.unaryExpr([&](double v) {
    const double eff = config.saturation_lai > 0.0 ? std::min(v, config.saturation_lai) : v;
    return config.alpha + config.beta * (1.0 - std::exp(-eff / config.gamma));
  });
  if (noise != nullptr && config.noise_sd_vhvv > 0.0) {
    std::normal_distribution<double> dist(0.0, config.noise_sd_vhvv);
    for (Index i = 0; i < out.size(); ++i) out[i] += dist(*noise);
  }
  return out;
}

TimeSeriesRecord apply_gaps(const TimeSeriesRecord& record, const PhenologyConfig& config, Rng& rng) {
  config.validate();
  validate(record);
  if (!record.lai_mask.all() || !record.vhvv_mask.all()) throw ParameterError("apply_gaps expects a fully observed record");
  const Index n = record.size();
  Mask lai_mask = Mask::Constant(n, true);

  if (config.gap_prob > 0.0) {
    for (Index t = 0; t < n; ++t) {
      if (uniform01(rng) < config.gap_prob) {
        const Index len = uniform_int(rng, config.gap_min_len, config.gap_max_len);
        lai_mask.segment(t, std::min(len, n - t)).setConstant(false);
      }
    }
  }
  if (config.midseason_gap_frac > 0.0) {
    const auto len = static_cast<Index>(std::llround(config.midseason_gap_frac * static_cast<double>(n)));
    std::vector<Index> starts;
    for (Index s = 0; s + len <= n; ++s) {
      if (record.times[s] >= config.midseason_window_start && record.times[s + len - 1] <= config.midseason_window_end)
        starts.push_back(s);
    }
    if (len > 0) {
      if (starts.empty()) throw ConfigError("midseason gap does not fit inside the midseason window");
      const Index s = starts[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(starts.size()) - 1))];
      lai_mask.segment(s, len).setConstant(false);
    }
  }
  if (config.forced_gap_end > config.forced_gap_start) {
    for (Index t = 0; t < n; ++t)
      if (record.times[t] >= config.forced_gap_start && record.times[t] <= config.forced_gap_end) lai_mask[t] = false;
  }

  Mask vhvv_mask = Mask::Constant(n, true);
  if (config.vhvv_drop_prob > 0.0) {
    for (Index t = 0; t < n; ++t) {
      const bool drop = uniform01(rng) < config.vhvv_drop_prob;
      if (drop && lai_mask[t]) vhvv_mask[t] = false;
    }
  }
  if (!lai_mask.any()) throw ConfigError("gap model masked every LAI observation of '" + record.series_id + "'");
  return make_record(record.series_id, record.times, record.lai, lai_mask, record.vhvv, vhvv_mask);
}

RasterStack gen_speckle_stack(const Image& truth, Index bands, double looks, std::uint64_t seed, double interval_days) {
  if (truth.size() == 0) throw ParameterError("gen_speckle_stack: empty truth image");
  if (!(truth.array() > 0.0).all()) throw ParameterError("gen_speckle_stack: truth intensities must be positive");
  if (!(looks > 0.0)) throw ParameterError("gen_speckle_stack: looks must be positive");
  if (bands < 1) throw ParameterError("gen_speckle_stack: need at least one band");
  Rng rng(seed);
  std::gamma_distribution<double> speckle(looks, 1.0 / looks);
  RasterStack stack{truth.cols(), truth.rows(), {}, {}};
  for (Index b = 0; b < bands; ++b) {
    Image band(truth.rows(), truth.cols());
    for (Index y = 0; y < truth.rows(); ++y)
      for (Index x = 0; x < truth.cols(); ++x) band(y, x) = truth(y, x) * speckle(rng);
    stack.bands.push_back(std::move(band));
    stack.times.push_back(interval_days * static_cast<double>(b));
  }
  return stack;
}

SyntheticCorpus gen_dataset(const PhenologyConfig& config, Index n_series, Rng& rng) {
  config.validate();
  if (n_series < 1) throw ParameterError("gen_dataset: n_series must be positive");
  const Vector times = season_times(config);
  const Index n = times.size();
  SyntheticCorpus corpus;
  for (Index s = 0; s < n_series; ++s) {
    PhenologyConfig local = config;
    local.green_up_time += uniform(rng, -config.jitter_time_days, config.jitter_time_days);
    local.senescence_time += uniform(rng, -config.jitter_time_days, config.jitter_time_days);
    local.green_up_slope *= 1.0 + uniform(rng, -config.jitter_slope_frac, config.jitter_slope_frac);
    local.senescence_slope *= 1.0 + uniform(rng, -config.jitter_slope_frac, config.jitter_slope_frac);
    local.lai_max = local.lai_min + (config.lai_max - config.lai_min) *
                                        (1.0 + uniform(rng, -config.jitter_lai_frac, config.jitter_lai_frac));

    Vector lai = gen_lai_curve(local, times);
    const Vector vhvv = gen_vhvv_curve(local, lai, &rng);
    if (config.noise_sd_lai > 0.0) {
      std::normal_distribution<double> dist(0.0, config.noise_sd_lai);
      for (Index i = 0; i < n; ++i) lai[i] = std::max(0.0, lai[i] + dist(rng));
    }

    char id[32];
    std::snprintf(id, sizeof(id), "S%05lld", static_cast<long long>(s));
    TimeSeriesRecord truth = make_record(id, times, lai, Mask::Constant(n, true), vhvv, Mask::Constant(n, true));
    corpus.gapped.push_back(apply_gaps(truth, config, rng));
    corpus.truth.push_back(std::move(truth));
  }
  return corpus;
}

}  // namespace laimpute
