#include "laimpute/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace laimpute {

Architecture TrainConfig::architecture() const {
  Architecture a;
  a.bidirectional = bidirectional;
  a.input_size = feature_count(FeatureLayout::kVhvvLaiWithMasks);
  a.hidden = hidden;
  a.dense = dense;
  a.out_dim = 1;
  a.dropout_p = dropout_p;
  return a;
}

void TrainConfig::validate() const {
  if (hidden < 1 || dense < 1) throw ConfigError("hidden and dense must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (min_len < 2 || min_len > max_len) throw ConfigError("need 2 <= min_len <= max_len");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(holdout_prob >= 0.0 && holdout_prob <= 1.0)) throw ConfigError("holdout_prob must lie in [0, 1]");
  if (!(holdout_max_frac >= 0.0 && holdout_max_frac <= 1.0)) throw ConfigError("holdout_max_frac must lie in [0, 1]");
  if (subsample_retries < 1) throw ConfigError("subsample_retries must be positive");
  if (threads < 0) throw ConfigError("threads must be non-negative");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv, TrainConfig d) {
  TrainConfig c = d;
  const std::string arch = kv.get_string("arch", d.bidirectional ? "bilstm" : "lstm");
  if (arch == "bilstm") {
    c.bidirectional = true;
  } else if (arch == "lstm") {
    c.bidirectional = false;
  } else {
    throw ConfigError("arch must be bilstm or lstm, got '" + arch + "'");
  }
  c.hidden = kv.get_int("hidden", d.hidden);
  c.dense = kv.get_int("dense", d.dense);
  c.dropout_p = kv.get_double("dropout_p", d.dropout_p);
  c.batch_size = kv.get_int("batch_size", d.batch_size);
  c.epochs = kv.get_int("epochs", d.epochs);
  c.learning_rate = kv.get_double("learning_rate", d.learning_rate);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(d.seed)));
  c.min_len = kv.get_int("min_len", d.min_len);
  c.max_len = kv.get_int("max_len", d.max_len);
  c.beta1 = kv.get_double("beta1", d.beta1);
  c.beta2 = kv.get_double("beta2", d.beta2);
  c.epsilon = kv.get_double("epsilon", d.epsilon);
  c.clip_norm = kv.get_double("clip_norm", d.clip_norm);
  c.holdout_prob = kv.get_double("holdout_prob", d.holdout_prob);
  c.holdout_max_frac = kv.get_double("holdout_max_frac", d.holdout_max_frac);
  c.subsample_retries = kv.get_int("subsample_retries", d.subsample_retries);
  c.threads = kv.get_int("threads", d.threads);
  c.validate();
  return c;
}

std::string TrainConfig::to_config_text() const {
  return format_key_values({{"arch", bidirectional ? "bilstm" : "lstm"},
                            {"hidden", std::to_string(hidden)},
                            {"dense", std::to_string(dense)},
                            {"dropout_p", format_double(dropout_p)},
                            {"batch_size", std::to_string(batch_size)},
                            {"epochs", std::to_string(epochs)},
                            {"learning_rate", format_double(learning_rate)},
                            {"seed", std::to_string(seed)},
                            {"min_len", std::to_string(min_len)},
                            {"max_len", std::to_string(max_len)},
                            {"beta1", format_double(beta1)},
                            {"beta2", format_double(beta2)},
                            {"epsilon", format_double(epsilon)},
                            {"clip_norm", format_double(clip_norm)},
                            {"holdout_prob", format_double(holdout_prob)},
                            {"holdout_max_frac", format_double(holdout_max_frac)},
                            {"subsample_retries", std::to_string(subsample_retries)},
                            {"threads", std::to_string(threads)}});
}

MatrixX<double> make_features(const TimeSeriesRecord& r) {
  MatrixX<double> x(4, r.size());
  x.row(0) = r.vhvv_mask.select(r.vhvv, 0.0).transpose();
  x.row(1) = r.vhvv_mask.cast<double>().matrix().transpose();
  x.row(2) = r.lai_mask.select(r.lai, 0.0).transpose();
  x.row(3) = r.lai_mask.cast<double>().matrix().transpose();
  return x;
}

MatrixX<double> make_target(const TimeSeriesRecord& r) {
  return r.lai_mask.select(r.lai, 0.0).transpose();
}

ResponseMask make_target_mask(const TimeSeriesRecord& r) { return r.lai_mask.transpose(); }

std::optional<TimeSeriesRecord> subsample(const TimeSeriesRecord& record, Rng& rng, Index min_len, Index max_len,
                                          Index retries) {
  if (min_len < 1 || min_len > max_len) throw ParameterError("subsample: need 1 <= min_len <= max_len");
  const Index n = record.size();
  if (n < min_len) return std::nullopt;
  const Index longest = std::min(max_len, n);
  for (Index attempt = 0; attempt < std::max<Index>(retries, 1); ++attempt) {
    const Index length = uniform_int(rng, min_len, longest);
    const Index begin = uniform_int(rng, 0, n - length);
    if (record.lai_mask.segment(begin, length).any()) return slice(record, begin, length);
  }
  return std::nullopt;
}

TimeSeriesRecord holdout_mask(const TimeSeriesRecord& record, Rng& rng, double probability, double max_frac) {
  TimeSeriesRecord out = record;
  if (probability <= 0.0 || max_frac <= 0.0 || uniform01(rng) >= probability) return out;
  const Index n = record.size();
  const Index longest = std::max<Index>(1, static_cast<Index>(std::floor(max_frac * static_cast<double>(n))));
  const Index length = uniform_int(rng, 1, longest);
  const Index begin = uniform_int(rng, 0, n - length);
  out.lai_mask.segment(begin, length).setConstant(false);
  out.lai.segment(begin, length).setZero();
  return out;
}

AdamOptimizer::AdamOptimizer(Index parameter_count, double learning_rate, double beta1, double beta2, double epsilon)
    : learning_rate_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      first_moment_(Vector::Zero(parameter_count)),
      second_moment_(Vector::Zero(parameter_count)) {}

void AdamOptimizer::step(Vector& parameters, const Vector& gradient) {
  if (parameters.size() != first_moment_.size() || gradient.size() != first_moment_.size())
    throw DimensionError("AdamOptimizer: parameter count mismatch");
  ++step_;
  first_moment_ = beta1_ * first_moment_ + (1.0 - beta1_) * gradient;
  second_moment_ = beta2_ * second_moment_ + (1.0 - beta2_) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  parameters.array() -=
      learning_rate_ * (first_moment_.array() / c1) / ((second_moment_.array() / c2).sqrt() + epsilon_);
}

double clip_global_norm(Vector& gradient, double max_norm) {
  const double norm = gradient.norm();
  if (max_norm > 0.0 && norm > max_norm) gradient *= max_norm / norm;
  return norm;
}

namespace {

/// Runs fn(i) for i in [0, n) over `threads` workers in contiguous chunks.
/// Callers write results into per-index slots, so outcomes do not depend on
/// the worker count.
template <typename Fn>
void parallel_for(Index n, Index threads, Fn&& fn) {
  Index workers = threads > 0 ? threads : static_cast<Index>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct BatchItem {
  MatrixX<double> inputs;
  MatrixX<double> target;
  ResponseMask mask;
  MatrixX<double> dropout_scale;
};

}  // namespace

TrainResult train(const std::vector<TimeSeriesRecord>& records, const TrainConfig& config) {
  config.validate();
  if (records.empty()) throw InsufficientDataError("train: empty corpus");
  for (const auto& r : records) validate(r);

  TrainResult result;
  result.checkpoint.stats = compute_stats(records);
  std::vector<TimeSeriesRecord> normalized;
  normalized.reserve(records.size());
  for (const auto& r : records) normalized.push_back(normalize(r, result.checkpoint.stats));

  const Architecture arch = config.architecture();
  NetworkParamsd params = init_params(derive_seed(config.seed, "init"), arch);
  Vector flat = params.flatten();
  AdamOptimizer adam(flat.size(), config.learning_rate, config.beta1, config.beta2, config.epsilon);
  Rng rng(derive_seed(config.seed, "train"));

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    Index batches = 0;
    Index skipped = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));

      // All random draws happen here, in a fixed order.
      std::vector<BatchItem> items;
      for (std::size_t k = start; k < stop; ++k) {
        auto window = subsample(normalized[order[k]], rng, config.min_len, config.max_len, config.subsample_retries);
        if (!window) {
          ++skipped;
          continue;
        }
        const TimeSeriesRecord visible = holdout_mask(*window, rng, config.holdout_prob, config.holdout_max_frac);
        BatchItem item{make_features(visible), make_target(*window), make_target_mask(*window), {}};
        if (arch.dropout_p > 0.0)
          item.dropout_scale = make_dropout_scale<double>(rng, arch.dense, window->size(), arch.dropout_p);
        items.push_back(std::move(item));
      }
      if (items.empty()) continue;

      std::vector<LossAndGradient<double>> slots(items.size());
      parallel_for(static_cast<Index>(items.size()), config.threads, [&](Index i) {
        const BatchItem& item = items[static_cast<std::size_t>(i)];
        slots[static_cast<std::size_t>(i)] = loss_and_gradient(
            params, item.inputs, item.target, item.mask, item.dropout_scale.size() ? &item.dropout_scale : nullptr);
      });

      Vector grad = Vector::Zero(flat.size());
      std::vector<LossValue<double>> losses;
      losses.reserve(slots.size());
      for (const auto& s : slots) {
        grad += s.gradient.flatten();
        losses.push_back(s.loss);
      }
      grad /= static_cast<double>(slots.size());
      clip_global_norm(grad, config.clip_norm);
      adam.step(flat, grad);
      params.unflatten(flat);

      epoch_loss += batch_loss(losses);
      ++batches;
    }
    if (batches == 0) throw InsufficientDataError("train: no record long enough for subsampling");
    result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
    result.skipped_records = std::max(result.skipped_records, skipped);
  }
  result.checkpoint.params = std::move(params);
  return result;
}

namespace {

void check_layout(const Checkpoint& checkpoint) {
  if (checkpoint.params.arch.input_size != feature_count(checkpoint.layout))
    throw DimensionError("checkpoint input size does not match its feature layout");
  if (checkpoint.params.arch.out_dim != 1) throw DimensionError("checkpoint must have a single LAI response");
}

}  // namespace

double evaluate_loss(const Checkpoint& checkpoint, const std::vector<TimeSeriesRecord>& records) {
  check_layout(checkpoint);
  std::vector<LossValue<double>> losses;
  Rng unused(0);
  for (const auto& r : records) {
    if (!r.lai_mask.any()) continue;
    const TimeSeriesRecord n = normalize(r, checkpoint.stats);
    const MatrixX<double> pred = network_forward(checkpoint.params, make_features(n), false, unused);
    losses.push_back(half_mse_loss(pred, make_target(n), make_target_mask(n)));
  }
  return batch_loss(losses);
}

TimeSeriesRecord impute(const TimeSeriesRecord& record, const Checkpoint& checkpoint) {
  check_layout(checkpoint);
  validate(record);
  TimeSeriesRecord out = record;
  if (record.lai_mask.all()) return out;
  Rng unused(0);
  const TimeSeriesRecord n = normalize(record, checkpoint.stats);
  const MatrixX<double> pred = network_forward(checkpoint.params, make_features(n), false, unused);
  for (Index t = 0; t < record.size(); ++t) {
    if (!record.lai_mask[t]) out.lai[t] = pred(0, t) * checkpoint.stats.lai.std + checkpoint.stats.lai.mean;
  }
  out.lai_mask.setConstant(true);
  return out;
}

GradientProblem random_gradient_problem(std::uint64_t seed, const Architecture& arch, Index steps,
                                        double mask_probability) {
  Rng rng(seed);
  GradientProblem p;
  p.inputs.resize(arch.input_size, steps);
  for (Index j = 0; j < steps; ++j)
    for (Index i = 0; i < arch.input_size; ++i) p.inputs(i, j) = uniform(rng, -1.5, 1.5);
  p.target.resize(arch.out_dim, steps);
  p.mask.resize(arch.out_dim, steps);
  for (Index j = 0; j < steps; ++j) {
    for (Index i = 0; i < arch.out_dim; ++i) {
      p.target(i, j) = uniform(rng, -1.0, 1.0);
      p.mask(i, j) = uniform01(rng) >= mask_probability;
    }
  }
  if (!p.mask.any()) p.mask(0, 0) = true;
  return p;
}

GradientCheckReport gradient_check(const NetworkParamsd& params, const GradientProblem& problem,
                                   const NetworkParamsd& analytic, double step, double tolerance) {
  if (!(analytic.arch == params.arch)) throw DimensionError("gradient_check: gradient shape mismatch");
  const MatrixX<double>* scale = problem.dropout_scale.size() ? &problem.dropout_scale : nullptr;
  NetworkParamsd probe = params;
  const auto analytic_blocks = analytic.blocks();
  auto probe_blocks = probe.blocks();

  auto loss_at = [&]() {
    return half_mse_loss(forward_trace(probe, problem.inputs, scale).output, problem.target, problem.mask).value;
  };

  GradientCheckReport report;
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    BlockCheck check;
    check.name = probe_blocks[b].name;
    auto values = probe_blocks[b].values;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double up = loss_at();
      values[k] = saved - step;
      const double down = loss_at();
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic_blocks[b].values[k];
      const double abs_err = std::abs(a - numeric);
      double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), kGradientScaleFloor});
      if (std::isnan(rel_err)) rel_err = std::numeric_limits<double>::infinity();
      check.worst_absolute_error = std::max(check.worst_absolute_error, abs_err);
      check.worst_relative_error = std::max(check.worst_relative_error, rel_err);
    }
    check.passed = std::isinf(tolerance) || check.worst_relative_error < tolerance;
    report.worst_relative_error = std::max(report.worst_relative_error, check.worst_relative_error);
    report.passed = report.passed && check.passed;
    report.blocks.push_back(std::move(check));
  }
  return report;
}

GradientCheckReport gradient_check(const NetworkParamsd& params, const GradientProblem& problem, double step,
                                   double tolerance) {
  const MatrixX<double>* scale = problem.dropout_scale.size() ? &problem.dropout_scale : nullptr;
  const auto analytic = loss_and_gradient(params, problem.inputs, problem.target, problem.mask, scale).gradient;
  return gradient_check(params, problem, analytic, step, tolerance);
}

}  // namespace laimpute
