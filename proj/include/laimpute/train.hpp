#ifndef LAIMPUTE_TRAIN_HPP
#define LAIMPUTE_TRAIN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "laimpute/bptt.hpp"
#include "laimpute/checkpoint.hpp"
#include "laimpute/kv_config.hpp"
#include "laimpute/series.hpp"

namespace laimpute {

struct TrainConfig {
  bool bidirectional = true;
  Index hidden = 60;
  Index dense = 50;
  double dropout_p = 0.5;

  Index batch_size = 16;
  Index epochs = 150;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  Index min_len = 8;
  Index max_len = 69;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping

  // Input-side hold-out: with this probability a training window gets one
  // contiguous run of observed LAI hidden from the inputs (the targets keep
  // them), so the loss rewards filling gaps rather than copying inputs.
  double holdout_prob = 0.8;
  double holdout_max_frac = 0.5;

  Index subsample_retries = 16;
  Index threads = 0;  // 0 = hardware concurrency

  Architecture architecture() const;
  void validate() const;

  /// Reads the keys named like the fields above; `arch` accepts bilstm|lstm.
  static TrainConfig from_config(const KeyValueConfig& kv, TrainConfig defaults);
  static TrainConfig from_config(const KeyValueConfig& kv) { return from_config(kv, TrainConfig()); }
  std::string to_config_text() const;
};

/// Per-step input features, feature-major (4 x T): normalized VH/VV, VH/VV
/// mask bit, normalized LAI, LAI mask bit. Expects an already normalized record.
MatrixX<double> make_features(const TimeSeriesRecord& normalized);

/// Target row (1 x T) and its mask from the LAI channel.
MatrixX<double> make_target(const TimeSeriesRecord& normalized);
ResponseMask make_target_mask(const TimeSeriesRecord& record);

/// Contiguous window of uniformly drawn length in [min_len, min(max_len, n)]
/// at a uniform offset, redrawn until it contains an observed LAI value.
/// Returns nullopt when the record is shorter than min_len or no usable
/// window was found within `retries` draws.
std::optional<TimeSeriesRecord> subsample(const TimeSeriesRecord& record, Rng& rng, Index min_len = 8,
                                          Index max_len = 69, Index retries = 16);

/// Hides one contiguous run of observed LAI in a copy of the record.
TimeSeriesRecord holdout_mask(const TimeSeriesRecord& record, Rng& rng, double probability, double max_frac);

class AdamOptimizer {
 public:
  AdamOptimizer(Index parameter_count, double learning_rate, double beta1, double beta2, double epsilon);

  void step(Vector& parameters, const Vector& gradient);
  Index steps_taken() const { return step_; }

 private:
  double learning_rate_;
  double beta1_;
  double beta2_;
  double epsilon_;
  Vector first_moment_;
  Vector second_moment_;
  Index step_ = 0;
};

/// Rescales `gradient` so its Euclidean norm is at most `max_norm`. Returns
/// the norm before clipping.
double clip_global_norm(Vector& gradient, double max_norm);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_trace;  // mean training loss per epoch
  Index skipped_records = 0;
};

TrainResult train(const std::vector<TimeSeriesRecord>& records, const TrainConfig& config);

/// Mean masked half-MSE of the network on the records in inference mode,
/// in normalized units.
double evaluate_loss(const Checkpoint& checkpoint, const std::vector<TimeSeriesRecord>& records);

/// Network prediction for every step, denormalized, with observed LAI passed
/// through unchanged. The output LAI mask is all true.
TimeSeriesRecord impute(const TimeSeriesRecord& record, const Checkpoint& checkpoint);

struct GradientProblem {
  MatrixX<double> inputs;
  MatrixX<double> target;
  ResponseMask mask;
  MatrixX<double> dropout_scale;  // empty = inference mode
};

GradientProblem random_gradient_problem(std::uint64_t seed, const Architecture& arch, Index steps,
                                        double mask_probability = 0.3);

struct BlockCheck {
  std::string name;
  double worst_relative_error = 0.0;
  double worst_absolute_error = 0.0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<BlockCheck> blocks;
  double worst_relative_error = 0.0;
  bool passed = true;
};

/// Relative error |a - n| / max(|a|, |n|, kGradientScaleFloor). The floor
/// keeps components whose true value is at the level of the finite
/// difference round-off (eps * |L| / step) from dominating the report.
inline constexpr double kGradientScaleFloor = 1e-4;

/// Compares `analytic` against central differences of the loss with the
/// given step, block by block.
GradientCheckReport gradient_check(const NetworkParamsd& params, const GradientProblem& problem,
                                   const NetworkParamsd& analytic, double step, double tolerance);

/// As above with the analytic gradient from loss_and_gradient.
GradientCheckReport gradient_check(const NetworkParamsd& params, const GradientProblem& problem, double step,
                                   double tolerance);

}  // namespace laimpute

#endif  // LAIMPUTE_TRAIN_HPP
