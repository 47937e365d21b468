#ifndef LAIMPUTE_BPTT_HPP
#define LAIMPUTE_BPTT_HPP

#include "laimpute/net.hpp"

namespace laimpute {

using ResponseMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct LossValue {
  Scalar value = Scalar(0);
  Index observed_count = 0;
};

/// Masked half mean squared error over a sequence (responses x T):
///   L = 1 / (2 T) * sum_t sum_r mask(r, t) * (pred(r, t) - target(r, t))^2
/// The divisor is the full sequence length; masked entries contribute nothing
/// and the values stored there are never read.
template <typename Scalar>
LossValue<Scalar> half_mse_loss(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target, const ResponseMask& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || mask.rows() != pred.rows() ||
      mask.cols() != pred.cols())
    throw DimensionError("half_mse_loss: shape mismatch");
  LossValue<Scalar> loss;
  Scalar sum(0);
  for (Index t = 0; t < pred.cols(); ++t) {
    for (Index r = 0; r < pred.rows(); ++r) {
      if (!mask(r, t)) continue;
      const Scalar d = pred(r, t) - target(r, t);
      sum += d * d;
      ++loss.observed_count;
    }
  }
  if (loss.observed_count == 0) throw NoObservationError("half_mse_loss: no observed target entries");
  loss.value = sum / (Scalar(2) * Scalar(pred.cols()));
  return loss;
}

/// Arithmetic mean of per-sequence loss values.
template <typename Scalar>
Scalar batch_loss(const std::vector<LossValue<Scalar>>& items) {
  if (items.empty()) throw ParameterError("batch_loss: empty batch");
  Scalar sum(0);
  for (const auto& item : items) sum += item.value;
  return sum / Scalar(static_cast<double>(items.size()));
}

template <typename Scalar>
struct LossAndGradient {
  LossValue<Scalar> loss;
  NetworkParams<Scalar> gradient;
};

namespace detail {

/// Backpropagates dL/dh (H x T, processing order) through one direction,
/// accumulating into `grad`.
template <typename Scalar>
void direction_backward(const LstmCellParams<Scalar>& cell, const MatrixX<Scalar>& inputs,
                        const DirectionTrace<Scalar>& trace, const MatrixX<Scalar>& d_hidden,
                        LstmCellParams<Scalar>& grad) {
  const Index steps = inputs.cols();
  const Index h = cell.hidden_size();
  MatrixX<Scalar> d_pre(4 * h, steps);
  VectorX<Scalar> dh_next = VectorX<Scalar>::Zero(h);
  VectorX<Scalar> dc_next = VectorX<Scalar>::Zero(h);
  VectorX<Scalar> dh(h), dc(h), tc(h);
  for (Index t = steps - 1; t >= 0; --t) {
    const auto gates = trace.gates.col(t);
    const auto i = gates.segment(0, h).array();
    const auto f = gates.segment(h, h).array();
    const auto g = gates.segment(2 * h, h).array();
    const auto o = gates.segment(3 * h, h).array();
    tc = trace.cell.col(t).array().tanh().matrix();
    dh = d_hidden.col(t) + dh_next;

    dc = (dc_next.array() + dh.array() * o * (Scalar(1) - tc.array().square())).matrix();
    auto dz = d_pre.col(t);
    dz.segment(0, h) = (dc.array() * g * i * (Scalar(1) - i)).matrix();
    if (t > 0) {
      dz.segment(h, h) = (dc.array() * trace.cell.col(t - 1).array() * f * (Scalar(1) - f)).matrix();
    } else {
      dz.segment(h, h).setZero();
    }
    dz.segment(2 * h, h) = (dc.array() * i * (Scalar(1) - g.square())).matrix();
    dz.segment(3 * h, h) = (dh.array() * tc.array() * o * (Scalar(1) - o)).matrix();

    dc_next = (dc.array() * f).matrix();
    dh_next.noalias() = cell.w_hidden.transpose() * dz;
  }
  grad.w_input.noalias() += d_pre * inputs.transpose();
  if (steps > 1) grad.w_hidden.noalias() += d_pre.rightCols(steps - 1) * trace.hidden.leftCols(steps - 1).transpose();
  const VectorX<Scalar> bias = d_pre.rowwise().sum();
  grad.b_input += bias;
  grad.b_hidden += bias;
}

}  // namespace detail

/// Exact gradient of half_mse_loss with respect to every parameter by
/// backpropagation through time. Inputs at missing steps are ordinary values
/// in the graph; only the loss is masked. `dropout_scale` must be the same
/// multipliers used for the forward pass (null for inference mode).
template <typename Scalar>
LossAndGradient<Scalar> loss_and_gradient(const NetworkParams<Scalar>& params, const MatrixX<Scalar>& inputs,
                                          const MatrixX<Scalar>& target, const ResponseMask& mask,
                                          const MatrixX<Scalar>* dropout_scale) {
  const Architecture& arch = params.arch;
  const ForwardTrace<Scalar> trace = forward_trace(params, inputs, dropout_scale);
  LossAndGradient<Scalar> out{half_mse_loss(trace.output, target, mask), NetworkParams<Scalar>::Zero(arch)};
  NetworkParams<Scalar>& grad = out.gradient;
  const Index steps = inputs.cols();

  const MatrixX<Scalar> d_output =
      mask.select(trace.output - target, MatrixX<Scalar>::Zero(target.rows(), steps)) / Scalar(static_cast<double>(steps));

  const MatrixX<Scalar> dropped = dropout_scale ? MatrixX<Scalar>(trace.dense.cwiseProduct(*dropout_scale)) : trace.dense;
  grad.output_weights.noalias() = d_output * dropped.transpose();
  grad.output_bias = d_output.rowwise().sum();

  MatrixX<Scalar> d_dense = params.output_weights.transpose() * d_output;
  if (dropout_scale) d_dense = d_dense.cwiseProduct(*dropout_scale);
  d_dense = (d_dense.array() * trace.dense.array() * (Scalar(1) - trace.dense.array())).matrix();
  grad.dense_weights.noalias() = d_dense * trace.features.transpose();
  grad.dense_bias = d_dense.rowwise().sum();

  const MatrixX<Scalar> d_features = params.dense_weights.transpose() * d_dense;
  detail::direction_backward(params.forward_cell, inputs, trace.forward,
                             MatrixX<Scalar>(d_features.topRows(arch.hidden)), grad.forward_cell);
  if (arch.bidirectional) {
    const MatrixX<Scalar> reversed = inputs.rowwise().reverse();
    const MatrixX<Scalar> d_back = d_features.bottomRows(arch.hidden).rowwise().reverse();
    detail::direction_backward(params.backward_cell, reversed, trace.backward, d_back, grad.backward_cell);
  }
  return out;
}

}  // namespace laimpute

#endif  // LAIMPUTE_BPTT_HPP
