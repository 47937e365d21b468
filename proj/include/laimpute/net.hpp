#ifndef LAIMPUTE_NET_HPP
#define LAIMPUTE_NET_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "laimpute/common.hpp"

namespace laimpute {

/// Row-block order of the stacked gate matrices.
enum class Gate : int { kInput = 0, kForget = 1, kCell = 2, kOutput = 3 };

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
inline Scalar logistic(Scalar x) {
  using std::exp;
  return Scalar(1) / (Scalar(1) + exp(-x));
}

/// Weights of one LSTM cell. The four gates are stacked row-wise
/// (input, forget, cell, output), each block `hidden` rows tall.
template <typename Scalar>
struct LstmCellParams {
  MatrixX<Scalar> w_input;   // 4H x I
  MatrixX<Scalar> w_hidden;  // 4H x H
  VectorX<Scalar> b_input;   // 4H
  VectorX<Scalar> b_hidden;  // 4H

  static LstmCellParams Zero(Index input_size, Index hidden_size) {
    return {MatrixX<Scalar>::Zero(4 * hidden_size, input_size), MatrixX<Scalar>::Zero(4 * hidden_size, hidden_size),
            VectorX<Scalar>::Zero(4 * hidden_size), VectorX<Scalar>::Zero(4 * hidden_size)};
  }

  Index hidden_size() const { return w_hidden.cols(); }
  Index input_size() const { return w_input.cols(); }
  bool empty() const { return w_hidden.size() == 0; }

  auto input_weights(Gate g) { return w_input.middleRows(static_cast<int>(g) * hidden_size(), hidden_size()); }
  auto input_weights(Gate g) const {
    return w_input.middleRows(static_cast<int>(g) * hidden_size(), hidden_size());
  }
  auto hidden_weights(Gate g) { return w_hidden.middleRows(static_cast<int>(g) * hidden_size(), hidden_size()); }
  auto hidden_weights(Gate g) const {
    return w_hidden.middleRows(static_cast<int>(g) * hidden_size(), hidden_size());
  }
  auto input_bias(Gate g) { return b_input.segment(static_cast<int>(g) * hidden_size(), hidden_size()); }
  auto input_bias(Gate g) const { return b_input.segment(static_cast<int>(g) * hidden_size(), hidden_size()); }
  auto hidden_bias(Gate g) { return b_hidden.segment(static_cast<int>(g) * hidden_size(), hidden_size()); }
  auto hidden_bias(Gate g) const { return b_hidden.segment(static_cast<int>(g) * hidden_size(), hidden_size()); }
};

template <typename Scalar>
struct CellState {
  VectorX<Scalar> h;
  VectorX<Scalar> c;

  static CellState Zero(Index hidden_size) {
    return {VectorX<Scalar>::Zero(hidden_size), VectorX<Scalar>::Zero(hidden_size)};
  }
};

/// Hyperparameters of the regressor. The unidirectional variant drops the
/// backward cell and feeds `hidden` features (not 2 * hidden) to the dense layer.
struct Architecture {
  bool bidirectional = true;
  Index input_size = 4;
  Index hidden = 60;
  Index dense = 50;
  Index out_dim = 1;
  double dropout_p = 0.5;

  Index recurrent_width() const { return bidirectional ? 2 * hidden : hidden; }
  bool operator==(const Architecture&) const = default;
};

/// Named view of one contiguous parameter block (column-major storage).
template <typename Scalar>
struct ParamBlock {
  std::string name;
  Index rows;
  Index cols;
  std::span<Scalar> values;
};

template <typename Scalar>
struct NetworkParams {
  Architecture arch;
  LstmCellParams<Scalar> forward_cell;
  LstmCellParams<Scalar> backward_cell;  // empty when !arch.bidirectional
  MatrixX<Scalar> dense_weights;         // D x recurrent_width
  VectorX<Scalar> dense_bias;            // D
  MatrixX<Scalar> output_weights;        // R x D
  VectorX<Scalar> output_bias;           // R

  static NetworkParams Zero(const Architecture& arch) {
    NetworkParams p;
    p.arch = arch;
    p.forward_cell = LstmCellParams<Scalar>::Zero(arch.input_size, arch.hidden);
    if (arch.bidirectional) p.backward_cell = LstmCellParams<Scalar>::Zero(arch.input_size, arch.hidden);
    p.dense_weights = MatrixX<Scalar>::Zero(arch.dense, arch.recurrent_width());
    p.dense_bias = VectorX<Scalar>::Zero(arch.dense);
    p.output_weights = MatrixX<Scalar>::Zero(arch.out_dim, arch.dense);
    p.output_bias = VectorX<Scalar>::Zero(arch.out_dim);
    return p;
  }

  /// Every parameter exactly once, in flat-index order.
  std::vector<ParamBlock<Scalar>> blocks() {
    std::vector<ParamBlock<Scalar>> out;
    auto add = [&out](std::string name, auto& m) {
      out.push_back({std::move(name), m.rows(), m.cols(), std::span<Scalar>(m.data(), static_cast<std::size_t>(m.size()))});
    };
    auto add_cell = [&](const std::string& prefix, LstmCellParams<Scalar>& cell) {
      add(prefix + ".w_input", cell.w_input);
      add(prefix + ".w_hidden", cell.w_hidden);
      add(prefix + ".b_input", cell.b_input);
      add(prefix + ".b_hidden", cell.b_hidden);
    };
    add_cell("forward", forward_cell);
    if (arch.bidirectional) add_cell("backward", backward_cell);
    add("dense.weights", dense_weights);
    add("dense.bias", dense_bias);
    add("output.weights", output_weights);
    add("output.bias", output_bias);
    return out;
  }

  std::vector<ParamBlock<const Scalar>> blocks() const {
    auto mutable_blocks = const_cast<NetworkParams*>(this)->blocks();
    std::vector<ParamBlock<const Scalar>> out;
    out.reserve(mutable_blocks.size());
    for (auto& b : mutable_blocks) out.push_back({std::move(b.name), b.rows, b.cols, std::span<const Scalar>(b.values)});
    return out;
  }

  Index size() const {
    Index n = 0;
    for (const auto& b : blocks()) n += static_cast<Index>(b.values.size());
    return n;
  }

  VectorX<Scalar> flatten() const {
    VectorX<Scalar> flat(size());
    Index k = 0;
    for (const auto& b : blocks())
      for (const Scalar v : b.values) flat[k++] = v;
    return flat;
  }

  void unflatten(const Eigen::Ref<const VectorX<Scalar>>& flat) {
    if (flat.size() != size()) throw DimensionError("unflatten: parameter count mismatch");
    Index k = 0;
    for (auto& b : blocks())
      for (Scalar& v : b.values) v = flat[k++];
  }

  template <typename NewScalar>
  NetworkParams<NewScalar> cast() const {
    NetworkParams<NewScalar> out = NetworkParams<NewScalar>::Zero(arch);
    out.unflatten(flatten().template cast<NewScalar>());
    return out;
  }

  bool operator==(const NetworkParams& other) const {
    return arch == other.arch && size() == other.size() && flatten() == other.flatten();
  }
};

using NetworkParamsd = NetworkParams<double>;

namespace detail {

/// Applies gate nonlinearities in place to a stacked 4H pre-activation and
/// advances the state. `z` is overwritten with the activated gates.
template <typename Scalar, typename Derived>
void cell_update(Eigen::MatrixBase<Derived>& z, CellState<Scalar>& state) {
  const Index h = state.h.size();
  auto i = z.segment(0, h);
  auto f = z.segment(h, h);
  auto g = z.segment(2 * h, h);
  auto o = z.segment(3 * h, h);
  i = i.unaryExpr([](Scalar v) { return logistic(v); });
  f = f.unaryExpr([](Scalar v) { return logistic(v); });
  g = g.array().tanh().matrix();
  o = o.unaryExpr([](Scalar v) { return logistic(v); });
  state.c = (f.array() * state.c.array() + i.array() * g.array()).matrix();
  state.h = (o.array() * state.c.array().tanh()).matrix();
}

}  // namespace detail

/// One step of the LSTM recurrence with logistic gates and tanh cell input.
template <typename Scalar>
CellState<Scalar> lstm_cell_forward(const Eigen::Ref<const VectorX<Scalar>>& x, const CellState<Scalar>& state,
                                    const LstmCellParams<Scalar>& params) {
  if (x.size() != params.input_size()) throw DimensionError("lstm_cell_forward: input size mismatch");
  if (state.h.size() != params.hidden_size() || state.c.size() != params.hidden_size())
    throw DimensionError("lstm_cell_forward: state size mismatch");
  VectorX<Scalar> z = params.w_input * x + params.b_input + params.w_hidden * state.h + params.b_hidden;
  CellState<Scalar> next = state;
  detail::cell_update(z, next);
  return next;
}

/// Activations of one recurrent direction in processing order.
template <typename Scalar>
struct DirectionTrace {
  MatrixX<Scalar> gates;   // 4H x T, activated (i, f, g, o)
  MatrixX<Scalar> cell;    // H x T
  MatrixX<Scalar> hidden;  // H x T
};

/// Runs a cell over the columns of `inputs` from a zero state.
template <typename Scalar>
DirectionTrace<Scalar> run_direction(const LstmCellParams<Scalar>& cell, const MatrixX<Scalar>& inputs) {
  const Index steps = inputs.cols();
  const Index h = cell.hidden_size();
  DirectionTrace<Scalar> trace;
  trace.gates.noalias() = cell.w_input * inputs;
  trace.gates.colwise() += cell.b_input + cell.b_hidden;
  trace.cell.resize(h, steps);
  trace.hidden.resize(h, steps);
  auto state = CellState<Scalar>::Zero(h);
  for (Index t = 0; t < steps; ++t) {
    auto z = trace.gates.col(t);
    if (t > 0) z.noalias() += cell.w_hidden * state.h;
    detail::cell_update(z, state);
    trace.cell.col(t) = state.c;
    trace.hidden.col(t) = state.h;
  }
  return trace;
}

/// Everything the backward pass needs. Sequences are stored feature-major:
/// column t is time step t.
template <typename Scalar>
struct ForwardTrace {
  DirectionTrace<Scalar> forward;
  DirectionTrace<Scalar> backward;  // processing order, i.e. reversed time
  MatrixX<Scalar> features;         // recurrent_width x T, time-aligned
  MatrixX<Scalar> dense;            // D x T, after the logistic
  MatrixX<Scalar> dropout_scale;    // D x T, empty at inference
  MatrixX<Scalar> output;           // R x T
};

/// Inverted dropout multipliers: 0 with probability p, 1 / (1 - p) otherwise.
template <typename Scalar>
MatrixX<Scalar> make_dropout_scale(Rng& rng, Index rows, Index cols, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout probability must lie in [0, 1)");
  MatrixX<Scalar> scale(rows, cols);
  const Scalar keep = Scalar(1.0 / (1.0 - p));
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) scale(i, j) = uniform01(rng) < p ? Scalar(0) : keep;
  return scale;
}

/// Full forward pass. `dropout_scale` null means inference (dropout inert).
template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const NetworkParams<Scalar>& params, const MatrixX<Scalar>& inputs,
                                   const MatrixX<Scalar>* dropout_scale) {
  const Architecture& arch = params.arch;
  if (inputs.cols() < 1) throw DimensionError("forward pass needs at least one time step");
  if (inputs.rows() != arch.input_size) throw DimensionError("forward pass: input feature count mismatch");
  const Index steps = inputs.cols();

  ForwardTrace<Scalar> trace;
  trace.forward = run_direction(params.forward_cell, inputs);
  if (arch.bidirectional) {
    const MatrixX<Scalar> reversed = inputs.rowwise().reverse();
    trace.backward = run_direction(params.backward_cell, reversed);
    trace.features.resize(2 * arch.hidden, steps);
    trace.features.topRows(arch.hidden) = trace.forward.hidden;
    trace.features.bottomRows(arch.hidden) = trace.backward.hidden.rowwise().reverse();
  } else {
    trace.features = trace.forward.hidden;
  }

  trace.dense.noalias() = params.dense_weights * trace.features;
  trace.dense.colwise() += params.dense_bias;
  trace.dense = trace.dense.unaryExpr([](Scalar v) { return logistic(v); });

  if (dropout_scale != nullptr) {
    if (dropout_scale->rows() != arch.dense || dropout_scale->cols() != steps)
      throw DimensionError("dropout scale shape mismatch");
    trace.dropout_scale = *dropout_scale;
    trace.output.noalias() = params.output_weights * trace.dense.cwiseProduct(*dropout_scale);
  } else {
    trace.output.noalias() = params.output_weights * trace.dense;
  }
  trace.output.colwise() += params.output_bias;
  return trace;
}

/// Prediction per time step (out_dim x T) for either architecture.
template <typename Scalar>
MatrixX<Scalar> network_forward(const NetworkParams<Scalar>& params, const MatrixX<Scalar>& inputs, bool training,
                                Rng& rng) {
  if (training && params.arch.dropout_p > 0.0) {
    const MatrixX<Scalar> scale = make_dropout_scale<Scalar>(rng, params.arch.dense, inputs.cols(), params.arch.dropout_p);
    return forward_trace(params, inputs, &scale).output;
  }
  return forward_trace(params, inputs, static_cast<const MatrixX<Scalar>*>(nullptr)).output;
}

template <typename Scalar>
MatrixX<Scalar> bilstm_forward(const MatrixX<Scalar>& inputs, const NetworkParams<Scalar>& params, bool training,
                               Rng& rng) {
  if (!params.arch.bidirectional) throw ParameterError("bilstm_forward called with unidirectional parameters");
  return network_forward(params, inputs, training, rng);
}

template <typename Scalar>
MatrixX<Scalar> lstm_forward(const MatrixX<Scalar>& inputs, const NetworkParams<Scalar>& params, bool training,
                             Rng& rng) {
  if (params.arch.bidirectional) throw ParameterError("lstm_forward called with bidirectional parameters");
  return network_forward(params, inputs, training, rng);
}

/// Uniform +-1/sqrt(fan_in) weights, zero biases except the forget-gate input
/// bias (1.0). Draw order is forward cell, backward cell, dense, output, so the
/// LSTM and BiLSTM variants share an identical forward cell for a given seed.
NetworkParamsd init_params(std::uint64_t seed, const Architecture& arch);

}  // namespace laimpute

#endif  // LAIMPUTE_NET_HPP
