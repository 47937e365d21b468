#include "laimpute/net.hpp"

namespace laimpute {

namespace {

void fill_uniform(Rng& rng, MatrixX<double>& m, double bound) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -bound, bound);
}

void init_cell(Rng& rng, LstmCellParams<double>& cell) {
  fill_uniform(rng, cell.w_input, 1.0 / std::sqrt(static_cast<double>(cell.input_size())));
  fill_uniform(rng, cell.w_hidden, 1.0 / std::sqrt(static_cast<double>(cell.hidden_size())));
  cell.b_input.setZero();
  cell.b_hidden.setZero();
  cell.input_bias(Gate::kForget).setOnes();
}

}  // namespace

NetworkParamsd init_params(std::uint64_t seed, const Architecture& arch) {
  if (arch.input_size < 1 || arch.hidden < 1 || arch.dense < 1 || arch.out_dim < 1)
    throw ParameterError("init_params: sizes must be positive");
  if (!(arch.dropout_p >= 0.0 && arch.dropout_p < 1.0)) throw ParameterError("dropout probability must lie in [0, 1)");
  Rng rng(seed);
  auto params = NetworkParamsd::Zero(arch);
  init_cell(rng, params.forward_cell);
  if (arch.bidirectional) init_cell(rng, params.backward_cell);
  fill_uniform(rng, params.dense_weights, 1.0 / std::sqrt(static_cast<double>(arch.recurrent_width())));
  fill_uniform(rng, params.output_weights, 1.0 / std::sqrt(static_cast<double>(arch.dense)));
  return params;
}

}  // namespace laimpute
