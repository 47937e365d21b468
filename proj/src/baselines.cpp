#include "laimpute/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Dense>

namespace laimpute {

Standardization fit_standardization(const Eigen::Ref<const Vector>& x) {
  if (x.size() == 0) return {};
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().mean());
  return {mean, sd > 0.0 ? sd : 1.0};
}

Vector PolyModel::power_basis_coefficients() const {
  // z = alpha x + beta; expand each z^k binomially.
  const double alpha = 1.0 / x_transform.scale;
  const double beta = -x_transform.mean / x_transform.scale;
  Vector out = Vector::Zero(degree + 1);
  for (int k = 0; k <= degree; ++k) {
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      out[j] += coefficients[k] * binom * std::pow(alpha, j) * std::pow(beta, k - j);
      binom = binom * (k - j) / (j + 1);
    }
  }
  return out;
}

PolyModel poly_fit(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, int degree) {
  if (degree < 0) throw ParameterError("polynomial degree must be non-negative");
  if (x.size() != y.size()) throw DimensionError("poly_fit: x/y length mismatch");
  if (!x.allFinite() || !y.allFinite()) throw ParameterError("poly_fit: non-finite data");
  const std::set<double> distinct(x.data(), x.data() + x.size());
  if (static_cast<int>(distinct.size()) < degree + 1)
    throw RankError("poly_fit: degree " + std::to_string(degree) + " needs " + std::to_string(degree + 1) +
                    " distinct x values, got " + std::to_string(distinct.size()));

  PolyModel model;
  model.degree = degree;
  model.x_transform = fit_standardization(x);
  Matrix vandermonde(x.size(), degree + 1);
  for (Index i = 0; i < x.size(); ++i) {
    const double z = model.x_transform.apply(x[i]);
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      vandermonde(i, k) = p;
      p *= z;
    }
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(vandermonde);
  if (qr.rank() < degree + 1) throw RankError("poly_fit: Vandermonde matrix is rank deficient");
  model.coefficients = qr.solve(y);
  return model;
}

double poly_eval(const PolyModel& model, double x) {
  const double z = model.x_transform.apply(x);
  double acc = 0.0;
  for (Index k = model.coefficients.size() - 1; k >= 0; --k) acc = acc * z + model.coefficients[k];
  return acc;
}

double exp_eval(const ExpModel& model, double x) { return model.a * std::exp(model.b * x) + model.c; }

namespace {

// Parameters in the standardized predictor z.
struct ExpParams {
  double a, b, c;
};

double sse(const ExpParams& p, const Vector& z, const Eigen::Ref<const Vector>& y) {
  const double s = (y.array() - (p.a * (p.b * z.array()).exp() + p.c)).square().sum();
  return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

// Fits ln(sign * (y - c0)) = ln|a| + b z by linear least squares.
ExpParams log_linear_init(const Vector& z, const Eigen::Ref<const Vector>& y, double c0, double sign) {
  Matrix design(z.size(), 2);
  design.col(0).setOnes();
  design.col(1) = z;
  const Vector target = (sign * (y.array() - c0)).log().matrix();
  const Vector coef = design.colPivHouseholderQr().solve(target);
  return {sign * std::exp(coef[0]), coef[1], c0};
}

ExpModel to_raw(const ExpParams& p, const Standardization& s) {
  // a exp(b (x - m) / s) + c = a exp(-b m / s) exp((b / s) x) + c
  return {p.a * std::exp(-p.b * s.mean / s.scale), p.b / s.scale, p.c};
}

}  // namespace

ExpFitResult exp_fit_traced(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                            const ExpFitOptions& options) {
  if (x.size() != y.size()) throw DimensionError("exp_fit: x/y length mismatch");
  if (x.size() < 3) throw InsufficientDataError("exp_fit: needs at least 3 points");
  if (!x.allFinite() || !y.allFinite()) throw ParameterError("exp_fit: non-finite data");

  const Standardization transform = fit_standardization(x);
  const Vector z = x.unaryExpr([&](double v) { return transform.apply(v); });

  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  const double shift = std::max(0.1 * (hi - lo), 1e-6 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))));
  const ExpParams rising = log_linear_init(z, y, lo - shift, 1.0);
  const ExpParams falling = log_linear_init(z, y, hi + shift, -1.0);
  ExpParams p = sse(rising, z, y) <= sse(falling, z, y) ? rising : falling;

  ExpFitResult result;
  double current = sse(p, z, y);
  result.initial_sse = current;
  result.sse_history.push_back(current);

  Matrix jac(z.size(), 3);
  bool converged = current == 0.0;
  while (!converged && result.iterations < options.max_iterations) {
    ++result.iterations;
    const Vector e = (p.b * z.array()).exp().matrix();
    jac.col(0) = e;
    jac.col(1) = (p.a * z.array() * e.array()).matrix();
    jac.col(2).setOnes();
    const Vector residual = (y.array() - (p.a * e.array() + p.c)).matrix();
    const Vector delta = jac.completeOrthogonalDecomposition().solve(residual);

    double lambda = 1.0;
    ExpParams candidate = p;
    double next = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 60; ++halving) {
      candidate = {p.a + lambda * delta[0], p.b + lambda * delta[1], p.c + lambda * delta[2]};
      next = sse(candidate, z, y);
      if (next <= current) break;
      lambda *= 0.5;
    }
    if (!(next <= current)) {
      // No descent along the Gauss-Newton direction: stationary point.
      converged = true;
      break;
    }
    const double change = (current - next) / std::max(current, std::numeric_limits<double>::min());
    p = candidate;
    current = next;
    result.sse_history.push_back(current);
    converged = current == 0.0 || change < options.relative_tolerance;
  }

  result.model = to_raw(p, transform);
  if (!converged)
    throw ConvergenceError("exp_fit: no convergence after " + std::to_string(options.max_iterations) + " iterations",
                           result.model);
  if (result.model.a == 0.0 || !std::isfinite(result.model.a) || !std::isfinite(result.model.b) ||
      !std::isfinite(result.model.c))
    throw ConvergenceError("exp_fit: degenerate solution", result.model);
  return result;
}

ExpModel exp_fit(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, const ExpFitOptions& options) {
  return exp_fit_traced(x, y, options).model;
}

BaselineMethod parse_baseline_method(const std::string& name) {
  if (name == "poly") return BaselineMethod::kPolynomial;
  if (name == "exp") return BaselineMethod::kExponential;
  throw ConfigError("unknown baseline method '" + name + "' (expected poly or exp)");
}

std::string to_string(BaselineMethod method) {
  return method == BaselineMethod::kPolynomial ? "poly" : "exp";
}

BaselineResult baseline_impute(const TimeSeriesRecord& record, const BaselineOptions& options) {
  validate(record);
  const Vector smoothed = options.smooth_window > 1
                              ? gaussian_smooth(record.vhvv, record.vhvv_mask, options.smooth_window)
                              : Vector(record.vhvv);
  const Vector predictor = interpolate_to_times(record.times, smoothed, record.vhvv_mask, record.times);

  const Index pairs = record.lai_mask.count();
  Vector x(pairs);
  Vector y(pairs);
  for (Index t = 0, k = 0; t < record.size(); ++t) {
    if (!record.lai_mask[t]) continue;
    x[k] = predictor[t];
    y[k] = record.lai[t];
    ++k;
  }

  BaselineResult result{record, PolyModel{}};
  if (options.method == BaselineMethod::kPolynomial) {
    if (pairs < options.degree + 1)
      throw InsufficientDataError("baseline_impute: " + std::to_string(pairs) + " observed pairs for degree " +
                                  std::to_string(options.degree));
    result.model = poly_fit(x, y, options.degree);
  } else {
    if (pairs < 3) throw InsufficientDataError("baseline_impute: exponential fit needs 3 observed pairs");
    result.model = exp_fit(x, y);
  }

  for (Index t = 0; t < record.size(); ++t) {
    if (record.lai_mask[t]) continue;
    result.imputed.lai[t] = std::visit(
        [&](const auto& m) {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PolyModel>) {
            return poly_eval(m, predictor[t]);
          } else {
            return exp_eval(m, predictor[t]);
          }
        },
        result.model);
  }
  result.imputed.lai_mask.setConstant(true);
  return result;
}

std::string to_config_text(const FittedBaseline& model) {
  if (const auto* poly = std::get_if<PolyModel>(&model)) {
    std::vector<std::pair<std::string, std::string>> kv{{"method", "poly"},
                                                        {"degree", std::to_string(poly->degree)},
                                                        {"x_mean", format_double(poly->x_transform.mean)},
                                                        {"x_scale", format_double(poly->x_transform.scale)}};
    for (Index k = 0; k < poly->coefficients.size(); ++k)
      kv.emplace_back("coef" + std::to_string(k), format_double(poly->coefficients[k]));
    return format_key_values(kv);
  }
  const auto& e = std::get<ExpModel>(model);
  return format_key_values(
      {{"method", "exp"}, {"a", format_double(e.a)}, {"b", format_double(e.b)}, {"c", format_double(e.c)}});
}

FittedBaseline baseline_from_config(const KeyValueConfig& kv) {
  const auto method = parse_baseline_method(kv.get_string("method", ""));
  if (method == BaselineMethod::kPolynomial) {
    PolyModel m;
    m.degree = static_cast<int>(kv.get_int("degree", -1));
    if (m.degree < 0) throw ConfigError("poly model needs a degree");
    m.x_transform.mean = kv.get_double("x_mean", 0.0);
    m.x_transform.scale = kv.get_double("x_scale", 1.0);
    m.coefficients.resize(m.degree + 1);
    for (int k = 0; k <= m.degree; ++k) {
      const std::string key = "coef" + std::to_string(k);
      if (!kv.contains(key)) throw ConfigError("poly model missing " + key);
      m.coefficients[k] = kv.get_double(key, 0.0);
    }
    kv.reject_unused();
    return m;
  }
  ExpModel e{kv.get_double("a", 1.0), kv.get_double("b", 0.0), kv.get_double("c", 0.0)};
  kv.reject_unused();
  return e;
}

}  // namespace laimpute
