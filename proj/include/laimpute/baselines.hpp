#ifndef LAIMPUTE_BASELINES_HPP
#define LAIMPUTE_BASELINES_HPP

#include <string>
#include <variant>
#include <vector>

#include "laimpute/kv_config.hpp"
#include "laimpute/series.hpp"

namespace laimpute {

/// z = (x - mean) / scale
struct Standardization {
  double mean = 0.0;
  double scale = 1.0;

  double apply(double x) const { return (x - mean) / scale; }
};

Standardization fit_standardization(const Eigen::Ref<const Vector>& x);

/// Polynomial in the standardized predictor, ascending powers.
struct PolyModel {
  int degree = 0;
  Vector coefficients;
  Standardization x_transform;

  /// The same polynomial expressed in powers of the raw predictor.
  Vector power_basis_coefficients() const;
};

/// y = a * exp(b * x) + c in the raw predictor.
struct ExpModel {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
};

/// Least squares through a column-pivoting Householder QR of the Vandermonde
/// matrix of standardized x. Throws RankError with fewer than degree + 1
/// distinct x values.
PolyModel poly_fit(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, int degree);

double poly_eval(const PolyModel& model, double x);
double exp_eval(const ExpModel& model, double x);

template <typename Derived>
Vector poly_eval(const PolyModel& model, const Eigen::DenseBase<Derived>& x) {
  return x.derived().unaryExpr([&model](double v) { return poly_eval(model, v); });
}

template <typename Derived>
Vector exp_eval(const ExpModel& model, const Eigen::DenseBase<Derived>& x) {
  return x.derived().unaryExpr([&model](double v) { return exp_eval(model, v); });
}

struct ExpFitOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
};

struct ExpFitResult {
  ExpModel model;
  double initial_sse = 0.0;          // after the log-linear initializer
  std::vector<double> sse_history;   // one entry per accepted iterate, starting with initial_sse
  int iterations = 0;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, ExpModel last) : Error(what), last_(last) {}
  const ExpModel& last_iterate() const { return last_; }

 private:
  ExpModel last_;
};

/// Log-linear initialization on shifted data, then Gauss-Newton with
/// step halving. Needs at least 3 points.
ExpFitResult exp_fit_traced(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                            const ExpFitOptions& options = {});
ExpModel exp_fit(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                 const ExpFitOptions& options = {});

enum class BaselineMethod { kPolynomial, kExponential };

BaselineMethod parse_baseline_method(const std::string& name);
std::string to_string(BaselineMethod method);

struct BaselineOptions {
  BaselineMethod method = BaselineMethod::kPolynomial;
  int degree = 3;
  int smooth_window = 5;  // Gaussian smoothing of VH/VV before interpolation; 1 disables
};

using FittedBaseline = std::variant<PolyModel, ExpModel>;

struct BaselineResult {
  TimeSeriesRecord imputed;
  FittedBaseline model;
};

/// Regresses observed LAI on VH/VV interpolated to every step, then fills
/// the LAI gaps from the fitted curve. Observed LAI is passed through.
BaselineResult baseline_impute(const TimeSeriesRecord& record, const BaselineOptions& options);

/// Flat key-value form: method, degree/coefficients or a/b/c, x transform.
std::string to_config_text(const FittedBaseline& model);
FittedBaseline baseline_from_config(const KeyValueConfig& kv);

}  // namespace laimpute

#endif  // LAIMPUTE_BASELINES_HPP
