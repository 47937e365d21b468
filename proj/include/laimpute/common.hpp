#ifndef LAIMPUTE_COMMON_HPP
#define LAIMPUTE_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace laimpute {

using Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

// Error hierarchy. Every failure raised by the library derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidRecordError : public Error {
 public:
  using Error::Error;
};

class DegenerateChannelError : public Error {
 public:
  using Error::Error;
};

class EmptyChannelError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class NoObservationError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// Parse failure tied to a 1-based line number of the offending input.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what);

  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
/// Bit-identical across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi] (inclusive).
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

/// Derives an independent seed for a named component from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

/// Formats a double with 17 significant digits (shortest exact round trip
/// is not attempted; the fixed width keeps files diff-stable).
std::string format_double(double value);

/// Strict parse of a complete string as a double. Returns false on any
/// trailing characters or empty input.
bool parse_double(std::string_view text, double& out);

}  // namespace laimpute

#endif  // LAIMPUTE_COMMON_HPP
