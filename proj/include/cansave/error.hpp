#ifndef CANSAVE_ERROR_HPP
#define CANSAVE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace cansave {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text: bad dates, bad numbers, wrong field counts.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates the data contract
// (unknown enum value, empty code, event before birth, schema mismatch).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, paths, or usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Undefined statistic, infeasible calibration, or failed numeric procedure.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Optimizer hit the iteration cap; carries the last iterate and gradient norm.
class NonConvergenceError : public NumericError {
 public:
  NonConvergenceError(const std::string& msg, std::vector<double> last_iterate,
                      double gradient_norm)
      : NumericError(msg),
        last_iterate_(std::move(last_iterate)),
        gradient_norm_(gradient_norm) {}

  const std::vector<double>& last_iterate() const { return last_iterate_; }
  double gradient_norm() const { return gradient_norm_; }

 private:
  std::vector<double> last_iterate_;
  double gradient_norm_;
};

}  // namespace cansave

#endif  // CANSAVE_ERROR_HPP
