#pragma once

#include <stdexcept>
#include <string>

namespace dlmix {

// User-facing configuration or schema problem. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent data (parse failures, shape mismatches, degenerate
// inputs). CLI maps this to exit code 2 as well.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure inside the sampler or a factorization. CLI maps this to
// exit code 3. `iteration` is -1 when the failure is not tied to a sweep.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg, long iteration = -1)
      : std::runtime_error(iteration >= 0 ? msg + " (iteration " + std::to_string(iteration) + ")"
                                          : msg),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

}  // namespace dlmix
