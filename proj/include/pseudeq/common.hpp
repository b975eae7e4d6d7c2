#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pseudeq {

// Bad inputs, shape mismatches, infeasible arguments. CLI maps this to exit 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf escaping a computation that promises finite results. CLI exit 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool is_finite(double x) { return std::isfinite(x); }

template <typename Container>
bool all_finite(const Container& c) {
  for (double x : c)
    if (!std::isfinite(x)) return false;
  return true;
}

// Constraint slack >= -kFeasTol counts as feasible.
inline constexpr double kFeasTol = 1e-9;

}  // namespace pseudeq
