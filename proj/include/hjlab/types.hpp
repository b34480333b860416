#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace hjlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Error hierarchy. Every throwing operation in the library raises one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class StructuralError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// sup |v|, ignoring nothing: non-finite entries propagate.
template <typename Derived>
double sup_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

// Extended-real arithmetic on [-inf, +inf]. The undefined forms inf - inf
// throw instead of producing NaN.
inline double ext_add(double a, double b) {
  if (std::isinf(a) && std::isinf(b) && (a > 0) != (b > 0)) {
    throw ParameterError("extended-real arithmetic: (+inf) + (-inf) is undefined");
  }
  return a + b;
}

inline double ext_sub(double a, double b) { return ext_add(a, -b); }

/// c * g with c >= 0 and the convention c * (+-inf) = +-inf, also for c = 0.
inline double ext_scale(double c, double g) {
  if (std::isinf(g)) return g;
  return c * g;
}

template <typename DerivedA, typename DerivedB>
Vector ext_difference(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  Vector out(a.size());
  for (Index i = 0; i < a.size(); ++i) out[i] = ext_sub(a[i], b[i]);
  return out;
}

}  // namespace hjlab
