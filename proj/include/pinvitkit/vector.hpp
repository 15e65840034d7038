#ifndef PINVITKIT_VECTOR_HPP
#define PINVITKIT_VECTOR_HPP

#include <cmath>
#include <span>
#include <vector>

#include "pinvitkit/errors.hpp"
#include "pinvitkit/kernels.hpp"

namespace pinvitkit {

/// Coefficient vectors are plain contiguous doubles; all structure lives in
/// the operators acting on them.
using Vector = std::vector<double>;

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v))
    throw ConfigError(std::string(what) + ": non-finite coefficient");
}

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
}

inline double l2_norm(std::span<const double> v) {
  return std::sqrt(kernels::dot(v.data(), v.data(), v.size()));
}

inline Vector scaled(const Vector& v, double a) {
  Vector out(v);
  kernels::scal(a, out.data(), out.size());
  return out;
}

/// y += a*x
inline void axpy(double a, const Vector& x, Vector& y) {
  require_same_dim(x.size(), y.size(), "axpy");
  kernels::axpy(a, x.data(), y.data(), x.size());
}

}  // namespace pinvitkit

#endif
