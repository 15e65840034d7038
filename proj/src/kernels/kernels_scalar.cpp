#include "pinvitkit/kernels.hpp"

// Reference kernels. Plain loops, no pragmas: these define the semantics the
// vectorized variants are tested against.

namespace pinvitkit::kernels::scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void csr_spmv(std::size_t nrows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* val, const double* x,
              double* y) {
  for (std::size_t i = 0; i < nrows; ++i) {
    double acc = 0.0;
    for (std::int32_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      acc += val[k] * x[col_idx[k]];
    y[i] = acc;
  }
}

}  // namespace pinvitkit::kernels::scalar
