#ifndef PINVITKIT_KERNELS_HPP
#define PINVITKIT_KERNELS_HPP

#include <cstddef>
#include <cstdint>
#include <string>

namespace pinvitkit::kernels {

// Dense/sparse inner loops used by the operator layer. Every kernel has a
// scalar reference implementation and, on x86-64 with AVX2, a vectorized
// variant. The dispatched front ends select an implementation once at first
// use; PINVIT_KIT_KERNELS=scalar|avx2|auto overrides the choice.

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scal(double a, double* x, std::size_t n);
void csr_spmv(std::size_t nrows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* val, const double* x,
              double* y);
}  // namespace scalar

#ifdef __x86_64__
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scal(double a, double* x, std::size_t n);
void csr_spmv(std::size_t nrows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* val, const double* x,
              double* y);
}  // namespace avx2
#endif

enum class Isa { scalar, avx2 };

/// Implementation selected for this process.
Isa active_isa();
std::string isa_name(Isa isa);

/// Override the dispatch (tests only; not thread-safe against in-flight calls).
void force_isa(Isa isa);

/// True if the AVX2 variants can run on this machine.
bool avx2_supported();

double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scal(double a, double* x, std::size_t n);
void csr_spmv(std::size_t nrows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* val, const double* x,
              double* y);

}  // namespace pinvitkit::kernels

#endif
