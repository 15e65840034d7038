#include "pinvitkit/kernels.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

namespace pinvitkit::kernels {

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scal)(double, double*, std::size_t);
  void (*csr_spmv)(std::size_t, const std::int32_t*, const std::int32_t*,
                   const double*, const double*, double*);
  Isa isa;
};

Table make_table(Isa isa) {
#ifdef __x86_64__
  if (isa == Isa::avx2)
    return {avx2::dot, avx2::axpy, avx2::scal, avx2::csr_spmv, Isa::avx2};
#endif
  return {scalar::dot, scalar::axpy, scalar::scal, scalar::csr_spmv, Isa::scalar};
}

Isa default_isa() {
  if (const char* env = std::getenv("PINVIT_KIT_KERNELS")) {
    const std::string s(env);
    if (s == "scalar") return Isa::scalar;
    if (s == "avx2" && avx2_supported()) return Isa::avx2;
    // "auto" or anything else falls through to detection
  }
  return avx2_supported() ? Isa::avx2 : Isa::scalar;
}

Table g_table;
std::once_flag g_once;

const Table& table() {
  std::call_once(g_once, [] { g_table = make_table(default_isa()); });
  return g_table;
}

}  // namespace

bool avx2_supported() {
#ifdef __x86_64__
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return table().isa; }

std::string isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

void force_isa(Isa isa) {
  table();  // ensure once-init happened
  g_table = make_table(isa == Isa::avx2 && !avx2_supported() ? Isa::scalar : isa);
}

double dot(const double* x, const double* y, std::size_t n) {
  return table().dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  table().axpy(a, x, y, n);
}

void scal(double a, double* x, std::size_t n) { table().scal(a, x, n); }

void csr_spmv(std::size_t nrows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* val, const double* x,
              double* y) {
  table().csr_spmv(nrows, row_ptr, col_idx, val, x, y);
}

}  // namespace pinvitkit::kernels
