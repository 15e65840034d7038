#include "pinvitkit/linop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pinvitkit/kernels.hpp"
#include "pinvitkit/rng.hpp"

namespace pinvitkit {

// ---------------------------------------------------------------------------
// LinearOperator base

void LinearOperator::apply(std::span<const double> x, std::span<double> y) const {
  require_same_dim(x.size(), dim(), "apply/input");
  require_same_dim(y.size(), dim(), "apply/output");
  if (!has_exact_apply()) throw CapabilityError("operator has no exact apply");
  do_apply(x, y);
}

Vector LinearOperator::apply(const Vector& x) const {
  Vector y(dim());
  apply(std::span<const double>(x), std::span<double>(y));
  return y;
}

void LinearOperator::apply_inverse(std::span<const double> r, std::span<double> y) const {
  require_same_dim(r.size(), dim(), "apply_inverse/input");
  require_same_dim(y.size(), dim(), "apply_inverse/output");
  if (!has_inverse_apply()) throw CapabilityError("operator has no inverse apply");
  do_apply_inverse(r, y);
}

Vector LinearOperator::apply_inverse(const Vector& r) const {
  Vector y(dim());
  apply_inverse(std::span<const double>(r), std::span<double>(y));
  return y;
}

// ---------------------------------------------------------------------------
// Concrete operators

void IdentityOperator::do_apply(std::span<const double> x, std::span<double> y) const {
  std::copy(x.begin(), x.end(), y.begin());
}

void IdentityOperator::do_apply_inverse(std::span<const double> r, std::span<double> y) const {
  std::copy(r.begin(), r.end(), y.begin());
}

DiagonalOperator::DiagonalOperator(Vector d, OperatorKind kind)
    : LinearOperator(d.size(), kind), d_(std::move(d)) {
  for (double x : d_)
    if (!(x > 0.0))
      throw NotSpdError("diagonal operator requires strictly positive entries");
}

void DiagonalOperator::do_apply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < d_.size(); ++i) y[i] = d_[i] * x[i];
}

void DiagonalOperator::do_apply_inverse(std::span<const double> r, std::span<double> y) const {
  for (std::size_t i = 0; i < d_.size(); ++i) y[i] = r[i] / d_[i];
}

DenseOperator::DenseOperator(std::size_t n, std::vector<double> row_major, OperatorKind kind)
    : LinearOperator(n, kind), a_(std::move(row_major)) {
  if (a_.size() != n * n) throw DimensionError("dense operator: storage size != n*n");
  diag_.resize(n);
  for (std::size_t i = 0; i < n; ++i) diag_[i] = a_[i * n + i];
}

double DenseOperator::symmetry_defect() const {
  const std::size_t n = dim();
  double defect = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      defect = std::max(defect, std::abs(a_[i * n + j] - a_[j * n + i]));
      scale = std::max(scale, std::abs(a_[i * n + j]));
    }
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(diag_[i]));
  return scale > 0.0 ? defect / scale : defect;
}

void DenseOperator::do_apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i)
    y[i] = kernels::dot(a_.data() + i * n, x.data(), n);
}

const std::vector<double>& DenseOperator::factor() const {
  std::call_once(chol_once_, [this] {
    const std::size_t n = dim();
    std::vector<double> L(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double d = a_[j * n + j];
      for (std::size_t k = 0; k < j; ++k) d -= L[j * n + k] * L[j * n + k];
      if (!(d > 0.0) || !std::isfinite(d))
        throw NotSpdError("dense operator: Cholesky pivot <= 0 at row " + std::to_string(j));
      L[j * n + j] = std::sqrt(d);
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = a_[i * n + j];
        for (std::size_t k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
        L[i * n + j] = s / L[j * n + j];
      }
    }
    chol_ = std::move(L);
  });
  if (chol_.empty()) throw NotSpdError("dense operator: factorization previously failed");
  return chol_;
}

void DenseOperator::do_apply_inverse(std::span<const double> r, std::span<double> y) const {
  const auto& L = factor();
  const std::size_t n = dim();
  // forward substitution L z = r
  for (std::size_t i = 0; i < n; ++i) {
    double s = r[i];
    for (std::size_t k = 0; k < i; ++k) s -= L[i * n + k] * y[k];
    y[i] = s / L[i * n + i];
  }
  // back substitution L^T x = z
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= L[k * n + ii] * y[k];
    y[ii] = s / L[ii * n + ii];
  }
}

CsrOperator::CsrOperator(std::size_t n, std::vector<std::int32_t> row_ptr,
                         std::vector<std::int32_t> col_idx, std::vector<double> val,
                         OperatorKind kind)
    : LinearOperator(n, kind),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      val_(std::move(val)) {
  if (row_ptr_.size() != n + 1 || col_idx_.size() != val_.size())
    throw DimensionError("csr operator: inconsistent index arrays");
  diag_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::int32_t k = row_ptr_[i] + 1; k < row_ptr_[i + 1]; ++k)
      if (col_idx_[k] <= col_idx_[k - 1])
        throw DimensionError("csr operator: column indices must be strictly increasing per row");
    for (std::int32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (col_idx_[k] == static_cast<std::int32_t>(i)) diag_[i] = val_[k];
  }
}

void CsrOperator::do_apply(std::span<const double> x, std::span<double> y) const {
  kernels::csr_spmv(dim(), row_ptr_.data(), col_idx_.data(), val_.data(),
                    x.data(), y.data());
}

void CsrOperator::do_apply_inverse(std::span<const double> r, std::span<double> y) const {
  const int cap = static_cast<int>(50 * dim()) + 1000;
  conjugate_gradient(
      [this](std::span<const double> x, std::span<double> out) { do_apply(x, out); },
      r, y, kInverseTol, cap);
}

ScaledOperator::ScaledOperator(std::shared_ptr<const LinearOperator> inner, double scale)
    : LinearOperator(inner->dim(), inner->kind()), inner_(std::move(inner)), scale_(scale) {
  if (!(scale > 0.0)) throw NotSpdError("scaled operator requires a positive scale");
  if (const double* d = inner_->diagonal()) {
    diag_.assign(d, d + dim());
    kernels::scal(scale_, diag_.data(), diag_.size());
  }
}

const double* ScaledOperator::diagonal() const {
  return diag_.empty() ? nullptr : diag_.data();
}

void ScaledOperator::do_apply(std::span<const double> x, std::span<double> y) const {
  inner_->apply(x, y);
  kernels::scal(scale_, y.data(), y.size());
}

void ScaledOperator::do_apply_inverse(std::span<const double> r, std::span<double> y) const {
  inner_->apply_inverse(r, y);
  kernels::scal(1.0 / scale_, y.data(), y.size());
}

// ---------------------------------------------------------------------------
// DualMetric

double DualMetric::primal_norm(const Vector& v) const {
  return w_ ? norm_in(*w_, v) : l2_norm(v);
}

double DualMetric::dual_norm(const Vector& f) const {
  return w_ ? norm_in_inverse(*w_, f) : l2_norm(f);
}

// ---------------------------------------------------------------------------
// Vector-space operations

double inner(const Vector& u, const Vector& v) {
  require_same_dim(u.size(), v.size(), "inner");
  return kernels::dot(u.data(), v.data(), u.size());
}

double operator_inner(const LinearOperator& M, const Vector& u, const Vector& v) {
  require_same_dim(u.size(), M.dim(), "operator_inner");
  Vector mu = M.apply(u);
  return inner(mu, v);
}

double norm_in(const LinearOperator& M, const Vector& v) {
  require_same_dim(v.size(), M.dim(), "norm_in");
  Vector mv = M.apply(v);
  const double qf = inner(mv, v);
  if (qf < 0.0) {
    const double scale = l2_norm(mv) * l2_norm(v);
    if (qf < -1e-13 * std::max(scale, 1e-300))
      throw NotSpdError("norm_in: negative quadratic form, operator is not positive");
    return 0.0;
  }
  return std::sqrt(qf);
}

Vector apply(const LinearOperator& M, const Vector& v) { return M.apply(v); }

Vector apply_inverse(const LinearOperator& P, const Vector& r) {
  return P.apply_inverse(r);
}

double norm_in_inverse(const LinearOperator& M, const Vector& r) {
  require_same_dim(r.size(), M.dim(), "norm_in_inverse");
  Vector w = M.apply_inverse(r);
  const double qf = inner(w, r);
  if (qf < 0.0) {
    const double scale = l2_norm(w) * l2_norm(r);
    if (qf < -1e-13 * std::max(scale, 1e-300))
      throw NotSpdError("norm_in_inverse: negative quadratic form");
    return 0.0;
  }
  return std::sqrt(qf);
}

int conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply_op,
                       std::span<const double> b, std::span<double> x,
                       double rel_tol, int max_iter,
                       const std::function<void(std::span<const double>, std::span<double>)>& precond) {
  const std::size_t n = b.size();
  std::fill(x.begin(), x.end(), 0.0);
  const double bnorm = l2_norm(b);
  if (bnorm == 0.0) return 0;

  Vector r(b.begin(), b.end());
  Vector z(n);
  if (precond)
    precond(r, z);
  else
    std::copy(r.begin(), r.end(), z.begin());
  Vector p(z);
  Vector ap(n);
  double rz = kernels::dot(r.data(), z.data(), n);

  for (int it = 0; it < max_iter; ++it) {
    apply_op(p, ap);
    const double pap = kernels::dot(p.data(), ap.data(), n);
    if (!(pap > 0.0))
      throw NotSpdError("conjugate_gradient: operator not positive definite");
    const double alpha = rz / pap;
    kernels::axpy(alpha, p.data(), x.data(), n);
    kernels::axpy(-alpha, ap.data(), r.data(), n);
    if (l2_norm(r) <= rel_tol * bnorm) return it + 1;
    if (precond)
      precond(r, z);
    else
      std::copy(r.begin(), r.end(), z.begin());
    const double rz_next = kernels::dot(r.data(), z.data(), n);
    const double beta = rz_next / rz;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rz = rz_next;
  }
  throw ConvergenceError("conjugate_gradient: no convergence within iteration cap");
}

// ---------------------------------------------------------------------------
// Spectral-constant estimation

void SpectralConstants::validate() const {
  if (!(sigma0 > 0.0)) throw ConfigError("spectral constants: sigma0 must be > 0");
  if (sigma1 < sigma0) throw ConfigError("spectral constants: sigma1 < sigma0");
  if (!(alpha > 0.0)) throw ConfigError("spectral constants: alpha must be > 0");
  if (!(gamma_p >= 0.0 && gamma_p < 1.0))
    throw ConfigError("spectral constants: gamma_p must lie in [0, 1)");
  if (lambda1 && lambda2 && !(*lambda1 < *lambda2))
    throw ConfigError("spectral constants: lambda1 must be < lambda2");
}

namespace {

using ApplyFn = std::function<void(std::span<const double>, std::span<double>)>;

void normalize_l2(Vector& z) {
  const double n = l2_norm(z);
  if (n > 0.0) kernels::scal(1.0 / n, z.data(), z.size());
}

// Largest Rayleigh quotient of the pencil (M, W): power iteration on W^{-1}M
// measured in the M-inner product. Returns 0 if M z vanishes identically.
double pencil_largest(const LinearOperator& M, const LinearOperator& W, Rng& rng,
                      int max_iters, double tol, bool* converged) {
  const std::size_t n = M.dim();
  Vector z(n), mz(n), w(n);
  rng.fill_normal(z);
  normalize_l2(z);
  double r_prev = 0.0;
  *converged = false;
  for (int it = 0; it < max_iters; ++it) {
    M.apply(z, mz);
    W.apply_inverse(mz, w);
    const double den = kernels::dot(mz.data(), z.data(), n);
    if (den <= 0.0) return 0.0;
    const double r = kernels::dot(w.data(), mz.data(), n) / den;
    if (it > 0 && std::abs(r - r_prev) <= tol * std::abs(r)) {
      *converged = true;
      return r;
    }
    r_prev = r;
    z = w;
    normalize_l2(z);
  }
  return r_prev;
}

// Smallest Rayleigh quotient of (M, W) via the shifted operator s*Id - W^{-1}M.
double pencil_smallest(const LinearOperator& M, const LinearOperator& W, double shift,
                       Rng& rng, int max_iters, double tol, bool* converged) {
  const std::size_t n = M.dim();
  Vector z(n), mz(n), w(n);
  rng.fill_normal(z);
  normalize_l2(z);
  double r_prev = shift;
  *converged = false;
  for (int it = 0; it < max_iters; ++it) {
    M.apply(z, mz);
    W.apply_inverse(mz, w);
    const double den = kernels::dot(mz.data(), z.data(), n);
    if (den <= 0.0) return 0.0;
    const double r = kernels::dot(w.data(), mz.data(), n) / den;
    if (it > 0 && std::abs(r - r_prev) <= tol * std::max(std::abs(r), 1e-300)) {
      *converged = true;
      return r;
    }
    r_prev = r;
    for (std::size_t i = 0; i < n; ++i) z[i] = shift * z[i] - w[i];
    normalize_l2(z);
  }
  return r_prev;
}

// Largest |eigenvalue| of H = Id - P^{-1}A in the A-inner product. After
// optimal scaling the extremes come in a near-symmetric pair +-gamma, which
// defeats plain power iteration; iterating on H^2 measures gamma^2 instead:
// (H^2 z, z)_A / (z, z)_A = ||Hz||_A^2 / ||z||_A^2.
double gamma_p_estimate(const LinearOperator& A, const LinearOperator& P, Rng& rng,
                        int max_iters, double tol, bool* converged) {
  const std::size_t n = A.dim();
  Vector z(n), az(n), w(n), hz(n), ahz(n), whz(n), hhz(n);
  rng.fill_normal(z);
  normalize_l2(z);
  double g_prev = 0.0;
  *converged = false;
  for (int it = 0; it < max_iters; ++it) {
    A.apply(z, az);
    P.apply_inverse(az, w);
    for (std::size_t i = 0; i < n; ++i) hz[i] = z[i] - w[i];
    if (l2_norm(hz) <= 1e-14 * l2_norm(z)) {
      *converged = true;
      return 0.0;  // P^{-1}A acts as the identity on this iterate
    }
    const double den = kernels::dot(az.data(), z.data(), n);
    if (den <= 0.0) throw NotSpdError("gamma_p estimation: <Az, z> <= 0");
    A.apply(hz, ahz);
    const double g_sq = kernels::dot(ahz.data(), hz.data(), n) / den;
    const double g = std::sqrt(std::max(g_sq, 0.0));
    if (it > 0 && std::abs(g - g_prev) <= tol * std::max(g, 1e-300)) {
      *converged = true;
      return g;
    }
    g_prev = g;
    P.apply_inverse(ahz, whz);
    for (std::size_t i = 0; i < n; ++i) hhz[i] = hz[i] - whz[i];
    z = hhz;
    normalize_l2(z);
  }
  return g_prev;
}

// Smallest eigenvalues of (A, E) by inverse iteration with deflation against
// the first converged eigenvector. P, when invertible, preconditions the
// inner A-solves.
std::pair<double, double> smallest_pencil_eigs(const LinearOperator& A,
                                               const LinearOperator& E,
                                               const LinearOperator* P, Rng& rng,
                                               int max_iters, double tol) {
  const std::size_t n = A.dim();
  const int cg_cap = static_cast<int>(50 * n) + 1000;
  ApplyFn a_apply = [&A](std::span<const double> x, std::span<double> y) { A.apply(x, y); };
  ApplyFn p_inv;
  if (P && P->has_inverse_apply())
    p_inv = [P](std::span<const double> x, std::span<double> y) { P->apply_inverse(x, y); };

  auto inverse_iter = [&](const Vector* deflate) {
    Vector z(n), ez(n), next(n);
    rng.fill_normal(z);
    normalize_l2(z);
    double mu_prev = 0.0;
    Vector e_defl;
    double defl_qf = 0.0;
    if (deflate) {
      e_defl = E.apply(*deflate);
      defl_qf = inner(e_defl, *deflate);
    }
    for (int it = 0; it < max_iters; ++it) {
      if (deflate) {
        const double c = kernels::dot(e_defl.data(), z.data(), n) / defl_qf;
        kernels::axpy(-c, deflate->data(), z.data(), n);
      }
      E.apply(z, ez);
      conjugate_gradient(a_apply, ez, next, 1e-12, cg_cap, p_inv);
      z = next;
      normalize_l2(z);
      const double mu = operator_inner(A, z, z) / operator_inner(E, z, z);
      if (it > 2 && std::abs(mu - mu_prev) <= tol * std::abs(mu)) return std::pair{mu, z};
      mu_prev = mu;
    }
    return std::pair{mu_prev, z};
  };

  auto [lambda1, u1] = inverse_iter(nullptr);
  auto [lambda2, u2] = inverse_iter(&u1);
  (void)u2;
  return {lambda1, lambda2};
}

}  // namespace

PencilExtremes pencil_extremes(const LinearOperator& M, const LinearOperator& W,
                               int max_iters, double tol, std::uint64_t seed) {
  require_same_dim(M.dim(), W.dim(), "pencil_extremes");
  Rng rng(seed);
  bool conv = false;
  PencilExtremes out;
  out.largest = pencil_largest(M, W, rng, max_iters, tol, &conv);
  const double shift = out.largest * (1.0 + 1e-3) + 1e-12;
  out.smallest = pencil_smallest(M, W, shift, rng, max_iters, tol, &conv);
  return out;
}

double measure_gamma_p(const LinearOperator& A, const LinearOperator& P,
                       int max_iters, double tol, std::uint64_t seed) {
  require_same_dim(A.dim(), P.dim(), "measure_gamma_p");
  Rng rng(seed);
  bool conv = false;
  double g = 0.0;
  for (int t = 0; t < 2; ++t)
    g = std::max(g, gamma_p_estimate(A, P, rng, max_iters, tol, &conv));
  return g;
}

SpectralConstants estimate_constants(const LinearOperator& A, const LinearOperator& E,
                                     const LinearOperator& P, const EstimateOptions& options) {
  if (options.trials < 1) throw ConfigError("estimate_constants: trials must be >= 1");
  require_same_dim(A.dim(), E.dim(), "estimate_constants");
  require_same_dim(A.dim(), P.dim(), "estimate_constants");
  if (!P.has_inverse_apply())
    throw CapabilityError("estimate_constants: preconditioner needs an inverse apply");

  Rng rng(options.seed);
  double sigma1 = 0.0, sigma0 = std::numeric_limits<double>::infinity();
  double alpha_sq = 0.0, gamma = 0.0;
  bool any_converged = false;

  for (int t = 0; t < options.trials; ++t) {
    bool conv = false;
    sigma1 = std::max(sigma1, pencil_largest(A, P, rng, options.max_iters, options.tol, &conv));
    any_converged |= conv;
    alpha_sq = std::max(alpha_sq, pencil_largest(E, P, rng, options.max_iters, options.tol, &conv));
    gamma = std::max(gamma, gamma_p_estimate(A, P, rng, options.max_iters, options.tol, &conv));
  }
  const double shift = sigma1 * (1.0 + 1e-3) + 1e-12;
  for (int t = 0; t < options.trials; ++t) {
    bool conv = false;
    sigma0 = std::min(sigma0, pencil_smallest(A, P, shift, rng, options.max_iters,
                                              options.tol, &conv));
    any_converged |= conv;
  }
  if (!any_converged)
    throw ConvergenceError("estimate_constants: extremal iteration did not settle within cap");
  if (!(sigma0 > 0.0) || !(sigma1 > 0.0))
    throw NotSpdError("estimate_constants: pencil (A, P) is not positive definite");

  SpectralConstants out;
  const double m = options.margin;
  out.margin = m;
  out.sigma0 = sigma0 / m;
  out.sigma1 = std::max(sigma1 * m, out.sigma0);
  out.alpha = std::sqrt(alpha_sq) * m;
  out.gamma_p = std::min(gamma * m, 0.5 * (1.0 + gamma));  // inflated, kept < 1
  if (out.gamma_p < 1e-12) out.gamma_p = 0.0;

  if (options.estimate_eigenvalues && A.has_inverse_apply()) {
    auto [l1, l2] = smallest_pencil_eigs(A, E, &P, rng, options.max_iters, options.tol);
    out.lambda1 = l1;
    out.lambda2 = l2 * m;
    if (!(*out.lambda1 < *out.lambda2)) out.lambda2 = *out.lambda1 * (1.0 + 1e-6);
  }
  return out;
}

}  // namespace pinvitkit
