#include "pinvitkit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pinvitkit/errors.hpp"

namespace pinvitkit::oracle {

namespace {

constexpr std::size_t kMaxOracleDim = 2000;

// Lower-triangular Cholesky factor, plain loops.
std::vector<double> cholesky(const DenseMatrix& M) {
  const std::size_t n = M.n;
  std::vector<double> L(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = M.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L[j * n + k] * L[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d))
      throw NotSpdError("oracle: Cholesky pivot <= 0 at row " + std::to_string(j));
    L[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = M.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
      L[i * n + j] = s / L[j * n + j];
    }
  }
  return L;
}

void forward_solve(const std::vector<double>& L, std::size_t n, Vector& x) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= L[i * n + k] * x[k];
    x[i] = s / L[i * n + i];
  }
}

void backward_solve_transposed(const std::vector<double>& L, std::size_t n, Vector& x) {
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= L[k * n + ii] * x[k];
    x[ii] = s / L[ii * n + ii];
  }
}

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
// C is destroyed; V receives the rotations (columns are eigenvectors).
void jacobi_eigensolve(DenseMatrix& C, DenseMatrix& V) {
  const std::size_t n = C.n;
  V = DenseMatrix(n);
  for (std::size_t i = 0; i < n; ++i) V.at(i, i) = 1.0;
  if (n == 1) return;

  double norm_sq = 0.0;
  for (double x : C.a) norm_sq += x * x;
  const double stop = 1e-30 * std::max(norm_sq, 1e-300);

  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off_sq = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off_sq += 2.0 * C.at(p, q) * C.at(p, q);
    if (off_sq <= stop) return;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double cpq = C.at(p, q);
        if (cpq == 0.0) continue;
        const double tau = (C.at(q, q) - C.at(p, p)) / (2.0 * cpq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double ckp = C.at(k, p), ckq = C.at(k, q);
          C.at(k, p) = c * ckp - s * ckq;
          C.at(k, q) = s * ckp + c * ckq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double cpk = C.at(p, k), cqk = C.at(q, k);
          C.at(p, k) = c * cpk - s * cqk;
          C.at(q, k) = s * cpk + c * cqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V.at(k, p), vkq = V.at(k, q);
          V.at(k, p) = c * vkp - s * vkq;
          V.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  throw ConvergenceError("oracle: Jacobi sweeps did not reduce off-diagonal mass");
}

}  // namespace

double dot_plain(const Vector& u, const Vector& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

Vector matvec_plain(const DenseMatrix& M, const Vector& v) {
  Vector y(M.n, 0.0);
  for (std::size_t i = 0; i < M.n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < M.n; ++j) s += M.at(i, j) * v[j];
    y[i] = s;
  }
  return y;
}

double quadratic_form(const DenseMatrix& M, const Vector& v) {
  return dot_plain(matvec_plain(M, v), v);
}

Vector solve_spd_plain(const DenseMatrix& M, const Vector& b) {
  const auto L = cholesky(M);
  Vector x(b);
  forward_solve(L, M.n, x);
  backward_solve_transposed(L, M.n, x);
  return x;
}

SpectrumReport dense_eigensolve(const DenseMatrix& A, const DenseMatrix& E) {
  if (A.n != E.n) throw DimensionError("oracle: pencil dimensions differ");
  if (A.n == 0) throw DimensionError("oracle: empty pencil");
  if (A.n > kMaxOracleDim)
    throw ConfigError("oracle: dense eigensolve limited to n <= 2000");

  const std::size_t n = A.n;
  const auto L = cholesky(E);

  // C = L^{-1} A L^{-T}
  DenseMatrix W(n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = A.at(i, j);
    forward_solve(L, n, col);
    for (std::size_t i = 0; i < n; ++i) W.at(i, j) = col[i];
  }
  DenseMatrix C(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = W.at(i, j);
    forward_solve(L, n, row);
    for (std::size_t j = 0; j < n; ++j) C.at(i, j) = row[j];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double m = 0.5 * (C.at(i, j) + C.at(j, i));
      C.at(i, j) = C.at(j, i) = m;
    }

  DenseMatrix V;
  jacobi_eigensolve(C, V);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return C.at(a, a) < C.at(b, b); });

  SpectrumReport report;
  report.eigenvalues.resize(n);
  report.eigenvectors.assign(n, Vector(n));
  for (std::size_t k = 0; k < n; ++k) {
    report.eigenvalues[k] = C.at(order[k], order[k]);
    Vector u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = V.at(i, order[k]);
    backward_solve_transposed(L, n, u);  // U = L^{-T} V is E-orthonormal
    report.eigenvectors[k] = std::move(u);
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Vector au = matvec_plain(A, report.eigenvectors[k]);
    const Vector eu = matvec_plain(E, report.eigenvectors[k]);
    double r_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = au[i] - report.eigenvalues[k] * eu[i];
      r_sq += d * d;
    }
    worst = std::max(worst, std::sqrt(r_sq));
  }
  report.residual_check = worst;
  return report;
}

DenseMatrix densify(const LinearOperator& op) {
  const std::size_t n = op.dim();
  DenseMatrix M(n);
  Vector e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(std::span<const double>(e), std::span<double>(col));
    for (std::size_t i = 0; i < n; ++i) M.at(i, j) = col[i];
    e[j] = 0.0;
  }
  return M;
}

std::pair<double, double> leading_distinct(const SpectrumReport& s, double rel_gap) {
  if (s.eigenvalues.size() < 2)
    throw ConfigError("oracle: need at least two eigenvalues");
  const double l1 = s.eigenvalues.front();
  for (double l : s.eigenvalues)
    if (l > l1 * (1.0 + rel_gap)) return {l1, l};
  throw ConfigError("oracle: spectrum has no distinct second eigenvalue");
}

AuditRow audit_step(const DenseMatrix& A, const DenseMatrix& E,
                    const SpectrumReport& spectrum, const Vector& before,
                    const Vector& after, double gamma, double slack) {
  const auto [l1, l2] = leading_distinct(spectrum);
  AuditRow row;
  row.mu_before = quadratic_form(A, before) / quadratic_form(E, before);
  row.mu_after = quadratic_form(A, after) / quadratic_form(E, after);
  const double q = 1.0 - (1.0 - gamma) * (1.0 - l1 / l2);
  row.q_squared = q * q;
  row.applicable = row.mu_before > l1 && row.mu_before < l2;
  if (!row.applicable) return row;
  row.ratio_before = (row.mu_before - l1) / (l2 - row.mu_before);
  if (row.mu_after >= l2) {
    // the theorem guarantees mu' < lambda_2 whenever mu < lambda_2
    row.pass = false;
    return row;
  }
  row.ratio_after = (row.mu_after - l1) / (l2 - row.mu_after);
  row.pass = row.ratio_after <= row.q_squared * row.ratio_before + slack;
  return row;
}

}  // namespace pinvitkit::oracle
