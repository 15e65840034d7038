#ifndef PINVITKIT_ORACLE_HPP
#define PINVITKIT_ORACLE_HPP

#include <cstddef>
#include <vector>

#include "pinvitkit/linop.hpp"
#include "pinvitkit/vector.hpp"

namespace pinvitkit::oracle {

// Brute-force reference used by the property and acceptance suites. This
// module deliberately shares no linear-algebra code with the solver: plain
// loops only, no dispatched kernels, own factorization and eigensolver.

/// Row-major dense matrix for oracle-internal use.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

struct SpectrumReport {
  std::vector<double> eigenvalues;       ///< ascending
  std::vector<Vector> eigenvectors;      ///< E-orthonormal, matching order
  double residual_check = 0.0;           ///< max_k |A u_k - lambda_k E u_k|_2
};

/// Full spectrum of the SPD pencil (A, E): Cholesky reduction of E followed
/// by cyclic Jacobi rotations. Self-verified through residual_check.
SpectrumReport dense_eigensolve(const DenseMatrix& A, const DenseMatrix& E);

/// Extract the matrix of an operator by unit-vector applies.
DenseMatrix densify(const LinearOperator& op);

/// Distinct lambda_1 and the next strictly larger eigenvalue.
std::pair<double, double> leading_distinct(const SpectrumReport& s, double rel_gap = 1e-10);

struct AuditRow {
  double mu_before = 0.0;
  double mu_after = 0.0;
  double ratio_before = 0.0;
  double ratio_after = 0.0;
  double q_squared = 0.0;
  bool applicable = false;  ///< mu(before) inside (lambda_1, lambda_2)
  bool pass = false;
};

/// Check one iteration step against the shifted-ratio contraction bound with
/// factor q(gamma, lambda_1, lambda_2)^2.
AuditRow audit_step(const DenseMatrix& A, const DenseMatrix& E,
                    const SpectrumReport& spectrum, const Vector& before,
                    const Vector& after, double gamma, double slack = 1e-10);

// Plain-loop helpers (exposed for the verification harnesses).
double dot_plain(const Vector& u, const Vector& v);
Vector matvec_plain(const DenseMatrix& M, const Vector& v);
double quadratic_form(const DenseMatrix& M, const Vector& v);
/// Solves M x = b by Cholesky; throws NotSpdError if M is not SPD.
Vector solve_spd_plain(const DenseMatrix& M, const Vector& b);

}  // namespace pinvitkit::oracle

#endif
