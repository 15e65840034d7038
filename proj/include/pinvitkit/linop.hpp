#ifndef PINVITKIT_LINOP_HPP
#define PINVITKIT_LINOP_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "pinvitkit/errors.hpp"
#include "pinvitkit/vector.hpp"

namespace pinvitkit {

enum class OperatorKind { stiffness, mass, preconditioner, generic };

class DualMetric;

/**
 * \brief Abstract symmetric positive operator on coefficient vectors.
 *
 * Concrete operators provide an exact apply and, where meaningful, an inverse
 * apply (preconditioners, stiffness backends). Operators are immutable after
 * problem construction and safe for concurrent application.
 */
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  std::size_t dim() const { return dim_; }
  OperatorKind kind() const { return kind_; }

  virtual bool has_exact_apply() const { return true; }
  /// Approximate application is always available through the generic
  /// truncation path as long as the exact product can be formed.
  bool has_approx_apply() const { return has_exact_apply(); }
  virtual bool has_inverse_apply() const { return false; }

  /// True for operators that act entrywise (diagonal matrices, identity).
  virtual bool is_diagonal() const { return false; }
  /// Main diagonal if cheaply accessible, else nullptr.
  virtual const double* diagonal() const { return nullptr; }

  void apply(std::span<const double> x, std::span<double> y) const;
  Vector apply(const Vector& x) const;

  void apply_inverse(std::span<const double> r, std::span<double> y) const;
  Vector apply_inverse(const Vector& r) const;

  /// Dual-norm surrogate used when this operator is applied approximately.
  /// Wired once at problem construction; null means Euclidean.
  const DualMetric* metric() const { return metric_.get(); }
  void set_metric(std::shared_ptr<const DualMetric> m) { metric_ = std::move(m); }

 protected:
  LinearOperator(std::size_t dim, OperatorKind kind) : dim_(dim), kind_(kind) {
    if (dim == 0) throw DimensionError("operator dimension must be >= 1");
  }

  virtual void do_apply(std::span<const double> x, std::span<double> y) const = 0;
  virtual void do_apply_inverse(std::span<const double>, std::span<double>) const {
    throw CapabilityError("operator has no inverse apply");
  }

 private:
  std::size_t dim_;
  OperatorKind kind_;
  std::shared_ptr<const DualMetric> metric_;
};

/**
 * \brief Discrete surrogate for a norm pair (primal ||.||_W, dual ||.||_{W^-1}).
 *
 * A null weight is the Euclidean pair. The weight must be symmetric positive
 * with an inverse apply.
 */
class DualMetric {
 public:
  DualMetric() = default;
  explicit DualMetric(std::shared_ptr<const LinearOperator> weight)
      : w_(std::move(weight)) {}

  double primal_norm(const Vector& v) const;
  double dual_norm(const Vector& f) const;

  /// Exact per-entry dual-norm contributions exist (weight diagonal or
  /// Euclidean).
  bool is_diagonal() const { return !w_ || w_->is_diagonal(); }
  /// Entry weights W_ii for ordering truncation candidates; nullptr = unit.
  const double* diagonal_weight() const { return w_ ? w_->diagonal() : nullptr; }
  const LinearOperator* weight() const { return w_.get(); }

 private:
  std::shared_ptr<const LinearOperator> w_;
};

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(std::size_t dim, OperatorKind kind = OperatorKind::mass)
      : LinearOperator(dim, kind), ones_(dim, 1.0) {}

  bool has_inverse_apply() const override { return true; }
  bool is_diagonal() const override { return true; }
  const double* diagonal() const override { return ones_.data(); }

 protected:
  void do_apply(std::span<const double> x, std::span<double> y) const override;
  void do_apply_inverse(std::span<const double> r, std::span<double> y) const override;

 private:
  std::vector<double> ones_;
};

class DiagonalOperator final : public LinearOperator {
 public:
  DiagonalOperator(Vector d, OperatorKind kind = OperatorKind::preconditioner);

  bool has_inverse_apply() const override { return true; }
  bool is_diagonal() const override { return true; }
  const double* diagonal() const override { return d_.data(); }
  const Vector& entries() const { return d_; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> y) const override;
  void do_apply_inverse(std::span<const double> r, std::span<double> y) const override;

 private:
  Vector d_;
};

/// Dense symmetric operator (row-major storage). Inverse applies go through a
/// Cholesky factorization computed on first use; factorization failure means
/// the matrix is not SPD.
class DenseOperator final : public LinearOperator {
 public:
  DenseOperator(std::size_t n, std::vector<double> row_major,
                OperatorKind kind = OperatorKind::generic);

  bool has_inverse_apply() const override { return true; }
  const double* diagonal() const override { return diag_.data(); }

  double at(std::size_t i, std::size_t j) const { return a_[i * dim() + j]; }
  const std::vector<double>& data() const { return a_; }

  /// Attempt the factorization now; throws NotSpdError if it fails.
  void require_spd() const { factor(); }
  double symmetry_defect() const;

 protected:
  void do_apply(std::span<const double> x, std::span<double> y) const override;
  void do_apply_inverse(std::span<const double> r, std::span<double> y) const override;

 private:
  const std::vector<double>& factor() const;

  std::vector<double> a_;
  std::vector<double> diag_;
  mutable std::vector<double> chol_;
  mutable std::once_flag chol_once_;
};

/// Sparse symmetric operator in compressed-row form with sorted column
/// indices. Inverse applies use an unpreconditioned conjugate-gradient solve
/// to a fixed relative tolerance, decoupled from any solver accuracy budget.
class CsrOperator final : public LinearOperator {
 public:
  CsrOperator(std::size_t n, std::vector<std::int32_t> row_ptr,
              std::vector<std::int32_t> col_idx, std::vector<double> val,
              OperatorKind kind = OperatorKind::stiffness);

  bool has_inverse_apply() const override { return true; }
  const double* diagonal() const override { return diag_.data(); }

  const std::vector<std::int32_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::int32_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return val_; }
  std::size_t nnz() const { return val_.size(); }

  static constexpr double kInverseTol = 1e-12;

 protected:
  void do_apply(std::span<const double> x, std::span<double> y) const override;
  void do_apply_inverse(std::span<const double> r, std::span<double> y) const override;

 private:
  std::vector<std::int32_t> row_ptr_, col_idx_;
  std::vector<double> val_;
  std::vector<double> diag_;
};

/// c*M without copying M.
class ScaledOperator final : public LinearOperator {
 public:
  ScaledOperator(std::shared_ptr<const LinearOperator> inner, double scale);

  bool has_inverse_apply() const override { return inner_->has_inverse_apply(); }
  bool is_diagonal() const override { return inner_->is_diagonal(); }
  const double* diagonal() const override;
  double scale() const { return scale_; }
  const LinearOperator& inner() const { return *inner_; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> y) const override;
  void do_apply_inverse(std::span<const double> r, std::span<double> y) const override;

 private:
  std::shared_ptr<const LinearOperator> inner_;
  double scale_;
  std::vector<double> diag_;
};

// ---------------------------------------------------------------------------
// Vector-space operations

/// Coefficient-space pairing <u, v> (the discrete dual pairing; coincides
/// with the H inner product when the mass operator is the identity).
double inner(const Vector& u, const Vector& v);

/// <Mu, v>; the M-inner product for symmetric positive M.
double operator_inner(const LinearOperator& M, const Vector& u, const Vector& v);

/// sqrt(<Mv, v>). Throws NotSpdError if the quadratic form is negative
/// beyond rounding.
double norm_in(const LinearOperator& M, const Vector& v);

Vector apply(const LinearOperator& M, const Vector& v);
Vector apply_inverse(const LinearOperator& P, const Vector& r);

/// sqrt(<M^{-1} r, r>); the M^{-1}-induced norm of a residual-type vector.
double norm_in_inverse(const LinearOperator& M, const Vector& r);

/// Preconditioned conjugate gradients for SPD apply-only operators.
/// Returns the iteration count; throws ConvergenceError at the cap.
int conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply_op,
                       std::span<const double> b, std::span<double> x,
                       double rel_tol, int max_iter,
                       const std::function<void(std::span<const double>, std::span<double>)>& precond = nullptr);

// ---------------------------------------------------------------------------
// Spectral constants

/**
 * \brief Constants of the operator frame, measured in the discrete surrogate
 * metric: sigma0 ||v||_P^2 <= <Av,v> <= sigma1 ||v||_P^2, ||v||_E <= alpha
 * ||v||_P, ||Id - P^{-1}A||_A <= gamma_p.
 */
struct SpectralConstants {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double alpha = 0.0;
  double gamma_p = 0.0;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  /// Safety factor the estimates were inflated by (1 = exact values).
  double margin = 1.0;

  void validate() const;
};

struct EstimateOptions {
  int trials = 3;
  int max_iters = 500;
  double tol = 1e-10;
  double margin = 1.1;
  std::uint64_t seed = 0x5eedULL;
  /// Also estimate lambda1/lambda2 of (A, E) by inverse iteration with
  /// deflation (requires an inverse apply on A).
  bool estimate_eigenvalues = true;
};

struct PencilExtremes {
  double smallest = 0.0;
  double largest = 0.0;
};

/// Extremal generalized Rayleigh quotients of the SPD pencil (M, W) by power
/// iteration (W enters through its inverse apply only).
PencilExtremes pencil_extremes(const LinearOperator& M, const LinearOperator& W,
                               int max_iters = 500, double tol = 1e-10,
                               std::uint64_t seed = 0x5eedULL);

/// Largest |eigenvalue| of Id - P^{-1}A in the A-inner product.
double measure_gamma_p(const LinearOperator& A, const LinearOperator& P,
                       int max_iters = 3000, double tol = 1e-12,
                       std::uint64_t seed = 0x5eedULL);

/// Numerically estimate the spectral constants by extremal Rayleigh-quotient
/// iteration on the pencils (A, P) and (E, P), and gamma_p as the largest
/// magnitude eigenvalue of Id - P^{-1}A in the A-inner product. Estimates are
/// inflated in the conservative direction by options.margin.
SpectralConstants estimate_constants(const LinearOperator& A,
                                     const LinearOperator& E,
                                     const LinearOperator& P,
                                     const EstimateOptions& options = {});

}  // namespace pinvitkit

#endif
