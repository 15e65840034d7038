#ifndef PINVITKIT_PROBLEMS_HPP
#define PINVITKIT_PROBLEMS_HPP

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "pinvitkit/linop.hpp"

namespace pinvitkit {

struct ProblemMetadata {
  std::string id;
  std::string domain;  ///< "interval", "rectangle", "lshape", "dense"
  double h = 0.0;
  std::optional<double> lambda1;   ///< closed form or oracle value, when known
  std::optional<double> lambda2;
  std::optional<double> gamma_p;   ///< measured for the attached preconditioner
};

/// A symmetric positive pencil (A, E) together with a preconditioner P.
/// The operators carry the dual-norm surrogates used by approximate applies:
/// A is measured against P, E against itself. Problems are wired once by the
/// builders below and treated as immutable afterwards.
struct EigenProblem {
  std::shared_ptr<LinearOperator> A;
  std::shared_ptr<LinearOperator> E;
  std::shared_ptr<LinearOperator> P;
  std::size_t dim = 0;
  ProblemMetadata metadata;

  void validate() const;
};

struct GridSpec {
  enum class Domain { interval, rectangle, lshape };

  Domain domain = Domain::interval;
  double h = 0.25;  ///< uniform mesh width; 1/h must be an integer

  // Extents are fixed per domain: the unit interval (0,1), the unit square
  // (0,1)^2, and the L-shape (-1,1)^2 \ [0,1]^2.
  void validate() const;
  std::size_t interior_nodes() const;
  /// Nodes per axis of the bounding box.
  std::size_t nodes_per_axis() const;

  std::string id() const;
};

GridSpec::Domain parse_domain(const std::string& name);

/// Wrap explicit symmetric matrices as an eigenproblem; SPD is checked by
/// attempted factorization. Measures gamma_p of the supplied preconditioner.
EigenProblem dense_problem(std::size_t n, std::vector<double> a_row_major,
                           std::vector<double> e_row_major,
                           std::vector<double> p_row_major);

EigenProblem dense_problem(std::shared_ptr<LinearOperator> A,
                           std::shared_ptr<LinearOperator> E,
                           std::shared_ptr<LinearOperator> P);

/// Assemble a problem from prebuilt operators without SPD checks or
/// measurements (callers supply the metadata). Wires the dual-norm
/// surrogates.
EigenProblem wrap_problem(std::shared_ptr<LinearOperator> A,
                          std::shared_ptr<LinearOperator> E,
                          std::shared_ptr<LinearOperator> P,
                          ProblemMetadata metadata = {});

/// 3-point (1D) / 5-point (2D) Dirichlet discretization of -Laplace on the
/// grid; E is the identity (lumped mass) and P the optimally scaled Jacobi
/// preconditioner. Interior nodes are indexed lexicographically; nodes on the
/// re-entrant edges of the L-shape are boundary.
EigenProblem fd_laplacian(const GridSpec& grid);

/// diag(A), scaled so the spectrum of P^{-1}A is centered at 1. The measured
/// gamma_p is written to *measured_gamma when given.
std::shared_ptr<LinearOperator> jacobi_preconditioner(
    const LinearOperator& A, double* measured_gamma = nullptr);

struct MultilevelOptions {
  int smooth_steps = 1;        ///< damped-Jacobi pre/post smoothing sweeps
  double omega = 2.0 / 3.0;    ///< Jacobi damping
  double damping = 1.0;        ///< extra scaling of the cycle (< 1 weakens P)
  std::size_t coarse_max_nodes = 40;
};

class MultilevelPreconditioner;

/// Geometric V-cycle on the nested uniform grids h, 2h, 4h, ... with exact
/// coarsest solve. Symmetric positive; inverse apply is one cycle, forward
/// apply solves the cycle by preconditioned CG.
std::shared_ptr<MultilevelPreconditioner> multilevel_preconditioner(
    const GridSpec& grid, const MultilevelOptions& options = {});

class MultilevelPreconditioner final : public LinearOperator {
 public:
  MultilevelPreconditioner(const GridSpec& grid, const MultilevelOptions& options);

  bool has_inverse_apply() const override { return true; }
  double measured_gamma_p() const { return gamma_p_; }
  std::size_t levels() const { return level_count_; }

 protected:
  void do_apply(std::span<const double> x, std::span<double> y) const override;
  void do_apply_inverse(std::span<const double> r, std::span<double> y) const override;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  double scale_ = 1.0;
  double gamma_p_ = 0.0;
  std::size_t level_count_ = 0;
};

/// Replace the preconditioner of a problem: re-wires the dual-norm surrogate
/// of A and re-measures gamma_p.
EigenProblem with_preconditioner(const EigenProblem& problem,
                                 std::shared_ptr<LinearOperator> P);

// Matrix-market-style serialization for dense/sparse pencil members.
void write_matrix_market(const LinearOperator& op, std::ostream& os);
std::shared_ptr<LinearOperator> read_matrix_market(std::istream& is,
                                                   OperatorKind kind);
/// Writes <prefix>.A.mtx, <prefix>.E.mtx, <prefix>.P.mtx.
void save_problem(const EigenProblem& problem, const std::string& prefix);
EigenProblem load_problem(const std::string& prefix);

/// Spec'd convenience overload: estimate constants in the problem's own
/// surrogate metric.
SpectralConstants estimate_constants(const EigenProblem& problem, int trials);

}  // namespace pinvitkit

#endif
