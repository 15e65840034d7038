#ifndef PINVITKIT_PINVIT_HPP
#define PINVITKIT_PINVIT_HPP

#include <functional>
#include <optional>
#include <span>
#include <utility>

#include "pinvitkit/problems.hpp"

namespace pinvitkit {

/// mu(v) = <Av, v> / <Ev, v>; scale invariant.
double rayleigh_quotient(const LinearOperator& A, const LinearOperator& E,
                         const Vector& v);

/// r(v) = Av - mu(v) Ev; <r, v> = 0 in exact arithmetic.
Vector residual(const LinearOperator& A, const LinearOperator& E, const Vector& v);

/// rho(v) = ||Av - mu(v)Ev||_{A^{-1}} / ||v||_A; zero exactly at eigenvectors.
double residual_measure(const LinearOperator& A, const LinearOperator& E,
                        const Vector& v);

/// q(gamma, lambda_k, lambda_{k+1}) = 1 - (1-gamma)(1 - lambda_k/lambda_{k+1});
/// the per-step factor of the shifted-ratio contraction.
double convergence_factor(double gamma, double lambda_k, double lambda_k1);

/// Spectral context for the contraction bound attached to a step.
struct StepBoundInfo {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double gamma_p = 0.0;
  double gamma_xi = 0.0;  ///< perturbation budget relative to rho(v)
};

struct StepResult {
  Vector next;        ///< normalized in the H-norm, sign-fixed toward v
  double mu_next = 0.0;
  double rho_next = 0.0;
  /// Applicable contraction factor q^2; empty when mu(v) >= lambda2 or no
  /// spectral data was supplied (the caller should treat that as "restart").
  std::optional<double> bound_factor;
};

/**
 * \brief One preconditioned inverse iteration step
 *        v' = normalize_H(v - P^{-1}(Av - mu(v)Ev) + xi).
 *
 * When xi is given together with bound info, the perturbation budget
 * ||xi||_A <= gamma_xi * rho(v) * ||v||_A is enforced (BudgetError).
 */
StepResult pinvit_step(const LinearOperator& A, const LinearOperator& E,
                       const LinearOperator& P, const Vector& v,
                       const Vector* xi = nullptr,
                       const std::optional<StepBoundInfo>& bound = std::nullopt);

/// Convenience overload pulling operators and spectral metadata from the
/// problem; gamma_xi only matters when xi is present.
StepResult pinvit_step(const EigenProblem& problem, const Vector& v,
                       const Vector* xi = nullptr,
                       std::optional<double> gamma_xi = std::nullopt);

using OpFn = std::function<Vector(const Vector&)>;

/// Rayleigh quotient of the model operator: (Bx, x)_X / (x, x)_X.
double model_rayleigh(const OpFn& b_apply, const Vector& x,
                      const LinearOperator* x_metric = nullptr);

/// Model-case iteration x' = x + (1/mu(x)) T(Bx - mu(x)x) + eta on the space
/// X; x_metric supplies the X inner product (Euclidean when null).
Vector model_step(const OpFn& b_apply, const OpFn& t_apply, const Vector& x,
                  const Vector* eta = nullptr,
                  const LinearOperator* x_metric = nullptr);

/// Both sides of the Temple-Kato inequality
/// (mu_1 - mu(x))(mu(x) - mu_2) <= ||Bx - mu(x)x||_X^2 / ||x||_X^2.
std::pair<double, double> temple_kato_gap(const OpFn& b_apply, const Vector& x,
                                          double mu1, double mu2,
                                          const LinearOperator* x_metric = nullptr);

struct AngleBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Two-sided control of sin phi_A(v, E_1) by the residual measure:
/// lower = lambda_1/(3 mu) * rho, upper = min of the residual and the
/// Rayleigh-gap estimates, clamped to [0, 1].
AngleBounds angle_bounds(double mu, double lambda1, double lambda2, double rho);

/// sin of the A-angle between v and span(basis); the basis must be
/// A-orthonormal.
double sin_angle_to_eigenspace(const LinearOperator& A, const Vector& v,
                               std::span<const Vector> basis);

}  // namespace pinvitkit

#endif
