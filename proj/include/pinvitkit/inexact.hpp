#ifndef PINVITKIT_INEXACT_HPP
#define PINVITKIT_INEXACT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pinvitkit/pinvit.hpp"
#include "pinvitkit/problems.hpp"

namespace pinvitkit {

struct SolverConfig {
  double tau = 1e-8;            ///< target residual accuracy
  double gamma_p = -1.0;        ///< < 0: take the measured value from the problem
  double gamma_xi = -1.0;       ///< < 0: fix (1 - gamma_p)/2
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;  ///< 0: derive from constants
  double constant_scale = 1.0;  ///< relaxation knob; verification always runs at 1
  int max_outer_steps = 10000;
  int max_halvings = 200;
  double epsilon_init = 0.0;    ///< 0: start at c0
  std::uint64_t seed = 0;
  bool audit = true;            ///< exact per-step bookkeeping (mu, rho, bound checks)

  void validate() const;
};

struct DerivedConstants {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double gamma_p = 0.0, gamma_xi = 0.0;
};

/// The accuracy-tracking constants: c0 = min(1/2, sigma0),
/// c1 = 2(1 + 1/sigma0) lambda2, c2 = sigma0^{-1/2}(1 + alpha^2(lambda2 +
/// 3/2 c1)), c3 = gamma_xi / ((1 - gamma_p)((1 + gamma_p)^{1/2} +
/// gamma_xi) c2). constant_scale < 1 shrinks c1/c2 and thereby weakens the
/// derived tests; explicit overrides in the config win.
DerivedConstants constants_for(const SpectralConstants& consts, const SolverConfig& config);

/// Approximate operator application: exact product, then deterministic
/// truncation. Entries are zeroed smallest-contribution-first (ties to the
/// lowest index) while the error stays within eps times the input norm, both
/// measured in the operator's dual-norm surrogate.
Vector apply_approx(const LinearOperator& M, const Vector& v, double eps);

/// mu_eps(v) = <A_eps(v), v> / <E_eps(v), v>.
double perturbed_rayleigh(const LinearOperator& A, const LinearOperator& E,
                          const Vector& v, double eps);

/// r_eps(v) = A_eps(v) - mu_eps(v) E_eps(v), with both approximate products
/// evaluated once.
Vector approx_residual(const LinearOperator& A, const LinearOperator& E,
                       const Vector& v, double eps);

/// rho_eps(v) = ||r_eps||_{P^{-1}} / ||v||_P.
double residual_estimator(const LinearOperator& P, const Vector& v,
                          const Vector& r_eps);

/// The accuracy test eps <= c3 * rho_eps (inclusive).
bool accuracy_test(double eps, double rho_eps, double c3);

enum class StepStatus { converged, stepped };

struct StepOutcome {
  StepStatus status = StepStatus::converged;
  Vector vector;              ///< converged: the input v; stepped: the new iterand
  double epsilon_final = 0.0;
  double rho_eps_final = 0.0;
  double mu_eps_final = 0.0;
  int halvings = 0;
};

struct ConvergenceRecord {
  int step = 0;
  double mu = 0.0;
  double mu_eps = 0.0;
  double rho_eps = 0.0;
  double epsilon = 0.0;
  int halvings = 0;
  std::optional<bool> bound_ok;  ///< empty: no spectral data to audit against
};

/// Context precomputed once per (problem, config) pair.
struct SolveContext {
  SpectralConstants constants;
  DerivedConstants c;
};

SolveContext make_context(const EigenProblem& problem, const SolverConfig& config);

/**
 * \brief One inexact iteration of the eps-halving driver.
 *
 * Starting from eps = c0, halve until either the stopping test
 * (1-gamma_p)^{-1} rho_eps + c2 eps <= tau fires (converged) or the accuracy
 * test eps <= c3 rho_eps admits a step v' = v - P^{-1} r_eps (stepped, with
 * v' normalized in the H-norm and sign-fixed).
 */
StepOutcome ppinvit_step(const EigenProblem& problem, const Vector& v,
                         const SolverConfig& config, const SolveContext& ctx);
StepOutcome ppinvit_step(const EigenProblem& problem, const Vector& v,
                         const SolverConfig& config);

struct SolveResult {
  double mu = 0.0;
  Vector v;
  std::vector<ConvergenceRecord> log;
  /// Exact residual measure of the final iterand (when A supports solves).
  std::optional<double> final_rho;
  /// Floor bookkeeping for the exit accuracy: min/max over outer steps of
  /// epsilon_final / max(tau, rho(v)).
  double kappa_min = 0.0;
  double kappa_max = 0.0;
  int restarts = 0;
  SolveContext context;
};

SolveResult solve(const EigenProblem& problem, const Vector& v0,
                  const SolverConfig& config);
/// Seeded uniform random start.
SolveResult solve(const EigenProblem& problem, const SolverConfig& config);

std::string records_to_csv(const std::vector<ConvergenceRecord>& records);
std::string records_to_json(const std::vector<ConvergenceRecord>& records,
                            const EigenProblem& problem, const SolverConfig& config,
                            const SolveContext& ctx);

}  // namespace pinvitkit

#endif
