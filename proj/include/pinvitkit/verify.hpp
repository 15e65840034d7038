#ifndef PINVITKIT_VERIFY_HPP
#define PINVITKIT_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pinvitkit/oracle.hpp"
#include "pinvitkit/problems.hpp"
#include "pinvitkit/rng.hpp"

namespace pinvitkit::verify {

// Randomized property suites checking the solver's guarantees against the
// brute-force oracle: the shifted-ratio contraction (exact and at the
// perturbation-budget boundary), the residual/angle sandwich, Temple-Kato,
// the model-case/preconditioned-iteration equivalence, and the four
// approximate-application inequalities with their constants at scale 1.

struct SuiteResult {
  std::string name;
  int trials = 0;
  int checked = 0;   ///< individual inequalities evaluated
  int failures = 0;
  double worst_margin = 0.0;  ///< max of (measured - allowed); <= 0 passes
  std::string details;
  std::string counterexample;  ///< JSON replay data for the first failure
  bool pass() const { return failures == 0; }
};

struct HarnessOptions {
  int min_dim = 3;
  int max_dim = 50;
  double gamma_max = 0.9;
  double slack = 1e-10;
  /// Scales the injected approximation error relative to its contract;
  /// > 1 deliberately violates it (harness self-test).
  double violation_factor = 1.0;
};

/// Dense SPD pencil with prescribed leading eigenvalues, a randomized
/// optimally scaled preconditioner, and exact spectral data from the oracle.
struct RandomPencil {
  EigenProblem problem;
  oracle::DenseMatrix a, e, p;
  oracle::SpectrumReport spectrum;
  double lambda1 = 0.0, lambda2 = 0.0;
  double gamma_exact = 0.0;
  double sigma0 = 0.0, sigma1 = 0.0;  ///< extremes of (A, P)
  double alpha = 0.0;                 ///< sqrt of the largest eigenvalue of (E, P)
};

RandomPencil make_random_pencil(Rng& rng, const HarnessOptions& options,
                                bool precond_is_a, bool need_alpha);

/// Start vector with Rayleigh quotient strictly inside (lambda1, lambda2).
Vector bracketed_start(Rng& rng, const RandomPencil& pencil);

/// Contract-saturating approximate apply: the exact product plus an error of
/// dual norm exactly violation_factor * eps * ||v|| in a random direction.
Vector saturating_apply(const LinearOperator& M, const Vector& v, double eps,
                        Rng& rng, double violation_factor = 1.0);

SuiteResult check_thm33_exact(std::uint64_t seed, int trials,
                              const HarnessOptions& options = {});
SuiteResult check_thm33_perturbed(std::uint64_t seed, int trials,
                                  const HarnessOptions& options = {});
SuiteResult check_thm34_sandwich(std::uint64_t seed, int trials,
                                 const HarnessOptions& options = {});
SuiteResult check_temple_kato(std::uint64_t seed, int trials,
                              const HarnessOptions& options = {});
SuiteResult check_model_equivalence(std::uint64_t seed, int trials,
                                    const HarnessOptions& options = {});
/// Lemma suites 4.4-4.7 (same randomized draws, constants at scale 1).
std::vector<SuiteResult> check_lemmas(std::uint64_t seed, int trials,
                                      const HarnessOptions& options = {});

std::vector<SuiteResult> run_all(std::uint64_t seed, int trials,
                                 const HarnessOptions& options = {});

std::string render_report(const std::vector<SuiteResult>& results,
                          std::uint64_t seed, int trials);

}  // namespace pinvitkit::verify

#endif
