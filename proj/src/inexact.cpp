#include "pinvitkit/inexact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "pinvitkit/kernels.hpp"
#include "pinvitkit/rng.hpp"

namespace pinvitkit {

namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const DualMetric& metric_of(const LinearOperator& M) {
  static const DualMetric euclidean;
  return M.metric() ? *M.metric() : euclidean;
}

// Zero the smallest-contribution entries of w while the removed mass stays
// within the dual-norm budget. Ordering keys are w_i^2 / W_ii; for diagonal
// weights the keys are the exact per-entry contributions, otherwise the exact
// dual norm of the candidate error decides via bisection plus a final
// contract check.
void truncate_to_budget(Vector& w, double budget, const DualMetric& metric) {
  const std::size_t n = w.size();
  if (budget <= 0.0) return;

  const double* d = metric.diagonal_weight();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> key(n);
  for (std::size_t i = 0; i < n; ++i) key[i] = w[i] * w[i] / (d ? d[i] : 1.0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return key[a] != key[b] ? key[a] < key[b] : a < b;
  });

  std::size_t cut = 0;
  if (metric.is_diagonal()) {
    double acc = 0.0;
    while (cut < n) {
      const double next = acc + key[order[cut]];
      if (next > budget * budget) break;
      acc = next;
      ++cut;
    }
  } else {
    auto error_norm = [&](std::size_t count) {
      Vector err(n, 0.0);
      for (std::size_t k = 0; k < count; ++k) err[order[k]] = w[order[k]];
      return metric.dual_norm(err);
    };
    std::size_t lo = 0, hi = n;  // invariant: error_norm(lo) <= budget
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      if (error_norm(mid) <= budget)
        lo = mid;
      else
        hi = mid - 1;
    }
    cut = lo;
    // the prefix norm need not be monotone for general weights; back off
    // until the contract provably holds
    while (cut > 0 && error_norm(cut) > budget) --cut;
  }
  for (std::size_t k = 0; k < cut; ++k) w[order[k]] = 0.0;
}

Vector apply_approx_with_budget(const LinearOperator& M, const Vector& v, double budget) {
  Vector w = M.apply(v);
  truncate_to_budget(w, budget, metric_of(M));
  return w;
}

struct ApproxPair {
  Vector a_of_v;
  Vector e_of_v;
  double mu_eps = 0.0;
};

ApproxPair approx_pair(const LinearOperator& A, const LinearOperator& E,
                       const Vector& v, double eps) {
  ApproxPair out;
  out.a_of_v = apply_approx(A, v, eps);
  out.e_of_v = apply_approx(E, v, eps);
  const double den = inner(out.e_of_v, v);
  if (!(den > 0.0))
    throw BreakdownError(
        "perturbed Rayleigh quotient: <E_eps(v), v> <= 0 (approximation contract violated?)");
  out.mu_eps = inner(out.a_of_v, v) / den;
  return out;
}

void require_nonzero(const Vector& v, const char* what) {
  if (v.empty() || l2_norm(v) == 0.0)
    throw ConfigError(std::string(what) + ": zero vector");
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("config: tau must be > 0");
  if (!(constant_scale > 0.0 && constant_scale <= 1.0))
    throw ConfigError("config: constant_scale must lie in (0, 1]");
  if (max_outer_steps < 1 || max_halvings < 1)
    throw ConfigError("config: iteration caps must be >= 1");
  if (gamma_p >= 1.0) throw ConfigError("config: gamma_p must be < 1");
  if (gamma_p >= 0.0 && gamma_xi >= 0.0 && !(gamma_p + gamma_xi < 1.0))
    throw ConfigError("config: gamma_p + gamma_xi must be < 1");
}

DerivedConstants constants_for(const SpectralConstants& consts, const SolverConfig& config) {
  config.validate();
  consts.validate();
  DerivedConstants out;
  out.gamma_p = config.gamma_p >= 0.0 ? config.gamma_p : consts.gamma_p;
  out.gamma_xi = config.gamma_xi >= 0.0 ? config.gamma_xi : 0.5 * (1.0 - out.gamma_p);
  if (!(out.gamma_p + out.gamma_xi < 1.0))
    throw ConfigError("constants_for: gamma_p + gamma_xi must be < 1");

  if (!consts.lambda2)
    throw ConfigError("constants_for: an upper bound for lambda2 is required");
  const double lambda2 = *consts.lambda2;
  const double s = config.constant_scale;

  out.c0 = config.c0 > 0.0 ? config.c0 : std::min(0.5, consts.sigma0);
  if (out.c0 > std::min(0.5, consts.sigma0) * (1.0 + 1e-12))
    throw ConfigError("constants_for: c0 must not exceed min(1/2, sigma0)");

  const double c1_paper = 2.0 * (1.0 + 1.0 / consts.sigma0) * lambda2;
  const double c2_paper =
      (1.0 + consts.alpha * consts.alpha * (lambda2 + 1.5 * c1_paper)) /
      std::sqrt(consts.sigma0);
  out.c1 = config.c1 > 0.0 ? config.c1 : s * c1_paper;
  out.c2 = config.c2 > 0.0 ? config.c2 : s * c2_paper;
  out.c3 = config.c3 > 0.0
               ? config.c3
               : out.gamma_xi / ((1.0 - out.gamma_p) *
                                 (std::sqrt(1.0 + out.gamma_p) + out.gamma_xi) * out.c2);
  if (!(out.c0 > 0.0 && out.c1 > 0.0 && out.c2 > 0.0 && out.c3 > 0.0))
    throw ConfigError("constants_for: all constants must be positive");
  return out;
}

Vector apply_approx(const LinearOperator& M, const Vector& v, double eps) {
  if (!(eps >= 0.0)) throw ConfigError("apply_approx: eps must be >= 0");
  if (!M.has_approx_apply())
    throw CapabilityError("apply_approx: operator lacks approximate apply");
  require_nonzero(v, "apply_approx");
  Vector w = M.apply(v);
  if (eps == 0.0) return w;
  const DualMetric& metric = metric_of(M);
  truncate_to_budget(w, eps * metric.primal_norm(v), metric);
  return w;
}

double perturbed_rayleigh(const LinearOperator& A, const LinearOperator& E,
                          const Vector& v, double eps) {
  require_nonzero(v, "perturbed_rayleigh");
  return approx_pair(A, E, v, eps).mu_eps;
}

Vector approx_residual(const LinearOperator& A, const LinearOperator& E,
                       const Vector& v, double eps) {
  require_nonzero(v, "approx_residual");
  ApproxPair p = approx_pair(A, E, v, eps);
  Vector r = std::move(p.a_of_v);
  kernels::axpy(-p.mu_eps, p.e_of_v.data(), r.data(), r.size());
  return r;
}

double residual_estimator(const LinearOperator& P, const Vector& v, const Vector& r_eps) {
  require_nonzero(v, "residual_estimator");
  return norm_in_inverse(P, r_eps) / norm_in(P, v);
}

bool accuracy_test(double eps, double rho_eps, double c3) {
  if (!(eps >= 0.0 && rho_eps >= 0.0 && c3 >= 0.0))
    throw ConfigError("accuracy_test: inputs must be >= 0");
  return eps <= c3 * rho_eps;
}

SolveContext make_context(const EigenProblem& problem, const SolverConfig& config) {
  problem.validate();
  config.validate();

  EstimateOptions opts;
  opts.trials = 2;
  opts.estimate_eigenvalues =
      !problem.metadata.lambda2.has_value() && problem.A->has_inverse_apply();
  SolveContext ctx;
  ctx.constants = estimate_constants(*problem.A, *problem.E, *problem.P, opts);
  if (problem.metadata.gamma_p) ctx.constants.gamma_p = *problem.metadata.gamma_p;
  if (problem.metadata.lambda1) ctx.constants.lambda1 = problem.metadata.lambda1;
  if (problem.metadata.lambda2) ctx.constants.lambda2 = problem.metadata.lambda2;
  ctx.c = constants_for(ctx.constants, config);
  return ctx;
}

StepOutcome ppinvit_step(const EigenProblem& problem, const Vector& v,
                         const SolverConfig& config, const SolveContext& ctx) {
  require_nonzero(v, "ppinvit_step");
  require_finite(v, "ppinvit_step");
  require_same_dim(v.size(), problem.dim, "ppinvit_step");

  const LinearOperator& A = *problem.A;
  const LinearOperator& E = *problem.E;
  const LinearOperator& P = *problem.P;
  const double gamma_p = ctx.c.gamma_p;
  const double stop_weight = 1.0 / (1.0 - gamma_p);

  const double v_norm_p = norm_in(P, v);
  const DualMetric& a_metric = metric_of(A);
  // A's surrogate primal norm is the P-norm; reuse it across the halvings.
  const double a_budget_unit =
      a_metric.weight() == problem.P.get() ? v_norm_p : a_metric.primal_norm(v);

  double eps = config.epsilon_init > 0.0 ? std::min(config.epsilon_init, ctx.c.c0)
                                         : ctx.c.c0;
  int halvings = 0;
  for (;;) {
    Vector wa = apply_approx_with_budget(A, v, eps * a_budget_unit);
    Vector we = apply_approx(E, v, eps);
    const double den = inner(we, v);
    if (!(den > 0.0))
      throw BreakdownError("ppinvit_step: <E_eps(v), v> <= 0");
    const double mu_eps = inner(wa, v) / den;

    Vector r = std::move(wa);
    kernels::axpy(-mu_eps, we.data(), r.data(), r.size());
    const double rho_eps = norm_in_inverse(P, r) / v_norm_p;

    if (stop_weight * rho_eps + ctx.c.c2 * eps <= config.tau) {
      // target accuracy reached (reliable upper bound on rho)
      StepOutcome out;
      out.status = StepStatus::converged;
      out.vector = v;
      out.epsilon_final = eps;
      out.rho_eps_final = rho_eps;
      out.mu_eps_final = mu_eps;
      out.halvings = halvings;
      return out;
    }
    if (accuracy_test(eps, rho_eps, ctx.c.c3)) {
      // accuracy for the residual reached; take the step
      Vector vt(v);
      {
        const Vector w = P.apply_inverse(r);
        kernels::axpy(-1.0, w.data(), vt.data(), vt.size());
      }
      const double h_norm = norm_in(E, vt);
      if (h_norm < 1e-14 * norm_in(E, v))
        throw BreakdownError("ppinvit_step: update vanished (|v'|_H ~ 0)");
      kernels::scal(1.0 / h_norm, vt.data(), vt.size());
      if (inner(vt, v) < 0.0) kernels::scal(-1.0, vt.data(), vt.size());

      StepOutcome out;
      out.status = StepStatus::stepped;
      out.vector = std::move(vt);
      out.epsilon_final = eps;
      out.rho_eps_final = rho_eps;
      out.mu_eps_final = mu_eps;
      out.halvings = halvings;
      return out;
    }
    if (++halvings > config.max_halvings)
      throw ConvergenceError(
          "ppinvit_step: halving cap exceeded; constants are contradictory or an "
          "approximate apply violates its contract");
    eps *= 0.5;
  }
}

StepOutcome ppinvit_step(const EigenProblem& problem, const Vector& v,
                         const SolverConfig& config) {
  return ppinvit_step(problem, v, config, make_context(problem, config));
}

namespace {

Vector random_start(std::size_t n, Rng& rng) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

SolveResult solve(const EigenProblem& problem, const Vector& v0, const SolverConfig& config) {
  problem.validate();
  config.validate();
  require_nonzero(v0, "solve");
  require_same_dim(v0.size(), problem.dim, "solve");

  SolveResult result;
  result.context = make_context(problem, config);
  const SolveContext& ctx = result.context;

  const bool audit = config.audit && problem.A->has_inverse_apply();
  const bool can_bound = problem.metadata.lambda1 && problem.metadata.lambda2;

  Rng rng(config.seed);
  Vector v(v0);
  {
    const double h = norm_in(*problem.E, v);
    if (!(h > 0.0)) throw ConfigError("solve: starting vector has zero H-norm");
    kernels::scal(1.0 / h, v.data(), v.size());
  }
  // the analyzed regime needs mu(v0) < lambda2; with spectral metadata the
  // start is checked up front, otherwise the stall policy below catches it
  if (problem.metadata.lambda2) {
    constexpr int kMaxRestarts0 = 5;
    while (rayleigh_quotient(*problem.A, *problem.E, v) >=
           *problem.metadata.lambda2 * (1.0 - 1e-12)) {
      if (result.restarts >= kMaxRestarts0)
        throw ConfigError("solve: bad starting vector (mu(v0) >= lambda2) after restarts");
      ++result.restarts;
      v = random_start(problem.dim, rng);
      const double h = norm_in(*problem.E, v);
      kernels::scal(1.0 / h, v.data(), v.size());
    }
  }

  result.kappa_min = std::numeric_limits<double>::infinity();
  result.kappa_max = 0.0;

  constexpr int kStallWindow = 50;
  constexpr int kMaxRestarts = 5;
  double window_mu = std::numeric_limits<double>::infinity();
  int window_start = 0;

  for (int step = 0; step < config.max_outer_steps; ++step) {
    const double mu = rayleigh_quotient(*problem.A, *problem.E, v);
    const double rho_exact =
        audit ? residual_measure(*problem.A, *problem.E, v)
              : std::numeric_limits<double>::quiet_NaN();

    StepOutcome outcome = ppinvit_step(problem, v, config, ctx);

    if (audit) {
      const double kappa = outcome.epsilon_final / std::max(config.tau, rho_exact);
      result.kappa_min = std::min(result.kappa_min, kappa);
      result.kappa_max = std::max(result.kappa_max, kappa);
    }

    ConvergenceRecord rec;
    rec.step = step;
    rec.mu = mu;
    rec.mu_eps = outcome.mu_eps_final;
    rec.rho_eps = outcome.rho_eps_final;
    rec.epsilon = outcome.epsilon_final;
    rec.halvings = outcome.halvings;

    if (outcome.status == StepStatus::stepped && audit && can_bound) {
      const double l1 = *problem.metadata.lambda1;
      const double l2 = *problem.metadata.lambda2;
      if (mu > l1 && mu < l2) {
        const double mu_next =
            rayleigh_quotient(*problem.A, *problem.E, outcome.vector);
        const double q =
            convergence_factor(0.5 * (1.0 + ctx.c.gamma_p), l1, l2);
        const double before = (mu - l1) / (l2 - mu);
        const double after =
            mu_next < l2 ? (mu_next - l1) / (l2 - mu_next)
                         : std::numeric_limits<double>::infinity();
        rec.bound_ok = after <= q * q * before + 1e-10;
      }
    }
    result.log.push_back(rec);

    if (outcome.status == StepStatus::converged) {
      result.mu = mu;
      result.v = v;
      if (audit) result.final_rho = rho_exact;
      return result;
    }

    v = std::move(outcome.vector);

    // stagnation across a window suggests mu(v0) >= lambda2: restart
    if (step - window_start >= kStallWindow) {
      const bool stalled = window_mu - mu <= 1e-14 * std::abs(mu);
      window_start = step;
      window_mu = mu;
      if (stalled) {
        if (result.restarts >= kMaxRestarts)
          throw ConvergenceError("solve: stalled after restarts; bad starting vector detected");
        ++result.restarts;
        v = random_start(problem.dim, rng);
        const double h = norm_in(*problem.E, v);
        kernels::scal(1.0 / h, v.data(), v.size());
        window_mu = std::numeric_limits<double>::infinity();
      }
    }
  }
  throw ConvergenceError("solve: outer iteration cap exceeded");
}

SolveResult solve(const EigenProblem& problem, const SolverConfig& config) {
  Rng rng(config.seed ^ 0x517eULL);
  Vector v0 = random_start(problem.dim, rng);
  return solve(problem, v0, config);
}

std::string records_to_csv(const std::vector<ConvergenceRecord>& records) {
  std::string out = "step,mu,mu_eps,rho_eps,epsilon,halvings,bound_ok\n";
  for (const auto& r : records) {
    out += std::to_string(r.step);
    out += ',';
    out += fmt17(r.mu);
    out += ',';
    out += fmt17(r.mu_eps);
    out += ',';
    out += fmt17(r.rho_eps);
    out += ',';
    out += fmt17(r.epsilon);
    out += ',';
    out += std::to_string(r.halvings);
    out += ',';
    out += r.bound_ok ? (*r.bound_ok ? "true" : "false") : "na";
    out += '\n';
  }
  return out;
}

std::string records_to_json(const std::vector<ConvergenceRecord>& records,
                            const EigenProblem& problem, const SolverConfig& config,
                            const SolveContext& ctx) {
  nlohmann::json j;
  j["problem"] = problem.metadata.id;
  j["seed"] = config.seed;
  j["config"] = {{"tau", config.tau},
                 {"constant_scale", config.constant_scale},
                 {"max_outer_steps", config.max_outer_steps},
                 {"max_halvings", config.max_halvings},
                 {"epsilon_init", config.epsilon_init},
                 {"audit", config.audit}};
  j["constants"] = {{"c0", ctx.c.c0},
                    {"c1", ctx.c.c1},
                    {"c2", ctx.c.c2},
                    {"c3", ctx.c.c3},
                    {"gamma_p", ctx.c.gamma_p},
                    {"gamma_xi", ctx.c.gamma_xi},
                    {"sigma0", ctx.constants.sigma0},
                    {"sigma1", ctx.constants.sigma1},
                    {"alpha", ctx.constants.alpha}};
  if (ctx.constants.lambda1) j["constants"]["lambda1"] = *ctx.constants.lambda1;
  if (ctx.constants.lambda2) j["constants"]["lambda2"] = *ctx.constants.lambda2;
  auto& rows = j["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json row = {{"step", r.step},         {"mu", r.mu},
                          {"mu_eps", r.mu_eps},     {"rho_eps", r.rho_eps},
                          {"epsilon", r.epsilon},   {"halvings", r.halvings}};
    if (r.bound_ok)
      row["bound_ok"] = *r.bound_ok;
    else
      row["bound_ok"] = "na";
    rows.push_back(std::move(row));
  }
  return j.dump(2);
}

}  // namespace pinvitkit
