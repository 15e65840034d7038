#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pinvitkit/inexact.hpp"
#include "pinvitkit/oracle.hpp"
#include "pinvitkit/rng.hpp"
#include "pinvitkit/verify.hpp"

using namespace pinvitkit;

namespace {

EigenProblem diag_problem(Vector a_diag, std::optional<double> l1 = {},
                          std::optional<double> l2 = {}) {
  const std::size_t n = a_diag.size();
  auto a = std::make_shared<DiagonalOperator>(std::move(a_diag), OperatorKind::stiffness);
  auto e = std::make_shared<IdentityOperator>(n);
  auto p = std::make_shared<DiagonalOperator>(Vector(a->entries()), OperatorKind::preconditioner);
  ProblemMetadata meta;
  meta.id = "diag";
  meta.lambda1 = l1;
  meta.lambda2 = l2;
  meta.gamma_p = 0.0;
  return wrap_problem(a, e, p, meta);
}

SpectralConstants worked_constants() {
  SpectralConstants c;
  c.sigma0 = 1.0;
  c.sigma1 = 1.0;
  c.alpha = 1.0;
  c.gamma_p = 0.0;
  c.lambda1 = 1.0;
  c.lambda2 = 2.0;
  return c;
}

}  // namespace

TEST_CASE("constants_for: worked example") {
  SolverConfig config;
  config.gamma_p = 0.0;
  config.gamma_xi = 0.5;
  const DerivedConstants c = constants_for(worked_constants(), config);
  CHECK(c.c0 == 0.5);
  CHECK(c.c1 == 8.0);
  CHECK(c.c2 == 15.0);
  CHECK(c.c3 == doctest::Approx(1.0 / 45.0).epsilon(1e-15));
}

TEST_CASE("constants_for: limits, scaling, validation") {
  // gamma_p -> 1 drives c3 -> 0
  {
    SpectralConstants sc = worked_constants();
    sc.gamma_p = 0.999;
    SolverConfig config;
    const DerivedConstants c = constants_for(sc, config);
    CHECK(c.c3 < 1e-5);
    CHECK(c.gamma_xi == doctest::Approx(0.0005));
  }
  // constant_scale shrinks c1/c2 and grows c3
  {
    SolverConfig config;
    config.gamma_p = 0.0;
    config.gamma_xi = 0.5;
    const DerivedConstants full = constants_for(worked_constants(), config);
    config.constant_scale = 0.5;
    const DerivedConstants half = constants_for(worked_constants(), config);
    CHECK(half.c1 == doctest::Approx(full.c1 / 2.0));
    CHECK(half.c2 == doctest::Approx(full.c2 / 2.0));
    CHECK(half.c3 == doctest::Approx(full.c3 * 2.0));
    CHECK(half.c0 == full.c0);
  }
  // randomized sweep: all outputs positive and finite
  {
    Rng rng(31);
    for (int t = 0; t < 200; ++t) {
      SpectralConstants sc;
      sc.sigma0 = rng.uniform(0.05, 1.0);
      sc.sigma1 = sc.sigma0 + rng.uniform(0.0, 2.0);
      sc.alpha = rng.uniform(0.1, 3.0);
      sc.gamma_p = rng.uniform(0.0, 0.95);
      sc.lambda1 = 1.0;
      sc.lambda2 = rng.uniform(1.1, 20.0);
      SolverConfig config;
      const DerivedConstants c = constants_for(sc, config);
      for (double x : {c.c0, c.c1, c.c2, c.c3}) {
        CHECK(x > 0.0);
        CHECK(std::isfinite(x));
      }
    }
  }
  // missing lambda2 is an error
  {
    SpectralConstants sc = worked_constants();
    sc.lambda2.reset();
    SolverConfig config;
    CHECK_THROWS_AS((void)constants_for(sc, config), ConfigError);
  }
  // c0 cap
  {
    SolverConfig config;
    config.c0 = 0.75;
    CHECK_THROWS_AS((void)constants_for(worked_constants(), config), ConfigError);
  }
}

TEST_CASE("apply_approx") {
  const EigenProblem p = fd_laplacian({GridSpec::Domain::interval, 1.0 / 16});
  Rng rng(5);
  Vector v(p.dim);
  rng.fill_normal(v);

  // eps = 0: exact product
  const Vector exact = p.A->apply(v);
  CHECK(apply_approx(*p.A, v, 0.0) == exact);

  // the contract holds in the surrogate metric, deterministically
  const DualMetric& metric = *p.A->metric();
  for (double eps : {1e-4, 1e-2, 0.1, 0.4}) {
    const Vector w1 = apply_approx(*p.A, v, eps);
    const Vector w2 = apply_approx(*p.A, v, eps);
    CHECK(w1 == w2);
    Vector err(w1);
    axpy(-1.0, exact, err);
    CHECK(metric.dual_norm(err) <= eps * metric.primal_norm(v) * (1.0 + 1e-12));
  }

  // a budget at least the whole product admits the zero vector
  {
    Vector av = p.A->apply(v);
    const double total = metric.dual_norm(av);
    const double eps_all = total / metric.primal_norm(v) * (1.0 + 1e-12);
    const Vector w = apply_approx(*p.A, v, eps_all);
    CHECK(l2_norm(w) == 0.0);
  }

  // truncation with a non-diagonal weight (dense P) also meets its contract
  {
    const EigenProblem q = dense_problem(3, {4, 1, 0, 1, 3, 1, 0, 1, 2},
                                         {1, 0, 0, 0, 1, 0, 0, 0, 1},
                                         {4, 1, 0, 1, 3, 1, 0, 1, 2});
    Vector u{0.3, -1.2, 0.9};
    const DualMetric& qm = *q.A->metric();
    for (double eps : {1e-3, 0.05, 0.3}) {
      Vector w = apply_approx(*q.A, u, eps);
      Vector err(w);
      axpy(-1.0, q.A->apply(u), err);
      CHECK(qm.dual_norm(err) <= eps * qm.primal_norm(u) * (1.0 + 1e-12));
    }
  }

  CHECK_THROWS_AS((void)apply_approx(*p.A, v, -1.0), ConfigError);
}

TEST_CASE("perturbed_rayleigh and approx_residual") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0}, 1.0, 2.0);
  const Vector ev{1.0, 0.0, 0.0};
  CHECK(perturbed_rayleigh(*p.A, *p.E, ev, 0.0) == 1.0);
  CHECK(l2_norm(approx_residual(*p.A, *p.E, ev, 0.0)) == 0.0);

  const Vector v{1.0, 1.0, 1.0};
  CHECK(perturbed_rayleigh(*p.A, *p.E, v, 0.0) == doctest::Approx(2.0));
  const Vector r0 = approx_residual(*p.A, *p.E, v, 0.0);
  const Vector rr = residual(*p.A, *p.E, v);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r0[i] == rr[i]);
}

TEST_CASE("residual_estimator") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0});
  const Vector v{1.0, 1.0, 1.0};
  CHECK(residual_estimator(*p.P, v, {0.0, 0.0, 0.0}) == 0.0);

  // P = A and eps = 0: the estimator equals rho exactly
  const Vector r = residual(*p.A, *p.E, v);
  const double rho_eps = residual_estimator(*p.A, v, r);
  const double rho = residual_measure(*p.A, *p.E, v);
  CHECK(rho_eps == doctest::Approx(rho).epsilon(1e-12));
}

TEST_CASE("accuracy_test") {
  CHECK(accuracy_test(0.0, 0.0, 1.0));
  CHECK(accuracy_test(0.0, 5.0, 1.0));
  CHECK_FALSE(accuracy_test(0.1, 0.0, 1.0));
  CHECK(accuracy_test(0.25, 0.5, 0.5));  // boundary is inclusive
  CHECK_FALSE(accuracy_test(0.26, 0.5, 0.5));
  CHECK_THROWS_AS((void)accuracy_test(-1.0, 0.0, 1.0), ConfigError);
}

TEST_CASE("ppinvit_step: eigenvector converges within a few halvings") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0}, 1.0, 2.0);
  SolverConfig config;
  config.tau = 1e-6;
  const Vector ev{1.0, 0.0, 0.0};
  const StepOutcome out = ppinvit_step(p, ev, config);
  CHECK(out.status == StepStatus::converged);
  CHECK(out.halvings <= 60);
  CHECK(out.rho_eps_final <= config.tau);
}

TEST_CASE("ppinvit_step: with ample accuracy the step equals the exact one") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0}, 1.0, 2.0);
  SolverConfig config;
  config.tau = 1e-12;
  config.epsilon_init = 1e-13;  // truncation cannot drop anything at this budget
  const Vector v{1.0, 0.7, 0.4};

  const StepOutcome out = ppinvit_step(p, v, config);
  REQUIRE(out.status == StepStatus::stepped);
  const StepResult exact = pinvit_step(p, v);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(out.vector[i] == doctest::Approx(exact.next[i]).epsilon(1e-13));
}

TEST_CASE("solve: eigenvector start returns immediately") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0}, 1.0, 2.0);
  SolverConfig config;
  config.tau = 1e-8;
  const SolveResult res = solve(p, {1.0, 0.0, 0.0}, config);
  CHECK(res.log.size() == 1);
  CHECK(res.mu == doctest::Approx(1.0).epsilon(1e-14));
  REQUIRE(res.final_rho.has_value());
  CHECK(*res.final_rho <= config.tau);
}

TEST_CASE("solve: diag(1,2,3) with Jacobi converges and logs audits") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0}, 1.0, 2.0);
  SolverConfig config;
  config.tau = 1e-8;
  const double s = 1.0 / std::sqrt(3.0);
  const SolveResult res = solve(p, {s, s, s}, config);
  CHECK(res.mu == doctest::Approx(1.0).epsilon(1e-10));
  REQUIRE(res.final_rho.has_value());
  CHECK(*res.final_rho <= config.tau);
  CHECK(res.kappa_min > 0.0);
  int audited = 0;
  for (const auto& rec : res.log)
    if (rec.bound_ok) {
      ++audited;
      CHECK(*rec.bound_ok);
    }
  CHECK(audited > 0);
}

TEST_CASE("solve: restart on a start vector at lambda2") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0}, 1.0, 2.0);
  SolverConfig config;
  config.tau = 1e-8;
  config.seed = 7;
  // mu(v0) = lambda_2 exactly; with metadata present this is redrawn
  const SolveResult res = solve(p, {0.0, 1.0, 0.0}, config);
  CHECK(res.mu == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(res.restarts >= 1);
}

TEST_CASE("solve: 1D FD with a multilevel preconditioner hits the closed form") {
  EigenProblem p = fd_laplacian({GridSpec::Domain::interval, 1.0 / 16});
  p = with_preconditioner(p, multilevel_preconditioner({GridSpec::Domain::interval, 1.0 / 16}));
  SolverConfig config;
  config.tau = 1e-8;
  config.seed = 3;
  const SolveResult res = solve(p, config);
  CHECK(res.mu == doctest::Approx(*p.metadata.lambda1).epsilon(1e-8));
  REQUIRE(res.final_rho.has_value());
  CHECK(*res.final_rho <= config.tau);
  CHECK(res.kappa_min > 0.0);
}

TEST_CASE("solve: determinism of logs") {
  const EigenProblem p = diag_problem({1.0, 2.0, 3.0, 7.0}, 1.0, 2.0);
  SolverConfig config;
  config.tau = 1e-9;
  config.seed = 42;
  const SolveResult r1 = solve(p, config);
  const SolveResult r2 = solve(p, config);
  CHECK(records_to_csv(r1.log) == records_to_csv(r2.log));
}

TEST_CASE("records_to_csv format") {
  std::vector<ConvergenceRecord> recs(2);
  recs[0] = {0, 1.5, 1.5, 0.25, 0.5, 2, true};
  recs[1] = {1, 1.25, 1.2500000000000002, 0.125, 0.25, 0, std::nullopt};
  const std::string csv = records_to_csv(recs);
  CHECK(csv ==
        "step,mu,mu_eps,rho_eps,epsilon,halvings,bound_ok\n"
        "0,1.5,1.5,0.25,0.5,2,true\n"
        "1,1.25,1.2500000000000002,0.125,0.25,0,na\n");
}

TEST_CASE("lemma suites on a small randomized batch") {
  const auto suites = verify::check_lemmas(2024, 40);
  for (const auto& s : suites) {
    INFO(s.name, " worst=", s.worst_margin, " cex=", s.counterexample.substr(0, 200));
    CHECK(s.failures == 0);
  }
}

TEST_CASE("contract violation is detected by the lemma-4.5 suite") {
  verify::HarnessOptions opts;
  opts.violation_factor = 2.0;
  const auto suites = verify::check_lemmas(77, 10, opts);
  const auto& l45 = suites[1];
  CHECK(l45.failures > 0);
  CHECK_FALSE(l45.counterexample.empty());
}
