#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pinvitkit/pinvit.hpp"
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

}  // namespace

TEST_CASE("rayleigh_quotient") {
  DiagonalOperator a({1.0, 3.0});
  IdentityOperator e(2);
  CHECK(rayleigh_quotient(a, e, {1.0, 0.0}) == 1.0);
  CHECK(rayleigh_quotient(a, e, {1.0, 1.0}) == 2.0);
  CHECK(rayleigh_quotient(a, e, {2.0, 0.0}) == 1.0);  // scale invariance
  CHECK_THROWS_AS((void)rayleigh_quotient(a, e, {0.0, 0.0}), ConfigError);
}

TEST_CASE("residual") {
  DiagonalOperator a({1.0, 3.0});
  IdentityOperator e(2);
  CHECK(l2_norm(residual(a, e, {1.0, 0.0})) == 0.0);
  const Vector r = residual(a, e, {1.0, 1.0});
  CHECK(r[0] == -1.0);
  CHECK(r[1] == 1.0);

  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    Vector v(2);
    rng.fill_normal(v);
    if (l2_norm(v) == 0.0) continue;
    const Vector rr = residual(a, e, v);
    CHECK(std::abs(inner(rr, v)) <= 1e-13 * l2_norm(rr) * l2_norm(v) + 1e-15);
  }
}

TEST_CASE("residual_measure") {
  DiagonalOperator a({1.0, 3.0});
  IdentityOperator e(2);
  CHECK(residual_measure(a, e, {1.0, 0.0}) <= 1e-14);
  CHECK(residual_measure(a, e, {1.0, 1.0}) ==
        doctest::Approx(0.57735026918962584).epsilon(1e-14));
  CHECK(residual_measure(a, e, {5.0, 5.0}) ==
        doctest::Approx(residual_measure(a, e, {1.0, 1.0})).epsilon(1e-13));
}

TEST_CASE("convergence_factor") {
  CHECK(convergence_factor(0.0, 1.0, 2.0) == 0.5);
  CHECK(convergence_factor(0.5, 1.0, 4.0) == 0.625);
  CHECK(convergence_factor(1.0 - 1e-12, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK_THROWS_AS((void)convergence_factor(1.0, 1.0, 2.0), ConfigError);
  CHECK_THROWS_AS((void)convergence_factor(0.5, 2.0, 1.0), ConfigError);
}

TEST_CASE("pinvit_step: fixed point at an eigenvector") {
  const EigenProblem p = diag_problem({1.0, 2.0, 5.0}, 1.0, 2.0);
  const Vector v{1.0, 0.0, 0.0};
  const StepResult sr = pinvit_step(p, v);
  CHECK(sr.mu_next == doctest::Approx(1.0).epsilon(1e-14));
  Vector basis{1.0, 0.0, 0.0};  // already A-orthonormal for A with a_11 = 1
  CHECK(sin_angle_to_eigenspace(*p.A, sr.next, std::span<const Vector>(&basis, 1)) <= 1e-10);
  CHECK(sr.rho_next <= 1e-12);
}

TEST_CASE("pinvit_step: the P = A equality case") {
  const EigenProblem p = diag_problem({1.0, 2.0}, 1.0, 2.0);
  const double s = 1.0 / std::sqrt(2.0);
  const Vector v{s, s};
  const StepResult sr = pinvit_step(p, v);

  // next is proportional to (2, 1), H-normalized
  CHECK(sr.next[0] == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-13));
  CHECK(sr.next[1] == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-13));
  CHECK(sr.mu_next == doctest::Approx(1.2).epsilon(1e-14));

  REQUIRE(sr.bound_factor.has_value());
  CHECK(*sr.bound_factor == doctest::Approx(0.25).epsilon(1e-15));
  const double ratio_before = (1.5 - 1.0) / (2.0 - 1.5);
  const double ratio_after = (sr.mu_next - 1.0) / (2.0 - sr.mu_next);
  CHECK(ratio_after == doctest::Approx(*sr.bound_factor * ratio_before).epsilon(1e-12));

  // explicit zero perturbation changes nothing
  const Vector zero{0.0, 0.0};
  const StepResult sr0 = pinvit_step(p, &v != nullptr ? v : v, &zero, 0.5);
  CHECK(sr0.next[0] == sr.next[0]);
  CHECK(sr0.next[1] == sr.next[1]);
}

TEST_CASE("pinvit_step: perturbation budget enforcement") {
  const EigenProblem p = diag_problem({1.0, 2.0}, 1.0, 2.0);
  const Vector v{1.0, 1.0};
  const Vector huge{100.0, -100.0};
  CHECK_THROWS_AS((void)pinvit_step(p, v, &huge, 0.25), BudgetError);
}

TEST_CASE("pinvit_step: breakdown on a vanishing update") {
  const EigenProblem p = diag_problem({1.0, 2.0});
  const Vector v{1.0, 1.0};
  // xi cancels the unperturbed update exactly
  const Vector r = residual(*p.A, *p.E, v);
  Vector xi = p.P->apply_inverse(r);
  axpy(-1.0, v, xi);  // xi = P^{-1}r - v, so v - P^{-1}r + xi = 0
  CHECK_THROWS_AS((void)pinvit_step(*p.A, *p.E, *p.P, v, &xi), BreakdownError);
}

TEST_CASE("pinvit_step: invalid bound factor outside the bracket") {
  const EigenProblem p = diag_problem({1.0, 2.0, 5.0}, 1.0, 2.0);
  const Vector v{0.0, 0.1, 1.0};  // mu(v) > lambda2
  const StepResult sr = pinvit_step(p, v);
  CHECK_FALSE(sr.bound_factor.has_value());
}

TEST_CASE("model_step: fixed point and power-method reduction") {
  const OpFn b = [](const Vector& x) {
    Vector y(x);
    y[0] *= 1.0;
    y[1] *= 0.5;
    y[2] *= 0.25;
    return y;
  };
  const OpFn t_id = [](const Vector& x) { return x; };

  const Vector ev{1.0, 0.0, 0.0};
  const Vector fixed = model_step(b, t_id, ev);
  CHECK(fixed[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(fixed[1] == 0.0);

  const Vector x{1.0, 1.0, 0.0};
  const Vector xp = model_step(b, t_id, x);
  const double mu = model_rayleigh(b, x);
  const Vector bx = b(x);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(xp[i] == doctest::Approx(bx[i] / mu).epsilon(1e-14));
}

TEST_CASE("temple_kato_gap: worked example") {
  const OpFn b = [](const Vector& x) {
    return Vector{x[0], x[1] / 2.0, x[2] / 3.0};
  };
  const double s = 1.0 / std::sqrt(2.0);
  const auto [lhs, rhs] = temple_kato_gap(b, {s, s, 0.0}, 1.0, 0.5);
  CHECK(lhs == doctest::Approx(1.0 / 16.0).epsilon(1e-14));
  CHECK(rhs == doctest::Approx(1.0 / 16.0).epsilon(1e-14));
  CHECK(lhs <= rhs + 1e-15);
  CHECK_THROWS_AS((void)temple_kato_gap(b, Vector{1.0, 0.0, 0.0}, 0.5, 1.0), ConfigError);
}

TEST_CASE("model-case contraction bound (finite-dimensional probe)") {
  Rng rng(21);
  int violations = 0;
  for (int t = 0; t < 300; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(3, 20));
    Vector d(n);
    d[0] = 1.0;
    d[1] = rng.uniform(0.3, 0.8);
    for (std::size_t i = 2; i < n; ++i) d[i] = rng.uniform(0.01, d[1] * 0.95);
    std::sort(d.begin(), d.end(), std::greater<>());
    const double mu1 = d[0], mu2 = d[1];

    const double gamma_t = rng.uniform(0.0, 0.9);
    Vector s(n);
    for (double& x : s) x = rng.uniform(-1.0, 1.0);
    const OpFn b = [&d](const Vector& x) {
      Vector y(x);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= d[i];
      return y;
    };
    const OpFn t_op = [&s, gamma_t](const Vector& x) {
      Vector y(x);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= 1.0 - gamma_t * s[i];
      return y;
    };

    Vector x(n, 0.0);
    x[0] = 1.0;
    Vector z(n);
    rng.fill_normal(z);
    axpy(rng.uniform(0.05, 0.8) / l2_norm(z), z, x);
    const double mu = model_rayleigh(b, x);
    if (!(mu > mu2 && mu <= mu1)) continue;

    const Vector xp = model_step(b, t_op, x);
    const double mup = model_rayleigh(b, xp);
    if (!(mup > mu2)) continue;  // left the analyzed bracket from below
    const double sigma = 1.0 - (1.0 - gamma_t) * (mu1 - mu2) / mu1;
    const double lhs = (mu1 - mup) / (mup - mu2);
    const double rhs = sigma * sigma * (mu1 - mu) / (mu - mu2);
    if (lhs > rhs + 1e-10) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("angle_bounds") {
  const AngleBounds z = angle_bounds(1.0, 1.0, 2.0, 0.0);
  CHECK(z.lower == 0.0);
  CHECK(z.upper == 0.0);

  const AngleBounds b = angle_bounds(1.5, 1.0, 2.0, 0.3);
  CHECK(b.lower == doctest::Approx(0.3 / 4.5).epsilon(1e-15));
  CHECK(b.upper == 1.0);

  CHECK_THROWS_AS((void)angle_bounds(2.5, 1.0, 2.0, 0.1), ConfigError);
  CHECK_THROWS_AS((void)angle_bounds(1.5, 1.0, 2.0, -0.1), ConfigError);
}

TEST_CASE("sin_angle_to_eigenspace") {
  DiagonalOperator a({1.0, 4.0, 9.0}, OperatorKind::stiffness);
  // A-orthonormal basis vectors: e_i / sqrt(a_ii)
  const Vector b1{1.0, 0.0, 0.0};
  const Vector b2{0.0, 0.5, 0.0};
  const Vector basis[] = {b1, b2};

  CHECK(sin_angle_to_eigenspace(a, {2.0, 3.0, 0.0}, basis) <= 1e-14);
  CHECK(sin_angle_to_eigenspace(a, {0.0, 0.0, 1.0}, basis) == doctest::Approx(1.0));

  // against an explicit Gram-based computation on a dense 3x3 case
  Rng rng(17);
  Vector v(3);
  rng.fill_normal(v);
  const double proj1 = operator_inner(a, v, b1);
  const double proj2 = operator_inner(a, v, b2);
  Vector defect(v);
  axpy(-proj1, b1, defect);
  axpy(-proj2, b2, defect);
  const double expected = norm_in(a, defect) / norm_in(a, v);
  CHECK(sin_angle_to_eigenspace(a, v, basis) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS((void)sin_angle_to_eigenspace(a, v, std::span<const Vector>{}), ConfigError);
}

TEST_CASE("angle sandwich on small random pencils") {
  const auto suite = verify::check_thm34_sandwich(99, 25);
  CHECK(suite.failures == 0);
}
