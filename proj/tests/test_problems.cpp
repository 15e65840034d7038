#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pinvitkit/oracle.hpp"
#include "pinvitkit/problems.hpp"
#include "pinvitkit/rng.hpp"

using namespace pinvitkit;

namespace {

oracle::DenseMatrix identity_mat(std::size_t n) {
  oracle::DenseMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("grid validation and node counts") {
  CHECK(GridSpec{GridSpec::Domain::interval, 0.25}.interior_nodes() == 3);
  CHECK(GridSpec{GridSpec::Domain::interval, 0.5}.interior_nodes() == 1);
  CHECK(GridSpec{GridSpec::Domain::rectangle, 0.25}.interior_nodes() == 9);
  CHECK(GridSpec{GridSpec::Domain::lshape, 0.5}.interior_nodes() == 5);
  CHECK(GridSpec{GridSpec::Domain::lshape, 0.125}.interior_nodes() == 161);

  const GridSpec bad1{GridSpec::Domain::interval, 0.3};
  const GridSpec bad2{GridSpec::Domain::interval, 1.0};
  const GridSpec bad3{GridSpec::Domain::lshape, 1.0};
  const GridSpec bad4{GridSpec::Domain::interval, -0.25};
  CHECK_THROWS_AS(bad1.validate(), ConfigError);
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
  CHECK_THROWS_AS(bad3.validate(), ConfigError);
  CHECK_THROWS_AS(bad4.validate(), ConfigError);

  CHECK(GridSpec{GridSpec::Domain::lshape, 0.015625}.id() == "lshape,h=2^-6");
  CHECK(parse_domain("square") == GridSpec::Domain::rectangle);
  CHECK_THROWS_AS(parse_domain("pentagon"), ConfigError);
}

TEST_CASE("interval FD: closed-form eigenvalues") {
  const EigenProblem p = fd_laplacian({GridSpec::Domain::interval, 0.25});
  CHECK(p.dim == 3);
  REQUIRE(p.metadata.lambda1.has_value());
  CHECK(*p.metadata.lambda1 == doctest::Approx(9.372583001830479).epsilon(1e-14));

  const auto rep = oracle::dense_eigensolve(oracle::densify(*p.A), identity_mat(3));
  CHECK(rep.eigenvalues[0] == doctest::Approx(*p.metadata.lambda1).epsilon(1e-12));
  CHECK(rep.eigenvalues[1] == doctest::Approx(*p.metadata.lambda2).epsilon(1e-12));
}

TEST_CASE("unit square FD: tensor-product eigenvalue") {
  const EigenProblem p = fd_laplacian({GridSpec::Domain::rectangle, 0.25});
  CHECK(p.dim == 9);
  CHECK(*p.metadata.lambda1 == doctest::Approx(18.745166003660958).epsilon(1e-14));
  const auto rep = oracle::dense_eigensolve(oracle::densify(*p.A), identity_mat(9));
  CHECK(rep.eigenvalues[0] == doctest::Approx(*p.metadata.lambda1).epsilon(1e-12));
}

TEST_CASE("L-shape FD: discrete lambda1 at h = 1/8") {
  const EigenProblem p = fd_laplacian({GridSpec::Domain::lshape, 0.125});
  CHECK(p.dim == 161);
  const auto rep = oracle::dense_eigensolve(oracle::densify(*p.A), identity_mat(p.dim));
  // independent reference computed with a sparse eigensolver on the same grid
  CHECK(rep.eigenvalues[0] == doctest::Approx(9.693162214).epsilon(1e-9));
  CHECK_FALSE(p.metadata.lambda1.has_value());
}

TEST_CASE("FD stiffness is exactly symmetric") {
  const EigenProblem p = fd_laplacian({GridSpec::Domain::lshape, 0.25});
  const auto a = oracle::densify(*p.A);
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(a.at(i, j) == a.at(j, i));
}

TEST_CASE("jacobi preconditioner") {
  // diagonal A: P = A exactly, gamma 0
  {
    DiagonalOperator a({1.0, 2.0, 5.0});
    double gamma = -1.0;
    auto p = jacobi_preconditioner(a, &gamma);
    CHECK(gamma <= 1e-10);
    const double* d = p->diagonal();
    CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d[2] == doctest::Approx(5.0).epsilon(1e-9));
  }
  // constant-diagonal A (FD stencil): P is a scaled identity and gamma
  // equals (sigma1 - sigma0)/(sigma1 + sigma0) of (A, I) at the optimal scale
  {
    const EigenProblem p = fd_laplacian({GridSpec::Domain::interval, 1.0 / 8.0});
    const auto rep =
        oracle::dense_eigensolve(oracle::densify(*p.A), identity_mat(p.dim));
    const double s0 = rep.eigenvalues.front(), s1 = rep.eigenvalues.back();
    const double expected = (s1 - s0) / (s1 + s0);
    REQUIRE(p.metadata.gamma_p.has_value());
    CHECK(*p.metadata.gamma_p == doctest::Approx(expected).epsilon(1e-6));
    // cross-check the power-iteration measurement against the dense value
    CHECK(measure_gamma_p(*p.A, *p.P) == doctest::Approx(expected).epsilon(1e-6));
  }
  CHECK_THROWS_AS((void)jacobi_preconditioner(
                      *std::make_shared<DenseOperator>(2, std::vector<double>{0.0, 1.0, 1.0, 0.0})),
                  NotSpdError);
}

TEST_CASE("multilevel preconditioner") {
  // a grid small enough for the coarse solve alone: exact inverse, gamma ~ 0
  {
    auto ml = multilevel_preconditioner({GridSpec::Domain::interval, 0.25});
    CHECK(ml->levels() == 1);
    CHECK(ml->measured_gamma_p() <= 1e-8);
  }
  // 1D at h = 2^-6: contraction well below 1 and stable in h
  {
    double gammas[3];
    int i = 0;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
      auto ml = multilevel_preconditioner({GridSpec::Domain::interval, h});
      gammas[i++] = ml->measured_gamma_p();
      CHECK(ml->measured_gamma_p() < 0.9);
    }
    CHECK(std::abs(gammas[2] - gammas[0]) < 0.1);
    CHECK(std::abs(gammas[2] - gammas[1]) < 0.1);
  }
  // symmetry and positivity of both the cycle and its CG-based forward apply
  {
    auto ml = multilevel_preconditioner({GridSpec::Domain::lshape, 0.125});
    Rng rng(9);
    for (int t = 0; t < 5; ++t) {
      Vector u(ml->dim()), v(ml->dim());
      rng.fill_normal(u);
      rng.fill_normal(v);
      const Vector qu = ml->apply_inverse(u);
      const Vector qv = ml->apply_inverse(v);
      CHECK(inner(qu, v) == doctest::Approx(inner(qv, u))
                                .epsilon(1e-10 * l2_norm(qu) * l2_norm(v) + 1e-12));
      CHECK(inner(qu, u) > 0.0);
    }
    Vector w(ml->dim());
    rng.fill_normal(w);
    // forward apply inverts the cycle: P (P^{-1} w) = w
    Vector round = ml->apply(ml->apply_inverse(w));
    axpy(-1.0, w, round);
    CHECK(l2_norm(round) <= 1e-8 * l2_norm(w));
  }
  // damping weakens the preconditioner
  {
    MultilevelOptions weak;
    weak.damping = 0.25;
    auto ml_weak = multilevel_preconditioner({GridSpec::Domain::interval, 1.0 / 32}, weak);
    auto ml = multilevel_preconditioner({GridSpec::Domain::interval, 1.0 / 32});
    CHECK(ml_weak->measured_gamma_p() > ml->measured_gamma_p());
    CHECK(ml_weak->measured_gamma_p() < 1.0);
  }
}

TEST_CASE("with_preconditioner rewires the problem") {
  EigenProblem p = fd_laplacian({GridSpec::Domain::interval, 1.0 / 32});
  auto ml = multilevel_preconditioner({GridSpec::Domain::interval, 1.0 / 32});
  const EigenProblem q = with_preconditioner(p, ml);
  CHECK(q.P.get() == ml.get());
  CHECK(q.metadata.gamma_p == ml->measured_gamma_p());
  REQUIRE(q.A->metric() != nullptr);
  CHECK(q.A->metric()->weight() == ml.get());
}

TEST_CASE("dense_problem validation") {
  const std::vector<double> id4{1, 0, 0, 1};
  CHECK_THROWS_AS((void)dense_problem(2, {1, 2, 1, 1}, id4, id4), NotSpdError);
  CHECK_THROWS_AS((void)dense_problem(2, {1, 0, 0, -1}, id4, id4), NotSpdError);
  const EigenProblem p = dense_problem(2, {2, 1, 1, 2}, id4, {2, 1, 1, 2});
  CHECK(*p.metadata.gamma_p <= 1e-10);
}

TEST_CASE("matrix market round trips") {
  // sparse stiffness
  {
    const EigenProblem p = fd_laplacian({GridSpec::Domain::lshape, 0.25});
    std::stringstream ss;
    write_matrix_market(*p.A, ss);
    auto back = read_matrix_market(ss, OperatorKind::stiffness);
    Rng rng(13);
    Vector v(p.dim);
    rng.fill_normal(v);
    const Vector y1 = p.A->apply(v);
    const Vector y2 = back->apply(v);
    for (std::size_t i = 0; i < p.dim; ++i) CHECK(y1[i] == y2[i]);
  }
  // diagonal and identity detection
  {
    DiagonalOperator d({2.0, 3.0});
    std::stringstream ss;
    write_matrix_market(d, ss);
    auto back = read_matrix_market(ss, OperatorKind::preconditioner);
    CHECK(back->is_diagonal());

    IdentityOperator id(3);
    std::stringstream ss2;
    write_matrix_market(id, ss2);
    auto back2 = read_matrix_market(ss2, OperatorKind::mass);
    CHECK(dynamic_cast<IdentityOperator*>(back2.get()) != nullptr);
  }
  // full pencil save/load
  {
    const EigenProblem p = dense_problem(2, {2, 1, 1, 2}, {1, 0, 0, 1}, {2, 0, 0, 2});
    save_problem(p, "/tmp/pinvit_test_pencil");
    const EigenProblem q = load_problem("/tmp/pinvit_test_pencil");
    CHECK(q.dim == 2);
    const Vector y = q.A->apply({1.0, 2.0});
    CHECK(y[0] == doctest::Approx(4.0));
    CHECK(y[1] == doctest::Approx(5.0));
    CHECK(q.metadata.id == "file:/tmp/pinvit_test_pencil");
  }
}

TEST_CASE("estimate_constants via problem overload") {
  const EigenProblem p = fd_laplacian({GridSpec::Domain::interval, 1.0 / 16});
  const SpectralConstants c = estimate_constants(p, 2);
  CHECK_NOTHROW(c.validate());
  REQUIRE(c.lambda1.has_value());
  // margin-inflated estimates must bracket the closed forms
  CHECK(*c.lambda1 == doctest::Approx(*p.metadata.lambda1).epsilon(1e-4));
  CHECK(*c.lambda2 >= *p.metadata.lambda2 * 0.999);
}
