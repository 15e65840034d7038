#include "pinvitkit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "pinvitkit/inexact.hpp"
#include "pinvitkit/pinvit.hpp"

namespace pinvitkit::verify {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// --- small dense helpers local to the harness --------------------------------

oracle::DenseMatrix gaussian_matrix(Rng& rng, std::size_t n) {
  oracle::DenseMatrix g(n);
  for (double& x : g.a) x = rng.normal();
  return g;
}

// M := G G^T / n + I, a well-conditioned random SPD matrix
oracle::DenseMatrix random_spd(Rng& rng, std::size_t n) {
  const oracle::DenseMatrix g = gaussian_matrix(rng, n);
  oracle::DenseMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += g.at(i, k) * g.at(j, k);
      s /= static_cast<double>(n);
      if (i == j) s += 1.0;
      m.at(i, j) = m.at(j, i) = s;
    }
  return m;
}

// Orthonormal columns via Gram-Schmidt with one re-orthogonalization pass.
oracle::DenseMatrix random_orthogonal(Rng& rng, std::size_t n) {
  oracle::DenseMatrix q = gaussian_matrix(rng, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += q.at(i, j) * q.at(i, k);
        for (std::size_t i = 0; i < n; ++i) q.at(i, j) -= proj * q.at(i, k);
      }
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += q.at(i, j) * q.at(i, j);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-8) {  // degenerate draw; replace by a unit vector
      for (std::size_t i = 0; i < n; ++i) q.at(i, j) = (i == j) ? 1.0 : 0.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) q.at(i, j) /= nrm;
  }
  return q;
}

std::vector<double> lower_cholesky(const oracle::DenseMatrix& m) {
  const std::size_t n = m.n;
  std::vector<double> L(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L[j * n + k] * L[j * n + k];
    if (!(d > 0.0)) throw NotSpdError("harness: random matrix not SPD");
    L[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
      L[i * n + j] = s / L[j * n + j];
    }
  }
  return L;
}

nlohmann::json matrix_json(const oracle::DenseMatrix& m) {
  return nlohmann::json{{"n", m.n}, {"data", m.a}};
}

std::string make_counterexample(const std::string& suite, int trial,
                                const RandomPencil& pencil, const Vector& v,
                                double eps, const std::string& note) {
  nlohmann::json j;
  j["suite"] = suite;
  j["trial"] = trial;
  j["lambda1"] = pencil.lambda1;
  j["lambda2"] = pencil.lambda2;
  j["gamma_p"] = pencil.gamma_exact;
  j["A"] = matrix_json(pencil.a);
  j["E"] = matrix_json(pencil.e);
  j["P"] = matrix_json(pencil.p);
  j["v"] = v;
  if (eps >= 0.0) j["eps"] = eps;
  j["note"] = note;
  return j.dump();
}

void record_check(SuiteResult& suite, double margin, const std::string& cex) {
  ++suite.checked;
  suite.worst_margin = std::max(suite.worst_margin, margin);
  if (margin > 0.0) {
    ++suite.failures;
    if (suite.counterexample.empty()) suite.counterexample = cex;
  }
}

}  // namespace

RandomPencil make_random_pencil(Rng& rng, const HarnessOptions& options,
                                bool precond_is_a, bool need_alpha) {
  const auto n = static_cast<std::size_t>(
      rng.uniform_int(options.min_dim, options.max_dim));

  RandomPencil out;
  out.e = random_spd(rng, n);
  const std::vector<double> le = lower_cholesky(out.e);

  std::vector<double> lam(n);
  lam[0] = 1.0;
  if (n > 1) lam[1] = rng.uniform(1.3, 3.0);
  for (std::size_t i = 2; i < n; ++i) lam[i] = rng.uniform(3.5, 12.0);
  std::sort(lam.begin(), lam.end());

  const oracle::DenseMatrix q = random_orthogonal(rng, n);
  // A = L (Q diag(lam) Q^T) L^T so the pencil (A, E) has spectrum lam
  oracle::DenseMatrix core(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q.at(i, k) * lam[k] * q.at(j, k);
      core.at(i, j) = core.at(j, i) = s;
    }
  out.a = oracle::DenseMatrix(n);
  {
    // tmp = L * core, A = tmp * L^T
    oracle::DenseMatrix tmp(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += le[i * n + k] * core.at(k, j);
        tmp.at(i, j) = s;
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k <= j; ++k) s += tmp.at(i, k) * le[j * n + k];
        out.a.at(i, j) = out.a.at(j, i) = s;
      }
  }

  if (precond_is_a) {
    out.p = out.a;
    out.gamma_exact = 0.0;
    out.sigma0 = out.sigma1 = 1.0;
  } else {
    double w = rng.uniform(0.0, 0.95);
    for (;;) {
      const oracle::DenseMatrix s = random_spd(rng, n);
      oracle::DenseMatrix p0(n);
      for (std::size_t i = 0; i < n * n; ++i)
        p0.a[i] = (1.0 - w) * out.a.a[i] + w * s.a[i];
      const auto pencil_eigs = oracle::dense_eigensolve(out.a, p0);
      const double smin = pencil_eigs.eigenvalues.front();
      const double smax = pencil_eigs.eigenvalues.back();
      const double gamma = (smax - smin) / (smax + smin);
      if (gamma <= options.gamma_max) {
        const double c = 0.5 * (smin + smax);
        out.p = p0;
        for (double& x : out.p.a) x *= c;
        out.gamma_exact = gamma;
        out.sigma0 = smin / c;
        out.sigma1 = smax / c;
        break;
      }
      w *= 0.6;
    }
  }

  if (need_alpha) {
    const auto ep_eigs = oracle::dense_eigensolve(out.e, out.p);
    out.alpha = std::sqrt(ep_eigs.eigenvalues.back());
  }

  out.spectrum = oracle::dense_eigensolve(out.a, out.e);
  const auto [l1, l2] = oracle::leading_distinct(out.spectrum);
  out.lambda1 = l1;
  out.lambda2 = l2;

  auto a_op = std::make_shared<DenseOperator>(n, out.a.a, OperatorKind::stiffness);
  auto e_op = std::make_shared<DenseOperator>(n, out.e.a, OperatorKind::mass);
  auto p_op = std::make_shared<DenseOperator>(n, out.p.a, OperatorKind::preconditioner);
  ProblemMetadata meta;
  meta.id = "harness,n=" + std::to_string(n);
  meta.domain = "dense";
  meta.lambda1 = l1;
  meta.lambda2 = l2;
  meta.gamma_p = out.gamma_exact;
  out.problem = wrap_problem(a_op, e_op, p_op, meta);
  return out;
}

Vector bracketed_start(Rng& rng, const RandomPencil& pencil) {
  const std::size_t n = pencil.a.n;
  const Vector& u1 = pencil.spectrum.eigenvectors.front();
  const double lo = pencil.lambda1 + 1e-9 * (pencil.lambda2 - pencil.lambda1);
  const double hi = pencil.lambda2 - 1e-6 * (pencil.lambda2 - pencil.lambda1);

  for (int attempt = 0; attempt < 200; ++attempt) {
    Vector z(n);
    rng.fill_normal(z);
    double zn = 0.0;
    for (double x : z) zn += x * x;
    zn = std::sqrt(zn);
    const double t = rng.uniform(0.05, 0.95);
    Vector v(u1);
    for (std::size_t i = 0; i < n; ++i) v[i] += t * z[i] / zn;
    const double mu =
        oracle::quadratic_form(pencil.a, v) / oracle::quadratic_form(pencil.e, v);
    if (mu > lo && mu < hi) return v;
  }
  // deterministic fallback: shrink a two-eigenvector mix until bracketed
  std::size_t k2 = 1;
  while (k2 < n && pencil.spectrum.eigenvalues[k2] <= pencil.lambda1 * (1.0 + 1e-10))
    ++k2;
  const Vector& u2 = pencil.spectrum.eigenvectors[k2];
  for (double s = 1.0; s > 1e-8; s *= 0.5) {
    Vector v(u1);
    for (std::size_t i = 0; i < n; ++i) v[i] += s * u2[i];
    const double mu =
        oracle::quadratic_form(pencil.a, v) / oracle::quadratic_form(pencil.e, v);
    if (mu > lo && mu < hi) return v;
  }
  throw ConvergenceError("harness: could not bracket a start vector");
}

Vector saturating_apply(const LinearOperator& M, const Vector& v, double eps,
                        Rng& rng, double violation_factor) {
  Vector w = M.apply(v);
  if (eps <= 0.0) return w;
  static const DualMetric euclidean;
  const DualMetric& metric = M.metric() ? *M.metric() : euclidean;
  const double target = violation_factor * eps * metric.primal_norm(v);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Vector g(v.size());
    rng.fill_normal(g);
    const double dn = metric.dual_norm(g);
    if (dn > 0.0) {
      axpy(target / dn, g, w);
      return w;
    }
  }
  throw ConvergenceError("harness: could not draw a saturating direction");
}

// -----------------------------------------------------------------------------

namespace {

SuiteResult check_thm33(std::uint64_t seed, int trials, const HarnessOptions& options,
                        bool perturbed) {
  Rng rng(seed);
  SuiteResult suite;
  suite.name = perturbed ? "thm33_perturbed" : "thm33_exact";
  suite.trials = trials;

  for (int t = 0; t < trials; ++t) {
    const bool precond_is_a = !perturbed && (t % 4 == 0);
    const RandomPencil pencil = make_random_pencil(rng, options, precond_is_a, false);
    Vector v = bracketed_start(rng, pencil);

    const double gamma_xi = perturbed ? 0.5 * (1.0 - pencil.gamma_exact) : 0.0;
    const double gamma = pencil.gamma_exact + gamma_xi;

    for (int chain = 0; chain < 3; ++chain) {
      StepResult sr;
      if (perturbed) {
        const double rho = residual_measure(*pencil.problem.A, *pencil.problem.E, v);
        Vector z(v.size());
        rng.fill_normal(z);
        const double za = norm_in(*pencil.problem.A, z);
        const double budget = gamma_xi * rho * norm_in(*pencil.problem.A, v);
        kernels::scal(budget / za, z.data(), z.size());
        const StepBoundInfo info{pencil.lambda1, pencil.lambda2, pencil.gamma_exact,
                                 gamma_xi};
        sr = pinvit_step(*pencil.problem.A, *pencil.problem.E, *pencil.problem.P, v,
                         &z, info);
      } else {
        sr = pinvit_step(*pencil.problem.A, *pencil.problem.E, *pencil.problem.P, v);
      }

      const oracle::AuditRow row = oracle::audit_step(
          pencil.a, pencil.e, pencil.spectrum, v, sr.next, gamma, options.slack);
      if (!row.applicable) break;

      const double margin =
          row.mu_after >= pencil.lambda2
              ? 1.0
              : row.ratio_after - (row.q_squared * row.ratio_before + options.slack);
      record_check(suite, margin,
                   make_counterexample(suite.name, t, pencil, v, -1.0,
                                       "shifted-ratio bound violated"));
      // monotone descent follows from the same theorem
      record_check(suite, row.mu_after - row.mu_before - 1e-12,
                   make_counterexample(suite.name, t, pencil, v, -1.0,
                                       "Rayleigh quotient increased"));

      v = sr.next;
      if (row.ratio_after < 1e-13) break;
    }
  }
  return suite;
}

}  // namespace

SuiteResult check_thm33_exact(std::uint64_t seed, int trials,
                              const HarnessOptions& options) {
  return check_thm33(seed, trials, options, false);
}

SuiteResult check_thm33_perturbed(std::uint64_t seed, int trials,
                                  const HarnessOptions& options) {
  return check_thm33(seed, trials, options, true);
}

SuiteResult check_thm34_sandwich(std::uint64_t seed, int trials,
                                 const HarnessOptions& options) {
  Rng rng(seed);
  SuiteResult suite;
  suite.name = "thm34_sandwich";
  suite.trials = trials;

  for (int t = 0; t < trials; ++t) {
    const RandomPencil pencil = make_random_pencil(rng, options, true, false);
    const Vector v = bracketed_start(rng, pencil);
    const double mu =
        rayleigh_quotient(*pencil.problem.A, *pencil.problem.E, v);
    const double rho = residual_measure(*pencil.problem.A, *pencil.problem.E, v);
    const AngleBounds bounds = angle_bounds(mu, pencil.lambda1, pencil.lambda2, rho);

    Vector u1 = pencil.spectrum.eigenvectors.front();
    const double u1_a = norm_in(*pencil.problem.A, u1);
    kernels::scal(1.0 / u1_a, u1.data(), u1.size());
    const double s = sin_angle_to_eigenspace(
        *pencil.problem.A, v, std::span<const Vector>(&u1, 1));

    record_check(suite, bounds.lower - s - options.slack,
                 make_counterexample(suite.name, t, pencil, v, -1.0,
                                     "lower angle bound violated"));
    record_check(suite, s - bounds.upper - options.slack,
                 make_counterexample(suite.name, t, pencil, v, -1.0,
                                     "upper angle bound violated"));
  }
  return suite;
}

SuiteResult check_temple_kato(std::uint64_t seed, int trials,
                              const HarnessOptions& options) {
  (void)options;
  Rng rng(seed);
  SuiteResult suite;
  suite.name = "temple_kato";
  suite.trials = trials;

  for (int t = 0; t < trials; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(3, 30));
    Vector d(n);
    d[0] = rng.uniform(5.0, 10.0);
    d[1] = rng.uniform(0.3 * d[0], 0.95 * d[0]);
    for (std::size_t i = 2; i < n; ++i) d[i] = rng.uniform(0.05, d[1]);
    std::sort(d.begin(), d.end(), std::greater<>());
    const double mu1 = d[0];
    double mu2 = d[1];
    for (std::size_t i = 1; i < n; ++i)
      if (d[i] < mu1 * (1.0 - 1e-10)) {
        mu2 = d[i];
        break;
      }
    const OpFn b_fn = [&d](const Vector& x) {
      Vector y(x);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= d[i];
      return y;
    };

    Vector x;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Vector z(n);
      rng.fill_normal(z);
      double zn = l2_norm(z);
      Vector cand(n, 0.0);
      cand[0] = 1.0;
      const double tmix = rng.uniform(0.05, 0.9);
      for (std::size_t i = 0; i < n; ++i) cand[i] += tmix * z[i] / zn;
      const double mu = model_rayleigh(b_fn, cand);
      if (mu > mu2 * (1.0 + 1e-9) && mu <= mu1) {
        x = std::move(cand);
        break;
      }
    }
    if (x.empty()) {
      x.assign(n, 0.0);
      x[0] = 1.0;
      x[1] = 0.25;  // guaranteed mu in (mu2, mu1)
    }

    const auto [lhs, rhs] = temple_kato_gap(b_fn, x, mu1, mu2);
    nlohmann::json cex = {{"suite", suite.name}, {"trial", t},      {"diag", d},
                          {"x", x},              {"lhs", lhs},      {"rhs", rhs},
                          {"mu1", mu1},          {"mu2", mu2}};
    record_check(suite, lhs - rhs - 1e-12 * std::max(1.0, rhs), cex.dump());
  }
  return suite;
}

SuiteResult check_model_equivalence(std::uint64_t seed, int trials,
                                    const HarnessOptions& options) {
  Rng rng(seed);
  SuiteResult suite;
  suite.name = "model_equivalence";
  suite.trials = trials;

  for (int t = 0; t < trials; ++t) {
    const RandomPencil pencil = make_random_pencil(rng, options, false, false);
    const std::size_t n = pencil.a.n;

    // form B = A^{-1}E and T = P^{-1}A explicitly, column by column
    oracle::DenseMatrix bmat(n), tmat(n);
    {
      Vector ej(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        ej[j] = 1.0;
        Vector ecol(n), acol(n);
        for (std::size_t i = 0; i < n; ++i) {
          ecol[i] = pencil.e.at(i, j);
          acol[i] = pencil.a.at(i, j);
        }
        const Vector bj = oracle::solve_spd_plain(pencil.a, ecol);
        const Vector tj = oracle::solve_spd_plain(pencil.p, acol);
        for (std::size_t i = 0; i < n; ++i) {
          bmat.at(i, j) = bj[i];
          tmat.at(i, j) = tj[i];
        }
        ej[j] = 0.0;
      }
    }
    const OpFn b_fn = [&bmat](const Vector& x) { return oracle::matvec_plain(bmat, x); };
    const OpFn t_fn = [&tmat](const Vector& x) { return oracle::matvec_plain(tmat, x); };

    Vector x(n);
    rng.fill_normal(x);

    const Vector model = model_step(b_fn, t_fn, x, nullptr, pencil.problem.A.get());
    Vector direct(x);
    {
      const Vector r = residual(*pencil.problem.A, *pencil.problem.E, x);
      const Vector w = pencil.problem.P->apply_inverse(r);
      kernels::axpy(-1.0, w.data(), direct.data(), direct.size());
    }

    Vector diff(model);
    kernels::axpy(-1.0, direct.data(), diff.data(), diff.size());
    const double rel =
        norm_in(*pencil.problem.A, diff) / norm_in(*pencil.problem.A, direct);
    record_check(suite, rel - 1e-10,
                 make_counterexample(suite.name, t, pencil, x, -1.0,
                                     "model and preconditioned steps diverge"));

    const double mu_model = model_rayleigh(b_fn, x, pencil.problem.A.get());
    const double mu = rayleigh_quotient(*pencil.problem.A, *pencil.problem.E, x);
    record_check(suite, std::abs(mu_model * mu - 1.0) - 1e-12,
                 make_counterexample(suite.name, t, pencil, x, -1.0,
                                     "model Rayleigh quotient is not 1/mu"));
  }
  return suite;
}

std::vector<SuiteResult> check_lemmas(std::uint64_t seed, int trials,
                                      const HarnessOptions& options) {
  Rng rng(seed);
  SuiteResult l44, l45, l46, l47;
  l44.name = "lemma44_rayleigh";
  l45.name = "lemma45_residual";
  l46.name = "lemma46_estimator";
  l47.name = "lemma47_accuracy";
  l44.trials = l45.trials = l46.trials = l47.trials = trials;
  int fired = 0;

  for (int t = 0; t < trials; ++t) {
    const RandomPencil pencil = make_random_pencil(rng, options, false, true);
    const Vector v = bracketed_start(rng, pencil);

    SpectralConstants exact;
    exact.sigma0 = pencil.sigma0;
    exact.sigma1 = pencil.sigma1;
    exact.alpha = pencil.alpha;
    exact.gamma_p = pencil.gamma_exact;
    exact.lambda1 = pencil.lambda1;
    exact.lambda2 = pencil.lambda2;

    SolverConfig config;
    config.gamma_p = pencil.gamma_exact;
    config.constant_scale = 1.0;
    const DerivedConstants c = constants_for(exact, config);

    const double eps = c.c0 * std::pow(10.0, rng.uniform(-6.0, 0.0));

    const double mu =
        oracle::quadratic_form(pencil.a, v) / oracle::quadratic_form(pencil.e, v);
    const Vector av = oracle::matvec_plain(pencil.a, v);
    const Vector ev = oracle::matvec_plain(pencil.e, v);
    Vector r(av);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= mu * ev[i];
    const double v_norm_a = std::sqrt(oracle::quadratic_form(pencil.a, v));
    const double v_norm_p = std::sqrt(oracle::quadratic_form(pencil.p, v));
    const Vector ainv_r = oracle::solve_spd_plain(pencil.a, r);
    const double rho = std::sqrt(oracle::dot_plain(ainv_r, r)) / v_norm_a;

    // two approximate-application paths per draw: the contract-saturating
    // probe and the production truncation
    for (int path = 0; path < 2; ++path) {
      Vector wa, we;
      if (path == 0) {
        wa = saturating_apply(*pencil.problem.A, v, eps, rng, options.violation_factor);
        we = saturating_apply(*pencil.problem.E, v, eps, rng, options.violation_factor);
      } else {
        wa = apply_approx(*pencil.problem.A, v, eps);
        we = apply_approx(*pencil.problem.E, v, eps);
      }

      // premise: the Def-4.1 contract in the surrogate metric (oracle-measured)
      {
        Vector da(wa), de(we);
        for (std::size_t i = 0; i < da.size(); ++i) {
          da[i] -= av[i];
          de[i] -= ev[i];
        }
        const Vector pinv_da = oracle::solve_spd_plain(pencil.p, da);
        const double da_dual = std::sqrt(oracle::dot_plain(pinv_da, da));
        const Vector einv_de = oracle::solve_spd_plain(pencil.e, de);
        const double de_dual = std::sqrt(oracle::dot_plain(einv_de, de));
        const double v_norm_e = std::sqrt(oracle::quadratic_form(pencil.e, v));
        const double tol = eps * (1.0 + 1e-9);
        record_check(l45, da_dual - tol * v_norm_p,
                     make_counterexample(l45.name, t, pencil, v, eps,
                                         "A_eps violates its contract"));
        record_check(l45, de_dual - tol * v_norm_e,
                     make_counterexample(l45.name, t, pencil, v, eps,
                                         "E_eps violates its contract"));
      }

      const double den = oracle::dot_plain(we, v);
      if (!(den > 0.0)) {
        ++l44.failures;
        continue;
      }
      const double mu_eps = oracle::dot_plain(wa, v) / den;
      Vector r_eps(wa);
      for (std::size_t i = 0; i < r_eps.size(); ++i) r_eps[i] -= mu_eps * we[i];

      // Lemma 4.4
      record_check(l44, std::abs(mu_eps - mu) - c.c1 * eps,
                   make_counterexample(l44.name, t, pencil, v, eps,
                                       "|mu_eps - mu| > c1 eps"));

      // Lemma 4.5
      Vector dr(r_eps);
      for (std::size_t i = 0; i < dr.size(); ++i) dr[i] -= r[i];
      const Vector ainv_dr = oracle::solve_spd_plain(pencil.a, dr);
      const double diff_norm = std::sqrt(oracle::dot_plain(ainv_dr, dr)) / v_norm_a;
      record_check(l45, diff_norm - c.c2 * eps,
                   make_counterexample(l45.name, t, pencil, v, eps,
                                       "||r_eps - r||_{A^-1} > c2 eps ||v||_A"));

      // Lemma 4.6 sandwich
      const Vector pinv_reps = oracle::solve_spd_plain(pencil.p, r_eps);
      const double rho_eps = std::sqrt(oracle::dot_plain(pinv_reps, r_eps)) / v_norm_p;
      const double lower = rho_eps / (1.0 + pencil.gamma_exact) - c.c2 * eps;
      const double upper = rho_eps / (1.0 - pencil.gamma_exact) + c.c2 * eps;
      record_check(l46, lower - rho - options.slack,
                   make_counterexample(l46.name, t, pencil, v, eps,
                                       "estimator lower bound violated"));
      record_check(l46, rho - upper - options.slack,
                   make_counterexample(l46.name, t, pencil, v, eps,
                                       "estimator upper bound violated"));

      // Lemma 4.7: the accuracy test implies the perturbation budget
      if (accuracy_test(eps, rho_eps, c.c3)) {
        ++fired;
        const Vector pert = oracle::solve_spd_plain(pencil.p, dr);
        const double pert_a = std::sqrt(oracle::quadratic_form(pencil.a, pert));
        record_check(l47, pert_a / v_norm_a - c.gamma_xi * rho - options.slack,
                     make_counterexample(l47.name, t, pencil, v, eps,
                                         "accuracy test admitted an oversized perturbation"));
      }
    }
  }
  l47.details = "fired=" + std::to_string(fired);
  return {l44, l45, l46, l47};
}

std::vector<SuiteResult> run_all(std::uint64_t seed, int trials,
                                 const HarnessOptions& options) {
  std::vector<SuiteResult> results;
  results.push_back(check_thm33_exact(seed, trials, options));
  results.push_back(check_thm33_perturbed(seed + 1, trials, options));
  results.push_back(check_thm34_sandwich(seed + 2, trials, options));
  results.push_back(check_temple_kato(seed + 3, trials, options));
  results.push_back(check_model_equivalence(seed + 4, std::max(1, trials / 10),
                                            options));
  for (auto& s : check_lemmas(seed + 5, trials, options)) results.push_back(std::move(s));
  return results;
}

std::string render_report(const std::vector<SuiteResult>& results,
                          std::uint64_t seed, int trials) {
  std::string out;
  out += "pinvit-kit verification report\n";
  out += "seed=" + std::to_string(seed) + " trials=" + std::to_string(trials) + "\n";
  out += "suite                 status  trials  checked  failures  worst_margin\n";
  bool all_pass = true;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-21s %-7s %6d  %7d  %8d  %s%s%s\n",
                  r.name.c_str(), r.pass() ? "PASS" : "FAIL", r.trials, r.checked,
                  r.failures, fmt17(r.worst_margin).c_str(),
                  r.details.empty() ? "" : "  ", r.details.c_str());
    out += line;
    all_pass &= r.pass();
  }
  out += all_pass ? "overall: PASS\n" : "overall: FAIL\n";
  return out;
}

}  // namespace pinvitkit::verify
