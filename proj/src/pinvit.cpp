#include "pinvitkit/pinvit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pinvitkit/kernels.hpp"

namespace pinvitkit {

namespace {

void require_nonzero(const Vector& v, const char* what) {
  if (v.empty() || l2_norm(v) == 0.0)
    throw ConfigError(std::string(what) + ": zero vector");
  require_finite(v, what);
}

}  // namespace

double rayleigh_quotient(const LinearOperator& A, const LinearOperator& E,
                         const Vector& v) {
  require_nonzero(v, "rayleigh_quotient");
  const double den = operator_inner(E, v, v);
  if (!(den > 0.0)) throw NotSpdError("rayleigh_quotient: <Ev, v> <= 0");
  return operator_inner(A, v, v) / den;
}

Vector residual(const LinearOperator& A, const LinearOperator& E, const Vector& v) {
  require_nonzero(v, "residual");
  const Vector av = A.apply(v);
  Vector ev = E.apply(v);
  const double den = inner(ev, v);
  if (!(den > 0.0)) throw NotSpdError("residual: <Ev, v> <= 0");
  const double mu = inner(av, v) / den;
  Vector r(av);
  kernels::axpy(-mu, ev.data(), r.data(), r.size());
  return r;
}

double residual_measure(const LinearOperator& A, const LinearOperator& E,
                        const Vector& v) {
  const Vector r = residual(A, E, v);
  return norm_in_inverse(A, r) / norm_in(A, v);
}

double convergence_factor(double gamma, double lambda_k, double lambda_k1) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ConfigError("convergence_factor: gamma must lie in [0, 1)");
  if (!(lambda_k > 0.0 && lambda_k < lambda_k1))
    throw ConfigError("convergence_factor: need 0 < lambda_k < lambda_{k+1}");
  return 1.0 - (1.0 - gamma) * (1.0 - lambda_k / lambda_k1);
}

StepResult pinvit_step(const LinearOperator& A, const LinearOperator& E,
                       const LinearOperator& P, const Vector& v, const Vector* xi,
                       const std::optional<StepBoundInfo>& bound) {
  require_nonzero(v, "pinvit_step");
  require_same_dim(v.size(), A.dim(), "pinvit_step");

  const Vector av = A.apply(v);
  const Vector ev = E.apply(v);
  const double den = inner(ev, v);
  if (!(den > 0.0)) throw NotSpdError("pinvit_step: <Ev, v> <= 0");
  const double mu = inner(av, v) / den;

  Vector r(av);
  kernels::axpy(-mu, ev.data(), r.data(), r.size());

  if (xi) {
    require_same_dim(xi->size(), v.size(), "pinvit_step/xi");
    if (bound && bound->gamma_xi > 0.0 && A.has_inverse_apply()) {
      const double rho = norm_in_inverse(A, r) / norm_in(A, v);
      const double budget = bound->gamma_xi * rho * norm_in(A, v);
      if (norm_in(A, *xi) > budget * (1.0 + 1e-9))
        throw BudgetError("pinvit_step: perturbation exceeds gamma_xi * rho(v) * ||v||_A");
    }
  }

  Vector vt(v);
  {
    const Vector w = P.apply_inverse(r);
    kernels::axpy(-1.0, w.data(), vt.data(), vt.size());
  }
  if (xi) kernels::axpy(1.0, xi->data(), vt.data(), vt.size());

  const double h_norm = norm_in(E, vt);
  if (h_norm < 1e-14 * norm_in(E, v))
    throw BreakdownError("pinvit_step: update vanished (|v'|_H ~ 0)");

  StepResult out;
  out.next = std::move(vt);
  kernels::scal(1.0 / h_norm, out.next.data(), out.next.size());
  if (inner(out.next, v) < 0.0)
    kernels::scal(-1.0, out.next.data(), out.next.size());

  out.mu_next = rayleigh_quotient(A, E, out.next);
  out.rho_next = A.has_inverse_apply()
                     ? residual_measure(A, E, out.next)
                     : std::numeric_limits<double>::quiet_NaN();

  if (bound) {
    if (out.mu_next < bound->lambda1 * (1.0 - 1e-8))
      throw ConvergenceError(
          "pinvit_step: Rayleigh quotient fell below lambda1; spectral data inconsistent");
    if (mu >= bound->lambda1 && mu < bound->lambda2) {
      const double q = convergence_factor(bound->gamma_p + (xi ? bound->gamma_xi : 0.0),
                                          bound->lambda1, bound->lambda2);
      out.bound_factor = q * q;
    }
  }
  return out;
}

StepResult pinvit_step(const EigenProblem& problem, const Vector& v, const Vector* xi,
                       std::optional<double> gamma_xi) {
  std::optional<StepBoundInfo> bound;
  if (problem.metadata.lambda1 && problem.metadata.lambda2) {
    bound = StepBoundInfo{*problem.metadata.lambda1, *problem.metadata.lambda2,
                          problem.metadata.gamma_p.value_or(0.0),
                          gamma_xi.value_or(0.0)};
  }
  return pinvit_step(*problem.A, *problem.E, *problem.P, v, xi, bound);
}

namespace {

double x_inner(const LinearOperator* metric, const Vector& u, const Vector& v) {
  return metric ? operator_inner(*metric, u, v) : inner(u, v);
}

}  // namespace

double model_rayleigh(const OpFn& b_apply, const Vector& x, const LinearOperator* x_metric) {
  require_nonzero(x, "model_rayleigh");
  const Vector bx = b_apply(x);
  const double den = x_inner(x_metric, x, x);
  if (!(den > 0.0)) throw NotSpdError("model_rayleigh: (x, x)_X <= 0");
  return x_inner(x_metric, bx, x) / den;
}

Vector model_step(const OpFn& b_apply, const OpFn& t_apply, const Vector& x,
                  const Vector* eta, const LinearOperator* x_metric) {
  require_nonzero(x, "model_step");
  const Vector bx = b_apply(x);
  const double den = x_inner(x_metric, x, x);
  if (!(den > 0.0)) throw NotSpdError("model_step: (x, x)_X <= 0");
  const double mu = x_inner(x_metric, bx, x) / den;
  if (!(mu > 0.0))
    throw ConfigError("model_step: nonpositive Rayleigh quotient is outside the analyzed regime");

  Vector dir(bx);
  kernels::axpy(-mu, x.data(), dir.data(), dir.size());
  const Vector tdir = t_apply(dir);

  Vector out(x);
  kernels::axpy(1.0 / mu, tdir.data(), out.data(), out.size());
  if (eta) {
    require_same_dim(eta->size(), x.size(), "model_step/eta");
    kernels::axpy(1.0, eta->data(), out.data(), out.size());
  }
  return out;
}

std::pair<double, double> temple_kato_gap(const OpFn& b_apply, const Vector& x,
                                          double mu1, double mu2,
                                          const LinearOperator* x_metric) {
  require_nonzero(x, "temple_kato_gap");
  if (!(mu2 < mu1))
    throw ConfigError("temple_kato_gap: spectral data unavailable or inconsistent (mu2 >= mu1)");
  const Vector bx = b_apply(x);
  const double xx = x_inner(x_metric, x, x);
  const double mu = x_inner(x_metric, bx, x) / xx;
  Vector d(bx);
  kernels::axpy(-mu, x.data(), d.data(), d.size());
  const double lhs = (mu1 - mu) * (mu - mu2);
  const double rhs = x_inner(x_metric, d, d) / xx;
  return {lhs, rhs};
}

AngleBounds angle_bounds(double mu, double lambda1, double lambda2, double rho) {
  if (!(lambda1 > 0.0 && lambda1 < lambda2))
    throw ConfigError("angle_bounds: need 0 < lambda1 < lambda2");
  if (!(mu >= lambda1 && mu < lambda2))
    throw ConfigError("angle_bounds: mu outside [lambda1, lambda2)");
  if (!(rho >= 0.0)) throw ConfigError("angle_bounds: rho must be >= 0");

  AngleBounds out;
  out.lower = std::min(lambda1 / (3.0 * mu) * rho, 1.0);
  const double from_rho = lambda2 / (lambda2 - mu) * rho;
  const double from_gap = std::sqrt((lambda2 / lambda1) * (mu - lambda1) / (lambda2 - mu));
  out.upper = std::min({from_rho, from_gap, 1.0});
  return out;
}

double sin_angle_to_eigenspace(const LinearOperator& A, const Vector& v,
                               std::span<const Vector> basis) {
  if (basis.empty()) throw ConfigError("sin_angle_to_eigenspace: empty basis");
  require_nonzero(v, "sin_angle_to_eigenspace");

  Vector defect(v);
  const Vector av = A.apply(v);
  for (const Vector& b : basis) {
    require_same_dim(b.size(), v.size(), "sin_angle_to_eigenspace");
    const double coef = inner(av, b);  // (v, b)_A for A-orthonormal b
    kernels::axpy(-coef, b.data(), defect.data(), defect.size());
  }
  const double s = norm_in(A, defect) / norm_in(A, v);
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace pinvitkit
