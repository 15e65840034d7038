#include "pinvitkit/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pinvitkit/kernels.hpp"
#include "pinvitkit/oracle.hpp"

namespace pinvitkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string h_repr(double h) {
  const double k = std::round(-std::log2(h));
  if (k >= 0 && std::abs(std::exp2(-k) - h) <= 1e-12 * h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2^-%d", static_cast<int>(k));
    return buf;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", h);
  return buf;
}

std::size_t inverse_h(const GridSpec& spec) {
  if (!(spec.h > 0.0)) throw ConfigError("grid: mesh width must be positive");
  const double inv = 1.0 / spec.h;
  const auto rounded = static_cast<std::size_t>(std::llround(inv));
  if (rounded < 1 || std::abs(inv - static_cast<double>(rounded)) > 1e-9)
    throw ConfigError("grid: 1/h must be an integer (h does not divide the extents)");
  return rounded;
}

// One uniform grid level: interior-node numbering plus coordinate maps.
struct LevelGrid {
  GridSpec spec;
  bool two_d = false;
  std::size_t N = 0;     // interior grid lines per axis of the bounding box
  std::size_t half = 0;  // lshape: first axis index inside the cut quadrant
  std::size_t n = 0;     // unknowns
  std::vector<std::int32_t> node_of;                       // (N+2) or (N+2)^2
  std::vector<std::pair<std::int32_t, std::int32_t>> coord_of;

  std::int32_t at(std::int64_t i, std::int64_t j) const {
    if (i < 0 || j < 0 || i > static_cast<std::int64_t>(N) + 1 ||
        j > static_cast<std::int64_t>(N) + 1)
      return -1;
    return node_of[static_cast<std::size_t>(j) * (N + 2) + static_cast<std::size_t>(i)];
  }
};

LevelGrid make_level(const GridSpec& spec) {
  const std::size_t inv = inverse_h(spec);
  LevelGrid g;
  g.spec = spec;
  switch (spec.domain) {
    case GridSpec::Domain::interval: {
      g.two_d = false;
      if (inv < 2) throw ConfigError("grid: interval has no interior node at this h");
      g.N = inv - 1;
      g.node_of.assign((g.N + 2) * (g.N + 2), -1);
      for (std::size_t i = 1; i <= g.N; ++i) {
        g.node_of[1 * (g.N + 2) + i] = static_cast<std::int32_t>(g.n++);
        g.coord_of.emplace_back(static_cast<std::int32_t>(i), 1);
      }
      break;
    }
    case GridSpec::Domain::rectangle: {
      g.two_d = true;
      if (inv < 2) throw ConfigError("grid: rectangle has no interior node at this h");
      g.N = inv - 1;
      g.node_of.assign((g.N + 2) * (g.N + 2), -1);
      for (std::size_t j = 1; j <= g.N; ++j)
        for (std::size_t i = 1; i <= g.N; ++i) {
          g.node_of[j * (g.N + 2) + i] = static_cast<std::int32_t>(g.n++);
          g.coord_of.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
        }
      break;
    }
    case GridSpec::Domain::lshape: {
      g.two_d = true;
      if (inv < 2) throw ConfigError("grid: L-shape has no interior node at this h");
      g.N = 2 * inv - 1;
      g.half = inv;  // axis index of the coordinate 0 grid line
      g.node_of.assign((g.N + 2) * (g.N + 2), -1);
      for (std::size_t j = 1; j <= g.N; ++j)
        for (std::size_t i = 1; i <= g.N; ++i) {
          if (i >= g.half && j >= g.half) continue;  // closed quadrant removed
          g.node_of[j * (g.N + 2) + i] = static_cast<std::int32_t>(g.n++);
          g.coord_of.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
        }
      break;
    }
  }
  if (g.n == 0) throw ConfigError("grid: no interior nodes");
  return g;
}

std::shared_ptr<CsrOperator> assemble_laplacian(const LevelGrid& g) {
  const double h = g.spec.h;
  const double off = -1.0 / (h * h);
  const double diag = (g.two_d ? 4.0 : 2.0) / (h * h);

  std::vector<std::int32_t> row_ptr(g.n + 1, 0), col_idx;
  std::vector<double> val;
  col_idx.reserve(g.n * (g.two_d ? 5 : 3));
  val.reserve(col_idx.capacity());

  for (std::size_t r = 0; r < g.n; ++r) {
    const auto [i, j] = g.coord_of[r];
    auto push = [&](std::int64_t ii, std::int64_t jj, double v) {
      const std::int32_t c = g.at(ii, jj);
      if (c < 0) return;
      col_idx.push_back(c);
      val.push_back(v);
    };
    if (g.two_d) push(i, j - 1, off);
    push(i - 1, j, off);
    push(i, j, diag);
    push(i + 1, j, off);
    if (g.two_d) push(i, j + 1, off);
    row_ptr[r + 1] = static_cast<std::int32_t>(col_idx.size());
  }
  return std::make_shared<CsrOperator>(g.n, std::move(row_ptr), std::move(col_idx),
                                       std::move(val), OperatorKind::stiffness);
}

void wire_metrics(EigenProblem& p) {
  p.A->set_metric(std::make_shared<DualMetric>(p.P));
  if (dynamic_cast<const IdentityOperator*>(p.E.get()) == nullptr)
    p.E->set_metric(std::make_shared<DualMetric>(p.E));
  else
    p.E->set_metric(nullptr);  // Euclidean pair
}

class InverseOnlyAdapter final : public LinearOperator {
 public:
  InverseOnlyAdapter(std::size_t n,
                     std::function<void(std::span<const double>, std::span<double>)> inv)
      : LinearOperator(n, OperatorKind::preconditioner), inv_(std::move(inv)) {}

  bool has_exact_apply() const override { return false; }
  bool has_inverse_apply() const override { return true; }

 protected:
  void do_apply(std::span<const double>, std::span<double>) const override {
    throw CapabilityError("inverse-only adapter has no forward apply");
  }
  void do_apply_inverse(std::span<const double> r, std::span<double> y) const override {
    inv_(r, y);
  }

 private:
  std::function<void(std::span<const double>, std::span<double>)> inv_;
};

}  // namespace

// ---------------------------------------------------------------------------
// EigenProblem / GridSpec

void EigenProblem::validate() const {
  if (!A || !E || !P) throw ConfigError("problem: missing operator");
  require_same_dim(A->dim(), E->dim(), "problem");
  require_same_dim(A->dim(), P->dim(), "problem");
  require_same_dim(A->dim(), dim, "problem");
}

void GridSpec::validate() const { (void)make_level(*this); }

std::size_t GridSpec::interior_nodes() const { return make_level(*this).n; }

std::size_t GridSpec::nodes_per_axis() const { return make_level(*this).N; }

std::string GridSpec::id() const {
  std::string name;
  switch (domain) {
    case Domain::interval: name = "interval"; break;
    case Domain::rectangle: name = "rectangle"; break;
    case Domain::lshape: name = "lshape"; break;
  }
  return name + ",h=" + h_repr(h);
}

GridSpec::Domain parse_domain(const std::string& name) {
  if (name == "interval") return GridSpec::Domain::interval;
  if (name == "rectangle" || name == "square") return GridSpec::Domain::rectangle;
  if (name == "lshape") return GridSpec::Domain::lshape;
  throw ConfigError("unknown domain '" + name + "'");
}

// ---------------------------------------------------------------------------
// Problem builders

EigenProblem dense_problem(std::size_t n, std::vector<double> a_row_major,
                           std::vector<double> e_row_major,
                           std::vector<double> p_row_major) {
  auto A = std::make_shared<DenseOperator>(n, std::move(a_row_major), OperatorKind::stiffness);
  auto E = std::make_shared<DenseOperator>(n, std::move(e_row_major), OperatorKind::mass);
  auto P = std::make_shared<DenseOperator>(n, std::move(p_row_major), OperatorKind::preconditioner);
  return dense_problem(A, E, P);
}

EigenProblem wrap_problem(std::shared_ptr<LinearOperator> A,
                          std::shared_ptr<LinearOperator> E,
                          std::shared_ptr<LinearOperator> P, ProblemMetadata metadata) {
  EigenProblem p;
  p.A = std::move(A);
  p.E = std::move(E);
  p.P = std::move(P);
  p.dim = p.A->dim();
  p.metadata = std::move(metadata);
  p.validate();
  wire_metrics(p);
  return p;
}

EigenProblem dense_problem(std::shared_ptr<LinearOperator> A,
                           std::shared_ptr<LinearOperator> E,
                           std::shared_ptr<LinearOperator> P) {
  for (const auto* op : {A.get(), E.get(), P.get()}) {
    if (const auto* d = dynamic_cast<const DenseOperator*>(op)) {
      if (d->symmetry_defect() > 1e-12)
        throw NotSpdError("dense_problem: matrix is not symmetric");
      d->require_spd();
    }
  }
  EigenProblem p;
  p.A = std::move(A);
  p.E = std::move(E);
  p.P = std::move(P);
  p.dim = p.A->dim();
  p.metadata.id = "dense,n=" + std::to_string(p.dim);
  p.metadata.domain = "dense";
  p.validate();
  wire_metrics(p);
  p.metadata.gamma_p = measure_gamma_p(*p.A, *p.P);
  return p;
}

EigenProblem fd_laplacian(const GridSpec& grid) {
  const LevelGrid level = make_level(grid);
  auto A = assemble_laplacian(level);

  EigenProblem p;
  p.A = A;
  p.E = std::make_shared<IdentityOperator>(level.n, OperatorKind::mass);
  double gamma = 0.0;
  p.P = jacobi_preconditioner(*A, &gamma);
  p.dim = level.n;
  p.metadata.id = grid.id();
  p.metadata.h = grid.h;
  p.metadata.gamma_p = gamma;
  switch (grid.domain) {
    case GridSpec::Domain::interval: {
      p.metadata.domain = "interval";
      const double s = 4.0 / (grid.h * grid.h);
      auto lam = [&](int k) { return s * std::pow(std::sin(k * kPi * grid.h / 2.0), 2); };
      p.metadata.lambda1 = lam(1);
      if (level.N >= 2) p.metadata.lambda2 = lam(2);
      break;
    }
    case GridSpec::Domain::rectangle: {
      p.metadata.domain = "rectangle";
      const double s = 4.0 / (grid.h * grid.h);
      auto mode = [&](int k) { return s * std::pow(std::sin(k * kPi * grid.h / 2.0), 2); };
      p.metadata.lambda1 = 2.0 * mode(1);
      if (level.N >= 2) p.metadata.lambda2 = mode(1) + mode(2);
      break;
    }
    case GridSpec::Domain::lshape:
      p.metadata.domain = "lshape";
      break;
  }
  p.validate();
  wire_metrics(p);
  return p;
}

std::shared_ptr<LinearOperator> jacobi_preconditioner(const LinearOperator& A,
                                                      double* measured_gamma) {
  const double* d = A.diagonal();
  if (!d) throw CapabilityError("jacobi_preconditioner: operator has no accessible diagonal");
  Vector entries(d, d + A.dim());
  for (double x : entries)
    if (!(x > 0.0)) throw NotSpdError("jacobi_preconditioner: zero or negative diagonal entry");

  const DiagonalOperator unscaled(entries);
  const PencilExtremes ext = pencil_extremes(A, unscaled);
  const double center = 0.5 * (ext.smallest + ext.largest);
  kernels::scal(center, entries.data(), entries.size());
  auto P = std::make_shared<DiagonalOperator>(std::move(entries), OperatorKind::preconditioner);
  if (measured_gamma) *measured_gamma = measure_gamma_p(A, *P);
  return P;
}

// ---------------------------------------------------------------------------
// Multilevel preconditioner

struct MultilevelPreconditioner::Impl {
  MultilevelOptions opts;
  std::vector<LevelGrid> grids;
  std::vector<std::shared_ptr<CsrOperator>> a_ops;
  std::vector<Vector> inv_diag;
  std::shared_ptr<DenseOperator> coarse;

  void smooth(std::size_t l, std::span<const double> r, Vector& x) const {
    const std::size_t n = grids[l].n;
    Vector ax(n);
    for (int s = 0; s < opts.smooth_steps; ++s) {
      a_ops[l]->apply(x, std::span<double>(ax));
      for (std::size_t i = 0; i < n; ++i)
        x[i] += opts.omega * inv_diag[l][i] * (r[i] - ax[i]);
    }
  }

  // Bilinear (2D) / linear (1D) interpolation from level l+1 onto level l.
  void prolong_add(std::size_t l, const Vector& xc, Vector& xf) const {
    const LevelGrid& fine = grids[l];
    const LevelGrid& coarse_g = grids[l + 1];
    auto cval = [&](std::int64_t i, std::int64_t j) -> double {
      // only even fine coordinates land on coarse nodes
      if (i % 2 != 0 || j % 2 != 0) return 0.0;
      const std::int32_t c = coarse_g.at(i / 2, j / 2);
      return c >= 0 ? xc[static_cast<std::size_t>(c)] : 0.0;
    };
    for (std::size_t f = 0; f < fine.n; ++f) {
      const auto [i, j] = fine.coord_of[f];
      double v = 0.0;
      const bool iodd = (i % 2) != 0;
      const bool jodd = fine.two_d && (j % 2) != 0;
      if (!iodd && !jodd) {
        v = cval(i, fine.two_d ? j : 2);
      } else if (iodd && !jodd) {
        v = 0.5 * (cval(i - 1, fine.two_d ? j : 2) + cval(i + 1, fine.two_d ? j : 2));
      } else if (!iodd && jodd) {
        v = 0.5 * (cval(i, j - 1) + cval(i, j + 1));
      } else {
        v = 0.25 * (cval(i - 1, j - 1) + cval(i + 1, j - 1) + cval(i - 1, j + 1) +
                    cval(i + 1, j + 1));
      }
      xf[f] += v;
    }
  }

  // Full weighting: the scaled transpose of the interpolation.
  Vector restrict_residual(std::size_t l, const Vector& rf) const {
    const LevelGrid& fine = grids[l];
    const LevelGrid& coarse_g = grids[l + 1];
    Vector rc(coarse_g.n, 0.0);
    const double s = fine.two_d ? 0.25 : 0.5;
    auto add = [&](std::int64_t i, std::int64_t j, double w) {
      if (i % 2 != 0 || j % 2 != 0) return;
      const std::int32_t c = coarse_g.at(i / 2, j / 2);
      if (c >= 0) rc[static_cast<std::size_t>(c)] += w;
    };
    for (std::size_t f = 0; f < fine.n; ++f) {
      const auto [i, j] = fine.coord_of[f];
      const double w = s * rf[f];
      const bool iodd = (i % 2) != 0;
      const bool jodd = fine.two_d && (j % 2) != 0;
      const std::int64_t jj = fine.two_d ? j : 2;
      if (!iodd && !jodd) {
        add(i, jj, w);
      } else if (iodd && !jodd) {
        add(i - 1, jj, 0.5 * w);
        add(i + 1, jj, 0.5 * w);
      } else if (!iodd && jodd) {
        add(i, j - 1, 0.5 * w);
        add(i, j + 1, 0.5 * w);
      } else {
        add(i - 1, j - 1, 0.25 * w);
        add(i + 1, j - 1, 0.25 * w);
        add(i - 1, j + 1, 0.25 * w);
        add(i + 1, j + 1, 0.25 * w);
      }
    }
    return rc;
  }

  void vcycle(std::size_t l, std::span<const double> r, Vector& x) const {
    const std::size_t n = grids[l].n;
    if (l + 1 == grids.size()) {
      coarse->apply_inverse(r, std::span<double>(x));
      return;
    }
    std::fill(x.begin(), x.end(), 0.0);
    smooth(l, r, x);
    Vector res(n);
    a_ops[l]->apply(x, std::span<double>(res));
    for (std::size_t i = 0; i < n; ++i) res[i] = r[i] - res[i];
    const Vector rc = restrict_residual(l, res);
    Vector xc(grids[l + 1].n, 0.0);
    vcycle(l + 1, rc, xc);
    prolong_add(l, xc, x);
    smooth(l, r, x);
  }
};

MultilevelPreconditioner::MultilevelPreconditioner(const GridSpec& grid,
                                                   const MultilevelOptions& options)
    : LinearOperator(make_level(grid).n, OperatorKind::preconditioner),
      impl_(std::make_shared<Impl>()) {
  if (!(options.damping > 0.0))
    throw ConfigError("multilevel: damping must be positive");
  impl_->opts = options;
  GridSpec spec = grid;
  impl_->grids.push_back(make_level(spec));
  while (impl_->grids.back().n > options.coarse_max_nodes) {
    GridSpec next = spec;
    next.h = spec.h * 2.0;
    try {
      LevelGrid lg = make_level(next);
      impl_->grids.push_back(std::move(lg));
      spec = next;
    } catch (const ConfigError&) {
      break;  // next coarsening would be degenerate
    }
  }
  for (const LevelGrid& g : impl_->grids) {
    auto A = assemble_laplacian(g);
    Vector idg(g.n);
    const double* d = A->diagonal();
    for (std::size_t i = 0; i < g.n; ++i) idg[i] = 1.0 / d[i];
    impl_->a_ops.push_back(std::move(A));
    impl_->inv_diag.push_back(std::move(idg));
  }
  const auto coarse_dense = oracle::densify(*impl_->a_ops.back());
  impl_->coarse = std::make_shared<DenseOperator>(coarse_dense.n, coarse_dense.a,
                                                  OperatorKind::preconditioner);
  impl_->coarse->require_spd();
  level_count_ = impl_->grids.size();

  // center the spectrum of P^{-1}A, then apply the requested damping
  const auto impl = impl_;
  InverseOnlyAdapter raw(dim(), [impl](std::span<const double> r, std::span<double> y) {
    Vector x(r.size(), 0.0);
    impl->vcycle(0, r, x);
    std::copy(x.begin(), x.end(), y.begin());
  });
  const PencilExtremes ext = pencil_extremes(*impl_->a_ops.front(), raw);
  scale_ = options.damping * 2.0 / (ext.smallest + ext.largest);
  gamma_p_ = measure_gamma_p(*impl_->a_ops.front(), *this);
}

void MultilevelPreconditioner::do_apply_inverse(std::span<const double> r,
                                                std::span<double> y) const {
  Vector x(dim(), 0.0);
  impl_->vcycle(0, r, x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = scale_ * x[i];
}

void MultilevelPreconditioner::do_apply(std::span<const double> x,
                                        std::span<double> y) const {
  // P y = ... with P = (scale * cycle)^{-1}: solve cycle(y) = x / scale by CG
  // preconditioned with the (spectrally equivalent) fine-level stiffness.
  Vector b(x.begin(), x.end());
  kernels::scal(1.0 / scale_, b.data(), b.size());
  const auto impl = impl_;
  conjugate_gradient(
      [impl](std::span<const double> r, std::span<double> out) {
        Vector t(r.size(), 0.0);
        impl->vcycle(0, r, t);
        std::copy(t.begin(), t.end(), out.begin());
      },
      b, y, 1e-12, 500,
      [impl](std::span<const double> r, std::span<double> out) {
        impl->a_ops.front()->apply(r, out);
      });
}

std::shared_ptr<MultilevelPreconditioner> multilevel_preconditioner(
    const GridSpec& grid, const MultilevelOptions& options) {
  return std::make_shared<MultilevelPreconditioner>(grid, options);
}

EigenProblem with_preconditioner(const EigenProblem& problem,
                                 std::shared_ptr<LinearOperator> P) {
  EigenProblem out = problem;
  require_same_dim(P->dim(), problem.dim, "with_preconditioner");
  out.P = std::move(P);
  wire_metrics(out);
  if (const auto* ml = dynamic_cast<const MultilevelPreconditioner*>(out.P.get()))
    out.metadata.gamma_p = ml->measured_gamma_p();
  else
    out.metadata.gamma_p = measure_gamma_p(*out.A, *out.P);
  return out;
}

// ---------------------------------------------------------------------------
// Matrix-market-style serialization

namespace {

struct Triplets {
  std::size_t n = 0;
  std::vector<std::tuple<std::int32_t, std::int32_t, double>> entries;  // i >= j
  bool diagonal_only = true;
};

Triplets extract_triplets(const LinearOperator& op, double scale = 1.0) {
  Triplets t;
  t.n = op.dim();
  if (const auto* s = dynamic_cast<const ScaledOperator*>(&op))
    return extract_triplets(s->inner(), scale * s->scale());
  if (op.is_diagonal()) {
    const double* d = op.diagonal();
    for (std::size_t i = 0; i < t.n; ++i)
      t.entries.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i),
                             scale * d[i]);
    return t;
  }
  if (const auto* c = dynamic_cast<const CsrOperator*>(&op)) {
    for (std::size_t i = 0; i < t.n; ++i)
      for (std::int32_t k = c->row_ptr()[i]; k < c->row_ptr()[i + 1]; ++k)
        if (c->col_idx()[k] <= static_cast<std::int32_t>(i)) {
          t.entries.emplace_back(static_cast<std::int32_t>(i), c->col_idx()[k],
                                 scale * c->values()[k]);
          if (c->col_idx()[k] != static_cast<std::int32_t>(i)) t.diagonal_only = false;
        }
    return t;
  }
  if (const auto* d = dynamic_cast<const DenseOperator*>(&op)) {
    for (std::size_t i = 0; i < t.n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        if (d->at(i, j) != 0.0) {
          t.entries.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j),
                                 scale * d->at(i, j));
          if (i != j) t.diagonal_only = false;
        }
    return t;
  }
  throw CapabilityError(
      "write_matrix_market: operator has no explicit matrix representation");
}

}  // namespace

void write_matrix_market(const LinearOperator& op, std::ostream& os) {
  const Triplets t = extract_triplets(op);
  os << "%%MatrixMarket matrix coordinate real symmetric\n";
  os << t.n << " " << t.n << " " << t.entries.size() << "\n";
  for (const auto& [i, j, v] : t.entries)
    os << (i + 1) << " " << (j + 1) << " " << format_double(v) << "\n";
}

std::shared_ptr<LinearOperator> read_matrix_market(std::istream& is, OperatorKind kind) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw ConfigError("matrix market: missing header");
  const bool symmetric = line.find("symmetric") != std::string::npos;
  if (line.find("coordinate") == std::string::npos ||
      line.find("real") == std::string::npos)
    throw ConfigError("matrix market: only coordinate real files are supported");
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  std::size_t rows = 0, cols = 0, nnz = 0;
  dims >> rows >> cols >> nnz;
  if (rows == 0 || rows != cols) throw ConfigError("matrix market: bad dimensions");

  std::vector<std::map<std::int32_t, double>> by_row(rows);
  bool diagonal_only = true;
  for (std::size_t k = 0; k < nnz; ++k) {
    std::int64_t i = 0, j = 0;
    double v = 0.0;
    if (!(is >> i >> j >> v)) throw ConfigError("matrix market: truncated entries");
    --i;
    --j;
    if (i < 0 || j < 0 || i >= static_cast<std::int64_t>(rows) ||
        j >= static_cast<std::int64_t>(rows))
      throw ConfigError("matrix market: index out of range");
    by_row[i][static_cast<std::int32_t>(j)] += v;
    if (symmetric && i != j) by_row[j][static_cast<std::int32_t>(i)] += v;
    if (i != j) diagonal_only = false;
  }

  if (diagonal_only) {
    Vector d(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (const auto& [j, v] : by_row[i]) d[i] = v;
    bool ones = true;
    for (double x : d) ones &= (x == 1.0);
    if (ones) return std::make_shared<IdentityOperator>(rows, kind);
    return std::make_shared<DiagonalOperator>(std::move(d), kind);
  }

  std::vector<std::int32_t> row_ptr(rows + 1, 0), col_idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < rows; ++i) {
    for (const auto& [j, v] : by_row[i]) {
      col_idx.push_back(j);
      val.push_back(v);
    }
    row_ptr[i + 1] = static_cast<std::int32_t>(col_idx.size());
  }
  return std::make_shared<CsrOperator>(rows, std::move(row_ptr), std::move(col_idx),
                                       std::move(val), kind);
}

void save_problem(const EigenProblem& problem, const std::string& prefix) {
  problem.validate();
  const std::pair<const LinearOperator*, const char*> members[] = {
      {problem.A.get(), ".A.mtx"}, {problem.E.get(), ".E.mtx"}, {problem.P.get(), ".P.mtx"}};
  for (const auto& [op, suffix] : members) {
    std::ofstream os(prefix + suffix);
    if (!os) throw ConfigError("save_problem: cannot open " + prefix + suffix);
    write_matrix_market(*op, os);
  }
}

EigenProblem load_problem(const std::string& prefix) {
  auto open = [&](const char* suffix, OperatorKind kind) {
    std::ifstream is(prefix + suffix);
    if (!is) throw ConfigError("load_problem: cannot open " + prefix + suffix);
    return read_matrix_market(is, kind);
  };
  EigenProblem p;
  p.A = open(".A.mtx", OperatorKind::stiffness);
  p.E = open(".E.mtx", OperatorKind::mass);
  p.P = open(".P.mtx", OperatorKind::preconditioner);
  p.dim = p.A->dim();
  p.metadata.id = "file:" + prefix;
  p.metadata.domain = "file";
  p.validate();
  wire_metrics(p);
  p.metadata.gamma_p = measure_gamma_p(*p.A, *p.P);
  return p;
}

SpectralConstants estimate_constants(const EigenProblem& problem, int trials) {
  problem.validate();
  EstimateOptions opts;
  opts.trials = trials;
  return estimate_constants(*problem.A, *problem.E, *problem.P, opts);
}

}  // namespace pinvitkit
