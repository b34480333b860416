#include "hjlab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hjlab {

namespace {

using Triplet = Eigen::Triplet<double>;

SpacePtr default_space(Index n) {
  Matrix coords(n, 1);
  for (Index i = 0; i < n; ++i) coords(i, 0) = static_cast<double>(i);
  return make_space(std::move(coords));
}

void require_periodic_grid(const SpacePtr& grid, const Fn& drift) {
  if (!grid) throw StructuralError("grid is null");
  if (grid->dim() != 1 || grid->period.size() != 1 || grid->period[0] <= 0.0) {
    throw StructuralError("the upwind scheme needs a 1-d periodic grid");
  }
  if (grid->size() < 3) throw StructuralError("periodic grid needs at least 3 points");
  if (drift.size() != grid->size()) {
    std::ostringstream os;
    os << "drift has " << drift.size() << " entries for a grid of " << grid->size();
    throw StructuralError(os.str());
  }
  if (!drift.allFinite()) throw ParameterError("drift must be finite");
}

double grid_step(const FiniteSpace& grid) { return grid.period[0] / static_cast<double>(grid.size()); }

// Upwind evaluation on the strided slice f[offset + stride * i], i < n.
void upwind_slice(const Fn& f, Index offset, Index stride, Index n, double dx, const Fn& b, Fn& out,
                  std::vector<Triplet>* jac) {
  for (Index i = 0; i < n; ++i) {
    const Index ip = (i + 1) % n;
    const Index im = (i + n - 1) % n;
    const Index k = offset + stride * i;
    const Index kp = offset + stride * ip;
    const Index km = offset + stride * im;
    const double pp = (f[kp] - f[k]) / dx;
    const double pm = (f[k] - f[km]) / dx;
    const double bp = std::max(b[i], 0.0);
    const double bm = std::min(b[i], 0.0);
    const double qp = std::max(pp, 0.0);
    const double qm = std::min(pm, 0.0);
    const bool forward = qp * qp >= qm * qm;
    out[k] = bp * pp + bm * pm + (forward ? qp * qp : qm * qm);
    if (jac) {
      const double cp = (bp + (forward ? 2.0 * qp : 0.0)) / dx;
      const double cm = -(bm + (forward ? 0.0 : 2.0 * qm)) / dx;
      jac->emplace_back(k, kp, cp);
      jac->emplace_back(k, km, cm);
      jac->emplace_back(k, k, -(cp + cm));
    }
  }
}

}  // namespace

void validate_rate_matrix(const Matrix& rates) {
  if (rates.rows() != rates.cols() || rates.rows() == 0) {
    throw StructuralError("rate matrix must be square and non-empty");
  }
  if (!rates.allFinite()) throw StructuralError("rate matrix has non-finite entries");
  const double scale = std::max(1.0, rates.cwiseAbs().maxCoeff());
  for (Index i = 0; i < rates.rows(); ++i) {
    for (Index j = 0; j < rates.cols(); ++j) {
      if (i != j && rates(i, j) < 0.0) {
        std::ostringstream os;
        os << "rate matrix entry (" << i << ", " << j << ") is negative";
        throw StructuralError(os.str());
      }
    }
    if (std::abs(rates.row(i).sum()) > 1e-12 * scale * static_cast<double>(rates.cols())) {
      std::ostringstream os;
      os << "rate matrix row " << i << " does not sum to zero";
      throw StructuralError(os.str());
    }
  }
}

Hamiltonian linear_hamiltonian(const Matrix& rates, SpacePtr space) {
  validate_rate_matrix(rates);
  if (!space) space = default_space(rates.rows());
  if (space->size() != rates.rows()) throw StructuralError("rate matrix and space sizes differ");
  const SparseMatrix sparse = rates.sparseView();
  Hamiltonian h;
  h.space = std::move(space);
  h.apply = [rates](const Fn& f) -> Fn { return rates * f; };
  h.jacobian = [sparse](const Fn&) { return sparse; };
  h.lipschitz_bound = rates.cwiseAbs().rowwise().sum().maxCoeff();
  h.monotone = true;
  h.name = "linear";
  return h;
}

Hamiltonian tilt_linear(const Matrix& rates, double oscillation_bound, SpacePtr space) {
  validate_rate_matrix(rates);
  if (!(oscillation_bound >= 0.0) || !std::isfinite(oscillation_bound)) {
    throw ParameterError("oscillation bound must be finite and nonnegative");
  }
  if (!space) space = default_space(rates.rows());
  if (space->size() != rates.rows()) throw StructuralError("rate matrix and space sizes differ");
  Matrix off = rates;
  off.diagonal().setZero();
  Hamiltonian h;
  h.space = std::move(space);
  h.apply = [off](const Fn& f) -> Fn {
    const Index n = f.size();
    Fn out(n);
    for (Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (off(i, j) != 0.0) s += off(i, j) * std::expm1(f[j] - f[i]);
      }
      out[i] = s;
    }
    return out;
  };
  h.jacobian = [off](const Fn& f) {
    const Index n = f.size();
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) {
      double diag = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (off(i, j) == 0.0) continue;
        const double d = off(i, j) * std::exp(f[j] - f[i]);
        t.emplace_back(i, j, d);
        diag -= d;
      }
      t.emplace_back(i, i, diag);
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  };
  h.lipschitz_bound = 2.0 * off.rowwise().sum().maxCoeff() * std::exp(oscillation_bound);
  h.monotone = true;
  h.name = "tilt";
  return h;
}

Hamiltonian upwind_quadratic(const SpacePtr& grid, const Fn& drift) {
  require_periodic_grid(grid, drift);
  const double dx = grid_step(*grid);
  const Index n = grid->size();
  Hamiltonian h;
  h.space = grid;
  h.apply = [dx, n, drift](const Fn& f) -> Fn {
    Fn out(n);
    upwind_slice(f, 0, 1, n, dx, drift, out, nullptr);
    return out;
  };
  h.jacobian = [dx, n, drift](const Fn& f) {
    Fn out(n);
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(3 * n));
    upwind_slice(f, 0, 1, n, dx, drift, out, &t);
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  };
  h.monotone = true;
  h.name = "upwind";
  return h;
}

Hamiltonian centered_quadratic(const SpacePtr& grid, const Fn& drift) {
  require_periodic_grid(grid, drift);
  const double dx = grid_step(*grid);
  const Index n = grid->size();
  // Upwind transport, centered quadratic term (f(x+h) - f(x-h))^2 / (2h)^2.
  auto eval = [dx, n, drift](const Fn& f, Fn& out, std::vector<Triplet>* jac) {
    for (Index i = 0; i < n; ++i) {
      const Index ip = (i + 1) % n;
      const Index im = (i + n - 1) % n;
      const double pp = (f[ip] - f[i]) / dx;
      const double pm = (f[i] - f[im]) / dx;
      const double pc = (f[ip] - f[im]) / (2.0 * dx);
      const double bp = std::max(drift[i], 0.0);
      const double bm = std::min(drift[i], 0.0);
      out[i] = bp * pp + bm * pm + pc * pc;
      if (jac) {
        jac->emplace_back(i, ip, (bp + pc) / dx);
        jac->emplace_back(i, im, (-bm - pc) / dx);
        jac->emplace_back(i, i, (bm - bp) / dx);
      }
    }
  };
  Hamiltonian h;
  h.space = grid;
  h.apply = [eval, n](const Fn& f) -> Fn {
    Fn out(n);
    eval(f, out, nullptr);
    return out;
  };
  h.jacobian = [eval, n](const Fn& f) {
    Fn out(n);
    std::vector<Triplet> t;
    eval(f, out, &t);
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  };
  h.monotone = false;
  h.name = "centered";
  return h;
}

Vector stationary_distribution(const Matrix& rates) {
  validate_rate_matrix(rates);
  const Index n = rates.rows();
  // Solve pi^T L = 0 with the last equation replaced by sum(pi) = 1.
  Matrix a = rates.transpose();
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw StructuralError("fast rate matrix is not irreducible");
  Vector pi = lu.solve(rhs);
  if ((pi.array() < -1e-12).any()) throw StructuralError("fast rate matrix is not irreducible");
  return pi.cwiseMax(0.0) / pi.cwiseMax(0.0).sum();
}

namespace {

const SpacePtr& slow_grid_of(const EnlargedSpaceSequence& product) {
  if (!product.layout) throw StructuralError("slow-fast operators need a product layout");
  return product.base.limit;
}

void validate_coupling(const EnlargedSpaceSequence& product, const SlowFastCoupling& c) {
  const ProductLayout& lay = *product.layout;
  if (static_cast<Index>(c.slow_drifts.size()) != lay.fast_size) {
    throw StructuralError("need one slow drift per fast state");
  }
  if (c.fast_rates.rows() != lay.fast_size) throw StructuralError("fast rate matrix has the wrong size");
  validate_rate_matrix(c.fast_rates);
  for (const Fn& b : c.slow_drifts) require_periodic_grid(product.base.limit, b);
}

}  // namespace

Hamiltonian slowfast_hamiltonian(const EnlargedSpaceSequence& product, double n,
                                 const SlowFastCoupling& coupling) {
  const SpacePtr& slow = slow_grid_of(product);
  validate_coupling(product, coupling);
  if (!(n >= 0.0) || !std::isfinite(n)) throw ParameterError("scale n must be finite and nonnegative");
  const ProductLayout lay = *product.layout;
  const double dx = grid_step(*slow);
  const Matrix rates = coupling.fast_rates;
  const std::vector<Fn> drifts = coupling.slow_drifts;
  auto eval = [lay, dx, rates, drifts, n](const Fn& f, Fn& out, std::vector<Triplet>* jac) {
    const Index ns = lay.slow_size;
    const Index nf = lay.fast_size;
    for (Index z = 0; z < nf; ++z) upwind_slice(f, z, nf, ns, dx, drifts[static_cast<std::size_t>(z)], out, jac);
    for (Index x = 0; x < ns; ++x) {
      for (Index z = 0; z < nf; ++z) {
        double s = 0.0;
        for (Index w = 0; w < nf; ++w) {
          if (w == z || rates(z, w) == 0.0) continue;
          const double r = n * rates(z, w);
          s += r * (f[lay.index(x, w)] - f[lay.index(x, z)]);
          if (jac) {
            jac->emplace_back(lay.index(x, z), lay.index(x, w), r);
            jac->emplace_back(lay.index(x, z), lay.index(x, z), -r);
          }
        }
        out[lay.index(x, z)] += s;
      }
    }
  };
  Hamiltonian h;
  h.space = product.base.members.front();
  if (h.space->size() != lay.slow_size * lay.fast_size) throw StructuralError("product space size mismatch");
  const Index total = h.space->size();
  h.apply = [eval, total](const Fn& f) -> Fn {
    Fn out(total);
    eval(f, out, nullptr);
    return out;
  };
  h.jacobian = [eval, total](const Fn& f) {
    Fn out(total);
    std::vector<Triplet> t;
    eval(f, out, &t);
    SparseMatrix m(total, total);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  };
  h.monotone = true;
  h.name = "slowfast";
  return h;
}

Hamiltonian averaged_hamiltonian(const EnlargedSpaceSequence& product, const SlowFastCoupling& coupling) {
  const SpacePtr& slow = slow_grid_of(product);
  validate_coupling(product, coupling);
  const Vector pi = stationary_distribution(coupling.fast_rates);
  std::vector<Hamiltonian> slices;
  for (const Fn& b : coupling.slow_drifts) slices.push_back(upwind_quadratic(slow, b));
  Hamiltonian h;
  h.space = slow;
  h.apply = [slices, pi](const Fn& f) -> Fn {
    Fn out = Fn::Zero(f.size());
    for (std::size_t z = 0; z < slices.size(); ++z) out += pi[static_cast<Index>(z)] * slices[z](f);
    return out;
  };
  h.jacobian = [slices, pi](const Fn& f) {
    SparseMatrix m(f.size(), f.size());
    for (std::size_t z = 0; z < slices.size(); ++z) m += pi[static_cast<Index>(z)] * slices[z].jacobian(f);
    return m;
  };
  h.monotone = true;
  h.name = "averaged";
  return h;
}

Hamiltonian scale_hamiltonian(const Hamiltonian& h, double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("scale must be finite and nonnegative");
  Hamiltonian out = h;
  auto apply = h.apply;
  out.apply = [apply, c](const Fn& f) -> Fn { return c * apply(f); };
  if (h.jacobian) {
    auto jac = h.jacobian;
    out.jacobian = [jac, c](const Fn& f) -> SparseMatrix { return c * jac(f); };
  }
  if (h.lipschitz_bound) out.lipschitz_bound = c * *h.lipschitz_bound;
  out.name = h.name + "_scaled";
  return out;
}

namespace {

void validate_pairs(const std::vector<GraphPair>& pairs, GraphKind kind, Index f_size, Index g_size) {
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const GraphPair& p = pairs[k];
    if (f_size >= 0 && p.f.size() != f_size) throw StructuralError("graph pair f has the wrong size");
    if (g_size >= 0 && p.g.size() != g_size) throw StructuralError("graph pair g has the wrong size");
    if (p.f.hasNaN() || p.g.hasNaN()) throw StructuralError("graph pair contains NaN");
    const bool dagger = kind == GraphKind::dagger;
    // Dagger: f bounded below, g bounded above. Ddagger: the reverse.
    const bool f_ok = dagger ? p.f.minCoeff() > -kInf : p.f.maxCoeff() < kInf;
    const bool g_ok = dagger ? p.g.maxCoeff() < kInf : p.g.minCoeff() > -kInf;
    if (!f_ok || !g_ok) {
      std::ostringstream os;
      os << "graph pair " << k << " violates the " << (dagger ? "dagger" : "ddagger") << " bounds";
      throw StructuralError(os.str());
    }
  }
}

}  // namespace

void validate_graph(const OperatorGraph& g) {
  const Index n = g.pairs.empty() ? -1 : g.pairs.front().f.size();
  validate_pairs(g.pairs, g.kind, n, n);
}

void validate_graph(const EnlargedOperatorGraph& g) {
  const Index ny = static_cast<Index>(g.projection.size());
  const Index nx = g.pairs.empty() ? -1 : g.pairs.front().f.size();
  validate_pairs(g.pairs, g.kind, nx, ny);
  for (Index x : g.projection) {
    if (x < 0 || (nx >= 0 && x >= nx)) throw StructuralError("projection index out of range");
  }
}

EnlargedOperatorGraph as_enlarged(const OperatorGraph& g) {
  EnlargedOperatorGraph out;
  out.pairs = g.pairs;
  out.kind = g.kind;
  const Index n = g.pairs.empty() ? 0 : g.pairs.front().f.size();
  out.projection = full_index_set(n);
  return out;
}

OperatorGraph graph_of(const Hamiltonian& h, const std::vector<Fn>& test_functions, GraphKind kind) {
  OperatorGraph g;
  g.kind = kind;
  for (const Fn& f : test_functions) {
    if (f.size() != h.size()) throw StructuralError("test function has the wrong size");
    g.pairs.push_back({f, h(f)});
  }
  return g;
}

namespace {

std::vector<GraphPair> scale_pairs(double c, const std::vector<GraphPair>& pairs) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("graph scale must be finite and nonnegative");
  std::vector<GraphPair> out = pairs;
  for (GraphPair& p : out) {
    for (Index i = 0; i < p.g.size(); ++i) p.g[i] = ext_scale(c, p.g[i]);
  }
  return out;
}

}  // namespace

OperatorGraph scale_graph(double c, const OperatorGraph& g) {
  OperatorGraph out;
  out.kind = g.kind;
  out.pairs = scale_pairs(c, g.pairs);
  return out;
}

EnlargedOperatorGraph scale_graph(double c, const EnlargedOperatorGraph& g) {
  EnlargedOperatorGraph out = g;
  out.pairs = scale_pairs(c, g.pairs);
  return out;
}

DissipativityReport check_dissipative(const std::vector<GraphPair>& pairs, const std::vector<double>& lambdas,
                                      double tol) {
  DissipativityReport report;
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ParameterError("dissipativity needs lambda > 0");
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const Fn df = pairs[i].f - pairs[j].f;
      const Fn dg = pairs[i].g - pairs[j].g;
      if (!df.allFinite() || !dg.allFinite()) throw ParameterError("dissipativity needs finite pairs");
      const double rhs = sup_norm(df);
      for (double l : lambdas) {
        const double lhs = sup_norm(df - l * dg);
        ++report.checked;
        if (lhs < rhs - tol) report.violations.push_back({i, j, l, lhs, rhs});
      }
    }
  }
  return report;
}

}  // namespace hjlab
