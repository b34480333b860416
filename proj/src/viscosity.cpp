#include "hjlab/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace hjlab {

namespace {

enum class Side { sub, super };

void require_bounds(const EnlargedOperatorGraph& g, Side side, Index nx) {
  const Index ny = static_cast<Index>(g.projection.size());
  for (Index x : g.projection) {
    if (x < 0 || x >= nx) throw StructuralError("projection index out of range");
  }
  for (std::size_t k = 0; k < g.pairs.size(); ++k) {
    const GraphPair& p = g.pairs[k];
    if (p.f.size() != nx || p.g.size() != ny) {
      std::ostringstream os;
      os << "graph pair " << k << " does not match the spaces (|f| = " << p.f.size() << ", |g| = " << p.g.size()
         << ")";
      throw StructuralError(os.str());
    }
    if (p.f.hasNaN() || p.g.hasNaN()) throw StructuralError("graph pair contains NaN");
    // Subsolutions test against f bounded below, g bounded above.
    const bool ok = side == Side::sub ? (p.f.minCoeff() > -kInf && p.g.maxCoeff() < kInf)
                                      : (p.f.maxCoeff() < kInf && p.g.minCoeff() > -kInf);
    if (!ok) {
      std::ostringstream os;
      os << "graph pair " << k << " has the wrong boundedness for a "
         << (side == Side::sub ? "subsolution" : "supersolution") << " test";
      throw StructuralError(os.str());
    }
  }
}

ViscosityReport check_side(const ExtFn& u, const EnlargedOperatorGraph& g, const ExtFn& h, double lambda,
                           const ViscosityOptions& opts, Side side) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be finite and nonnegative");
  if (u.size() != h.size()) throw StructuralError("u and h live on different spaces");
  if (u.hasNaN() || h.hasNaN()) throw ParameterError("u or h contains NaN");
  if (side == Side::sub && u.size() > 0 && u.maxCoeff() == kInf) {
    throw PreconditionError("subsolution candidate must be bounded above");
  }
  if (side == Side::super && u.size() > 0 && u.minCoeff() == -kInf) {
    throw PreconditionError("supersolution candidate must be bounded below");
  }
  require_bounds(g, side, u.size());
  const double tie = opts.tie_tol < 0.0 ? opts.tol : opts.tie_tol;
  const double sign = side == Side::sub ? 1.0 : -1.0;

  ViscosityReport rep;
  rep.slack = side == Side::sub ? -kInf : kInf;
  for (std::size_t k = 0; k < g.pairs.size(); ++k) {
    const GraphPair& p = g.pairs[k];
    PairCheck pc;
    pc.pair = k;
    const Index ny = static_cast<Index>(g.projection.size());
    // Work with sign * (u - f) so both sides maximize.
    Vector w(ny);
    double best = -kInf;
    for (Index y = 0; y < ny; ++y) {
      const Index x = g.projection[static_cast<std::size_t>(y)];
      w[y] = sign * ext_sub(u[x], p.f[x]);
      best = std::max(best, w[y]);
    }
    if (!std::isfinite(best)) {
      pc.applicable = false;
      pc.sup_value = sign * best;
      pc.slack = side == Side::sub ? -kInf : kInf;
      rep.pairs.push_back(pc);
      continue;
    }
    pc.sup_value = sign * best;
    double chosen = kInf;  // best of sign * (u - lambda g - h)
    for (Index y = 0; y < ny; ++y) {
      if (w[y] < best - tie) continue;
      pc.optimizers.push_back(y);
      const Index x = g.projection[static_cast<std::size_t>(y)];
      const double val = ext_sub(ext_sub(u[x], ext_scale(lambda, p.g[y])), h[x]);
      if (sign * val < chosen) {
        chosen = sign * val;
        pc.witness = y;
      }
    }
    pc.slack = sign * chosen;
    pc.pass = chosen <= opts.tol;
    rep.pass = rep.pass && pc.pass;
    rep.slack = side == Side::sub ? std::max(rep.slack, pc.slack) : std::min(rep.slack, pc.slack);
    rep.pairs.push_back(std::move(pc));
  }
  if (!std::isfinite(rep.slack)) rep.slack = 0.0;
  return rep;
}

}  // namespace

ViscosityReport check_subsolution(const ExtFn& u, const EnlargedOperatorGraph& g, const ExtFn& h, double lambda,
                                  const ViscosityOptions& opts) {
  return check_side(u, g, h, lambda, opts, Side::sub);
}

ViscosityReport check_subsolution(const ExtFn& u, const OperatorGraph& g, const ExtFn& h, double lambda,
                                  const ViscosityOptions& opts) {
  EnlargedOperatorGraph e = as_enlarged(g);
  if (g.pairs.empty()) e.projection = full_index_set(u.size());
  return check_side(u, e, h, lambda, opts, Side::sub);
}

ViscosityReport check_supersolution(const ExtFn& v, const EnlargedOperatorGraph& g, const ExtFn& h, double lambda,
                                    const ViscosityOptions& opts) {
  return check_side(v, g, h, lambda, opts, Side::super);
}

ViscosityReport check_supersolution(const ExtFn& v, const OperatorGraph& g, const ExtFn& h, double lambda,
                                    const ViscosityOptions& opts) {
  EnlargedOperatorGraph e = as_enlarged(g);
  if (g.pairs.empty()) e.projection = full_index_set(v.size());
  return check_side(v, e, h, lambda, opts, Side::super);
}

OptimizingSequence find_optimizing_sequence(const ExtFn& f, const ExtFn& g, const std::vector<double>& eps_grid,
                                            double tol) {
  if (f.size() != g.size() || f.size() == 0) throw StructuralError("f and g must share a nonempty space");
  if (eps_grid.empty()) throw ParameterError("eps grid is empty");
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    if (!(eps_grid[k] > 0.0) || (k > 0 && !(eps_grid[k] < eps_grid[k - 1]))) {
      throw ParameterError("eps grid must be strictly decreasing and positive");
    }
  }
  auto shifted = [&](double eps) {
    Vector out(f.size());
    for (Index i = 0; i < f.size(); ++i) out[i] = ext_sub(f[i], ext_scale(eps, g[i]));
    return out;
  };
  const double supf = f.maxCoeff();
  const double inff = f.minCoeff();
  const double slack = 1e-12 * std::max(1.0, std::abs(supf));
  auto case_a = [&](double eps) {
    const double s = shifted(eps).maxCoeff();
    return std::isfinite(s) && supf <= s + slack;
  };
  auto case_b = [&](double eps) {
    const double s = shifted(eps).minCoeff();
    return std::isfinite(s) && inff >= s - slack;
  };
  OptimizingSequence out;
  const double* bad = nullptr;
  for (const double& e : eps_grid) {
    if (!case_a(e)) {
      bad = &e;
      break;
    }
  }
  if (bad) {
    const double* bad_b = nullptr;
    for (const double& e : eps_grid) {
      if (!case_b(e)) {
        bad_b = &e;
        break;
      }
    }
    if (bad_b) {
      std::ostringstream os;
      os << "optimizing sequence: precondition fails at eps = " << *bad;
      throw PreconditionError(os.str());
    }
    out.which = OptimizingCase::inf_case;
  }
  const bool sup_case = out.which == OptimizingCase::sup_case;
  out.f_extreme = sup_case ? supf : inff;
  for (double e : eps_grid) {
    const Vector s = shifted(e);
    Index i = 0;
    if (sup_case) {
      s.maxCoeff(&i);
    } else {
      s.minCoeff(&i);
    }
    out.eps.push_back(e);
    out.points.push_back(i);
    out.f_values.push_back(f[i]);
    out.g_values.push_back(g[i]);
  }
  out.f_gap = std::abs(out.f_values.back() - out.f_extreme);
  const std::size_t tail = out.g_values.size() / 2;
  out.g_limit = sup_case ? -kInf : kInf;
  for (std::size_t k = tail; k < out.g_values.size(); ++k) {
    out.g_limit = sup_case ? std::max(out.g_limit, out.g_values[k]) : std::min(out.g_limit, out.g_values[k]);
  }
  out.f_converges = out.f_gap <= tol;
  out.g_bounded = sup_case ? out.g_limit <= tol : out.g_limit >= -tol;
  return out;
}

ComparisonResult check_comparison(const ExtFn& u, const ExtFn& v, const ExtFn& h1, const ExtFn& h2, double tol) {
  if (u.size() != v.size() || h1.size() != h2.size() || u.size() != h1.size()) {
    throw StructuralError("comparison inputs live on different spaces");
  }
  if (u.size() == 0) return {true, 0.0};
  if (u.maxCoeff() == kInf) throw PreconditionError("u must be bounded above");
  if (v.minCoeff() == -kInf) throw PreconditionError("v must be bounded below");
  const double lhs = ext_difference(u, v).maxCoeff();
  const double rhs = ext_difference(h1, h2).maxCoeff();
  ComparisonResult r;
  r.slack = ext_sub(lhs, rhs);
  if (std::isnan(r.slack)) r.slack = 0.0;
  r.pass = r.slack <= tol;
  return r;
}

Fn perturb_subsolution(const Fn& u, const Fn& h, double lambda, double eps) {
  if (!(eps > 0.0) || !(eps < lambda)) throw ParameterError("perturbation needs 0 < eps < lambda");
  if (u.size() != h.size()) throw StructuralError("u and h live on different spaces");
  return u - eps * (u - h) / lambda;
}

IdentificationResult identification_bound(const Fn& f0, const Fn& g0, const ExtFn& candidate, double eps,
                                          Direction direction, double tol) {
  if (!(eps > 0.0)) throw ParameterError("identification needs eps > 0");
  OperatorGraph single;
  single.kind = direction == Direction::dagger ? GraphKind::dagger : GraphKind::ddagger;
  single.pairs.push_back({f0, g0});
  const Fn rhs = f0 - eps * g0;
  ViscosityOptions vo;
  vo.tol = tol;
  IdentificationResult r;
  if (direction == Direction::dagger) {
    r.check = check_subsolution(candidate, single, rhs, eps, vo);
    r.bound = ((candidate - f0).array() <= tol).all();
  } else {
    r.check = check_supersolution(candidate, single, rhs, eps, vo);
    r.bound = ((candidate - f0).array() >= -tol).all();
  }
  r.precondition = r.check.pass;
  return r;
}

DensityExtension extend_solutions_by_density(const ResolventFamily& r, const std::vector<Fn>& d,
                                             const OperatorGraph& g, const OperatorGraph& g_tilde, double lambda,
                                             const Fn& h_target, double approx_tol, const ViscosityOptions& opts) {
  if (d.empty()) throw PreconditionError("density extension needs a nonempty probe set");
  const Fn target = r(lambda, h_target);
  const double level = 2.0 * sup_norm(h_target);
  IndexSet k;
  for (Index i = 0; i < target.size(); ++i) {
    if (std::abs(target[i]) <= level + 1e-12) k.push_back(i);
  }
  DensityExtension out;
  std::size_t stop = d.size();
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (d[j].size() != h_target.size()) throw StructuralError("probe function has the wrong size");
    double e = 0.0;
    for (Index i : k) e = std::max(e, std::abs(h_target[i] - d[j][i]));
    out.approximation_errors.push_back(e);
    if (j > 0 && !(e < out.approximation_errors[j - 1])) {
      std::ostringstream os;
      os << "density extension: approximation error does not decrease at probe " << j << " (" << e << ")";
      throw PreconditionError(os.str());
    }
    if (e <= approx_tol) {
      stop = j + 1;
      break;
    }
  }
  if (stop == d.size() && out.approximation_errors.back() > approx_tol) {
    std::ostringstream os;
    os << "density extension: approximation error floor " << out.approximation_errors.back() << " above "
       << approx_tol;
    throw PreconditionError(os.str());
  }
  out.used = stop;
  std::map<Index, std::size_t> frequency;
  for (std::size_t j = 0; j < stop; ++j) {
    const Fn uj = r(lambda, d[j]);
    ViscosityReport rep = check_subsolution(uj, g, d[j], lambda, opts);
    if (!rep.pass) {
      std::ostringstream os;
      os << "density extension: R(lambda) h_" << j << " is not a subsolution for G";
      throw PreconditionError(os.str());
    }
    if (!g_tilde.pairs.empty()) {
      Index i = 0;
      (uj - g_tilde.pairs.front().f).maxCoeff(&i);
      if (j >= stop / 2) ++frequency[i];
    }
    out.approximant_checks.push_back(std::move(rep));
  }
  std::size_t most = 0;
  for (const auto& [i, c] : frequency) {
    if (c > most) {
      most = c;
      out.limit_point = i;
    }
  }
  out.report = check_subsolution(target, g_tilde, h_target, lambda, opts);
  return out;
}

}  // namespace hjlab
