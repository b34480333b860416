#include "hjlab/semigroup.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace hjlab {

IterationResult crandall_liggett(const ResolventFamily& r, double t, int n_steps, const Fn& f) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("time must be finite and nonnegative");
  if (n_steps < 1) throw ParameterError("n_steps must be at least 1");
  IterationResult out;
  out.value = f;
  if (t == 0.0) return out;
  const double lambda = t / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    try {
      auto [next, diag] = r.solve(lambda, out.value);
      out.value = std::move(next);
      out.steps.push_back(diag);
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "Crandall-Liggett step " << k << " of " << n_steps << ": " << e.what();
      throw SolverError(os.str(), e.best_iterate(), e.residual(), e.iterations());
    }
  }
  return out;
}

IterationResult crandall_liggett(const ResolventFamily& r, const SemigroupApprox& approx, const Fn& f) {
  return crandall_liggett(r, approx.t, approx.n_steps, f);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return 0.0;
  const double den = m * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (m * sxy - sx * sy) / den;
}

TrendReport convergence_in_n(const ResolventFamily& r, double t, const Fn& f, const std::vector<int>& n_list,
                             double tol, const std::optional<Fn>& oracle) {
  if (n_list.size() < 2) throw ParameterError("convergence in n needs at least two step counts");
  for (std::size_t k = 1; k < n_list.size(); ++k) {
    if (n_list[k] <= n_list[k - 1]) throw ParameterError("step counts must increase");
  }
  TrendReport rep;
  rep.n_list = n_list;
  rep.with_oracle = oracle.has_value();
  std::vector<Fn> values;
  for (int n : n_list) values.push_back(crandall_liggett(r, t, n, f).value);
  std::vector<double> xs;
  if (oracle) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      rep.values.push_back(sup_norm(values[k] - *oracle));
      xs.push_back(n_list[k]);
    }
  } else {
    for (std::size_t k = 1; k < values.size(); ++k) {
      rep.values.push_back(sup_norm(values[k] - values[k - 1]));
      xs.push_back(n_list[k - 1]);
    }
  }
  for (std::size_t k = 1; k < rep.values.size(); ++k) {
    if (rep.values[k] > rep.values[k - 1] * (1.0 + 1e-9) + 1e-15) rep.monotone = false;
  }
  rep.slope = loglog_slope(xs, rep.values);
  rep.pass = rep.monotone && rep.values.back() <= tol;
  return rep;
}

AdaptiveResult adaptive_crandall_liggett(const ResolventFamily& r, double t, const Fn& f, double target, int start,
                                         int cap) {
  if (!(target > 0.0)) throw ParameterError("adaptive target must be positive");
  AdaptiveResult out;
  if (t == 0.0) {
    out.value = f;
    out.converged = true;
    return out;
  }
  int n = std::max(1, start);
  Fn prev = crandall_liggett(r, t, n, f).value;
  while (2 * n <= cap) {
    n *= 2;
    Fn cur = crandall_liggett(r, t, n, f).value;
    out.last_change = sup_norm(cur - prev);
    prev = std::move(cur);
    if (out.last_change <= target) {
      out.converged = true;
      break;
    }
  }
  out.value = std::move(prev);
  out.n_steps = n;
  return out;
}

SemigroupExperiment semigroup_convergence_experiment(const std::vector<ResolventFamily>& rs,
                                                     const ResolventFamily& limit, const SpaceSequence& seq,
                                                     const std::vector<double>& t_n, double t, const FnSequence& f_n,
                                                     const Fn& f, const LimitOptions& opts, int cap) {
  if (rs.size() != seq.count() || t_n.size() != seq.count()) {
    throw StructuralError("need one resolvent family and one time per member");
  }
  const ConvergenceVerdict initial = check_LIM(seq, f_n, f, opts);
  if (!initial.pass) throw PreconditionError("semigroup experiment: LIM f_n = f fails");
  SemigroupExperiment out;
  const double target = opts.tol / 10.0;
  const std::size_t tail = resolve_tail(seq, opts.tail_start);
  for (std::size_t n = 0; n < seq.count(); ++n) {
    // Members before the tail do not enter LIM; a single step keeps them cheap.
    if (n < tail) {
      out.values.members.push_back(crandall_liggett(rs[n], t_n[n], 1, f_n.members[n]).value);
      out.n_steps.push_back(1);
      out.changes.push_back(kInf);
      continue;
    }
    AdaptiveResult a = adaptive_crandall_liggett(rs[n], t_n[n], f_n.members[n], target, 1, cap);
    out.values.members.push_back(a.value);
    out.n_steps.push_back(a.n_steps);
    out.changes.push_back(a.last_change);
  }
  AdaptiveResult lim = adaptive_crandall_liggett(limit, t, f, target, 1, cap);
  out.limit_value = lim.value;
  out.limit_n_steps = lim.n_steps;
  out.verdict = check_LIM(seq, out.values, out.limit_value, opts);
  for (std::size_t n = tail; n < seq.count(); ++n) {
    if (out.changes[n] > target) {
      out.verdict.warnings.push_back("member " + std::to_string(n) + " iteration did not reach tol/10");
    }
  }
  if (!lim.converged) out.verdict.warnings.push_back("limit iteration did not reach tol/10");
  return out;
}

DensityCheck density_check_zero_operator(const ResolventFamily& r, const Fn& h, const std::vector<double>& lambda_seq,
                                         double tol, const std::vector<IndexSet>& compacts) {
  if (lambda_seq.empty()) throw ParameterError("lambda sequence is empty");
  for (std::size_t k = 0; k < lambda_seq.size(); ++k) {
    if (!(lambda_seq[k] > 0.0) || (k > 0 && !(lambda_seq[k] < lambda_seq[k - 1]))) {
      throw ParameterError("lambda sequence must be strictly decreasing and positive");
    }
  }
  std::vector<IndexSet> sets = compacts;
  if (sets.empty()) sets.push_back(full_index_set(h.size()));
  DensityCheck out;
  out.lambdas = lambda_seq;
  for (double l : lambda_seq) {
    const Fn d = (r(l, h) - h).cwiseAbs();
    double dev = 0.0;
    for (const IndexSet& k : sets) {
      for (Index i : k) dev = std::max(dev, d[i]);
    }
    out.deviations.push_back(dev);
  }
  for (std::size_t k = 1; k < out.deviations.size(); ++k) {
    if (out.deviations[k] > out.deviations[k - 1] + 1e-12) out.monotone = false;
  }
  out.below_tol = out.deviations.back() <= tol;

  const HhatGraph hh = build_Hhat(r, lambda_seq, {h});
  OperatorGraph zero = scale_graph(0.0, hh.graph);
  ViscosityOptions vo;
  vo.tol = 1e-12;
  out.trivial_sub = true;
  out.trivial_super = true;
  for (double l : lambda_seq) {
    out.trivial_sub = out.trivial_sub && check_subsolution(h, zero, h, l, vo).pass;
    zero.kind = GraphKind::ddagger;
    out.trivial_super = out.trivial_super && check_supersolution(h, zero, h, l, vo).pass;
    zero.kind = GraphKind::dagger;
  }
  out.pass = out.monotone && out.below_tol && out.trivial_sub && out.trivial_super;
  return out;
}

Matrix rate_exponential(const Matrix& rates, double t) {
  validate_rate_matrix(rates);
  if (!(t >= 0.0) || !std::isfinite(t)) throw ParameterError("time must be finite and nonnegative");
  const Matrix a = t * rates;
  return a.exp();
}

Fn logexp_oracle(const Matrix& rates, double t, const Fn& f) {
  if (f.size() != rates.rows()) throw StructuralError("f and the rate matrix differ in size");
  if (!f.allFinite()) throw ParameterError("logexp oracle needs finite f");
  const Matrix e = rate_exponential(rates, t);
  if (t == 0.0) return f;
  const double m = f.maxCoeff();
  const Vector w = e * (f.array() - m).exp().matrix();
  return w.array().log().matrix() + Vector::Constant(f.size(), m);
}

}  // namespace hjlab
