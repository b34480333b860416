#include "hjlab/resolvent.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace hjlab {

const char* to_string(SolveMethod m) {
  return m == SolveMethod::newton ? "newton" : "damped-fixed-point";
}

namespace {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t cache_key(double lambda, const Fn& h) {
  std::uint64_t k = fnv1a(&lambda, sizeof lambda);
  return fnv1a(h.data(), static_cast<std::size_t>(h.size()) * sizeof(double), k);
}

SparseMatrix finite_difference_jacobian(const Hamiltonian& ham, const Fn& f, const Fn& hf) {
  const Index n = f.size();
  Matrix j(n, n);
  Fn x = f;
  for (Index k = 0; k < n; ++k) {
    const double step = 1e-7 * std::max(1.0, std::abs(f[k]));
    x[k] = f[k] + step;
    j.col(k) = (ham(x) - hf) / step;
    x[k] = f[k];
  }
  return j.sparseView();
}

struct Outcome {
  Fn f;
  SolveDiagnostics diag;
  bool converged = false;
};

Outcome fixed_point(const Hamiltonian& ham, double lambda, const Fn& h, Fn f, double omega,
                    const SolverOptions& opts) {
  Outcome out;
  out.diag.lambda = lambda;
  out.diag.method = SolveMethod::damped_fixed_point;
  Fn hf = ham(f);
  double res = sup_norm(f - lambda * hf - h);
  const double start = res;
  Fn best = f;
  double best_res = res;
  int it = 0;
  while (res > opts.tol_residual && it < opts.max_iter) {
    f = (1.0 - omega) * f + omega * (h + lambda * hf);
    hf = ham(f);
    res = sup_norm(f - lambda * hf - h);
    ++it;
    if (!std::isfinite(res) || res > 1e3 * std::max(start, 1.0)) break;
    if (res < best_res) {
      best_res = res;
      best = f;
    }
  }
  out.converged = res <= opts.tol_residual;
  out.f = out.converged ? f : best;
  out.diag.iterations = it;
  out.diag.final_residual = out.converged ? res : best_res;
  return out;
}

Outcome newton(const Hamiltonian& ham, double lambda, const Fn& h, Fn f, const SolverOptions& opts) {
  Outcome out;
  out.diag.lambda = lambda;
  out.diag.method = SolveMethod::newton;
  const Index n = f.size();
  Fn hf = ham(f);
  Fn r = f - lambda * hf - h;
  double res = sup_norm(r);
  const int cap = std::min(opts.max_iter, 500);
  int it = 0;
  SparseMatrix eye(n, n);
  eye.setIdentity();
  while (res > opts.tol_residual && it < cap) {
    ++it;
    SparseMatrix dh = ham.jacobian ? ham.jacobian(f) : finite_difference_jacobian(ham, f, hf);
    SparseMatrix jac = eye - lambda * dh;
    jac.makeCompressed();
    Fn step;
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(jac);
    if (lu.info() == Eigen::Success) step = lu.solve(-r);
    if (lu.info() != Eigen::Success || !step.allFinite()) {
      step = Matrix(jac).fullPivLu().solve(-r);
      if (!step.allFinite()) break;
    }
    // Backtracking on the Euclidean merit, termination in sup norm.
    const double merit = r.squaredNorm();
    double t = 1.0;
    bool accepted = false;
    Fn trial;
    Fn trial_hf;
    Fn trial_r;
    while (t > 1e-12) {
      trial = f + t * step;
      trial_hf = ham(trial);
      trial_r = trial - lambda * trial_hf - h;
      if (trial_r.allFinite() && trial_r.squaredNorm() <= (1.0 - 1e-4 * t) * merit) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    // The shipped monotone Hamiltonians are convex, so the residual map is
    // concave with M-matrix Jacobians: after one full step r <= 0 and later
    // steps increase f monotonically. The full step is then safe even when
    // it raises the Euclidean merit.
    if (!accepted && ham.monotone) {
      trial = f + step;
      trial_hf = ham(trial);
      trial_r = trial - lambda * trial_hf - h;
      accepted = trial_r.allFinite();
    }
    if (!accepted) break;
    f = std::move(trial);
    hf = std::move(trial_hf);
    r = std::move(trial_r);
    res = sup_norm(r);
  }
  out.converged = res <= opts.tol_residual;
  out.f = std::move(f);
  out.diag.iterations = it;
  out.diag.final_residual = res;
  return out;
}

}  // namespace

struct ResolventFamily::Cache {
  struct Entry {
    double lambda;
    Fn h;
    Fn f;
    SolveDiagnostics diag;
  };
  mutable std::mutex mutex;
  std::unordered_map<std::uint64_t, std::vector<Entry>> entries;
  std::size_t count = 0;
};

ResolventFamily::ResolventFamily(Hamiltonian h, SolverOptions opts)
    : h_(std::move(h)), opts_(opts), cache_(std::make_shared<Cache>()) {
  if (!h_.space || !h_.apply) throw StructuralError("resolvent family needs a Hamiltonian with a space");
  if (!(opts_.tol_residual > 0.0)) throw ParameterError("tol_residual must be positive");
  if (opts_.max_iter < 1) throw ParameterError("max_iter must be positive");
}

std::size_t ResolventFamily::cache_size() const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  return cache_->count;
}

void ResolventFamily::clear_cache() const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  cache_->entries.clear();
  cache_->count = 0;
}

double resolvent_residual(const Hamiltonian& h, double lambda, const Fn& f, const Fn& rhs) {
  return sup_norm(f - lambda * h(f) - rhs);
}

std::pair<Fn, SolveDiagnostics> ResolventFamily::solve(double lambda, const Fn& h) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("resolvent needs lambda > 0");
  if (h.size() != h_.size()) {
    std::ostringstream os;
    os << "right-hand side has " << h.size() << " entries, space has " << h_.size();
    throw StructuralError(os.str());
  }
  if (!h.allFinite()) throw ParameterError("right-hand side must be finite");

  const std::uint64_t key = cache_key(lambda, h);
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->entries.find(key);
    if (it != cache_->entries.end()) {
      for (const auto& e : it->second) {
        if (e.lambda == lambda && e.h == h) return {e.f, e.diag};
      }
    }
  }

  const std::optional<double> lip = h_.lipschitz_bound;
  const bool newton_enabled = std::isfinite(opts_.newton_switch);
  const bool use_newton = newton_enabled && (!lip || lambda * *lip > opts_.newton_switch);
  Outcome out;
  if (use_newton) {
    out = newton(h_, lambda, h, h, opts_);
  } else {
    if (!lip) throw ParameterError("no Lipschitz bound and Newton disabled");
    const double ll = lambda * *lip;
    if (!opts_.damping && ll >= 1.0) {
      throw ParameterError("lambda * L >= 1 needs damping or Newton");
    }
    const double omega = opts_.damping && ll > 0.0 ? std::min(1.0, 0.9 / ll) : 1.0;
    out = fixed_point(h_, lambda, h, h, omega, opts_);
    if (!out.converged && newton_enabled) {
      const int fp_iters = out.diag.iterations;
      out = newton(h_, lambda, h, out.f, opts_);
      out.diag.iterations += fp_iters;
    }
  }
  out.diag.converged = out.converged;
  if (!out.converged && !opts_.accept_unconverged) {
    std::ostringstream os;
    os << "resolvent solve did not converge at lambda = " << lambda << " (residual " << out.diag.final_residual
       << ", " << to_string(out.diag.method) << ")";
    throw SolverError(os.str(), out.f, out.diag.final_residual, out.diag.iterations);
  }

  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto& bucket = cache_->entries[key];
  for (const auto& e : bucket) {
    if (e.lambda == lambda && e.h == h) return {e.f, e.diag};
  }
  bucket.push_back({lambda, h, out.f, out.diag});
  ++cache_->count;
  return {out.f, out.diag};
}

std::pair<Fn, SolveDiagnostics> solve_resolvent(const ResolventFamily& r, double lambda, const Fn& h) {
  return r.solve(lambda, h);
}

IdentityReport check_pseudo_resolvent_identity(const ResolventFamily& r, double alpha, double beta, const Fn& h,
                                               double tol) {
  if (!(alpha > 0.0) || !(alpha < beta)) throw ParameterError("identity needs 0 < alpha < beta");
  IdentityReport rep;
  rep.alpha = alpha;
  rep.beta = beta;
  const Fn rb = r(beta, h);
  const Fn inner = rb - alpha * (rb - h) / beta;
  rep.residual = sup_norm(rb - r(alpha, inner));
  rep.pass = rep.residual <= tol;
  return rep;
}

ContractivityReport check_contractive(const ResolventFamily& r, double lambda,
                                      const std::vector<std::pair<Fn, Fn>>& pairs, double tol) {
  ContractivityReport rep;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Fn dh = pairs[k].first - pairs[k].second;
    const Fn df = r(lambda, pairs[k].first) - r(lambda, pairs[k].second);
    ++rep.checked;
    Index imax = 0;
    Index imin = 0;
    const double smax = df.maxCoeff(&imax);
    const double smin = df.minCoeff(&imin);
    if (smax > dh.maxCoeff() + tol) rep.violations.push_back({k, true, smax, dh.maxCoeff(), imax});
    if (smin < dh.minCoeff() - tol) rep.violations.push_back({k, false, smin, dh.minCoeff(), imin});
  }
  return rep;
}

namespace {

double max_on(const Fn& v, const IndexSet& set) {
  double m = -kInf;
  for (Index i : set) m = std::max(m, v[i]);
  return m;
}

}  // namespace

EquicontinuityFit estimate_equicontinuity(const std::vector<ResolventFamily>& rs, const SpaceSequence& seq,
                                          std::size_t q, const std::vector<EquiProbe>& probes,
                                          const EquicontinuityOptions& opts) {
  if (rs.size() != seq.count()) throw StructuralError("need one resolvent family per member");
  const std::size_t levels = seq.compacts.levels();
  if (q >= levels) throw ParameterError("compact level out of range");
  if (!(opts.delta > 0.0)) throw ParameterError("delta must be positive");
  if (opts.lambdas.empty()) throw ParameterError("equi-continuity needs a lambda grid");
  for (double l : opts.lambdas) {
    if (!(l > 0.0) || l > opts.lambda0) throw ParameterError("lambda grid must lie in (0, lambda0]");
  }
  const std::size_t top = std::min(levels - 1, opts.max_q_hat.value_or(levels - 1));
  const std::size_t first = opts.tail_start.value_or(0);
  if (first >= seq.count()) throw ParameterError("tail start beyond the last member");

  EquicontinuityFit fit;
  fit.q = q;
  fit.excess.assign(top + 1, -kInf);
  std::vector<std::size_t> wp(top + 1, 0);
  std::vector<std::size_t> wn(top + 1, 0);
  std::vector<double> wl(top + 1, 0.0);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const EquiProbe& probe = probes[p];
    if (probe.h1.count() != seq.count() || probe.h2.count() != seq.count()) {
      throw StructuralError("probe has the wrong number of members");
    }
    for (std::size_t n = first; n < seq.count(); ++n) {
      const Fn& a = probe.h1.members[n];
      const Fn& b = probe.h2.members[n];
      if (sup_norm(a) > opts.radius + 1e-12 || sup_norm(b) > opts.radius + 1e-12) {
        throw ParameterError("probe exceeds the radius r");
      }
      const Fn dh = a - b;
      for (double l : opts.lambdas) {
        const Fn df = rs[n](l, a) - rs[n](l, b);
        const double lhs = max_on(df, seq.compacts.member_sets[q][n]);
        for (std::size_t qh = 0; qh <= top; ++qh) {
          const double rhs = opts.delta * dh.maxCoeff() + max_on(dh, seq.compacts.member_sets[qh][n]);
          const double ex = lhs - rhs;
          if (ex > fit.excess[qh]) {
            fit.excess[qh] = ex;
            wp[qh] = p;
            wn[qh] = n;
            wl[qh] = l;
          }
        }
      }
    }
  }
  for (std::size_t qh = 0; qh <= top; ++qh) {
    if (fit.excess[qh] <= opts.tol) {
      fit.found = true;
      fit.q_hat = qh;
      break;
    }
  }
  const std::size_t w = fit.found ? fit.q_hat : top;
  fit.witness_probe = wp[w];
  fit.witness_n = wn[w];
  fit.witness_lambda = wl[w];
  return fit;
}

HhatGraph build_Hhat(const ResolventFamily& r, const std::vector<double>& lambda_grid, const std::vector<Fn>& h_set) {
  HhatGraph out;
  out.graph.kind = GraphKind::dagger;
  for (double l : lambda_grid) {
    for (const Fn& h : h_set) {
      const Fn f = r(l, h);
      out.graph.pairs.push_back({f, (f - h) / l});
      out.lambdas.push_back(l);
      out.sources.push_back(h);
    }
  }
  return out;
}

}  // namespace hjlab
