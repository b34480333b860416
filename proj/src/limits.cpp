#include "hjlab/limits.hpp"

#include <algorithm>

namespace hjlab {

double FnSequence::sup_bound() const {
  double s = 0.0;
  for (const auto& m : members) s = std::max(s, sup_norm(m));
  return s;
}

void check_shape(const SpaceSequence& seq, const FnSequence& fs) {
  if (fs.count() != seq.count()) {
    throw StructuralError("function sequence: member count differs from the space sequence");
  }
  for (std::size_t n = 0; n < fs.count(); ++n) {
    if (fs.members[n].size() != seq.members[n]->size()) {
      throw StructuralError("function sequence: member " + std::to_string(n) +
                            " does not live on the matching space");
    }
  }
}

void check_limit_shape(const SpaceSequence& seq, const Fn& f) {
  if (f.size() != seq.limit->size()) {
    throw StructuralError("limit function does not live on the limit space");
  }
}

std::size_t resolve_tail(const SpaceSequence& seq, const std::optional<std::size_t>& tail_start) {
  const std::size_t t = tail_start.value_or(seq.count() / 2);
  if (t >= seq.count()) throw ParameterError("tail start must be below the number of members");
  return t;
}

namespace {

bool non_increasing(const std::vector<double>& v, std::size_t from) {
  for (std::size_t n = from + 1; n < v.size(); ++n) {
    if (v[n] > v[n - 1] * (1.0 + 1e-9) + 1e-14) return false;
  }
  return true;
}

void check_extra(const SpaceSequence& seq, const TrackedSequence& t) {
  if (t.q >= seq.compacts.levels()) throw StructuralError("tracked sequence: unknown compact level");
  if (t.member_points.size() != seq.count()) {
    throw StructuralError("tracked sequence: one point per member required");
  }
  const auto& lim = seq.compacts.limit_sets[t.q];
  if (!std::binary_search(lim.begin(), lim.end(), t.limit_point)) {
    throw StructuralError("tracked sequence: limit point outside K^q");
  }
  for (std::size_t n = 0; n < seq.count(); ++n) {
    const auto& mem = seq.compacts.member_sets[t.q][n];
    if (!std::binary_search(mem.begin(), mem.end(), t.member_points[n])) {
      throw StructuralError("tracked sequence: point outside K_n^q");
    }
  }
}

}  // namespace

ConvergenceVerdict check_LIM(const SpaceSequence& seq, const FnSequence& fs, const Fn& f,
                             const LimitOptions& opts) {
  check_shape(seq, fs);
  check_limit_shape(seq, f);
  if (!(opts.tol > 0.0)) throw ParameterError("check_LIM: tol must be positive");
  for (const auto& t : opts.extra) check_extra(seq, t);
  const auto tracks = ensure_tracks(seq);
  ConvergenceVerdict v;
  v.tol = opts.tol;
  v.tail_start = resolve_tail(seq, opts.tail_start);
  v.sup_bound = fs.sup_bound();
  bool bounded = std::isfinite(v.sup_bound) && all_finite(f);
  if (!bounded) {
    v.pass = false;
    v.warnings.push_back("sequence or limit is not bounded");
  }

  const auto& cf = seq.compacts;
  for (std::size_t q = 0; q < cf.levels(); ++q) {
    QVerdict qv;
    qv.q = q;
    qv.name = cf.names.size() > q ? cf.names[q] : std::to_string(q);
    qv.per_n.assign(seq.count(), 0.0);
    std::vector<Index> per_n_witness(seq.count(), -1);
    const auto& lim = cf.limit_sets[q];
    for (std::size_t k = 0; k < lim.size(); ++k) {
      const double fx = f[lim[k]];
      for (std::size_t n = 0; n < seq.count(); ++n) {
        for (Index c : tracks->tracks[q][k][n]) {
          const double d = std::abs(fs.members[n][c] - fx);
          if (!(d <= qv.per_n[n])) {
            qv.per_n[n] = std::isnan(d) ? kInf : d;
            per_n_witness[n] = lim[k];
          }
        }
      }
    }
    for (const auto& t : opts.extra) {
      if (t.q != q) continue;
      const double fx = f[t.limit_point];
      for (std::size_t n = 0; n < seq.count(); ++n) {
        const double d = std::abs(fs.members[n][t.member_points[n]] - fx);
        if (!(d <= qv.per_n[n])) {
          qv.per_n[n] = std::isnan(d) ? kInf : d;
          per_n_witness[n] = t.limit_point;
        }
      }
    }
    for (std::size_t n = v.tail_start; n < seq.count(); ++n) {
      if (qv.per_n[n] > qv.worst_dev || qv.witness_point < 0) {
        qv.worst_dev = qv.per_n[n];
        qv.witness_point = per_n_witness[n];
        qv.witness_n = n;
      }
    }
    qv.trend = non_increasing(qv.per_n, v.tail_start);
    if (!qv.trend) v.warnings.push_back("deviation trend not monotone on level " + qv.name);
    if (!(qv.worst_dev <= opts.tol)) v.pass = false;
    v.per_q.push_back(std::move(qv));
  }
  return v;
}

namespace {

Envelope upper_envelope(const SpaceSequence& seq, const FnSequence& fs, const LimitOptions& opts,
                        const char* what) {
  check_shape(seq, fs);
  for (const auto& t : opts.extra) check_extra(seq, t);
  for (std::size_t n = 0; n < fs.count(); ++n) {
    const auto& m = fs.members[n];
    for (Index i = 0; i < m.size(); ++i) {
      if (std::isnan(m[i]) || m[i] == kInf) {
        throw PreconditionError(std::string(what) + ": sequence unbounded at member n = " +
                                std::to_string(n));
      }
    }
  }
  const auto tracks = ensure_tracks(seq);
  const std::size_t tail = resolve_tail(seq, opts.tail_start);
  const Index nl = seq.limit->size();
  Envelope env;
  env.values = Vector::Constant(nl, -kInf);
  // best[n](x): max over tracked candidates of f_n, used for the trend.
  Matrix best = Matrix::Constant(static_cast<Index>(seq.count()), nl, -kInf);
  const auto& cf = seq.compacts;
  for (std::size_t q = 0; q < cf.levels(); ++q) {
    const auto& lim = cf.limit_sets[q];
    for (std::size_t k = 0; k < lim.size(); ++k) {
      for (std::size_t n = 0; n < seq.count(); ++n) {
        for (Index c : tracks->tracks[q][k][n]) {
          best(static_cast<Index>(n), lim[k]) = std::max(best(static_cast<Index>(n), lim[k]), fs.members[n][c]);
        }
      }
    }
  }
  for (const auto& t : opts.extra) {
    for (std::size_t n = 0; n < seq.count(); ++n) {
      best(static_cast<Index>(n), t.limit_point) =
          std::max(best(static_cast<Index>(n), t.limit_point), fs.members[n][t.member_points[n]]);
    }
  }
  for (std::size_t n = tail; n < seq.count(); ++n) {
    env.values = env.values.cwiseMax(best.row(static_cast<Index>(n)).transpose());
  }
  env.trend.assign(seq.count(), 0.0);
  for (std::size_t n = 0; n < seq.count(); ++n) {
    double d = 0.0;
    for (Index x = 0; x < nl; ++x) {
      if (std::isfinite(env.values[x]) && std::isfinite(best(static_cast<Index>(n), x))) {
        d = std::max(d, std::abs(env.values[x] - best(static_cast<Index>(n), x)));
      }
    }
    env.trend[n] = d;
  }
  if (!non_increasing(env.trend, tail)) {
    env.warnings.push_back(std::string(what) + ": tail deviations are not monotone; the finite-tail "
                           "maximum may not represent the limit");
  }
  return env;
}

}  // namespace

Envelope compute_LIMSUP(const SpaceSequence& seq, const FnSequence& fs, const LimitOptions& opts) {
  return upper_envelope(seq, fs, opts, "LIMSUP");
}

Envelope compute_LIMINF(const SpaceSequence& seq, const FnSequence& fs, const LimitOptions& opts) {
  Envelope env = upper_envelope(seq, scaled(fs, -1.0), opts, "LIMINF");
  env.values = -env.values;
  return env;
}

SandwichVerdict sandwich_to_LIM(const SpaceSequence& seq, const FnSequence& fs, const Fn& f,
                                const LimitOptions& opts) {
  check_limit_shape(seq, f);
  const Envelope up = compute_LIMSUP(seq, fs, opts);
  const Envelope lo = compute_LIMINF(seq, fs, opts);
  SandwichVerdict v;
  v.upper_excess = -kInf;
  v.lower_excess = -kInf;
  double worst = -kInf;
  for (Index x = 0; x < f.size(); ++x) {
    if (!std::isfinite(up.values[x]) || !std::isfinite(lo.values[x])) continue;
    const double ue = up.values[x] - f[x];
    const double le = f[x] - lo.values[x];
    v.upper_excess = std::max(v.upper_excess, ue);
    v.lower_excess = std::max(v.lower_excess, le);
    if (std::max(ue, le) > worst) {
      worst = std::max(ue, le);
      v.witness_point = x;
    }
  }
  v.pass = v.upper_excess <= opts.tol && v.lower_excess <= opts.tol;
  v.lim = check_LIM(seq, fs, f, opts);
  v.lim_consistent = !v.pass || v.lim.pass;
  return v;
}

FnSequence lift_to_members(const SpaceSequence& seq, const Fn& h) {
  check_limit_shape(seq, h);
  FnSequence out;
  const IndexSet all_limit = full_index_set(seq.limit->size());
  for (const auto& m : seq.members) {
    auto cand = nearest_candidates(seq.limit->coords, all_limit, m->coords, full_index_set(m->size()),
                                   seq.limit->period);
    Vector v(m->size());
    for (Index i = 0; i < m->size(); ++i) v[i] = h[cand[static_cast<std::size_t>(i)].front()];
    out.members.push_back(std::move(v));
  }
  return out;
}

Fn sample_space(const FiniteSpace& space, const CoordFunction& fn) {
  Fn v(space.size());
  for (Index i = 0; i < space.size(); ++i) v[i] = fn(space.coords.row(i));
  return v;
}

FnSequence sample_members(const SpaceSequence& seq, const CoordFunction& fn) {
  FnSequence out;
  for (const auto& m : seq.members) out.members.push_back(sample_space(*m, fn));
  return out;
}

namespace {

double sup_on(const Fn& v, const IndexSet& set) {
  double s = 0.0;
  for (Index i : set) s = std::max(s, std::abs(v[i]));
  return s;
}

}  // namespace

std::vector<StrictFit> check_strict_continuity_estimate(const Operator& op,
                                                        const std::vector<StrictProbeGroup>& groups,
                                                        const std::vector<IndexSet>& candidates,
                                                        const StrictFitOptions& opts) {
  std::vector<StrictFit> fits;
  for (const auto& g : groups) {
    if (!(g.delta > 0.0)) throw ParameterError("strict continuity: delta must be positive");
    std::vector<double> lhs;
    std::vector<Fn> diffs;
    for (const auto& [f, h] : g.pairs) {
      if (std::max(sup_norm(f), sup_norm(h)) > g.radius * (1.0 + 1e-12)) {
        throw ParameterError("strict continuity: probe exceeds the radius r");
      }
      lhs.push_back(sup_on(op(f) - op(h), g.compact));
      diffs.push_back(f - h);
    }
    StrictFit fit;
    for (std::size_t j = 0; j < candidates.size() && !fit.found; ++j) {
      std::vector<double> rhs;
      double c1 = 0.0;
      for (std::size_t i = 0; i < diffs.size(); ++i) {
        rhs.push_back(sup_on(diffs[i], candidates[j]));
        if (rhs[i] > 0.0) c1 = std::max(c1, lhs[i] / rhs[i]);
      }
      c1 = std::min(c1, opts.c1_max);
      double c0 = 0.0;
      for (std::size_t i = 0; i < diffs.size(); ++i) {
        c0 = std::max(c0, (lhs[i] - c1 * rhs[i]) / g.delta);
      }
      if (c0 <= opts.c0_max_per_radius * g.radius) {
        fit = StrictFit{true, j, c0, c1};
      }
    }
    fits.push_back(fit);
  }
  return fits;
}

bool check_P_closedness(const SpaceSequence& seq,
                        const std::vector<std::pair<FnSequence, Fn>>& approximants,
                        const std::pair<FnSequence, Fn>& limit, const LimitOptions& opts) {
  if (approximants.empty()) throw PreconditionError("P-closedness: no approximants supplied");
  double prev = kInf;
  for (std::size_t k = 0; k < approximants.size(); ++k) {
    const auto& [fs, f] = approximants[k];
    if (!check_LIM(seq, fs, f, opts).pass) {
      throw PreconditionError("P-closedness: approximant " + std::to_string(k) + " fails check_LIM");
    }
    double dist = sup_norm(f - limit.second);
    for (std::size_t n = 0; n < seq.count(); ++n) {
      dist = std::max(dist, sup_norm(fs.members[n] - limit.first.members[n]));
    }
    if (dist > prev * (1.0 + 1e-12) + 1e-15) {
      throw PreconditionError("P-closedness: approximants are not converging in norm");
    }
    prev = dist;
  }
  if (prev > opts.tol) throw PreconditionError("P-closedness: approximants do not reach the limit pair");
  LimitOptions wide = opts;
  wide.tol = 3.0 * opts.tol;
  return check_LIM(seq, limit.first, limit.second, wide).pass;
}

namespace {

template <typename Op>
FnSequence zip(const FnSequence& a, const FnSequence& b, Op op) {
  if (a.count() != b.count()) throw StructuralError("function sequences of different length");
  FnSequence out;
  for (std::size_t n = 0; n < a.count(); ++n) {
    if (a.members[n].size() != b.members[n].size()) throw StructuralError("member size mismatch");
    out.members.push_back(op(a.members[n], b.members[n]));
  }
  return out;
}

}  // namespace

FnSequence operator+(const FnSequence& a, const FnSequence& b) {
  return zip(a, b, [](const Vector& x, const Vector& y) -> Vector { return x + y; });
}

FnSequence operator-(const FnSequence& a, const FnSequence& b) {
  return zip(a, b, [](const Vector& x, const Vector& y) -> Vector { return x - y; });
}

FnSequence scaled(const FnSequence& a, double c) {
  FnSequence out;
  for (const auto& m : a.members) out.members.push_back(c * m);
  return out;
}

FnSequence min_with(const FnSequence& a, double c) {
  FnSequence out;
  for (const auto& m : a.members) out.members.push_back(m.cwiseMin(c));
  return out;
}

FnSequence max_with(const FnSequence& a, double c) {
  FnSequence out;
  for (const auto& m : a.members) out.members.push_back(m.cwiseMax(c));
  return out;
}

}  // namespace hjlab
