#include "hjlab/spaces.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace hjlab {

std::string FiniteSpace::label(Index i) const {
  if (!labels.empty()) return labels.at(static_cast<std::size_t>(i));
  return "p" + std::to_string(i);
}

SpacePtr make_space(Matrix coords, Vector period, std::vector<std::string> labels) {
  if (coords.cols() < 1) throw StructuralError("finite space: ambient dimension must be >= 1");
  if (period.size() == 0) period = Vector::Zero(coords.cols());
  if (period.size() != coords.cols()) {
    throw StructuralError("finite space: period vector length differs from ambient dimension");
  }
  if ((period.array() < 0.0).any()) throw StructuralError("finite space: negative period");
  if (!labels.empty()) {
    if (static_cast<Index>(labels.size()) != coords.rows()) {
      throw StructuralError("finite space: one label per point required");
    }
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw StructuralError("finite space: duplicate point labels");
  }
  auto space = std::make_shared<FiniteSpace>();
  space->coords = std::move(coords);
  space->period = std::move(period);
  space->labels = std::move(labels);
  return space;
}

double ambient_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                        const Eigen::Ref<const Eigen::RowVectorXd>& b, const Vector& period) {
  double sq = 0.0;
  for (Index k = 0; k < a.size(); ++k) {
    double d = std::abs(a[k] - b[k]);
    if (period.size() > k && period[k] > 0.0) {
      d = std::fmod(d, period[k]);
      d = std::min(d, period[k] - d);
    }
    sq += d * d;
  }
  return std::sqrt(sq);
}

SpacePtr make_grid(double lo, double hi, Index points, bool periodic) {
  if (!(hi > lo)) throw ConfigurationError("grid: degenerate domain");
  if (points < 2) throw ConfigurationError("grid: at least two points required");
  Matrix coords(points, 1);
  const double h = periodic ? (hi - lo) / static_cast<double>(points)
                            : (hi - lo) / static_cast<double>(points - 1);
  for (Index i = 0; i < points; ++i) coords(i, 0) = lo + h * static_cast<double>(i);
  Vector period = Vector::Constant(1, periodic ? hi - lo : 0.0);
  return make_space(std::move(coords), std::move(period));
}

IndexSet full_index_set(Index n) {
  IndexSet out(static_cast<std::size_t>(n));
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

namespace {

constexpr double kTieRel = 1e-9;

bool within_tie(double d, double dmin, double scale) {
  return d <= dmin * (1.0 + kTieRel) + 1e-14 * (1.0 + scale);
}

// Nearest candidates for 1-d embeddings: group subset points by coordinate
// value, binary search the groups.
std::vector<IndexSet> nearest_1d(const Matrix& from, const IndexSet& subset, const Matrix& targets,
                                 const IndexSet& target_subset, const Vector& period) {
  std::vector<std::pair<double, Index>> pts;
  pts.reserve(subset.size());
  for (Index i : subset) pts.emplace_back(from(i, 0), i);
  std::sort(pts.begin(), pts.end());
  std::vector<double> values;
  std::vector<IndexSet> groups;
  for (const auto& [v, i] : pts) {
    if (values.empty() || v != values.back()) {
      values.push_back(v);
      groups.emplace_back();
    }
    groups.back().push_back(i);
  }
  const bool periodic = period.size() > 0 && period[0] > 0.0;
  auto dist = [&](double a, double b) {
    double d = std::abs(a - b);
    if (periodic) {
      d = std::fmod(d, period[0]);
      d = std::min(d, period[0] - d);
    }
    return d;
  };
  std::vector<IndexSet> out;
  out.reserve(target_subset.size());
  const std::size_t g = values.size();
  for (Index t : target_subset) {
    const double x = targets(t, 0);
    IndexSet result;
    if (g > 0) {
      auto it = std::lower_bound(values.begin(), values.end(), x);
      const std::size_t p = static_cast<std::size_t>(it - values.begin());
      std::vector<std::size_t> cand;
      if (p < g) cand.push_back(p);
      if (p > 0) cand.push_back(p - 1);
      if (p + 1 < g) cand.push_back(p + 1);
      if (periodic) {
        cand.push_back(0);
        cand.push_back(g - 1);
      }
      double dmin = kInf;
      for (std::size_t c : cand) dmin = std::min(dmin, dist(values[c], x));
      std::set<std::size_t> chosen;
      for (std::size_t c : cand) {
        if (within_tie(dist(values[c], x), dmin, std::abs(x))) chosen.insert(c);
      }
      for (std::size_t c : chosen) result.insert(result.end(), groups[c].begin(), groups[c].end());
      std::sort(result.begin(), result.end());
    }
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace

std::vector<IndexSet> nearest_candidates(const Matrix& from, const IndexSet& subset,
                                         const Matrix& targets, const IndexSet& target_subset,
                                         const Vector& period) {
  if (from.cols() != targets.cols()) {
    throw StructuralError("nearest_candidates: embeddings live in different ambient dimensions");
  }
  if (from.cols() == 1) return nearest_1d(from, subset, targets, target_subset, period);
  std::vector<IndexSet> out;
  out.reserve(target_subset.size());
  std::vector<double> d(subset.size());
  for (Index t : target_subset) {
    double dmin = kInf;
    for (std::size_t k = 0; k < subset.size(); ++k) {
      d[k] = ambient_distance(from.row(subset[k]), targets.row(t), period);
      dmin = std::min(dmin, d[k]);
    }
    IndexSet result;
    const double scale = targets.row(t).cwiseAbs().maxCoeff();
    for (std::size_t k = 0; k < subset.size(); ++k) {
      if (within_tie(d[k], dmin, scale)) result.push_back(subset[k]);
    }
    out.push_back(std::move(result));
  }
  return out;
}

namespace {

std::shared_ptr<const TrackTable> build_tracks(const SpaceSequence& seq) {
  auto table = std::make_shared<TrackTable>();
  const auto& cf = seq.compacts;
  table->tracks.resize(cf.levels());
  for (std::size_t q = 0; q < cf.levels(); ++q) {
    const auto& lim = cf.limit_sets[q];
    auto& tq = table->tracks[q];
    tq.assign(lim.size(), std::vector<IndexSet>(seq.count()));
    for (std::size_t n = 0; n < seq.count(); ++n) {
      auto cand = nearest_candidates(seq.members[n]->coords, cf.member_sets[q][n],
                                     seq.limit->coords, lim, seq.limit->period);
      for (std::size_t k = 0; k < lim.size(); ++k) tq[k][n] = std::move(cand[k]);
    }
  }
  return table;
}

void check_index_set(const IndexSet& s, Index size, const char* what) {
  for (Index i : s) {
    if (i < 0 || i >= size) throw StructuralError(std::string(what) + ": index out of range");
  }
  if (!std::is_sorted(s.begin(), s.end())) throw StructuralError(std::string(what) + ": unsorted");
}

}  // namespace

void finalize_sequence(SpaceSequence& seq) {
  if (seq.members.size() < 3) throw StructuralError("space sequence: at least three members required");
  if (!seq.limit) throw StructuralError("space sequence: missing limit space");
  const Index d = seq.limit->dim();
  for (const auto& m : seq.members) {
    if (!m || m->dim() != d) throw StructuralError("space sequence: members embed into different dimensions");
  }
  const auto& cf = seq.compacts;
  if (cf.levels() == 0) throw StructuralError("space sequence: empty compact family");
  if (cf.member_sets.size() != cf.levels()) throw StructuralError("compact family: level count mismatch");
  for (std::size_t q = 0; q < cf.levels(); ++q) {
    if (cf.member_sets[q].size() != seq.count()) {
      throw StructuralError("compact family: one member set per space required");
    }
    check_index_set(cf.limit_sets[q], seq.limit->size(), "compact family limit set");
    for (std::size_t n = 0; n < seq.count(); ++n) {
      check_index_set(cf.member_sets[q][n], seq.members[n]->size(), "compact family member set");
    }
  }
  if (seq.spacing.size() == 0) seq.spacing = Vector::Zero(static_cast<Index>(seq.count()));
  seq.tracks = build_tracks(seq);
}

std::shared_ptr<const TrackTable> ensure_tracks(const SpaceSequence& seq) {
  return seq.tracks ? seq.tracks : build_tracks(seq);
}

namespace {

IndexSet points_in(const FiniteSpace& s, double a, double b) {
  IndexSet out;
  const double slack = 1e-12 * (1.0 + std::abs(a) + std::abs(b));
  for (Index i = 0; i < s.size(); ++i) {
    const double x = s.coords(i, 0);
    if (x >= a - slack && x <= b + slack) out.push_back(i);
  }
  return out;
}

std::vector<std::pair<double, double>> nested_intervals(double lo, double hi, int levels) {
  std::vector<std::pair<double, double>> out;
  const double c = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (int k = 0; k < levels; ++k) {
    if (k + 1 == levels) {
      out.emplace_back(lo, hi);
    } else {
      const double w = half * static_cast<double>(k + 1) / static_cast<double>(levels);
      out.emplace_back(c - w, c + w);
    }
  }
  return out;
}

}  // namespace

SpaceSequence make_grid_sequence(const GridSequenceSpec& spec) {
  if (spec.resolutions.empty()) throw ConfigurationError("grid sequence: empty resolution list");
  if (!(spec.hi > spec.lo)) throw ConfigurationError("grid sequence: degenerate domain");
  for (std::size_t i = 1; i < spec.resolutions.size(); ++i) {
    if (spec.resolutions[i] <= spec.resolutions[i - 1]) {
      throw ConfigurationError("grid sequence: resolutions must be strictly increasing");
    }
  }
  if (spec.limit_factor < 1) throw ConfigurationError("grid sequence: limit_factor must be >= 1");
  auto intervals = spec.intervals;
  if (intervals.empty()) {
    if (spec.q_levels < 1) throw ConfigurationError("grid sequence: q_levels must be >= 1");
    intervals = nested_intervals(spec.lo, spec.hi, spec.q_levels);
  }
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto [a, b] = intervals[k];
    if (!(b >= a)) throw ConfigurationError("grid sequence: interval with b < a");
    if (k > 0 && (a > intervals[k - 1].first || b < intervals[k - 1].second)) {
      throw ConfigurationError("grid sequence: compact intervals must be nested increasingly");
    }
  }

  SpaceSequence seq;
  const Index finest = spec.resolutions.back();
  for (Index r : spec.resolutions) {
    seq.members.push_back(make_grid(spec.lo, spec.hi, r, spec.periodic));
  }
  const Index limit_points =
      spec.periodic ? finest * spec.limit_factor : (finest - 1) * spec.limit_factor + 1;
  seq.limit = make_grid(spec.lo, spec.hi, limit_points, spec.periodic);
  seq.spacing.resize(static_cast<Index>(spec.resolutions.size()));
  for (std::size_t n = 0; n < spec.resolutions.size(); ++n) {
    const double r = static_cast<double>(spec.resolutions[n]);
    seq.spacing[static_cast<Index>(n)] = (spec.hi - spec.lo) / (spec.periodic ? r : r - 1.0);
  }
  auto& cf = seq.compacts;
  for (std::size_t q = 0; q < intervals.size(); ++q) {
    const auto [a, b] = intervals[q];
    cf.names.push_back("[" + std::to_string(a) + "," + std::to_string(b) + "]");
    cf.limit_sets.push_back(points_in(*seq.limit, a, b));
    std::vector<IndexSet> per_n;
    for (const auto& m : seq.members) per_n.push_back(points_in(*m, a, b));
    cf.member_sets.push_back(std::move(per_n));
  }
  finalize_sequence(seq);
  return seq;
}

EnlargedSpaceSequence trivial_enlargement(const SpaceSequence& seq) {
  EnlargedSpaceSequence out;
  out.base = seq;
  out.enlarged_limit = seq.limit;
  out.projection = full_index_set(seq.limit->size());
  for (const auto& m : seq.members) out.enlarged_embeddings.push_back(m->coords);
  out.enlarged_compacts = seq.compacts.limit_sets;
  return out;
}

EnlargedSpaceSequence make_product_sequence(const SpacePtr& slow, const SpacePtr& fast,
                                            const ProductOptions& opts) {
  if (!slow || !fast || slow->size() == 0 || fast->size() == 0) {
    throw ConfigurationError("product sequence: both factor spaces must be nonempty");
  }
  if (opts.count < 3) throw ConfigurationError("product sequence: at least three members required");
  const Index ns = slow->size();
  const Index nf = fast->size();
  const Index ds = slow->dim();
  const Index df = fast->dim();
  ProductLayout layout{ns, nf};

  Matrix eta(ns * nf, ds);
  Matrix eta_hat(ns * nf, ds + df);
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(ns * nf));
  for (Index x = 0; x < ns; ++x) {
    for (Index z = 0; z < nf; ++z) {
      const Index i = layout.index(x, z);
      eta.row(i) = slow->coords.row(x);
      eta_hat.row(i) << slow->coords.row(x), fast->coords.row(z);
      labels.push_back("(" + slow->label(x) + "," + fast->label(z) + ")");
    }
  }
  Vector period_hat(ds + df);
  period_hat << slow->period, fast->period;

  EnlargedSpaceSequence out;
  auto member = make_space(eta, slow->period, labels);
  for (std::size_t n = 0; n < opts.count; ++n) {
    out.base.members.push_back(member);
    out.enlarged_embeddings.push_back(eta_hat);
  }
  out.base.limit = slow;
  out.enlarged_limit = make_space(eta_hat, period_hat, labels);
  out.projection.resize(static_cast<std::size_t>(ns * nf));
  for (Index i = 0; i < ns * nf; ++i) out.projection[static_cast<std::size_t>(i)] = layout.slow_of(i);
  out.layout = layout;

  // Slow intervals: nested around the centre of the slow coordinate range.
  const double lo = slow->coords.col(0).minCoeff();
  const double hi = slow->coords.col(0).maxCoeff();
  std::vector<std::pair<double, double>> intervals;
  if (opts.q_levels <= 1 || !(hi > lo)) {
    intervals.emplace_back(lo, hi);
  } else {
    intervals = nested_intervals(lo, hi, opts.q_levels);
  }
  auto& cf = out.base.compacts;
  for (const auto& [a, b] : intervals) {
    IndexSet k1 = points_in(*slow, a, b);
    IndexSet prod;
    for (Index x : k1) {
      for (Index z = 0; z < nf; ++z) prod.push_back(layout.index(x, z));
    }
    cf.names.push_back("[" + std::to_string(a) + "," + std::to_string(b) + "]xZ");
    cf.limit_sets.push_back(k1);
    cf.member_sets.emplace_back(opts.count, prod);
    out.enlarged_compacts.push_back(prod);
  }
  out.base.spacing = Vector::Zero(static_cast<Index>(opts.count));
  finalize_sequence(out.base);
  return out;
}

CompactAudit audit_compacts(const SpaceSequence& seq, double tol, std::size_t first_checked) {
  CompactAudit audit;
  const auto& cf = seq.compacts;
  for (std::size_t q = 1; q < cf.levels(); ++q) {
    auto subset = [](const IndexSet& a, const IndexSet& b) {
      return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    if (!subset(cf.limit_sets[q - 1], cf.limit_sets[q])) audit.monotone = false;
    for (std::size_t n = 0; n < seq.count(); ++n) {
      if (!subset(cf.member_sets[q - 1][n], cf.member_sets[q][n])) audit.monotone = false;
    }
  }
  audit.covering = static_cast<Index>(cf.limit_sets.back().size()) == seq.limit->size();

  audit.hausdorff.assign(cf.levels(), std::vector<double>(seq.count(), 0.0));
  for (std::size_t q = 0; q < cf.levels(); ++q) {
    for (std::size_t n = 0; n < seq.count(); ++n) {
      const auto& mem = cf.member_sets[q][n];
      const auto& lim = cf.limit_sets[q];
      const Matrix& mc = seq.members[n]->coords;
      const Matrix& lc = seq.limit->coords;
      double h = 0.0;
      if (mem.empty() != lim.empty()) {
        h = kInf;
      } else if (!mem.empty()) {
        auto forward = nearest_candidates(lc, lim, mc, mem, seq.limit->period);
        for (std::size_t k = 0; k < mem.size(); ++k) {
          h = std::max(h, ambient_distance(mc.row(mem[k]), lc.row(forward[k].front()), seq.limit->period));
        }
        auto backward = nearest_candidates(mc, mem, lc, lim, seq.limit->period);
        for (std::size_t k = 0; k < lim.size(); ++k) {
          h = std::max(h, ambient_distance(lc.row(lim[k]), mc.row(backward[k].front()), seq.limit->period));
        }
      }
      audit.hausdorff[q][n] = h;
      if (n >= first_checked && h > tol) audit.convergent = false;
    }
  }
  return audit;
}

bool check_enlargement(const EnlargedSpaceSequence& seq) {
  const auto& y = *seq.enlarged_limit;
  const auto& x = *seq.base.limit;
  if (static_cast<Index>(seq.projection.size()) != y.size()) return false;
  const Index d = x.dim();
  if (y.dim() < d) return false;
  std::vector<bool> hit(static_cast<std::size_t>(x.size()), false);
  for (Index i = 0; i < y.size(); ++i) {
    const Index g = seq.projection[static_cast<std::size_t>(i)];
    if (g < 0 || g >= x.size()) return false;
    hit[static_cast<std::size_t>(g)] = true;
    // Exact equality of embedded coordinates.
    if (!(x.coords.row(g) == y.coords.row(i).head(d))) return false;
  }
  if (std::find(hit.begin(), hit.end(), false) != hit.end()) return false;
  const auto& cf = seq.base.compacts;
  if (seq.enlarged_compacts.size() != cf.levels()) return false;
  for (std::size_t q = 0; q < cf.levels(); ++q) {
    for (Index i : seq.enlarged_compacts[q]) {
      const Index g = seq.projection[static_cast<std::size_t>(i)];
      if (!std::binary_search(cf.limit_sets[q].begin(), cf.limit_sets[q].end(), g)) return false;
    }
  }
  for (std::size_t n = 0; n < seq.base.count(); ++n) {
    const Matrix& hat = seq.enlarged_embeddings[n];
    if (hat.rows() != seq.base.members[n]->size()) return false;
    if (!(hat.leftCols(d) == seq.base.members[n]->coords)) return false;
  }
  return true;
}

KuratowskiResult kuratowski_limits(const std::vector<Matrix>& sets, const Matrix& candidates,
                                   double eps, const Vector& period,
                                   std::optional<std::size_t> tail_start) {
  if (!(eps > 0.0)) throw ParameterError("kuratowski_limits: eps must be positive");
  KuratowskiResult res;
  if (sets.empty()) return res;
  const std::size_t start = tail_start.value_or(sets.size() / 2);
  if (start >= sets.size()) throw ParameterError("kuratowski_limits: tail_start beyond the sequence");
  for (Index c = 0; c < candidates.rows(); ++c) {
    double dmin = kInf;
    double dmax = 0.0;
    for (std::size_t n = start; n < sets.size(); ++n) {
      double d = kInf;
      for (Index i = 0; i < sets[n].rows(); ++i) {
        d = std::min(d, ambient_distance(sets[n].row(i), candidates.row(c), period));
      }
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
    if (dmin <= eps) res.limsup.push_back(c);
    if (dmax <= eps) res.liminf.push_back(c);
  }
  return res;
}

}  // namespace hjlab
