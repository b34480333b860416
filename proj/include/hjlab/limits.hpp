#pragma once

#include "hjlab/spaces.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hjlab {

/// A function on a finite space is its value vector (one entry per point).
/// Extended-real functions use the same representation with +-inf allowed.
using Fn = Vector;
using ExtFn = Vector;

/// f_n on X_n, one value vector per member of a SpaceSequence.
struct FnSequence {
  std::vector<Vector> members;

  std::size_t count() const { return members.size(); }
  double sup_bound() const;  // sup_n ||f_n||
};

/// Throws StructuralError unless member n has size |X_n| for every n.
void check_shape(const SpaceSequence& seq, const FnSequence& fs);
void check_limit_shape(const SpaceSequence& seq, const Fn& f);

/// A user-registered sequence x_n in K_n^q converging to a limit point.
struct TrackedSequence {
  std::size_t q = 0;
  Index limit_point = 0;
  IndexSet member_points;  // one per member
};

struct LimitOptions {
  double tol = 1e-8;
  // First member index entering the tail n >= N0. Unset: count / 2.
  std::optional<std::size_t> tail_start;
  std::vector<TrackedSequence> extra;
};

std::size_t resolve_tail(const SpaceSequence& seq, const std::optional<std::size_t>& tail_start);

struct QVerdict {
  std::size_t q = 0;
  std::string name;
  double worst_dev = 0.0;
  Index witness_point = -1;  // limit point
  std::size_t witness_n = 0;
  bool trend = true;  // per-n deviations non-increasing on the tail
  std::vector<double> per_n;
};

struct ConvergenceVerdict {
  bool pass = true;
  double tol = 0.0;
  std::size_t tail_start = 0;
  double sup_bound = 0.0;
  std::vector<QVerdict> per_q;
  std::vector<std::string> warnings;
};

/// LIM f_n = f, checked along nearest-point sequences into every K_n^q (and
/// any registered sequences) on the tail.
ConvergenceVerdict check_LIM(const SpaceSequence& seq, const FnSequence& fs, const Fn& f,
                             const LimitOptions& opts = {});

/// Upper (or lower) semi-relaxed limit on the limit space.
struct Envelope {
  ExtFn values;
  std::vector<double> trend;  // per-n distance of f_n to the envelope on tracked points
  std::vector<std::string> warnings;
};

Envelope compute_LIMSUP(const SpaceSequence& seq, const FnSequence& fs,
                        const LimitOptions& opts = {});
Envelope compute_LIMINF(const SpaceSequence& seq, const FnSequence& fs,
                        const LimitOptions& opts = {});

struct SandwichVerdict {
  bool pass = false;
  double upper_excess = 0.0;  // max(LIMSUP - f)
  double lower_excess = 0.0;  // max(f - LIMINF)
  Index witness_point = -1;
  bool lim_consistent = true;  // pass implies check_LIM at the same tolerance
  ConvergenceVerdict lim;
};

SandwichVerdict sandwich_to_LIM(const SpaceSequence& seq, const FnSequence& fs, const Fn& f,
                                const LimitOptions& opts = {});

/// Pull back a limit-space function: h_n(y) = h(x) with x the nearest limit
/// point to eta_n(y). Satisfies ||h_n|| <= ||h||.
FnSequence lift_to_members(const SpaceSequence& seq, const Fn& h);

/// Samples a function of the embedded coordinates on every member and on the
/// limit space.
using CoordFunction = std::function<double(const Eigen::RowVectorXd&)>;
FnSequence sample_members(const SpaceSequence& seq, const CoordFunction& fn);
Fn sample_space(const FiniteSpace& space, const CoordFunction& fn);

/// Probes sharing (K, delta, r) for the strict-continuity estimate
///   sup_K |Tf - Tg| <= delta * C0 + C1 * sup_{K-hat} |f - g|.
struct StrictProbeGroup {
  IndexSet compact;
  double delta = 0.1;
  double radius = 1.0;
  std::vector<std::pair<Fn, Fn>> pairs;
};

struct StrictFit {
  bool found = false;
  std::size_t k_hat = 0;  // index into the candidate list
  double c0 = 0.0;
  double c1 = 0.0;
};

struct StrictFitOptions {
  double c0_max_per_radius = 2.0;  // C0 <= c0_max_per_radius * r
  double c1_max = 1.0;
};

using Operator = std::function<Fn(const Fn&)>;

std::vector<StrictFit> check_strict_continuity_estimate(const Operator& op,
                                                        const std::vector<StrictProbeGroup>& groups,
                                                        const std::vector<IndexSet>& candidates,
                                                        const StrictFitOptions& opts = {});

/// Norm-closedness of the LIM relation: the approximants <f^k, {f^k_n}> pass
/// check_LIM and converge in ||f|| v sup_n ||f_n|| to the limit pair, which
/// must then pass check_LIM at 3 * tol. Throws PreconditionError if an
/// approximant fails or the distances to the limit do not shrink to tol.
bool check_P_closedness(const SpaceSequence& seq,
                        const std::vector<std::pair<FnSequence, Fn>>& approximants,
                        const std::pair<FnSequence, Fn>& limit, const LimitOptions& opts = {});

/// Pointwise operations on sequences.
FnSequence operator+(const FnSequence& a, const FnSequence& b);
FnSequence operator-(const FnSequence& a, const FnSequence& b);
FnSequence scaled(const FnSequence& a, double c);
FnSequence min_with(const FnSequence& a, double c);
FnSequence max_with(const FnSequence& a, double c);

}  // namespace hjlab
