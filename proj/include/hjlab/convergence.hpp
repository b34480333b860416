#pragma once

#include "hjlab/semigroup.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hjlab {

using OperatorMember = std::variant<Hamiltonian, OperatorGraph>;

/// H_n per member of a (possibly trivially) enlarged space sequence, with the
/// limit operators on (X, Y).
struct OperatorSequence {
  EnlargedSpaceSequence spaces;
  std::vector<OperatorMember> members;
  EnlargedOperatorGraph limit_dagger;
  EnlargedOperatorGraph limit_ddagger;

  const SpaceSequence& base() const { return spaces.base; }
  std::size_t count() const { return members.size(); }
};

/// Throws StructuralError unless every member lives on the matching space.
void validate_operator_sequence(const OperatorSequence& hs);

/// Hamiltonian members over the trivial enlargement of `seq`.
OperatorSequence make_operator_sequence(const SpaceSequence& seq, std::vector<Hamiltonian> members);
OperatorSequence make_operator_sequence(const EnlargedSpaceSequence& seq, std::vector<Hamiltonian> members);

/// {(phi, H phi)} on the limit side; g lives on Y via the projection.
EnlargedOperatorGraph limit_graph(const Hamiltonian& h, const std::vector<Fn>& test_functions,
                                  const IndexSet& projection, GraphKind kind);

struct Witnesses {
  FnSequence f;
  FnSequence g;
};

/// f_n = nearest-point pullback of f, g_n = H_n f_n. Needs Hamiltonian members.
Witnesses lift_witnesses(const OperatorSequence& hs, const Fn& f);

struct ExLimOptions {
  LimitOptions lim;
  double membership_tol = 1e-9;
};

struct ExLimReport {
  bool pass = false;
  ConvergenceVerdict f_verdict;
  ConvergenceVerdict g_verdict;
};

/// (f, g) in ex-LIM H_n through the witnesses: LIM f_n = f and LIM g_n = g.
/// Throws StructuralError when a witness is not in its member operator.
ExLimReport check_ex_lim(const OperatorSequence& hs, const GraphPair& pair, const Witnesses& w,
                         const ExLimOptions& opts = {});

struct TruncationCheck {
  double c = 0.0;
  bool pass = false;
  double worst_dev = 0.0;
};

struct SequenceBound {
  std::size_t q = 0;
  Index y = -1;            // point of Y
  bool applicable = false; // f_n(z_n) -> f(gamma y) along the tracked sequence
  double limit = 0.0;      // limsup g_n(z_n) (liminf for super-limits)
  double bound = 0.0;      // g(y)
  bool pass = true;
};

struct WitnessBundle {
  Witnesses witnesses;
  bool structural_ok = true;
  std::vector<std::string> structural_issues;
  std::vector<TruncationCheck> truncation;
  double g_bound = 0.0;  // sup_n sup g_n (inf_n inf g_n)
  bool g_bounded = false;
  std::vector<SequenceBound> sequences;
  std::size_t applicable = 0;
  double worst_excess = 0.0;
  bool pass = false;
};

/// Extended sub-limit: LIM f_n ^ c = f ^ c on the c-grid {-2M, -M, 0, M, 2M}
/// with M = ||f||, sup_n sup g_n < inf, and limsup g_n(z_n) <= g(y) + tol for
/// every tracked z_n in K_n^q approaching y in K-hat^q with f_n(z_n) -> f(gamma y).
WitnessBundle check_ex_sublim(const OperatorSequence& hs, const GraphPair& pair, const Witnesses& w,
                              const ExLimOptions& opts = {});
/// Mirror image with f_n v c, inf_n inf g_n > -inf and liminf >= g(y) - tol.
WitnessBundle check_ex_superlim(const OperatorSequence& hs, const GraphPair& pair, const Witnesses& w,
                                const ExLimOptions& opts = {});

/// Runs fn(i) for i < count on up to `jobs` threads. Exceptions are rethrown
/// in index order.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

struct EnvelopePair {
  ExtFn upper;
  ExtFn lower;
  FnSequence solutions;
  std::vector<double> residuals;  // per member, sup |u_n - lambda H_n u_n - h_n|
  bool all_converged = true;
  double gap = 0.0;  // max(upper - lower) over the top limit compact
  Index gap_point = -1;
  std::vector<std::string> warnings;
};

/// LIMSUP and LIMINF of R_n(lambda) h_n, after checking LIMSUP h_n <= h and
/// LIMINF h_n >= h within tol.
EnvelopePair barles_perthame_envelopes(const std::vector<ResolventFamily>& rs, const SpaceSequence& seq,
                                       const FnSequence& h_n, const Fn& h, double lambda,
                                       const LimitOptions& opts = {}, int jobs = 1);

struct ConditionItem {
  std::string label;
  bool pass = false;
  std::string detail;
};

struct CellResult {
  std::size_t probe = 0;
  double lambda = 0.0;
  double gap = 0.0;
  Index gap_point = -1;
  bool envelopes_coincide = false;
  Fn limit_value;
  ConvergenceVerdict lim;
  bool transfer_sub = true;
  bool transfer_super = true;
  std::optional<double> direct_error;
};

struct ResolventExperimentOptions {
  LimitOptions lim;
  // Tolerance for the condition harness (witness limits); unset: lim.tol.
  std::optional<double> condition_tol;
  SolverOptions solver;
  // Limit-space Hamiltonian for the direct-solve comparison.
  std::optional<Hamiltonian> limit_hamiltonian;
  std::vector<std::pair<double, double>> identity_pairs;  // default: consecutive lambdas
  double identity_factor = 10.0;
  bool check_equicontinuity = true;
  std::size_t equi_q = 0;
  EquicontinuityOptions equi;
  // Builds witnesses for a limit pair; default lift_witnesses.
  std::function<Witnesses(const OperatorSequence&, const GraphPair&)> witness_builder;
  int jobs = 1;
};

struct ResolventExperimentReport {
  bool pass = false;
  std::vector<ConditionItem> condition;
  std::vector<CellResult> cells;
  std::vector<IdentityReport> limit_identity;
  std::optional<EquicontinuityFit> equicontinuity;
  std::vector<StrictFit> limit_strict_fit;
  std::vector<std::string> warnings;
};

/// Full pipeline: the four hypothesis checks, then for every h in D and
/// lambda the envelopes, their common value R(lambda)h and LIM R_n h_n = R h,
/// then the pseudo-resolvent identity and a strict-continuity fit for the
/// induced limit family.
ResolventExperimentReport resolvent_convergence_experiment(const OperatorSequence& hs, const std::vector<Fn>& d,
                                                           const std::vector<double>& lambda_grid,
                                                           const ResolventExperimentOptions& opts);

struct AveragingReport {
  std::vector<double> n_values;
  std::vector<double> oscillation;  // max_x (max_z - min_z) of R_n(lambda) h
  std::vector<double> error;        // sup |R_n(lambda) h - R_bar(lambda) h o gamma|
  double order = 0.0;               // -slope of log oscillation against log n
  double final_error = 0.0;
};

/// Slow-fast averaging: R_n(lambda) h for H_n = slowfast_hamiltonian(n) with
/// h depending on the slow variable only, against the averaged resolvent.
AveragingReport slowfast_averaging_experiment(const EnlargedSpaceSequence& product, const SlowFastCoupling& coupling,
                                              const Fn& h_slow, double lambda, const std::vector<double>& n_values,
                                              const SolverOptions& solver = {}, int jobs = 1);

/// max over slow points of (max_z f - min_z f).
double fast_oscillation(const ProductLayout& layout, const Fn& f);

}  // namespace hjlab
