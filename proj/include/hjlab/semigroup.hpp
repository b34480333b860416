#pragma once

#include "hjlab/viscosity.hpp"

#include <optional>
#include <vector>

namespace hjlab {

struct SemigroupApprox {
  double t = 0.0;
  int n_steps = 1;
};

struct IterationResult {
  Fn value;
  std::vector<SolveDiagnostics> steps;
};

/// R(t/n)^n f. t = 0 returns f exactly.
IterationResult crandall_liggett(const ResolventFamily& r, double t, int n_steps, const Fn& f);
IterationResult crandall_liggett(const ResolventFamily& r, const SemigroupApprox& approx, const Fn& f);

struct TrendReport {
  std::vector<int> n_list;
  // Successive differences ||V_{n_k+1} - V_{n_k}||, or with an oracle the
  // absolute errors ||V_{n_k} - oracle||.
  std::vector<double> values;
  bool with_oracle = false;
  double slope = 0.0;  // least-squares slope of log(value) against log(n)
  bool monotone = true;
  bool pass = false;
};

TrendReport convergence_in_n(const ResolventFamily& r, double t, const Fn& f, const std::vector<int>& n_list,
                             double tol, const std::optional<Fn>& oracle = std::nullopt);

/// Least-squares slope of log y against log x over entries with y > 0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct AdaptiveResult {
  Fn value;
  int n_steps = 1;
  double last_change = 0.0;
  bool converged = false;
};

/// Doubles n_steps from `start` until successive outputs differ by at most
/// `target`, capped at `cap`.
AdaptiveResult adaptive_crandall_liggett(const ResolventFamily& r, double t, const Fn& f, double target,
                                         int start = 1, int cap = 1 << 16);

struct SemigroupExperiment {
  ConvergenceVerdict verdict;
  Fn limit_value;             // V(t) f on the limit space
  std::vector<int> n_steps;   // per member
  std::vector<double> changes;
  int limit_n_steps = 0;
  FnSequence values;          // V_n(t_n) f_n
};

/// LIM V_n(t_n) f_n = V(t) f. Checks LIM f_n = f first (PreconditionError
/// otherwise); step counts are chosen by doubling to tol / 10.
SemigroupExperiment semigroup_convergence_experiment(const std::vector<ResolventFamily>& rs,
                                                     const ResolventFamily& limit, const SpaceSequence& seq,
                                                     const std::vector<double>& t_n, double t, const FnSequence& f_n,
                                                     const Fn& f, const LimitOptions& opts, int cap = 1 << 16);

struct DensityCheck {
  std::vector<double> lambdas;
  std::vector<double> deviations;  // max over compacts of sup_K |R(l)h - h|
  bool monotone = true;
  bool below_tol = false;
  bool trivial_sub = false;    // h against 0 * G, subsolution
  bool trivial_super = false;  // h against 0 * G, supersolution
  bool pass = false;
};

/// LIM_k R(lambda_k) h = h along lambda_k decreasing to 0, plus h being a
/// sub- and supersolution for the zero-scaled graphs. `compacts` defaults to
/// the whole space.
DensityCheck density_check_zero_operator(const ResolventFamily& r, const Fn& h, const std::vector<double>& lambda_seq,
                                         double tol, const std::vector<IndexSet>& compacts = {});

/// e^{tA} by scaling and squaring.
Matrix rate_exponential(const Matrix& rates, double t);

/// log(e^{tA} e^{f}) componentwise, computed stably by shifting f by max f.
Fn logexp_oracle(const Matrix& rates, double t, const Fn& f);

}  // namespace hjlab
