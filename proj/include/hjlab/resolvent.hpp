#pragma once

#include "hjlab/operators.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hjlab {

struct SolverOptions {
  double tol_residual = 1e-10;
  int max_iter = 20000;
  // Damped fixed point is allowed when a Lipschitz bound is known.
  bool damping = true;
  // Use Newton once lambda * L exceeds this (or when L is unknown). +inf
  // disables Newton.
  double newton_switch = 1.0;
  // Return the best iterate instead of throwing when a solve does not
  // converge; its residual is left in the diagnostics. For schemes whose
  // discrete equation may have no solution.
  bool accept_unconverged = false;
};

enum class SolveMethod { damped_fixed_point, newton };

const char* to_string(SolveMethod m);

struct SolveDiagnostics {
  double lambda = 0.0;
  int iterations = 0;
  double final_residual = 0.0;
  SolveMethod method = SolveMethod::newton;
  bool converged = true;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, Fn best, double residual, int iterations)
      : Error(what), best_(std::move(best)), residual_(residual), iterations_(iterations) {}
  const Fn& best_iterate() const { return best_; }
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  Fn best_;
  double residual_;
  int iterations_;
};

/// lambda -> R(lambda), the solution map of f - lambda H f = h. Copies share
/// the solution cache.
class ResolventFamily {
 public:
  explicit ResolventFamily(Hamiltonian h, SolverOptions opts = {});

  std::pair<Fn, SolveDiagnostics> solve(double lambda, const Fn& h) const;
  Fn operator()(double lambda, const Fn& h) const { return solve(lambda, h).first; }

  const Hamiltonian& hamiltonian() const { return h_; }
  const SolverOptions& options() const { return opts_; }
  std::size_t cache_size() const;
  void clear_cache() const;

 private:
  struct Cache;
  Hamiltonian h_;
  SolverOptions opts_;
  std::shared_ptr<Cache> cache_;
};

/// sup |f - lambda H f - h|.
double resolvent_residual(const Hamiltonian& h, double lambda, const Fn& f, const Fn& rhs);

std::pair<Fn, SolveDiagnostics> solve_resolvent(const ResolventFamily& r, double lambda, const Fn& h);

struct IdentityReport {
  double alpha = 0.0;
  double beta = 0.0;
  double residual = 0.0;  // ||R(b)h - R(a)(R(b)h - a (R(b)h - h) / b)||
  bool pass = false;
};

/// R(beta)h = R(alpha)(R(beta)h - alpha (R(beta)h - h) / beta) for alpha < beta.
IdentityReport check_pseudo_resolvent_identity(const ResolventFamily& r, double alpha, double beta,
                                               const Fn& h, double tol);

struct ContractivityViolation {
  std::size_t pair = 0;
  bool sup_side = true;  // false: the inf inequality failed
  double lhs = 0.0;
  double rhs = 0.0;
  Index witness = -1;
};

struct ContractivityReport {
  std::size_t checked = 0;
  std::vector<ContractivityViolation> violations;
  bool pass() const { return violations.empty(); }
};

/// sup(Rh1 - Rh2) <= sup(h1 - h2) and inf(Rh1 - Rh2) >= inf(h1 - h2), up to tol.
ContractivityReport check_contractive(const ResolventFamily& r, double lambda,
                                      const std::vector<std::pair<Fn, Fn>>& pairs, double tol = 1e-9);

/// Probe pair (h1_n, h2_n) per member.
struct EquiProbe {
  FnSequence h1;
  FnSequence h2;
};

struct EquicontinuityOptions {
  double delta = 0.1;
  double radius = 1.0;
  std::vector<double> lambdas;  // all in (0, lambda0]
  double lambda0 = 1.0;
  // Largest candidate level for q-hat. Unset: every level.
  std::optional<std::size_t> max_q_hat;
  double tol = 1e-9;
  std::optional<std::size_t> tail_start;  // unset: every member
};

struct EquicontinuityFit {
  bool found = false;
  std::size_t q = 0;
  std::size_t q_hat = 0;
  // Per candidate q-hat: worst excess of the left side over the right side.
  std::vector<double> excess;
  std::size_t witness_probe = 0;
  std::size_t witness_n = 0;
  double witness_lambda = 0.0;
};

/// Smallest q-hat with
///   sup_{K_n^q}(R_n h1 - R_n h2) <= delta sup(h1 - h2) + sup_{K_n^q-hat}(h1 - h2)
/// for every probe, member and lambda. Probes must satisfy ||h_i|| <= r.
EquicontinuityFit estimate_equicontinuity(const std::vector<ResolventFamily>& rs, const SpaceSequence& seq,
                                          std::size_t q, const std::vector<EquiProbe>& probes,
                                          const EquicontinuityOptions& opts);

/// The graph {(R(l)h, (R(l)h - h)/l)} with its generating data.
struct HhatGraph {
  OperatorGraph graph;
  std::vector<double> lambdas;  // per pair
  std::vector<Fn> sources;      // per pair
};

HhatGraph build_Hhat(const ResolventFamily& r, const std::vector<double>& lambda_grid,
                     const std::vector<Fn>& h_set);

}  // namespace hjlab
