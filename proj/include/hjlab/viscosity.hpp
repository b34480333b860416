#pragma once

#include "hjlab/resolvent.hpp"

#include <optional>
#include <vector>

namespace hjlab {

struct PairCheck {
  std::size_t pair = 0;
  bool pass = true;
  bool applicable = true;  // false when sup(u - f) is not finite
  double sup_value = 0.0;  // sup (u - f) over X (inf for supersolutions)
  // Best value of the tested inequality over the optimizers: for a
  // subsolution u - lambda g - h (<= tol), for a supersolution the same
  // expression (>= -tol).
  double slack = 0.0;
  IndexSet optimizers;   // points of Y
  Index witness = -1;    // the optimizer realizing `slack`
};

struct ViscosityReport {
  bool pass = true;
  double slack = 0.0;  // worst over pairs
  std::vector<PairCheck> pairs;
};

struct ViscosityOptions {
  double tol = 1e-8;
  // Points within tie_tol of the optimum count as optimizers. Negative: tol.
  double tie_tol = -1.0;
};

/// Subsolution of f - lambda G f = h: for each (f, g) in G, at some maximizer
/// y of u(gamma y) - f(gamma y), u(gamma y) - lambda g(y) - h(gamma y) <= tol.
ViscosityReport check_subsolution(const ExtFn& u, const EnlargedOperatorGraph& g, const ExtFn& h, double lambda,
                                  const ViscosityOptions& opts = {});
ViscosityReport check_subsolution(const ExtFn& u, const OperatorGraph& g, const ExtFn& h, double lambda,
                                  const ViscosityOptions& opts = {});

/// Mirror image: minimizers of v - f and v - lambda g - h >= -tol.
ViscosityReport check_supersolution(const ExtFn& v, const EnlargedOperatorGraph& g, const ExtFn& h, double lambda,
                                    const ViscosityOptions& opts = {});
ViscosityReport check_supersolution(const ExtFn& v, const OperatorGraph& g, const ExtFn& h, double lambda,
                                    const ViscosityOptions& opts = {});

enum class OptimizingCase { sup_case, inf_case };

struct OptimizingSequence {
  OptimizingCase which = OptimizingCase::sup_case;
  std::vector<double> eps;
  IndexSet points;
  std::vector<double> f_values;
  std::vector<double> g_values;
  double f_extreme = 0.0;   // sup f (inf f in the mirror case)
  double f_gap = 0.0;       // |f(x_last) - f_extreme|
  double g_limit = 0.0;     // max g over the tail (min in the mirror case)
  bool f_converges = false;
  bool g_bounded = false;   // g_limit <= tol (>= -tol in the mirror case)
};

/// x_n maximizing f - eps_n g (lowest index on ties). Requires for every eps
/// sup f <= sup(f - eps g) < inf, or the mirror inf f >= inf(f - eps g) > -inf.
OptimizingSequence find_optimizing_sequence(const ExtFn& f, const ExtFn& g, const std::vector<double>& eps_grid,
                                            double tol = 1e-3);

struct ComparisonResult {
  bool pass = false;
  double slack = 0.0;  // sup(u - v) - sup(h1 - h2)
};

ComparisonResult check_comparison(const ExtFn& u, const ExtFn& v, const ExtFn& h1, const ExtFn& h2,
                                  double tol = 1e-8);

/// h' = u - eps (u - h) / lambda for 0 < eps < lambda.
Fn perturb_subsolution(const Fn& u, const Fn& h, double lambda, double eps);

enum class Direction { dagger, ddagger };

struct IdentificationResult {
  bool precondition = false;  // the viscosity check against {(f0, g0)} passed
  bool bound = false;         // candidate <= f0 + tol (>= f0 - tol)
  bool holds() const { return precondition && bound; }
  ViscosityReport check;
};

IdentificationResult identification_bound(const Fn& f0, const Fn& g0, const ExtFn& candidate, double eps,
                                          Direction direction, double tol = 1e-8);

struct DensityExtension {
  std::vector<double> approximation_errors;  // sup_K |h_target - h_k|
  std::size_t used = 0;                      // approximants consumed
  std::vector<ViscosityReport> approximant_checks;  // R(lambda)h_k against G
  Index limit_point = -1;  // most frequent maximizer along the approximants
  ViscosityReport report;  // R(lambda)h_target against G_tilde
};

/// Extends the subsolution property from the approximants h_k in D to
/// h_target. D is read as an ordered approximating sequence; sup_K |h_target
/// - h_k| must strictly decrease until it is <= approx_tol, where K is the
/// level set {|R(lambda)h_target| <= 2 ||h_target||}.
DensityExtension extend_solutions_by_density(const ResolventFamily& r, const std::vector<Fn>& d,
                                             const OperatorGraph& g, const OperatorGraph& g_tilde, double lambda,
                                             const Fn& h_target, double approx_tol = 1e-6,
                                             const ViscosityOptions& opts = {});

}  // namespace hjlab
