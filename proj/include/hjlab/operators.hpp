#pragma once

#include "hjlab/limits.hpp"
#include "hjlab/spaces.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hjlab {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// A single-valued Hamiltonian H : Fn -> Fn on one finite space.
struct Hamiltonian {
  SpacePtr space;
  std::function<Fn(const Fn&)> apply;
  // Derivative of apply at f. Optional; the resolvent falls back to dense
  // finite differences without it.
  std::function<SparseMatrix(const Fn&)> jacobian;
  std::optional<double> lipschitz_bound;
  bool monotone = false;
  std::string name;

  Fn operator()(const Fn& f) const { return apply(f); }
  Index size() const { return space->size(); }
};

/// Throws StructuralError unless `rates` is square with
/// nonnegative off-diagonal entries and zero row sums (relative 1e-12).
void validate_rate_matrix(const Matrix& rates);

/// A generator acting linearly: Hf = A f.
Hamiltonian linear_hamiltonian(const Matrix& rates, SpacePtr space = nullptr);

/// Exponentially tilted generator Hf = e^{-f} A e^{f}, evaluated rowwise as
/// sum_{j != i} A_ij (e^{f_j - f_i} - 1). The Lipschitz bound is valid on
/// functions with oscillation at most `oscillation_bound`.
Hamiltonian tilt_linear(const Matrix& rates, double oscillation_bound = 2.0, SpacePtr space = nullptr);

/// Monotone upwind discretization on a 1-d periodic grid of
///   Hf(x) = b(x) f'(x) + |f'(x)|^2,   b = -V' given pointwise as `drift`.
/// The transport term uses the upwind one-sided difference for the sign of
/// b; the quadratic term uses the Godunov form
///   max( max(D+f, 0)^2, min(D-f, 0)^2 ),
/// nondecreasing in f(x+h) and in f(x-h).
Hamiltonian upwind_quadratic(const SpacePtr& grid, const Fn& drift);

/// The same transport term with the quadratic term discretized by centered
/// differences, ((f(x+h) - f(x-h)) / 2h)^2. Not monotone; the negative
/// control for envelope convergence.
Hamiltonian centered_quadratic(const SpacePtr& grid, const Fn& drift);

/// Slow-fast coupling on a product layout: per fast state z a slow drift
/// b_z on the slow grid, and an irreducible rate matrix on the fast space.
struct SlowFastCoupling {
  std::vector<Fn> slow_drifts;  // one per fast state
  Matrix fast_rates;
};

/// H_n f(x, z) = H_z(f(., z))(x) + n * (L f(x, .))(z) with H_z the upwind
/// quadratic Hamiltonian with drift b_z.
Hamiltonian slowfast_hamiltonian(const EnlargedSpaceSequence& product, double n,
                                 const SlowFastCoupling& coupling);

/// Stationary distribution pi of an irreducible rate matrix (pi L = 0).
Vector stationary_distribution(const Matrix& rates);

/// The averaged slow Hamiltonian sum_z pi_z H_z, the fixed-grid limit of the
/// slow-fast family as n -> infinity.
Hamiltonian averaged_hamiltonian(const EnlargedSpaceSequence& product,
                                 const SlowFastCoupling& coupling);

/// c * H for c >= 0.
Hamiltonian scale_hamiltonian(const Hamiltonian& h, double c);

enum class GraphKind { dagger, ddagger };

struct GraphPair {
  ExtFn f;
  ExtFn g;
};

/// A finite multivalued operator. Dagger pairs have f bounded below and g
/// bounded above; ddagger pairs the reverse.
struct OperatorGraph {
  std::vector<GraphPair> pairs;
  GraphKind kind = GraphKind::dagger;
};

/// Pairs (f on X, g on Y) with a projection gamma: Y -> X.
struct EnlargedOperatorGraph {
  std::vector<GraphPair> pairs;
  IndexSet projection;
  GraphKind kind = GraphKind::dagger;
};

void validate_graph(const OperatorGraph& g);
void validate_graph(const EnlargedOperatorGraph& g);

EnlargedOperatorGraph as_enlarged(const OperatorGraph& g);

/// {(f, H f)} over the given test functions.
OperatorGraph graph_of(const Hamiltonian& h, const std::vector<Fn>& test_functions,
                       GraphKind kind = GraphKind::dagger);

/// c * G = {(f, c g)} with c * (+-inf) = +-inf, also at c = 0.
OperatorGraph scale_graph(double c, const OperatorGraph& g);
EnlargedOperatorGraph scale_graph(double c, const EnlargedOperatorGraph& g);

struct DissipativityViolation {
  std::size_t first = 0;
  std::size_t second = 0;
  double lambda = 0.0;
  double lhs = 0.0;  // ||f1 - l g1 - (f2 - l g2)||
  double rhs = 0.0;  // ||f1 - f2||
};

struct DissipativityReport {
  std::size_t checked = 0;
  std::vector<DissipativityViolation> violations;
  bool pass() const { return violations.empty(); }
};

DissipativityReport check_dissipative(const std::vector<GraphPair>& pairs,
                                      const std::vector<double>& lambdas, double tol = 1e-9);

}  // namespace hjlab
