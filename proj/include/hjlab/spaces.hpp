#pragma once

#include "hjlab/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hjlab {

using IndexSet = std::vector<Index>;

/// A finite point set together with its embedding into an ambient R^d.
///
/// Row i of `coords` is the embedded image of point i. Embedded images need
/// not be distinct (projections such as (x, z) -> x collapse points), but
/// point labels are. `period(k) > 0` makes coordinate k periodic with that
/// period; 0 means the coordinate is an ordinary real line.
struct FiniteSpace {
  Matrix coords;
  Vector period;
  std::vector<std::string> labels;  // empty: points are labelled "p<i>"

  Index size() const { return coords.rows(); }
  Index dim() const { return coords.cols(); }
  std::string label(Index i) const;
};

using SpacePtr = std::shared_ptr<const FiniteSpace>;

/// Validating constructor. Throws StructuralError on d < 1, a period vector of
/// the wrong length, or duplicate labels.
SpacePtr make_space(Matrix coords, Vector period = Vector(), std::vector<std::string> labels = {});

/// Ambient distance, periodic per coordinate where `period(k) > 0`.
double ambient_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                        const Eigen::Ref<const Eigen::RowVectorXd>& b, const Vector& period);

/// Uniform grid on [lo, hi]. Periodic grids have `points` nodes lo + i*h with
/// h = (hi - lo) / points; non-periodic grids include both endpoints.
SpacePtr make_grid(double lo, double hi, Index points, bool periodic);

/// Nested compact families indexed by a finite chain q = 0 < 1 < ... < Q-1.
struct CompactFamily {
  std::vector<std::string> names;
  std::vector<std::vector<IndexSet>> member_sets;  // [q][n], sorted indices into member n
  std::vector<IndexSet> limit_sets;                // [q], sorted indices into the limit space

  std::size_t levels() const { return limit_sets.size(); }
};

/// For each q, each limit point x in K^q and each member n: the points of
/// K_n^q whose embedded image is nearest to the image of x (ties kept).
struct TrackTable {
  // tracks[q][k][n] = candidate indices; k enumerates limit_sets[q] in order.
  std::vector<std::vector<std::vector<IndexSet>>> tracks;
};

struct SpaceSequence {
  std::vector<SpacePtr> members;
  SpacePtr limit;
  CompactFamily compacts;
  Vector spacing;  // characteristic mesh width per member, informational
  std::shared_ptr<const TrackTable> tracks;

  std::size_t count() const { return members.size(); }
};

/// Checks structural invariants (shared ambient dimension, N >= 3, compact
/// index ranges) and builds the nearest-point track table. Constructors call
/// this; hand-built sequences should too.
void finalize_sequence(SpaceSequence& seq);

/// Returns the sequence's tracks, computing them if the sequence was never
/// finalized.
std::shared_ptr<const TrackTable> ensure_tracks(const SpaceSequence& seq);

struct GridSequenceSpec {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<Index> resolutions;
  int q_levels = 1;
  // Explicit nested intervals; overrides q_levels when non-empty.
  std::vector<std::pair<double, double>> intervals;
  bool periodic = true;
  int limit_factor = 10;
};

/// X_n = grid with resolutions[n] points; the limit space is a grid
/// `limit_factor` times finer than the finest member. K_n^q and K^q are the
/// grid points inside nested closed intervals; the last level is the whole
/// domain.
SpaceSequence make_grid_sequence(const GridSequenceSpec& spec);

struct ProductLayout {
  Index slow_size = 0;
  Index fast_size = 0;
  Index index(Index slow, Index fast) const { return slow * fast_size + fast; }
  Index slow_of(Index i) const { return i / fast_size; }
  Index fast_of(Index i) const { return i % fast_size; }
};

/// Converging spaces with an enlarged limit Y, a projection gamma: Y -> X and
/// embeddings of every member into the enlarged ambient space. The ambient
/// projection gamma-hat keeps the first `base.limit->dim()` coordinates.
struct EnlargedSpaceSequence {
  SpaceSequence base;
  SpacePtr enlarged_limit;
  IndexSet projection;                    // gamma, indexed by points of Y
  std::vector<Matrix> enlarged_embeddings;  // eta-hat_n images, row per member point
  std::vector<IndexSet> enlarged_compacts;  // K-hat^q subsets of Y
  std::optional<ProductLayout> layout;
};

/// Y = X, gamma = id, eta-hat_n = eta_n.
EnlargedSpaceSequence trivial_enlargement(const SpaceSequence& seq);

/// X_n = slow x fast for every n, eta_n(x, z) = x, Y = slow x fast,
/// gamma(x, z) = x, and Q = pairs (K1, K2) with K1 a nested slow interval and
/// K2 the whole fast space: K_n^q = K1 x K2, K^q = K1, K-hat^q = K1 x K2.
struct ProductOptions {
  std::size_t count = 7;
  int q_levels = 1;
};
EnlargedSpaceSequence make_product_sequence(const SpacePtr& slow, const SpacePtr& fast,
                                            const ProductOptions& opts = {});

struct CompactAudit {
  bool monotone = true;
  bool covering = true;    // the top level covers the whole limit space
  bool convergent = true;  // Hausdorff(eta_n(K_n^q), eta(K^q)) <= tol for n >= N0
  std::vector<std::vector<double>> hausdorff;  // [q][n]
  bool pass() const { return monotone && covering && convergent; }
};

CompactAudit audit_compacts(const SpaceSequence& seq, double tol, std::size_t first_checked);

/// eta(gamma(y)) == gamma-hat(eta-hat(y)) exactly, gamma surjective, and
/// gamma(K-hat^q) inside K^q.
bool check_enlargement(const EnlargedSpaceSequence& seq);

/// Kuratowski upper and lower limits of a finite sequence of point clouds.
/// Open neighbourhoods become eps-balls; "infinitely many" and "all but
/// finitely many" are read on the tail n >= tail_start. The returned index
/// sets refer to rows of `candidates`.
struct KuratowskiResult {
  IndexSet limsup;
  IndexSet liminf;
};
KuratowskiResult kuratowski_limits(const std::vector<Matrix>& sets, const Matrix& candidates,
                                   double eps, const Vector& period = Vector(),
                                   std::optional<std::size_t> tail_start = std::nullopt);

/// Points of `subset` (indices into `from`) nearest to each row of `targets`
/// restricted to `target_subset`; ties within a relative 1e-9 are all kept.
std::vector<IndexSet> nearest_candidates(const Matrix& from, const IndexSet& subset,
                                         const Matrix& targets, const IndexSet& target_subset,
                                         const Vector& period);

/// All indices 0..n-1.
IndexSet full_index_set(Index n);

}  // namespace hjlab
