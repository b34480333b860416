#include "hjlab/spaces.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace hjlab;

namespace {

bool subset_of(const IndexSet& a, const IndexSet& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }

Matrix points(std::initializer_list<double> xs) {
  Matrix m(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("make_space validates its input") {
  CHECK_THROWS_AS(make_space(Matrix(3, 0)), StructuralError);
  CHECK_THROWS_AS(make_space(points({0, 1}), Vector::Ones(2)), StructuralError);
  CHECK_THROWS_AS(make_space(points({0, 1}), Vector(), {"a", "a"}), StructuralError);
  auto s = make_space(points({0, 0}), Vector(), {"a", "b"});
  CHECK(s->size() == 2);
  CHECK(s->label(1) == "b");
  CHECK(make_space(points({0, 1}))->label(1) == "p1");
}

TEST_CASE("periodic ambient distance wraps") {
  Vector period(1);
  period << 1.0;
  Eigen::RowVectorXd a(1), b(1);
  a << 0.05;
  b << 0.95;
  CHECK(ambient_distance(a, b, period) == doctest::Approx(0.1));
  CHECK(ambient_distance(a, b, Vector()) == doctest::Approx(0.9));
}

TEST_CASE("single compact covering the domain") {
  GridSequenceSpec spec;
  spec.resolutions = {4, 8, 16};
  spec.q_levels = 1;
  spec.periodic = false;
  const SpaceSequence seq = make_grid_sequence(spec);
  REQUIRE(seq.compacts.levels() == 1);
  for (std::size_t n = 0; n < seq.count(); ++n) {
    CHECK(seq.compacts.member_sets[0][n] == full_index_set(seq.members[n]->size()));
  }
  CHECK(seq.compacts.limit_sets[0] == full_index_set(seq.limit->size()));
  CHECK(seq.limit->coords(0, 0) == 0.0);
  CHECK(seq.limit->coords(seq.limit->size() - 1, 0) == doctest::Approx(1.0));
}

TEST_CASE("nested compacts are monotone and converge") {
  GridSequenceSpec spec;
  spec.resolutions = {8, 16, 32, 64};
  spec.intervals = {{0.25, 0.75}, {0.0, 1.0}};
  const SpaceSequence seq = make_grid_sequence(spec);
  for (std::size_t n = 0; n < seq.count(); ++n) {
    CHECK(subset_of(seq.compacts.member_sets[0][n], seq.compacts.member_sets[1][n]));
  }
  CHECK(subset_of(seq.compacts.limit_sets[0], seq.compacts.limit_sets[1]));
  const CompactAudit audit = audit_compacts(seq, 1.0 / 16.0, 1);
  CHECK(audit.pass());
  const CompactAudit strict = audit_compacts(seq, 1e-3, 0);
  CHECK_FALSE(strict.convergent);
}

TEST_CASE("nearest grid point to 1/3 converges") {
  GridSequenceSpec spec;
  spec.resolutions = {3, 9, 27, 81, 243};
  const SpaceSequence seq = make_grid_sequence(spec);
  Matrix target(1, 1);
  target << 1.0 / 3.0 + 1e-9;
  for (std::size_t n = 0; n < seq.count(); ++n) {
    const auto& m = *seq.members[n];
    const auto c = nearest_candidates(m.coords, full_index_set(m.size()), target, {0}, m.period);
    REQUIRE(c.size() == 1);
    REQUIRE(!c[0].empty());
    const double x = m.coords(c[0].front(), 0);
    CHECK(std::abs(x - 1.0 / 3.0) <= 1.0 / static_cast<double>(spec.resolutions[n]));
  }
}

TEST_CASE("grid sequence configuration errors") {
  GridSequenceSpec spec;
  CHECK_THROWS_AS(make_grid_sequence(spec), ConfigurationError);
  spec.resolutions = {8, 8, 16};
  CHECK_THROWS_AS(make_grid_sequence(spec), ConfigurationError);
  spec.resolutions = {4, 8, 16};
  spec.lo = 1.0;
  CHECK_THROWS_AS(make_grid_sequence(spec), ConfigurationError);
  spec.lo = 0.0;
  spec.intervals = {{0.0, 1.0}, {0.2, 0.8}};
  CHECK_THROWS_AS(make_grid_sequence(spec), ConfigurationError);
  spec.intervals.clear();
  spec.resolutions = {4, 8};
  CHECK_THROWS_AS(make_grid_sequence(spec), StructuralError);
}

TEST_CASE("product sequence: sizes, projection and commuting embeddings") {
  auto slow = make_grid(0.0, 1.0, 5, true);
  auto fast = make_space(points({0, 1, 2}));
  ProductOptions po;
  po.q_levels = 2;
  const EnlargedSpaceSequence p = make_product_sequence(slow, fast, po);
  for (const auto& m : p.base.members) CHECK(m->size() == 15);
  CHECK(p.enlarged_limit->size() == 15);
  CHECK(p.base.limit->size() == 5);
  CHECK(check_enlargement(p));
  REQUIRE(p.layout);
  // gamma(K-hat^q) sits inside K^q and K-hat^q = K1 x Z.
  for (std::size_t q = 0; q < p.base.compacts.levels(); ++q) {
    const IndexSet& k1 = p.base.compacts.limit_sets[q];
    CHECK(p.enlarged_compacts[q].size() == 3 * k1.size());
    for (Index y : p.enlarged_compacts[q]) {
      CHECK(std::binary_search(k1.begin(), k1.end(), p.projection[static_cast<std::size_t>(y)]));
    }
  }
  // A sequence (x, z_n) with z_n arbitrary projects onto x.
  for (std::size_t n = 0; n < p.base.count(); ++n) {
    const Index i = p.layout->index(2, static_cast<Index>(n % 3));
    CHECK(p.base.members[n]->coords(i, 0) == slow->coords(2, 0));
  }
}

TEST_CASE("product sequence rejects empty factors") {
  auto slow = make_grid(0.0, 1.0, 5, true);
  CHECK_THROWS_AS(make_product_sequence(slow, nullptr), ConfigurationError);
}

TEST_CASE("Kuratowski limits of simple sequences") {
  const Matrix cand = points({-1, 0, 1});
  SUBCASE("alternating singleton") {
    std::vector<Matrix> sets;
    for (int n = 1; n <= 20; ++n) sets.push_back(points({n % 2 ? -1.0 : 1.0}));
    const auto r = kuratowski_limits(sets, cand, 0.1);
    CHECK(r.limsup == IndexSet{0, 2});
    CHECK(r.liminf.empty());
  }
  SUBCASE("shrinking to a point") {
    std::vector<Matrix> sets;
    for (int n = 1; n <= 40; ++n) sets.push_back(points({1.0 / n}));
    const auto r = kuratowski_limits(sets, cand, 0.1);
    CHECK(r.limsup == IndexSet{1});
    CHECK(r.liminf == IndexSet{1});
  }
  SUBCASE("constant sequence") {
    std::vector<Matrix> sets(10, points({-1, 1}));
    const auto r = kuratowski_limits(sets, cand, 0.1);
    CHECK(r.limsup == IndexSet{0, 2});
    CHECK(r.liminf == IndexSet{0, 2});
  }
  CHECK_THROWS_AS(kuratowski_limits({points({0})}, cand, 0.0), ParameterError);
}

TEST_CASE("property: Kuratowski liminf is contained in limsup") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix cand(50, 1);
  for (Index i = 0; i < 50; ++i) cand(i, 0) = i / 49.0;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Matrix> sets;
    for (int n = 0; n < 12; ++n) {
      Matrix s(4, 1);
      for (Index i = 0; i < 4; ++i) s(i, 0) = u(rng);
      sets.push_back(s);
    }
    const auto r = kuratowski_limits(sets, cand, 0.05);
    CHECK(std::includes(r.limsup.begin(), r.limsup.end(), r.liminf.begin(), r.liminf.end()));
  }
}

TEST_CASE("track table holds nearest points for every level") {
  GridSequenceSpec spec;
  spec.resolutions = {8, 16, 32};
  spec.q_levels = 2;
  const SpaceSequence seq = make_grid_sequence(spec);
  auto t = ensure_tracks(seq);
  REQUIRE(t->tracks.size() == 2);
  for (std::size_t q = 0; q < 2; ++q) {
    CHECK(t->tracks[q].size() == seq.compacts.limit_sets[q].size());
    for (const auto& per_point : t->tracks[q]) {
      REQUIRE(per_point.size() == seq.count());
      for (std::size_t n = 0; n < seq.count(); ++n) {
        CHECK(!per_point[n].empty());
        for (Index i : per_point[n]) {
          CHECK(std::binary_search(seq.compacts.member_sets[q][n].begin(), seq.compacts.member_sets[q][n].end(), i));
        }
      }
    }
  }
}
