#include "hjlab/viscosity.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hjlab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Fixture {
  std::string name;
  Hamiltonian h;
};

std::vector<Fixture> shipped(std::mt19937_64& rng) {
  std::vector<Fixture> out;
  out.push_back({"linear", linear_hamiltonian(oracle::random_dense(10, rng))});
  out.push_back({"tilt", tilt_linear(oracle::random_ring(10, rng))});
  auto grid = make_grid(0.0, 1.0, 32, true);
  Fn b(32);
  for (Index i = 0; i < 32; ++i) b[i] = 0.3 * std::sin(2.0 * kPi * grid->coords(i, 0));
  out.push_back({"upwind", upwind_quadratic(grid, b)});
  return out;
}

std::vector<Fn> random_fns(Index n, int count, std::mt19937_64& rng, double r = 1.0) {
  std::vector<Fn> out;
  for (int k = 0; k < count; ++k) out.push_back(oracle::random_vector(n, rng, r));
  return out;
}

Fn fourier_partial_sum(const Fn& h, int degree) {
  const Index n = h.size();
  Fn out = Fn::Constant(n, h.mean());
  for (int k = 1; k <= degree; ++k) {
    double a = 0.0, b = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * k * static_cast<double>(i) / static_cast<double>(n);
      a += h[i] * std::cos(t);
      b += h[i] * std::sin(t);
    }
    a *= 2.0 / static_cast<double>(n);
    b *= 2.0 / static_cast<double>(n);
    for (Index i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * k * static_cast<double>(i) / static_cast<double>(n);
      out[i] += a * std::cos(t) + b * std::sin(t);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("property: classical solutions pass both viscosity checks against H-hat") {
  std::mt19937_64 rng(41);
  for (const auto& fx : shipped(rng)) {
    CAPTURE(fx.name);
    const ResolventFamily r(fx.h);
    const auto hs = random_fns(fx.h.size(), 5, rng);
    const auto hh = build_Hhat(r, {0.1, 1.0, 5.0}, hs);
    for (std::size_t k = 0; k < hh.graph.pairs.size(); ++k) {
      const auto& p = hh.graph.pairs[k];
      const auto sub = check_subsolution(p.f, hh.graph, hh.sources[k], hh.lambdas[k]);
      const auto sup = check_supersolution(p.f, hh.graph, hh.sources[k], hh.lambdas[k]);
      CHECK(sub.pass);
      CHECK(sup.pass);
      CHECK(sub.slack <= 1e-8);
      CHECK(sup.slack >= -1e-8);
      CHECK(sub.pairs.size() == hh.graph.pairs.size());
    }
  }
}

TEST_CASE("resolvent output is a viscosity solution for the graph of H") {
  std::mt19937_64 rng(42);
  for (const auto& fx : shipped(rng)) {
    CAPTURE(fx.name);
    const ResolventFamily r(fx.h);
    const auto g = graph_of(fx.h, random_fns(fx.h.size(), 20, rng));
    const Fn h = oracle::random_vector(fx.h.size(), rng);
    const Fn u = r(0.7, h);
    CHECK(check_subsolution(u, g, h, 0.7).pass);
    CHECK(check_supersolution(u, g, h, 0.7).pass);
  }
}

TEST_CASE("zero-scaled graphs: h solves f - 0 = h") {
  std::mt19937_64 rng(43);
  const auto h = tilt_linear(oracle::random_ring(8, rng));
  const auto g = scale_graph(0.0, graph_of(h, random_fns(8, 10, rng)));
  for (int k = 0; k < 10; ++k) {
    const Fn rhs = oracle::random_vector(8, rng);
    for (double lambda : {0.1, 1.0, 10.0}) {
      CHECK(check_subsolution(rhs, g, rhs, lambda).pass);
      CHECK(check_supersolution(rhs, g, rhs, lambda).pass);
    }
  }
}

TEST_CASE("a spike breaks the subsolution property at the spike") {
  std::mt19937_64 rng(44);
  const auto h = tilt_linear(oracle::random_ring(12, rng));
  const ResolventFamily r(h);
  const Fn rhs = oracle::random_vector(12, rng);
  const auto hh = build_Hhat(r, {0.5}, {rhs});
  Fn u = hh.graph.pairs[0].f;
  const Index spike = 6;
  u[spike] += 0.1;
  const auto rep = check_subsolution(u, hh.graph, rhs, 0.5);
  REQUIRE_FALSE(rep.pass);
  CHECK(rep.pairs[0].witness == spike);
  CHECK(rep.pairs[0].slack == doctest::Approx(0.1).epsilon(1e-6));

  Fn v = hh.graph.pairs[0].f;
  v[spike] -= 0.1;
  const auto sup = check_supersolution(v, hh.graph, rhs, 0.5);
  REQUIRE_FALSE(sup.pass);
  CHECK(sup.pairs[0].witness == spike);
}

TEST_CASE("viscosity preconditions and inapplicable pairs") {
  Fn u(3);
  u << 0, kInf, 1;
  OperatorGraph g;
  g.pairs.push_back({Fn::Zero(3), Fn::Zero(3)});
  CHECK_THROWS_AS(check_subsolution(u, g, Fn::Zero(3), 1.0), PreconditionError);
  CHECK_THROWS_AS(check_subsolution(Fn::Zero(3), g, Fn::Zero(2), 1.0), StructuralError);
  u << 0, -kInf, 1;
  CHECK_THROWS_AS(check_supersolution(u, g, Fn::Zero(3), 1.0), PreconditionError);
  // f = +inf at every point: sup(u - f) = -inf, the pair does not constrain u.
  OperatorGraph top;
  top.pairs.push_back({Fn::Constant(3, kInf), Fn::Zero(3)});
  Fn ok(3);
  ok << 5, 5, 5;
  const auto rep = check_subsolution(ok, as_enlarged(top), Fn::Zero(3), 1.0);
  CHECK(rep.pass);
  CHECK_FALSE(rep.pairs[0].applicable);
}

TEST_CASE("enlarged graphs read u through the projection") {
  // Y has two copies of each point of X.
  EnlargedOperatorGraph g;
  g.projection = {0, 0, 1, 1};
  Fn f(2), gy(4);
  f << 0, 0;
  gy << 1, -1, 0, 0;
  g.pairs.push_back({f, gy});
  Fn u(2), h(2);
  u << 1, 0;
  h << 0, 0;
  // Maximizers of u o gamma - f o gamma: y = 0, 1. At y = 1, 1 - lambda * (-1) > 0 but
  // at y = 0, 1 - lambda * 1 = 0 at lambda = 1.
  const auto rep = check_subsolution(u, g, h, 1.0);
  CHECK(rep.pass);
  CHECK(rep.pairs[0].witness == 0);
  CHECK(rep.pairs[0].optimizers == IndexSet{0, 1});
  CHECK_FALSE(check_subsolution(u, g, h, 0.5).pass);
}

TEST_CASE("optimizing sequence: unique maximum") {
  Fn f(5), g(5);
  f << -1, 0, 2, 0, -1;
  g << -0.1, -0.2, -0.3, -0.4, -0.5;
  const auto s = find_optimizing_sequence(f, g, {0.5, 0.25, 0.125});
  for (Index p : s.points) CHECK(p == 2);
  CHECK(s.f_extreme == 2.0);
  CHECK(s.f_gap == 0.0);
  CHECK(s.g_limit == doctest::Approx(-0.3));
  CHECK(s.f_converges);
  CHECK(s.g_bounded);
}

TEST_CASE("optimizing sequence: the log counterexample") {
  const Index n = 10000;
  Fn f(n);
  for (Index i = 0; i < n; ++i) f[i] = std::log(static_cast<double>(i + 1) / static_cast<double>(n));
  std::vector<double> eps;
  for (int k = 1; k <= 20; ++k) eps.push_back(std::ldexp(1.0, -k));
  const auto s = find_optimizing_sequence(f, f, eps);
  // inf g is -log(10^4): unbounded as the grid refines, yet the sequence behaves.
  CHECK(f.minCoeff() < -9.0);
  CHECK(std::abs(s.f_values.back() - 0.0) <= 1e-3);
  CHECK(s.g_limit <= 1e-3);
  CHECK(s.f_converges);
  CHECK(s.g_bounded);
}

TEST_CASE("optimizing sequence avoids regions where g > 0") {
  const Index n = 401;
  Fn f(n), g(n);
  for (Index i = 0; i < n; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    f[i] = -x * x;
    g[i] = x < -0.8 ? 0.3 : -std::abs(x);
  }
  std::vector<double> eps;
  for (int k = 1; k <= 12; ++k) eps.push_back(std::ldexp(1.0, -k));
  const auto s = find_optimizing_sequence(f, g, eps);
  for (std::size_t k = 0; k < s.points.size(); ++k) CHECK(g[s.points[k]] <= 0.0);
  CHECK(s.f_converges);
  CHECK(s.g_bounded);
}

TEST_CASE("optimizing sequence preconditions") {
  Fn f(3), g(3);
  f << 0, 1, 2;
  g << -1, 0, 1;
  // f - eps g = (eps, 1, 2 - eps): sup drops below sup f, inf rises above inf f.
  CHECK_THROWS_AS(find_optimizing_sequence(f, g, {0.5}), PreconditionError);
  CHECK_THROWS_AS(find_optimizing_sequence(f, g, {}), ParameterError);
  CHECK_THROWS_AS(find_optimizing_sequence(f, g, {0.1, 0.2}), ParameterError);
}

TEST_CASE("property: optimizing sequences on random bounded inputs") {
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> eps;
  for (int k = 1; k <= 16; ++k) eps.push_back(std::ldexp(1.0, -k));
  for (int trial = 0; trial < 50; ++trial) {
    Fn f(30), g(30);
    for (Index i = 0; i < 30; ++i) {
      f[i] = u(rng);
      g[i] = u(rng);
    }
    Index imax = 0;
    f.maxCoeff(&imax);
    g[imax] = -std::abs(g[imax]);  // keeps sup f <= sup(f - eps g)
    const auto s = find_optimizing_sequence(f, g, eps);
    CHECK(s.f_converges);
    CHECK(s.g_bounded);
  }
}

TEST_CASE("comparison") {
  std::mt19937_64 rng(46);
  const Fn u = oracle::random_vector(10, rng);
  const Fn h = oracle::random_vector(10, rng);
  const auto same = check_comparison(u, u, h, h);
  CHECK(same.pass);
  CHECK(same.slack == 0.0);
  CHECK_FALSE(check_comparison((u.array() + 0.1).matrix(), u, h, h).pass);
  const ResolventFamily r(tilt_linear(oracle::random_ring(10, rng)));
  for (int k = 0; k < 20; ++k) {
    const Fn h1 = oracle::random_vector(10, rng);
    const Fn h2 = oracle::random_vector(10, rng);
    CHECK(check_comparison(r(1.0, h1), r(1.0, h2), h1, h2).pass);
  }
  Fn bad = u;
  bad[0] = kInf;
  CHECK_THROWS_AS(check_comparison(bad, u, h, h), PreconditionError);
}

TEST_CASE("perturb_subsolution algebra") {
  std::mt19937_64 rng(47);
  const Fn u = oracle::random_vector(6, rng);
  const Fn h = oracle::random_vector(6, rng);
  CHECK(sup_norm(perturb_subsolution(u, h, 1.0, 1.0 - 1e-12) - h) <= 1e-11);
  CHECK(sup_norm(perturb_subsolution(h, h, 1.0, 0.3) - h) == 0.0);
  CHECK_THROWS_AS(perturb_subsolution(u, h, 1.0, 1.0), ParameterError);
  CHECK_THROWS_AS(perturb_subsolution(u, h, 1.0, 0.0), ParameterError);
}

TEST_CASE("property: perturbed right-hand sides keep the subsolution") {
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<double> lam(0.05, 5.0);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  for (const auto& fx : shipped(rng)) {
    CAPTURE(fx.name);
    const ResolventFamily r(fx.h);
    const auto g = graph_of(fx.h, random_fns(fx.h.size(), 10, rng));
    for (int trial = 0; trial < 50; ++trial) {
      const double lambda = lam(rng);
      const double eps = frac(rng) * lambda;
      const Fn h = oracle::random_vector(fx.h.size(), rng);
      const Fn u = r(lambda, h);
      REQUIRE(check_subsolution(u, g, h, lambda).pass);
      CHECK(check_subsolution(u, g, perturb_subsolution(u, h, lambda, eps), eps).pass);
    }
  }
}

TEST_CASE("identification bound") {
  std::mt19937_64 rng(49);
  const ResolventFamily r(tilt_linear(oracle::random_ring(10, rng)));
  const auto hh = build_Hhat(r, {0.5, 2.0}, random_fns(10, 3, rng));
  for (const auto& p : hh.graph.pairs) {
    const auto self = identification_bound(p.f, p.g, p.f, 0.3, Direction::dagger);
    CHECK(self.holds());
    const Fn cand = r(0.3, p.f - 0.3 * p.g);
    CHECK(identification_bound(p.f, p.g, cand, 0.3, Direction::dagger).holds());
    CHECK(identification_bound(p.f, p.g, cand, 0.3, Direction::ddagger).holds());
    const auto shifted = identification_bound(p.f, p.g, (p.f.array() + 1.0).matrix(), 0.3, Direction::dagger);
    CHECK_FALSE(shifted.precondition);
    CHECK_FALSE(shifted.holds());
  }
}

TEST_CASE("density extension") {
  auto grid = make_grid(0.0, 1.0, 64, true);
  Fn b(64), target(64);
  for (Index i = 0; i < 64; ++i) {
    const double x = grid->coords(i, 0);
    b[i] = 0.3 * std::sin(2.0 * kPi * x);
    target[i] = 0.3 * std::exp(std::sin(2.0 * kPi * x)) - 0.4;
  }
  const auto h = upwind_quadratic(grid, b);
  const ResolventFamily r(h);
  std::mt19937_64 rng(50);
  const auto g = graph_of(h, random_fns(64, 10, rng, 0.5));
  const auto g_tilde = graph_of(h, random_fns(64, 10, rng, 0.5));

  SUBCASE("every function is in D") {
    const auto ext = extend_solutions_by_density(r, {target}, g, g_tilde, 0.5, target);
    CHECK(ext.used == 1);
    CHECK(ext.report.pass);
    CHECK(ext.approximation_errors[0] == 0.0);
  }
  SUBCASE("trigonometric polynomials of growing degree") {
    std::vector<Fn> d;
    for (int k = 0; k <= 12; ++k) d.push_back(fourier_partial_sum(target, k));
    const auto ext = extend_solutions_by_density(r, d, g, g_tilde, 0.5, target);
    CHECK(ext.report.pass);
    CHECK(ext.used <= d.size());
    CHECK(ext.approximation_errors.back() <= 1e-6);
    CHECK(ext.limit_point >= 0);
    for (const auto& rep : ext.approximant_checks) CHECK(rep.pass);
  }
  SUBCASE("constants only: error floor") {
    const Fn c = Fn::Constant(64, target.mean());
    CHECK_THROWS_AS(extend_solutions_by_density(r, {c}, g, g_tilde, 0.5, target), PreconditionError);
    CHECK_THROWS_AS(extend_solutions_by_density(r, {c, c}, g, g_tilde, 0.5, target), PreconditionError);
    CHECK_THROWS_AS(extend_solutions_by_density(r, {}, g, g_tilde, 0.5, target), PreconditionError);
  }
}
