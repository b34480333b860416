// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include "cli.hpp"
#include "hjlab/convergence.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace hjlab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Fn scaled_to_ball(Fn v, double r) {
  const double s = sup_norm(v);
  return s > r ? Fn(v * (r / s)) : v;
}

Fn sampled(const FiniteSpace& g, const std::function<double(double)>& fn) {
  Fn v(g.size());
  for (Index i = 0; i < g.size(); ++i) v[i] = fn(g.coords(i, 0));
  return v;
}

// 1
Outcome pseudo_resolvent() {
  std::mt19937_64 rng(7);
  const ResolventFamily r(tilt_linear(oracle::random_ring(50, rng)));
  double worst = 0.0;
  bool ok = true;
  for (int k = 0; k < 20; ++k) {
    const Fn h = oracle::random_vector(50, rng);
    for (double a : {0.1, 0.5}) {
      for (double b : {1.0, 2.0}) {
        const IdentityReport rep = check_pseudo_resolvent_identity(r, a, b, h, 1e-8);
        worst = std::max(worst, rep.residual);
        ok = ok && rep.pass && rep.residual <= 1e-8;
      }
    }
  }
  return {ok, fmt("max residual %.2e (tol 1e-8)", worst)};
}

// 2
Outcome linear_oracle() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Index> size(2, 20);
  std::uniform_real_distribution<double> lam(0.01, 2.0);
  double worst = 0.0;
  for (int m = 0; m < 10; ++m) {
    const Matrix a = oracle::random_dense(size(rng), rng);
    const ResolventFamily r(linear_hamiltonian(a));
    for (int k = 0; k < 10; ++k) {
      const double l = lam(rng);
      const Fn h = oracle::random_vector(a.rows(), rng);
      const auto [u, diag] = solve_resolvent(r, l, h);
      worst = std::max(worst, sup_norm(u - oracle::linear_resolvent(a, l, h)));
    }
  }
  return {worst <= 1e-9, fmt("max error %.2e (tol 1e-9)", worst)};
}

// 3
Outcome crandall_liggett_oracle() {
  std::mt19937_64 rng(7);
  const Matrix a = oracle::random_ring(10, rng);
  const ResolventFamily r(tilt_linear(a));
  const Fn f = oracle::random_vector(10, rng);
  const TrendReport t = convergence_in_n(r, 1.0, f, {64, 256, 1024, 4096}, 1e-3, oracle::logexp(a, 1.0, f));
  const bool ok = t.values.back() <= 1e-3 && t.slope >= -1.3 && t.slope <= -0.7;
  return {ok, fmt("error at 4096 %.2e (tol 1e-3), slope %.3f in [-1.3, -0.7]", t.values.back(), t.slope)};
}

// 4
Outcome semigroup_property() {
  std::mt19937_64 rng(13);
  const Matrix a = oracle::random_ring(10, rng);
  const Fn f = oracle::random_vector(10, rng);
  double worst = 0.0;
  for (double s : {0.1, 0.5, 1.3}) {
    for (double t : {0.2, 0.7, 2.0}) {
      worst = std::max(worst, sup_norm(logexp_oracle(a, s + t, f) - logexp_oracle(a, s, logexp_oracle(a, t, f))));
    }
  }
  return {worst <= 1e-9, fmt("max deviation %.2e (tol 1e-9)", worst)};
}

// 5
Outcome viscosity_checks() {
  std::mt19937_64 rng(17);
  std::vector<Hamiltonian> hs;
  hs.push_back(linear_hamiltonian(oracle::random_dense(10, rng)));
  hs.push_back(tilt_linear(oracle::random_ring(10, rng)));
  auto grid = make_grid(0.0, 1.0, 32, true);
  hs.push_back(upwind_quadratic(grid, sampled(*grid, [](double x) { return 0.3 * std::sin(2.0 * kPi * x); })));
  double worst = 0.0;
  bool ok = true;
  std::size_t pairs = 0;
  for (const Hamiltonian& h : hs) {
    const ResolventFamily r(h);
    std::vector<Fn> src;
    for (int k = 0; k < 5; ++k) src.push_back(oracle::random_vector(h.size(), rng));
    const HhatGraph hh = build_Hhat(r, {0.1, 1.0, 5.0}, src);
    for (std::size_t k = 0; k < hh.graph.pairs.size(); ++k) {
      const ExtFn& u = hh.graph.pairs[k].f;
      const auto sub = check_subsolution(u, hh.graph, hh.sources[k], hh.lambdas[k]);
      const auto sup = check_supersolution(u, hh.graph, hh.sources[k], hh.lambdas[k]);
      worst = std::max({worst, sub.slack, -sup.slack});
      ok = ok && sub.pass && sup.pass;
      ++pairs;
    }
  }
  ok = ok && worst <= 1e-8;

  // Spike fixture.
  const ResolventFamily r(tilt_linear(oracle::random_ring(12, rng)));
  const Fn rhs = oracle::random_vector(12, rng);
  const HhatGraph hh = build_Hhat(r, {0.5}, {rhs});
  const Index spike = 6;
  Fn u = hh.graph.pairs[0].f;
  u[spike] += 0.1;
  const auto bad = check_subsolution(u, hh.graph, rhs, 0.5);
  const bool spike_ok = !bad.pass && bad.pairs[0].witness == spike;
  return {ok && spike_ok, fmt("%.0f pairs, worst slack %.2e (tol 1e-8); spike rejected at %.0f", double(pairs), worst,
                              double(bad.pairs[0].witness))};
}

// 6
Outcome optimizing_sequence() {
  const Index n = 10000;
  Fn f(n);
  for (Index i = 0; i < n; ++i) f[i] = std::log(static_cast<double>(i + 1) / static_cast<double>(n));
  std::vector<double> eps;
  for (int k = 1; k <= 20; ++k) eps.push_back(std::ldexp(1.0, -k));
  const OptimizingSequence s = find_optimizing_sequence(f, f, eps);
  const double gap = std::abs(s.f_values.back() - 0.0);
  return {gap <= 1e-3 && s.g_limit <= 1e-3, fmt("|f(x_n) - sup f| %.2e, limsup g %.2e (tol 1e-3)", gap, s.g_limit)};
}

// 7
Outcome barles_perthame() {
  GridSequenceSpec spec;
  spec.resolutions = {64, 128, 256, 512, 1024};
  spec.q_levels = 2;
  spec.limit_factor = 10;
  const SpaceSequence seq = make_grid_sequence(spec);
  const auto drift = [](double x) { return 0.3 * std::sin(2.0 * kPi * x); };
  const auto& x = *seq.limit;
  const std::vector<Fn> d = {
      sampled(x, [](double t) { return 0.2 * std::sin(2.0 * kPi * t) + 0.1 * std::cos(4.0 * kPi * t); }),
      sampled(x, [](double t) { return 0.15 * std::cos(2.0 * kPi * t); })};
  const std::vector<Fn> tests = {sampled(x, [](double t) { return 0.05 * std::sin(2.0 * kPi * t); }),
                                 sampled(x, [](double t) { return 0.05 * std::cos(2.0 * kPi * t); })};
  const double tol = 4.0 / 1024.0;
  const IndexSet all = full_index_set(x.size());

  auto run = [&](auto make, bool negative) {
    std::vector<Hamiltonian> members;
    for (const auto& m : seq.members) members.push_back(make(m, sampled(*m, drift)));
    OperatorSequence hs = make_operator_sequence(seq, std::move(members));
    const Hamiltonian hl = make(seq.limit, sampled(x, drift));
    hs.limit_dagger = limit_graph(hl, tests, all, GraphKind::dagger);
    hs.limit_ddagger = limit_graph(hl, tests, all, GraphKind::ddagger);
    ResolventExperimentOptions o;
    o.lim.tol = tol;
    o.lim.tail_start = 3;
    o.solver.accept_unconverged = negative;
    o.limit_hamiltonian = hl;
    o.jobs = 4;
    return resolvent_convergence_experiment(hs, d, {0.25, 1.0}, o);
  };

  const auto pos = run([](const SpacePtr& g, const Fn& b) { return upwind_quadratic(g, b); }, false);
  bool pos_ok = !pos.cells.empty();
  double pos_gap = 0.0;
  for (const auto& c : pos.cells) {
    pos_ok = pos_ok && c.envelopes_coincide && c.lim.pass;
    pos_gap = std::max(pos_gap, c.gap);
  }
  const auto neg = run([](const SpacePtr& g, const Fn& b) { return centered_quadratic(g, b); }, true);
  double neg_gap = 0.0;
  for (const auto& c : neg.cells) neg_gap = std::max(neg_gap, c.gap);
  const bool neg_ok = neg_gap > tol;
  return {pos_ok && neg_ok,
          fmt("upwind max gap %.2e, centered max gap %.2e (tol %.2e)", pos_gap, neg_gap, tol)};
}

// 8
Outcome slowfast_averaging() {
  auto slow = make_grid(0.0, 1.0, 64, true);
  auto fast = make_space(Matrix::Identity(3, 3));
  const EnlargedSpaceSequence product = make_product_sequence(slow, fast);
  SlowFastCoupling c;
  c.fast_rates = Matrix(3, 3);
  c.fast_rates << -1, 0.5, 0.5, 1, -2, 1, 0.5, 0.5, -1;
  c.fast_rates *= 10.0;
  for (double a : {0.5, -0.3, 0.1}) {
    c.slow_drifts.push_back(sampled(*slow, [a](double t) { return a * std::sin(2.0 * kPi * t) + 0.2 * a; }));
  }
  const Fn h = sampled(*slow, [](double t) { return 0.2 * std::sin(2.0 * kPi * t) + 0.1 * std::cos(4.0 * kPi * t); });
  bool ok = true;
  double order = kInf, err = 0.0;
  for (double l : {0.25, 1.0}) {
    const AveragingReport a = slowfast_averaging_experiment(product, c, h, l, {1, 2, 4, 8, 16, 32, 64}, {}, 4);
    order = std::min(order, a.order);
    err = std::max(err, a.final_error);
    ok = ok && a.order >= 0.8 && a.final_error <= 5e-2;
  }
  return {ok, fmt("min order %.3f (>= 0.8), error at n = 64 %.2e (tol 5e-2)", order, err)};
}

// 9
Outcome zero_operator_density() {
  std::mt19937_64 rng(19);
  std::vector<double> lambdas;
  for (int k = 0; k <= 10; ++k) lambdas.push_back(std::ldexp(1.0, -k));
  bool ok = true;
  double last = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Hamiltonian> hs;
    hs.push_back(linear_hamiltonian(oracle::random_dense(10, rng)));
    hs.push_back(tilt_linear(oracle::random_ring(10, rng)));
    for (const Hamiltonian& H : hs) {
      Fn h = oracle::random_vector(10, rng);
      const double ah = sup_norm(H(h));
      if (ah > 5.0) h *= 5.0 / ah;
      h = scaled_to_ball(h, 1.0);
      const DensityCheck d = density_check_zero_operator(ResolventFamily(H), h, lambdas, 1e-2);
      ok = ok && d.monotone && d.deviations.back() <= 1e-2;
      last = std::max(last, d.deviations.back());
    }
  }
  return {ok, fmt("max deviation at k = 10 %.2e (tol 1e-2), non-increasing ", last) + (ok ? "yes" : "no")};
}

// 10
Outcome dissipativity() {
  std::mt19937_64 rng(23);
  const ResolventFamily r(tilt_linear(oracle::random_ring(20, rng)));
  std::vector<Fn> src;
  for (int k = 0; k < 10; ++k) src.push_back(oracle::random_vector(20, rng));
  const HhatGraph hh = build_Hhat(r, {0.1, 0.5, 1.0, 2.0}, src);
  const DissipativityReport rep = check_dissipative(hh.graph.pairs, {0.1, 1.0, 10.0});
  return {hh.graph.pairs.size() == 40 && rep.pass(),
          fmt("%.0f pairs, %.0f checks, %.0f violations", double(hh.graph.pairs.size()), double(rep.checked),
              double(rep.violations.size()))};
}

// 11
std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = os.str();
  }
  return out;
}

Outcome determinism() {
  const fs::path cfg = fs::path(HJLAB_SOURCE_DIR) / "configs" / "positive_control.json";
  const fs::path base = fs::temp_directory_path() / ("hjlab_acceptance_" + std::to_string(::getpid()));
  bool ok = true;
  std::size_t files = 0;
  for (const auto& [name, cmd] : std::vector<std::pair<std::string, int (*)(const cli::RunOptions&)>>{
           {"resolvent", cli::cmd_resolvent},
           {"semigroup", cli::cmd_semigroup},
           {"converge", cli::cmd_converge},
           {"check", cli::cmd_check}}) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int k = 0; k < 2; ++k) {
      cli::RunOptions o;
      o.config = cfg;
      o.out = base / (name + std::to_string(k));
      o.jobs = k == 0 ? 1 : 4;
      fs::remove_all(o.out);
      ok = ok && cmd(o) == cli::kExitPass;
      runs.push_back(read_tree(o.out));
    }
    ok = ok && runs[0] == runs[1] && !runs[0].empty();
    files += runs[0].size();
  }
  fs::remove_all(base);
  return {ok, fmt("%.0f output files compared across two runs", double(files))};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*fn)();
    double budget_s;  // 0: none
  };
  const Criterion criteria[] = {
      {"pseudo-resolvent identity", pseudo_resolvent, 10.0},
      {"linear oracle", linear_oracle, 0.0},
      {"Crandall-Liggett vs log-exp", crandall_liggett_oracle, 60.0},
      {"semigroup property of the oracle", semigroup_property, 0.0},
      {"viscosity checks", viscosity_checks, 0.0},
      {"optimizing sequence", optimizing_sequence, 0.0},
      {"Barles-Perthame controls", barles_perthame, 300.0},
      {"slow-fast averaging", slowfast_averaging, 0.0},
      {"zero-operator density", zero_operator_density, 0.0},
      {"dissipativity of H-hat", dissipativity, 0.0},
      {"determinism", determinism, 0.0},
  };
  int failures = 0;
  int i = 0;
  for (const Criterion& c : criteria) {
    ++i;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; runtime %.1f s over budget %.0f s", secs, c.budget_s);
    }
    std::printf("%s %2d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
