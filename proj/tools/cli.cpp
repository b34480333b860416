#include "cli.hpp"

#include "hjlab/convergence.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace hjlab::cli {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ojson num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

ojson nums(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Independent stream per context string, so adding a suite does not shift
// the numbers drawn by another.
class Rng {
 public:
  Rng(std::uint64_t seed, const std::string& context) {
    const std::uint64_t c = fnv1a(context);
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    eng_.seed(ss);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }

 private:
  std::mt19937_64 eng_;
};

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw SchemaError(path + ": " + msg); }

const json& need(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) fail(path, "missing key '" + key + "'");
  return obj.at(key);
}

double as_double(const json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  fail(path, "expected a number");
}

double get_double(const json& obj, const std::string& key, const std::string& path, std::optional<double> def = {}) {
  if (!obj.contains(key)) {
    if (def) return *def;
    fail(path, "missing key '" + key + "'");
  }
  return as_double(obj.at(key), path + "." + key);
}

long get_int(const json& obj, const std::string& key, const std::string& path, std::optional<long> def = {}) {
  if (!obj.contains(key)) {
    if (def) return *def;
    fail(path, "missing key '" + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

bool get_bool(const json& obj, const std::string& key, const std::string& path, bool def) {
  if (!obj.contains(key)) return def;
  if (!obj.at(key).is_boolean()) fail(path + "." + key, "expected a boolean");
  return obj.at(key).get<bool>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& path,
                       std::optional<std::string> def = {}) {
  if (!obj.contains(key)) {
    if (def) return *def;
    fail(path, "missing key '" + key + "'");
  }
  if (!obj.at(key).is_string()) fail(path + "." + key, "expected a string");
  return obj.at(key).get<std::string>();
}

std::vector<double> get_doubles(const json& obj, const std::string& key, const std::string& path,
                                std::optional<std::vector<double>> def = {}) {
  if (!obj.contains(key)) {
    if (def) return *def;
    fail(path, "missing key '" + key + "'");
  }
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) fail(path + "." + key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], path + "." + key));
  return out;
}

void allow_keys(const json& obj, const std::set<std::string>& keys, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!keys.count(it.key())) fail(path, "unknown key '" + it.key() + "'");
  }
}

Matrix parse_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty matrix");
  const std::size_t n = v.size();
  Matrix m(static_cast<Index>(n), static_cast<Index>(v[0].size()));
  for (std::size_t i = 0; i < n; ++i) {
    if (!v[i].is_array() || v[i].size() != static_cast<std::size_t>(m.cols())) fail(path, "ragged matrix");
    for (std::size_t j = 0; j < v[i].size(); ++j) m(i, j) = as_double(v[i][j], path);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tables

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

std::string cell(double v) { return fmt(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "1" : "0"; }

void write_table(const std::filesystem::path& dir, const Table& t) {
  std::ofstream os(dir / (t.name + ".csv"), std::ios::binary);
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

// ---------------------------------------------------------------------------
// Model: spaces, operators and functions declared in the config

struct SpaceEntry {
  std::string type;
  SpacePtr single;
  std::optional<SpaceSequence> seq;
  std::optional<EnlargedSpaceSequence> product;
  SpacePtr slow;
  SpacePtr fast;
};

class Model {
 public:
  Model(const json& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    const std::set<std::string> top = {"schema_version", "seed", "description", "spaces", "operators",
                                       "functions", "resolvent", "semigroup", "converge", "check"};
    allow_keys(cfg, top, "config");
    if (!cfg.contains("schema_version") || !cfg.at("schema_version").is_number_integer() ||
        cfg.at("schema_version").get<int>() != kSchemaVersion) {
      fail("config.schema_version", "must be " + std::to_string(kSchemaVersion));
    }
    for (const char* k : {"spaces", "operators", "functions"}) {
      if (cfg.contains(k) && !cfg.at(k).is_object()) fail(std::string("config.") + k, "expected an object");
    }
    if (cfg.contains("spaces")) {
      for (auto it = cfg.at("spaces").begin(); it != cfg.at("spaces").end(); ++it) space(it.key());
    }
    if (cfg.contains("operators")) {
      for (auto it = cfg.at("operators").begin(); it != cfg.at("operators").end(); ++it) check_operator(it.key());
    }
  }

  std::uint64_t seed() const { return seed_; }

  const SpaceEntry& space(const std::string& name) {
    auto found = spaces_.find(name);
    if (found != spaces_.end()) return found->second;
    const std::string path = "spaces." + name;
    if (!cfg_.contains("spaces") || !cfg_.at("spaces").contains(name)) fail(path, "undeclared space");
    const json& s = cfg_.at("spaces").at(name);
    SpaceEntry e;
    e.type = get_string(s, "type", path);
    if (e.type == "points") {
      allow_keys(s, {"type", "size"}, path);
      const long n = get_int(s, "size", path);
      if (n < 1) fail(path, "size must be positive");
      Matrix c(n, 1);
      for (long i = 0; i < n; ++i) c(i, 0) = static_cast<double>(i);
      e.single = make_space(c);
    } else if (e.type == "grid") {
      allow_keys(s, {"type", "lo", "hi", "points", "periodic"}, path);
      const long n = get_int(s, "points", path);
      if (n < 2) fail(path, "grid needs at least two points");
      e.single = make_grid(get_double(s, "lo", path, 0.0), get_double(s, "hi", path, 1.0), n,
                           get_bool(s, "periodic", path, true));
    } else if (e.type == "grid_sequence") {
      allow_keys(s, {"type", "lo", "hi", "resolutions", "q_levels", "limit_factor", "periodic"}, path);
      GridSequenceSpec g;
      g.lo = get_double(s, "lo", path, 0.0);
      g.hi = get_double(s, "hi", path, 1.0);
      for (double r : get_doubles(s, "resolutions", path)) g.resolutions.push_back(static_cast<Index>(r));
      g.q_levels = static_cast<int>(get_int(s, "q_levels", path, 1));
      g.limit_factor = static_cast<int>(get_int(s, "limit_factor", path, 10));
      g.periodic = get_bool(s, "periodic", path, true);
      try {
        e.seq = make_grid_sequence(g);
      } catch (const Error& ex) {
        fail(path, ex.what());
      }
    } else if (e.type == "product") {
      allow_keys(s, {"type", "slow", "fast", "count", "q_levels"}, path);
      const SpaceEntry& slow = space(get_string(s, "slow", path));
      const SpaceEntry& fast = space(get_string(s, "fast", path));
      if (!slow.single || !fast.single) fail(path, "slow and fast must be single spaces");
      ProductOptions po;
      po.count = static_cast<std::size_t>(get_int(s, "count", path, 7));
      po.q_levels = static_cast<int>(get_int(s, "q_levels", path, 1));
      e.slow = slow.single;
      e.fast = fast.single;
      e.product = make_product_sequence(slow.single, fast.single, po);
    } else {
      fail(path, "unknown space type '" + e.type + "'");
    }
    return spaces_.emplace(name, std::move(e)).first->second;
  }

  const json& operator_spec(const std::string& name, const std::string& path) const {
    if (!cfg_.contains("operators") || !cfg_.at("operators").contains(name)) {
      fail(path, "undeclared operator '" + name + "'");
    }
    return cfg_.at("operators").at(name);
  }

  std::string operator_type(const std::string& name, const std::string& path) const {
    return get_string(operator_spec(name, path), "type", "operators." + name);
  }

  const SpaceEntry& operator_space(const std::string& name, const std::string& path) {
    return space(get_string(operator_spec(name, path), "space", "operators." + name));
  }

  // The rate matrix of a linear or tilted operator.
  Matrix rates(const std::string& name, const std::string& path) {
    const json& o = operator_spec(name, path);
    const std::string op_path = "operators." + name;
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.single) fail(op_path, "rate operators need a single space");
    const Index n = sp.single->size();
    const json& r = need(o, "rates", op_path);
    Matrix a;
    if (r.is_array()) {
      a = parse_matrix(r, op_path + ".rates");
    } else if (r.is_object() && (r.contains("random_ring") || r.contains("random_dense"))) {
      const bool ring = r.contains("random_ring");
      const json& p = r.at(ring ? "random_ring" : "random_dense");
      allow_keys(p, {"low", "high"}, op_path + ".rates");
      const double lo = get_double(p, "low", op_path, 0.2);
      const double hi = get_double(p, "high", op_path, 1.0);
      if (!(lo >= 0.0) || !(hi > lo)) fail(op_path + ".rates", "need 0 <= low < high");
      Rng rng(seed_, "operator:" + name);
      a = Matrix::Zero(n, n);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          const bool edge = ring ? (n > 1 && (j == (i + 1) % n || j == (i + n - 1) % n)) : (i != j);
          if (edge) a(i, j) = rng.uniform(lo, hi);
        }
        a(i, i) = -a.row(i).sum();
      }
    } else {
      fail(op_path + ".rates", "expected a matrix or {random_ring|random_dense}");
    }
    if (a.rows() != n || a.cols() != n) fail(op_path + ".rates", "size does not match the space");
    if (o.contains("scale")) a *= get_double(o, "scale", op_path);
    try {
      validate_rate_matrix(a);
    } catch (const Error& ex) {
      fail(op_path + ".rates", ex.what());
    }
    return a;
  }

  // Operator on a single space.
  Hamiltonian single(const std::string& name, const std::string& path) {
    const std::string type = operator_type(name, path);
    const std::string op_path = "operators." + name;
    const json& o = operator_spec(name, path);
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.single) fail(path, "operator '" + name + "' is not declared on a single space");
    if (type == "linear") return linear_hamiltonian(rates(name, path), sp.single);
    if (type == "tilt") return tilt_linear(rates(name, path), get_double(o, "oscillation_bound", op_path, 2.0), sp.single);
    if (type == "upwind_quadratic" || type == "centered_quadratic") return grid_operator(name, sp.single);
    fail(path, "operator '" + name + "' of type " + type + " is not a single-space operator");
  }

  // Members over a grid sequence, and the same scheme on its limit grid.
  std::vector<Hamiltonian> family(const std::string& name, const std::string& path) {
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.seq) fail(path, "operator '" + name + "' is not declared on a grid sequence");
    std::vector<Hamiltonian> out;
    for (const SpacePtr& m : sp.seq->members) out.push_back(grid_operator(name, m));
    return out;
  }

  Hamiltonian limit_operator(const std::string& name, const std::string& path) {
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.seq) fail(path, "operator '" + name + "' is not declared on a grid sequence");
    return grid_operator(name, sp.seq->limit, "upwind_quadratic");
  }

  const SpaceSequence& sequence(const std::string& name, const std::string& path) {
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.seq) fail(path, "operator '" + name + "' is not declared on a grid sequence");
    return *sp.seq;
  }

  SlowFastCoupling coupling(const std::string& name, const std::string& path) {
    const std::string op_path = "operators." + name;
    const json& o = operator_spec(name, path);
    if (get_string(o, "type", op_path) != "slowfast") fail(path, "operator '" + name + "' is not slowfast");
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.product) fail(op_path, "slowfast operators live on a product space");
    SlowFastCoupling c;
    c.fast_rates = parse_matrix(need(o, "fast_rates", op_path), op_path + ".fast_rates");
    if (o.contains("fast_scale")) c.fast_rates *= get_double(o, "fast_scale", op_path);
    const json& d = need(o, "drifts", op_path);
    if (!d.is_array()) fail(op_path + ".drifts", "expected an array");
    Rng rng(seed_, "operator:" + name);
    for (std::size_t z = 0; z < d.size(); ++z) c.slow_drifts.push_back(function(d[z], *sp.slow, rng, op_path + ".drifts"));
    if (static_cast<Index>(c.slow_drifts.size()) != sp.fast->size()) fail(op_path + ".drifts", "one drift per fast state");
    try {
      validate_rate_matrix(c.fast_rates);
    } catch (const Error& ex) {
      fail(op_path + ".fast_rates", ex.what());
    }
    if (c.fast_rates.rows() != sp.fast->size()) fail(op_path + ".fast_rates", "size does not match the fast space");
    return c;
  }

  const EnlargedSpaceSequence& product(const std::string& name, const std::string& path) {
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.product) fail(path, "operator '" + name + "' is not on a product space");
    return *sp.product;
  }

  const SpaceEntry& product_entry(const std::string& name, const std::string& path) {
    const SpaceEntry& sp = operator_space(name, path);
    if (!sp.product) fail(path, "operator '" + name + "' is not on a product space");
    return sp;
  }

  // A function spec: a name from "functions", a number, {"values": [...]},
  // {"random": {"radius": r}}, or a trigonometric polynomial
  // {"const": c, "sin": [[k, a], ...], "cos": [[k, a], ...]} in the first
  // coordinate, using sin(2 pi k x).
  Fn function(const json& spec, const FiniteSpace& sp, Rng& rng, const std::string& path, int depth = 0) const {
    if (depth > 8) fail(path, "function references nest too deeply");
    const Index n = sp.size();
    if (spec.is_string()) {
      const std::string name = spec.get<std::string>();
      if (!cfg_.contains("functions") || !cfg_.at("functions").contains(name)) {
        fail(path, "undeclared function '" + name + "'");
      }
      return function(cfg_.at("functions").at(name), sp, rng, "functions." + name, depth + 1);
    }
    if (spec.is_number()) return Fn::Constant(n, spec.get<double>());
    if (!spec.is_object()) fail(path, "expected a function spec");
    if (spec.contains("values")) {
      allow_keys(spec, {"values"}, path);
      const std::vector<double> v = get_doubles(spec, "values", path);
      if (static_cast<Index>(v.size()) != n) fail(path, "values do not match the space size");
      return Eigen::Map<const Vector>(v.data(), n);
    }
    if (spec.contains("random")) {
      allow_keys(spec, {"random"}, path);
      const double r = get_double(spec.at("random"), "radius", path + ".random", 1.0);
      Fn f(n);
      for (Index i = 0; i < n; ++i) f[i] = rng.uniform(-r, r);
      return f;
    }
    allow_keys(spec, {"const", "sin", "cos"}, path);
    const double c = get_double(spec, "const", path, 0.0);
    std::vector<std::pair<double, double>> sines, cosines;
    for (const char* key : {"sin", "cos"}) {
      if (!spec.contains(key)) continue;
      const json& terms = spec.at(key);
      if (!terms.is_array()) fail(path + "." + key, "expected [[k, a], ...]");
      for (const json& t : terms) {
        if (!t.is_array() || t.size() != 2) fail(path + "." + key, "expected [[k, a], ...]");
        (key[0] == 's' ? sines : cosines).emplace_back(as_double(t[0], path), as_double(t[1], path));
      }
    }
    Fn f(n);
    for (Index i = 0; i < n; ++i) {
      const double x = sp.coords(i, 0);
      double v = c;
      for (const auto& [k, a] : sines) v += a * std::sin(2.0 * M_PI * k * x);
      for (const auto& [k, a] : cosines) v += a * std::cos(2.0 * M_PI * k * x);
      f[i] = v;
    }
    return f;
  }

  // A list of function specs, or {"random": count, "radius": r}.
  std::vector<Fn> probes(const json& spec, const FiniteSpace& sp, Rng& rng, const std::string& path) const {
    std::vector<Fn> out;
    if (spec.is_array()) {
      for (std::size_t i = 0; i < spec.size(); ++i) out.push_back(function(spec[i], sp, rng, path));
    } else if (spec.is_object() && spec.contains("random")) {
      allow_keys(spec, {"random", "radius"}, path);
      const long count = get_int(spec, "random", path);
      const double r = get_double(spec, "radius", path, 1.0);
      for (long k = 0; k < count; ++k) {
        Fn f(sp.size());
        for (Index i = 0; i < f.size(); ++i) f[i] = rng.uniform(-r, r);
        out.push_back(f);
      }
    } else {
      fail(path, "expected a list of functions or {random: count}");
    }
    if (out.empty()) fail(path, "no probes");
    return out;
  }

 private:
  void check_operator(const std::string& name) {
    const std::string path = "operators." + name;
    const json& o = operator_spec(name, path);
    const std::string type = get_string(o, "type", path);
    static const std::map<std::string, std::set<std::string>> keys = {
        {"linear", {"type", "space", "rates", "scale"}},
        {"tilt", {"type", "space", "rates", "scale", "oscillation_bound"}},
        {"upwind_quadratic", {"type", "space", "drift"}},
        {"centered_quadratic", {"type", "space", "drift"}},
        {"slowfast", {"type", "space", "fast_rates", "fast_scale", "drifts"}},
    };
    auto k = keys.find(type);
    if (k == keys.end()) fail(path, "unknown operator type '" + type + "'");
    allow_keys(o, k->second, path);
    const SpaceEntry& sp = space(get_string(o, "space", path));
    if (type == "linear" || type == "tilt") {
      rates(name, path);
    } else if (type == "slowfast") {
      coupling(name, path);
    } else {
      need(o, "drift", path);
      if (sp.single) grid_operator(name, sp.single);
      else if (sp.seq) family(name, path);
      else fail(path, "grid operators need a grid or a grid sequence");
    }
  }

  Hamiltonian grid_operator(const std::string& name, const SpacePtr& grid, std::string type = "") const {
    const std::string op_path = "operators." + name;
    const json& o = operator_spec(name, op_path);
    if (type.empty()) type = get_string(o, "type", op_path);
    Rng rng(seed_, "operator:" + name);
    const Fn b = function(need(o, "drift", op_path), *grid, rng, op_path + ".drift");
    try {
      return type == "centered_quadratic" ? centered_quadratic(grid, b) : upwind_quadratic(grid, b);
    } catch (const Error& ex) {
      fail(op_path, ex.what());
    }
  }

  const json& cfg_;
  std::uint64_t seed_;
  std::map<std::string, SpaceEntry> spaces_;
};

SolverOptions solver_options(const json& suite, const std::string& path) {
  SolverOptions so;
  if (!suite.contains("solver")) return so;
  const json& s = suite.at("solver");
  const std::string p = path + ".solver";
  allow_keys(s, {"tol_residual", "max_iter", "damping", "newton_switch", "accept_unconverged"}, p);
  so.tol_residual = get_double(s, "tol_residual", p, so.tol_residual);
  so.max_iter = static_cast<int>(get_int(s, "max_iter", p, so.max_iter));
  so.damping = get_bool(s, "damping", p, so.damping);
  so.newton_switch = get_double(s, "newton_switch", p, so.newton_switch);
  so.accept_unconverged = get_bool(s, "accept_unconverged", p, so.accept_unconverged);
  if (!(so.tol_residual > 0.0) || so.max_iter < 1) fail(p, "tol_residual and max_iter must be positive");
  return so;
}

std::vector<double> positive_list(const json& suite, const std::string& key, const std::string& path,
                                  std::optional<std::vector<double>> def = {}) {
  std::vector<double> v = get_doubles(suite, key, path, def);
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) fail(path + "." + key, "entries must be finite and positive");
  }
  return v;
}

// Tolerance of a sequence suite: "tol", or "tol_spacing_factor" times the
// finest member spacing.
double sequence_tol(const json& suite, const SpaceSequence& seq, const std::string& path, double def_factor) {
  if (suite.contains("tol")) return get_double(suite, "tol", path);
  const double factor = get_double(suite, "tol_spacing_factor", path, def_factor);
  return factor * seq.spacing.minCoeff();
}

std::optional<std::size_t> tail_of(const json& suite, const std::string& path) {
  if (!suite.contains("tail_start")) return std::nullopt;
  const long t = get_int(suite, "tail_start", path);
  if (t < 0) fail(path + ".tail_start", "must be nonnegative");
  return static_cast<std::size_t>(t);
}

ojson verdict_json(const ConvergenceVerdict& v) {
  ojson j;
  j["pass"] = v.pass;
  j["tol"] = num(v.tol);
  j["tail_start"] = v.tail_start;
  ojson per = ojson::array();
  for (const QVerdict& q : v.per_q) {
    ojson e;
    e["q"] = q.q;
    e["name"] = q.name;
    e["worst_dev"] = num(q.worst_dev);
    e["witness_point"] = q.witness_point;
    e["witness_n"] = q.witness_n;
    e["trend"] = q.trend;
    per.push_back(e);
  }
  j["per_q"] = per;
  j["warnings"] = v.warnings;
  return j;
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteContext {
  Model& model;
  const json& suite;
  std::string path;
  std::string name;
  Rng rng;
  int jobs;
  ojson& out;
  std::vector<Table>& tables;
};

using SuiteFn = std::function<bool(SuiteContext&)>;

struct SuiteType {
  std::set<std::string> keys;
  SuiteFn run;
};

const std::set<std::string> kCommon = {"name", "type", "negative_control", "description"};

std::set<std::string> with_common(std::set<std::string> k) {
  k.insert(kCommon.begin(), kCommon.end());
  return k;
}

bool suite_solve(SuiteContext& c) {
  const std::string op = get_string(c.suite, "operator", c.path);
  const Hamiltonian h = c.model.single(op, c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  const std::vector<Fn> hs = c.model.probes(need(c.suite, "probes", c.path), *h.space, c.rng, c.path + ".probes");
  const std::string oracle = get_string(c.suite, "oracle", c.path, "none");
  if (oracle != "none" && oracle != "linear") fail(c.path + ".oracle", "expected none or linear");
  if (oracle == "linear" && c.model.operator_type(op, c.path) != "linear") {
    fail(c.path + ".oracle", "the linear oracle needs a linear operator");
  }
  const double tol = get_double(c.suite, "tol", c.path, 1e-9);
  Matrix a;
  if (oracle == "linear") a = c.model.rates(op, c.path);

  struct Row {
    double residual = 0.0, err = 0.0;
    SolveDiagnostics d;
  };
  std::vector<Row> rows(lambdas.size() * hs.size());
  parallel_for(rows.size(), c.jobs, [&](std::size_t k) {
    const double l = lambdas[k / hs.size()];
    const Fn& rhs = hs[k % hs.size()];
    auto [f, d] = r.solve(l, rhs);
    rows[k].d = d;
    rows[k].residual = resolvent_residual(h, l, f, rhs);
    if (oracle == "linear") {
      const Matrix m = Matrix::Identity(a.rows(), a.cols()) - l * a;
      rows[k].err = sup_norm(m.fullPivLu().solve(rhs) - f);
    }
  });
  Table t{c.name, {"lambda", "probe", "residual", "iterations", "method", "oracle_error"}, {}};
  bool pass = true;
  double worst_res = 0.0, worst_err = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Row& w = rows[k];
    worst_res = std::max(worst_res, w.residual);
    worst_err = std::max(worst_err, w.err);
    pass = pass && w.residual <= r.options().tol_residual * (1.0 + 1e-9) && w.err <= tol;
    t.add({cell(lambdas[k / hs.size()]), cell(k % hs.size()), cell(w.residual), cell(w.d.iterations),
           to_string(w.d.method), cell(w.err)});
  }
  // Normalisation R(l) 0 = 0 when H 0 = 0.
  bool normalized = true;
  if (sup_norm(h(Fn::Zero(h.size()))) == 0.0) {
    for (double l : lambdas) normalized = normalized && sup_norm(r(l, Fn::Zero(h.size()))) <= r.options().tol_residual;
  }
  c.out["worst_residual"] = num(worst_res);
  if (oracle == "linear") c.out["worst_oracle_error"] = num(worst_err);
  c.out["normalized"] = normalized;
  c.tables.push_back(std::move(t));
  return pass && normalized;
}

bool suite_identity(SuiteContext& c) {
  const Hamiltonian h = c.model.single(get_string(c.suite, "operator", c.path), c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const std::vector<double> alphas = positive_list(c.suite, "alphas", c.path);
  const std::vector<double> betas = positive_list(c.suite, "betas", c.path);
  const std::vector<Fn> hs = c.model.probes(need(c.suite, "probes", c.path), *h.space, c.rng, c.path + ".probes");
  const double tol = get_double(c.suite, "tol", c.path, 1e-8);
  for (double a : alphas) {
    for (double b : betas) {
      if (!(a < b)) fail(c.path, "every alpha must be below every beta");
    }
  }
  const std::size_t nab = alphas.size() * betas.size();
  std::vector<IdentityReport> reps(nab * hs.size());
  parallel_for(reps.size(), c.jobs, [&](std::size_t k) {
    const std::size_t ab = k / hs.size();
    reps[k] = check_pseudo_resolvent_identity(r, alphas[ab / betas.size()], betas[ab % betas.size()], hs[k % hs.size()], tol);
  });
  Table t{c.name, {"alpha", "beta", "probe", "residual", "pass"}, {}};
  bool pass = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < reps.size(); ++k) {
    pass = pass && reps[k].pass;
    worst = std::max(worst, reps[k].residual);
    t.add({cell(reps[k].alpha), cell(reps[k].beta), cell(k % hs.size()), cell(reps[k].residual), cell(reps[k].pass)});
  }
  c.out["worst_residual"] = num(worst);
  c.out["tol"] = num(tol);
  c.tables.push_back(std::move(t));
  return pass;
}

bool suite_contractivity(SuiteContext& c) {
  const Hamiltonian h = c.model.single(get_string(c.suite, "operator", c.path), c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  const json& pj = need(c.suite, "pairs", c.path);
  std::vector<Fn> left = c.model.probes(pj, *h.space, c.rng, c.path + ".pairs");
  std::vector<Fn> right = c.model.probes(pj, *h.space, c.rng, c.path + ".pairs");
  std::vector<std::pair<Fn, Fn>> pairs;
  for (std::size_t k = 0; k < left.size(); ++k) pairs.emplace_back(left[k], right[k]);
  const double tol = get_double(c.suite, "tol", c.path, 1e-9);
  std::vector<ContractivityReport> reps(lambdas.size());
  parallel_for(lambdas.size(), c.jobs, [&](std::size_t k) { reps[k] = check_contractive(r, lambdas[k], pairs, tol); });
  Table t{c.name, {"lambda", "checked", "violations"}, {}};
  bool pass = true;
  ojson viol = ojson::array();
  for (std::size_t k = 0; k < reps.size(); ++k) {
    pass = pass && reps[k].pass();
    t.add({cell(lambdas[k]), cell(reps[k].checked), cell(reps[k].violations.size())});
    for (const auto& v : reps[k].violations) {
      viol.push_back({{"lambda", num(lambdas[k])}, {"pair", v.pair}, {"sup_side", v.sup_side},
                      {"lhs", num(v.lhs)}, {"rhs", num(v.rhs)}, {"witness", v.witness}});
    }
  }
  c.out["violations"] = viol;
  c.tables.push_back(std::move(t));
  return pass;
}

bool suite_equicontinuity(SuiteContext& c) {
  const std::string op = get_string(c.suite, "operator", c.path);
  const SpaceSequence& seq = c.model.sequence(op, c.path);
  const SolverOptions so = solver_options(c.suite, c.path);
  std::vector<ResolventFamily> rs;
  for (const Hamiltonian& h : c.model.family(op, c.path)) rs.emplace_back(h, so);
  EquicontinuityOptions eo;
  eo.delta = get_double(c.suite, "delta", c.path, 0.1);
  eo.lambdas = positive_list(c.suite, "lambdas", c.path);
  eo.lambda0 = get_double(c.suite, "lambda0", c.path, *std::max_element(eo.lambdas.begin(), eo.lambdas.end()));
  eo.tail_start = tail_of(c.suite, c.path);
  if (c.suite.contains("max_q_hat")) eo.max_q_hat = static_cast<std::size_t>(get_int(c.suite, "max_q_hat", c.path));
  const std::size_t q = static_cast<std::size_t>(get_int(c.suite, "q", c.path, 0));
  if (q >= seq.compacts.levels()) fail(c.path + ".q", "no such compact level");
  const json& pj = need(c.suite, "pairs", c.path);
  const std::vector<Fn> a = c.model.probes(pj, *seq.limit, c.rng, c.path + ".pairs");
  const std::vector<Fn> b = c.model.probes(pj, *seq.limit, c.rng, c.path + ".pairs");
  std::vector<EquiProbe> probes;
  double radius = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    probes.push_back({lift_to_members(seq, a[k]), lift_to_members(seq, b[k])});
    radius = std::max({radius, sup_norm(a[k]), sup_norm(b[k])});
  }
  eo.radius = get_double(c.suite, "radius", c.path, radius);
  const EquicontinuityFit fit = estimate_equicontinuity(rs, seq, q, probes, eo);
  const bool expect = get_bool(c.suite, "expect_found", c.path, true);
  c.out["found"] = fit.found;
  c.out["expect_found"] = expect;
  c.out["q"] = fit.q;
  c.out["q_hat"] = fit.q_hat;
  c.out["excess"] = nums(fit.excess);
  Table t{c.name, {"q_hat", "excess"}, {}};
  for (std::size_t k = 0; k < fit.excess.size(); ++k) t.add({cell(k), cell(fit.excess[k])});
  c.tables.push_back(std::move(t));
  return fit.found == expect;
}

bool suite_crandall_liggett(SuiteContext& c) {
  const std::string op = get_string(c.suite, "operator", c.path);
  const std::string type = c.model.operator_type(op, c.path);
  const Hamiltonian h = c.model.single(op, c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const double t = get_double(c.suite, "t", c.path);
  if (!(t >= 0.0)) fail(c.path + ".t", "must be nonnegative");
  std::vector<int> ns;
  for (double n : positive_list(c.suite, "n_steps", c.path)) ns.push_back(static_cast<int>(n));
  const Fn f = c.model.function(need(c.suite, "f", c.path), *h.space, c.rng, c.path + ".f");
  const std::string oracle = get_string(c.suite, "oracle", c.path, "none");
  std::optional<Fn> ref;
  if (oracle == "logexp") {
    if (type != "tilt") fail(c.path + ".oracle", "logexp needs a tilt operator");
    ref = logexp_oracle(c.model.rates(op, c.path), t, f);
  } else if (oracle == "expm") {
    if (type != "linear") fail(c.path + ".oracle", "expm needs a linear operator");
    ref = rate_exponential(c.model.rates(op, c.path), t) * f;
  } else if (oracle != "none") {
    fail(c.path + ".oracle", "expected none, logexp or expm");
  }
  const double tol = get_double(c.suite, "tol", c.path, 1e-3);
  const TrendReport tr = convergence_in_n(r, t, f, ns, tol, ref);
  bool pass = tr.pass;
  if (c.suite.contains("slope")) {
    const std::vector<double> s = get_doubles(c.suite, "slope", c.path);
    if (s.size() != 2) fail(c.path + ".slope", "expected [low, high]");
    const bool in = tr.slope >= s[0] && tr.slope <= s[1];
    c.out["slope_in_range"] = in;
    pass = pass && in;
  }
  c.out["with_oracle"] = tr.with_oracle;
  c.out["monotone"] = tr.monotone;
  c.out["slope"] = num(tr.slope);
  c.out["final"] = num(tr.values.back());
  Table tab{c.name, {"n", "t", tr.with_oracle ? "oracle_error" : "successive_difference"}, {}};
  for (std::size_t k = 0; k < tr.values.size(); ++k) tab.add({cell(tr.n_list[k]), cell(t), cell(tr.values[k])});
  c.tables.push_back(std::move(tab));
  return pass;
}

bool suite_density(SuiteContext& c) {
  const Hamiltonian h = c.model.single(get_string(c.suite, "operator", c.path), c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const Fn f = c.model.function(need(c.suite, "h", c.path), *h.space, c.rng, c.path + ".h");
  const long kmax = get_int(c.suite, "k_max", c.path, 10);
  if (kmax < 0) fail(c.path + ".k_max", "must be nonnegative");
  std::vector<double> ls;
  for (long k = 0; k <= kmax; ++k) ls.push_back(std::ldexp(1.0, static_cast<int>(-k)));
  const double tol = get_double(c.suite, "tol", c.path, 1e-2);
  const DensityCheck d = density_check_zero_operator(r, f, ls, tol);
  c.out["monotone"] = d.monotone;
  c.out["below_tol"] = d.below_tol;
  c.out["trivial_sub"] = d.trivial_sub;
  c.out["trivial_super"] = d.trivial_super;
  c.out["generator_norm"] = num(sup_norm(h(f)));
  Table t{c.name, {"k", "lambda", "deviation"}, {}};
  for (std::size_t k = 0; k < ls.size(); ++k) t.add({cell(k), cell(ls[k]), cell(d.deviations[k])});
  c.tables.push_back(std::move(t));
  return d.pass;
}

bool suite_semigroup_convergence(SuiteContext& c) {
  const std::string op = get_string(c.suite, "operator", c.path);
  const SpaceSequence& seq = c.model.sequence(op, c.path);
  const SolverOptions so = solver_options(c.suite, c.path);
  std::vector<ResolventFamily> rs;
  for (const Hamiltonian& h : c.model.family(op, c.path)) rs.emplace_back(h, so);
  const ResolventFamily limit(c.model.limit_operator(op, c.path), so);
  const double t = get_double(c.suite, "t", c.path);
  const Fn f = c.model.function(need(c.suite, "f", c.path), *seq.limit, c.rng, c.path + ".f");
  LimitOptions lo;
  lo.tol = sequence_tol(c.suite, seq, c.path, 4.0);
  lo.tail_start = tail_of(c.suite, c.path);
  const int cap = static_cast<int>(get_int(c.suite, "cap", c.path, 1 << 16));
  const SemigroupExperiment e = semigroup_convergence_experiment(
      rs, limit, seq, std::vector<double>(seq.count(), t), t, lift_to_members(seq, f), f, lo, cap);
  c.out["verdict"] = verdict_json(e.verdict);
  c.out["limit_n_steps"] = e.limit_n_steps;
  Table tab{c.name, {"n", "t", "n_steps", "change"}, {}};
  for (std::size_t n = 0; n < seq.count(); ++n) tab.add({cell(n), cell(t), cell(e.n_steps[n]), cell(e.changes[n])});
  c.tables.push_back(std::move(tab));
  return e.verdict.pass;
}

bool suite_envelopes(SuiteContext& c) {
  const std::string op = get_string(c.suite, "operator", c.path);
  const SpaceSequence& seq = c.model.sequence(op, c.path);
  SolverOptions so = solver_options(c.suite, c.path);
  so.accept_unconverged = so.accept_unconverged || get_bool(c.suite, "accept_unconverged", c.path, false);
  std::vector<ResolventFamily> rs;
  for (const Hamiltonian& h : c.model.family(op, c.path)) rs.emplace_back(h, so);
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  const std::vector<Fn> d = c.model.probes(need(c.suite, "probes", c.path), *seq.limit, c.rng, c.path + ".probes");
  LimitOptions lo;
  lo.tol = sequence_tol(c.suite, seq, c.path, 4.0);
  lo.tail_start = tail_of(c.suite, c.path);
  const std::size_t ncell = d.size() * lambdas.size();
  std::vector<EnvelopePair> env(ncell);
  std::vector<FnSequence> lifted;
  for (const Fn& h : d) lifted.push_back(lift_to_members(seq, h));
  parallel_for(ncell, c.jobs, [&](std::size_t k) {
    env[k] = barles_perthame_envelopes(rs, seq, lifted[k / lambdas.size()], d[k / lambdas.size()],
                                       lambdas[k % lambdas.size()], lo, 1);
  });
  bool pass = true;
  ojson cells = ojson::array();
  ojson separation = ojson::array();
  Table t{c.name, {"probe", "lambda", "gap", "tol", "gap_x", "lim_pass", "lim_worst", "max_residual"}, {}};
  for (std::size_t k = 0; k < ncell; ++k) {
    const EnvelopePair& e = env[k];
    const Fn mid = 0.5 * (e.upper + e.lower);
    const ConvergenceVerdict v = check_LIM(seq, e.solutions, mid, lo);
    const bool coincide = e.gap <= lo.tol;
    pass = pass && coincide && v.pass;
    double worst = 0.0;
    for (const QVerdict& q : v.per_q) worst = std::max(worst, q.worst_dev);
    double res = 0.0;
    for (double x : e.residuals) res = std::max(res, x);
    const double gx = e.gap_point >= 0 ? seq.limit->coords(e.gap_point, 0) : 0.0;
    ojson j;
    j["probe"] = k / lambdas.size();
    j["lambda"] = num(lambdas[k % lambdas.size()]);
    j["gap"] = num(e.gap);
    j["gap_point"] = e.gap_point;
    j["envelopes_coincide"] = coincide;
    j["lim"] = verdict_json(v);
    j["all_converged"] = e.all_converged;
    j["residuals"] = nums(e.residuals);
    j["warnings"] = e.warnings;
    cells.push_back(j);
    if (!coincide) {
      separation.push_back({{"probe", k / lambdas.size()}, {"lambda", num(lambdas[k % lambdas.size()])},
                            {"gap", num(e.gap)}, {"tol", num(lo.tol)}, {"x", num(gx)}});
    }
    t.add({cell(k / lambdas.size()), cell(lambdas[k % lambdas.size()]), cell(e.gap), cell(lo.tol), cell(gx),
           cell(v.pass), cell(worst), cell(res)});
  }
  c.out["tol"] = num(lo.tol);
  c.out["cells"] = cells;
  c.out["separation"] = separation;
  c.out["separated"] = !separation.empty();
  c.tables.push_back(std::move(t));
  return pass;
}

bool suite_resolvent_convergence(SuiteContext& c) {
  const std::string op = get_string(c.suite, "operator", c.path);
  const SpaceSequence& seq = c.model.sequence(op, c.path);
  std::vector<Hamiltonian> members = c.model.family(op, c.path);
  OperatorSequence hs = make_operator_sequence(seq, members);
  const Hamiltonian hl = c.model.limit_operator(op, c.path);
  const std::vector<Fn> tests = c.model.probes(need(c.suite, "tests", c.path), *seq.limit, c.rng, c.path + ".tests");
  const IndexSet all = full_index_set(seq.limit->size());
  hs.limit_dagger = limit_graph(hl, tests, all, GraphKind::dagger);
  hs.limit_ddagger = limit_graph(hl, tests, all, GraphKind::ddagger);
  const std::vector<Fn> d = c.model.probes(need(c.suite, "probes", c.path), *seq.limit, c.rng, c.path + ".probes");
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  ResolventExperimentOptions o;
  o.lim.tol = sequence_tol(c.suite, seq, c.path, 4.0);
  o.lim.tail_start = tail_of(c.suite, c.path);
  o.solver = solver_options(c.suite, c.path);
  o.solver.accept_unconverged = o.solver.accept_unconverged || get_bool(c.suite, "accept_unconverged", c.path, false);
  if (get_bool(c.suite, "direct", c.path, true)) o.limit_hamiltonian = hl;
  o.equi_q = static_cast<std::size_t>(get_int(c.suite, "equi_q", c.path, 0));
  o.jobs = c.jobs;
  const ResolventExperimentReport rep = resolvent_convergence_experiment(hs, d, lambdas, o);
  ojson cond = ojson::array();
  for (const ConditionItem& i : rep.condition) cond.push_back({{"label", i.label}, {"pass", i.pass}, {"detail", i.detail}});
  ojson cells = ojson::array();
  Table t{c.name, {"probe", "lambda", "gap", "tol", "lim_pass", "transfer_sub", "transfer_super", "direct_error"}, {}};
  for (const CellResult& r : rep.cells) {
    cells.push_back({{"probe", r.probe}, {"lambda", num(r.lambda)}, {"gap", num(r.gap)},
                     {"envelopes_coincide", r.envelopes_coincide}, {"lim", verdict_json(r.lim)},
                     {"transfer_sub", r.transfer_sub}, {"transfer_super", r.transfer_super},
                     {"direct_error", r.direct_error ? num(*r.direct_error) : ojson()}});
    t.add({cell(r.probe), cell(r.lambda), cell(r.gap), cell(o.lim.tol), cell(r.lim.pass), cell(r.transfer_sub),
           cell(r.transfer_super), r.direct_error ? cell(*r.direct_error) : std::string()});
  }
  ojson ident = ojson::array();
  for (const IdentityReport& i : rep.limit_identity) {
    ident.push_back({{"alpha", num(i.alpha)}, {"beta", num(i.beta)}, {"residual", num(i.residual)}, {"pass", i.pass}});
  }
  ojson strict = ojson::array();
  for (const StrictFit& s : rep.limit_strict_fit) {
    strict.push_back({{"found", s.found}, {"k_hat", s.k_hat}, {"c0", num(s.c0)}, {"c1", num(s.c1)}});
  }
  c.out["tol"] = num(o.lim.tol);
  c.out["condition"] = cond;
  c.out["cells"] = cells;
  c.out["limit_identity"] = ident;
  c.out["limit_strict_fit"] = strict;
  c.out["warnings"] = rep.warnings;
  c.tables.push_back(std::move(t));
  return rep.pass;
}

bool suite_averaging(SuiteContext& c) {
  const std::string op = get_string(c.suite, "operator", c.path);
  const SpaceEntry& sp = c.model.product_entry(op, c.path);
  const SlowFastCoupling coupling = c.model.coupling(op, c.path);
  const Fn h = c.model.function(need(c.suite, "h", c.path), *sp.slow, c.rng, c.path + ".h");
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  const std::vector<double> ns = positive_list(c.suite, "n_values", c.path);
  const double min_order = get_double(c.suite, "min_order", c.path, 0.8);
  const double max_error = get_double(c.suite, "max_error", c.path, 5e-2);
  const SolverOptions so = solver_options(c.suite, c.path);
  bool pass = true;
  ojson runs = ojson::array();
  Table t{c.name, {"lambda", "n", "oscillation", "error"}, {}};
  for (double l : lambdas) {
    const AveragingReport a = slowfast_averaging_experiment(*sp.product, coupling, h, l, ns, so, c.jobs);
    const bool ok = a.order >= min_order && a.final_error <= max_error;
    pass = pass && ok;
    runs.push_back({{"lambda", num(l)}, {"order", num(a.order)}, {"final_error", num(a.final_error)}, {"pass", ok}});
    for (std::size_t k = 0; k < ns.size(); ++k) t.add({cell(l), cell(ns[k]), cell(a.oscillation[k]), cell(a.error[k])});
  }
  c.out["min_order"] = num(min_order);
  c.out["max_error"] = num(max_error);
  c.out["runs"] = runs;
  c.tables.push_back(std::move(t));
  return pass;
}

bool suite_viscosity(SuiteContext& c) {
  const Hamiltonian h = c.model.single(get_string(c.suite, "operator", c.path), c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  const std::vector<Fn> hs = c.model.probes(need(c.suite, "probes", c.path), *h.space, c.rng, c.path + ".probes");
  ViscosityOptions vo;
  vo.tol = get_double(c.suite, "tol", c.path, 1e-8);
  const HhatGraph hh = build_Hhat(r, lambdas, hs);
  OperatorGraph sup_graph = hh.graph;
  sup_graph.kind = GraphKind::ddagger;
  const std::size_t np = hh.graph.pairs.size();
  std::vector<ViscosityReport> sub(np), super(np);
  parallel_for(np, c.jobs, [&](std::size_t k) {
    const Fn& u = hh.graph.pairs[k].f;
    sub[k] = check_subsolution(u, hh.graph, hh.sources[k], hh.lambdas[k], vo);
    super[k] = check_supersolution(u, sup_graph, hh.sources[k], hh.lambdas[k], vo);
  });
  bool pass = true;
  double worst = 0.0;
  Table t{c.name, {"pair", "lambda", "sub_slack", "super_slack", "pass"}, {}};
  for (std::size_t k = 0; k < np; ++k) {
    pass = pass && sub[k].pass && super[k].pass;
    worst = std::max({worst, sub[k].slack, -super[k].slack});
    t.add({cell(k), cell(hh.lambdas[k]), cell(sub[k].slack), cell(super[k].slack), cell(sub[k].pass && super[k].pass)});
  }
  c.out["pairs"] = np;
  c.out["worst_slack"] = num(worst);
  if (c.suite.contains("spike")) {
    // u + eps at one point must break the subsolution inequality there.
    const double eps = get_double(c.suite, "spike", c.path);
    if (!(eps > vo.tol)) fail(c.path + ".spike", "spike must exceed tol");
    Fn u = hh.graph.pairs.front().f;
    const Index at = u.size() / 2;
    u[at] += eps;
    const ViscosityReport rep = check_subsolution(u, hh.graph, hh.sources.front(), hh.lambdas.front(), vo);
    bool witness_ok = false;
    for (const PairCheck& p : rep.pairs) {
      if (!p.pass && p.witness == at) witness_ok = true;
    }
    c.out["spike"] = {{"point", at}, {"detected", !rep.pass}, {"witness_ok", witness_ok}};
    pass = pass && !rep.pass && witness_ok;
  }
  c.tables.push_back(std::move(t));
  return pass;
}

bool suite_dissipativity(SuiteContext& c) {
  const Hamiltonian h = c.model.single(get_string(c.suite, "operator", c.path), c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  const std::vector<double> check = positive_list(c.suite, "check_lambdas", c.path, lambdas);
  const std::vector<Fn> hs = c.model.probes(need(c.suite, "probes", c.path), *h.space, c.rng, c.path + ".probes");
  const double tol = get_double(c.suite, "tol", c.path, 1e-9);
  const HhatGraph hh = build_Hhat(r, lambdas, hs);
  const DissipativityReport d = check_dissipative(hh.graph.pairs, check, tol);
  c.out["pairs"] = hh.graph.pairs.size();
  c.out["checked"] = d.checked;
  c.out["violations"] = d.violations.size();
  Table t{c.name, {"first", "second", "lambda", "lhs", "rhs"}, {}};
  for (const auto& v : d.violations) t.add({cell(v.first), cell(v.second), cell(v.lambda), cell(v.lhs), cell(v.rhs)});
  c.tables.push_back(std::move(t));
  return d.pass();
}

bool suite_comparison(SuiteContext& c) {
  const Hamiltonian h = c.model.single(get_string(c.suite, "operator", c.path), c.path);
  const ResolventFamily r(h, solver_options(c.suite, c.path));
  const std::vector<double> lambdas = positive_list(c.suite, "lambdas", c.path);
  const json& pj = need(c.suite, "pairs", c.path);
  const std::vector<Fn> a = c.model.probes(pj, *h.space, c.rng, c.path + ".pairs");
  const std::vector<Fn> b = c.model.probes(pj, *h.space, c.rng, c.path + ".pairs");
  const double tol = get_double(c.suite, "tol", c.path, 1e-8);
  bool pass = true;
  double worst = -kInf;
  Table t{c.name, {"lambda", "pair", "slack"}, {}};
  for (double l : lambdas) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      const ComparisonResult cr = check_comparison(r(l, a[k]), r(l, b[k]), a[k], b[k], tol);
      pass = pass && cr.pass;
      worst = std::max(worst, cr.slack);
      t.add({cell(l), cell(k), cell(cr.slack)});
    }
  }
  c.out["worst_slack"] = num(worst);
  c.tables.push_back(std::move(t));
  return pass;
}

const std::map<std::string, std::map<std::string, SuiteType>>& registry() {
  static const std::map<std::string, std::map<std::string, SuiteType>> reg = {
      {"resolvent",
       {{"solve", {with_common({"operator", "lambdas", "probes", "oracle", "tol", "solver"}), suite_solve}},
        {"identity", {with_common({"operator", "alphas", "betas", "probes", "tol", "solver"}), suite_identity}},
        {"contractivity", {with_common({"operator", "lambdas", "pairs", "tol", "solver"}), suite_contractivity}},
        {"equicontinuity",
         {with_common({"operator", "q", "delta", "lambdas", "lambda0", "radius", "pairs", "max_q_hat", "tail_start",
                       "expect_found", "solver"}),
          suite_equicontinuity}}}},
      {"semigroup",
       {{"crandall_liggett",
         {with_common({"operator", "t", "n_steps", "f", "oracle", "tol", "slope", "solver"}), suite_crandall_liggett}},
        {"density", {with_common({"operator", "h", "k_max", "tol", "solver"}), suite_density}},
        {"semigroup_convergence",
         {with_common({"operator", "t", "f", "tol", "tol_spacing_factor", "tail_start", "cap", "solver"}),
          suite_semigroup_convergence}}}},
      {"converge",
       {{"envelopes",
         {with_common({"operator", "probes", "lambdas", "tol", "tol_spacing_factor", "tail_start", "accept_unconverged",
                       "solver"}),
          suite_envelopes}},
        {"resolvent_convergence",
         {with_common({"operator", "tests", "probes", "lambdas", "tol", "tol_spacing_factor", "tail_start", "equi_q",
                       "direct", "accept_unconverged", "solver"}),
          suite_resolvent_convergence}},
        {"averaging",
         {with_common({"operator", "h", "lambdas", "n_values", "min_order", "max_error", "solver"}), suite_averaging}}}},
      {"check",
       {{"viscosity", {with_common({"operator", "lambdas", "probes", "tol", "spike", "solver"}), suite_viscosity}},
        {"dissipativity",
         {with_common({"operator", "lambdas", "check_lambdas", "probes", "tol", "solver"}), suite_dissipativity}},
        {"pseudo_resolvent", {with_common({"operator", "alphas", "betas", "probes", "tol", "solver"}), suite_identity}},
        {"comparison", {with_common({"operator", "lambdas", "pairs", "tol", "solver"}), suite_comparison}}}},
  };
  return reg;
}

json load_config(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw SchemaError("cannot read config " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
}

void write_report(const std::filesystem::path& out, const ojson& report, const std::vector<Table>& tables) {
  std::filesystem::create_directories(out / "tables");
  std::ofstream os(out / "report.json", std::ios::binary);
  os << report.dump(2) << "\n";
  for (const Table& t : tables) write_table(out / "tables", t);
}

int run_command(const std::string& command, const RunOptions& opts) {
  ojson report;
  report["schema_version"] = kSchemaVersion;
  report["command"] = command;
  std::vector<Table> tables;
  try {
    const json cfg = load_config(opts.config);
    if (!cfg.is_object()) throw SchemaError("config: expected an object");
    std::uint64_t seed = 0;
    if (cfg.contains("seed")) {
      if (!cfg.at("seed").is_number_unsigned()) throw SchemaError("config.seed: expected a nonnegative integer");
      seed = cfg.at("seed").get<std::uint64_t>();
    }
    if (opts.seed) seed = *opts.seed;
    if (opts.jobs < 1) throw SchemaError("--jobs must be at least 1");
    report["seed"] = seed;
    Model model(cfg, seed);
    const auto& types = registry().at(command);

    json suites = json::array();
    if (cfg.contains(command)) suites = cfg.at(command);
    if (!suites.is_array()) throw SchemaError("config." + command + ": expected an array of suites");
    // Validate every suite before running any.
    std::set<std::string> names;
    for (std::size_t i = 0; i < suites.size(); ++i) {
      const std::string path = command + "[" + std::to_string(i) + "]";
      const json& s = suites[i];
      const std::string type = get_string(s, "type", path);
      auto it = types.find(type);
      if (it == types.end()) fail(path, "unknown suite type '" + type + "' for " + command);
      allow_keys(s, it->second.keys, path);
      const std::string name = get_string(s, "name", path);
      if (name.empty() || name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
                              std::string::npos) {
        fail(path + ".name", "names use [A-Za-z0-9_-]");
      }
      if (!names.insert(name).second) fail(path + ".name", "duplicate suite name '" + name + "'");
      if (s.contains("operator")) model.operator_spec(get_string(s, "operator", path), path);
    }

    bool all = true;
    ojson results = ojson::array();
    for (std::size_t i = 0; i < suites.size(); ++i) {
      const json& s = suites[i];
      const std::string path = command + "[" + std::to_string(i) + "]";
      const std::string name = s.at("name").get<std::string>();
      const std::string type = s.at("type").get<std::string>();
      ojson out;
      out["name"] = name;
      out["type"] = type;
      if (get_bool(s, "negative_control", path, false)) out["negative_control"] = true;
      ojson details = ojson::object();
      SuiteContext ctx{model, s, path, name, Rng(seed, "suite:" + command + ":" + name), opts.jobs, details, tables};
      bool pass = false;
      try {
        pass = types.at(type).run(ctx);
      } catch (const SchemaError&) {
        throw;
      } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
      } catch (const ConfigurationError& e) {
        throw SchemaError(path + ": " + e.what());
      } catch (const StructuralError& e) {
        throw SchemaError(path + ": " + e.what());
      } catch (const ParameterError& e) {
        throw SchemaError(path + ": " + e.what());
      } catch (const Error& e) {
        details["error"] = e.what();
        pass = false;
      }
      out["pass"] = pass;
      out["details"] = details;
      results.push_back(out);
      all = all && pass;
    }
    report["pass"] = all;
    report["suites"] = results;
    write_report(opts.out, report, tables);
    return all ? kExitPass : kExitFail;
  } catch (const SchemaError& e) {
    report["pass"] = false;
    report["schema_error"] = e.what();
    try {
      write_report(opts.out, report, {});
    } catch (const std::exception&) {
    }
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return kExitSchema;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return kExitSchema;
  }
}

}  // namespace

int cmd_resolvent(const RunOptions& opts) { return run_command("resolvent", opts); }
int cmd_semigroup(const RunOptions& opts) { return run_command("semigroup", opts); }
int cmd_converge(const RunOptions& opts) { return run_command("converge", opts); }
int cmd_check(const RunOptions& opts) { return run_command("check", opts); }

int run(int argc, char** argv) {
  CLI::App app{"Resolvent and viscosity-solution experiments on finite spaces"};
  app.require_subcommand(1);
  RunOptions opts;
  std::uint64_t seed = 0;
  std::string command;
  const std::pair<const char*, const char*> commands[] = {
      {"resolvent", "solve, pseudo-resolvent identity, contractivity and equi-continuity suites"},
      {"semigroup", "Crandall-Liggett iteration, oracle comparisons and the zero-operator density check"},
      {"converge", "envelope, resolvent-convergence and slow-fast averaging experiments"},
      {"check", "viscosity, dissipativity, pseudo-resolvent and comparison property suites"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "experiment config (JSON)")->required();
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the config seed");
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitSchema;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed")) opts.seed = seed;
  }
  return run_command(command, opts);
}

}  // namespace hjlab::cli
