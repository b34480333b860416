#include "cli.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace hjlab;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(HJLAB_SOURCE_DIR) / "configs";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hjlab_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = scratch("configs") / (name + ".json");
  std::ofstream(p) << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

cli::RunOptions opts_for(const fs::path& config, const fs::path& out, int jobs = 1) {
  cli::RunOptions o;
  o.config = config;
  o.out = out;
  o.jobs = jobs;
  return o;
}

int run_args(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("a config without suites passes trivially") {
  const fs::path cfg = write_config("empty", R"({"schema_version": 1})");
  const fs::path out = scratch("empty_out");
  CHECK(cli::cmd_check(opts_for(cfg, out)) == cli::kExitPass);
  CHECK(fs::exists(out / "report.json"));
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(report.is_object());
}

TEST_CASE("schema errors exit with code 2") {
  const fs::path out = scratch("schema_out");
  CHECK(cli::cmd_check(opts_for(write_config("version", R"({"schema_version": 9})"), out)) == cli::kExitSchema);
  CHECK(cli::cmd_check(opts_for(write_config("syntax", R"({"schema_version": )"), out)) == cli::kExitSchema);
  CHECK(cli::cmd_resolvent(opts_for(write_config("operator", R"({"schema_version": 1,
    "resolvent": [{"name": "x", "type": "identity", "operator": "missing", "alphas": [1], "betas": [2], "probes": []}]})"), out)) == cli::kExitSchema);
  CHECK(cli::cmd_check(opts_for(kConfigs / "does_not_exist.json", out)) == cli::kExitSchema);
  CHECK(run_args({"hjlab", "bogus", "--config", (kConfigs / "positive_control.json").string()}) != cli::kExitPass);
}

TEST_CASE("positive control passes every command") {
  const fs::path cfg = kConfigs / "positive_control.json";
  const fs::path out = scratch("positive");
  CHECK(cli::cmd_resolvent(opts_for(cfg, out / "resolvent", 2)) == cli::kExitPass);
  CHECK(cli::cmd_semigroup(opts_for(cfg, out / "semigroup", 2)) == cli::kExitPass);
  CHECK(cli::cmd_converge(opts_for(cfg, out / "converge", 2)) == cli::kExitPass);
  CHECK(cli::cmd_check(opts_for(cfg, out / "check", 2)) == cli::kExitPass);
  for (const char* c : {"resolvent", "semigroup", "converge", "check"}) {
    CHECK(fs::exists(out / c / "report.json"));
    CHECK(fs::is_directory(out / c / "tables"));
  }
}

TEST_CASE("negative control fails its convergence suite") {
  const fs::path out = scratch("negative");
  CHECK(cli::cmd_converge(opts_for(kConfigs / "negative_control.json", out)) == cli::kExitFail);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(report.dump().find("\"pass\":false") != std::string::npos);
}

TEST_CASE("output is byte-identical across runs and job counts") {
  const fs::path cfg = kConfigs / "positive_control.json";
  const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  CHECK(run_args({"hjlab", "resolvent", "--config", cfg.string(), "--out", a.string(), "--jobs", "1"}) == 0);
  CHECK(run_args({"hjlab", "resolvent", "--config", cfg.string(), "--out", b.string(), "--jobs", "1"}) == 0);
  CHECK(run_args({"hjlab", "resolvent", "--config", cfg.string(), "--out", c.string(), "--jobs", "3"}) == 0);
  const auto ta = tree(a);
  CHECK(ta.size() >= 2);
  CHECK(ta == tree(b));
  CHECK(ta == tree(c));
}

TEST_CASE("seed override changes random fixtures deterministically") {
  const fs::path cfg = kConfigs / "positive_control.json";
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  CHECK(run_args({"hjlab", "check", "--config", cfg.string(), "--out", a.string(), "--seed", "99"}) == 0);
  CHECK(run_args({"hjlab", "check", "--config", cfg.string(), "--out", b.string(), "--seed", "99"}) == 0);
  CHECK(tree(a) == tree(b));
}
