#pragma once

#include "hjlab/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hjlab::cli {

// Malformed or inconsistent configuration. Maps to exit code 2.
class SchemaError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitSchema = 2;
inline constexpr int kSchemaVersion = 1;

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out = "out";
  int jobs = 1;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

// Each command runs the suites listed under its own key of the config
// ("resolvent", "semigroup", "converge", "check") and writes
// <out>/report.json plus <out>/tables/*.csv.
int cmd_resolvent(const RunOptions& opts);
int cmd_semigroup(const RunOptions& opts);
int cmd_converge(const RunOptions& opts);
int cmd_check(const RunOptions& opts);

// argv front end: hjlab <resolvent|semigroup|converge|check> --config PATH
// [--out DIR] [--jobs N] [--seed S].
int run(int argc, char** argv);

}  // namespace hjlab::cli
