#pragma once

#include "crstokes/solver.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crstokes {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitAuditFailed = 4;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command = "solve";  // solve | study | verify | mesh-info
  /// File path, or "NxM" for the structured unit square.
  std::string mesh = "8x8";
  double A = 1.0;
  double M = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  bool allow_out_of_range = false;
  SolverControls controls;
  int mode = 0;
  double amplitude = 1.0;
  /// "manufactured" or "zero".
  std::string forcing = "manufactured";
  int levels = 3;
  std::string out = "out";
  bool csv = false;
  bool timestamp = true;
  int threads = 1;
};

/// Applies the keys of a JSON object; unknown keys and type mismatches throw
/// ConfigError (with line and column for syntax errors).
void apply_config_json(RunConfig& cfg, std::string_view json_text);
/// `key=value`; the value is read as JSON when it parses, else as a string.
void apply_param(RunConfig& cfg, std::string_view key_value);
/// Canonical JSON of the configuration (sorted keys, no output-only fields).
std::string canonical_config(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

/// Executes a validated configuration. Progress goes to `log`.
int run(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point.
int run_cli(int argc, char** argv);

}  // namespace crstokes
