#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nshift/normality_verifier.hpp"
#include "nshift/shift_engine.hpp"

namespace nshift::cli {

enum ExitCode : int {
  kExitPass = 0,
  kExitFail = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitEscape = 4,
};

struct ShiftSummary {
  double max_norm_phi = 0;
  double w_dyn_residual = 0;
  std::vector<double> per_time_spread;
  std::optional<double> speed_law_residual;
  double phi_tolerance = 0;
  double w_tolerance = 0;
  bool force_constant_nu = false;
  int trajectories = 0;
  int time_samples = 0;
  bool pass = false;
};

struct Provenance {
  std::string config_path;
  std::string config_hash;  ///< "fnv1a64:" followed by 16 hex digits
  std::string tool_version;
  std::string started_at;   ///< UTC, ISO 8601
  std::string finished_at;
  std::uint64_t seed = 0;
};

struct ReportBundle {
  std::string scenario;
  std::string command;  ///< verify | shift
  std::optional<NormalityReport> normality;
  std::optional<ShiftSummary> shift_summary;
  Provenance provenance;
  int exit_code = 0;
};

std::string bundle_to_json(const ReportBundle& bundle);
/// Throws ConfigError when the text is not a well-formed bundle.
ReportBundle bundle_from_json(const std::string& text);

/// Fixed-schema trajectory table: traj_id, t, x1..xn, v1..vn, speed, W,
/// phi_1..phi_{n-1}; 17 significant digits, LF line endings.
std::string trajectories_csv(const ShiftRecord& rec);

struct CommandOptions {
  std::optional<double> tolerance;
  std::optional<std::uint64_t> seed;
  bool force_constant_nu = false;
  std::string out_dir = ".";
};

int cmd_verify(const std::string& config_path, const CommandOptions& opts, std::ostream& out,
               std::ostream& err);
int cmd_shift(const std::string& config_path, const CommandOptions& opts, std::ostream& out,
              std::ostream& err);
int cmd_report(const std::string& bundle_path, std::ostream& out, std::ostream& err);

/// Entry point shared by the executable: parses argv and dispatches.
int run_cli(int argc, char** argv);

}  // namespace nshift::cli
