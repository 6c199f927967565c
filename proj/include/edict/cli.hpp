#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "edict/error.hpp"

namespace edict::cli {

// Thrown for --help; carries the help text.
struct HelpRequested {
  std::string text;
};

struct UsageError : Error {
  using Error::Error;
};

enum class ExitCode : int { ok = 0, failure = 1, usage = 2, io = 3, numeric = 4, domain = 5 };

struct RunConfig {
  std::string command;  // sample invert roundtrip edit bench diverge align train
  std::string sampler = "edict";
  std::string model = "gauss";
  std::string weights;
  std::string schedule = "scaled_linear";
  std::string spacing = "trailing";
  int train_steps = 1000;
  std::string schedule_csv;
  int steps = 50;
  double strength = 0.8;
  double p = 0.93;
  bool auto_scale_p = false;
  std::optional<double> guidance;  // 7.5, or 3 for edit, when unset
  int label = -1;                  // -1 is the null condition
  int base_label = 0;
  int target_label = 1;
  std::uint64_t seed = 0;
  std::string input;
  std::string out = "edict_out";
  bool store_trajectory = false;
  bool pgm = false;
  std::string steps_grid = "50,200";
  std::string guidance_grid = "7";
  std::string p_grid = "0.5,0.7,0.9,0.93,0.97,1";
  std::string strength_grid;  // edit: extra report rows, empty for none
  int n_inputs = 16;
  int iters = 4000;
  double lr = 2e-3;

  double effective_guidance() const;
  double effective_p() const;  // p, rescaled from 50 steps with auto_scale_p
};

inline const std::vector<std::string> kCommands{"sample", "invert", "roundtrip", "edit",
                                                "bench",  "diverge", "align",   "train"};

// Parses argv (argv[0] is the program name). A `--config FILE` of key=value
// lines supplies values that explicit flags override. Throws UsageError.
RunConfig parse_config(const std::vector<std::string>& args);

// Canonical key=value lines, one per field, fixed order.
std::string canonical(const RunConfig& config);

// Validates cross-field constraints. Throws UsageError.
void validate(const RunConfig& config);

// Runs a validated config. Prints one summary line to `out`. Throws module
// errors; partial outputs are removed before rethrowing.
void run(const RunConfig& config, std::ostream& out);

// Full entry point: parse, validate, run; maps errors to exit codes.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edict::cli
