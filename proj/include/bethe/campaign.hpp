#pragma once
#include <string>
#include <vector>

#include "bethe/config.hpp"

namespace bethe {

// Oracle cross-check suite gating every run: recursion vs direct solve,
// resolvent identity, free closed forms, Kesten-McKay extrapolation, Lloyd
// closed form, worker-count determinism.  All checks are sub-second.
std::vector<ValidationCheck> validation_suite();

struct RunOptions {
  bool gnuplot = false;  // also emit two-column .dat next to DOS curves
};

struct RunOutcome {
  int exit_code = 0;    // 0 ok, 1 validation/runtime failure, 2 config error
  std::string out_dir;  // run directory (empty when nothing was written)
  std::string message;
};

// Validate, gate on the validation suite (cached per build in the output
// root), compute, then write CSVs and manifest.json atomically.
RunOutcome run_experiment(const ExperimentConfig& c, const RunOptions& opt = {});

// Pretty-print a stored manifest; never recomputes.  0 ok, 2 missing/corrupt.
int report_directory(const std::string& dir);

std::string default_output_root();

}  // namespace bethe
