#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace voxelpipe {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;  // populated on failure
};

// Runs the built-in invariant suites (rng, voxel, kernels, vfe, detector,
// targets, augment, postprocess, checkpoint, trainer). filter keeps suites
// whose name contains it; empty runs everything.
std::vector<CheckResult> run_selfcheck(const std::string& filter);

// Prints one line per check plus a summary; returns the process exit code
// (0 all passed, 1 otherwise).
int selfcheck_report(const std::string& filter, std::ostream& out);

}  // namespace voxelpipe
