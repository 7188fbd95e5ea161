#pragma once

/**
 * @file
 * @brief Property suites over every module, run by `gopo_cli check`.
 *
 * Each suite draws its random instances from a fixed seed, so a run is
 * reproducible.
 */

#include <string>
#include <string_view>
#include <vector>

namespace gopo {

/// Deliberate faults for exercising the failure path of the suites.
enum class Fault {
  None,
  /// Negate lambda* of every bounded projection the hilbert suite inspects.
  FlipBhpLambda,
};

struct CheckResult
{
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// hilbert, signal, objectives, dynamics, trainer
const std::vector<std::string>& suite_names();

/// Runs one suite, or every suite for "all". Throws std::invalid_argument on
/// an unknown suite name.
std::vector<CheckResult> run_checks(std::string_view suite = "all", Fault fault = Fault::None);

}  // namespace gopo
