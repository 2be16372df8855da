#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tstiefel {

/// One invariant measured against its tolerance. Passes when value <= tolerance.
struct Check {
  std::string suite;
  std::string name;
  double value = 0;
  double tolerance = 0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20240101;
  /// Fault injection: run t-QR without the phase fix.
  bool qr_phase_fix = true;
};

/// algebra, decompositions, exponential, sylvester, retractions, transports,
/// geodesic, gradients, dimension.
const std::vector<std::string>& suite_names();

/// Throws InvalidArgument for an unknown suite.
std::vector<Check> run_suite(const std::string& suite, const VerifyOptions& options = {});

/// "PASS|FAIL  suite/name  value <= tolerance  detail".
std::string format_check(const Check& c);

}  // namespace tstiefel
