#pragma once

#include <string>
#include <vector>

namespace semcom::selfcheck {

struct CheckResult {
  std::string name;
  double max_error = 0;
  double tolerance = 0;
  bool passed = false;
};

struct Options {
  // Negates one adjoint inside the composed-architecture gradient checks.
  bool inject_fault = false;
  // Symbols per channel-statistics check.
  std::size_t channel_symbols = 1000000;
};

std::vector<CheckResult> run(const Options& options = {});
bool all_passed(const std::vector<CheckResult>& results);
std::string report(const std::vector<CheckResult>& results);

}  // namespace semcom::selfcheck
