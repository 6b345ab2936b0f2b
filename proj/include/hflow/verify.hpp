#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hflow {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::vector<std::string> suites;  // empty: all
  std::uint64_t seed = 7;
  // Test fixture: flips the sign of grad_reduced inside the gradient check.
  bool inject_gradient_fault = false;
};

// "gradient", "bregman", "bounds".
const std::vector<std::string>& verify_suite_names();

// Throws ArgumentError for an unknown suite name.
std::vector<CheckResult> run_verify(const VerifyOptions& opts);

// One "PASS|FAIL suite/name: detail" line per check.
void print_verify_report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace hflow
