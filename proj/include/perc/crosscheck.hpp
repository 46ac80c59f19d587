#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace perc::crosscheck {

struct CheckResult {
  std::string name;
  double p = 0.0;
  double mc_mean = 0.0, mc_std_error = 0.0;
  double exact = 0.0;
  double z = 0.0;  // |mc - exact| / std_error
  bool pass = false;
};

// The master oracle-vs-MC property suite: every estimator is compared against
// the exact enumeration oracle on a designated enumerable instance, at
// p in {0.3, 0.5, 0.7}, within `sigmas` standard errors.
std::vector<CheckResult> core_suite(std::uint64_t samples, std::uint64_t seed, int threads,
                                    double sigmas = 3.0);

bool all_pass(const std::vector<CheckResult>& results);

}  // namespace perc::crosscheck
