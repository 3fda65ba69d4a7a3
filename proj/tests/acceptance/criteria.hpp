#pragma once

#include <functional>
#include <string>
#include <vector>

namespace cwgan::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

/// Runs in the double-precision build.
Outcome gradient_suite();

/// Everything else, single precision.
std::vector<Criterion> criteria();

}  // namespace cwgan::acceptance
