#pragma once

#include <string>
#include <vector>

namespace cfmimo {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Self-contained correctness checks runnable from the CLI: analytic gradient
// against central finite differences, closed-form projections against exact
// enumeration, the estimator statistics against Monte-Carlo simulation, and
// surrogate tightness/bounding at and around expansion points.
std::vector<CheckResult> run_validation_suite(bool quick = true);

}  // namespace cfmimo
