#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eovseg/fault.hpp"

namespace eovseg {

struct CheckResult {
    std::string name;
    bool passed = true;
    std::size_t instances = 0;
    double worst = 0.0;  // largest deviation seen (max abs diff unless noted)
    std::string detail;  // first failure description
};

struct VerifyOptions {
    std::size_t trials = 25;
    std::uint64_t seed = 0;
    double tolerance = 1e-5;
    Fault fault = Fault::none;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    double seconds = 0.0;

    bool passed() const;
    const CheckResult* first_failure() const;
};

// Runs every oracle-equivalence and invariant check, in a fixed order
// starting with the contraction and softmax kernels. Extents stay <= 8.
VerifyReport run_verification(const VerifyOptions& options);

std::string format_report(const VerifyReport& report);

}  // namespace eovseg
