#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace offpolicy {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Fast oracle and invariant checks (a few seconds). All randomness derives from `seed`.
std::vector<CheckResult> run_checks(std::uint64_t seed);

} // namespace offpolicy
