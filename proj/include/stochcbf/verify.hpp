#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stochcbf {

struct VerifyOptions {
    bool fast = false;                // trimmed sample counts, finishes well under a minute
    bool inject_corruption = false;   // test hook: perturb one closed form so checks must fail
    std::uint64_t seed = 20240601;
    int max_threads = 0;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// The library's invariant suite: closed-form moments against the Monte-Carlo
/// oracle, cross-solver agreement, residual identities, bound identities and
/// along-trajectory supermartingale audits on every preset.
std::vector<CheckResult> run_verification(const VerifyOptions& opts);

}  // namespace stochcbf
