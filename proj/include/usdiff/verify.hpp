#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "usdiff/schedule.hpp"

namespace usdiff {

// Test hook: lets callers break a formula on purpose to prove the oracles
// can catch it. PosteriorMu swaps in the mean with the square root taken
// over the whole coefficient products, which the Bayes oracle rejects.
enum class VerifyCorruption { None, PosteriorMu };

struct VerifyConfig {
    std::uint64_t seed = 0;
    int mc_samples = 100000;  // Monte-Carlo budget of the recursion check
    VerifyCorruption corruption = VerifyCorruption::None;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double observed = 0.0;   // worst gap seen
    double tolerance = 0.0;
    std::string detail;
};

// Runs the oracle suite: posterior Bayes sweep, recursion/closed-form
// Monte Carlo, reduction to standard DDPM, denoiser gradient check, metric
// closed forms, and depth-ordered KL monotonicity.
std::vector<CheckResult> run_verification(const VerifyConfig& config);

// One line per check plus a final PASS/FAIL summary; byte-stable for a
// given build and config.
std::string render_verify_report(const std::vector<CheckResult>& results);

bool all_passed(const std::vector<CheckResult>& results);

// Closed-form KL(N(sqrt(c) x0, 1-c) || N(0,1)) per pixel at timestep t.
ImageGrid forward_marginal_kl(const ImageGrid& x0, const BMapStack& stack, int t);

}  // namespace usdiff
