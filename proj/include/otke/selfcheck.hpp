#pragma once

#include "otke/types.hpp"

#include <string>
#include <vector>

namespace otke {

struct SuiteResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0;
};

// Numerical verification suites over seeded random instances. Each returns
// pass/fail plus a one-line summary of the worst observed quantity.
SuiteResult check_sinkhorn_feasibility(int instances = 200, std::uint64_t seed = 7);
SuiteResult check_kernel_identity(int trials = 100, std::uint64_t seed = 11);
SuiteResult check_lemma_bound(int trials = 100, std::uint64_t seed = 13);
SuiteResult check_barycenter_bounds(int trials = 20, std::uint64_t seed = 17);
SuiteResult check_gradients(std::uint64_t seed = 42);
SuiteResult check_gram_psd_and_cost(int sets = 50, std::uint64_t seed = 19);
SuiteResult check_multireference(std::uint64_t seed = 23);

std::vector<SuiteResult> run_all_checks();
SuiteResult run_named_check(const std::string& suite, int trials);

}  // namespace otke
