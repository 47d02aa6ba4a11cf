#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emfg/types.hpp"

namespace emfg {

/// Options for the closed-form-versus-oracle verification suite.
struct CheckOptions {
    std::uint64_t seed = 1;
    int instances = 100;
    /// Name of a case whose closed-form output gets a sign flip before
    /// comparison; used to prove the suite actually detects a broken
    /// formula. Empty = no mutation.
    std::string inject_error_case;
    /// Skip the quadrature comparisons (they dominate the runtime).
    bool skip_quadrature = false;
    /// Run only cases whose name contains this substring (empty = all).
    std::string filter;
};

struct CaseResult {
    std::string name;
    int instances = 0;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string worst_instance;  ///< serialized inputs of the worst instance
};

struct CheckSummary {
    std::vector<CaseResult> cases;
    bool all_pass = true;
};

/// Runs every comparison: the five closed-form EM messages against the
/// generic-rule quadrature, the marginal formulas against brute-force joint
/// conditioning, the fixed-observation specialization, the kind coincidences,
/// the vectorization identities, and the Monte Carlo trace identity.
/// Deterministic given the seed.
CheckSummary run_check_tables(const CheckOptions& opts);

std::string format_summary(const CheckSummary& summary);

}  // namespace emfg
