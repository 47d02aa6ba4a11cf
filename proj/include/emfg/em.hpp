#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emfg/multiplier.hpp"
#include "emfg/state_space.hpp"

namespace emfg {

enum class Schedule { Batch, Serial };

/// Knobs for the iteration: stopping rule, schedule, starting point, and an
/// optional Gaussian prior on theta that joins the equality chain.
struct EmConfig {
    int max_iter = 50;
    double tol = 1e-8;
    Schedule schedule = Schedule::Batch;
    Vec theta_init;  ///< empty = zero vector
    std::optional<GaussianWeight> theta_prior;
};

struct EmReport {
    std::vector<Vec> iterates;     ///< theta_0 .. theta_K
    std::vector<double> log_liks;  ///< log p(y | theta_k), same length
    bool converged = false;
    int iterations_used = 0;
    std::vector<std::string> warnings;
};

/// Allowed decrease of the log likelihood between iterates before a
/// monotonicity warning is recorded (batch schedule only).
inline constexpr double kMonotonicitySlack = 1e-9;

/// The per-section backward EM messages on theta for the current estimate,
/// one per observation. FIR sections go through the fixed-observation
/// inner-product rule; AR sections go through the companion-matrix
/// multiplier marginals with the output observation folded into the
/// backward message.
std::vector<EmGaussian> em_section_messages(const LinearModel& model, const Vec& theta,
                                            const Observations& y,
                                            const Tolerances& tol = default_tolerances());

/// One EM step: sweep, per-section EM messages, combination over the
/// equality chain (plus the optional prior), and the argmax.
Vec em_update(const LinearModel& model, const Vec& theta, const Observations& y,
              const std::optional<GaussianWeight>& theta_prior = std::nullopt,
              const Tolerances& tol = default_tolerances());

/// Full EM iteration with the configured schedule.
EmReport run_em(const LinearModel& model, const Observations& y, const EmConfig& config,
                const Tolerances& tol = default_tolerances());

/// Left-to-right schedule: after refreshing the forward message at each
/// section, the section's EM message and the running combined estimate are
/// recomputed before moving on. One pass per iteration; the likelihood is
/// logged but monotonicity is not guaranteed for this schedule.
EmReport run_em_serial(const LinearModel& model, const Observations& y, const EmConfig& config,
                       const Tolerances& tol = default_tolerances());

}  // namespace emfg
