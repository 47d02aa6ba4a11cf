#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "emfg/multiplier.hpp"
#include "emfg/state_space.hpp"

namespace emfg {
namespace oracle {

/// Tensor-product quadrature layout: points per integration dimension and
/// the half width of each axis in posterior standard deviations.
struct QuadratureGrid {
    int points_per_dim = 32;
    double half_width_sigmas = 8.0;
};

/// Probe set around theta for fitting the quadratic exponent: theta itself,
/// single steps, and pair steps; affinely rich with a few redundant points.
std::vector<Vec> default_probes(const Vec& theta, double step = 1.0);

/// Numeric evaluation of the generic EM rule for a grouped multiplier node:
/// the exponent eta(theta) is integrated on a tensor grid at each probe and
/// an exact quadratic -theta'W theta/2 + theta'Wm + c is fitted.
/// Returns (W, Wm). Probes live in the stacked parameter space (rvect for
/// GeneralMatrix). Throws IllConditionedFit if the fit residual exceeds 1e-6
/// relative; the exponent is exactly quadratic, so a bad residual means a
/// broken setup rather than noise.
std::pair<Mat, Vec> em_message_quadrature(const MultiplierSpec& spec, const Mat& theta,
                                          const GaussianMoment& fwd_x,
                                          const GaussianMoment& bwd_y,
                                          const QuadratureGrid& grid,
                                          const std::vector<Vec>& theta_probes,
                                          const Tolerances& tol = default_tolerances());

/// Exact local marginals by brute force: forms the joint Gaussian of
/// (X, Y = A(theta) X + Z), multiplies the backward message in as a
/// likelihood on Y, and reads the blocks off. Entirely independent of the
/// tabulated formulas.
MultiplierMarginals condition_joint(const MultiplierSpec& spec, const Mat& theta,
                                    const GaussianMoment& fwd_x, const GaussianMoment& bwd_y,
                                    const Tolerances& tol = default_tolerances());
MultiplierMarginals condition_joint(const MultiplierSpec& spec, const Mat& theta,
                                    const GaussianMoment& fwd_x, const GaussianWeight& bwd_y,
                                    const Tolerances& tol = default_tolerances());

/// Joint posterior over the stacked vector (x, y); used internally by
/// condition_joint and by the quadrature grid placement.
GaussianMoment joint_posterior(const MultiplierSpec& spec, const Mat& theta,
                               const GaussianMoment& fwd_x, const GaussianMoment& bwd_y,
                               const Tolerances& tol = default_tolerances());

struct McMomentsResult {
    double mc_estimate;  ///< sample mean of x'Wy
    double analytic;     ///< tr(W V_XY') + m_X' W m_Y
    double std_error;    ///< standard error of the sample mean
};

/// Monte Carlo check of the trace identity E[X'WY] = tr(W V_XY') + m_X'W m_Y
/// for Y = A(theta) X + Z. Requires square W (m == n). The noise covariance
/// is passed explicitly so degenerate cases (including V_Z = 0) can be
/// exercised. Deterministic given the seed.
McMomentsResult mc_moments(const MultiplierSpec& spec, const Mat& theta,
                           const GaussianMoment& fwd_x, const Mat& v_z, const Mat& w,
                           int n_samples, std::uint64_t seed);

/// log p(y | theta) on a list of parameter points.
std::vector<double> likelihood_grid(const LinearModel& model, const Observations& y,
                                    const std::vector<Vec>& theta_grid,
                                    const Tolerances& tol = default_tolerances());

/// Brute-force smoothing reference: the dense joint Gaussian over all states
/// conditioned on all observations at once. Needs a proper x0 prior and is
/// meant for short records.
struct DenseStatePosterior {
    std::vector<GaussianMoment> state_marginals;  ///< N+1 entries
    double log_lik;
};

DenseStatePosterior dense_state_posterior(const LinearModel& model, const Vec& theta,
                                          const Observations& y,
                                          const Tolerances& tol = default_tolerances());

}  // namespace oracle
}  // namespace emfg
