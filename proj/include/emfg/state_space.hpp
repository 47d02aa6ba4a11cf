#pragma once

#include <cstdint>
#include <vector>

#include "emfg/gaussian.hpp"

namespace emfg {

enum class ModelKind { FIR, AR };

const char* to_string(ModelKind kind);

/// Scalar-output linear state space model with unknown coefficient vector:
///   FIR:  x_k = A x_{k-1} + b u_k (A the shift matrix),  y_k = theta' x_k + z_k
///   AR:   x_k = A(theta) x_{k-1} + b u_k (companion A),  y_k = x_{k,1} + z_k
/// with b = e_1, u_k ~ N(0, sigma_u2), z_k ~ N(0, sigma_z2).
/// The x0 prior is held in weight form; W = 0 means uninformative.
struct LinearModel {
    ModelKind kind;
    Index n;  ///< order / state dimension
    Index N;  ///< number of observations
    double sigma_u2;
    double sigma_z2;
    GaussianWeight x0_prior;

    static LinearModel fir(Index n, Index N, double sigma_u2, double sigma_z2);
    static LinearModel fir(Index n, Index N, double sigma_u2, double sigma_z2,
                           GaussianWeight x0_prior);
    static LinearModel ar(Index n, Index N, double sigma_u2, double sigma_z2);
    static LinearModel ar(Index n, Index N, double sigma_u2, double sigma_z2,
                          GaussianWeight x0_prior);

    /// State transition matrix with theta plugged in (theta ignored for FIR).
    Mat transition_matrix(const Vec& theta) const;
    /// Observation vector c with y_k = c' x_k + z_k.
    Vec observation_vector(const Vec& theta) const;
    /// First row of the transition matrix (zero for FIR, theta for AR).
    Vec transition_row(const Vec& theta) const;
};

struct Observations {
    Vec y;
};

struct SimulationResult {
    Observations obs;
    Mat states;  ///< (N+1) x n, row k = x_k
    Vec inputs;  ///< u_1..u_N
};

/// Draws a dataset from the model; deterministic given the seed.
SimulationResult simulate(const LinearModel& model, const Vec& theta_true, std::uint64_t seed);

/// Sum-product state messages along x_0..x_N for fixed theta.
/// The two lists complement each other so that fwd[k] (*) bwd[k] is the
/// smoothed posterior on x_k given all observations:
///   FIR: fwd[k] is the one-step predictive message (y_1..y_{k-1}) and
///        bwd[k] carries y_k..y_N;
///   AR:  fwd[k] is the filtered message (y_1..y_k) and bwd[k] carries
///        y_{k+1}..y_N.
/// This matches where the parameter edge hangs in each model. Forward
/// messages start in weight form when the x0 prior is degenerate and switch
/// to moment form once positive definite.
struct SweepResult {
    std::vector<Message> fwd;         ///< N+1 entries
    std::vector<GaussianWeight> bwd;  ///< N+1 entries

    /// Smoothed posterior on x_k in weight form.
    GaussianWeight posterior(Index k, const Tolerances& tol = default_tolerances()) const;
};

SweepResult sweep(const LinearModel& model, const Vec& theta, const Observations& y,
                  const Tolerances& tol = default_tolerances());

/// Exact log p(y | theta) via the innovations decomposition of the forward
/// sweep. With a degenerate x0 prior the initial flat directions are handled
/// in weight form with tracked normalization, which yields the diffuse
/// likelihood (the limit of a proper prior with variance -> infinity, up to
/// the divergent constant).
double log_likelihood(const LinearModel& model, const Vec& theta, const Observations& y,
                      const Tolerances& tol = default_tolerances());

/// Weight-form building blocks of the sweeps, exposed for reuse.
/// Observation factor y = c'x + noise as a message on x.
GaussianWeight observation_message(const Vec& c, double y, double sigma_z2);
/// Pushes a weight message on x through x' = A x + e_1 u forwards
/// (marginalizing the oldest state component); A must have the shifted
/// identity below its first row, which both model kinds do.
GaussianWeight forward_transition_weight(const GaussianWeight& msg, const Vec& first_row,
                                         double sigma_u2);
/// Pulls a weight message on x' back through x' = A x + e_1 u.
GaussianWeight backward_transition_weight(const GaussianWeight& msg, const Mat& a,
                                          double sigma_u2);

}  // namespace emfg
