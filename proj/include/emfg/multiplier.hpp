#pragma once

#include "emfg/gaussian.hpp"

namespace emfg {

/// The multiplier node shapes with tabulated backward EM messages.
/// All of them describe U = A(theta) X grouped with additive zero-mean
/// Gaussian noise Z, observed as Y = U + Z.
enum class MultiplierKind {
    InnerProduct,       ///< A(theta) = theta', scalar output
    ScalarTimesVector,  ///< A(theta) = theta * I_n
    Componentwise,      ///< A(theta) = diag(theta)
    Autoregression,     ///< A(theta) = companion matrix, noise only on Y_1
    GeneralMatrix,      ///< A(theta) = theta, an m x n matrix
};

const char* to_string(MultiplierKind kind);

/// Which multiplier case is in play, with dimensions and noise.
/// InnerProduct and Autoregression carry a scalar effective noise variance;
/// the other kinds carry a full m x m noise covariance that must be
/// invertible.
struct MultiplierSpec {
    MultiplierKind kind;
    Index n;        ///< input (state) dimension
    Index m;        ///< output dimension
    double sigma2;  ///< scalar noise variance (InnerProduct, Autoregression)
    Mat v_z;        ///< noise covariance (other kinds), m x m

    static MultiplierSpec inner_product(Index n, double sigma2);
    static MultiplierSpec scalar_times_vector(Index n, Mat v_z);
    static MultiplierSpec componentwise(Index n, Mat v_z);
    static MultiplierSpec autoregression(Index n, double sigma2);
    static MultiplierSpec general_matrix(Index m, Index n, Mat v_z);

    /// Dimension of the parameter the EM message lives on
    /// (m*n for GeneralMatrix, 1 for ScalarTimesVector, n otherwise).
    Index theta_dim() const;

    /// Full m x m noise covariance (Autoregression: only entry (1,1) is
    /// nonzero; InnerProduct: 1 x 1).
    Mat noise_cov() const;

    /// W_Z = V_Z^{-1} for the kinds that need it; throws SingularNoise.
    Mat noise_weight(const Tolerances& tol = default_tolerances()) const;
};

/// A(theta) for the given kind. Vector-valued thetas are passed as n x 1
/// matrices; GeneralMatrix takes the m x n matrix itself.
Mat build_A(const MultiplierSpec& spec, const Mat& theta);

/// Local posterior quantities at the multiplier for theta fixed, computed
/// from the incoming messages: means of X and Y, covariance of X, and the
/// cross-covariance E[(X - m_X)(Y - m_Y)'].
struct MultiplierMarginals {
    Vec m_x;
    Vec m_y;
    Mat v_x;    ///< n x n, PSD-projected
    Mat v_xyt;  ///< n x m
};

/// Backward EM message: Gaussian over theta (over rvect(theta)' for
/// GeneralMatrix), held as (W, Wm); the weight may be singular when the
/// data is uninformative.
using EmGaussian = GaussianWeight;

/// Local marginals for fixed theta from the forward message on X (moment
/// form; singular covariance allowed) and the backward message on Y.
/// The weight-form overload accepts singular backward weights
/// (uninformative directions); the moment-form overload accepts singular
/// backward covariances (exact observations).
MultiplierMarginals marginals(const MultiplierSpec& spec, const Mat& theta,
                              const GaussianMoment& fwd_x, const GaussianWeight& bwd_y,
                              const Tolerances& tol = default_tolerances());
MultiplierMarginals marginals(const MultiplierSpec& spec, const Mat& theta,
                              const GaussianMoment& fwd_x, const GaussianMoment& bwd_y,
                              const Tolerances& tol = default_tolerances());

/// Closed-form backward EM message out of the grouped multiplier-plus-noise
/// node, per multiplier kind.
EmGaussian em_message(const MultiplierSpec& spec, const MultiplierMarginals& marg,
                      const Tolerances& tol = default_tolerances());

/// Backward EM message for the inner-product multiplier with the scalar
/// output observed exactly as m_s with grouped noise variance sigma_s2.
/// The incoming message on X enters in weight form; a singular weight is
/// fine as long as fwd.weight + theta theta'/sigma_s2 is invertible.
EmGaussian em_message_fixed_y(const GaussianWeight& fwd_x, double m_s, double sigma_s2,
                              const Vec& theta, const Tolerances& tol = default_tolerances());
EmGaussian em_message_fixed_y(const GaussianMoment& fwd_x, double m_s, double sigma_s2,
                              const Vec& theta, const Tolerances& tol = default_tolerances());

}  // namespace emfg
