#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace emfg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct SingularCovariance : Error {
    using Error::Error;
};
/// Weight matrix is singular; the message has no moment parameterization.
struct DegenerateMessage : Error {
    using Error::Error;
};
struct UnidentifiableParameter : Error {
    using Error::Error;
};
struct SingularSystem : Error {
    using Error::Error;
};
struct SingularNoise : Error {
    using Error::Error;
};
struct IllConditionedFit : Error {
    using Error::Error;
};
struct InvalidConfig : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};

/// Numerical thresholds used by conversions and solves.
///   tau_sym   — allowed asymmetry when validating symmetric matrices
///   tau_psd   — eigenvalue floor used by psd_project (and PSD validation slack)
///   tau_solve — relative conditioning threshold for positive-definite solves
struct Tolerances {
    double tau_sym = 1e-10;
    double tau_psd = 0.0;
    double tau_solve = 1e-12;
};

inline const Tolerances& default_tolerances() {
    static const Tolerances tol{};
    return tol;
}

/// Gaussian in mean/covariance form. The covariance may be singular PSD
/// (deterministic directions); it just cannot be inverted then.
struct GaussianMoment {
    Vec mean;
    Mat cov;

    Index dim() const { return mean.size(); }
};

/// Gaussian in weight (inverse covariance) form, e^{-1/2 (x'Wx - 2x'Wm)}.
/// W is allowed to be singular PSD: that is a degenerate message which is
/// flat in the null space of W.
struct GaussianWeight {
    Mat weight;
    Vec weighted_mean;

    Index dim() const { return weighted_mean.size(); }

    static GaussianWeight zero(Index d) {
        return GaussianWeight{Mat::Zero(d, d), Vec::Zero(d)};
    }
};

}  // namespace emfg
