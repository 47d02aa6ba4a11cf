#pragma once

#include <variant>

#include "emfg/types.hpp"

namespace emfg {

/// (M + M')/2.
Mat symmetrize(const Mat& m);

/// Solves A x = b for symmetric positive definite A. Throws SingularSystem
/// when the factorization reports a conditioning ratio below tol.tau_solve.
Vec spd_solve(const Mat& a, const Vec& b, const Tolerances& tol = default_tolerances());
Mat spd_solve(const Mat& a, const Mat& b, const Tolerances& tol = default_tolerances());

/// Inverse of a symmetric positive definite matrix.
Mat spd_inverse(const Mat& a, const Tolerances& tol = default_tolerances());

/// True when the symmetric part of m has all eigenvalues above
/// tol.tau_solve relative to the largest one.
bool is_positive_definite(const Mat& m, const Tolerances& tol = default_tolerances());

/// Checks symmetry within tau_sym and eigenvalues >= -tau_psd.
bool is_valid_moment(const GaussianMoment& g, const Tolerances& tol = default_tolerances());
bool is_valid_weight(const GaussianWeight& g, const Tolerances& tol = default_tolerances());

/// Moment -> weight form: W = V^{-1}, Wm = V^{-1} m.
/// Throws SingularCovariance when V is not invertible.
GaussianWeight to_weight(const GaussianMoment& g, const Tolerances& tol = default_tolerances());

/// Weight -> moment form: V = W^{-1}, m = W^{-1} Wm.
/// Throws DegenerateMessage when W is singular; the caller must then keep
/// the weight form.
GaussianMoment to_moment(const GaussianWeight& g, const Tolerances& tol = default_tolerances());

/// Product of two Gaussian messages on the same variable (equality node):
/// weights and weighted means add. Commutative and associative.
GaussianWeight combine_parallel(const GaussianWeight& a, const GaussianWeight& b);

/// Pushes a moment-form message through y = A x + noise with noise
/// covariance v_add: m' = A m, V' = A V A' + v_add (symmetrized).
GaussianMoment propagate_affine(const GaussianMoment& g, const Mat& a, const Mat& v_add);

/// Maximizer of the (possibly unnormalized) Gaussian: solves W theta = Wm.
/// Throws UnidentifiableParameter when W is singular.
Vec argmax(const GaussianWeight& g, const Tolerances& tol = default_tolerances());

/// Symmetrizes, then floors eigenvalues below tau_psd at tau_psd.
/// Idempotent on matrices that are already symmetric PSD.
Mat psd_project(const Mat& m, const Tolerances& tol = default_tolerances());

/// One Gaussian message in whichever parameterization currently exists.
/// Weight form covers flat (uninformative) directions, moment form covers
/// deterministic ones; state sweeps move between the two.
class Message {
public:
    explicit Message(GaussianMoment g) : repr_(std::move(g)) {}
    explicit Message(GaussianWeight g) : repr_(std::move(g)) {}

    bool is_moment() const { return std::holds_alternative<GaussianMoment>(repr_); }

    Index dim() const;

    /// Moment form, converting if necessary (throws DegenerateMessage when
    /// the weight form is singular).
    GaussianMoment moment(const Tolerances& tol = default_tolerances()) const;

    /// Weight form, converting if necessary (throws SingularCovariance when
    /// the covariance is singular).
    GaussianWeight weight(const Tolerances& tol = default_tolerances()) const;

private:
    std::variant<GaussianMoment, GaussianWeight> repr_;
};

}  // namespace emfg
