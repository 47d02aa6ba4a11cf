#include "emfg/gaussian.hpp"

#include <Eigen/Eigenvalues>

namespace emfg {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

namespace {

// Shared LDLT with a relative conditioning gate. The smallest pivot must
// exceed tau_solve times the largest for the solve to be accepted.
Eigen::LDLT<Mat> checked_ldlt(const Mat& a, const Tolerances& tol, const char* what) {
    if (a.rows() != a.cols()) throw DimensionMismatch(std::string(what) + ": matrix not square");
    Eigen::LDLT<Mat> ldlt(symmetrize(a));
    if (ldlt.info() != Eigen::Success)
        throw SingularSystem(std::string(what) + ": factorization failed");
    const Vec d = ldlt.vectorD();
    const double dmax = d.maxCoeff();
    if (!(dmax > 0.0) || d.minCoeff() <= tol.tau_solve * dmax)
        throw SingularSystem(std::string(what) + ": matrix singular or indefinite");
    return ldlt;
}

}  // namespace

Vec spd_solve(const Mat& a, const Vec& b, const Tolerances& tol) {
    return checked_ldlt(a, tol, "spd_solve").solve(b);
}

Mat spd_solve(const Mat& a, const Mat& b, const Tolerances& tol) {
    return checked_ldlt(a, tol, "spd_solve").solve(b);
}

Mat spd_inverse(const Mat& a, const Tolerances& tol) {
    return symmetrize(checked_ldlt(a, tol, "spd_inverse").solve(Mat::Identity(a.rows(), a.cols())));
}

bool is_positive_definite(const Mat& m, const Tolerances& tol) {
    if (m.rows() != m.cols()) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    const Vec ev = es.eigenvalues();
    const double emax = ev.maxCoeff();
    return emax > 0.0 && ev.minCoeff() > tol.tau_solve * emax;
}

namespace {

bool symmetric_psd(const Mat& m, const Tolerances& tol) {
    if (m.rows() != m.cols()) return false;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol.tau_sym) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.info() == Eigen::Success && es.eigenvalues().minCoeff() >= -tol.tau_psd;
}

}  // namespace

bool is_valid_moment(const GaussianMoment& g, const Tolerances& tol) {
    return g.cov.rows() == g.dim() && g.mean.allFinite() && g.cov.allFinite() &&
           symmetric_psd(g.cov, tol);
}

bool is_valid_weight(const GaussianWeight& g, const Tolerances& tol) {
    return g.weight.rows() == g.dim() && g.weighted_mean.allFinite() && g.weight.allFinite() &&
           symmetric_psd(g.weight, tol);
}

GaussianWeight to_weight(const GaussianMoment& g, const Tolerances& tol) {
    try {
        Mat w = spd_inverse(g.cov, tol);
        return GaussianWeight{w, w * g.mean};
    } catch (const SingularSystem& e) {
        throw SingularCovariance(std::string("to_weight: ") + e.what());
    }
}

GaussianMoment to_moment(const GaussianWeight& g, const Tolerances& tol) {
    try {
        Mat v = spd_inverse(g.weight, tol);
        return GaussianMoment{v * g.weighted_mean, v};
    } catch (const SingularSystem& e) {
        throw DegenerateMessage(std::string("to_moment: ") + e.what());
    }
}

GaussianWeight combine_parallel(const GaussianWeight& a, const GaussianWeight& b) {
    if (a.dim() != b.dim())
        throw DimensionMismatch("combine_parallel: dimensions " + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()));
    return GaussianWeight{a.weight + b.weight, a.weighted_mean + b.weighted_mean};
}

GaussianMoment propagate_affine(const GaussianMoment& g, const Mat& a, const Mat& v_add) {
    if (a.cols() != g.dim() || v_add.rows() != a.rows() || v_add.cols() != a.rows())
        throw DimensionMismatch("propagate_affine: nonconformable shapes");
    return GaussianMoment{a * g.mean, symmetrize(a * g.cov * a.transpose() + v_add)};
}

Vec argmax(const GaussianWeight& g, const Tolerances& tol) {
    try {
        return spd_solve(g.weight, g.weighted_mean, tol);
    } catch (const SingularSystem& e) {
        throw UnidentifiableParameter(std::string("argmax: ") + e.what());
    }
}

Mat psd_project(const Mat& m, const Tolerances& tol) {
    if (m.rows() != m.cols()) throw DimensionMismatch("psd_project: matrix not square");
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    Vec ev = es.eigenvalues();
    for (Index i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], tol.tau_psd);
    return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

Index Message::dim() const {
    return is_moment() ? std::get<GaussianMoment>(repr_).dim()
                       : std::get<GaussianWeight>(repr_).dim();
}

GaussianMoment Message::moment(const Tolerances& tol) const {
    if (is_moment()) return std::get<GaussianMoment>(repr_);
    return to_moment(std::get<GaussianWeight>(repr_), tol);
}

GaussianWeight Message::weight(const Tolerances& tol) const {
    if (!is_moment()) return std::get<GaussianWeight>(repr_);
    return to_weight(std::get<GaussianMoment>(repr_), tol);
}

}  // namespace emfg
