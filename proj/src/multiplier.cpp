#include "emfg/multiplier.hpp"

#include <Eigen/LU>

#include "emfg/vectorize.hpp"

namespace emfg {

const char* to_string(MultiplierKind kind) {
    switch (kind) {
        case MultiplierKind::InnerProduct: return "inner_product";
        case MultiplierKind::ScalarTimesVector: return "scalar_times_vector";
        case MultiplierKind::Componentwise: return "componentwise";
        case MultiplierKind::Autoregression: return "autoregression";
        case MultiplierKind::GeneralMatrix: return "general_matrix";
    }
    return "?";
}

namespace {

void require_scalar_noise(double sigma2, const char* what) {
    if (!(sigma2 > 0.0)) throw InvalidConfig(std::string(what) + ": noise variance must be > 0");
}

void require_invertible_noise(const Mat& v_z, Index m, const char* what) {
    if (v_z.rows() != m || v_z.cols() != m)
        throw DimensionMismatch(std::string(what) + ": noise covariance must be m x m");
    if (!is_positive_definite(v_z))
        throw SingularNoise(std::string(what) + ": noise covariance must be invertible");
}

}  // namespace

MultiplierSpec MultiplierSpec::inner_product(Index n, double sigma2) {
    require_scalar_noise(sigma2, "inner_product");
    return MultiplierSpec{MultiplierKind::InnerProduct, n, 1, sigma2, Mat()};
}

MultiplierSpec MultiplierSpec::scalar_times_vector(Index n, Mat v_z) {
    require_invertible_noise(v_z, n, "scalar_times_vector");
    return MultiplierSpec{MultiplierKind::ScalarTimesVector, n, n, 0.0, std::move(v_z)};
}

MultiplierSpec MultiplierSpec::componentwise(Index n, Mat v_z) {
    require_invertible_noise(v_z, n, "componentwise");
    return MultiplierSpec{MultiplierKind::Componentwise, n, n, 0.0, std::move(v_z)};
}

MultiplierSpec MultiplierSpec::autoregression(Index n, double sigma2) {
    require_scalar_noise(sigma2, "autoregression");
    return MultiplierSpec{MultiplierKind::Autoregression, n, n, sigma2, Mat()};
}

MultiplierSpec MultiplierSpec::general_matrix(Index m, Index n, Mat v_z) {
    require_invertible_noise(v_z, m, "general_matrix");
    return MultiplierSpec{MultiplierKind::GeneralMatrix, n, m, 0.0, std::move(v_z)};
}

Index MultiplierSpec::theta_dim() const {
    switch (kind) {
        case MultiplierKind::ScalarTimesVector: return 1;
        case MultiplierKind::GeneralMatrix: return m * n;
        default: return n;
    }
}

Mat MultiplierSpec::noise_cov() const {
    switch (kind) {
        case MultiplierKind::InnerProduct: {
            Mat v(1, 1);
            v(0, 0) = sigma2;
            return v;
        }
        case MultiplierKind::Autoregression: {
            Mat v = Mat::Zero(n, n);
            v(0, 0) = sigma2;
            return v;
        }
        default: return v_z;
    }
}

Mat MultiplierSpec::noise_weight(const Tolerances& tol) const {
    if (kind == MultiplierKind::InnerProduct) {
        Mat w(1, 1);
        w(0, 0) = 1.0 / sigma2;
        return w;
    }
    if (kind == MultiplierKind::Autoregression)
        throw SingularNoise("noise_weight: autoregression noise covariance is singular");
    try {
        return spd_inverse(v_z, tol);
    } catch (const SingularSystem& e) {
        throw SingularNoise(std::string("noise_weight: ") + e.what());
    }
}

Mat build_A(const MultiplierSpec& spec, const Mat& theta) {
    switch (spec.kind) {
        case MultiplierKind::InnerProduct:
            if (theta.rows() != spec.n || theta.cols() != 1)
                throw DimensionMismatch("build_A: inner product expects an n x 1 theta");
            return theta.transpose();
        case MultiplierKind::ScalarTimesVector:
            if (theta.size() != 1) throw DimensionMismatch("build_A: scalar theta expected");
            return theta(0, 0) * Mat::Identity(spec.n, spec.n);
        case MultiplierKind::Componentwise:
            if (theta.rows() != spec.n || theta.cols() != 1)
                throw DimensionMismatch("build_A: componentwise expects an n x 1 theta");
            return Vec(theta.col(0)).asDiagonal();
        case MultiplierKind::Autoregression: {
            if (theta.rows() != spec.n || theta.cols() != 1)
                throw DimensionMismatch("build_A: autoregression expects an n x 1 theta");
            Mat a = Mat::Zero(spec.n, spec.n);
            a.row(0) = theta.col(0).transpose();
            if (spec.n > 1) a.block(1, 0, spec.n - 1, spec.n - 1).setIdentity();
            return a;
        }
        case MultiplierKind::GeneralMatrix:
            if (theta.rows() != spec.m || theta.cols() != spec.n)
                throw DimensionMismatch("build_A: general matrix expects an m x n theta");
            return theta;
    }
    throw InvalidConfig("build_A: unknown kind");
}

namespace {

// Pieces shared by the two marginals overloads. Both reduce the incoming
// backward message to:
//   wt  = (V_Y_fwd + V_Y_bwd)^{-1}            (posterior "dual" weight on Y)
//   k   = wt * V_Y_bwd                        (so V_XY' = V_X_fwd A' k)
//   r   = (V_Z + V_Y_bwd)^{-1} m_Y_bwd        (backward input to the X mean)
//   m_y = posterior mean of Y
// and then run the common tail.
struct BwdReduction {
    Mat wt;
    Mat k;
    Vec r;
    Vec m_y;
};

MultiplierMarginals marginals_tail(const MultiplierSpec& spec, const Mat& a,
                                   const GaussianMoment& fwd_x, const BwdReduction& red,
                                   const Tolerances& tol) {
    const Mat va_t = fwd_x.cov * a.transpose();  // n x m
    Mat v_x = symmetrize(fwd_x.cov - va_t * red.wt * va_t.transpose());
    v_x = psd_project(v_x, tol);
    const Mat v_xyt = va_t * red.k;
    const Vec m_x =
        (Mat::Identity(spec.n, spec.n) - va_t * red.wt * a) * (fwd_x.mean + va_t * red.r);
    return MultiplierMarginals{m_x, red.m_y, v_x, v_xyt};
}

void check_marginal_dims(const MultiplierSpec& spec, const GaussianMoment& fwd_x, Index bwd_dim) {
    if (fwd_x.dim() != spec.n || fwd_x.cov.rows() != spec.n)
        throw DimensionMismatch("marginals: forward message must have dimension n");
    if (bwd_dim != spec.m)
        throw DimensionMismatch("marginals: backward message must have dimension m");
}

}  // namespace

MultiplierMarginals marginals(const MultiplierSpec& spec, const Mat& theta,
                              const GaussianMoment& fwd_x, const GaussianWeight& bwd_y,
                              const Tolerances& tol) {
    check_marginal_dims(spec, fwd_x, bwd_y.dim());
    const Mat a = build_A(spec, theta);
    const Mat v_z = spec.noise_cov();
    const Mat vy_fwd = symmetrize(a * fwd_x.cov * a.transpose() + v_z);
    const Mat eye = Mat::Identity(spec.m, spec.m);

    // (I + W V) is invertible for any PSD W, V; this lets singular backward
    // weights (flat directions) through without forming V_Y_bwd.
    Eigen::PartialPivLU<Mat> lu_y(eye + bwd_y.weight * vy_fwd);
    Eigen::PartialPivLU<Mat> lu_z(eye + bwd_y.weight * v_z);

    BwdReduction red;
    red.k = lu_y.solve(eye);
    red.wt = symmetrize(red.k * bwd_y.weight);
    red.r = lu_z.solve(bwd_y.weighted_mean);
    const Vec my_fwd = a * fwd_x.mean;
    red.m_y = (eye - vy_fwd * red.wt) * (my_fwd + vy_fwd * bwd_y.weighted_mean);
    if (!red.k.allFinite() || !red.r.allFinite())
        throw SingularSystem("marginals: backward reduction failed");
    return marginals_tail(spec, a, fwd_x, red, tol);
}

MultiplierMarginals marginals(const MultiplierSpec& spec, const Mat& theta,
                              const GaussianMoment& fwd_x, const GaussianMoment& bwd_y,
                              const Tolerances& tol) {
    check_marginal_dims(spec, fwd_x, bwd_y.dim());
    const Mat a = build_A(spec, theta);
    const Mat v_z = spec.noise_cov();
    const Mat vy_fwd = symmetrize(a * fwd_x.cov * a.transpose() + v_z);

    BwdReduction red;
    try {
        red.wt = spd_inverse(vy_fwd + bwd_y.cov, tol);
        red.r = spd_solve(v_z + bwd_y.cov, bwd_y.mean, tol);
    } catch (const SingularSystem& e) {
        throw SingularSystem(std::string("marginals: ") + e.what());
    }
    red.k = red.wt * bwd_y.cov;
    const Vec my_fwd = a * fwd_x.mean;
    red.m_y = my_fwd + vy_fwd * red.wt * (bwd_y.mean - my_fwd);
    return marginals_tail(spec, a, fwd_x, red, tol);
}

EmGaussian em_message(const MultiplierSpec& spec, const MultiplierMarginals& marg,
                      const Tolerances& tol) {
    if (marg.m_x.size() != spec.n || marg.m_y.size() != spec.m ||
        marg.v_x.rows() != spec.n || marg.v_xyt.rows() != spec.n ||
        marg.v_xyt.cols() != spec.m)
        throw DimensionMismatch("em_message: marginals inconsistent with spec");

    const Mat exx = symmetrize(marg.v_x + marg.m_x * marg.m_x.transpose());
    switch (spec.kind) {
        case MultiplierKind::InnerProduct:
            return EmGaussian{exx / spec.sigma2,
                              (marg.v_xyt.col(0) + marg.m_x * marg.m_y[0]) / spec.sigma2};
        case MultiplierKind::Autoregression:
            // only the first output component carries information
            return EmGaussian{exx / spec.sigma2,
                              (marg.v_xyt.col(0) + marg.m_x * marg.m_y[0]) / spec.sigma2};
        case MultiplierKind::ScalarTimesVector: {
            const Mat w_z = spec.noise_weight(tol);
            Mat w(1, 1);
            w(0, 0) = (w_z * marg.v_x).trace() + marg.m_x.dot(w_z * marg.m_x);
            Vec h(1);
            h[0] = (w_z * marg.v_xyt).trace() + marg.m_x.dot(w_z * marg.m_y);
            return EmGaussian{w, h};
        }
        case MultiplierKind::Componentwise: {
            const Mat w_z = spec.noise_weight(tol);
            const Mat exy = marg.v_xyt + marg.m_x * marg.m_y.transpose();
            return EmGaussian{symmetrize(w_z.cwiseProduct(exx)),
                              w_z.cwiseProduct(exy) * Vec::Ones(spec.n)};
        }
        case MultiplierKind::GeneralMatrix: {
            const Mat w_z = spec.noise_weight(tol);
            const Mat exy = marg.v_xyt + marg.m_x * marg.m_y.transpose();
            return EmGaussian{symmetrize(kron(w_z, exx)),
                              kron(w_z, Mat::Identity(spec.n, spec.n)) * cvect(exy)};
        }
    }
    throw InvalidConfig("em_message: unknown kind");
}

EmGaussian em_message_fixed_y(const GaussianWeight& fwd_x, double m_s, double sigma_s2,
                              const Vec& theta, const Tolerances& tol) {
    if (!(sigma_s2 > 0.0)) throw InvalidConfig("em_message_fixed_y: sigma_s2 must be > 0");
    if (theta.size() != fwd_x.dim())
        throw DimensionMismatch("em_message_fixed_y: theta dimension mismatch");
    const Mat w_post = fwd_x.weight + theta * theta.transpose() / sigma_s2;
    Mat v_x;
    try {
        v_x = spd_inverse(w_post, tol);
    } catch (const SingularSystem& e) {
        throw SingularSystem(std::string("em_message_fixed_y: local posterior improper (") +
                             e.what() + ")");
    }
    const Vec m_x = v_x * (fwd_x.weighted_mean + theta * (m_s / sigma_s2));
    return EmGaussian{symmetrize(v_x + m_x * m_x.transpose()) / sigma_s2, m_x * (m_s / sigma_s2)};
}

EmGaussian em_message_fixed_y(const GaussianMoment& fwd_x, double m_s, double sigma_s2,
                              const Vec& theta, const Tolerances& tol) {
    if (!(sigma_s2 > 0.0)) throw InvalidConfig("em_message_fixed_y: sigma_s2 must be > 0");
    if (theta.size() != fwd_x.dim())
        throw DimensionMismatch("em_message_fixed_y: theta dimension mismatch");
    // Rank-one conditioning; valid for singular forward covariances too.
    const Vec vt = fwd_x.cov * theta;
    const double s = sigma_s2 + theta.dot(vt);
    const Mat v_x = psd_project(fwd_x.cov - vt * vt.transpose() / s, tol);
    const Vec m_x = fwd_x.mean + vt * ((m_s - theta.dot(fwd_x.mean)) / s);
    return EmGaussian{symmetrize(v_x + m_x * m_x.transpose()) / sigma_s2, m_x * (m_s / sigma_s2)};
}

}  // namespace emfg
