#include "emfg/oracle.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "emfg/random.hpp"
#include "emfg/vectorize.hpp"

namespace emfg {
namespace oracle {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

Mat reshape_theta(const MultiplierSpec& spec, const Vec& stacked) {
    if (spec.kind == MultiplierKind::GeneralMatrix) return unrvect(stacked, spec.m, spec.n);
    return Mat(stacked);
}

}  // namespace

std::vector<Vec> default_probes(const Vec& theta, double step) {
    const Index d = theta.size();
    std::vector<Vec> probes;
    probes.push_back(theta);
    for (Index i = 0; i < d; ++i) {
        Vec e = Vec::Zero(d);
        e[i] = step;
        probes.push_back(theta + e);
        probes.push_back(theta - e);
    }
    for (Index i = 0; i < d; ++i)
        for (Index j = i + 1; j < d; ++j) {
            Vec e = Vec::Zero(d);
            e[i] = step;
            e[j] = step;
            probes.push_back(theta + e);
            probes.push_back(theta - e);
        }
    // a couple of asymmetric points so the fit is overdetermined even at d=1
    Vec e = Vec::Zero(d);
    e[0] = 2.0 * step;
    probes.push_back(theta + e);
    probes.push_back(theta - e);
    return probes;
}

GaussianMoment joint_posterior(const MultiplierSpec& spec, const Mat& theta,
                               const GaussianMoment& fwd_x, const GaussianMoment& bwd_y,
                               const Tolerances& tol) {
    const Index n = spec.n;
    const Index m = spec.m;
    const Mat a = build_A(spec, theta);
    const Mat v_z = spec.noise_cov();

    Vec mu(n + m);
    mu.head(n) = fwd_x.mean;
    mu.tail(m) = a * fwd_x.mean;
    Mat sig(n + m, n + m);
    sig.topLeftCorner(n, n) = fwd_x.cov;
    sig.topRightCorner(n, m) = fwd_x.cov * a.transpose();
    sig.bottomLeftCorner(m, n) = a * fwd_x.cov;
    sig.bottomRightCorner(m, m) = a * fwd_x.cov * a.transpose() + v_z;
    sig = symmetrize(sig);

    const Mat k_t = spd_solve(Mat(sig.bottomRightCorner(m, m) + bwd_y.cov),
                              Mat(sig.rightCols(m).transpose()), tol);  // (m) x (n+m)
    GaussianMoment out;
    out.mean = mu + k_t.transpose() * (bwd_y.mean - mu.tail(m));
    out.cov = symmetrize(sig - k_t.transpose() * sig.rightCols(m).transpose());
    return out;
}

namespace {

MultiplierMarginals extract_marginals(const MultiplierSpec& spec, const GaussianMoment& joint) {
    MultiplierMarginals out;
    out.m_x = joint.mean.head(spec.n);
    out.m_y = joint.mean.tail(spec.m);
    out.v_x = symmetrize(joint.cov.topLeftCorner(spec.n, spec.n));
    out.v_xyt = joint.cov.topRightCorner(spec.n, spec.m);
    return out;
}

}  // namespace

MultiplierMarginals condition_joint(const MultiplierSpec& spec, const Mat& theta,
                                    const GaussianMoment& fwd_x, const GaussianMoment& bwd_y,
                                    const Tolerances& tol) {
    return extract_marginals(spec, joint_posterior(spec, theta, fwd_x, bwd_y, tol));
}

MultiplierMarginals condition_joint(const MultiplierSpec& spec, const Mat& theta,
                                    const GaussianMoment& fwd_x, const GaussianWeight& bwd_y,
                                    const Tolerances& tol) {
    const Index n = spec.n;
    const Index m = spec.m;
    const Mat a = build_A(spec, theta);
    const Mat v_z = spec.noise_cov();
    (void)tol;

    Vec mu(n + m);
    mu.head(n) = fwd_x.mean;
    mu.tail(m) = a * fwd_x.mean;
    Mat sig(n + m, n + m);
    sig.topLeftCorner(n, n) = fwd_x.cov;
    sig.topRightCorner(n, m) = fwd_x.cov * a.transpose();
    sig.bottomLeftCorner(m, n) = a * fwd_x.cov;
    sig.bottomRightCorner(m, m) = a * fwd_x.cov * a.transpose() + v_z;
    sig = symmetrize(sig);

    // (I + W Sigma_YY) is invertible for PSD factors, so singular backward
    // weights go straight through.
    Eigen::PartialPivLU<Mat> lu(Mat::Identity(m, m) + bwd_y.weight * sig.bottomRightCorner(m, m));
    const Mat t = lu.solve(bwd_y.weight);
    const Vec s = lu.solve(bwd_y.weighted_mean - bwd_y.weight * mu.tail(m));
    GaussianMoment joint;
    joint.mean = mu + sig.rightCols(m) * s;
    joint.cov = symmetrize(sig - sig.rightCols(m) * t * sig.rightCols(m).transpose());
    return extract_marginals(spec, joint);
}

std::pair<Mat, Vec> em_message_quadrature(const MultiplierSpec& spec, const Mat& theta,
                                          const GaussianMoment& fwd_x,
                                          const GaussianMoment& bwd_y,
                                          const QuadratureGrid& grid,
                                          const std::vector<Vec>& theta_probes,
                                          const Tolerances& tol) {
    const Index n = spec.n;
    const Index m = spec.m;
    const bool ar = spec.kind == MultiplierKind::Autoregression;
    const Index ydims = ar ? 1 : m;  // remaining y components are deterministic
    const Index dims = n + ydims;
    if (grid.points_per_dim < 2 || !(grid.half_width_sigmas > 0.0))
        throw InvalidConfig("quadrature: bad grid");
    if (dims > 4) throw InvalidConfig("quadrature: integration dimension above 4");

    const Index d = spec.theta_dim();
    const Index ncoef = 1 + d + d * (d + 1) / 2;
    if (static_cast<Index>(theta_probes.size()) < ncoef)
        throw InvalidConfig("quadrature: not enough probes to fit a quadratic");

    // Grid axes along the principal directions of the exact joint posterior
    // over the integration variables; a coordinate-aligned grid undersamples
    // strongly correlated posteriors. Only the grid placement depends on
    // this, not the integrand values.
    const GaussianMoment joint = joint_posterior(spec, theta, fwd_x, bwd_y, tol);
    const Vec mu = joint.mean.head(dims);
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(joint.cov.topLeftCorner(dims, dims)));
    const Mat rot = es.eigenvectors();

    const Mat wf = spd_inverse(fwd_x.cov, tol);
    const Mat wb = spd_inverse(bwd_y.cov, tol);
    const Mat a_hat = build_A(spec, theta);
    Mat w_z;
    if (!ar) w_z = spec.noise_weight(tol);

    const std::size_t nprobe = theta_probes.size();
    const int p_per = grid.points_per_dim;

    // flat copies for the inner loop
    const auto flatten = [](const Mat& mat) {
        std::vector<double> out(mat.size());
        for (Index i = 0; i < mat.rows(); ++i)
            for (Index j = 0; j < mat.cols(); ++j) out[i * mat.cols() + j] = mat(i, j);
        return out;
    };
    const std::vector<double> wf_f = flatten(wf);
    const std::vector<double> wb_f = flatten(wb);
    const std::vector<double> wz_f = ar ? std::vector<double>() : flatten(w_z);
    const std::vector<double> rot_f = flatten(rot);
    std::vector<std::vector<double>> a_f(nprobe + 1);
    a_f[0] = flatten(a_hat);
    for (std::size_t q = 0; q < nprobe; ++q)
        a_f[q + 1] = flatten(build_A(spec, reshape_theta(spec, theta_probes[q])));

    // per-axis offsets in the rotated frame (midpoint rule)
    std::vector<std::vector<double>> axis(dims);
    for (Index i = 0; i < dims; ++i) {
        const double hw =
            grid.half_width_sigmas * std::sqrt(std::max(es.eigenvalues()[i], 1e-14));
        axis[i].resize(p_per);
        for (int j = 0; j < p_per; ++j)
            axis[i][j] = -hw + (j + 0.5) * (2.0 * hw / p_per);
    }

    double x[8] = {}, y[8] = {}, dx[8] = {}, dy[8] = {}, r[8] = {};
    const double* fm = fwd_x.mean.data();
    const double* bm = bwd_y.mean.data();

    const auto point_exponent = [&](const double* a) -> double {
        if (ar) {
            double res = y[0];
            for (Index j = 0; j < n; ++j) res -= a[j] * x[j];
            return -0.5 * res * res / spec.sigma2;
        }
        for (Index i = 0; i < m; ++i) {
            double acc = y[i];
            for (Index j = 0; j < n; ++j) acc -= a[i * n + j] * x[j];
            r[i] = acc;
        }
        double acc = 0.0;
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < m; ++j) acc += r[i] * wz_f[i * m + j] * r[j];
        return -0.5 * acc;
    };
    const auto assemble_point = [&](const double* u) {
        for (Index row = 0; row < dims; ++row) {
            double v = mu[row];
            for (Index col = 0; col < dims; ++col) v += rot_f[row * dims + col] * u[col];
            if (row < n)
                x[row] = v;
            else
                y[row - n] = v;
        }
        if (ar)
            for (Index j = 1; j < m; ++j) y[j] = x[j - 1];  // deterministic components
        for (Index i = 0; i < n; ++i) dx[i] = x[i] - fm[i];
        for (Index i = 0; i < m; ++i) dy[i] = y[i] - bm[i];
        double e = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) e += dx[i] * wf_f[i * n + j] * dx[j];
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < m; ++j) e += dy[i] * wb_f[i * m + j] * dy[j];
        return -0.5 * e + point_exponent(a_f[0].data());
    };

    // reference exponent at the grid center so the mode maps to exp(~0)
    double u[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    const double e_ref = assemble_point(u);

    Index total_exp = 1;
    for (Index i = 0; i < dims; ++i) total_exp *= p_per;
    std::vector<int> idx(dims, 0);
    double z_sum = 0.0;
    std::vector<double> s(nprobe, 0.0);

    for (Index count = 0; count < total_exp; ++count) {
        for (Index i = 0; i < dims; ++i) u[i] = axis[i][idx[i]];
        const double e = assemble_point(u);
        const double p = std::exp(e - e_ref);
        if (p > 0.0) {
            z_sum += p;
            for (std::size_t q = 0; q < nprobe; ++q)
                s[q] += p * point_exponent(a_f[q + 1].data());
        }
        for (Index i = dims - 1; i >= 0; --i) {
            if (++idx[i] < p_per) break;
            idx[i] = 0;
        }
    }
    if (!(z_sum > 0.0)) throw IllConditionedFit("quadrature: vanishing mass on the grid");

    Vec eta(nprobe);
    for (std::size_t q = 0; q < nprobe; ++q) eta[q] = s[q] / z_sum;

    // least-squares fit of the exact quadratic exponent
    Mat design(nprobe, ncoef);
    for (std::size_t q = 0; q < nprobe; ++q) {
        const Vec& th = theta_probes[q];
        Index col = 0;
        design(q, col++) = 1.0;
        for (Index i = 0; i < d; ++i) design(q, col++) = th[i];
        for (Index i = 0; i < d; ++i)
            for (Index j = i; j < d; ++j) design(q, col++) = th[i] * th[j];
    }
    const Vec beta = design.colPivHouseholderQr().solve(eta);
    const double resid = (design * beta - eta).cwiseAbs().maxCoeff();
    if (resid > 1e-6 * std::max(1.0, eta.cwiseAbs().maxCoeff()))
        throw IllConditionedFit("quadrature: quadratic fit residual too large");

    Mat w = Mat::Zero(d, d);
    Vec h(d);
    Index col = 1;
    for (Index i = 0; i < d; ++i) h[i] = beta[col++];
    for (Index i = 0; i < d; ++i)
        for (Index j = i; j < d; ++j) {
            const double cij = beta[col++];
            if (i == j)
                w(i, i) = -2.0 * cij;
            else
                w(i, j) = w(j, i) = -cij;
        }
    return {w, h};
}

McMomentsResult mc_moments(const MultiplierSpec& spec, const Mat& theta,
                           const GaussianMoment& fwd_x, const Mat& v_z, const Mat& w,
                           int n_samples, std::uint64_t seed) {
    if (spec.m != spec.n)
        throw DimensionMismatch("mc_moments: trace identity needs square output (m == n)");
    if (w.rows() != spec.n || w.cols() != spec.n)
        throw DimensionMismatch("mc_moments: W must be n x n");
    if (n_samples < 10000) throw InvalidConfig("mc_moments: need at least 1e4 samples");
    const Mat a = build_A(spec, theta);
    const Mat ws = symmetrize(w);

    const Mat fx = psd_factor(fwd_x.cov);
    const Mat fz = psd_factor(v_z);
    Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const Vec x = fwd_x.mean + fx * rng.normal_vec(spec.n);
        const Vec y = a * x + fz * rng.normal_vec(spec.m);
        const double v = x.dot(ws * y);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n_samples;
    const double var = std::max(0.0, (sumsq - n_samples * mean * mean) / (n_samples - 1.0));

    McMomentsResult out;
    out.mc_estimate = mean;
    const Mat v_xyt = fwd_x.cov * a.transpose();
    out.analytic = (ws * v_xyt).trace() + fwd_x.mean.dot(ws * (a * fwd_x.mean));
    out.std_error = std::sqrt(var / n_samples);
    return out;
}

std::vector<double> likelihood_grid(const LinearModel& model, const Observations& y,
                                    const std::vector<Vec>& theta_grid, const Tolerances& tol) {
    if (theta_grid.empty()) throw InvalidConfig("likelihood_grid: empty grid");
    std::vector<double> out;
    out.reserve(theta_grid.size());
    for (const Vec& th : theta_grid) out.push_back(log_likelihood(model, th, y, tol));
    return out;
}

DenseStatePosterior dense_state_posterior(const LinearModel& model, const Vec& theta,
                                          const Observations& y, const Tolerances& tol) {
    const Index n = model.n;
    const Index N = model.N;
    const GaussianMoment x0 = to_moment(model.x0_prior, tol);
    const Mat a = model.transition_matrix(theta);
    const Vec c = model.observation_vector(theta);

    // states as linear functions of s = (x0, u_1..u_N)
    std::vector<Mat> t(N + 1);
    t[0] = Mat::Zero(n, n + N);
    t[0].leftCols(n).setIdentity();
    for (Index k = 1; k <= N; ++k) {
        t[k] = a * t[k - 1];
        t[k](0, n + k - 1) += 1.0;
    }
    Vec ms = Vec::Zero(n + N);
    ms.head(n) = x0.mean;
    Mat sigs = Mat::Zero(n + N, n + N);
    sigs.topLeftCorner(n, n) = x0.cov;
    sigs.bottomRightCorner(N, N) = model.sigma_u2 * Mat::Identity(N, N);

    Mat h(N, n + N);
    for (Index k = 1; k <= N; ++k) h.row(k - 1) = c.transpose() * t[k];
    const Mat sig_sy = sigs * h.transpose();
    const Mat sig_yy =
        symmetrize(h * sig_sy + model.sigma_z2 * Mat::Identity(N, N));

    Eigen::LDLT<Mat> ldlt(sig_yy);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw SingularSystem("dense_state_posterior: observation covariance not PD");
    const Vec resid = y.y - h * ms;
    const Vec alpha = ldlt.solve(resid);
    double logdet = 0.0;
    for (Index i = 0; i < N; ++i) logdet += std::log(ldlt.vectorD()[i]);

    DenseStatePosterior out;
    out.log_lik = -0.5 * (N * std::log(kTwoPi) + logdet + resid.dot(alpha));
    const Mat k_gain = ldlt.solve(sig_sy.transpose()).transpose();  // (n+N) x N
    const Vec ms_post = ms + k_gain * resid;
    const Mat sig_post = symmetrize(sigs - k_gain * sig_sy.transpose());
    out.state_marginals.reserve(N + 1);
    for (Index k = 0; k <= N; ++k)
        out.state_marginals.push_back(
            GaussianMoment{t[k] * ms_post, symmetrize(t[k] * sig_post * t[k].transpose())});
    return out;
}

}  // namespace oracle
}  // namespace emfg
