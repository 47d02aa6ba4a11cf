#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Eigenvalues>

#include "emfg/types.hpp"

namespace emfg {

/// Seeded random source. Normal variates use Box-Muller on top of the
/// mt19937_64 stream so the draw sequence does not depend on the standard
/// library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        // 53-bit mantissa uniform in [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Vec normal_vec(Index d) {
        Vec v(d);
        for (Index i = 0; i < d; ++i) v[i] = normal();
        return v;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Square root factor L with L L' = V for symmetric PSD V; eigenvalue based,
/// so singular covariances are handled (zero columns in the factor).
inline Mat psd_factor(const Mat& v) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (v + v.transpose()));
    Vec ev = es.eigenvalues();
    for (Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
    return es.eigenvectors() * ev.asDiagonal();
}

/// Draw from a moment-form Gaussian; the covariance may be singular.
inline Vec sample_gaussian(const GaussianMoment& g, Rng& rng) {
    return g.mean + psd_factor(g.cov) * rng.normal_vec(g.dim());
}

/// Random symmetric positive definite matrix with eigenvalues in roughly
/// [0.1, 2]; used by tests and the verification suite.
inline Mat random_spd(Index d, Rng& rng) {
    Mat a(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) a(i, j) = rng.normal();
    return 0.5 * (a * a.transpose()) / static_cast<double>(d) + 0.1 * Mat::Identity(d, d);
}

}  // namespace emfg
