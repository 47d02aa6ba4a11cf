#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emfg/em.hpp"
#include "emfg/oracle.hpp"
#include "emfg/random.hpp"

using namespace emfg;

namespace {

Vec vec1(double a) { return Vec::Constant(1, a); }

GaussianWeight iso_prior(Index n, double variance) {
    return GaussianWeight{Mat::Identity(n, n) / variance, Vec::Zero(n)};
}

Vec stable_ar_coeffs(Index n, Rng& rng) {
    for (;;) {
        const Vec theta = 0.8 * rng.normal_vec(n) / std::sqrt(double(n));
        Mat a = Mat::Zero(n, n);
        a.row(0) = theta.transpose();
        if (n > 1) a.block(1, 0, n - 1, n - 1).setIdentity();
        if (a.eigenvalues().cwiseAbs().maxCoeff() < 0.9) return theta;
    }
}

}  // namespace

TEST_CASE("combining N copies of one message leaves the argmax unchanged") {
    Rng rng(83);
    const GaussianWeight one = to_weight(GaussianMoment{rng.normal_vec(2), random_spd(2, rng)});
    GaussianWeight total = one;
    for (int copies = 2; copies <= 16; ++copies) {
        total = combine_parallel(total, one);
        CHECK((argmax(total) - argmax(one)).norm() < 1e-10);
    }
}

TEST_CASE("order-one FIR update is weighted least squares on posterior moments") {
    const double su2 = 0.7, sz2 = 0.25;
    const LinearModel model = LinearModel::fir(1, 40, su2, sz2);
    const SimulationResult sim = simulate(model, vec1(0.6), 91);
    const double theta_hat = -0.35;

    // at order one the state decouples: the local posterior at section k is
    // the one-step conditioning of N(0, su2) on y_k alone
    double num = 0.0, den = 0.0;
    for (Index k = 0; k < model.N; ++k) {
        const double v = 1.0 / (1.0 / su2 + theta_hat * theta_hat / sz2);
        const double m = v * theta_hat * sim.obs.y[k] / sz2;
        num += m * sim.obs.y[k];
        den += v + m * m;
    }
    const Vec next = em_update(model, vec1(theta_hat), sim.obs);
    CHECK(next[0] == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("em_update is a fixed point where the likelihood gradient vanishes") {
    const LinearModel model = LinearModel::fir(2, 200, 1.0, 0.1, iso_prior(2, 1.0));
    Vec theta_true(2);
    theta_true << 0.8, -0.5;
    const SimulationResult sim = simulate(model, theta_true, 7);

    EmConfig cfg;
    cfg.max_iter = 3000;
    cfg.tol = 1e-12;
    const EmReport rep = run_em(model, sim.obs, cfg);
    REQUIRE(rep.converged);
    const Vec at = rep.iterates.back();
    CHECK((em_update(model, at, sim.obs) - at).norm() < 1e-6);

    const double h = 1e-4;
    Vec grad(2);
    for (Index i = 0; i < 2; ++i) {
        Vec up = at, dn = at;
        up[i] += h;
        dn[i] -= h;
        const auto lls = oracle::likelihood_grid(model, sim.obs, {up, dn});
        grad[i] = (lls[0] - lls[1]) / (2 * h);
    }
    CHECK(grad.norm() < 1e-4);
}

TEST_CASE("run_em bookkeeping") {
    const LinearModel model = LinearModel::fir(2, 60, 1.0, 0.2, iso_prior(2, 1.0));
    Vec theta_true(2);
    theta_true << 0.5, 0.3;
    const SimulationResult sim = simulate(model, theta_true, 17);

    EmConfig one;
    one.max_iter = 1;
    one.tol = 1e-15;
    const EmReport rep1 = run_em(model, sim.obs, one);
    CHECK(rep1.iterates.size() == 2);  // init plus one update
    CHECK(rep1.log_liks.size() == 2);
    CHECK(rep1.iterations_used == 1);
    CHECK(!rep1.converged);

    EmConfig loose;
    loose.max_iter = 50;
    loose.tol = 1e9;
    const EmReport rep2 = run_em(model, sim.obs, loose);
    CHECK(rep2.converged);
    CHECK(rep2.iterations_used == 1);

    EmConfig bad;
    bad.max_iter = 0;
    CHECK_THROWS_AS(run_em(model, sim.obs, bad), InvalidConfig);
}

TEST_CASE("batch EM log-likelihoods are monotone for both models") {
    Rng rng(23);
    {
        const LinearModel model = LinearModel::fir(2, 150, 1.0, 0.1, iso_prior(2, 1.0));
        const SimulationResult sim = simulate(model, Vec(stable_ar_coeffs(2, rng)), 29);
        EmConfig cfg;
        cfg.max_iter = 25;
        cfg.tol = 1e-14;
        const EmReport rep = run_em(model, sim.obs, cfg);
        CHECK(rep.warnings.empty());
        for (std::size_t i = 1; i < rep.log_liks.size(); ++i)
            CHECK(rep.log_liks[i] >= rep.log_liks[i - 1] - kMonotonicitySlack);
    }
    {
        const LinearModel model = LinearModel::ar(2, 150, 1.0, 0.1, iso_prior(2, 1.0));
        const SimulationResult sim = simulate(model, stable_ar_coeffs(2, rng), 31);
        EmConfig cfg;
        cfg.max_iter = 25;
        cfg.tol = 1e-14;
        const EmReport rep = run_em(model, sim.obs, cfg);
        CHECK(rep.warnings.empty());
        for (std::size_t i = 1; i < rep.log_liks.size(); ++i)
            CHECK(rep.log_liks[i] >= rep.log_liks[i - 1] - kMonotonicitySlack);
    }
}

TEST_CASE("equality-chain combination is order invariant") {
    const LinearModel model = LinearModel::ar(2, 40, 1.0, 0.15, iso_prior(2, 1.0));
    Rng rng(37);
    const SimulationResult sim = simulate(model, stable_ar_coeffs(2, rng), 41);
    Vec theta(2);
    theta << 0.2, -0.1;
    const std::vector<EmGaussian> msgs = em_section_messages(model, theta, sim.obs);
    REQUIRE(msgs.size() == 40);

    GaussianWeight fwd_total = GaussianWeight::zero(2);
    for (const auto& m : msgs) fwd_total = combine_parallel(fwd_total, m);
    GaussianWeight rev_total = GaussianWeight::zero(2);
    for (auto it = msgs.rbegin(); it != msgs.rend(); ++it)
        rev_total = combine_parallel(rev_total, *it);
    CHECK((argmax(fwd_total) - argmax(rev_total)).norm() < 1e-10);
}

TEST_CASE("a strong Gaussian prior pulls the update toward its mean") {
    const LinearModel model = LinearModel::fir(2, 80, 1.0, 0.2, iso_prior(2, 1.0));
    Vec theta_true(2);
    theta_true << 0.7, -0.2;
    const SimulationResult sim = simulate(model, theta_true, 43);
    Vec theta0(2);
    theta0 << -1.0, 1.0;  // deliberately far from the data fit
    const Vec start = Vec::Zero(2);

    double prev = std::numeric_limits<double>::infinity();
    for (double w : {0.0, 10.0, 100.0, 1000.0, 10000.0}) {
        std::optional<GaussianWeight> prior;
        if (w > 0.0) prior = GaussianWeight{w * Mat::Identity(2, 2), w * theta0};
        const Vec next = em_update(model, start, sim.obs, prior);
        const double dist = (next - theta0).norm();
        CHECK(dist < prev + 1e-12);
        prev = dist;
    }
}

TEST_CASE("autoregressive EM with a diffuse x0 prior reports the degeneracy") {
    const LinearModel model = LinearModel::ar(2, 30, 1.0, 0.1);  // x0 weight 0
    Rng rng(47);
    const SimulationResult sim = simulate(model, stable_ar_coeffs(2, rng), 53);
    CHECK_THROWS_AS(em_section_messages(model, Vec(Vec::Zero(2)), sim.obs), SingularSystem);
}

TEST_CASE("serial schedule equals batch at a single section") {
    const LinearModel model = LinearModel::fir(2, 1, 1.0, 0.3, iso_prior(2, 1.0));
    Vec theta_true(2);
    theta_true << 0.4, 0.1;
    const SimulationResult sim = simulate(model, theta_true, 59);
    EmConfig cfg;
    cfg.max_iter = 5;
    cfg.tol = 1e-14;
    const EmReport batch = run_em(model, sim.obs, cfg);
    const EmReport serial = run_em_serial(model, sim.obs, cfg);
    REQUIRE(batch.iterates.size() == serial.iterates.size());
    for (std::size_t i = 0; i < batch.iterates.size(); ++i)
        CHECK((batch.iterates[i] - serial.iterates[i]).norm() < 1e-12);
}

TEST_CASE("serial schedule runs both models and reaches a comparable optimum") {
    Rng rng(61);
    for (bool fir : {true, false}) {
        const LinearModel model = fir ? LinearModel::fir(2, 120, 1.0, 0.1, iso_prior(2, 1.0))
                                      : LinearModel::ar(2, 120, 1.0, 0.1, iso_prior(2, 1.0));
        const SimulationResult sim = simulate(model, stable_ar_coeffs(2, rng), 67);
        EmConfig cfg;
        cfg.max_iter = 60;
        cfg.tol = 1e-9;
        const EmReport batch = run_em(model, sim.obs, cfg);
        cfg.schedule = Schedule::Serial;
        const EmReport serial = run_em(model, sim.obs, cfg);
        for (double ll : serial.log_liks) CHECK(std::isfinite(ll));
        if (batch.converged && serial.converged)
            CHECK(std::abs(batch.log_liks.back() - serial.log_liks.back()) < 1e-3);
    }
}

TEST_CASE("estimates tighten with more data") {
    // medians over a handful of seeds at two record lengths
    Rng rng(71);
    Vec theta_true = stable_ar_coeffs(2, rng);
    theta_true *= 1.0 / theta_true.norm();
    std::vector<double> err_short, err_long;
    for (std::uint64_t seed = 1; seed <= 7; ++seed) {
        for (Index N : {200, 2000}) {
            const LinearModel model = LinearModel::fir(2, N, 1.0, 0.1, iso_prior(2, 1.0));
            const SimulationResult sim = simulate(model, theta_true, seed);
            EmConfig cfg;
            cfg.max_iter = 150;
            cfg.tol = 1e-7;
            const EmReport rep = run_em(model, sim.obs, cfg);
            // FIR coefficients are identifiable only up to a global sign
            const double err = std::min((rep.iterates.back() - theta_true).norm(),
                                        (rep.iterates.back() + theta_true).norm());
            (N == 200 ? err_short : err_long).push_back(err);
        }
    }
    std::sort(err_short.begin(), err_short.end());
    std::sort(err_long.begin(), err_long.end());
    CHECK(err_long[err_long.size() / 2] < err_short[err_short.size() / 2]);
}
