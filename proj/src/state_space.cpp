#include "emfg/state_space.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "emfg/random.hpp"

namespace emfg {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void validate(const LinearModel& m) {
    if (m.n < 1) throw InvalidConfig("model: order must be >= 1");
    if (m.N < 1) throw InvalidConfig("model: length must be >= 1");
    if (!(m.sigma_u2 > 0.0)) throw InvalidConfig("model: sigma_u2 must be > 0");
    if (!(m.sigma_z2 > 0.0)) throw InvalidConfig("model: sigma_z2 must be > 0");
    if (m.x0_prior.dim() != m.n || m.x0_prior.weight.rows() != m.n)
        throw InvalidConfig("model: x0 prior dimension mismatch");
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::FIR ? "fir" : "ar"; }

LinearModel LinearModel::fir(Index n, Index N, double sigma_u2, double sigma_z2) {
    return fir(n, N, sigma_u2, sigma_z2, GaussianWeight::zero(n));
}

LinearModel LinearModel::fir(Index n, Index N, double sigma_u2, double sigma_z2,
                             GaussianWeight x0_prior) {
    LinearModel m{ModelKind::FIR, n, N, sigma_u2, sigma_z2, std::move(x0_prior)};
    validate(m);
    return m;
}

LinearModel LinearModel::ar(Index n, Index N, double sigma_u2, double sigma_z2) {
    return ar(n, N, sigma_u2, sigma_z2, GaussianWeight::zero(n));
}

LinearModel LinearModel::ar(Index n, Index N, double sigma_u2, double sigma_z2,
                            GaussianWeight x0_prior) {
    LinearModel m{ModelKind::AR, n, N, sigma_u2, sigma_z2, std::move(x0_prior)};
    validate(m);
    return m;
}

Vec LinearModel::transition_row(const Vec& theta) const {
    if (theta.size() != n) throw DimensionMismatch("model: theta dimension mismatch");
    return kind == ModelKind::FIR ? Vec(Vec::Zero(n)) : theta;
}

Mat LinearModel::transition_matrix(const Vec& theta) const {
    Mat a = Mat::Zero(n, n);
    a.row(0) = transition_row(theta).transpose();
    if (n > 1) a.block(1, 0, n - 1, n - 1).setIdentity();
    return a;
}

Vec LinearModel::observation_vector(const Vec& theta) const {
    if (theta.size() != n) throw DimensionMismatch("model: theta dimension mismatch");
    if (kind == ModelKind::FIR) return theta;
    Vec c = Vec::Zero(n);
    c[0] = 1.0;
    return c;
}

SimulationResult simulate(const LinearModel& model, const Vec& theta_true, std::uint64_t seed) {
    const Vec c = model.observation_vector(theta_true);
    const Mat a = model.transition_matrix(theta_true);
    Rng rng(seed);

    // x0 from the prior: proper directions are sampled, flat ones start at
    // the (pseudo) mean, which is zero for the uninformative default.
    Vec x(model.n);
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(model.x0_prior.weight));
        const Vec ev = es.eigenvalues();
        const double cutoff = 1e-12 * std::max(1.0, ev.maxCoeff());
        const Vec ht = es.eigenvectors().transpose() * model.x0_prior.weighted_mean;
        Vec comps = Vec::Zero(model.n);
        for (Index i = 0; i < model.n; ++i)
            if (ev[i] > cutoff) comps[i] = ht[i] / ev[i] + rng.normal() / std::sqrt(ev[i]);
        x = es.eigenvectors() * comps;
    }

    SimulationResult out;
    out.states.resize(model.N + 1, model.n);
    out.states.row(0) = x.transpose();
    out.inputs.resize(model.N);
    out.obs.y.resize(model.N);
    const double su = std::sqrt(model.sigma_u2);
    const double sz = std::sqrt(model.sigma_z2);
    for (Index k = 1; k <= model.N; ++k) {
        const double u = su * rng.normal();
        x = a * x;
        x[0] += u;
        out.inputs[k - 1] = u;
        out.states.row(k) = x.transpose();
        out.obs.y[k - 1] = c.dot(x) + sz * rng.normal();
    }
    return out;
}

GaussianWeight observation_message(const Vec& c, double y, double sigma_z2) {
    return GaussianWeight{c * c.transpose() / sigma_z2, c * (y / sigma_z2)};
}

GaussianWeight forward_transition_weight(const GaussianWeight& msg, const Vec& first_row,
                                         double sigma_u2) {
    const Index n = msg.dim();
    if (first_row.size() != n)
        throw DimensionMismatch("forward_transition_weight: row dimension mismatch");
    // Variables z = (x'_1..x'_n, t) with t the old last state component:
    // old x = (x'_2,..,x'_n, t) and the input u = x'_1 - first_row . x.
    Mat xmap = Mat::Zero(n, n + 1);
    for (Index j = 0; j + 1 < n; ++j) xmap(j, j + 1) = 1.0;
    xmap(n - 1, n) = 1.0;
    Vec umap = Vec::Zero(n + 1);
    umap[0] = 1.0;
    umap -= xmap.transpose() * first_row;

    Mat wj = xmap.transpose() * msg.weight * xmap + umap * umap.transpose() / sigma_u2;
    Vec hj = xmap.transpose() * msg.weighted_mean;

    // Marginalize t (last variable). A vanishing pivot is a structurally
    // flat direction of a degenerate message and simply drops out.
    const double wb = wj(n, n);
    const double scale = std::max(1.0, wj.diagonal().head(n).maxCoeff());
    GaussianWeight out;
    if (wb > 1e-12 * scale) {
        const Vec wab = wj.col(n).head(n);
        out.weight = symmetrize(wj.topLeftCorner(n, n) - wab * wab.transpose() / wb);
        out.weighted_mean = hj.head(n) - wab * (hj[n] / wb);
    } else {
        out.weight = symmetrize(wj.topLeftCorner(n, n));
        out.weighted_mean = hj.head(n);
    }
    return out;
}

GaussianWeight backward_transition_weight(const GaussianWeight& msg, const Mat& a,
                                          double sigma_u2) {
    const Index n = msg.dim();
    if (a.rows() != n || a.cols() != n)
        throw DimensionMismatch("backward_transition_weight: shape mismatch");
    // Integrate the scalar input out of the composed factor; its quadratic
    // coefficient is always positive, so no degeneracy can arise here.
    const double quu = msg.weight(0, 0) + 1.0 / sigma_u2;
    const Vec qxu = a.transpose() * msg.weight.col(0);
    const Mat qxx = a.transpose() * msg.weight * a;
    const Vec hx = a.transpose() * msg.weighted_mean;
    return GaussianWeight{symmetrize(qxx - qxu * qxu.transpose() / quu),
                          hx - qxu * (msg.weighted_mean[0] / quu)};
}

namespace {

// Forward pass over the state chain. Runs in weight form with a tracked log
// normalization until the message becomes positive definite, then in moment
// form with standard innovations updates. The tracked constant makes the
// accumulated value the exact (diffuse) log likelihood at every point.
class ForwardPass {
public:
    ForwardPass(const LinearModel& model, const Vec& theta, const Tolerances& tol)
        : model_(model),
          tol_(tol),
          a1_(model.transition_row(theta)),
          c_(model.observation_vector(theta)),
          a_(model.transition_matrix(theta)) {
        w_ = model.x0_prior;
        gamma_ = weight_log_normalizer(w_);
        try_promote();
    }

    void transition() {
        if (moment_) {
            m_ = a_ * m_;
            v_ = symmetrize(a_ * v_ * a_.transpose());
            v_(0, 0) += model_.sigma_u2;
            return;
        }
        gamma_ += -0.5 * std::log(kTwoPi * model_.sigma_u2);
        const Index n = model_.n;
        Mat xmap = Mat::Zero(n, n + 1);
        for (Index j = 0; j + 1 < n; ++j) xmap(j, j + 1) = 1.0;
        xmap(n - 1, n) = 1.0;
        Vec umap = Vec::Zero(n + 1);
        umap[0] = 1.0;
        umap -= xmap.transpose() * a1_;
        Mat wj = xmap.transpose() * w_.weight * xmap + umap * umap.transpose() / model_.sigma_u2;
        Vec hj = xmap.transpose() * w_.weighted_mean;
        const double wb = wj(n, n);
        const double scale = std::max(1.0, wj.diagonal().head(n).maxCoeff());
        if (wb > 1e-12 * scale) {
            const Vec wab = wj.col(n).head(n);
            w_.weight = symmetrize(wj.topLeftCorner(n, n) - wab * wab.transpose() / wb);
            w_.weighted_mean = hj.head(n) - wab * (hj[n] / wb);
            gamma_ += 0.5 * hj[n] * hj[n] / wb + 0.5 * std::log(kTwoPi / wb);
        } else {
            // flat in the marginalized component; diffuse direction drops out
            w_.weight = symmetrize(wj.topLeftCorner(n, n));
            w_.weighted_mean = hj.head(n);
        }
        try_promote();
    }

    void fold_observation(double y) {
        if (moment_) {
            const Vec vc = v_ * c_;
            const double s = c_.dot(vc) + model_.sigma_z2;
            const double resid = y - c_.dot(m_);
            gamma_ += -0.5 * (std::log(kTwoPi * s) + resid * resid / s);
            m_ += vc * (resid / s);
            v_ = symmetrize(v_ - vc * vc.transpose() / s);
            return;
        }
        w_.weight += c_ * c_.transpose() / model_.sigma_z2;
        w_.weighted_mean += c_ * (y / model_.sigma_z2);
        gamma_ += -0.5 * (y * y / model_.sigma_z2 + std::log(kTwoPi * model_.sigma_z2));
        try_promote();
    }

    Message snapshot() const {
        if (moment_) return Message(GaussianMoment{m_, v_});
        return Message(w_);
    }

    /// log of the integral of the current potential over the state: the
    /// accumulated (diffuse) log likelihood of the observations folded so far.
    double log_integral() const {
        if (moment_) return gamma_;
        return gamma_ + weight_log_integral(w_);
    }

private:
    // log of the constant that turns exp(-x'Wx/2 + x'h) into a density on
    // the proper subspace (value 1 on flat directions).
    static double weight_log_normalizer(const GaussianWeight& g) {
        return -weight_log_integral(g);
    }

    static double weight_log_integral(const GaussianWeight& g) {
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(g.weight));
        const Vec ev = es.eigenvalues();
        const double cutoff = 1e-12 * std::max(1.0, ev.maxCoeff());
        const Vec ht = es.eigenvectors().transpose() * g.weighted_mean;
        const double hscale = std::max(1.0, ht.cwiseAbs().maxCoeff());
        double acc = 0.0;
        for (Index i = 0; i < ev.size(); ++i) {
            if (ev[i] > cutoff) {
                acc += 0.5 * ht[i] * ht[i] / ev[i] + 0.5 * std::log(kTwoPi / ev[i]);
            } else if (std::abs(ht[i]) > 1e-9 * hscale) {
                throw SingularSystem("state message improper: linear term on a flat direction");
            }
        }
        return acc;
    }

    void try_promote() {
        if (moment_) return;
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(w_.weight));
        const Vec ev = es.eigenvalues();
        if (!(ev.minCoeff() > std::max(tol_.tau_solve, 1e-12) * std::max(1.0, ev.maxCoeff())))
            return;
        gamma_ += weight_log_integral(w_);
        v_ = symmetrize(es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                        es.eigenvectors().transpose());
        m_ = v_ * w_.weighted_mean;
        moment_ = true;
    }

    const LinearModel& model_;
    Tolerances tol_;
    Vec a1_;
    Vec c_;
    Mat a_;
    bool moment_ = false;
    GaussianWeight w_;  // weight phase
    Vec m_;             // moment phase
    Mat v_;
    double gamma_ = 0.0;
};

void check_observations(const LinearModel& model, const Observations& y) {
    if (y.y.size() != model.N) throw DimensionMismatch("observations: length mismatch");
    if (!y.y.allFinite()) throw InvalidConfig("observations: entries must be finite");
}

}  // namespace

SweepResult sweep(const LinearModel& model, const Vec& theta, const Observations& y,
                  const Tolerances& tol) {
    check_observations(model, y);
    const Vec c = model.observation_vector(theta);
    const Mat a = model.transition_matrix(theta);

    SweepResult out;
    out.fwd.reserve(model.N + 1);
    out.bwd.assign(model.N + 1, GaussianWeight::zero(model.n));

    ForwardPass fp(model, theta, tol);
    out.fwd.push_back(fp.snapshot());
    for (Index k = 1; k <= model.N; ++k) {
        if (model.kind == ModelKind::FIR) {
            // fwd[k] is the predictive message; y_{k-1} was folded at the
            // previous equality node.
            if (k >= 2) fp.fold_observation(y.y[k - 2]);
            fp.transition();
        } else {
            fp.transition();
            fp.fold_observation(y.y[k - 1]);
        }
        out.fwd.push_back(fp.snapshot());
    }

    if (model.kind == ModelKind::FIR) {
        out.bwd[model.N] = observation_message(c, y.y[model.N - 1], model.sigma_z2);
        for (Index k = model.N - 1; k >= 0; --k) {
            GaussianWeight back = backward_transition_weight(out.bwd[k + 1], a, model.sigma_u2);
            if (k >= 1)
                back = combine_parallel(back,
                                        observation_message(c, y.y[k - 1], model.sigma_z2));
            out.bwd[k] = std::move(back);
        }
    } else {
        for (Index k = model.N - 1; k >= 0; --k) {
            const GaussianWeight incl = combine_parallel(
                out.bwd[k + 1], observation_message(c, y.y[k], model.sigma_z2));
            out.bwd[k] = backward_transition_weight(incl, a, model.sigma_u2);
        }
    }
    return out;
}

GaussianWeight SweepResult::posterior(Index k, const Tolerances& tol) const {
    return combine_parallel(fwd.at(k).weight(tol), bwd.at(k));
}

double log_likelihood(const LinearModel& model, const Vec& theta, const Observations& y,
                      const Tolerances& tol) {
    check_observations(model, y);
    ForwardPass fp(model, theta, tol);
    for (Index k = 1; k <= model.N; ++k) {
        fp.transition();
        fp.fold_observation(y.y[k - 1]);
    }
    return fp.log_integral();
}

}  // namespace emfg
