#include "emfg/em.hpp"

#include <cmath>
#include <sstream>

namespace emfg {

namespace {

void validate(const EmConfig& c, const LinearModel& model) {
    if (c.max_iter < 1) throw InvalidConfig("em: max_iter must be >= 1");
    if (!(c.tol > 0.0)) throw InvalidConfig("em: tol must be > 0");
    if (c.theta_init.size() != 0 && c.theta_init.size() != model.n)
        throw InvalidConfig("em: theta_init dimension mismatch");
    if (c.theta_prior && c.theta_prior->dim() != model.n)
        throw InvalidConfig("em: theta_prior dimension mismatch");
}

Vec initial_theta(const EmConfig& c, const LinearModel& model) {
    if (c.theta_init.size()) return c.theta_init;
    // A zero start is an exact EM fixed point for FIR: with theta = 0 the
    // observations decouple from the states and every section message has
    // zero mean, so the update returns zero again.
    if (model.kind == ModelKind::FIR) return Vec::Constant(model.n, 0.1);
    return Vec::Zero(model.n);
}

GaussianMoment filtered_moment(const Message& msg, const Tolerances& tol) {
    try {
        return msg.moment(tol);
    } catch (const DegenerateMessage& e) {
        throw SingularSystem(
            std::string("em: forward state message is degenerate; the autoregressive EM "
                        "step needs a proper x0 prior (") +
            e.what() + ")");
    }
}

double rel_change(const Vec& next, const Vec& prev) {
    return (next - prev).norm() / std::max(1.0, prev.norm());
}

}  // namespace

std::vector<EmGaussian> em_section_messages(const LinearModel& model, const Vec& theta,
                                            const Observations& y, const Tolerances& tol) {
    const SweepResult sw = sweep(model, theta, y, tol);
    const Vec c = model.observation_vector(theta);
    std::vector<EmGaussian> msgs;
    msgs.reserve(model.N);

    if (model.kind == ModelKind::FIR) {
        for (Index k = 1; k <= model.N; ++k) {
            // All information about x_k except the section's own observation:
            // predictive message times the backward message with y_k removed.
            GaussianWeight box = sw.bwd[k];
            box.weight -= c * c.transpose() / model.sigma_z2;
            box.weighted_mean -= c * (y.y[k - 1] / model.sigma_z2);
            box = combine_parallel(box, sw.fwd[k].weight(tol));
            msgs.push_back(em_message_fixed_y(box, y.y[k - 1], model.sigma_z2, theta, tol));
        }
        return msgs;
    }

    const MultiplierSpec spec = MultiplierSpec::autoregression(model.n, model.sigma_u2);
    const Mat theta_col = theta;
    for (Index k = 1; k <= model.N; ++k) {
        const GaussianMoment fwd_x = filtered_moment(sw.fwd[k - 1], tol);
        const GaussianWeight bwd_y = combine_parallel(
            sw.bwd[k], observation_message(c, y.y[k - 1], model.sigma_z2));
        msgs.push_back(em_message(spec, marginals(spec, theta_col, fwd_x, bwd_y, tol), tol));
    }
    return msgs;
}

Vec em_update(const LinearModel& model, const Vec& theta, const Observations& y,
              const std::optional<GaussianWeight>& theta_prior, const Tolerances& tol) {
    if (!theta.allFinite()) throw InvalidConfig("em_update: theta must be finite");
    const std::vector<EmGaussian> msgs = em_section_messages(model, theta, y, tol);
    GaussianWeight total = theta_prior ? *theta_prior : GaussianWeight::zero(model.n);
    for (const EmGaussian& m : msgs) total = combine_parallel(total, m);
    return argmax(total, tol);
}

namespace {

EmReport iterate_em(const LinearModel& model, const Observations& y, const EmConfig& config,
                    const Tolerances& tol, bool serial) {
    validate(config, model);
    Vec theta = initial_theta(config, model);

    EmReport rep;
    rep.iterates.push_back(theta);
    rep.log_liks.push_back(log_likelihood(model, theta, y, tol));

    // Serial state: per-section messages kept across passes so the running
    // combined estimate is always over all N sections.
    std::vector<EmGaussian> serial_msgs(
        serial ? static_cast<std::size_t>(model.N) : 0,
        GaussianWeight::zero(model.n));
    const Vec e1 = model.kind == ModelKind::AR ? model.observation_vector(Vec::Zero(model.n))
                                               : Vec();

    for (int it = 1; it <= config.max_iter; ++it) {
        Vec next;
        if (!serial) {
            next = em_update(model, theta, y, config.theta_prior, tol);
        } else {
            // One left-to-right pass. Backward messages are from the start
            // of the pass; the forward recursion and the running estimate
            // use the freshest theta.
            const SweepResult sw = sweep(model, theta, y, tol);
            GaussianWeight total =
                config.theta_prior ? *config.theta_prior : GaussianWeight::zero(model.n);
            for (const EmGaussian& m : serial_msgs) total = combine_parallel(total, m);

            Vec cur = theta;
            GaussianWeight filtered = model.x0_prior;
            for (Index k = 1; k <= model.N; ++k) {
                EmGaussian fresh(GaussianWeight::zero(model.n));
                GaussianWeight predictive =
                    forward_transition_weight(filtered, model.transition_row(cur),
                                              model.sigma_u2);
                if (model.kind == ModelKind::FIR) {
                    GaussianWeight box = sw.bwd[k];
                    const Vec c_stale = model.observation_vector(theta);
                    box.weight -= c_stale * c_stale.transpose() / model.sigma_z2;
                    box.weighted_mean -= c_stale * (y.y[k - 1] / model.sigma_z2);
                    box = combine_parallel(box, predictive);
                    fresh = em_message_fixed_y(box, y.y[k - 1], model.sigma_z2, cur, tol);
                } else {
                    const MultiplierSpec spec =
                        MultiplierSpec::autoregression(model.n, model.sigma_u2);
                    const GaussianMoment fwd_x =
                        filtered_moment(Message(filtered), tol);
                    const GaussianWeight bwd_y = combine_parallel(
                        sw.bwd[k], observation_message(e1, y.y[k - 1], model.sigma_z2));
                    fresh = em_message(spec, marginals(spec, Mat(cur), fwd_x, bwd_y, tol), tol);
                }
                total.weight += fresh.weight - serial_msgs[k - 1].weight;
                total.weighted_mean += fresh.weighted_mean - serial_msgs[k - 1].weighted_mean;
                serial_msgs[k - 1] = fresh;
                try {
                    cur = argmax(total, tol);
                } catch (const UnidentifiableParameter&) {
                    // not enough sections folded in yet; keep the estimate
                }
                const Vec c_cur = model.observation_vector(cur);
                filtered = combine_parallel(
                    predictive, observation_message(c_cur, y.y[k - 1], model.sigma_z2));
            }
            next = cur;
        }

        const double ll = log_likelihood(model, next, y, tol);
        if (!serial && ll < rep.log_liks.back() - kMonotonicitySlack) {
            std::ostringstream os;
            os << "monotonicity violation at iteration " << it << ": log-likelihood fell by "
               << (rep.log_liks.back() - ll);
            rep.warnings.push_back(os.str());
        }
        const double change = rel_change(next, theta);
        theta = next;
        rep.iterates.push_back(theta);
        rep.log_liks.push_back(ll);
        rep.iterations_used = it;
        if (change < config.tol) {
            rep.converged = true;
            break;
        }
    }
    return rep;
}

}  // namespace

EmReport run_em(const LinearModel& model, const Observations& y, const EmConfig& config,
                const Tolerances& tol) {
    return iterate_em(model, y, config, tol, config.schedule == Schedule::Serial);
}

EmReport run_em_serial(const LinearModel& model, const Observations& y, const EmConfig& config,
                       const Tolerances& tol) {
    return iterate_em(model, y, config, tol, true);
}

}  // namespace emfg
