#include "emfg/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "emfg/check_tables.hpp"
#include "emfg/io.hpp"

namespace emfg {

namespace {

Vec parse_theta_list(const std::string& text, const char* what) {
    if (text.empty()) throw InvalidConfig(std::string(what) + ": empty coefficient list");
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string tok =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
            std::size_t pos = 0;
            values.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw InvalidConfig(std::string(what) + ": bad number \"" + tok + "\"");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return Eigen::Map<const Vec>(values.data(), static_cast<Index>(values.size()));
}

ModelKind parse_model(const std::string& name) {
    if (name == "fir") return ModelKind::FIR;
    if (name == "ar") return ModelKind::AR;
    throw InvalidConfig("model must be \"fir\" or \"ar\"");
}

// x0 prior in weight form: "auto" = a proper model-matched prior (the FIR
// state is a window of innovations, so its stationary prior is sigma_u2 I),
// "diffuse" = zero weight, otherwise an isotropic variance.
GaussianWeight resolve_x0(const std::string& x0, ModelKind kind, Index n, double sigma_u2) {
    if (x0 == "diffuse") return GaussianWeight::zero(n);
    double variance = 0.0;
    if (x0 == "auto") {
        variance = kind == ModelKind::FIR ? sigma_u2 : 1.0;
    } else {
        try {
            std::size_t pos = 0;
            variance = std::stod(x0, &pos);
            if (pos != x0.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw InvalidConfig("--x0 must be \"auto\", \"diffuse\", or a variance");
        }
        if (!(variance > 0.0)) throw InvalidConfig("--x0 variance must be > 0");
    }
    return GaussianWeight{Mat::Identity(n, n) / variance, Vec::Zero(n)};
}

double x0_code(const std::string& x0) {
    if (x0 == "auto") return -1.0;
    if (x0 == "diffuse") return 0.0;
    return std::stod(x0);
}

std::string x0_from_code(double code) {
    if (code < 0.0) return "auto";
    if (code == 0.0) return "diffuse";
    return format_double(code);
}

LinearModel build_model(ModelKind kind, Index n, Index N, double su2, double sz2,
                        const std::string& x0) {
    GaussianWeight prior = resolve_x0(x0, kind, n, su2);
    return kind == ModelKind::FIR ? LinearModel::fir(n, N, su2, sz2, std::move(prior))
                                  : LinearModel::ar(n, N, su2, sz2, std::move(prior));
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ParseError& e) {
        std::cerr << "ERROR ParseError: " << e.what() << "\n";
        return 3;
    } catch (const UnidentifiableParameter& e) {
        std::cerr << "ERROR UnidentifiableParameter: " << e.what() << "\n";
        return 2;
    } catch (const InvalidConfig& e) {
        std::cerr << "ERROR InvalidConfig: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "ERROR IoError: " << e.what() << "\n";
        return 1;
    } catch (const SingularSystem& e) {
        std::cerr << "ERROR SingularSystem: " << e.what() << "\n";
        return 1;
    } catch (const SingularNoise& e) {
        std::cerr << "ERROR SingularNoise: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "ERROR Error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ERROR Internal: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int cmd_simulate(const RunConfig& config) {
    return guarded([&config]() {
        const ModelKind kind = parse_model(config.model);
        const Vec theta = parse_theta_list(config.theta, "--theta");
        if (theta.size() != config.order)
            throw InvalidConfig("--theta must have exactly --order entries");
        if (config.out_path.empty()) throw InvalidConfig("--out is required");
        const LinearModel model = build_model(kind, config.order, config.length,
                                              config.sigma_u2, config.sigma_z2, config.x0);
        const SimulationResult sim = simulate(model, theta, config.seed);
        write_dataset_csv(config.out_path, sim.obs.y);
        DatasetMeta meta;
        meta.kind = kind;
        meta.n = model.n;
        meta.N = model.N;
        meta.sigma_u2 = model.sigma_u2;
        meta.sigma_z2 = model.sigma_z2;
        meta.x0_variance = x0_code(config.x0);
        meta.theta_true = theta;
        meta.seed = config.seed;
        write_dataset_meta(sidecar_path(config.out_path), meta);
        std::cout << "wrote " << config.out_path << " and " << sidecar_path(config.out_path)
                  << " (" << model.N << " observations)\n";
        return 0;
    });
}

int cmd_identify(const RunConfig& config) {
    return guarded([&config]() {
        if (config.in_path.empty()) throw InvalidConfig("--in is required");
        if (config.out_path.empty()) throw InvalidConfig("--out is required");
        const Vec y = read_dataset_csv(config.in_path);
        const auto meta = read_dataset_meta(sidecar_path(config.in_path));

        const ModelKind kind = config.model_set  ? parse_model(config.model)
                               : meta.has_value() ? meta->kind
                                                  : parse_model(config.model);
        const Index n = config.order_set ? config.order : meta ? meta->n : config.order;
        const double su2 = config.sigma_u_set ? config.sigma_u2
                           : meta              ? meta->sigma_u2
                                               : config.sigma_u2;
        const double sz2 = config.sigma_z_set ? config.sigma_z2
                           : meta              ? meta->sigma_z2
                                               : config.sigma_z2;
        const std::string x0 = config.x0_set ? config.x0
                               : meta         ? x0_from_code(meta->x0_variance)
                                              : config.x0;
        const LinearModel model = build_model(kind, n, y.size(), su2, sz2, x0);

        EmConfig em_cfg;
        em_cfg.max_iter = config.max_iter;
        em_cfg.tol = config.tol;
        if (config.schedule == "batch")
            em_cfg.schedule = Schedule::Batch;
        else if (config.schedule == "serial")
            em_cfg.schedule = Schedule::Serial;
        else
            throw InvalidConfig("--schedule must be \"batch\" or \"serial\"");
        if (!config.theta_init.empty()) {
            em_cfg.theta_init = parse_theta_list(config.theta_init, "--theta-init");
            if (em_cfg.theta_init.size() != n)
                throw InvalidConfig("--theta-init must have exactly --order entries");
        }

        const auto t0 = std::chrono::steady_clock::now();
        const EmReport report = run_em(model, Observations{y}, em_cfg);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        write_report_json(config.out_path, model, report, wall_ms);

        std::cout << "theta_hat =";
        for (Index i = 0; i < report.iterates.back().size(); ++i)
            std::cout << " " << format_double(report.iterates.back()[i]);
        std::cout << "\nlog_lik = " << format_double(report.log_liks.back())
                  << ", iterations = " << report.iterations_used
                  << (report.converged ? " (converged)" : " (not converged)") << "\n";
        for (const std::string& w : report.warnings) std::cout << "warning: " << w << "\n";
        std::cout << "wrote " << config.out_path << "\n";
        return 0;
    });
}

int cmd_check_tables(const RunConfig& config) {
    return guarded([&config]() {
        CheckOptions opts;
        opts.seed = config.seed;
        opts.instances = config.instances;
        opts.inject_error_case = config.inject_error;
        const CheckSummary summary = run_check_tables(opts);
        std::cout << format_summary(summary);
        return summary.all_pass ? 0 : 1;
    });
}

int run_cli(int argc, char** argv) {
    CLI::App app{"System identification by EM message passing on Gaussian factor graphs"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_model_flags = [&cfg](CLI::App* sub) {
        sub->add_option("--model", cfg.model, "model kind: fir or ar")
            ->check(CLI::IsMember({"fir", "ar"}));
        sub->add_option("--order", cfg.order, "model order n");
        sub->add_option("--sigma-u", cfg.sigma_u2, "innovation variance sigma_U^2");
        sub->add_option("--sigma-z", cfg.sigma_z2, "observation noise variance sigma_Z^2");
        sub->add_option("--x0", cfg.x0, "x0 prior: auto, diffuse, or a variance");
    };

    CLI::App* sim = app.add_subcommand("simulate", "draw a dataset and write CSV + sidecar");
    add_model_flags(sim);
    sim->add_option("--length", cfg.length, "number of observations N");
    sim->add_option("--theta", cfg.theta, "true coefficients, comma separated")->required();
    sim->add_option("--seed", cfg.seed, "RNG seed");
    sim->add_option("--out", cfg.out_path, "output CSV path")->required();

    CLI::App* idf = app.add_subcommand("identify", "run EM identification on a dataset");
    add_model_flags(idf);
    idf->add_option("--in", cfg.in_path, "input CSV path")->required();
    idf->add_option("--out", cfg.out_path, "output report JSON path")->required();
    idf->add_option("--max-iter", cfg.max_iter, "maximum EM iterations");
    idf->add_option("--tol", cfg.tol, "relative parameter-change stopping threshold");
    idf->add_option("--schedule", cfg.schedule, "update schedule: batch or serial")
        ->check(CLI::IsMember({"batch", "serial"}));
    idf->add_option("--theta-init", cfg.theta_init, "initial guess, comma separated");

    CLI::App* chk = app.add_subcommand("check-tables",
                                       "verify the closed forms against numeric oracles");
    chk->add_option("--seed", cfg.seed, "RNG seed");
    chk->add_option("--instances", cfg.instances, "random instances per case");
    chk->add_option("--inject-error", cfg.inject_error,
                    "flip a sign in the named case (suite self-test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    cfg.model_set = sim->count("--model") || idf->count("--model");
    cfg.order_set = sim->count("--order") || idf->count("--order");
    cfg.sigma_u_set = sim->count("--sigma-u") || idf->count("--sigma-u");
    cfg.sigma_z_set = sim->count("--sigma-z") || idf->count("--sigma-z");
    cfg.x0_set = sim->count("--x0") || idf->count("--x0");
    cfg.seed_set = sim->count("--seed") || chk->count("--seed");

    if (!cfg.seed_set) {
        if (const char* env = std::getenv("EMFG_SEED")) {
            try {
                cfg.seed = std::stoull(env);
            } catch (const std::exception&) {
                std::cerr << "ERROR InvalidConfig: EMFG_SEED is not an integer\n";
                return 1;
            }
        }
    }

    if (sim->parsed()) return cmd_simulate(cfg);
    if (idf->parsed()) return cmd_identify(cfg);
    return cmd_check_tables(cfg);
}

}  // namespace emfg
