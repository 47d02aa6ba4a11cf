#pragma once

#include <cstdint>
#include <string>

#include "emfg/types.hpp"

namespace emfg {

/// Parsed command-line configuration shared by the subcommands. Flags that
/// were not given on the command line fall back to the dataset sidecar
/// (identify) or to these defaults.
struct RunConfig {
    std::string model = "fir";
    Index order = 2;
    Index length = 100;
    double sigma_u2 = 1.0;
    double sigma_z2 = 0.1;
    std::uint64_t seed = 1;
    std::string theta;       ///< comma-separated true coefficients (simulate)
    std::string theta_init;  ///< comma-separated initial guess (identify)
    int max_iter = 50;
    double tol = 1e-8;
    std::string schedule = "batch";
    std::string x0 = "auto";  ///< "auto", "diffuse", or a variance
    std::string in_path;
    std::string out_path;
    int instances = 100;
    std::string inject_error;

    // which flags were given explicitly (so sidecar values can fill the rest)
    bool model_set = false, order_set = false, sigma_u_set = false, sigma_z_set = false,
         seed_set = false, x0_set = false;
};

/// Exit codes: 0 success, 1 failure, 2 unidentifiable parameter,
/// 3 parse error. Errors print one line "ERROR <code>: <message>" to stderr.
int cmd_simulate(const RunConfig& config);
int cmd_identify(const RunConfig& config);
int cmd_check_tables(const RunConfig& config);

/// Parses argv and dispatches; honors EMFG_SEED unless --seed is given.
int run_cli(int argc, char** argv);

}  // namespace emfg
