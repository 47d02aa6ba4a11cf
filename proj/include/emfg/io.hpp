#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "emfg/em.hpp"
#include "emfg/state_space.hpp"

namespace emfg {

/// Sidecar metadata written next to a simulated dataset and read back by
/// identification. x0_variance encodes the prior: negative = model default,
/// 0 = uninformative (zero weight), positive = isotropic with that variance.
struct DatasetMeta {
    int schema = 1;
    ModelKind kind = ModelKind::FIR;
    Index n = 0;
    Index N = 0;
    double sigma_u2 = 0.0;
    double sigma_z2 = 0.0;
    double x0_variance = -1.0;
    Vec theta_true;
    std::uint64_t seed = 0;
};

/// CSV with header "k,y", k counting from 1; numbers with 17 significant
/// digits so values round-trip exactly.
void write_dataset_csv(const std::string& path, const Vec& y);
Vec read_dataset_csv(const std::string& path);

std::string sidecar_path(const std::string& csv_path);
void write_dataset_meta(const std::string& path, const DatasetMeta& meta);
std::optional<DatasetMeta> read_dataset_meta(const std::string& path);

/// Identification report as JSON (schema 1).
void write_report_json(const std::string& path, const LinearModel& model, const EmReport& report,
                       double wall_ms);

/// 17-significant-digit decimal rendering.
std::string format_double(double v);

}  // namespace emfg
