#include "emfg/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace emfg {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_dataset_csv(const std::string& path, const Vec& y) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "k,y\n";
    for (Index k = 0; k < y.size(); ++k)
        out << (k + 1) << "," << format_double(y[k]) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

Vec read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": line 1: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "k,y") throw ParseError(path + ": line 1: expected header \"k,y\"");

    std::vector<double> values;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path + ": line " + std::to_string(lineno) + ": missing comma");
        std::size_t pos = 0;
        long k = 0;
        double v = 0.0;
        try {
            k = std::stol(line.substr(0, comma), &pos);
            if (pos != comma) throw std::invalid_argument("trailing");
            v = std::stod(line.substr(comma + 1), &pos);
            if (pos != line.size() - comma - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(path + ": line " + std::to_string(lineno) + ": malformed row");
        }
        if (k != static_cast<long>(values.size()) + 1)
            throw ParseError(path + ": line " + std::to_string(lineno) +
                             ": index out of order (expected " +
                             std::to_string(values.size() + 1) + ")");
        if (!std::isfinite(v))
            throw ParseError(path + ": line " + std::to_string(lineno) + ": non-finite value");
        values.push_back(v);
    }
    if (values.empty()) throw ParseError(path + ": no data rows");
    return Eigen::Map<const Vec>(values.data(), static_cast<Index>(values.size()));
}

std::string sidecar_path(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    p.replace_extension(".json");
    return p.string();
}

void write_dataset_meta(const std::string& path, const DatasetMeta& meta) {
    json j;
    j["schema"] = meta.schema;
    j["model"] = to_string(meta.kind);
    j["n"] = meta.n;
    j["N"] = meta.N;
    j["sigma_u2"] = meta.sigma_u2;
    j["sigma_z2"] = meta.sigma_z2;
    j["x0_variance"] = meta.x0_variance;
    j["theta_true"] = std::vector<double>(meta.theta_true.data(),
                                          meta.theta_true.data() + meta.theta_true.size());
    j["seed"] = meta.seed;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

std::optional<DatasetMeta> read_dataset_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    json j;
    try {
        in >> j;
        DatasetMeta meta;
        meta.schema = j.at("schema").get<int>();
        if (meta.schema != 1) throw ParseError(path + ": unsupported schema");
        const std::string kind = j.at("model").get<std::string>();
        if (kind == "fir")
            meta.kind = ModelKind::FIR;
        else if (kind == "ar")
            meta.kind = ModelKind::AR;
        else
            throw ParseError(path + ": unknown model kind " + kind);
        meta.n = j.at("n").get<Index>();
        meta.N = j.at("N").get<Index>();
        meta.sigma_u2 = j.at("sigma_u2").get<double>();
        meta.sigma_z2 = j.at("sigma_z2").get<double>();
        meta.x0_variance = j.value("x0_variance", -1.0);
        const auto tt = j.at("theta_true").get<std::vector<double>>();
        meta.theta_true = Eigen::Map<const Vec>(tt.data(), static_cast<Index>(tt.size()));
        meta.seed = j.at("seed").get<std::uint64_t>();
        return meta;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_report_json(const std::string& path, const LinearModel& model, const EmReport& report,
                       double wall_ms) {
    json j;
    j["schema"] = 1;
    j["model"] = to_string(model.kind);
    j["n"] = model.n;
    j["N"] = model.N;
    j["sigma_u2"] = model.sigma_u2;
    j["sigma_z2"] = model.sigma_z2;
    json iters = json::array();
    for (const Vec& th : report.iterates)
        iters.push_back(std::vector<double>(th.data(), th.data() + th.size()));
    j["iterates"] = std::move(iters);
    j["log_liks"] = report.log_liks;
    j["converged"] = report.converged;
    j["iterations_used"] = report.iterations_used;
    j["warnings"] = report.warnings;
    j["wall_ms"] = wall_ms;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace emfg
