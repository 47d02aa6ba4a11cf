#include <doctest.h>

#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emfg/check_tables.hpp"
#include "emfg/cli.hpp"
#include "emfg/io.hpp"

using namespace emfg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("emfg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const char* name) const { return (path / name).string(); }
};

RunConfig sim_config(const TempDir& dir, const char* out = "data.csv") {
    RunConfig cfg;
    cfg.model = "fir";
    cfg.order = 2;
    cfg.length = 10;
    cfg.sigma_u2 = 1.0;
    cfg.sigma_z2 = 0.1;
    cfg.seed = 7;
    cfg.theta = "0.6,-0.3";
    cfg.out_path = dir.file(out);
    return cfg;
}

}  // namespace

TEST_CASE("simulate writes byte-identical files for the same seed") {
    TempDir dir;
    CHECK(cmd_simulate(sim_config(dir, "a.csv")) == 0);
    CHECK(cmd_simulate(sim_config(dir, "b.csv")) == 0);
    CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
    CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));
    CHECK(!slurp(dir.file("a.csv")).empty());
}

TEST_CASE("simulate rejects an empty dataset request") {
    TempDir dir;
    RunConfig cfg = sim_config(dir);
    cfg.length = 0;
    CHECK(cmd_simulate(cfg) == 1);  // InvalidConfig
}

TEST_CASE("simulate then identify round-trips through the sidecar") {
    TempDir dir;
    RunConfig sim = sim_config(dir);
    sim.length = 300;
    REQUIRE(cmd_simulate(sim) == 0);

    RunConfig idf;
    idf.in_path = dir.file("data.csv");
    idf.out_path = dir.file("report.json");
    idf.max_iter = 40;
    idf.tol = 1e-8;
    CHECK(cmd_identify(idf) == 0);

    const auto j = nlohmann::json::parse(slurp(dir.file("report.json")));
    CHECK(j.at("schema") == 1);
    CHECK(j.at("model") == "fir");
    CHECK(j.at("n") == 2);
    CHECK(j.at("warnings").empty());
    const auto lls = j.at("log_liks").get<std::vector<double>>();
    for (std::size_t i = 1; i < lls.size(); ++i) CHECK(lls[i] >= lls[i - 1] - 1e-9);
    // the FIR coefficient vector is identifiable only up to sign
    const auto ft = j.at("iterates").back().get<std::vector<double>>();
    const double plus = std::hypot(ft[0] - 0.6, ft[1] + 0.3);
    const double minus = std::hypot(ft[0] + 0.6, ft[1] - 0.3);
    CHECK(std::min(plus, minus) < 0.25);
}

TEST_CASE("identify flags a malformed CSV row with its line number") {
    TempDir dir;
    {
        std::ofstream out(dir.file("bad.csv"));
        out << "k,y\n1,0.5\n2,oops\n";
    }
    RunConfig idf;
    idf.in_path = dir.file("bad.csv");
    idf.out_path = dir.file("report.json");
    CHECK(cmd_identify(idf) == 3);
    CHECK_THROWS_WITH_AS(read_dataset_csv(dir.file("bad.csv")),
                         doctest::Contains("line 3"), ParseError);
}

TEST_CASE("identify honors --max-iter 1") {
    TempDir dir;
    REQUIRE(cmd_simulate(sim_config(dir)) == 0);
    RunConfig idf;
    idf.in_path = dir.file("data.csv");
    idf.out_path = dir.file("report.json");
    idf.max_iter = 1;
    REQUIRE(cmd_identify(idf) == 0);
    const auto j = nlohmann::json::parse(slurp(dir.file("report.json")));
    CHECK(j.at("iterates").size() == 2);  // init plus one update
}

TEST_CASE("run_cli parses simulate flags end to end") {
    TempDir dir;
    const std::string out = dir.file("cli.csv");
    const char* argv[] = {"emfg",   "simulate", "--model", "ar",          "--order", "2",
                          "--length", "20",     "--theta", "0.5,-0.2",    "--seed",  "9",
                          "--out",  out.c_str()};
    CHECK(run_cli(static_cast<int>(std::size(argv)), const_cast<char**>(argv)) == 0);
    const Vec y = read_dataset_csv(out);
    CHECK(y.size() == 20);
    const auto meta = read_dataset_meta(sidecar_path(out));
    REQUIRE(meta.has_value());
    CHECK(meta->kind == ModelKind::AR);
    CHECK(meta->seed == 9);
}

TEST_CASE("dataset CSV uses 17 significant digits and round-trips") {
    TempDir dir;
    Vec y(3);
    y << 0.1, -1.0 / 3.0, 123456.789012345678;
    write_dataset_csv(dir.file("rt.csv"), y);
    const Vec back = read_dataset_csv(dir.file("rt.csv"));
    CHECK((back - y).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("check-tables self-test catches an injected sign flip") {
    CheckOptions opts;
    opts.instances = 2;
    opts.skip_quadrature = true;
    opts.inject_error_case = "marginals/inner_product_vs_conditioning";
    const CheckSummary summary = run_check_tables(opts);
    CHECK(!summary.all_pass);
    bool named = false;
    for (const auto& c : summary.cases)
        if (!c.pass) {
            CHECK(c.name == opts.inject_error_case);
            CHECK(!c.worst_instance.empty());
            named = true;
        }
    CHECK(named);
    const std::string text = format_summary(summary);
    CHECK(text.find("FAIL") != std::string::npos);
    CHECK(text.find(opts.inject_error_case) != std::string::npos);
}

TEST_CASE("check-tables summary text is deterministic for a fixed seed") {
    CheckOptions opts;
    opts.instances = 2;
    opts.skip_quadrature = true;
    opts.seed = 5;
    const std::string a = format_summary(run_check_tables(opts));
    const std::string b = format_summary(run_check_tables(opts));
    CHECK(a == b);
    CHECK(a.find("all checks passed") != std::string::npos);
}
