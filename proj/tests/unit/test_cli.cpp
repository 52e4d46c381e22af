#include "fixtures.hpp"

#include "n1plus/cli.hpp"
#include "n1plus/report.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace n1plus;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "n1plus");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("n1plus_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write_grid(const fs::path& dir, const Grid& g) {
    const fs::path p = dir / "grid.json";
    std::ofstream(p) << save_grid(g);
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CsvTable table(const fs::path& p) {
    std::ifstream f(p);
    return read_csv(f);
}

}  // namespace

TEST_CASE("validate") {
    const auto dir = scratch("validate");
    const Run r = run({"--grid", write_grid(dir, fixtures::triangle()), "validate"});
    CHECK(r.code == 0);
    CHECK(r.out.find("3 buses, 3 lines") != std::string::npos);
}

TEST_CASE("missing or bad input") {
    const auto dir = scratch("errors");
    Run r = run({"--grid", (dir / "nope.json").string(), "validate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("grid file not found") != std::string::npos);

    r = run({"validate"});
    CHECK(r.code == 2);

    const std::string grid = write_grid(dir, fixtures::triangle());
    r = run({"--grid", grid, "simulate", "--line", "0", "--tau", "-1"});
    CHECK(r.code == 2);
    r = run({"--grid", grid, "estimate", "--method", "mc", "--n", "0"});
    CHECK(r.code == 2);
    r = run({"--grid", grid, "simulate", "--kind", "four_phase", "--line", "0"});
    CHECK(r.code == 2);
    r = run({"--grid", grid, "--format", "xml", "simulate"});
    CHECK(r.code == 2);
    r = run({"--grid", grid, "simulate", "--bogus"});
    CHECK(r.code == 2);

    std::ofstream(dir / "broken.json") << "{\"format\": ";
    r = run({"--grid", (dir / "broken.json").string(), "validate"});
    CHECK(r.code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("simulate writes trajectory and overload tables") {
    const auto dir = scratch("simulate");
    const Grid g = fixtures::triangle().with_limits(std::vector<double>{1.2, 1.2, 1.2});
    const std::string grid = write_grid(dir, g);
    const Run r = run({"--grid", grid, "--T", "3", "--dt", "0.01", "--out-dir", dir.string(), "simulate",
                       "--line", "0", "--tau", "0.5"});
    REQUIRE(r.code == 0);
    const CsvTable traj = table(dir / "trajectory.csv");
    CHECK(traj.rows.size() == 301);
    CHECK(traj.comments.front().rfind("# n1plus 0.1.0 command=simulate", 0) == 0);
    const CsvTable ov = table(dir / "overload.csv");
    REQUIRE(ov.rows.size() == 4);
    CHECK(ov.rows.back()[0] == "global");
    const Trajectory direct = solve_piecewise(g, {0, FaultKind::three_phase, 0.5, 0.0}, 3.0, 0.01,
                                              SolveMethod::exact());
    CHECK(std::stod(ov.rows.back()[4]) == global_overload(direct, g));

    const Run j = run({"--grid", grid, "--T", "1", "--out-dir", dir.string(), "--format", "json-lines",
                       "simulate", "--line", "1", "--tau", "0.2", "--method", "perturbative", "--m", "20"});
    REQUIRE(j.code == 0);
    std::ifstream f(dir / "trajectory.jsonl");
    std::string first;
    std::getline(f, first);
    CHECK(nlohmann::json::parse(first).contains("n1plus"));
    std::string row;
    std::getline(f, row);
    CHECK(nlohmann::json::parse(row)["t"] == 0.0);
}

TEST_CASE("screen agrees with single simulations") {
    const auto dir = scratch("screen");
    const Grid g = fixtures::ring4();
    const std::string grid = write_grid(dir, g);
    const Run r = run({"--grid", grid, "--T", "4", "--out-dir", dir.string(), "screen", "--tau", "0.6"});
    REQUIRE(r.code == 0);
    const CsvTable s = table(dir / "screen.csv");
    REQUIRE(s.rows.size() == 4);
    CHECK(s.header.size() == 6);
    for (std::size_t f = 0; f < 4; ++f) {
        const auto sim = dir / ("sim" + std::to_string(f));
        REQUIRE(run({"--grid", grid, "--T", "4", "--out-dir", sim.string(), "simulate", "--line",
                     std::to_string(f), "--tau", "0.6"})
                    .code == 0);
        const CsvTable ov = table(sim / "overload.csv");
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(s.rows[f][j + 1] == ov.rows[j][4]);
        }
        CHECK(s.rows[f][5] == ov.rows.back()[4]);
    }
    const CsvTable rank = table(dir / "ranking.csv");
    CHECK(rank.rows.size() == 4);
}

TEST_CASE("estimate is reproducible") {
    const auto dir = scratch("estimate");
    const std::string grid = write_grid(dir, fixtures::stressed3());
    const std::vector<std::string> args{"--grid", grid, "--T", "4", "--seed", "17", "--out-dir",
                                        (dir / "a").string(), "estimate", "--method", "ce",
                                        "--gamma", "1", "--lambda", "1", "--n-per-iter", "300",
                                        "--n-final", "1000"};
    REQUIRE(run(args).code == 0);
    auto again = args;
    again[7] = (dir / "b").string();
    REQUIRE(run(again).code == 0);
    CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
    CHECK(slurp(dir / "a" / "risk.csv") == slurp(dir / "b" / "risk.csv"));
    CHECK(fs::exists(dir / "a" / "timing.json"));

    const CsvTable risk = table(dir / "a" / "risk.csv");
    REQUIRE(risk.rows.size() == 4);
    const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
    CHECK(report.contains("lines"));

    std::ofstream(dir / "cfg.json") << R"({"gamma": 1.0, "lambda_nominal": 1.0, "n_per_iter": 300, "n_final": 1000, "T": 4, "seed": 17})";
    REQUIRE(run({"--grid", grid, "--out-dir", (dir / "c").string(), "estimate", "--config",
                 (dir / "cfg.json").string()})
                .code == 0);
    CHECK(slurp(dir / "a" / "risk.csv") == slurp(dir / "c" / "risk.csv"));

    const Run mc = run({"--grid", grid, "--T", "4", "--out-dir", (dir / "mc").string(), "estimate",
                        "--method", "mc", "--gamma", "1", "--lambda", "1", "--n", "2000"});
    REQUIRE(mc.code == 0);
    const CsvTable e = table(dir / "mc" / "estimate.csv");
    REQUIRE(e.rows.size() == 1);
    CHECK(e.rows[0][5] == "mc");
}

TEST_CASE("bench reports zero error for the exact solver") {
    const auto dir = scratch("bench");
    const std::string grid = write_grid(dir, fixtures::triangle());
    const Run r = run({"--grid", grid, "--T", "2", "--out-dir", dir.string(), "bench", "--m", "1,10",
                       "--reps", "2", "--warmup", "1"});
    REQUIRE(r.code == 0);
    const CsvTable b = table(dir / "bench.csv");
    bool saw = false;
    for (const auto& row : b.rows) {
        if (row[1] == "exact") {
            CHECK(std::stod(row[6]) == 0.0);
            saw = true;
        }
    }
    CHECK(saw);
    const CsvTable e = table(dir / "error_vs_m.csv");
    CHECK(e.rows.size() == 2);
}
