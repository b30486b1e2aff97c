#include "oaccel/bench.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

using namespace oaccel;
using namespace oaccel::bench;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("oaccel_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

Record rec(ProblemId id, std::uint64_t seed, SolverId s, std::optional<std::int64_t> t) {
    Record r;
    r.problem = id;
    r.n = 10;
    r.seed = seed;
    r.solver = s;
    r.fevals = t;
    r.success = t.has_value();
    r.final_f = t ? 1e-12 : 0.25;
    return r;
}

}  // namespace

TEST_CASE("performance ratios", "[bench][profile]") {
    std::size_t dropped = 99;
    auto rho = performance_ratio({{10, 20}}, &dropped);
    CHECK(rho == std::vector<std::vector<double>>{{1.0, 2.0}});
    CHECK(dropped == 0);

    rho = performance_ratio({{10, kInf}});
    CHECK(rho[0][0] == 1.0);
    CHECK(rho[0][1] == kInf);

    rho = performance_ratio({{kInf, kInf}, {3, 6}}, &dropped);
    CHECK(rho.size() == 1);
    CHECK(dropped == 1);
}

TEST_CASE("performance profiles", "[bench][profile]") {
    const std::vector<std::string> names{"a", "b"};
    SECTION("two instances") {
        const auto curves = performance_profile({{1, 2}, {1.5, 1}}, {1.0, 1.5, 2.0}, names);
        REQUIRE(curves.size() == 2);
        CHECK(curves[0].samples[0].second == 0.5);
        CHECK(curves[0].samples[1].second == 1.0);
        CHECK(curves[1].samples[0].second == 0.5);
        CHECK(curves[1].samples[1].second == 0.5);
        CHECK(curves[1].samples[2].second == 1.0);
    }
    SECTION("a solver failing half of the instances plateaus at one half") {
        const auto curves =
            performance_profile({{1, kInf}, {1, 1}, {1, kInf}, {1, 1}}, tau_grid(), names);
        CHECK(curves[1].samples.back().second == 0.5);
        CHECK(curves[0].samples.front().second == 1.0);
    }
    SECTION("single solver") {
        const auto curves = performance_profile({{1}, {1}}, tau_grid(), {"only"});
        for (const auto& [tau, p] : curves[0].samples) CHECK(p == 1.0);
    }
}

TEST_CASE("tau grid", "[bench][profile]") {
    const auto g = tau_grid();
    REQUIRE(g.size() == 400);
    CHECK(g.front() == 1.0);
    CHECK(g.back() == 50.0);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}

TEST_CASE("quantiles", "[bench]") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({5}, 0.1) == 5.0);
    CHECK(quantile({5}, 0.9) == 5.0);
    CHECK(quantile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, 0.1) == Catch::Approx(2.0));
    CHECK(quantile({1, 2, kInf}, 0.9) == kInf);
    CHECK(quantile({1, 2, kInf}, 0.5) == 2.0);
    CHECK_THROWS(quantile({}, 0.5));
    CHECK_THROWS(quantile({1.0}, 1.5));
}

TEST_CASE("records round-trip through CSV", "[bench][io]") {
    std::vector<Record> rs{rec(ProblemId::A, 1, SolverId::oaccel_b, 42),
                           rec(ProblemId::G, 18446744073709551615ULL, SolverId::ncg, std::nullopt),
                           rec(ProblemId::C, 3, SolverId::lbfgs, 7)};
    rs[2].final_f = 0.1 + 0.2;
    rs[1].final_f = std::numeric_limits<double>::quiet_NaN();
    std::stringstream ss;
    write_records_csv(rs, ss);
    CHECK(ss.str().rfind(kRecordsHeader, 0) == 0);
    const auto back = read_records_csv(ss);
    CHECK(back == rs);
}

TEST_CASE("malformed CSV is an I/O error", "[bench][io]") {
    std::stringstream bad("wrong,header\n");
    CHECK_THROWS_AS(read_records_csv(bad), IoError);
    std::stringstream short_row(std::string(kRecordsHeader) + "\nA,10\n");
    CHECK_THROWS_AS(read_records_csv(short_row), IoError);
}

TEST_CASE("summary has one quantile triple per group", "[bench]") {
    std::vector<Record> rs;
    for (std::uint64_t s = 0; s < 10; ++s) {
        rs.push_back(rec(ProblemId::A, s, SolverId::oaccel_b, 10 + static_cast<std::int64_t>(s)));
        rs.push_back(rec(ProblemId::A, s, SolverId::lbfgs,
                         s < 5 ? std::optional<std::int64_t>(20) : std::nullopt));
    }
    const auto j = summary_json(rs);
    REQUIRE(j.size() == 2);
    CHECK(j[0]["solver"] == "oaccel-b");
    CHECK(j[0]["q50"].get<double>() == Catch::Approx(14.5));
    CHECK(j[1]["successes"] == 5);
    CHECK(j[1]["q90"].is_null());
    CHECK(j[1]["q10"].get<double>() == 20.0);
}

TEST_CASE("small experiment end to end", "[bench][experiment]") {
    ExperimentConfig cfg;
    cfg.problems = {ProblemId::A, ProblemId::G};
    cfg.sizes = {8};
    cfg.runs = 3;
    cfg.seed = 5;

    const auto serial = run_experiment(cfg);
    cfg.jobs = 3;
    const auto parallel = run_experiment(cfg);
    REQUIRE(serial.size() == 2 * 3 * all_solvers().size());
    CHECK(serial == parallel);

    // Ordering: problem, n, solver, run.
    CHECK(serial.front().problem == ProblemId::A);
    CHECK(serial[0].solver == serial[2].solver);
    CHECK(serial[0].seed != serial[1].seed);

    // Problem G: f* is estimated from the runs, so some solver reaches it.
    for (std::size_t i = 0; i < serial.size(); ++i) {
        if (serial[i].problem != ProblemId::G) continue;
        bool any = false;
        for (const auto& r : serial)
            if (r.problem == ProblemId::G && r.seed == serial[i].seed) any = any || r.success;
        CHECK(any);
    }

    const auto dir = scratch_dir("emit");
    std::size_t dropped = 0;
    const auto curves = profile_from_records(serial, tau_grid(), &dropped);
    emit_results(serial, curves, dir, config_json(cfg));
    CHECK(std::filesystem::exists(dir / "records.csv"));
    CHECK(std::filesystem::exists(dir / "profile.csv"));
    CHECK(std::filesystem::exists(dir / "summary.json"));

    const auto loaded = load_records(dir);
    CHECK(loaded == serial);
    const auto again = profile_from_records(loaded, tau_grid());
    REQUIRE(again.size() == curves.size());
    for (std::size_t s = 0; s < curves.size(); ++s) {
        CHECK(again[s].solver == curves[s].solver);
        CHECK(again[s].samples == curves[s].samples);
        for (std::size_t k = 1; k < curves[s].samples.size(); ++k)
            CHECK(curves[s].samples[k].second >= curves[s].samples[k - 1].second);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("single-solver profile at tau = 1 is the success rate", "[bench][profile]") {
    std::vector<Record> rs{rec(ProblemId::A, 0, SolverId::lbfgs, 5),
                           rec(ProblemId::A, 1, SolverId::lbfgs, 9),
                           rec(ProblemId::A, 2, SolverId::lbfgs, std::nullopt),
                           rec(ProblemId::A, 3, SolverId::lbfgs, 2)};
    std::size_t dropped = 0;
    const auto curves = profile_from_records(rs, tau_grid(), &dropped);
    CHECK(dropped == 1);
    // Dropped rows leave only successful instances.
    CHECK(curves[0].samples.front().second == 1.0);
}

TEST_CASE("empty solver list yields no records", "[bench][experiment]") {
    ExperimentConfig cfg;
    cfg.problems = {ProblemId::A};
    cfg.sizes = {4};
    cfg.runs = 2;
    cfg.solvers.clear();
    CHECK(run_experiment(cfg).empty());
    const auto curves = profile_from_records({}, tau_grid());
    CHECK(curves.empty());
}

TEST_CASE("experiment configuration is validated", "[bench]") {
    ExperimentConfig cfg;
    cfg.problems = {ProblemId::D};
    cfg.sizes = {7};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.sizes = {8};
    cfg.runs = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.runs = 1;
    cfg.jobs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.jobs = 1;
    cfg.params.ls.c2 = 1e-5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("unwritable output is an I/O error", "[bench][io]") {
    CHECK_THROWS_AS(emit_results({}, {}, "/proc/oaccel_not_allowed/out"), IoError);
    CHECK_THROWS_AS(load_records("/nonexistent/oaccel"), IoError);
}

TEST_CASE("seeds are distinct across runs, sizes and problems", "[bench]") {
    std::set<std::uint64_t> seen;
    for (auto id : {ProblemId::A, ProblemId::B})
        for (Index n : {100, 200})
            for (int r = 0; r < 100; ++r) seen.insert(run_seed(0, id, n, r));
    CHECK(seen.size() == 400);
    CHECK(problem_stream(1) != x0_stream(1));
    CHECK(parse_solver_id("oaccel-a") == SolverId::oaccel_a);
    CHECK_FALSE(parse_solver_id("bfgs").has_value());
}
