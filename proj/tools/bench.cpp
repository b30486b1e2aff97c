// Benchmark driver: runs the solver x problem x seed matrix and computes
// performance profiles from stored records.

#include "oaccel/bench.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace oaccel;
using namespace oaccel::bench;

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int run(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::cerr << "running " << cfg.runs << " runs per (problem, size) with "
              << cfg.solvers.size() << " solvers\n";
    const auto records = run_experiment(cfg);
    std::size_t dropped = 0;
    const auto curves = profile_from_records(records, tau_grid(), &dropped);
    if (dropped > 0)
        std::cerr << "warning: " << dropped
                  << " problem instances were solved by no solver and are excluded from the profile\n";
    emit_results(records, curves, out_dir, config_json(cfg));

    const auto ok = std::count_if(records.begin(), records.end(),
                                  [](const Record& r) { return r.success; });
    std::cerr << records.size() << " records (" << ok << " successful) written to "
              << out_dir << "\n";
    return 0;
}

int profile(const std::string& in_dir, const std::string& out_file) {
    const auto records = load_records(in_dir);
    std::size_t dropped = 0;
    const auto curves = profile_from_records(records, tau_grid(), &dropped);
    if (dropped > 0)
        std::cerr << "warning: " << dropped << " problem instances dropped (no solver succeeded)\n";
    auto os = open_for_write(out_file);
    write_profile_csv(curves, os);
    if (!os) throw IoError("failed writing " + out_file);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"O-ACCEL / N-GMRES benchmark harness"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string problems = "A,B,C,D,E,F,G";
    std::string solvers = "oaccel-a,oaccel-b,ngmres-a,ngmres-b,lbfgs,ncg";
    std::string sizes;
    std::string criterion = "objective";
    std::string out_dir = "results";

    auto* run_cmd = app.add_subcommand("run", "Run the experiment matrix");
    run_cmd->add_option("--problems", problems, "Comma-separated problem ids (A-G)");
    run_cmd->add_option("--sizes", sizes, "Comma-separated sizes applied to every problem");
    run_cmd->add_option("--solvers", solvers, "Comma-separated solver ids");
    run_cmd->add_option("--runs", cfg.runs, "Random starts per (problem, size)");
    run_cmd->add_option("--seed", cfg.seed, "Master seed");
    run_cmd->add_option("--wmax", cfg.params.w_max, "Acceleration history size");
    run_cmd->add_option("--eps0", cfg.params.eps0, "Regularization scale");
    run_cmd->add_option("--delta", cfg.params.delta, "Fixed steepest-descent step cap");
    run_cmd->add_option("--c1", cfg.params.ls.c1, "Sufficient decrease parameter");
    run_cmd->add_option("--c2", cfg.params.ls.c2, "Curvature parameter");
    run_cmd->add_option("--max-iters", cfg.max_iters, "Iteration budget per run");
    run_cmd->add_option("--tol", cfg.tol, "Relative tolerance");
    run_cmd->add_option("--criterion", criterion, "objective or gradient")
        ->check(CLI::IsMember({"objective", "gradient"}));
    run_cmd->add_option("--jobs", cfg.jobs, "Worker threads");
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    run_cmd->add_flag("--large", cfg.large, "Include n = 50000 and 100000 for D and E");

    std::string in_dir, out_file;
    auto* prof_cmd = app.add_subcommand("profile", "Performance profile from stored records");
    prof_cmd->add_option("--in", in_dir, "Directory containing records.csv")->required();
    prof_cmd->add_option("--out", out_file, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            cfg.problems.clear();
            for (const auto& p : split(problems)) {
                auto id = parse_problem_id(p);
                if (!id) throw ConfigError("unknown problem '" + p + "'");
                cfg.problems.push_back(*id);
            }
            cfg.solvers.clear();
            for (const auto& s : split(solvers)) {
                auto id = parse_solver_id(s);
                if (!id) throw ConfigError("unknown solver '" + s + "'");
                cfg.solvers.push_back(*id);
            }
            for (const auto& s : split(sizes)) {
                try {
                    cfg.sizes.push_back(static_cast<Index>(std::stoll(s)));
                } catch (const std::exception&) {
                    throw ConfigError("invalid size '" + s + "'");
                }
            }
            cfg.criterion = criterion == "gradient" ? Criterion::gradient_decrease
                                                    : Criterion::objective_decrease;
            cfg.validate();
            return run(cfg, out_dir);
        }
        return profile(in_dir, out_file);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    }
}
