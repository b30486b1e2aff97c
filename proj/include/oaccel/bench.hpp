#pragma once

#include "oaccel/accel.hpp"
#include "oaccel/baselines.hpp"
#include "oaccel/core.hpp"
#include "oaccel/precond.hpp"
#include "oaccel/problems.hpp"
#include "oaccel/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace oaccel::bench {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when results cannot be written or read back.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Solvers

enum class SolverId { oaccel_a, oaccel_b, ngmres_a, ngmres_b, lbfgs, ncg };

inline const std::vector<SolverId>& all_solvers() {
    static const std::vector<SolverId> ids{SolverId::oaccel_a, SolverId::oaccel_b,
                                           SolverId::ngmres_a, SolverId::ngmres_b,
                                           SolverId::lbfgs,    SolverId::ncg};
    return ids;
}

inline std::string to_string(SolverId id) {
    switch (id) {
    case SolverId::oaccel_a: return "oaccel-a";
    case SolverId::oaccel_b: return "oaccel-b";
    case SolverId::ngmres_a: return "ngmres-a";
    case SolverId::ngmres_b: return "ngmres-b";
    case SolverId::lbfgs: return "lbfgs";
    case SolverId::ncg: return "ncg";
    }
    return "?";
}

inline std::optional<SolverId> parse_solver_id(const std::string& s) {
    for (auto id : all_solvers())
        if (to_string(id) == s) return id;
    return std::nullopt;
}

/// Parameters shared by every solver of an experiment.
struct SolverParams {
    int w_max = 20;
    double eps0 = 1e-12;
    double delta = 1e-4;
    int lbfgs_m = 5;
    LineSearchConfig ls{};
};

inline std::unique_ptr<Solver> make_solver(SolverId id, const SolverParams& p) {
    auto accel = [&](AccelMode mode, PreconditionerKind kind) {
        AccelConfig cfg;
        cfg.mode = mode;
        cfg.w_max = p.w_max;
        cfg.eps0 = p.eps0;
        cfg.ls = p.ls;
        Preconditioner pc{kind, p.delta, p.ls};
        return std::make_unique<AcceleratedSolver>(pc, cfg);
    };
    switch (id) {
    case SolverId::oaccel_a: return accel(AccelMode::objective, PreconditionerKind::sd_linesearch);
    case SolverId::oaccel_b: return accel(AccelMode::objective, PreconditionerKind::sd_fixed);
    case SolverId::ngmres_a: return accel(AccelMode::gradient_norm, PreconditionerKind::sd_linesearch);
    case SolverId::ngmres_b: return accel(AccelMode::gradient_norm, PreconditionerKind::sd_fixed);
    case SolverId::lbfgs: return std::make_unique<LbfgsSolver>(p.lbfgs_m, p.ls);
    case SolverId::ncg: return std::make_unique<NcgSolver>(p.ls);
    }
    throw ConfigError("unknown solver id");
}

// ---------------------------------------------------------------------------
// Experiment matrix

/// Problem sizes of the desk-scale matrix; `large` adds the 5e4 / 1e5 sizes
/// of Problems D and E.
inline std::vector<Index> default_sizes(ProblemId id, bool large) {
    switch (id) {
    case ProblemId::A:
    case ProblemId::B:
    case ProblemId::C:
    case ProblemId::G: return {100, 200};
    case ProblemId::D:
        return large ? std::vector<Index>{500, 1000, 50000, 100000}
                     : std::vector<Index>{500, 1000};
    case ProblemId::E:
        return large ? std::vector<Index>{100, 200, 50000, 100000}
                     : std::vector<Index>{100, 200};
    case ProblemId::F: return {200, 500};
    }
    return {};
}

struct ExperimentConfig {
    std::vector<ProblemId> problems{ProblemId::A, ProblemId::B, ProblemId::C, ProblemId::D,
                                    ProblemId::E, ProblemId::F, ProblemId::G};
    /// Applied to every problem when non-empty; otherwise default_sizes.
    std::vector<Index> sizes;
    bool large = false;
    std::vector<SolverId> solvers = all_solvers();
    int runs = 100;
    std::uint64_t seed = 0;
    SolverParams params{};
    Criterion criterion = Criterion::objective_decrease;
    double tol = 1e-10;
    std::int64_t max_iters = 1500;
    /// Gradient tolerance of the probing runs used to estimate f* when it is
    /// not known (Problem G).
    double fstar_probe_tol = 1e-13;
    int jobs = 1;

    void validate() const {
        if (runs < 0) throw ConfigError("runs must be nonnegative");
        if (max_iters <= 0) throw ConfigError("max-iters must be positive");
        if (!(tol > 0.0)) throw ConfigError("tol must be positive");
        if (jobs < 1) throw ConfigError("jobs must be at least 1");
        if (params.w_max < 1) throw ConfigError("wmax must be at least 1");
        if (!(params.eps0 >= 0.0)) throw ConfigError("eps0 must be nonnegative");
        if (!(params.delta > 0.0)) throw ConfigError("delta must be positive");
        params.ls.validate();
        for (auto id : problems)
            for (Index n : sizes_for(id)) validate_spec({id, n, 0});
    }

    std::vector<Index> sizes_for(ProblemId id) const {
        return sizes.empty() ? default_sizes(id, large) : sizes;
    }

  private:
    static void validate_spec(const ProblemSpec& s) { oaccel::validate(s); }
};

/// One (problem, n, seed, solver) trial.
struct Record {
    ProblemId problem = ProblemId::A;
    Index n = 0;
    std::uint64_t seed = 0;
    SolverId solver = SolverId::oaccel_b;
    /// fg_evals to reach tolerance; empty on failure.
    std::optional<std::int64_t> fevals;
    bool success = false;
    double final_f = std::numeric_limits<double>::quiet_NaN();

    double t() const { return fevals ? static_cast<double>(*fevals) : kInf; }
    bool operator==(const Record& o) const {
        auto same = [](double a, double b) {
            return a == b || (std::isnan(a) && std::isnan(b));
        };
        return problem == o.problem && n == o.n && seed == o.seed &&
               solver == o.solver && fevals == o.fevals && success == o.success &&
               same(final_f, o.final_f);
    }
};

/// Seed of run r for (problem, n). Problem randomness and the initial guess
/// are drawn from separate streams derived from it.
inline std::uint64_t run_seed(std::uint64_t master, ProblemId id, Index n, int r) {
    return derive_seed(master, {static_cast<std::uint64_t>(to_char(id)),
                                static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(r)});
}
inline std::uint64_t problem_stream(std::uint64_t run) { return derive_seed(run, {1}); }
inline std::uint64_t x0_stream(std::uint64_t run) { return derive_seed(run, {2}); }

namespace detail {

/// First trace checkpoint with f - f* < tol (f0 - f*).
inline std::optional<std::int64_t> evals_to_objective_tol(const RunRecord& rec,
                                                          double f_star, double tol) {
    if (rec.trace.empty()) return std::nullopt;
    const double f0 = rec.trace.front().f;
    for (const auto& tp : rec.trace)
        if (check_tolerance_objective(tp.f, f0, f_star, tol)) return tp.fg_evals;
    return std::nullopt;
}

/// Runs every configured solver on one problem instance.
inline std::vector<Record> run_instance(const ExperimentConfig& cfg, ProblemId id,
                                        Index n, int r) {
    const std::uint64_t seed = run_seed(cfg.seed, id, n, r);
    const ProblemSpec spec{id, n, problem_stream(seed)};
    Rng x0_rng(x0_stream(seed));
    const Vector x0 = initial_guess(n, x0_rng);

    const Objective proto = make_problem(spec);
    const bool probe = cfg.criterion == Criterion::objective_decrease &&
                       !proto.known_fstar().has_value();

    Termination term;
    if (cfg.criterion == Criterion::gradient_decrease)
        term = Termination::gradient(cfg.tol, cfg.max_iters);
    else if (probe)
        term = Termination::gradient(cfg.fstar_probe_tol, cfg.max_iters);
    else
        term = Termination::objective(*proto.known_fstar(), cfg.tol, cfg.max_iters);

    std::vector<Record> out;
    std::vector<RunRecord> raw;
    for (SolverId sid : cfg.solvers) {
        Objective obj = proto;
        obj.reset_counters();
        auto solver = make_solver(sid, cfg.params);
        RunRecord rec = minimize(obj, *solver, x0, term);
        Record rr;
        rr.problem = id;
        rr.n = n;
        rr.seed = seed;
        rr.solver = sid;
        rr.final_f = rec.f;
        if (!probe) {
            rr.success = rec.success;
            rr.fevals = rec.evals_to_tolerance;
        }
        out.push_back(rr);
        raw.push_back(std::move(rec));
    }

    if (probe) {
        // Second pass: f* is the lowest value any solver attained.
        double f_star = kInf;
        for (const auto& rec : raw)
            for (const auto& tp : rec.trace)
                if (std::isfinite(tp.f)) f_star = std::min(f_star, tp.f);
        for (std::size_t s = 0; s < out.size(); ++s) {
            out[s].fevals = std::isfinite(f_star)
                                ? evals_to_objective_tol(raw[s], f_star, cfg.tol)
                                : std::nullopt;
            out[s].success = out[s].fevals.has_value();
        }
    }
    return out;
}

}  // namespace detail

/// Executes the full problem x size x run x solver matrix. Records are ordered
/// by (problem, n, solver, run) independent of `jobs`.
inline std::vector<Record> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    struct Task {
        ProblemId id;
        Index n;
        int r;
    };
    std::vector<Task> tasks;
    for (auto id : cfg.problems)
        for (Index n : cfg.sizes_for(id))
            for (int r = 0; r < cfg.runs; ++r) tasks.push_back({id, n, r});
    if (cfg.solvers.empty() || tasks.empty()) return {};

    std::vector<std::vector<Record>> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& t = tasks[i];
            results[i] = detail::run_instance(cfg, t.id, t.n, t.r);
        }
    };
    const int nthreads = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
    }

    // Regroup: tasks are generated run-major within (problem, n).
    std::vector<Record> out;
    out.reserve(tasks.size() * cfg.solvers.size());
    std::size_t i = 0;
    while (i < tasks.size()) {
        std::size_t j = i;
        while (j < tasks.size() && tasks[j].id == tasks[i].id && tasks[j].n == tasks[i].n) ++j;
        for (std::size_t s = 0; s < cfg.solvers.size(); ++s)
            for (std::size_t k = i; k < j; ++k) out.push_back(results[k][s]);
        i = j;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Performance profiles

/// t matrix: one row per problem instance, one column per solver.
struct CostTable {
    std::vector<std::string> solvers;
    std::vector<std::string> instances;
    std::vector<std::vector<double>> t;
};

inline CostTable cost_table(const std::vector<Record>& records) {
    CostTable tab;
    std::map<std::string, std::size_t> col;
    std::map<std::tuple<int, Index, std::uint64_t>, std::size_t> row;
    for (const auto& r : records) {
        const auto name = to_string(r.solver);
        if (!col.count(name)) {
            col[name] = tab.solvers.size();
            tab.solvers.push_back(name);
        }
    }
    for (const auto& r : records) {
        auto key = std::make_tuple(static_cast<int>(r.problem), r.n, r.seed);
        auto it = row.find(key);
        if (it == row.end()) {
            it = row.emplace(key, tab.t.size()).first;
            tab.t.emplace_back(tab.solvers.size(), kInf);
            tab.instances.push_back(std::string(1, to_char(r.problem)) + "/" +
                                    std::to_string(r.n) + "/" + std::to_string(r.seed));
        }
        tab.t[it->second][col[to_string(r.solver)]] = r.t();
    }
    return tab;
}

/// rho_{p,s} = t_{p,s} / min_s t_{p,s}; failures map to infinity. Rows
/// without any finite entry are dropped and counted in `dropped`.
inline std::vector<std::vector<double>> performance_ratio(
    const std::vector<std::vector<double>>& t, std::size_t* dropped = nullptr) {
    std::vector<std::vector<double>> rho;
    std::size_t nd = 0;
    for (const auto& row : t) {
        double best = kInf;
        for (double v : row)
            if (std::isfinite(v)) best = std::min(best, v);
        if (!std::isfinite(best)) {
            ++nd;
            continue;
        }
        std::vector<double> r(row.size());
        for (std::size_t s = 0; s < row.size(); ++s)
            r[s] = std::isfinite(row[s]) ? row[s] / best : kInf;
        rho.push_back(std::move(r));
    }
    if (dropped) *dropped = nd;
    return rho;
}

struct ProfileCurve {
    std::string solver;
    std::vector<std::pair<double, double>> samples;  ///< (tau, p_s(tau))
};

/// Geometrically spaced tau values over [1, tau_max].
inline std::vector<double> tau_grid(double tau_max = 50.0, int points = 400) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        g[i] = points == 1 ? 1.0 : std::pow(tau_max, static_cast<double>(i) / (points - 1));
    g.back() = tau_max;
    return g;
}

/// p_s(tau) = #{p : rho_{p,s} <= tau} / n_p.
inline std::vector<ProfileCurve> performance_profile(
    const std::vector<std::vector<double>>& rho, const std::vector<double>& taus,
    const std::vector<std::string>& solvers) {
    std::vector<ProfileCurve> curves;
    const double np = static_cast<double>(rho.size());
    for (std::size_t s = 0; s < solvers.size(); ++s) {
        std::vector<double> col;
        col.reserve(rho.size());
        for (const auto& row : rho) col.push_back(row[s]);
        std::sort(col.begin(), col.end());
        ProfileCurve c{solvers[s], {}};
        for (double tau : taus) {
            const auto count = std::upper_bound(col.begin(), col.end(), tau) - col.begin();
            c.samples.emplace_back(tau, np > 0 ? static_cast<double>(count) / np : 0.0);
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

inline std::vector<ProfileCurve> profile_from_records(const std::vector<Record>& records,
                                                      const std::vector<double>& taus,
                                                      std::size_t* dropped = nullptr) {
    const auto tab = cost_table(records);
    return performance_profile(performance_ratio(tab.t, dropped), taus, tab.solvers);
}

/// Quantile by linear interpolation between order statistics: with sorted
/// v_1..v_m and h = (m-1) q + 1, interpolate between v_floor(h) and v_ceil(h).
/// Infinite entries (failed runs) sort last.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = static_cast<std::size_t>(std::ceil(h));
    const double frac = h - static_cast<double>(lo);
    if (lo == hi || frac == 0.0) return values[lo];
    if (!std::isfinite(values[hi])) return values[hi];
    return values[lo] + frac * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw IoError("malformed number '" + s + "'");
    return v;
}

inline const char* kRecordsHeader = "problem,n,seed,solver,fevals,success,final_f";

inline void write_records_csv(const std::vector<Record>& records, std::ostream& os) {
    os << kRecordsHeader << '\n';
    for (const auto& r : records) {
        os << to_char(r.problem) << ',' << r.n << ',' << r.seed << ','
           << to_string(r.solver) << ',' << (r.fevals ? std::to_string(*r.fevals) : "inf")
           << ',' << (r.success ? 1 : 0) << ',' << format_double(r.final_f) << '\n';
    }
}

inline std::vector<Record> read_records_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kRecordsHeader)
        throw IoError("records file has an unexpected header");
    std::vector<Record> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 7) throw IoError("records row has " + std::to_string(f.size()) + " fields");
        Record r;
        auto pid = parse_problem_id(f[0]);
        auto sid = parse_solver_id(f[3]);
        if (!pid || !sid) throw IoError("unknown problem or solver in '" + line + "'");
        r.problem = *pid;
        r.solver = *sid;
        try {
            r.n = static_cast<Index>(std::stoll(f[1]));
            r.seed = std::stoull(f[2]);
            if (f[4] != "inf") r.fevals = std::stoll(f[4]);
        } catch (const std::exception&) {
            throw IoError("malformed integer in '" + line + "'");
        }
        r.success = f[5] == "1";
        r.final_f = parse_double(f[6]);
        out.push_back(r);
    }
    return out;
}

inline void write_profile_csv(const std::vector<ProfileCurve>& curves, std::ostream& os) {
    os << "solver,tau,p\n";
    for (const auto& c : curves)
        for (const auto& [tau, p] : c.samples)
            os << c.solver << ',' << format_double(tau) << ',' << format_double(p) << '\n';
}

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    std::vector<std::string> probs, solvers;
    for (auto p : cfg.problems) probs.emplace_back(1, to_char(p));
    for (auto s : cfg.solvers) solvers.push_back(to_string(s));
    j["problems"] = probs;
    j["sizes"] = cfg.sizes;
    j["large"] = cfg.large;
    j["solvers"] = solvers;
    j["runs"] = cfg.runs;
    j["seed"] = cfg.seed;
    j["wmax"] = cfg.params.w_max;
    j["eps0"] = cfg.params.eps0;
    j["delta"] = cfg.params.delta;
    j["c1"] = cfg.params.ls.c1;
    j["c2"] = cfg.params.ls.c2;
    j["max_iters"] = cfg.max_iters;
    j["tol"] = cfg.tol;
    j["criterion"] = cfg.criterion == Criterion::objective_decrease ? "objective" : "gradient";
    return j;
}

/// Quantile triples of fevals per (problem, n, solver); failed runs count
/// as infinite and are reported as null when they reach a quantile.
inline nlohmann::json summary_json(const std::vector<Record>& records) {
    std::map<std::tuple<int, Index, std::string>, std::vector<double>> groups;
    std::vector<std::tuple<int, Index, std::string>> order;
    for (const auto& r : records) {
        auto key = std::make_tuple(static_cast<int>(r.problem), r.n, to_string(r.solver));
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(r.t());
    }
    auto num = [](double v) -> nlohmann::json {
        return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& key : order) {
        const auto& v = groups[key];
        const auto ok = std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        rows.push_back({{"problem", std::string(1, static_cast<char>('A' + std::get<0>(key)))},
                        {"n", std::get<1>(key)},
                        {"solver", std::get<2>(key)},
                        {"runs", v.size()},
                        {"successes", ok},
                        {"q10", num(quantile(v, 0.1))},
                        {"q50", num(quantile(v, 0.5))},
                        {"q90", num(quantile(v, 0.9))}});
    }
    return rows;
}

inline std::ofstream open_for_write(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw IoError("cannot write " + p.string());
    return os;
}

/// Writes records.csv, profile.csv and summary.json into `dir`.
inline void emit_results(const std::vector<Record>& records,
                         const std::vector<ProfileCurve>& curves,
                         const std::filesystem::path& dir,
                         const nlohmann::json& config = nlohmann::json::object()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    {
        auto os = open_for_write(dir / "records.csv");
        write_records_csv(records, os);
        if (!os) throw IoError("failed writing records.csv");
    }
    {
        auto os = open_for_write(dir / "profile.csv");
        write_profile_csv(curves, os);
        if (!os) throw IoError("failed writing profile.csv");
    }
    {
        nlohmann::json j;
        j["config"] = config;
        j["quantiles"] = summary_json(records);
        auto os = open_for_write(dir / "summary.json");
        os << j.dump(2) << '\n';
        if (!os) throw IoError("failed writing summary.json");
    }
}

inline std::vector<Record> load_records(const std::filesystem::path& dir) {
    std::ifstream is(dir / "records.csv");
    if (!is) throw IoError("cannot read " + (dir / "records.csv").string());
    return read_records_csv(is);
}

}  // namespace oaccel::bench
