#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oaccel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Thrown for inconsistent solver, problem or termination settings.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A point together with the objective value and gradient evaluated there.
struct Point {
    Vector x;
    double f = std::numeric_limits<double>::quiet_NaN();
    Vector g;

    bool finite() const { return std::isfinite(f) && g.allFinite(); }
};

/// Combined evaluation accounting. One fg_eval is one call that produces
/// both f(x) and g(x).
struct EvalCounter {
    std::int64_t fg_evals = 0;
    std::int64_t hv_evals = 0;
    std::int64_t iterations = 0;
};

/// Differentiable objective f : R^n -> R.
///
/// Value and gradient are always produced together and every such call is
/// counted. An optional Hessian-vector product may be attached; it is
/// counted separately and never contributes to fg_evals.
class Objective {
  public:
    /// Writes g(x) into the second argument and returns f(x).
    using ValueGradient = std::function<double(const Vector&, Vector&)>;
    /// Writes H(x) v into the third argument.
    using HessianAction =
        std::function<void(const Vector&, const Vector&, Vector&)>;

    Objective(Index dim, ValueGradient fg,
              std::optional<double> known_fstar = std::nullopt,
              HessianAction hv = {})
        : dim_(dim), fg_(std::move(fg)), hv_(std::move(hv)),
          fstar_(known_fstar) {
        if (dim_ <= 0) throw ConfigError("objective dimension must be positive");
        if (!fg_) throw ConfigError("objective requires a value/gradient function");
    }

    Index dim() const { return dim_; }
    std::optional<double> known_fstar() const { return fstar_; }
    bool has_hessian_action() const { return static_cast<bool>(hv_); }

    double evaluate(const Vector& x, Vector& g) {
        g.resize(dim_);
        ++counter_.fg_evals;
        return fg_(x, g);
    }

    Point evaluate(Vector x) {
        Point p;
        p.f = evaluate(x, p.g);
        p.x = std::move(x);
        return p;
    }

    void hessian_action(const Vector& x, const Vector& v, Vector& out) {
        if (!hv_) throw ConfigError("objective has no Hessian action");
        out.resize(dim_);
        ++counter_.hv_evals;
        hv_(x, v, out);
    }

    const EvalCounter& counter() const { return counter_; }
    void reset_counters() { counter_ = {}; }

    // Direct access for callers that must not disturb the counters
    // (finite-difference checks, post-processing).
    const ValueGradient& raw_value_gradient() const { return fg_; }
    const HessianAction& raw_hessian_action() const { return hv_; }

  private:
    Index dim_;
    ValueGradient fg_;
    HessianAction hv_;
    std::optional<double> fstar_;
    EvalCounter counter_;
};

/// Attaches a central-difference Hessian action built from the gradient.
/// Intended for tests on objectives without an analytic Hessian.
inline Objective with_fd_hessian(const Objective& obj, double h = 1e-6) {
    auto fg = obj.raw_value_gradient();
    Objective::HessianAction hv = [fg, h](const Vector& x, const Vector& v,
                                          Vector& out) {
        const double nv = v.norm();
        if (nv == 0.0) {
            out.setZero(x.size());
            return;
        }
        const double step = h * (1.0 + x.norm()) / nv;
        Vector gp(x.size()), gm(x.size());
        fg(x + step * v, gp);
        fg(x - step * v, gm);
        out = (gp - gm) / (2.0 * step);
    };
    return Objective(obj.dim(), fg, obj.known_fstar(), std::move(hv));
}

// ---------------------------------------------------------------------------
// Termination

enum class Criterion { objective_decrease, gradient_decrease };

/// f_k - f* < rel (f_0 - f*). Strict.
inline bool check_tolerance_objective(double f_k, double f_0, double f_star,
                                      double rel) {
    if (!std::isfinite(f_k) || !std::isfinite(f_0) || !std::isfinite(f_star) ||
        !std::isfinite(rel))
        return false;
    if (f_0 < f_star) return true;  // degenerate start below the optimum
    if (f_k <= f_star) return true;
    return f_k - f_star < rel * (f_0 - f_star);
}

/// ||g_k||_inf <= rel ||g_0||_inf. Non-strict.
inline bool check_tolerance_gradient(double gk_norm, double g0_norm,
                                     double rel) {
    if (!std::isfinite(gk_norm) || !std::isfinite(g0_norm) ||
        !std::isfinite(rel))
        return false;
    return gk_norm <= rel * g0_norm;
}

struct Termination {
    Criterion mode = Criterion::objective_decrease;
    double rel_tol = 1e-10;
    std::int64_t max_iters = 1500;
    std::optional<double> f_star;
    /// Taken from the gradient at x0 when left unset.
    std::optional<double> g0_norm;

    static Termination objective(double f_star, double rel = 1e-10,
                                 std::int64_t max_iters = 1500) {
        return {Criterion::objective_decrease, rel, max_iters, f_star, {}};
    }
    static Termination gradient(double rel = 1e-8,
                                std::int64_t max_iters = 2000) {
        return {Criterion::gradient_decrease, rel, max_iters, {}, {}};
    }
};

/// One tolerance checkpoint: cumulative fg_evals and f at that moment.
struct TracePoint {
    std::int64_t fg_evals;
    double f;
};

struct RunRecord {
    Vector x;
    double f = std::numeric_limits<double>::quiet_NaN();
    std::int64_t fg_evals = 0;
    std::int64_t iterations = 0;
    bool success = false;
    /// fg_evals at the first checkpoint meeting the tolerance.
    std::optional<std::int64_t> evals_to_tolerance;
    std::vector<TracePoint> trace;
    std::string message;
};

/// Receives every tolerance checkpoint a solver produces and reports whether
/// the configured criterion has been met.
class Monitor {
  public:
    Monitor(const Objective& obj, const Termination& term, const Point& start)
        : obj_(obj), term_(term), f0_(start.f),
          g0_(term.g0_norm.value_or(start.g.lpNorm<Eigen::Infinity>())) {
        if (term_.mode == Criterion::objective_decrease && !term_.f_star)
            throw ConfigError("objective-decrease termination requires f_star");
    }

    bool check(const Point& p) {
        const auto evals = obj_.counter().fg_evals;
        trace_.push_back({evals, p.f});
        if (reached_) return true;
        bool ok = false;
        if (term_.mode == Criterion::objective_decrease)
            ok = check_tolerance_objective(p.f, f0_, *term_.f_star,
                                           term_.rel_tol);
        else
            ok = p.g.allFinite() &&
                 check_tolerance_gradient(p.g.lpNorm<Eigen::Infinity>(), g0_,
                                          term_.rel_tol);
        if (ok) {
            reached_ = true;
            evals_at_tol_ = evals;
        }
        return ok;
    }

    bool reached() const { return reached_; }
    std::optional<std::int64_t> evals_at_tolerance() const {
        return evals_at_tol_;
    }
    std::vector<TracePoint> take_trace() { return std::move(trace_); }

  private:
    const Objective& obj_;
    Termination term_;
    double f0_;
    double g0_;
    bool reached_ = false;
    std::optional<std::int64_t> evals_at_tol_;
    std::vector<TracePoint> trace_;
};

/// `stalled`: the solver state would repeat unchanged, so further steps
/// cannot make progress.
enum class StepStatus { ok, stalled, fatal };

/// Iterative minimizer driven by `minimize`. One call to `step` is one outer
/// iteration; each solver reports its checkpoints to the monitor and returns
/// early once the monitor signals the tolerance.
class Solver {
  public:
    virtual ~Solver() = default;
    virtual std::string name() const = 0;
    virtual void start(Objective& obj, const Point& x0) = 0;
    virtual StepStatus step(Objective& obj, Point& current,
                            Monitor& monitor) = 0;
};

/// Generic outer loop shared by all solvers.
inline RunRecord minimize(Objective& obj, Solver& solver, const Vector& x0,
                          const Termination& term) {
    if (x0.size() != obj.dim())
        throw ConfigError("initial point has the wrong dimension");
    if (term.max_iters <= 0) throw ConfigError("max_iters must be positive");
    if (term.mode == Criterion::objective_decrease && !term.f_star)
        throw ConfigError("objective-decrease termination requires f_star");

    RunRecord rec;
    Point current = obj.evaluate(x0);
    if (!current.finite()) {
        rec.x = current.x;
        rec.f = current.f;
        rec.fg_evals = obj.counter().fg_evals;
        rec.message = "non-finite objective or gradient at x0";
        return rec;
    }

    Monitor monitor(obj, term, current);
    std::int64_t iters = 0;
    if (!monitor.check(current)) {
        solver.start(obj, current);
        while (iters < term.max_iters) {
            ++iters;
            const StepStatus st = solver.step(obj, current, monitor);
            if (monitor.reached()) break;
            if (st == StepStatus::fatal) {
                rec.message = "non-finite values encountered";
                break;
            }
            if (st == StepStatus::stalled) {
                rec.message = "no further progress possible";
                break;
            }
        }
    }

    rec.x = std::move(current.x);
    rec.f = current.f;
    rec.fg_evals = obj.counter().fg_evals;
    rec.iterations = iters;
    rec.success = monitor.reached();
    rec.evals_to_tolerance = monitor.evals_at_tolerance();
    rec.trace = monitor.take_trace();
    if (rec.message.empty())
        rec.message = rec.success ? "tolerance reached" : "iteration limit";
    return rec;
}

}  // namespace oaccel
