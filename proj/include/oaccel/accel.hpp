#pragma once

#include "oaccel/core.hpp"
#include "oaccel/linesearch.hpp"
#include "oaccel/precond.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace oaccel {

/// Which quantity the accelerated point is chosen to reduce.
enum class AccelMode {
    objective,      ///< O-ACCEL: Galerkin condition on the objective
    gradient_norm,  ///< N-GMRES: least-squares linearized gradient
};

/// How the Hessian action on the subspace is obtained (objective mode only).
enum class SystemKind {
    gradient_difference,  ///< H(xP)(x_j - xP) ~ g(x_j) - g(xP)
    hessian_action,       ///< exact Hessian-vector products at xP
};

struct AccelConfig {
    AccelMode mode = AccelMode::objective;
    SystemKind system = SystemKind::gradient_difference;
    int w_max = 20;
    double eps0 = 1e-12;
    LineSearchConfig ls{};
    /// Take x^A directly instead of line-searching from xP toward it. Only
    /// meaningful for verifying the exact Krylov equivalence on quadratics.
    bool accept_unit_step = false;

    void validate() const {
        if (w_max < 1) throw ConfigError("w_max must be at least 1");
        if (!(eps0 >= 0.0)) throw ConfigError("eps0 must be nonnegative");
        if (mode == AccelMode::gradient_norm &&
            system == SystemKind::hessian_action)
            throw ConfigError("gradient-norm acceleration uses gradient differences only");
        ls.validate();
    }
};

/// Circular store of past iterates x_i and their gradients r_i, with cached
/// inner products for assembling the small system in O(w n + w^2).
///
/// Products are taken relative to a base point (c, g_c):
///   objective mode       q_ij = (x_i - c)^T (r_j - g_c)
///   gradient-norm mode   q_ij = (r_i - g_c)^T (r_j - g_c)
/// The base starts at the restart point. When the assembled system shows
/// heavy cancellation against the cached terms, `rebase` moves it to the
/// current preconditioned point and recomputes q in O(w^2 n).
class HistoryBuffer {
  public:
    HistoryBuffer(Index n, int w_max, AccelMode mode)
        : n_(n), w_max_(w_max), mode_(mode), q_(Matrix::Zero(w_max, w_max)) {
        if (w_max < 1) throw ConfigError("w_max must be at least 1");
        x_.reserve(static_cast<std::size_t>(w_max));
        r_.reserve(static_cast<std::size_t>(w_max));
    }

    /// Discards the history; the single remaining slot holds `p`.
    void reset(const Point& p) {
        base_x_ = p.x;
        base_g_ = p.g;
        x_.assign(1, p.x);
        r_.assign(1, p.g);
        w_ = 1;
        pushes_ = 0;
        q_.setZero();
    }

    /// Stores an accepted iterate. The window grows to w_max; once full, the
    /// slot at cursor (k mod w_max) is overwritten, k counting stores since
    /// the last reset.
    void push(const Point& p) {
        if (w_ == 0) {
            reset(p);
            return;
        }
        ++pushes_;
        w_ = std::min(w_ + 1, w_max_);
        const int j = static_cast<int>(pushes_ % w_max_);
        if (j >= static_cast<int>(x_.size())) {
            x_.push_back(p.x);
            r_.push_back(p.g);
        } else {
            x_[j] = p.x;
            r_[j] = p.g;
        }
        refresh(j);
    }

    /// Moves the base point to (x, g) and recomputes every cached product.
    void rebase(const Vector& x, const Vector& g) {
        base_x_ = x;
        base_g_ = g;
        ++rebases_;
        for (int j = 0; j < w_; ++j) refresh(j);
    }

    int w() const { return w_; }
    int w_max() const { return w_max_; }
    AccelMode mode() const { return mode_; }
    Index dim() const { return n_; }
    const Vector& base_x() const { return base_x_; }
    const Vector& base_g() const { return base_g_; }
    std::int64_t rebases() const { return rebases_; }

    const Vector& x(int i) const { return x_[i]; }
    const Vector& r(int i) const { return r_[i]; }
    double q(int i, int j) const { return q_(i, j); }
    /// Slot written by the most recent store.
    int newest() const { return static_cast<int>(pushes_ % w_max_); }

  private:
    void refresh(int j) {
        const Vector rj = r_[j] - base_g_;
        if (mode_ == AccelMode::objective) {
            const Vector xj = x_[j] - base_x_;
            for (int i = 0; i < w_; ++i) {
                q_(i, j) = (x_[i] - base_x_).dot(rj);
                q_(j, i) = xj.dot(r_[i] - base_g_);
            }
        } else {
            for (int i = 0; i < w_; ++i) q_(i, j) = q_(j, i) = (r_[i] - base_g_).dot(rj);
        }
    }

    Index n_;
    int w_max_;
    AccelMode mode_;
    Matrix q_;
    std::vector<Vector> x_;
    std::vector<Vector> r_;
    Vector base_x_;
    Vector base_g_;
    int w_ = 0;
    std::int64_t pushes_ = 0;
    std::int64_t rebases_ = 0;
};

/// The w x w system A alpha = b for the subspace coefficients.
struct SmallSystem {
    Matrix A;
    Vector b;
    /// Largest cached term over the largest entry of A; rounding in A grows
    /// with this ratio. 1 when A is formed without cancellation.
    double cancellation = 1.0;
};

namespace detail {

inline double cancellation_ratio(double largest_term, const Matrix& A) {
    const double a = A.size() ? A.cwiseAbs().maxCoeff() : 0.0;
    if (largest_term == 0.0) return 1.0;
    return a > 0.0 ? largest_term / a : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// A_ij = (x_i - xP)^T (r_j - gP), b_i = -(x_i - xP)^T gP, with A formed
/// from the cached products.
inline SmallSystem assemble_system_gradient(const HistoryBuffer& h,
                                            const Vector& xP,
                                            const Vector& gP) {
    const int w = h.w();
    const Vector xs = xP - h.base_x();
    const Vector gs = gP - h.base_g();
    const double eta = xs.dot(gs);
    Vector xi1(w), xi2(w);
    SmallSystem sys{Matrix(w, w), Vector(w), 1.0};
    for (int i = 0; i < w; ++i) {
        xi1[i] = (h.x(i) - h.base_x()).dot(gs);
        xi2[i] = xs.dot(h.r(i) - h.base_g());
        sys.b[i] = -(h.x(i) - xP).dot(gP);
    }
    double largest = std::abs(eta);
    for (int i = 0; i < w; ++i) {
        largest = std::max({largest, std::abs(xi1[i]), std::abs(xi2[i])});
        for (int j = 0; j < w; ++j) {
            sys.A(i, j) = h.q(i, j) - xi1[i] - xi2[j] + eta;
            largest = std::max(largest, std::abs(h.q(i, j)));
        }
    }
    sys.cancellation = detail::cancellation_ratio(largest, sys.A);

    // The newest iterate lies a preconditioner step from xP, so its row and
    // column are small; form them directly.
    const int k = h.newest();
    const Vector dk = h.x(k) - xP;
    const Vector ek = h.r(k) - gP;
    for (int j = 0; j < w; ++j) {
        sys.A(k, j) = dk.dot(h.r(j) - gP);
        sys.A(j, k) = (h.x(j) - xP).dot(ek);
    }
    return sys;
}

/// N-GMRES normal equations: A_ij = (r_i - gP)^T (r_j - gP),
/// b_i = -(r_i - gP)^T gP.
inline SmallSystem assemble_system_ngmres(const HistoryBuffer& h,
                                          const Vector& gP) {
    const int w = h.w();
    const Vector gs = gP - h.base_g();
    const double eta = gs.squaredNorm();
    Vector xi(w);
    SmallSystem sys{Matrix(w, w), Vector(w), 1.0};
    for (int i = 0; i < w; ++i) {
        xi[i] = (h.r(i) - h.base_g()).dot(gs);
        sys.b[i] = -(h.r(i) - gP).dot(gP);
    }
    double largest = eta;
    for (int i = 0; i < w; ++i) {
        largest = std::max(largest, std::abs(xi[i]));
        for (int j = i; j < w; ++j) {
            sys.A(i, j) = sys.A(j, i) = h.q(i, j) - xi[i] - xi[j] + eta;
            largest = std::max(largest, std::abs(h.q(i, j)));
        }
    }
    sys.cancellation = detail::cancellation_ratio(largest, sys.A);

    const int k = h.newest();
    const Vector ek = h.r(k) - gP;
    for (int j = 0; j < w; ++j) sys.A(k, j) = sys.A(j, k) = (h.r(j) - gP).dot(ek);
    return sys;
}

/// A = (X - XP)^T H(xP) (X - XP), b = -(X - XP)^T gP using w Hessian-vector
/// products at xP.
inline SmallSystem assemble_system_hessian(const HistoryBuffer& h,
                                           const Vector& xP, const Vector& gP,
                                           Objective& obj) {
    if (!obj.has_hessian_action())
        throw ConfigError("hessian-action system needs an objective with a Hessian action");
    const int w = h.w();
    Matrix D(xP.size(), w), HD(xP.size(), w);
    Vector hv;
    for (int j = 0; j < w; ++j) {
        D.col(j) = h.x(j) - xP;
        obj.hessian_action(xP, D.col(j), hv);
        HD.col(j) = hv;
    }
    SmallSystem sys;
    sys.A = D.transpose() * HD;
    sys.b = -(D.transpose() * gP);
    return sys;
}

struct RegularizedSolution {
    Vector alpha;
    double epsilon = 0.0;
    /// Non-finite input or a factorization that produced non-finite output;
    /// alpha is then zero.
    bool degenerate = false;
};

/// Solves (A + eps I) alpha = b with eps = eps0 max_i A_ii (zero when that
/// maximum is not positive) by LU with partial pivoting.
inline RegularizedSolution regularized_solve(const SmallSystem& sys,
                                             double eps0) {
    const Index w = sys.b.size();
    RegularizedSolution out;
    out.alpha = Vector::Zero(w);
    if (w == 0) return out;
    if (!sys.A.allFinite() || !sys.b.allFinite()) {
        out.degenerate = true;
        return out;
    }
    const double dmax = sys.A.diagonal().maxCoeff();
    out.epsilon = dmax > 0.0 ? eps0 * dmax : 0.0;

    Matrix M = sys.A;
    M.diagonal().array() += out.epsilon;
    Eigen::PartialPivLU<Matrix> lu(M);
    Vector alpha = lu.solve(sys.b);
    if (!alpha.allFinite()) {
        out.degenerate = true;
        return out;
    }
    out.alpha = std::move(alpha);
    return out;
}

/// xA = xP + sum_j alpha_j (x_j - xP).
inline Vector accelerate(const HistoryBuffer& h, const Vector& xP,
                         const Vector& alpha) {
    if (alpha.size() != h.w())
        throw ConfigError("coefficient count does not match the history size");
    Vector d = Vector::Zero(xP.size());
    for (int j = 0; j < h.w(); ++j) d += alpha[j] * (h.x(j) - xP);
    return xP + d;
}

/// Cancellation ratio above which the cached products are rebased.
inline constexpr double kRebaseRatio = 16.0;

/// Assembles the system for `cfg`, rebasing the cache at xP first when the
/// cached form would lose accuracy.
inline SmallSystem assemble_system(HistoryBuffer& h, const Point& xP,
                                   Objective& obj, const AccelConfig& cfg) {
    if (cfg.mode == AccelMode::objective && cfg.system == SystemKind::hessian_action)
        return assemble_system_hessian(h, xP.x, xP.g, obj);
    auto build = [&] {
        return cfg.mode == AccelMode::gradient_norm ? assemble_system_ngmres(h, xP.g)
                                                    : assemble_system_gradient(h, xP.x, xP.g);
    };
    SmallSystem sys = build();
    if (!(sys.cancellation <= kRebaseRatio)) {
        h.rebase(xP.x, xP.g);
        sys = build();
    }
    return sys;
}

struct AccelStepResult {
    Point next;
    bool reset = false;
    /// The tolerance was met at the preconditioned point; `next` is xP.
    bool converged = false;
    /// Preconditioned point has non-finite f or g.
    bool fatal = false;
    /// Regularized coefficients of the last solve (empty on short-circuit).
    Vector alpha;
    /// The system those coefficients solve.
    SmallSystem system;
};

/// One accelerated iteration from `current`, the most recent iterate.
///
/// Applies the preconditioner, stops early if the monitor reports the
/// tolerance, then solves for the subspace coefficients and either performs
/// a line search from xP toward xA (when xA - xP is a strict descent
/// direction at xP and the search decreases f) and stores the result, or
/// returns xP with reset = true. The history is not reset here.
inline AccelStepResult accel_step(Objective& obj, HistoryBuffer& h,
                                  const Point& current,
                                  const Preconditioner& precond,
                                  const AccelConfig& cfg, Monitor* monitor) {
    AccelStepResult out;
    Point xP = precond(obj, current);
    if (!xP.finite()) {
        out.next = std::move(xP);
        out.fatal = true;
        return out;
    }
    if (monitor && monitor->check(xP)) {
        out.next = std::move(xP);
        out.converged = true;
        return out;
    }

    out.system = assemble_system(h, xP, obj, cfg);
    const RegularizedSolution sol = regularized_solve(out.system, cfg.eps0);
    out.alpha = sol.alpha;

    const Vector d = sol.degenerate ? Vector::Zero(xP.x.size())
                                    : Vector(accelerate(h, xP.x, sol.alpha) - xP.x);
    const double slope = d.dot(xP.g);
    if (sol.degenerate || !std::isfinite(slope) || !(slope < 0.0)) {
        out.next = std::move(xP);
        out.reset = true;
        return out;
    }

    if (cfg.accept_unit_step) {
        out.next = obj.evaluate(Vector(xP.x + d));
    } else {
        auto ls = search_along(obj, xP, d, cfg.ls);
        if (!ls.improved) {
            out.next = std::move(xP);
            out.reset = true;
            return out;
        }
        out.next = std::move(ls.point);
    }
    if (!out.next.finite()) {
        out.fatal = true;
        return out;
    }
    h.push(out.next);
    return out;
}

/// O-ACCEL / N-GMRES driven by `minimize`: one step is one preconditioner
/// application plus one acceleration attempt. After a reset the history is
/// re-seeded from the returned point.
class AcceleratedSolver : public Solver {
  public:
    AcceleratedSolver(Preconditioner precond, AccelConfig cfg)
        : precond_(precond), cfg_(cfg) {
        precond_.validate();
        cfg_.validate();
    }

    std::string name() const override {
        std::string base = cfg_.mode == AccelMode::objective ? "oaccel" : "ngmres";
        return base + (precond_.kind == PreconditionerKind::sd_linesearch ? "-a" : "-b");
    }

    void start(Objective& obj, const Point& x0) override {
        history_.emplace(obj.dim(), cfg_.w_max, cfg_.mode);
        history_->reset(x0);
        resets_ = 0;
    }

    StepStatus step(Objective& obj, Point& current, Monitor& monitor) override {
        const bool single = history_->w() == 1;
        auto res = accel_step(obj, *history_, current, precond_, cfg_, &monitor);
        if (res.fatal) return StepStatus::fatal;
        const bool unmoved = res.next.x == current.x;
        current = std::move(res.next);
        if (res.reset) {
            history_->reset(current);
            ++resets_;
            if (single && unmoved && !res.converged) return StepStatus::stalled;
        }
        return StepStatus::ok;
    }

    const HistoryBuffer& history() const { return *history_; }
    std::int64_t resets() const { return resets_; }

  private:
    Preconditioner precond_;
    AccelConfig cfg_;
    std::optional<HistoryBuffer> history_;
    std::int64_t resets_ = 0;
};

inline RunRecord run_accelerated(Objective& obj, const Vector& x0,
                                 const Preconditioner& precond,
                                 const AccelConfig& cfg,
                                 const Termination& term) {
    AcceleratedSolver solver(precond, cfg);
    return minimize(obj, solver, x0, term);
}

}  // namespace oaccel
