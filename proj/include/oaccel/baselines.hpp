#pragma once

#include "oaccel/core.hpp"
#include "oaccel/linesearch.hpp"

#include <deque>
#include <string>

namespace oaccel {

/// Limited-memory BFGS pairs for the two-loop recursion.
class LbfgsState {
  public:
    explicit LbfgsState(int m = 5) : m_(m) {
        if (m_ < 1) throw ConfigError("L-BFGS history size must be positive");
    }

    /// Stores (s, y) unless y^T s <= 0. Returns whether the pair was kept.
    bool push(const Vector& s, const Vector& y) {
        const double ys = y.dot(s);
        if (!(ys > 0.0) || !std::isfinite(ys)) return false;
        if (static_cast<int>(s_.size()) == m_) {
            s_.pop_front();
            y_.pop_front();
            rho_.pop_front();
        }
        s_.push_back(s);
        y_.push_back(y);
        rho_.push_back(1.0 / ys);
        return true;
    }

    void clear() {
        s_.clear();
        y_.clear();
        rho_.clear();
    }

    int size() const { return static_cast<int>(s_.size()); }
    int capacity() const { return m_; }

    /// d = -H g by the two-loop recursion with H0 = gamma I,
    /// gamma = s^T y / y^T y of the newest pair.
    Vector direction(const Vector& g) const {
        Vector q = g;
        const int k = size();
        std::vector<double> a(static_cast<std::size_t>(k));
        for (int i = k - 1; i >= 0; --i) {
            a[i] = rho_[i] * s_[i].dot(q);
            q -= a[i] * y_[i];
        }
        if (k > 0) q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
        for (int i = 0; i < k; ++i) {
            const double beta = rho_[i] * y_[i].dot(q);
            q += (a[i] - beta) * s_[i];
        }
        return -q;
    }

  private:
    int m_;
    std::deque<Vector> s_, y_;
    std::deque<double> rho_;
};

inline Vector lbfgs_direction(const LbfgsState& state, const Vector& g) {
    return state.direction(g);
}

/// Polak-Ribiere nonlinear CG state.
struct NcgState {
    Vector prev_g;  ///< empty before the first direction
    Vector prev_d;
};

/// PR+ direction: beta = max(0, g^T (g - g_prev) / ||g_prev||^2),
/// d = -g + beta d_prev, falling back to -g when d is not a descent direction.
/// Updates the state with (g, d).
inline Vector ncg_direction(NcgState& state, const Vector& g) {
    Vector d;
    if (state.prev_g.size() == 0) {
        d = -g;
    } else {
        const double denom = state.prev_g.squaredNorm();
        double beta = denom > 0.0 ? g.dot(g - state.prev_g) / denom : 0.0;
        if (!(beta > 0.0) || !std::isfinite(beta)) beta = 0.0;
        d = -g + beta * state.prev_d;
        if (!(d.dot(g) < 0.0)) d = -g;
    }
    state.prev_g = g;
    state.prev_d = d;
    return d;
}

class LbfgsSolver : public Solver {
  public:
    explicit LbfgsSolver(int m = 5, LineSearchConfig ls = {}) : m_(m), ls_(ls) {
        ls_.validate();
    }

    std::string name() const override { return "lbfgs"; }

    void start(Objective&, const Point&) override { state_ = LbfgsState(m_); }

    StepStatus step(Objective& obj, Point& current, Monitor& monitor) override {
        Vector d = state_.direction(current.g);
        if (!(d.dot(current.g) < 0.0)) {
            state_.clear();
            d = -current.g;
        }
        auto ls = search_along(obj, current, d, ls_);
        if (!ls.improved) {
            // Retry from steepest descent next iteration.
            const bool had_memory = state_.size() > 0;
            state_.clear();
            return had_memory ? StepStatus::ok : StepStatus::stalled;
        }
        state_.push(ls.point.x - current.x, ls.point.g - current.g);
        current = std::move(ls.point);
        monitor.check(current);
        return StepStatus::ok;
    }

  private:
    int m_;
    LineSearchConfig ls_;
    LbfgsState state_{5};
};

class NcgSolver : public Solver {
  public:
    explicit NcgSolver(LineSearchConfig ls = {}) : ls_(ls) { ls_.validate(); }

    std::string name() const override { return "ncg"; }

    void start(Objective&, const Point&) override { state_ = {}; }

    StepStatus step(Objective& obj, Point& current, Monitor& monitor) override {
        const bool fresh = state_.prev_g.size() == 0;
        const Vector d = ncg_direction(state_, current.g);
        auto ls = search_along(obj, current, d, ls_);
        if (!ls.improved) {
            state_ = {};
            return fresh ? StepStatus::stalled : StepStatus::ok;
        }
        current = std::move(ls.point);
        monitor.check(current);
        return StepStatus::ok;
    }

  private:
    LineSearchConfig ls_;
    NcgState state_;
};

}  // namespace oaccel
