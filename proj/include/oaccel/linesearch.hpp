#pragma once

#include "oaccel/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>

namespace oaccel {

/// Parameters for the strong-Wolfe line search.
struct LineSearchConfig {
    double c1 = 1e-4;  ///< sufficient decrease
    double c2 = 0.1;   ///< curvature
    double lambda0 = 1.0;
    int max_fg_evals = 20;
    double lambda_min = 1e-16;
    double lambda_max = 1e16;
    /// Relative width below which a bracketing interval is considered
    /// collapsed.
    double xtol = 1e-15;

    void validate() const {
        if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0))
            throw ConfigError("line search requires 0 < c1 < c2 < 1");
        if (!(lambda0 > 0.0) || !(lambda_min > 0.0) ||
            !(lambda_max > lambda_min))
            throw ConfigError("line search step bounds are inconsistent");
        if (max_fg_evals <= 0)
            throw ConfigError("line search needs a positive evaluation budget");
    }
};

enum class LineSearchStatus {
    converged,
    max_evals,
    bracket_failure,
    /// Interval collapsed, rounding limit or a step bound reached before the
    /// Wolfe conditions held.
    stalled,
};

struct LineSearchResult {
    double lambda = 0.0;
    double phi = std::numeric_limits<double>::quiet_NaN();
    double dphi = std::numeric_limits<double>::quiet_NaN();
    LineSearchStatus status = LineSearchStatus::bracket_failure;
    int evals = 0;
};

namespace detail {

struct Endpoint {
    double stp;
    double f;
    double d;
};

/// Safeguarded cubic/quadratic step of Moré and Thuente. Updates the interval
/// (x, y) using the trial p and returns the next trial step.
inline double mt_step(Endpoint& x, Endpoint& y, const Endpoint& p,
                      bool& brackt, double stpmin, double stpmax) {
    const double sgnd = p.d * (x.d / std::abs(x.d));
    double stpf;

    if (p.f > x.f) {
        // Higher function value: the minimum is bracketed.
        const double theta = 3.0 * (x.f - p.f) / (p.stp - x.stp) + x.d + p.d;
        const double s = std::max({std::abs(theta), std::abs(x.d), std::abs(p.d)});
        double gamma = s * std::sqrt((theta / s) * (theta / s) -
                                     (x.d / s) * (p.d / s));
        if (p.stp < x.stp) gamma = -gamma;
        const double pp = (gamma - x.d) + theta;
        const double q = ((gamma - x.d) + gamma) + p.d;
        const double r = pp / q;
        const double stpc = x.stp + r * (p.stp - x.stp);
        const double stpq =
            x.stp + ((x.d / ((x.f - p.f) / (p.stp - x.stp) + x.d)) / 2.0) *
                        (p.stp - x.stp);
        if (std::abs(stpc - x.stp) < std::abs(stpq - x.stp))
            stpf = stpc;
        else
            stpf = stpc + (stpq - stpc) / 2.0;
        brackt = true;
    } else if (sgnd < 0.0) {
        // Derivatives of opposite sign: bracketed.
        const double theta = 3.0 * (x.f - p.f) / (p.stp - x.stp) + x.d + p.d;
        const double s = std::max({std::abs(theta), std::abs(x.d), std::abs(p.d)});
        double gamma = s * std::sqrt((theta / s) * (theta / s) -
                                     (x.d / s) * (p.d / s));
        if (p.stp > x.stp) gamma = -gamma;
        const double pp = (gamma - p.d) + theta;
        const double q = ((gamma - p.d) + gamma) + x.d;
        const double r = pp / q;
        const double stpc = p.stp + r * (x.stp - p.stp);
        const double stpq = p.stp + (p.d / (p.d - x.d)) * (x.stp - p.stp);
        stpf = std::abs(stpc - p.stp) > std::abs(stpq - p.stp) ? stpc : stpq;
        brackt = true;
    } else if (std::abs(p.d) < std::abs(x.d)) {
        // Same sign, derivative magnitude decreases.
        const double theta = 3.0 * (x.f - p.f) / (p.stp - x.stp) + x.d + p.d;
        const double s = std::max({std::abs(theta), std::abs(x.d), std::abs(p.d)});
        double gamma = s * std::sqrt(std::max(
                               0.0, (theta / s) * (theta / s) -
                                        (x.d / s) * (p.d / s)));
        if (p.stp > x.stp) gamma = -gamma;
        const double pp = (gamma - p.d) + theta;
        const double q = (gamma + (x.d - p.d)) + gamma;
        const double r = pp / q;
        double stpc;
        if (r < 0.0 && gamma != 0.0)
            stpc = p.stp + r * (x.stp - p.stp);
        else if (p.stp > x.stp)
            stpc = stpmax;
        else
            stpc = stpmin;
        const double stpq = p.stp + (p.d / (p.d - x.d)) * (x.stp - p.stp);

        if (brackt) {
            stpf = std::abs(stpc - p.stp) < std::abs(stpq - p.stp) ? stpc : stpq;
            if (p.stp > x.stp)
                stpf = std::min(p.stp + 0.66 * (y.stp - p.stp), stpf);
            else
                stpf = std::max(p.stp + 0.66 * (y.stp - p.stp), stpf);
        } else {
            stpf = std::abs(stpc - p.stp) > std::abs(stpq - p.stp) ? stpc : stpq;
            stpf = std::clamp(stpf, stpmin, stpmax);
        }
    } else {
        // Same sign, derivative magnitude does not decrease.
        if (brackt) {
            const double theta =
                3.0 * (p.f - y.f) / (y.stp - p.stp) + y.d + p.d;
            const double s =
                std::max({std::abs(theta), std::abs(y.d), std::abs(p.d)});
            double gamma = s * std::sqrt((theta / s) * (theta / s) -
                                         (y.d / s) * (p.d / s));
            if (p.stp > y.stp) gamma = -gamma;
            const double pp = (gamma - p.d) + theta;
            const double q = ((gamma - p.d) + gamma) + y.d;
            const double r = pp / q;
            stpf = p.stp + r * (y.stp - p.stp);
        } else if (p.stp > x.stp) {
            stpf = stpmax;
        } else {
            stpf = stpmin;
        }
    }

    if (p.f > x.f) {
        y = p;
    } else {
        if (sgnd < 0.0) y = x;
        x = p;
    }
    return stpf;
}

}  // namespace detail

/// Strong-Wolfe line search in the style of Moré and Thuente.
///
/// `eval(lambda)` returns the pair (phi(lambda), phi'(lambda)); every call is
/// one evaluation against the budget. `phi0` and `dphi0` are the values at
/// lambda = 0, which the caller already knows.
///
/// On convergence the returned step satisfies
///   phi(l) <= phi0 + c1 l dphi0   and   |phi'(l)| <= c2 |dphi0|.
/// Otherwise the trial with the lowest phi is returned (lambda = 0 if no
/// trial was evaluated).
template <typename Eval>
LineSearchResult wolfe_search(Eval&& eval, double phi0, double dphi0,
                              const LineSearchConfig& cfg) {
    constexpr double xtrapl = 1.1;
    constexpr double xtrapu = 4.0;

    LineSearchResult best;
    best.lambda = 0.0;
    best.phi = phi0;
    best.dphi = dphi0;

    if (!std::isfinite(phi0) || !std::isfinite(dphi0) || !(dphi0 < 0.0)) {
        best.status = LineSearchStatus::bracket_failure;
        return best;
    }

    const double gtest = cfg.c1 * dphi0;
    double stp = std::clamp(cfg.lambda0, cfg.lambda_min, cfg.lambda_max);
    bool brackt = false;
    int stage = 1;
    double width = cfg.lambda_max - cfg.lambda_min;
    double width1 = 2.0 * width;

    detail::Endpoint x{0.0, phi0, dphi0};
    detail::Endpoint y{0.0, phi0, dphi0};
    double stmin = 0.0;
    double stmax = stp + xtrapu * stp;

    double upper_cap = cfg.lambda_max;
    bool have_trial = false;
    LineSearchResult best_trial;
    int evals = 0;

    auto finish = [&](LineSearchStatus status, const LineSearchResult* pick) {
        LineSearchResult out = pick ? *pick : best;
        out.status = status;
        out.evals = evals;
        return out;
    };

    while (true) {
        const auto [f, g] = eval(stp);
        ++evals;

        if (!std::isfinite(f) || !std::isfinite(g)) {
            // Failed trial: never step this far again, pull back toward the
            // best endpoint.
            if (evals >= cfg.max_fg_evals)
                return finish(LineSearchStatus::max_evals,
                              have_trial ? &best_trial : nullptr);
            upper_cap = stp;
            stp = x.stp + 0.5 * (stp - x.stp);
            if (!(stp > x.stp))
                return finish(LineSearchStatus::stalled,
                              have_trial ? &best_trial : nullptr);
            continue;
        }

        LineSearchResult cur{stp, f, g, LineSearchStatus::converged, 0};
        if (!have_trial || f < best_trial.phi) {
            best_trial = cur;
            have_trial = true;
        }

        const double ftest = phi0 + stp * gtest;
        if (stage == 1 && f <= ftest && g >= 0.0) stage = 2;

        if (f <= ftest && std::abs(g) <= cfg.c2 * (-dphi0))
            return finish(LineSearchStatus::converged, &cur);
        if (evals >= cfg.max_fg_evals)
            return finish(LineSearchStatus::max_evals, &best_trial);
        if (brackt && (stp <= stmin || stp >= stmax))
            return finish(LineSearchStatus::stalled, &best_trial);
        if (brackt && stmax - stmin <= cfg.xtol * stmax)
            return finish(LineSearchStatus::stalled, &best_trial);
        if (stp == cfg.lambda_max && f <= ftest && g <= gtest)
            return finish(LineSearchStatus::stalled, &best_trial);
        if (stp == cfg.lambda_min && (f > ftest || g >= gtest))
            return finish(LineSearchStatus::stalled, &best_trial);

        detail::Endpoint p{stp, f, g};
        if (stage == 1 && f <= x.f && f > ftest) {
            // Work with the modified function psi(l) = phi(l) - phi0 - l gtest.
            detail::Endpoint xm{x.stp, x.f - x.stp * gtest, x.d - gtest};
            detail::Endpoint ym{y.stp, y.f - y.stp * gtest, y.d - gtest};
            detail::Endpoint pm{stp, f - stp * gtest, g - gtest};
            stp = detail::mt_step(xm, ym, pm, brackt, stmin, stmax);
            x = {xm.stp, xm.f + xm.stp * gtest, xm.d + gtest};
            y = {ym.stp, ym.f + ym.stp * gtest, ym.d + gtest};
        } else {
            stp = detail::mt_step(x, y, p, brackt, stmin, stmax);
        }

        if (brackt) {
            if (std::abs(y.stp - x.stp) >= 0.66 * width1)
                stp = x.stp + 0.5 * (y.stp - x.stp);
            width1 = width;
            width = std::abs(y.stp - x.stp);
            stmin = std::min(x.stp, y.stp);
            stmax = std::max(x.stp, y.stp);
        } else {
            stmin = stp + xtrapl * (stp - x.stp);
            stmax = stp + xtrapu * (stp - x.stp);
        }

        stp = std::clamp(stp, cfg.lambda_min, cfg.lambda_max);
        if (stp >= upper_cap) stp = x.stp + 0.5 * (upper_cap - x.stp);
        if ((brackt && (stp <= stmin || stp >= stmax)) ||
            (brackt && stmax - stmin <= cfg.xtol * stmax))
            stp = x.stp;
        if (!(stp > 0.0) || !std::isfinite(stp))
            return finish(LineSearchStatus::stalled, &best_trial);
    }
}

/// Outcome of a line search along a direction in R^n.
struct DirectionalSearch {
    Point point;          ///< accepted point (the start if nothing improved)
    LineSearchResult info;
    bool improved = false;  ///< point.f < start.f
};

/// Line search along start.x + lambda d. Every trial costs one fg_eval on
/// `obj`. The point with the lowest objective is returned when the Wolfe
/// conditions are not met within the budget.
inline DirectionalSearch search_along(Objective& obj, const Point& start,
                                      const Vector& d,
                                      const LineSearchConfig& cfg) {
    DirectionalSearch out;
    const double dphi0 = d.dot(start.g);

    Point trial;
    trial.g.resize(start.x.size());
    Point best_pt;
    double best_phi = std::numeric_limits<double>::infinity();
    double best_lambda = 0.0;

    auto eval = [&](double lambda) {
        trial.x = start.x + lambda * d;
        trial.f = obj.evaluate(trial.x, trial.g);
        const double dphi = trial.g.dot(d);
        if (std::isfinite(trial.f) && std::isfinite(dphi) &&
            trial.f < best_phi) {
            best_phi = trial.f;
            best_lambda = lambda;
            best_pt = trial;
        }
        return std::pair{trial.f, dphi};
    };

    out.info = wolfe_search(eval, start.f, dphi0, cfg);
    if (out.info.status == LineSearchStatus::converged) {
        // The converged step is always the most recent trial.
        out.point = std::move(trial);
    } else if (out.info.evals > 0 && best_phi < start.f) {
        out.point = std::move(best_pt);
        out.info.lambda = best_lambda;
        out.info.phi = out.point.f;
        out.info.dphi = out.point.g.dot(d);
    } else {
        out.point = start;
        out.improved = false;
        return out;
    }
    out.improved = out.point.f < start.f;
    return out;
}

}  // namespace oaccel
