#pragma once

#include "oaccel/core.hpp"
#include "oaccel/linesearch.hpp"

#include <algorithm>

namespace oaccel {

enum class PreconditionerKind {
    sd_linesearch,  ///< steepest descent, step from a Wolfe line search
    sd_fixed,       ///< steepest descent, step min(delta, ||g||)
};

/// Line-search steepest descent along -g/||g||_2. Returns `at` unchanged
/// when the gradient vanishes or the line search finds no decrease.
inline Point sd_linesearch(Objective& obj, const Point& at,
                           const LineSearchConfig& ls) {
    const double gn = at.g.norm();
    if (!(gn > 0.0) || !std::isfinite(gn)) return at;
    const Vector dir = -at.g / gn;
    auto res = search_along(obj, at, dir, ls);
    return res.improved ? std::move(res.point) : at;
}

/// Fixed-step steepest descent: x - min(delta, ||g||_2) g/||g||_2. Costs one
/// fg_eval at the new point; the gradient at `at` is reused.
inline Point sd_fixed(Objective& obj, const Point& at, double delta) {
    const double gn = at.g.norm();
    if (!(gn > 0.0) || !std::isfinite(gn)) return at;
    const double step = std::min(delta, gn);
    return obj.evaluate(Vector(at.x - (step / gn) * at.g));
}

struct Preconditioner {
    PreconditionerKind kind = PreconditionerKind::sd_fixed;
    double delta = 1e-4;
    LineSearchConfig ls{};

    void validate() const {
        if (!(delta > 0.0)) throw ConfigError("preconditioner delta must be positive");
        ls.validate();
    }

    Point operator()(Objective& obj, const Point& at) const {
        return kind == PreconditionerKind::sd_fixed ? sd_fixed(obj, at, delta)
                                                    : sd_linesearch(obj, at, ls);
    }
};

}  // namespace oaccel
