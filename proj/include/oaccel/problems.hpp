#pragma once

#include "oaccel/core.hpp"
#include "oaccel/rng.hpp"

#include <cctype>
#include <cmath>
#include <memory>
#include <optional>
#include <string>

namespace oaccel {

/// Test problems A-G:
///   A  diagonal quadratic, D = diag(1..n), x* = 1
///   B  A under the paraboloid map y_1 = z_1, y_j = z_j - 10 z_1^2
///   C  B with T = Q diag(1..n) Q^T, Q random orthogonal
///   D  extended Rosenbrock (n even)
///   E  extended Powell singular (n multiple of 4)
///   F  trigonometric
///   G  penalty function I (minimum not known in closed form)
enum class ProblemId { A, B, C, D, E, F, G };

inline char to_char(ProblemId id) { return static_cast<char>('A' + static_cast<int>(id)); }

inline std::optional<ProblemId> parse_problem_id(const std::string& s) {
    if (s.size() != 1) return std::nullopt;
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (c < 'A' || c > 'G') return std::nullopt;
    return static_cast<ProblemId>(c - 'A');
}

struct ProblemSpec {
    ProblemId id = ProblemId::A;
    Index n = 100;
    std::uint64_t seed = 0;  ///< only Problem C draws from it
};

inline void validate(const ProblemSpec& spec) {
    if (spec.n < 1) throw ConfigError("problem dimension must be positive");
    if (spec.id == ProblemId::B || spec.id == ProblemId::C) {
        if (spec.n < 2) throw ConfigError("problems B and C need n >= 2");
    }
    if (spec.id == ProblemId::D && spec.n % 2 != 0)
        throw ConfigError("problem D needs an even dimension");
    if (spec.id == ProblemId::E && spec.n % 4 != 0)
        throw ConfigError("problem E needs a dimension divisible by 4");
}

/// Haar-distributed orthogonal matrix: QR of a standard normal matrix with
/// the signs of R's diagonal moved into Q.
inline Matrix random_orthogonal(Index n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("random_orthogonal needs n >= 1");
    Rng rng(seed);
    Matrix G(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ();
    const Matrix& R = qr.matrixQR();
    for (Index j = 0; j < n; ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
    return Q;
}

/// Components i.i.d. uniform on [0, 1).
inline Vector initial_guess(Index n, Rng& rng) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = rng.uniform();
    return x;
}

/// Known minimizer, when there is one in closed form.
inline std::optional<Vector> known_minimizer(const ProblemSpec& spec) {
    switch (spec.id) {
    case ProblemId::A:
    case ProblemId::B:
    case ProblemId::C:
    case ProblemId::D:
        return Vector::Ones(spec.n);
    case ProblemId::E:
    case ProblemId::F:
        return Vector::Zero(spec.n);
    case ProblemId::G:
        break;
    }
    return std::nullopt;
}

namespace detail {

// f = 1/2 y^T M y with y(z) = (z_1, z_j - 10 z_1^2), z = x - 1, where the
// matrix-vector product with M is supplied.
template <typename Apply>
double paraboloid_fg(const Vector& x, Vector& g, Apply&& apply_m) {
    const Index n = x.size();
    Vector y = x.array() - 1.0;
    const double z1 = y[0];
    y.tail(n - 1).array() -= 10.0 * z1 * z1;
    const Vector my = apply_m(y);
    g = my;
    g[0] -= 20.0 * z1 * my.tail(n - 1).sum();
    return 0.5 * y.dot(my);
}

inline double rosenbrock_fg(const Vector& x, Vector& g) {
    double f = 0.0;
    for (Index k = 0; k + 1 < x.size(); k += 2) {
        const double a = x[k], b = x[k + 1];
        const double t1 = 10.0 * (b - a * a);
        const double t2 = 1.0 - a;
        f += t1 * t1 + t2 * t2;
        g[k] = -20.0 * a * t1 - t2;
        g[k + 1] = 10.0 * t1;
    }
    return 0.5 * f;
}

inline void rosenbrock_hv(const Vector& x, const Vector& v, Vector& out) {
    for (Index k = 0; k + 1 < x.size(); k += 2) {
        const double a = x[k], b = x[k + 1];
        const double t1 = 10.0 * (b - a * a);
        const double h11 = 400.0 * a * a + 1.0 - 20.0 * t1;
        const double h12 = -200.0 * a;
        out[k] = h11 * v[k] + h12 * v[k + 1];
        out[k + 1] = h12 * v[k] + 100.0 * v[k + 1];
    }
}

inline double powell_fg(const Vector& x, Vector& g) {
    static const double s5 = std::sqrt(5.0);
    static const double s10 = std::sqrt(10.0);
    double f = 0.0;
    for (Index k = 0; k + 3 < x.size(); k += 4) {
        const double x1 = x[k], x2 = x[k + 1], x3 = x[k + 2], x4 = x[k + 3];
        const double t1 = x1 + 10.0 * x2;
        const double t2 = s5 * (x3 - x4);
        const double u = x2 - 2.0 * x3;
        const double t3 = u * u;
        const double v = x1 - x4;
        const double t4 = s10 * v * v;
        f += t1 * t1 + t2 * t2 + t3 * t3 + t4 * t4;
        g[k] = t1 + t4 * 2.0 * s10 * v;
        g[k + 1] = 10.0 * t1 + t3 * 2.0 * u;
        g[k + 2] = s5 * t2 - 4.0 * t3 * u;
        g[k + 3] = -s5 * t2 - t4 * 2.0 * s10 * v;
    }
    return 0.5 * f;
}

inline double trigonometric_fg(const Vector& x, Vector& g) {
    const Index n = x.size();
    const Vector c = x.array().cos();
    const Vector s = x.array().sin();
    const double csum = c.sum();
    Vector t(n);
    for (Index j = 0; j < n; ++j)
        t[j] = static_cast<double>(n) + static_cast<double>(j + 1) * (1.0 - c[j]) -
               s[j] - csum;
    const double tsum = t.sum();
    for (Index k = 0; k < n; ++k)
        g[k] = t[k] * (static_cast<double>(k + 1) * s[k] - c[k]) + s[k] * tsum;
    return 0.5 * t.squaredNorm();
}

inline double penalty1_fg(const Vector& x, Vector& g) {
    constexpr double a = 1e-5;
    const double t0 = x.squaredNorm() - 0.25;
    const Vector d = x.array() - 1.0;
    g = 2.0 * t0 * x + a * d;
    return 0.5 * (t0 * t0 + a * d.squaredNorm());
}

}  // namespace detail

/// Builds the objective for `spec`. Problem A and D carry an exact Hessian
/// action; the others do not (see with_fd_hessian).
inline Objective make_problem(const ProblemSpec& spec) {
    validate(spec);
    const Index n = spec.n;
    switch (spec.id) {
    case ProblemId::A: {
        auto diag = std::make_shared<const Vector>(Vector::LinSpaced(n, 1.0, static_cast<double>(n)));
        return Objective(
            n,
            [diag](const Vector& x, Vector& g) {
                const Vector z = x.array() - 1.0;
                g = diag->cwiseProduct(z);
                return 0.5 * z.dot(g);
            },
            0.0,
            [diag](const Vector&, const Vector& v, Vector& out) {
                out = diag->cwiseProduct(v);
            });
    }
    case ProblemId::B: {
        auto diag = std::make_shared<const Vector>(Vector::LinSpaced(n, 1.0, static_cast<double>(n)));
        return Objective(
            n,
            [diag](const Vector& x, Vector& g) {
                return detail::paraboloid_fg(
                    x, g, [&](const Vector& y) -> Vector { return diag->cwiseProduct(y); });
            },
            0.0);
    }
    case ProblemId::C: {
        const Matrix Q = random_orthogonal(n, spec.seed);
        const Vector ev = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
        auto T = std::make_shared<const Matrix>(Q * ev.asDiagonal() * Q.transpose());
        return Objective(
            n,
            [T](const Vector& x, Vector& g) {
                return detail::paraboloid_fg(
                    x, g, [&](const Vector& y) -> Vector { return (*T) * y; });
            },
            0.0);
    }
    case ProblemId::D:
        return Objective(n, detail::rosenbrock_fg, 0.0, detail::rosenbrock_hv);
    case ProblemId::E:
        return Objective(n, detail::powell_fg, 0.0);
    case ProblemId::F:
        return Objective(n, detail::trigonometric_fg, 0.0);
    case ProblemId::G:
        return Objective(n, detail::penalty1_fg, std::nullopt);
    }
    throw ConfigError("unknown problem id");
}

}  // namespace oaccel
