#pragma once

#include "oaccel/core.hpp"

#include <functional>
#include <vector>

namespace oaccel {

/// Iterates of the Full Orthogonalization Method on A x = b.
struct FomTrace {
    /// iterates[0] = x^(1) (the initial guess), iterates[k] = x^(k+1).
    std::vector<Vector> iterates;
    /// residuals[k] = b - A iterates[k].
    std::vector<Vector> residuals;
    /// Orthonormal Arnoldi basis, n x k.
    Matrix basis;
    /// Upper Hessenberg matrix, (k+1) x k.
    Matrix hessenberg;
    /// Steps whose k x k Hessenberg system was singular (no iterate added).
    std::vector<int> breakdown_steps;
    /// Arnoldi terminated because the Krylov space became invariant; the
    /// last iterate is then the exact solution.
    bool invariant = false;
};

using MatVec = std::function<Vector(const Vector&)>;

/// Arnoldi with modified Gram-Schmidt (one extra pass when orthogonality is
/// lost) and FOM iterates x^(k+1) = x^(1) + V_k y_k, H_k y_k = beta e_1.
inline FomTrace fom_solve(const MatVec& A, const Vector& b, const Vector& x0,
                          int kmax) {
    const Index n = b.size();
    if (x0.size() != n) throw ConfigError("fom_solve: dimension mismatch");
    if (kmax < 0 || kmax > n) throw ConfigError("fom_solve: kmax must be in [0, n]");

    FomTrace tr;
    tr.iterates.push_back(x0);
    Vector r0 = b - A(x0);
    tr.residuals.push_back(r0);
    const double beta = r0.norm();

    Matrix V = Matrix::Zero(n, kmax + 1);
    Matrix H = Matrix::Zero(kmax + 1, kmax);
    if (beta == 0.0 || kmax == 0) {
        tr.invariant = beta == 0.0;
        tr.basis = V.leftCols(0);
        tr.hessenberg = H.topLeftCorner(1, 0);
        return tr;
    }
    V.col(0) = r0 / beta;

    int k_done = 0;
    for (int k = 0; k < kmax; ++k) {
        Vector w = A(V.col(k));
        const double wnorm0 = w.norm();
        for (int i = 0; i <= k; ++i) {
            H(i, k) = V.col(i).dot(w);
            w -= H(i, k) * V.col(i);
        }
        // Reorthogonalize when the new vector lost most of its norm.
        if (w.norm() < 0.7071 * wnorm0 ||
            (V.leftCols(k + 1).transpose() * w).cwiseAbs().maxCoeff() >
                1e-8 * w.norm()) {
            for (int i = 0; i <= k; ++i) {
                const double c = V.col(i).dot(w);
                H(i, k) += c;
                w -= c * V.col(i);
            }
        }
        H(k + 1, k) = w.norm();
        k_done = k + 1;

        // Iterate from the k+1 by k+1 Hessenberg system.
        const Matrix Hk = H.topLeftCorner(k + 1, k + 1);
        Vector rhs = Vector::Zero(k + 1);
        rhs[0] = beta;
        Eigen::FullPivLU<Matrix> lu(Hk);
        if (lu.isInvertible()) {
            const Vector y = lu.solve(rhs);
            Vector x = x0 + V.leftCols(k + 1) * y;
            tr.residuals.push_back(b - A(x));
            tr.iterates.push_back(std::move(x));
        } else {
            tr.breakdown_steps.push_back(k + 1);
        }

        if (H(k + 1, k) <= 1e-14 * wnorm0 || H(k + 1, k) == 0.0) {
            tr.invariant = true;
            break;
        }
        V.col(k + 1) = w / H(k + 1, k);
    }
    tr.basis = V.leftCols(k_done);
    tr.hessenberg = H.topLeftCorner(k_done + 1, k_done);
    return tr;
}

inline FomTrace fom_solve(const Matrix& A, const Vector& b, const Vector& x0,
                          int kmax) {
    return fom_solve([&A](const Vector& v) -> Vector { return A * v; }, b, x0,
                     kmax);
}

}  // namespace oaccel
