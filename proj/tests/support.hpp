#pragma once

// Generators and independent oracles shared by the unit, property and
// acceptance tests. Nothing here calls the library's estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nrrr/basis.hpp"
#include "nrrr/integrate.hpp"

namespace nrrr::testing {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Generators

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

    MatrixXd gaussian(Index rows, Index cols) {
        MatrixXd M(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i) M(i, j) = normal();
        return M;
    }

    MatrixXd orthonormal(Index rows, Index cols) {
        Eigen::HouseholderQR<MatrixXd> qr(gaussian(rows, cols));
        return qr.householderQ() * MatrixXd::Identity(rows, cols);
    }

    MatrixXd spd(Index n) {
        const MatrixXd G = gaussian(n, n);
        return G * G.transpose() + static_cast<double>(n) * MatrixXd::Identity(n, n);
    }

    std::vector<double> sorted_points(int m, double lo, double hi) {
        std::vector<double> g(static_cast<std::size_t>(m));
        for (auto& v : g) v = uniform(lo, hi);
        std::sort(g.begin(), g.end());
        return g;
    }
};

inline std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
    return g;
}

inline MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
    MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < A.cols(); ++j) out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

inline MatrixXd eye(Index n) { return MatrixXd::Identity(n, n); }

/// Design with X Gaussian and Y = X C + noise, where C has the nested
/// structure (I kron V) B A^T (I kron U^T) with the requested ranks.
struct NestedInstance {
    IntegratedDesign design;
    MatrixXd C;  ///< true coefficient matrix
};

inline NestedInstance nested_instance(Gen& g, int n, int p, int d, int Jx, int Jy, int r, int rx, int ry,
                                      double noise) {
    NestedInstance out;
    const MatrixXd U = g.orthonormal(d, ry), V = g.orthonormal(p, rx);
    const MatrixXd A = g.gaussian(static_cast<Index>(Jy) * ry, r), B = g.gaussian(static_cast<Index>(Jx) * rx, r);
    out.C = kron(eye(Jx), V) * B * A.transpose() * kron(eye(Jy), U.transpose());
    IntegratedDesign& D = out.design;
    D.n = n;
    D.p = p;
    D.d = d;
    D.Jx = Jx;
    D.Jy = Jy;
    D.X = g.gaussian(n, static_cast<Index>(Jx) * p);
    D.Y = D.X * out.C + noise * g.gaussian(n, static_cast<Index>(Jy) * d);
    return out;
}

// ---------------------------------------------------------------------------
// B-spline oracle: the recursive Cox-de Boor definition with 0/0 = 0.

inline double cox_de_boor(const std::vector<double>& k, int i, int deg, double t) {
    if (deg == 0) {
        const double a = k[static_cast<std::size_t>(i)], b = k[static_cast<std::size_t>(i + 1)];
        if (a < b && t >= a && t < b) return 1.0;
        // Right endpoint of the domain belongs to the last nondegenerate span.
        if (a < b && t == k.back() && b == k.back()) return 1.0;
        return 0.0;
    }
    double out = 0.0;
    const double d1 = k[static_cast<std::size_t>(i + deg)] - k[static_cast<std::size_t>(i)];
    const double d2 = k[static_cast<std::size_t>(i + deg + 1)] - k[static_cast<std::size_t>(i + 1)];
    if (d1 > 0) out += (t - k[static_cast<std::size_t>(i)]) / d1 * cox_de_boor(k, i, deg - 1, t);
    if (d2 > 0) out += (k[static_cast<std::size_t>(i + deg + 1)] - t) / d2 * cox_de_boor(k, i + 1, deg - 1, t);
    return out;
}

inline VectorXd oracle_basis(const BasisSpec& s, double t) {
    VectorXd v(s.num_funcs);
    for (int j = 0; j < s.num_funcs; ++j) v(j) = cox_de_boor(s.knots, j, s.degree, t);
    return v;
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature.

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
    const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, b, fa, fm, fb, whole, tol, 50);
}

/// Integral over the domain split at the knots (each piece is smooth).
inline double integrate_piecewise(const std::function<double(double)>& f, const BasisSpec& s, double tol = 1e-13) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < s.knots.size(); ++i)
        if (s.knots[i + 1] > s.knots[i]) total += adaptive_simpson(f, s.knots[i], s.knots[i + 1], tol);
    return total;
}

// ---------------------------------------------------------------------------
// Nested objective written with explicit Kronecker products.

inline MatrixXd nested_C(const MatrixXd& U, const MatrixXd& V, const MatrixXd& A, const MatrixXd& B, int Jx, int Jy) {
    return kron(eye(Jx), V) * B * A.transpose() * kron(eye(Jy), U.transpose());
}

inline double objective(const IntegratedDesign& D, const MatrixXd& C) { return (D.Y - D.X * C).squaredNorm(); }

inline MatrixXd lstsq(const MatrixXd& M, const MatrixXd& rhs) {
    return M.completeOrthogonalDecomposition().solve(rhs);
}

/// Best rank-r objective of Y ~ X B A^T by alternating least squares in A and
/// B (no orthogonality imposed) from `starts` random starts.
inline double als_rank_r(const MatrixXd& X, const MatrixXd& Y, int r, int starts, std::uint64_t seed,
                         int iters = 2000) {
    Gen g(seed);
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < starts; ++s) {
        MatrixXd A = g.gaussian(Y.cols(), r), B;
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < iters; ++it) {
            B = lstsq(X, Y * A * (A.transpose() * A).completeOrthogonalDecomposition().pseudoInverse());
            const MatrixXd F = X * B;
            A = lstsq(F, Y).transpose();
            const double obj = (Y - F * A.transpose()).squaredNorm();
            if (std::abs(prev - obj) <= 1e-15 * std::max(1.0, obj)) break;
            prev = obj;
        }
        best = std::min(best, (Y - X * B * A.transpose()).squaredNorm());
    }
    return best;
}

/// Alternating oracle for the nested problem: exact least-squares block
/// coordinate descent over V, B, U and A in turn on the vectorized problem
/// (V and U re-orthonormalized by QR with R absorbed into B resp. A), from
/// `starts` random starts. Each block step cannot increase the objective.
struct OracleResult {
    double objective = std::numeric_limits<double>::infinity();
    MatrixXd C;
};

inline OracleResult nested_oracle(const IntegratedDesign& D, int r, int rx, int ry, int starts, std::uint64_t seed,
                                  int iters = 3000) {
    Gen g(seed);
    const int p = D.p, d = D.d, Jx = D.Jx, Jy = D.Jy;
    const VectorXd y = Eigen::Map<const VectorXd>(D.Y.data(), D.Y.size());
    OracleResult best;
    for (int s = 0; s < starts; ++s) {
        MatrixXd U = g.orthonormal(d, ry), V = g.orthonormal(p, rx);
        MatrixXd A = g.gaussian(static_cast<Index>(Jy) * ry, r), B = g.gaussian(static_cast<Index>(Jx) * rx, r);
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 0; it < iters; ++it) {
            const MatrixXd KU = kron(eye(Jy), U);  // (Jy d) x (Jy ry)
            // V: X (I kron V) B Zf^T = sum_j X_j V B_j Zf^T, vec = sum_j (Zf B_j^T kron X_j) vec(V).
            {
                const MatrixXd Zf = KU * A;
                MatrixXd M = MatrixXd::Zero(D.Y.size(), static_cast<Index>(p) * rx);
                for (int j = 0; j < Jx; ++j)
                    M += kron(Zf * B.middleRows(static_cast<Index>(j) * rx, rx).transpose(),
                              D.X.middleCols(static_cast<Index>(j) * p, p));
                const VectorXd v = lstsq(M, y);
                const MatrixXd Vt = Eigen::Map<const MatrixXd>(v.data(), p, rx);
                Eigen::HouseholderQR<MatrixXd> qr(Vt);
                V = qr.householderQ() * MatrixXd::Identity(p, rx);
                const MatrixXd R = V.transpose() * Vt;
                for (int j = 0; j < Jx; ++j)
                    B.middleRows(static_cast<Index>(j) * rx, rx) = R * B.middleRows(static_cast<Index>(j) * rx, rx);
            }
            // B: vec(XW B Zf^T) = (Zf kron XW) vec(B).
            {
                const MatrixXd XW = D.X * kron(eye(Jx), V);
                const VectorXd b = lstsq(kron(KU * A, XW), y);
                B = Eigen::Map<const MatrixXd>(b.data(), static_cast<Index>(Jx) * rx, r);
            }
            // U: column k of Y_j is G_j (row k of U)^T with G_j = F A_j^T.
            {
                const MatrixXd F = D.X * kron(eye(Jx), V) * B;
                MatrixXd M = MatrixXd::Zero(D.Y.size(), static_cast<Index>(d) * ry);
                const Index n = D.n;
                for (int j = 0; j < Jy; ++j) {
                    const MatrixXd G = F * A.middleRows(static_cast<Index>(j) * ry, ry).transpose();
                    for (int k = 0; k < d; ++k) {
                        const Index row0 = (static_cast<Index>(j) * d + k) * n;
                        for (int h = 0; h < ry; ++h) M.block(row0, static_cast<Index>(h) * d + k, n, 1) = G.col(h);
                    }
                }
                const VectorXd u = lstsq(M, y);
                const MatrixXd Ut = Eigen::Map<const MatrixXd>(u.data(), d, ry);
                Eigen::HouseholderQR<MatrixXd> qr(Ut);
                U = qr.householderQ() * MatrixXd::Identity(d, ry);
                const MatrixXd R = U.transpose() * Ut;
                for (int j = 0; j < Jy; ++j)
                    A.middleRows(static_cast<Index>(j) * ry, ry) = R * A.middleRows(static_cast<Index>(j) * ry, ry);
            }
            // A: vec(F A^T KU^T) = (KU kron F) vec(A^T).
            {
                const MatrixXd F = D.X * kron(eye(Jx), V) * B;
                const VectorXd a = lstsq(kron(kron(eye(Jy), U), F), y);
                A = Eigen::Map<const MatrixXd>(a.data(), r, static_cast<Index>(Jy) * ry).transpose();
            }
            const double obj = objective(D, nested_C(U, V, A, B, Jx, Jy));
            const bool done = prev - obj <= 1e-14 * std::max(1.0, obj);
            prev = obj;
            if (done) break;
        }
        if (prev < best.objective) {
            best.objective = prev;
            best.C = nested_C(U, V, A, B, Jx, Jy);
        }
    }
    return best;
}

}  // namespace nrrr::testing
