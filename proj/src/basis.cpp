#include "nrrr/basis.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nrrr/errors.hpp"

namespace nrrr {

BasisSpec make_bspline(double domain_lo, double domain_hi, int num_funcs, int degree) {
    if (degree < 0) throw DimensionError("make_bspline: degree must be nonnegative");
    if (num_funcs < degree + 1)
        throw DimensionError("make_bspline: num_funcs (" + std::to_string(num_funcs) +
                             ") must be at least degree + 1 (" + std::to_string(degree + 1) + ")");
    if (!(domain_lo < domain_hi)) throw DomainError("make_bspline: domain_lo must be < domain_hi");

    BasisSpec spec;
    spec.domain_lo = domain_lo;
    spec.domain_hi = domain_hi;
    spec.degree = degree;
    spec.num_funcs = num_funcs;

    const int interior = num_funcs - degree - 1;
    spec.knots.reserve(static_cast<std::size_t>(num_funcs + degree + 1));
    for (int i = 0; i <= degree; ++i) spec.knots.push_back(domain_lo);
    for (int k = 1; k <= interior; ++k)
        spec.knots.push_back(domain_lo + (domain_hi - domain_lo) * k / (interior + 1));
    for (int i = 0; i <= degree; ++i) spec.knots.push_back(domain_hi);
    return spec;
}

namespace {

// Index i of the knot span [knots[i], knots[i+1]) holding t, restricted to the
// nondegenerate spans degree..num_funcs-1. The right endpoint belongs to the last span.
int find_span(const BasisSpec& spec, double t) {
    const int last = spec.num_funcs - 1;
    if (t >= spec.knots[static_cast<std::size_t>(last + 1)]) return last;
    int lo = spec.degree;
    int hi = last + 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (t < spec.knots[static_cast<std::size_t>(mid)])
            hi = mid;
        else
            lo = mid;
    }
    return lo;
}

// Cox-de Boor triangle: the degree+1 nonzero basis values on span `span`.
void nonzero_basis(const BasisSpec& spec, int span, double t, double* out) {
    const int p = spec.degree;
    const auto& U = spec.knots;
    std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = t - U[static_cast<std::size_t>(span + 1 - j)];
        right[j] = U[static_cast<std::size_t>(span + j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

void check_point(const BasisSpec& spec, double t) {
    if (!std::isfinite(t) || !spec.contains(t))
        throw DomainError("eval_basis: point " + std::to_string(t) + " outside [" +
                          std::to_string(spec.domain_lo) + ", " + std::to_string(spec.domain_hi) + "]");
}

}  // namespace

Eigen::MatrixXd eval_basis(const BasisSpec& spec, std::span<const double> points) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), spec.num_funcs);
    std::vector<double> vals(static_cast<std::size_t>(spec.degree + 1));
    for (std::size_t v = 0; v < points.size(); ++v) {
        const double t = points[v];
        check_point(spec, t);
        const int span = find_span(spec, t);
        nonzero_basis(spec, span, t, vals.data());
        for (int k = 0; k <= spec.degree; ++k) out(static_cast<Eigen::Index>(v), span - spec.degree + k) = vals[k];
    }
    return out;
}

Eigen::VectorXd eval_basis_at(const BasisSpec& spec, double t) {
    const double pt[1] = {t};
    return eval_basis(spec, pt).row(0).transpose();
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    if (n < 1) throw DimensionError("gauss_legendre: need at least one node");
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[static_cast<std::size_t>(i)] = -z;
        x[static_cast<std::size_t>(n - 1 - i)] = z;
        w[static_cast<std::size_t>(i)] = wi;
        w[static_cast<std::size_t>(n - 1 - i)] = wi;
    }
    if (n % 2 == 1) x[static_cast<std::size_t>(n / 2)] = 0.0;
    return {x, w};
}

GramMatrix gram(const BasisSpec& spec, int quad_points) {
    if (quad_points == 0) quad_points = spec.degree + 1;
    if (quad_points < spec.degree + 1 || quad_points < 1)
        throw DimensionError("gram: need at least degree + 1 quadrature nodes per knot span");

    const auto [nodes, weights] = gauss_legendre(quad_points);
    const int J = spec.num_funcs;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(J, J);
    std::vector<double> vals(static_cast<std::size_t>(spec.degree + 1));

    for (int span = spec.degree; span < J; ++span) {
        const double a = spec.knots[static_cast<std::size_t>(span)];
        const double b = spec.knots[static_cast<std::size_t>(span + 1)];
        if (!(b > a)) continue;
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (int q = 0; q < quad_points; ++q) {
            const double t = mid + half * nodes[static_cast<std::size_t>(q)];
            const double w = half * weights[static_cast<std::size_t>(q)];
            nonzero_basis(spec, span, t, vals.data());
            const int off = span - spec.degree;
            for (int i = 0; i <= spec.degree; ++i)
                for (int k = i; k <= spec.degree; ++k) G(off + i, off + k) += w * vals[i] * vals[k];
        }
    }
    // Mirror the upper triangle so the result is exactly symmetric.
    for (int i = 0; i < J; ++i)
        for (int k = 0; k < i; ++k) G(i, k) = G(k, i);

    return GramMatrix{G, inv_sqrt(G)};
}

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> checked_eigen(const Eigen::MatrixXd& M, const char* who) {
    if (M.rows() != M.cols()) throw DimensionError(std::string(who) + ": matrix must be square");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw NumericalError(std::string(who) + ": matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw NumericalError(std::string(who) + ": eigendecomposition failed");
    if (es.eigenvalues().minCoeff() <= 1e-12)
        throw NumericalError(std::string(who) + ": matrix is not positive definite (smallest eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
    return es;
}

}  // namespace

Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& M) {
    const auto es = checked_eigen(M, "inv_sqrt");
    const Eigen::MatrixXd& Q = es.eigenvectors();
    Eigen::MatrixXd S = Q * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * Q.transpose();
    return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd sqrtm_spd(const Eigen::MatrixXd& M) {
    const auto es = checked_eigen(M, "sqrtm_spd");
    const Eigen::MatrixXd& Q = es.eigenvectors();
    Eigen::MatrixXd S = Q * es.eigenvalues().cwiseSqrt().asDiagonal() * Q.transpose();
    return 0.5 * (S + S.transpose());
}

}  // namespace nrrr
