#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace nrrr {

/// Clamped B-spline basis on [domain_lo, domain_hi].
///
/// `knots` is the full knot vector: degree+1 copies of each endpoint with
/// uniformly spaced interior knots in between, so
/// num_funcs == interior_knots + degree + 1.
struct BasisSpec {
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    int degree = 3;
    int num_funcs = 4;
    std::vector<double> knots;

    [[nodiscard]] int interior_knot_count() const { return num_funcs - degree - 1; }
    [[nodiscard]] bool contains(double t) const { return t >= domain_lo && t <= domain_hi; }
};

/// Gram matrix of a basis and its symmetric inverse square root.
struct GramMatrix {
    Eigen::MatrixXd J;
    Eigen::MatrixXd J_inv_sqrt;
};

BasisSpec make_bspline(double domain_lo, double domain_hi, int num_funcs, int degree = 3);

/// Row v holds all basis functions evaluated at points[v] (m x J).
Eigen::MatrixXd eval_basis(const BasisSpec& spec, std::span<const double> points);

/// Basis vector at a single point (length J).
Eigen::VectorXd eval_basis_at(const BasisSpec& spec, double t);

/// Gram matrix by composite Gauss-Legendre quadrature over the knot spans.
/// `quad_points` is the node count per span; 0 picks degree + 1, the minimum
/// that integrates products of two splines exactly.
GramMatrix gram(const BasisSpec& spec, int quad_points = 0);

/// Symmetric S with S M S = I, via eigendecomposition.
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& M);

/// Symmetric M^{1/2}.
Eigen::MatrixXd sqrtm_spd(const Eigen::MatrixXd& M);

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

}  // namespace nrrr
