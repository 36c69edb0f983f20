#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nrrr/basis.hpp"
#include "nrrr/parallel.hpp"

namespace nrrr {

/// One subject's discretely observed curves.
/// x_vals is g x p (row u observed at x_grid[u]); y_vals is m x d.
struct FunctionalSample {
    std::vector<double> x_grid;
    Eigen::MatrixXd x_vals;
    std::vector<double> y_grid;
    Eigen::MatrixXd y_vals;

    [[nodiscard]] int p() const { return static_cast<int>(x_vals.cols()); }
    [[nodiscard]] int d() const { return static_cast<int>(y_vals.cols()); }
};

/// Integrated design matrices in basis-major block layout:
/// X = (X_1, ..., X_Jx) with X_j the n x p block for basis function j,
/// i.e. column j*p + l holds predictor l against basis function j; Y likewise
/// with column j*d + k.
struct IntegratedDesign {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
    int n = 0;
    int p = 0;
    int d = 0;
    int Jx = 0;
    int Jy = 0;

    [[nodiscard]] auto x_block(int j) const { return X.middleCols(static_cast<Eigen::Index>(j) * p, p); }
    [[nodiscard]] auto y_block(int j) const { return Y.middleCols(static_cast<Eigen::Index>(j) * d, d); }

    /// Subset of rows, keeping dimension metadata.
    [[nodiscard]] IntegratedDesign rows(std::span<const int> idx) const;
};

/// Riemann weights (s_u - s_{u-1}) for u >= 2 and 0 for the first point.
Eigen::VectorXd riemann_weights(std::span<const double> grid);

/// Jx x p matrix of raw Riemann integrals  sum_{u>=2} phi_j(s_u) x_l(s_u) (s_u - s_{u-1}).
Eigen::MatrixXd riemann_project(std::span<const double> grid, const Eigen::MatrixXd& vals, const BasisSpec& spec);

/// Integrated predictor (length Jx*p, entry j*p + l).
Eigen::VectorXd integrate_x(const FunctionalSample& sample, const BasisSpec& spec);

/// Integrated, whitened response (length Jy*d, entry j*d + k): the raw Riemann
/// integrals of each response are premultiplied by J^{-1/2}.
Eigen::VectorXd integrate_y(const FunctionalSample& sample, const BasisSpec& spec, const GramMatrix& gram);

/// Stacks per-sample integrals into X (n x Jx*p) and Y (n x Jy*d).
/// Rows are computed independently, so the parallel and serial paths agree bit for bit.
IntegratedDesign assemble_design(std::span<const FunctionalSample> samples, const BasisSpec& x_spec,
                                 const BasisSpec& y_spec, const GramMatrix& y_gram,
                                 Exec exec = Exec::parallel);

/// Splits columns into `blocks` equal-width pieces (the basis-major blocks).
std::vector<Eigen::MatrixXd> deblock_columns(const Eigen::MatrixXd& M, int blocks);

/// Inverse of deblock_columns.
Eigen::MatrixXd concat_columns(const std::vector<Eigen::MatrixXd>& blocks);

/// Checks grid ordering, sizes and the basis domains; throws on the first problem.
void validate_sample(const FunctionalSample& sample, const BasisSpec& x_spec, const BasisSpec& y_spec);

}  // namespace nrrr
