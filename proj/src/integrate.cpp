#include "nrrr/integrate.hpp"

#include <cmath>
#include <string>

#include "nrrr/errors.hpp"

namespace nrrr {

namespace {

void validate_grid(std::span<const double> grid, Eigen::Index rows, const BasisSpec& spec, const char* what) {
    if (grid.size() < 2) throw DomainError(std::string(what) + " grid needs at least 2 points");
    if (static_cast<Eigen::Index>(grid.size()) != rows)
        throw DimensionError(std::string(what) + " grid has " + std::to_string(grid.size()) +
                             " points but values have " + std::to_string(rows) + " rows");
    for (std::size_t u = 0; u < grid.size(); ++u) {
        if (!std::isfinite(grid[u]) || !spec.contains(grid[u]))
            throw DomainError(std::string(what) + " grid point " + std::to_string(grid[u]) +
                              " outside the basis domain");
        if (u > 0 && !(grid[u] > grid[u - 1]))
            throw DomainError(std::string(what) + " grid is degenerate or not increasing at index " +
                              std::to_string(u));
    }
}

void check_finite(const Eigen::MatrixXd& M, const char* what) {
    if (!M.allFinite()) throw DomainError(std::string(what) + " values contain NaN or Inf");
}

}  // namespace

IntegratedDesign IntegratedDesign::rows(std::span<const int> idx) const {
    IntegratedDesign out;
    out.p = p;
    out.d = d;
    out.Jx = Jx;
    out.Jy = Jy;
    out.n = static_cast<int>(idx.size());
    out.X.resize(out.n, X.cols());
    out.Y.resize(out.n, Y.cols());
    for (int i = 0; i < out.n; ++i) {
        out.X.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
        out.Y.row(i) = Y.row(idx[static_cast<std::size_t>(i)]);
    }
    return out;
}

Eigen::VectorXd riemann_weights(std::span<const double> grid) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t u = 1; u < grid.size(); ++u) w(static_cast<Eigen::Index>(u)) = grid[u] - grid[u - 1];
    return w;
}

Eigen::MatrixXd riemann_project(std::span<const double> grid, const Eigen::MatrixXd& vals, const BasisSpec& spec) {
    const Eigen::MatrixXd Phi = eval_basis(spec, grid);
    const Eigen::VectorXd w = riemann_weights(grid);
    return Phi.transpose() * (w.asDiagonal() * vals);
}

void validate_sample(const FunctionalSample& sample, const BasisSpec& x_spec, const BasisSpec& y_spec) {
    validate_grid(sample.x_grid, sample.x_vals.rows(), x_spec, "x");
    validate_grid(sample.y_grid, sample.y_vals.rows(), y_spec, "y");
    check_finite(sample.x_vals, "x");
    check_finite(sample.y_vals, "y");
}

Eigen::VectorXd integrate_x(const FunctionalSample& sample, const BasisSpec& spec) {
    validate_grid(sample.x_grid, sample.x_vals.rows(), spec, "x");
    check_finite(sample.x_vals, "x");
    const Eigen::MatrixXd R = riemann_project(sample.x_grid, sample.x_vals, spec);  // Jx x p
    // Row-major flattening of R gives index j*p + l.
    Eigen::VectorXd out(R.size());
    const Eigen::Index p = R.cols();
    for (Eigen::Index j = 0; j < R.rows(); ++j)
        for (Eigen::Index l = 0; l < p; ++l) out(j * p + l) = R(j, l);
    return out;
}

Eigen::VectorXd integrate_y(const FunctionalSample& sample, const BasisSpec& spec, const GramMatrix& gram) {
    validate_grid(sample.y_grid, sample.y_vals.rows(), spec, "y");
    check_finite(sample.y_vals, "y");
    if (gram.J_inv_sqrt.rows() != spec.num_funcs || gram.J_inv_sqrt.cols() != spec.num_funcs)
        throw DimensionError("integrate_y: Gram matrix dimension does not match the basis");
    const Eigen::MatrixXd raw = riemann_project(sample.y_grid, sample.y_vals, spec);  // Jy x d
    const Eigen::MatrixXd W = gram.J_inv_sqrt * raw;
    Eigen::VectorXd out(W.size());
    const Eigen::Index d = W.cols();
    for (Eigen::Index j = 0; j < W.rows(); ++j)
        for (Eigen::Index k = 0; k < d; ++k) out(j * d + k) = W(j, k);
    return out;
}

IntegratedDesign assemble_design(std::span<const FunctionalSample> samples, const BasisSpec& x_spec,
                                 const BasisSpec& y_spec, const GramMatrix& y_gram, Exec exec) {
    if (samples.empty()) throw DimensionError("assemble_design: no samples");
    const int p = samples.front().p();
    const int d = samples.front().d();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].p() != p || samples[i].d() != d)
            throw DimensionError("assemble_design: sample " + std::to_string(i) +
                                 " has inconsistent predictor/response counts");
        validate_sample(samples[i], x_spec, y_spec);
    }
    if (y_gram.J_inv_sqrt.rows() != y_spec.num_funcs)
        throw DimensionError("assemble_design: Gram matrix dimension does not match the response basis");

    IntegratedDesign out;
    out.n = static_cast<int>(samples.size());
    out.p = p;
    out.d = d;
    out.Jx = x_spec.num_funcs;
    out.Jy = y_spec.num_funcs;
    out.X.resize(out.n, static_cast<Eigen::Index>(out.Jx) * p);
    out.Y.resize(out.n, static_cast<Eigen::Index>(out.Jy) * d);

    const long n = out.n;
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) {
            out.X.row(i) = integrate_x(samples[static_cast<std::size_t>(i)], x_spec).transpose();
            out.Y.row(i) = integrate_y(samples[static_cast<std::size_t>(i)], y_spec, y_gram).transpose();
        }
    } else {
        for (long i = 0; i < n; ++i) {
            out.X.row(i) = integrate_x(samples[static_cast<std::size_t>(i)], x_spec).transpose();
            out.Y.row(i) = integrate_y(samples[static_cast<std::size_t>(i)], y_spec, y_gram).transpose();
        }
    }
    return out;
}

std::vector<Eigen::MatrixXd> deblock_columns(const Eigen::MatrixXd& M, int blocks) {
    if (blocks <= 0 || M.cols() % blocks != 0)
        throw DimensionError("deblock_columns: column count not divisible by block count");
    const Eigen::Index w = M.cols() / blocks;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(blocks));
    for (int j = 0; j < blocks; ++j) out.emplace_back(M.middleCols(j * w, w));
    return out;
}

Eigen::MatrixXd concat_columns(const std::vector<Eigen::MatrixXd>& blocks) {
    if (blocks.empty()) return {};
    const Eigen::Index rows = blocks.front().rows();
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != rows) throw DimensionError("concat_columns: blocks have different row counts");
        cols += b.cols();
    }
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.middleCols(c, b.cols()) = b;
        c += b.cols();
    }
    return out;
}

}  // namespace nrrr
