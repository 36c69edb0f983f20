#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "nrrr/errors.hpp"
#include "nrrr/integrate.hpp"
#include "support.hpp"

namespace nrrr {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::Gen;
using testing::linspace;

FunctionalSample sample_from(const std::vector<double>& sg, const MatrixXd& xv, const std::vector<double>& tg,
                             const MatrixXd& yv) {
    return FunctionalSample{sg, xv, tg, yv};
}

// Curves f(s) evaluated column-wise on a grid.
MatrixXd eval_curves(const std::vector<double>& grid, const std::vector<std::function<double(double)>>& fs) {
    MatrixXd M(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(fs.size()));
    for (std::size_t u = 0; u < grid.size(); ++u)
        for (std::size_t l = 0; l < fs.size(); ++l) M(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(l)) = fs[l](grid[u]);
    return M;
}

TEST(IntegrateX, ZeroCurveGivesZero) {
    const BasisSpec s = make_bspline(0, 1, 8, 3);
    const auto grid = linspace(0, 1, 40);
    const FunctionalSample x = sample_from(grid, MatrixXd::Zero(40, 3), grid, MatrixXd::Zero(40, 1));
    EXPECT_EQ(integrate_x(x, s).cwiseAbs().maxCoeff(), 0.0);
}

TEST(IntegrateX, ConstantWithIndicatorBasisTelescopes) {
    const BasisSpec s = make_bspline(0, 1, 1, 0);
    const auto grid = linspace(0.2, 1, 17);
    const double c = 2.5;
    const FunctionalSample x = sample_from(grid, MatrixXd::Constant(17, 1, c), grid, MatrixXd::Zero(17, 1));
    EXPECT_NEAR(integrate_x(x, s)(0), c * (1.0 - 0.2), 1e-14);
}

TEST(IntegrateX, RightEndpointRuleByHand) {
    // Two points: only the second contributes, weighted by the spacing.
    const BasisSpec s = make_bspline(0, 1, 1, 0);
    const std::vector<double> grid{0.25, 0.75};
    MatrixXd v(2, 1);
    v << 100.0, 3.0;
    const FunctionalSample x = sample_from(grid, v, grid, v);
    EXPECT_DOUBLE_EQ(integrate_x(x, s)(0), 3.0 * 0.5);
}

TEST(IntegrateX, SineMatchesQuadratureOracle) {
    const BasisSpec s = make_bspline(0, 1, 8, 3);
    const auto grid = linspace(0, 1, 1000);
    auto f = [](double t) { return std::sin(2 * std::numbers::pi * t); };
    const FunctionalSample x = sample_from(grid, eval_curves(grid, {f}), grid, MatrixXd::Zero(1000, 1));
    const VectorXd got = integrate_x(x, s);
    for (int j = 0; j < 8; ++j) {
        const double ref =
            testing::integrate_piecewise([&](double t) { return testing::cox_de_boor(s.knots, j, 3, t) * f(t); }, s);
        EXPECT_NEAR(got(j), ref, 2e-3);
    }
}

TEST(IntegrateX, LayoutIsBasisMajor) {
    const BasisSpec s = make_bspline(0, 1, 5, 2);
    const auto grid = linspace(0, 1, 30);
    Gen g(7);
    const MatrixXd xv = g.gaussian(30, 3);
    const FunctionalSample x = sample_from(grid, xv, grid, MatrixXd::Zero(30, 1));
    const VectorXd v = integrate_x(x, s);
    const MatrixXd Phi = eval_basis(s, grid);
    for (int j = 0; j < 5; ++j)
        for (int l = 0; l < 3; ++l) {
            double ref = 0.0;
            for (int u = 1; u < 30; ++u) ref += Phi(u, j) * xv(u, l) * (grid[u] - grid[u - 1]);
            EXPECT_NEAR(v(j * 3 + l), ref, 1e-14);
        }
}

TEST(IntegrateX, LinearityProperty) {
    Gen g(11);
    const BasisSpec s = make_bspline(0, 1, 8, 3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto grid = g.sorted_points(g.integer(2, 80), 0, 1);
        const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
        const MatrixXd f = g.gaussian(m, 2), h = g.gaussian(m, 2);
        const double a = g.normal(), b = g.normal();
        const VectorXd lhs = integrate_x(sample_from(grid, a * f + b * h, grid, f), s);
        const VectorXd rhs =
            a * integrate_x(sample_from(grid, f, grid, f), s) + b * integrate_x(sample_from(grid, h, grid, f), s);
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13 * (1.0 + rhs.cwiseAbs().maxCoeff()));
    }
}

TEST(IntegrateX, GridRefinementApproachesOracle) {
    const BasisSpec s = make_bspline(0, 1, 8, 3);
    auto f = [](double t) { return std::exp(t) * std::cos(3 * t); };
    VectorXd ref(8);
    for (int j = 0; j < 8; ++j)
        ref(j) = testing::integrate_piecewise([&](double t) { return testing::cox_de_boor(s.knots, j, 3, t) * f(t); }, s);
    double prev = std::numeric_limits<double>::infinity();
    for (int g : {50, 100, 200}) {
        const auto grid = linspace(0, 1, g);
        const VectorXd got =
            integrate_x(sample_from(grid, eval_curves(grid, {f}), grid, MatrixXd::Zero(g, 1)), s);
        const double err = (got - ref).norm();
        EXPECT_LT(err, prev) << "g=" << g;
        prev = err;
    }
}

TEST(IntegrateX, Errors) {
    const BasisSpec s = make_bspline(0, 1, 8, 3);
    const std::vector<double> dup{0.0, 0.5, 0.5, 1.0};
    EXPECT_THROW(integrate_x(sample_from(dup, MatrixXd::Ones(4, 1), dup, MatrixXd::Ones(4, 1)), s), DomainError);
    const std::vector<double> outside{0.0, 0.5, 1.5};
    EXPECT_THROW(integrate_x(sample_from(outside, MatrixXd::Ones(3, 1), outside, MatrixXd::Ones(3, 1)), s),
                 DomainError);
    const std::vector<double> single{0.5};
    EXPECT_THROW(integrate_x(sample_from(single, MatrixXd::Ones(1, 1), single, MatrixXd::Ones(1, 1)), s), DomainError);
    const std::vector<double> ok{0.0, 1.0};
    EXPECT_THROW(integrate_x(sample_from(ok, MatrixXd::Ones(3, 1), ok, MatrixXd::Ones(2, 1)), s), DimensionError);
    MatrixXd bad = MatrixXd::Ones(2, 1);
    bad(1, 0) = std::nan("");
    EXPECT_THROW(integrate_x(sample_from(ok, bad, ok, MatrixXd::Ones(2, 1)), s), DomainError);
}

TEST(IntegrateY, ZeroAndIdentityTransform) {
    const BasisSpec s1 = make_bspline(0, 1, 1, 0);
    const GramMatrix G1 = gram(s1);
    const auto grid = linspace(0, 1, 21);
    Gen g(5);
    const MatrixXd yv = g.gaussian(21, 2);
    const FunctionalSample y = sample_from(grid, MatrixXd::Zero(21, 1), grid, yv);
    const VectorXd got = integrate_y(y, s1, G1);
    for (int k = 0; k < 2; ++k) {
        double raw = 0.0;
        for (int v = 1; v < 21; ++v) raw += yv(v, k) * (grid[v] - grid[v - 1]);
        EXPECT_NEAR(got(k), raw, 1e-14);
    }
    const BasisSpec s8 = make_bspline(0, 1, 8, 3);
    EXPECT_EQ(integrate_y(sample_from(grid, MatrixXd::Zero(21, 1), grid, MatrixXd::Zero(21, 2)), s8, gram(s8))
                  .cwiseAbs()
                  .maxCoeff(),
              0.0);
    EXPECT_THROW(integrate_y(y, s8, G1), DimensionError);
}

// Curves inside the basis span whose first two and last two coefficients
// vanish: the integrands and their first derivatives vanish at both ends, so
// the right-endpoint sum matches the trapezoid rule and its h^2 error term
// cancels. Reconstruction Psi^T J^{-1/2} y then recovers the curve.
TEST(IntegrateY, InSpanRoundTrip) {
    const BasisSpec s = make_bspline(0, 1, 8, 3);
    const GramMatrix G = gram(s);
    const auto grid = linspace(0, 1, 2000);
    const MatrixXd Psi = eval_basis(s, grid);
    Gen g(9);
    MatrixXd coef = MatrixXd::Zero(8, 2);
    coef.middleRows(2, 4) = g.gaussian(4, 2);
    const MatrixXd yv = Psi * coef;
    const VectorXd y = integrate_y(sample_from(grid, MatrixXd::Zero(2000, 1), grid, yv), s, G);
    MatrixXd W(8, 2);
    for (int j = 0; j < 8; ++j)
        for (int k = 0; k < 2; ++k) W(j, k) = y(j * 2 + k);
    const MatrixXd recon = Psi * G.J_inv_sqrt * W;
    EXPECT_LT((recon - yv).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(AssembleDesign, SingleAndRepeatedSamples) {
    const BasisSpec xs = make_bspline(0, 1, 6, 3), ys = make_bspline(0, 1, 5, 2);
    const GramMatrix yg = gram(ys);
    Gen g(3);
    const auto grid = linspace(0, 1, 25);
    const FunctionalSample a = sample_from(grid, g.gaussian(25, 4), grid, g.gaussian(25, 3));
    const std::vector<FunctionalSample> one{a};
    const IntegratedDesign D1 = assemble_design(one, xs, ys, yg);
    EXPECT_EQ(D1.X.rows(), 1);
    EXPECT_EQ((D1.X.row(0).transpose() - integrate_x(a, xs)).norm(), 0.0);
    EXPECT_EQ((D1.Y.row(0).transpose() - integrate_y(a, ys, yg)).norm(), 0.0);
    const std::vector<FunctionalSample> three{a, a, a};
    const IntegratedDesign D3 = assemble_design(three, xs, ys, yg);
    EXPECT_EQ(D3.X.cols(), 24);
    EXPECT_EQ(D3.Y.cols(), 15);
    for (int i = 1; i < 3; ++i) {
        EXPECT_EQ((D3.X.row(i) - D3.X.row(0)).norm(), 0.0);
        EXPECT_EQ((D3.Y.row(i) - D3.Y.row(0)).norm(), 0.0);
    }
    EXPECT_EQ(D3.n, 3);
    EXPECT_EQ(D3.p, 4);
    EXPECT_EQ(D3.d, 3);
}

TEST(AssembleDesign, PerSubjectGridsAndErrors) {
    const BasisSpec xs = make_bspline(0, 1, 6, 3), ys = make_bspline(0, 1, 5, 2);
    const GramMatrix yg = gram(ys);
    Gen g(4);
    std::vector<FunctionalSample> samples;
    for (int i = 0; i < 5; ++i) {
        auto sg = g.sorted_points(20 + i, 0, 1), tg = g.sorted_points(15 + 2 * i, 0, 1);
        samples.push_back(sample_from(sg, g.gaussian(20 + i, 2), tg, g.gaussian(15 + 2 * i, 3)));
    }
    const IntegratedDesign D = assemble_design(samples, xs, ys, yg);
    for (int i = 0; i < 5; ++i)
        EXPECT_LT((D.X.row(i).transpose() - integrate_x(samples[static_cast<std::size_t>(i)], xs)).norm(), 1e-15);

    samples[2].x_vals = g.gaussian(samples[2].x_vals.rows(), 3);
    EXPECT_THROW(assemble_design(samples, xs, ys, yg), DimensionError);
    EXPECT_THROW(assemble_design(std::vector<FunctionalSample>{}, xs, ys, yg), DimensionError);
}

TEST(AssembleDesign, SerialAndParallelAgreeBitForBit) {
    const BasisSpec xs = make_bspline(0, 1, 8, 3), ys = make_bspline(0, 1, 8, 3);
    const GramMatrix yg = gram(ys);
    Gen g(12);
    std::vector<FunctionalSample> samples;
    const auto grid = linspace(0, 1, 60);
    for (int i = 0; i < 64; ++i) samples.push_back(sample_from(grid, g.gaussian(60, 5), grid, g.gaussian(60, 4)));
    const IntegratedDesign a = assemble_design(samples, xs, ys, yg, Exec::serial);
    for (int threads : {1, 2, 4}) {
        ThreadScope scope(threads);
        const IntegratedDesign b = assemble_design(samples, xs, ys, yg, Exec::parallel);
        EXPECT_TRUE(a.X == b.X);
        EXPECT_TRUE(a.Y == b.Y);
    }
}

TEST(BlockLayout, DeblockConcatRoundTrip) {
    Gen g(13);
    for (int trial = 0; trial < 30; ++trial) {
        const int blocks = g.integer(1, 9), width = g.integer(1, 6);
        const MatrixXd M = g.gaussian(g.integer(1, 12), blocks * width);
        const auto parts = deblock_columns(M, blocks);
        ASSERT_EQ(static_cast<int>(parts.size()), blocks);
        for (int j = 0; j < blocks; ++j) EXPECT_TRUE(parts[static_cast<std::size_t>(j)] == M.middleCols(j * width, width));
        EXPECT_TRUE(concat_columns(parts) == M);
    }
    EXPECT_THROW(deblock_columns(MatrixXd::Zero(2, 5), 2), DimensionError);
}

}  // namespace
}  // namespace nrrr
