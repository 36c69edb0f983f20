#include "nrrr/kernels.hpp"

#include <vector>

#include "nrrr/errors.hpp"

namespace nrrr::kernels {

BvDesign bv_design(const IntegratedDesign& design, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& B, int rx) {
    const int n = design.n, p = design.p, Jx = design.Jx;
    const int r = static_cast<int>(B.cols());
    if (B.rows() != static_cast<Eigen::Index>(Jx) * rx || Z.rows() != n || Z.cols() != r)
        throw DimensionError("bv_design: shape mismatch");

    BvDesign out;
    out.XB = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * r, static_cast<Eigen::Index>(p) * rx);
    for (int j = 0; j < Jx; ++j) {
        const Eigen::MatrixXd Bj = B.middleRows(static_cast<Eigen::Index>(j) * rx, rx);
        const Eigen::MatrixXd Xj = design.x_block(j);
        // Kronecker product B_j^T (r x rx) kron X_j (n x p).
        for (int k = 0; k < r; ++k)
            for (int h = 0; h < rx; ++h)
                out.XB.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(h) * p, n, p) += Bj(h, k) * Xj;
    }
    out.yB.resize(static_cast<Eigen::Index>(n) * r);
    for (int k = 0; k < r; ++k) out.yB.segment(static_cast<Eigen::Index>(k) * n, n) = Z.col(k);
    return out;
}

NormalEquations bv_normal_equations_reference(const IntegratedDesign& design, const Eigen::MatrixXd& Z,
                                              const Eigen::MatrixXd& B, int rx) {
    const BvDesign d = bv_design(design, Z, B, rx);
    return {d.XB.transpose() * d.XB, d.XB.transpose() * d.yB};
}

NormalEquations bv_normal_equations(const Eigen::MatrixXd& XtX, const Eigen::MatrixXd& XtZ,
                                    const Eigen::MatrixXd& B, int p, int Jx, int rx, Exec exec) {
    const Eigen::Index r = B.cols();
    if (XtX.rows() != static_cast<Eigen::Index>(Jx) * p || B.rows() != static_cast<Eigen::Index>(Jx) * rx ||
        XtZ.rows() != XtX.rows() || XtZ.cols() != r)
        throw DimensionError("bv_normal_equations: shape mismatch");

    // W[h] is Jx x r with row j equal to row h of B_j.
    std::vector<Eigen::MatrixXd> W(static_cast<std::size_t>(rx), Eigen::MatrixXd(Jx, r));
    for (int h = 0; h < rx; ++h)
        for (int j = 0; j < Jx; ++j) W[static_cast<std::size_t>(h)].row(j) = B.row(static_cast<Eigen::Index>(j) * rx + h);

    const Eigen::Index dim = static_cast<Eigen::Index>(p) * rx;
    NormalEquations out{Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim)};

    // Upper-triangular block pairs (h <= h2).
    std::vector<std::pair<int, int>> pairs;
    for (int h = 0; h < rx; ++h)
        for (int h2 = h; h2 < rx; ++h2) pairs.emplace_back(h, h2);
    const long npairs = static_cast<long>(pairs.size());

    auto fill_block = [&](long idx) {
        const auto [h, h2] = pairs[static_cast<std::size_t>(idx)];
        const Eigen::MatrixXd coef = W[static_cast<std::size_t>(h)] * W[static_cast<std::size_t>(h2)].transpose();  // Jx x Jx
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(p, p);
        for (int j = 0; j < Jx; ++j)
            for (int j2 = 0; j2 < Jx; ++j2)
                block.noalias() += coef(j, j2) * XtX.block(static_cast<Eigen::Index>(j) * p, static_cast<Eigen::Index>(j2) * p, p, p);
        out.lhs.block(static_cast<Eigen::Index>(h) * p, static_cast<Eigen::Index>(h2) * p, p, p) = block;
        if (h != h2) out.lhs.block(static_cast<Eigen::Index>(h2) * p, static_cast<Eigen::Index>(h) * p, p, p) = block.transpose();
    };

    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long idx = 0; idx < npairs; ++idx) fill_block(idx);
    } else {
        for (long idx = 0; idx < npairs; ++idx) fill_block(idx);
    }

    // rhs = vec( sum_j (X^T Z)_j B_j^T ), column-major over the p x rx result.
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(p, rx);
    for (int j = 0; j < Jx; ++j)
        R.noalias() += XtZ.middleRows(static_cast<Eigen::Index>(j) * p, p) *
                       B.middleRows(static_cast<Eigen::Index>(j) * rx, rx).transpose();
    out.rhs = Eigen::Map<const Eigen::VectorXd>(R.data(), dim);
    return out;
}

}  // namespace nrrr::kernels
