#include "nrrr/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "nrrr/errors.hpp"

namespace nrrr::linalg {

LeastSquares::LeastSquares(const Eigen::MatrixXd& X) {
    if (!X.allFinite()) throw NumericalError("least squares: design contains NaN or Inf");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    sigma_max_ = s.size() > 0 ? s(0) : 0.0;
    const double cut = kPinvRelTol * sigma_max_;
    rank_ = 0;
    while (rank_ < s.size() && s(rank_) > cut && s(rank_) > 0.0) ++rank_;
    U_ = svd.matrixU().leftCols(rank_);
    V_ = svd.matrixV().leftCols(rank_);
    s_inv_ = s.head(rank_).cwiseInverse();
}

Eigen::MatrixXd LeastSquares::solve(const Eigen::MatrixXd& Y) const {
    return V_ * (s_inv_.asDiagonal() * (U_.transpose() * Y));
}

Eigen::MatrixXd LeastSquares::fitted(const Eigen::MatrixXd& Y) const { return U_ * (U_.transpose() * Y); }

Eigen::MatrixXd LeastSquares::reduced(const Eigen::MatrixXd& Y) const { return U_.transpose() * Y; }

int numerical_rank(const Eigen::MatrixXd& X, double rel_tol) {
    if (X.size() == 0) return 0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cut = rel_tol * s(0);
    int r = 0;
    while (r < s.size() && s(r) > cut && s(r) > 0.0) ++r;
    return r;
}

void fix_column_signs(Eigen::MatrixXd& M) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
        Eigen::Index arg = 0;
        M.col(c).cwiseAbs().maxCoeff(&arg);
        if (M(arg, c) < 0.0) M.col(c) *= -1.0;
    }
}

Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& S, int k) {
    if (k < 0 || k > S.rows()) throw DimensionError("top_eigenvectors: k out of range");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw NumericalError("top_eigenvectors: eigendecomposition failed");
    // Eigen returns ascending eigenvalues.
    Eigen::MatrixXd V = es.eigenvectors().rightCols(k).rowwise().reverse();
    fix_column_signs(V);
    return V;
}

Eigen::MatrixXd top_left_singular_vectors(const Eigen::MatrixXd& M, int k) {
    if (k < 0 || k > M.rows()) throw DimensionError("top_left_singular_vectors: k out of range");
    if (!M.allFinite()) throw NumericalError("top_left_singular_vectors: non-finite input");
    Eigen::MatrixXd U;
    if (k <= std::min(M.rows(), M.cols())) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU);
        U = svd.matrixU().leftCols(k);
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU);
        U = svd.matrixU().leftCols(k);
    }
    fix_column_signs(U);
    return U;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> qr_positive(const Eigen::MatrixXd& M) {
    const Eigen::Index m = M.rows();
    const Eigen::Index k = std::min(M.rows(), M.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
    Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < k; ++i) {
        if (R(i, i) < 0.0) {
            R.row(i) *= -1.0;
            Q.col(i) *= -1.0;
        }
    }
    return {Q, R};
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd G(rows, cols);
    // Fill column by column so the draw order is fixed.
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) G(r, c) = normal(rng);
    return G;
}

Eigen::MatrixXd random_orthonormal(int rows, int cols, std::mt19937_64& rng) {
    return qr_positive(gaussian_matrix(rows, cols, rng)).first;
}

Eigen::VectorXd solve_psd(const Eigen::MatrixXd& N, const Eigen::VectorXd& b, bool& singular) {
    singular = false;
    Eigen::LLT<Eigen::MatrixXd> llt(N);
    if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
        const double ratio = diag.minCoeff() / diag.maxCoeff();
        // Cholesky pivots are square roots of the eigenvalue scale.
        if (ratio * ratio > 1e-12) return llt.solve(b);
    }
    singular = true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(N);
    if (es.info() != Eigen::Success) throw NumericalError("solve_psd: eigendecomposition failed");
    const Eigen::VectorXd& lam = es.eigenvalues();
    // Eigenvalues of a normal matrix are squared singular values: the cutoff
    // 1e-12 * lambda_max keeps directions down to 1e-6 * sigma_max.
    const double cut = 1e-12 * std::max(lam.maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam(i) > cut && lam(i) > 0.0) inv(i) = 1.0 / lam(i);
    const Eigen::MatrixXd& Q = es.eigenvectors();
    return Q * (inv.asDiagonal() * (Q.transpose() * b));
}

bool min_norm_wide(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, Eigen::VectorXd& x) {
    const Eigen::MatrixXd K = A * A.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    const double ratio = diag.minCoeff() / diag.maxCoeff();
    if (!(ratio * ratio > 1e-12)) return false;
    x = A.transpose() * llt.solve(b);
    return true;
}

}  // namespace nrrr::linalg
