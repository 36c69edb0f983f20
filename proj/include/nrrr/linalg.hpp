#pragma once

#include <random>
#include <utility>

#include <Eigen/Dense>

namespace nrrr::linalg {

/// Relative singular-value cutoff used for every generalized inverse.
inline constexpr double kPinvRelTol = 1e-10;

/// Truncated SVD of a design matrix, used as its generalized inverse.
/// Singular values <= kPinvRelTol * sigma_max are treated as zero.
class LeastSquares {
  public:
    explicit LeastSquares(const Eigen::MatrixXd& X);

    /// Minimum-norm least-squares solution X^+ Y.
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& Y) const;
    /// Projection of Y onto the column space of X.
    [[nodiscard]] Eigen::MatrixXd fitted(const Eigen::MatrixXd& Y) const;
    /// U_r^T Y, whose Gram matrix is Y^T P_X Y.
    [[nodiscard]] Eigen::MatrixXd reduced(const Eigen::MatrixXd& Y) const;
    [[nodiscard]] int rank() const { return rank_; }
    [[nodiscard]] double sigma_max() const { return sigma_max_; }

  private:
    Eigen::MatrixXd U_;
    Eigen::VectorXd s_inv_;
    Eigen::MatrixXd V_;
    int rank_ = 0;
    double sigma_max_ = 0.0;
};

int numerical_rank(const Eigen::MatrixXd& X, double rel_tol = kPinvRelTol);

/// Flips column signs so the largest-magnitude entry of each column is positive.
void fix_column_signs(Eigen::MatrixXd& M);

/// Leading k eigenvectors (descending eigenvalue) of a symmetric matrix, sign-fixed.
Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& S, int k);

/// Leading k left singular vectors of M. When k exceeds the thin rank, the
/// remaining columns come from the full U, so the result always has k
/// orthonormal columns as long as k <= M.rows().
Eigen::MatrixXd top_left_singular_vectors(const Eigen::MatrixXd& M, int k);

/// Thin QR with a nonnegative diagonal in R.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> qr_positive(const Eigen::MatrixXd& M);

/// Q factor of a Gaussian matrix.
Eigen::MatrixXd random_orthonormal(int rows, int cols, std::mt19937_64& rng);

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::mt19937_64& rng);

/// Solves the symmetric positive semidefinite system N x = b. Falls back to the
/// eigenvalue pseudo-inverse when Cholesky fails or N is numerically singular;
/// `singular` reports the fallback.
Eigen::VectorXd solve_psd(const Eigen::MatrixXd& N, const Eigen::VectorXd& b, bool& singular);

/// Minimum-norm solution of A x = b for a wide A with full row rank, via
/// x = A^T (A A^T)^{-1} b. Returns false when A A^T is numerically singular.
bool min_norm_wide(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, Eigen::VectorXd& x);

}  // namespace nrrr::linalg
