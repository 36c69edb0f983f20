#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nrrr/basis.hpp"
#include "nrrr/integrate.hpp"

namespace nrrr {

/// Ranks and iteration controls for the nested estimators.
struct NrrrConfig {
    int r = 1;   ///< local rank of the latent coefficient matrix
    int rx = 1;  ///< number of latent predictors
    int ry = 1;  ///< number of latent responses
    int max_iter = 100;
    double tol = 1e-4;          ///< relative change ||C_k+1 - C_k|| / ||C_k||
    double ridge_lambda = 0.0;  ///< 0 disables the ridge penalty
    int restarts = 0;           ///< extra random (U, V) starts on top of the RRR initializer
    std::uint64_t seed = 0;     ///< seeds the random restarts
};

/// Fitted nested reduced-rank model.
///
/// Layouts follow the design matrices: row j*ry + h of A is row j of the
/// (whitened) basis coefficients of latent response h; row j*rx + h of B is
/// row j of the basis coefficients of latent predictor h.
/// C = (I_Jx kron V) B A^T (I_Jy kron U^T).
struct NrrrFit {
    Eigen::MatrixXd U;  ///< d x ry
    Eigen::MatrixXd V;  ///< p x rx
    Eigen::MatrixXd A;  ///< (Jy*ry) x r
    Eigen::MatrixXd B;  ///< (Jx*rx) x r
    Eigen::MatrixXd C;  ///< (Jx*p) x (Jy*d)
    double sse = 0.0;   ///< ||Y - X C||_F^2 on the unpenalized data
    std::vector<double> objective_trace;
    bool converged = false;
    int iters = 0;
    int r = 0, rx = 0, ry = 0;
    double lambda = 0.0;
    int singular_bv_steps = 0;  ///< (B, V) updates that needed the pseudo-inverse
};

/// Reduced-rank regression fit: C = B A^T with orthonormal A.
struct RrrFit {
    Eigen::MatrixXd C;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    double sse = 0.0;
    int r = 0;
};

struct InitPair {
    Eigen::MatrixXd U0;
    Eigen::MatrixXd V0;
};

struct AbUpdate {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    double objective = 0.0;  ///< ||Y_L - X_L B A^T||_F^2
};

struct BvUpdate {
    Eigen::MatrixXd V;
    Eigen::MatrixXd B;
    bool singular = false;
};

/// Regression surfaces sampled on an (s, t) grid; value(k, l, is, it) is the
/// effect of predictor l at time s on response k at time t.
struct Surface {
    int d = 0;
    int p = 0;
    std::vector<double> s_grid;
    std::vector<double> t_grid;
    std::vector<double> values;

    [[nodiscard]] std::size_t index(int k, int l, std::size_t is, std::size_t it) const {
        return ((static_cast<std::size_t>(k) * static_cast<std::size_t>(p) + static_cast<std::size_t>(l)) *
                    s_grid.size() + is) * t_grid.size() + it;
    }
    [[nodiscard]] double at(int k, int l, std::size_t is, std::size_t it) const { return values[index(k, l, is, it)]; }
};

// ---------------------------------------------------------------------------
// Layout helpers

/// (I_J kron W) F: each of the J row blocks of F (W.cols() rows each) is premultiplied by W.
Eigen::MatrixXd block_premultiply(const Eigen::MatrixXd& W, const Eigen::MatrixXd& F, int J);

/// M (I_J kron W): each of the J column blocks of M is postmultiplied by W.
Eigen::MatrixXd block_postmultiply(const Eigen::MatrixXd& M, const Eigen::MatrixXd& W, int J);

/// Reorders rows from basis-major (row j*rank + h) to latent-major (row h*J + j).
Eigen::MatrixXd basis_major_to_latent_major(const Eigen::MatrixXd& M, int J, int rank);

/// Inverse of basis_major_to_latent_major.
Eigen::MatrixXd latent_major_to_basis_major(const Eigen::MatrixXd& M, int J, int rank);

/// C = (I_Jx kron V) B A^T (I_Jy kron U^T).
Eigen::MatrixXd assemble_coefficients(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& B, int Jx, int Jy);

/// ||Y - X C||_F^2.
double residual_ss(const IntegratedDesign& design, const Eigen::MatrixXd& C);

/// Appends sqrt(lambda) I to X and zeros to Y, so that the residual sum of
/// squares of the result is ||Y - XC||^2 + lambda ||C||^2.
IntegratedDesign ridge_augment(const IntegratedDesign& design, double lambda);

/// Throws ConfigError when the ranks or controls do not fit the design.
void validate_config(const IntegratedDesign& design, const NrrrConfig& config);

// ---------------------------------------------------------------------------
// Baselines

/// C = X^+ Y with the SVD pseudo-inverse.
Eigen::MatrixXd ols_fit(const IntegratedDesign& design);

/// Rank-r reduced-rank regression. Requires 1 <= r <= min(rank(X), Jy*d).
RrrFit rrr_fit(const IntegratedDesign& design, int r);

/// Rank-r ridge reduced-rank regression via row augmentation.
RrrFit rrs_fit(const IntegratedDesign& design, int r, double lambda);

/// Held-out residual sums of squares of RRR fits of rank 1..max_r trained on
/// `train` and evaluated on `val`; one eigendecomposition serves every rank.
std::vector<double> rrr_holdout_path(const IntegratedDesign& train, const IntegratedDesign& val, int max_r);

// ---------------------------------------------------------------------------
// Nested reduced-rank regression (blockwise coordinate descent)

InitPair nrrr_init(const IntegratedDesign& design, const NrrrConfig& config);

/// RRR of Y(I kron U) on X(I kron V).
AbUpdate update_ab(const IntegratedDesign& design, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, int r);

/// Orthogonal Procrustes step for U.
Eigen::MatrixXd update_u(const IntegratedDesign& design, const Eigen::MatrixXd& V, const Eigen::MatrixXd& A,
                         const Eigen::MatrixXd& B);

/// One-step least-squares update of V followed by QR re-orthonormalization.
BvUpdate update_bv(const IntegratedDesign& design, const Eigen::MatrixXd& U, const Eigen::MatrixXd& A,
                   const Eigen::MatrixXd& B);

NrrrFit nrrr_fit(const IntegratedDesign& design, const NrrrConfig& config);

/// NRRR with the ridge penalty config.ridge_lambda.
NrrrFit nrrs_fit(const IntegratedDesign& design, const NrrrConfig& config);

/// NRRR with ry = d and U fixed at the identity.
NrrrFit nrrr_x_fit(const IntegratedDesign& design, const NrrrConfig& config);

/// Wraps a plain coefficient matrix (OLS/RRR) as a fit with U = I_d, V = I_p.
NrrrFit fit_from_rrr(const RrrFit& rrr, const IntegratedDesign& design);

// ---------------------------------------------------------------------------
// Functional outputs

/// Full d x p surfaces C(s, t) from a coefficient matrix in design layout.
Surface coef_surface(const Eigen::MatrixXd& C, int p, int d, const BasisSpec& x_spec, const BasisSpec& y_spec,
                     const GramMatrix& y_gram, std::span<const double> s_grid, std::span<const double> t_grid);

/// Surfaces from the fitted factors: U (I kron Psi^T(t)) A* B*^T (I kron Phi(s)) V^T.
Surface coef_surface(const NrrrFit& fit, const BasisSpec& x_spec, const BasisSpec& y_spec, const GramMatrix& y_gram,
                     std::span<const double> s_grid, std::span<const double> t_grid);

/// d x rx surfaces relating response k to latent predictor h (the V-rotated predictors).
Surface latent_surface(const NrrrFit& fit, const BasisSpec& x_spec, const BasisSpec& y_spec, const GramMatrix& y_gram,
                       std::span<const double> s_grid, std::span<const double> t_grid);

/// Predicted response curves (|t_grid| x d per sample) from the samples' predictor curves.
std::vector<Eigen::MatrixXd> predict(const Eigen::MatrixXd& C, std::span<const FunctionalSample> samples,
                                     const BasisSpec& x_spec, const BasisSpec& y_spec, const GramMatrix& y_gram,
                                     std::span<const double> t_grid);

/// Predicted curves from integrated predictors (rows of X).
std::vector<Eigen::MatrixXd> predict_integrated(const Eigen::MatrixXd& C, const Eigen::MatrixXd& X, int d,
                                                const BasisSpec& y_spec, const GramMatrix& y_gram,
                                                std::span<const double> t_grid);

}  // namespace nrrr
