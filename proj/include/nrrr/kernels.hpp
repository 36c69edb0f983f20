#pragma once

#include <Eigen/Dense>

#include "nrrr/integrate.hpp"
#include "nrrr/parallel.hpp"

// Normal equations of the one-step (B, V) least-squares update:
//   min_V || vec(Z) - X_B vec(V) ||^2,   X_B = sum_j (B_j^T kron X_j),
// where Z = Y (I kron U) A, X_j is the j-th n x p block of X and B_j the
// j-th rx x r block of B.
namespace nrrr::kernels {

struct NormalEquations {
    Eigen::MatrixXd lhs;  // (p*rx) x (p*rx)
    Eigen::VectorXd rhs;  // p*rx
};

struct BvDesign {
    Eigen::MatrixXd XB;  // (n*r) x (p*rx)
    Eigen::VectorXd yB;  // vec(Z)
};

/// X_B and y_B written out explicitly.
BvDesign bv_design(const IntegratedDesign& design, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& B, int rx);

/// Serial reference: forms X_B explicitly and multiplies it out.
NormalEquations bv_normal_equations_reference(const IntegratedDesign& design, const Eigen::MatrixXd& Z,
                                              const Eigen::MatrixXd& B, int rx);

/// Block form using X^T X and X^T Z; output blocks are independent and are
/// filled in parallel under Exec::parallel. Each block's sum order is fixed,
/// so the result does not depend on the thread count.
NormalEquations bv_normal_equations(const Eigen::MatrixXd& XtX, const Eigen::MatrixXd& XtZ,
                                    const Eigen::MatrixXd& B, int p, int Jx, int rx,
                                    Exec exec = Exec::parallel);

}  // namespace nrrr::kernels
