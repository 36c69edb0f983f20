#include "nrrr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "nrrr/errors.hpp"
#include "nrrr/kernels.hpp"
#include "nrrr/linalg.hpp"

namespace nrrr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

Index idx(int v) { return static_cast<Index>(v); }

// Top-r right singular vectors of G (rows x q), sign-fixed. Columns beyond the
// rank of G are completed from the full basis.
MatrixXd top_right_singular_vectors(const MatrixXd& G, int r) {
    return linalg::top_left_singular_vectors(G.transpose(), r);
}

struct RrrCore {
    MatrixXd A;
    MatrixXd B;
};

RrrCore rrr_core(const linalg::LeastSquares& ls, const MatrixXd& Y, int r) {
    RrrCore out;
    out.A = top_right_singular_vectors(ls.reduced(Y), r);
    out.B = ls.solve(Y * out.A);
    return out;
}

void check_design(const IntegratedDesign& design, const char* who) {
    if (design.n <= 0 || design.X.rows() != design.n || design.Y.rows() != design.n ||
        design.X.cols() != idx(design.Jx) * design.p || design.Y.cols() != idx(design.Jy) * design.d)
        throw DimensionError(std::string(who) + ": design dimensions are inconsistent");
}

double relative_change(const MatrixXd& C, const MatrixXd& prev) {
    const double denom = prev.norm();
    const double diff = (C - prev).norm();
    if (denom == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / denom;
}

struct Run {
    NrrrFit fit;
    double objective = std::numeric_limits<double>::infinity();
};

// Algorithm iterations from a given (U, V). `fix_u` skips the U step.
Run run_from(const IntegratedDesign& design, const NrrrConfig& cfg, MatrixXd U, MatrixXd V, bool fix_u) {
    Run best;
    NrrrFit cur;
    cur.r = cfg.r;
    cur.rx = cfg.rx;
    cur.ry = cfg.ry;
    MatrixXd C_prev;
    bool have_prev = false;

    for (int k = 1; k <= cfg.max_iter; ++k) {
        AbUpdate ab = update_ab(design, U, V, cfg.r);
        if (!fix_u) U = update_u(design, V, ab.A, ab.B);
        BvUpdate bv = update_bv(design, U, ab.A, ab.B);
        if (bv.singular) ++cur.singular_bv_steps;
        V = std::move(bv.V);

        cur.U = U;
        cur.V = V;
        cur.A = std::move(ab.A);
        cur.B = std::move(bv.B);
        cur.C = assemble_coefficients(cur.U, cur.V, cur.A, cur.B, design.Jx, design.Jy);
        const double obj = residual_ss(design, cur.C);
        cur.objective_trace.push_back(obj);
        cur.iters = k;

        const bool done = have_prev && relative_change(cur.C, C_prev) <= cfg.tol;
        if (obj <= best.objective || done) {
            best.fit = cur;
            best.objective = obj;
        }
        if (done) {
            best.fit.converged = true;
            break;
        }
        C_prev = cur.C;
        have_prev = true;
    }
    // Keep the full trace and counters on the returned iterate.
    best.fit.objective_trace = cur.objective_trace;
    best.fit.iters = cur.iters;
    best.fit.singular_bv_steps = cur.singular_bv_steps;
    return best;
}

NrrrFit fit_nested(const IntegratedDesign& design, const NrrrConfig& cfg, bool fix_u) {
    check_design(design, "nrrr_fit");
    validate_config(design, cfg);

    // The ridge problem is plain NRRR on the augmented rows.
    const bool ridge = cfg.ridge_lambda > 0.0;
    const IntegratedDesign work = ridge ? ridge_augment(design, cfg.ridge_lambda) : design;

    InitPair init = nrrr_init(work, cfg);
    if (fix_u) init.U0 = MatrixXd::Identity(design.d, design.d);
    Run best = run_from(work, cfg, init.U0, init.V0, fix_u);

    std::mt19937_64 rng(cfg.seed);
    for (int s = 0; s < cfg.restarts; ++s) {
        MatrixXd U0 = fix_u ? MatrixXd::Identity(design.d, design.d) : linalg::random_orthonormal(design.d, cfg.ry, rng);
        MatrixXd V0 = linalg::random_orthonormal(design.p, cfg.rx, rng);
        Run run = run_from(work, cfg, std::move(U0), std::move(V0), fix_u);
        if (run.objective < best.objective) best = std::move(run);
    }

    NrrrFit out = std::move(best.fit);
    out.lambda = cfg.ridge_lambda;
    out.sse = ridge ? residual_ss(design, out.C) : best.objective;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Layout helpers

MatrixXd block_premultiply(const MatrixXd& W, const MatrixXd& F, int J) {
    if (F.rows() != idx(J) * W.cols()) throw DimensionError("block_premultiply: row count mismatch");
    MatrixXd out(idx(J) * W.rows(), F.cols());
    for (int j = 0; j < J; ++j)
        out.middleRows(idx(j) * W.rows(), W.rows()).noalias() = W * F.middleRows(idx(j) * W.cols(), W.cols());
    return out;
}

MatrixXd block_postmultiply(const MatrixXd& M, const MatrixXd& W, int J) {
    if (M.cols() != idx(J) * W.rows()) throw DimensionError("block_postmultiply: column count mismatch");
    MatrixXd out(M.rows(), idx(J) * W.cols());
    for (int j = 0; j < J; ++j)
        out.middleCols(idx(j) * W.cols(), W.cols()).noalias() = M.middleCols(idx(j) * W.rows(), W.rows()) * W;
    return out;
}

MatrixXd basis_major_to_latent_major(const MatrixXd& M, int J, int rank) {
    if (M.rows() != idx(J) * rank) throw DimensionError("basis_major_to_latent_major: row count mismatch");
    MatrixXd out(M.rows(), M.cols());
    for (int j = 0; j < J; ++j)
        for (int h = 0; h < rank; ++h) out.row(idx(h) * J + j) = M.row(idx(j) * rank + h);
    return out;
}

MatrixXd latent_major_to_basis_major(const MatrixXd& M, int J, int rank) {
    if (M.rows() != idx(J) * rank) throw DimensionError("latent_major_to_basis_major: row count mismatch");
    MatrixXd out(M.rows(), M.cols());
    for (int j = 0; j < J; ++j)
        for (int h = 0; h < rank; ++h) out.row(idx(j) * rank + h) = M.row(idx(h) * J + j);
    return out;
}

MatrixXd assemble_coefficients(const MatrixXd& U, const MatrixXd& V, const MatrixXd& A, const MatrixXd& B, int Jx,
                               int Jy) {
    if (A.cols() != B.cols()) throw DimensionError("assemble_coefficients: A and B ranks differ");
    const MatrixXd left = block_premultiply(V, B, Jx);   // (Jx p) x r
    const MatrixXd right = block_premultiply(U, A, Jy);  // (Jy d) x r
    return left * right.transpose();
}

double residual_ss(const IntegratedDesign& design, const MatrixXd& C) {
    if (C.rows() != design.X.cols() || C.cols() != design.Y.cols())
        throw DimensionError("residual_ss: coefficient shape does not match the design");
    return (design.Y - design.X * C).squaredNorm();
}

IntegratedDesign ridge_augment(const IntegratedDesign& design, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge lambda must be finite and >= 0");
    IntegratedDesign out = design;
    const Index q = design.X.cols();
    out.X.conservativeResize(design.X.rows() + q, Eigen::NoChange);
    out.X.bottomRows(q) = std::sqrt(lambda) * MatrixXd::Identity(q, q);
    out.Y.conservativeResize(design.Y.rows() + q, Eigen::NoChange);
    out.Y.bottomRows(q).setZero();
    out.n = static_cast<int>(out.X.rows());
    return out;
}

void validate_config(const IntegratedDesign& design, const NrrrConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (c.r < 1 || c.rx < 1 || c.ry < 1) fail("ranks must be positive");
    if (c.rx > design.p) fail("rx = " + std::to_string(c.rx) + " exceeds p = " + std::to_string(design.p));
    if (c.ry > design.d) fail("ry = " + std::to_string(c.ry) + " exceeds d = " + std::to_string(design.d));
    const int rmax = std::min(design.Jy * c.ry, design.Jx * c.rx);
    if (c.r > rmax) fail("r = " + std::to_string(c.r) + " exceeds min(Jy*ry, Jx*rx) = " + std::to_string(rmax));
    if (c.max_iter < 1) fail("max_iter must be positive");
    if (!(c.tol > 0.0)) fail("tol must be positive");
    if (!(c.ridge_lambda >= 0.0) || !std::isfinite(c.ridge_lambda)) fail("ridge lambda must be finite and >= 0");
    if (c.restarts < 0) fail("restarts must be nonnegative");
}

// ---------------------------------------------------------------------------
// Baselines

MatrixXd ols_fit(const IntegratedDesign& design) {
    check_design(design, "ols_fit");
    return linalg::LeastSquares(design.X).solve(design.Y);
}

RrrFit rrr_fit(const IntegratedDesign& design, int r) {
    check_design(design, "rrr_fit");
    const linalg::LeastSquares ls(design.X);
    const int rmax = std::min(ls.rank(), static_cast<int>(design.Y.cols()));
    if (r < 1 || r > rmax)
        throw ConfigError("rrr_fit: r = " + std::to_string(r) + " outside [1, " + std::to_string(rmax) + "]");
    RrrCore core = rrr_core(ls, design.Y, r);
    RrrFit out;
    out.C = core.B * core.A.transpose();
    out.A = std::move(core.A);
    out.B = std::move(core.B);
    out.sse = residual_ss(design, out.C);
    out.r = r;
    return out;
}

RrrFit rrs_fit(const IntegratedDesign& design, int r, double lambda) {
    check_design(design, "rrs_fit");
    if (lambda == 0.0) return rrr_fit(design, r);
    RrrFit out = rrr_fit(ridge_augment(design, lambda), r);
    out.sse = residual_ss(design, out.C);
    return out;
}

std::vector<double> rrr_holdout_path(const IntegratedDesign& train, const IntegratedDesign& val, int max_r) {
    check_design(train, "rrr_holdout_path");
    if (val.X.cols() != train.X.cols() || val.Y.cols() != train.Y.cols())
        throw DimensionError("rrr_holdout_path: training and validation designs differ in shape");
    const linalg::LeastSquares ls(train.X);
    const int rmax = std::min({max_r, ls.rank(), static_cast<int>(train.Y.cols())});
    if (rmax < 1) throw ConfigError("rrr_holdout_path: no admissible rank");
    const MatrixXd A = top_right_singular_vectors(ls.reduced(train.Y), rmax);
    const MatrixXd P = val.X * ls.solve(train.Y * A);  // n_val x rmax

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(rmax));
    MatrixXd R = val.Y;
    for (int h = 0; h < rmax; ++h) {
        R.noalias() -= P.col(h) * A.col(h).transpose();
        out.push_back(R.squaredNorm());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nested estimator

InitPair nrrr_init(const IntegratedDesign& design, const NrrrConfig& config) {
    validate_config(design, config);
    const linalg::LeastSquares ls(design.X);
    const int r = std::min({config.r, ls.rank(), static_cast<int>(design.Y.cols())});
    if (r < 1) throw NumericalError("nrrr_init: design matrix has rank zero");
    const RrrCore core = rrr_core(ls, design.Y, r);

    // Side-by-side blocks (B_1, ..., B_Jx), each p x r, and likewise for A.
    MatrixXd Bwide(design.p, idx(design.Jx) * r);
    for (int j = 0; j < design.Jx; ++j)
        Bwide.middleCols(idx(j) * r, r) = core.B.middleRows(idx(j) * design.p, design.p);
    MatrixXd Awide(design.d, idx(design.Jy) * r);
    for (int j = 0; j < design.Jy; ++j)
        Awide.middleCols(idx(j) * r, r) = core.A.middleRows(idx(j) * design.d, design.d);

    return {linalg::top_left_singular_vectors(Awide, config.ry), linalg::top_left_singular_vectors(Bwide, config.rx)};
}

AbUpdate update_ab(const IntegratedDesign& design, const MatrixXd& U, const MatrixXd& V, int r) {
    if (U.rows() != design.d || V.rows() != design.p) throw DimensionError("update_ab: U or V has the wrong row count");
    const MatrixXd YL = block_postmultiply(design.Y, U, design.Jy);
    const MatrixXd XL = block_postmultiply(design.X, V, design.Jx);
    if (r < 1 || r > std::min(YL.cols(), XL.cols())) throw ConfigError("update_ab: rank out of range");
    const linalg::LeastSquares ls(XL);
    RrrCore core = rrr_core(ls, YL, r);
    AbUpdate out;
    out.objective = (YL - XL * core.B * core.A.transpose()).squaredNorm();
    out.A = std::move(core.A);
    out.B = std::move(core.B);
    return out;
}

MatrixXd update_u(const IntegratedDesign& design, const MatrixXd& V, const MatrixXd& A, const MatrixXd& B) {
    const Index ry = A.rows() / design.Jy;
    if (A.rows() != idx(design.Jy) * ry || B.rows() != idx(design.Jx) * V.cols() || A.cols() != B.cols())
        throw DimensionError("update_u: factor shapes are inconsistent");
    const MatrixXd F = block_postmultiply(design.X, V, design.Jx) * B;  // n x r
    MatrixXd M = MatrixXd::Zero(design.d, ry);
    for (int j = 0; j < design.Jy; ++j)
        M.noalias() += design.y_block(j).transpose() * (F * A.middleRows(idx(j) * ry, ry).transpose());
    if (!M.allFinite()) throw NumericalError("update_u: non-finite cross-product matrix");
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().transpose();
}

BvUpdate update_bv(const IntegratedDesign& design, const MatrixXd& U, const MatrixXd& A, const MatrixXd& B) {
    const int ry = static_cast<int>(U.cols());
    const int rx = static_cast<int>(B.rows() / design.Jx);
    if (A.rows() != idx(design.Jy) * ry || B.rows() != idx(design.Jx) * rx || A.cols() != B.cols())
        throw DimensionError("update_bv: factor shapes are inconsistent");
    const MatrixXd Z = block_postmultiply(design.Y, U, design.Jy) * A;  // n x r

    BvUpdate out;
    Eigen::VectorXd v;
    if (static_cast<Index>(design.n) * A.cols() < static_cast<Index>(design.p) * rx) {
        // Fewer equations than unknowns: the normal equations are singular by
        // construction, and the minimum-norm solution comes from the smaller
        // row-space system.
        out.singular = true;
        const kernels::BvDesign bd = kernels::bv_design(design, Z, B, rx);
        if (!linalg::min_norm_wide(bd.XB, bd.yB, v)) {
            bool unused = false;
            v = linalg::solve_psd(bd.XB.transpose() * bd.XB, bd.XB.transpose() * bd.yB, unused);
        }
    } else {
        const MatrixXd XtX = design.X.transpose() * design.X;
        const MatrixXd XtZ = design.X.transpose() * Z;
        const kernels::NormalEquations ne = kernels::bv_normal_equations(XtX, XtZ, B, design.p, design.Jx, rx);
        v = linalg::solve_psd(ne.lhs, ne.rhs, out.singular);
    }
    const MatrixXd Vt = Eigen::Map<const MatrixXd>(v.data(), design.p, rx);
    auto [Q, R] = linalg::qr_positive(Vt);
    out.V = std::move(Q);
    out.B.resize(B.rows(), B.cols());
    for (int j = 0; j < design.Jx; ++j) out.B.middleRows(idx(j) * rx, rx).noalias() = R * B.middleRows(idx(j) * rx, rx);
    return out;
}

NrrrFit nrrr_fit(const IntegratedDesign& design, const NrrrConfig& config) {
    return fit_nested(design, config, false);
}

NrrrFit nrrs_fit(const IntegratedDesign& design, const NrrrConfig& config) {
    return fit_nested(design, config, false);
}

NrrrFit nrrr_x_fit(const IntegratedDesign& design, const NrrrConfig& config) {
    NrrrConfig cfg = config;
    cfg.ry = design.d;
    return fit_nested(design, cfg, true);
}

NrrrFit fit_from_rrr(const RrrFit& rrr, const IntegratedDesign& design) {
    NrrrFit out;
    out.U = MatrixXd::Identity(design.d, design.d);
    out.V = MatrixXd::Identity(design.p, design.p);
    out.A = rrr.A;
    out.B = rrr.B;
    out.C = rrr.C;
    out.sse = rrr.sse;
    out.objective_trace = {rrr.sse};
    out.converged = true;
    out.iters = 0;
    out.r = rrr.r;
    out.rx = design.p;
    out.ry = design.d;
    return out;
}

// ---------------------------------------------------------------------------
// Functional outputs

namespace {

void check_bases(const BasisSpec& x_spec, const BasisSpec& y_spec, const GramMatrix& y_gram, int Jx, int Jy) {
    if (x_spec.num_funcs != Jx || y_spec.num_funcs != Jy)
        throw DimensionError("basis sizes do not match the coefficient layout");
    if (y_gram.J_inv_sqrt.rows() != Jy || y_gram.J_inv_sqrt.cols() != Jy)
        throw DimensionError("response Gram matrix does not match the response basis");
}

Surface make_surface(int d, int p, std::span<const double> s_grid, std::span<const double> t_grid) {
    Surface out;
    out.d = d;
    out.p = p;
    out.s_grid.assign(s_grid.begin(), s_grid.end());
    out.t_grid.assign(t_grid.begin(), t_grid.end());
    out.values.assign(static_cast<std::size_t>(d) * static_cast<std::size_t>(p) * s_grid.size() * t_grid.size(), 0.0);
    return out;
}

// Rows of the whitened response basis J^{-1/2} Psi(t), one per t.
MatrixXd whitened_response_basis(const BasisSpec& y_spec, const GramMatrix& y_gram, std::span<const double> t_grid) {
    return eval_basis(y_spec, t_grid) * y_gram.J_inv_sqrt;  // J^{-1/2} is symmetric
}

}  // namespace

Surface coef_surface(const MatrixXd& C, int p, int d, const BasisSpec& x_spec, const BasisSpec& y_spec,
                     const GramMatrix& y_gram, std::span<const double> s_grid, std::span<const double> t_grid) {
    const int Jx = x_spec.num_funcs, Jy = y_spec.num_funcs;
    if (C.rows() != idx(Jx) * p || C.cols() != idx(Jy) * d)
        throw DimensionError("coef_surface: coefficient matrix shape does not match the bases");
    check_bases(x_spec, y_spec, y_gram, Jx, Jy);
    const MatrixXd Phi = eval_basis(x_spec, s_grid);                        // ns x Jx
    const MatrixXd Psi = whitened_response_basis(y_spec, y_gram, t_grid);  // nt x Jy

    Surface out = make_surface(d, p, s_grid, t_grid);
    MatrixXd Ckl(Jx, Jy);
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < p; ++l) {
            for (int jx = 0; jx < Jx; ++jx)
                for (int jy = 0; jy < Jy; ++jy) Ckl(jx, jy) = C(idx(jx) * p + l, idx(jy) * d + k);
            const MatrixXd S = Phi * Ckl * Psi.transpose();  // ns x nt
            for (Index is = 0; is < S.rows(); ++is)
                for (Index it = 0; it < S.cols(); ++it)
                    out.values[out.index(k, l, static_cast<std::size_t>(is), static_cast<std::size_t>(it))] = S(is, it);
        }
    return out;
}

namespace {

// Latent surfaces G(h, h2)(s, t) = a_h(t)^T b_h2(s), returned as ry*rx
// matrices of size ns x nt (index h*rx + h2).
std::vector<MatrixXd> latent_pairs(const NrrrFit& fit, const BasisSpec& x_spec, const BasisSpec& y_spec,
                                   const GramMatrix& y_gram, std::span<const double> s_grid,
                                   std::span<const double> t_grid) {
    const int Jx = x_spec.num_funcs, Jy = y_spec.num_funcs;
    const int rx = static_cast<int>(fit.V.cols()), ry = static_cast<int>(fit.U.cols());
    if (fit.B.rows() != idx(Jx) * rx || fit.A.rows() != idx(Jy) * ry)
        throw DimensionError("coef_surface: fit factors do not match the bases");
    check_bases(x_spec, y_spec, y_gram, Jx, Jy);
    const MatrixXd Phi = eval_basis(x_spec, s_grid);
    const MatrixXd Psi = whitened_response_basis(y_spec, y_gram, t_grid);
    const MatrixXd Bl = basis_major_to_latent_major(fit.B, Jx, rx);  // block h: Jx x r
    const MatrixXd Al = basis_major_to_latent_major(fit.A, Jy, ry);

    std::vector<MatrixXd> out;
    out.reserve(static_cast<std::size_t>(rx) * static_cast<std::size_t>(ry));
    for (int h = 0; h < ry; ++h) {
        const MatrixXd a = Psi * Al.middleRows(idx(h) * Jy, Jy);  // nt x r
        for (int h2 = 0; h2 < rx; ++h2) {
            const MatrixXd b = Phi * Bl.middleRows(idx(h2) * Jx, Jx);  // ns x r
            out.push_back(b * a.transpose());
        }
    }
    return out;
}

}  // namespace

Surface coef_surface(const NrrrFit& fit, const BasisSpec& x_spec, const BasisSpec& y_spec, const GramMatrix& y_gram,
                     std::span<const double> s_grid, std::span<const double> t_grid) {
    const int d = static_cast<int>(fit.U.rows()), p = static_cast<int>(fit.V.rows());
    const int rx = static_cast<int>(fit.V.cols()), ry = static_cast<int>(fit.U.cols());
    const std::vector<MatrixXd> G = latent_pairs(fit, x_spec, y_spec, y_gram, s_grid, t_grid);

    Surface out = make_surface(d, p, s_grid, t_grid);
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < p; ++l) {
            MatrixXd S = MatrixXd::Zero(idx(static_cast<int>(s_grid.size())), idx(static_cast<int>(t_grid.size())));
            for (int h = 0; h < ry; ++h)
                for (int h2 = 0; h2 < rx; ++h2) {
                    const double w = fit.U(k, h) * fit.V(l, h2);
                    if (w != 0.0) S += w * G[static_cast<std::size_t>(h) * static_cast<std::size_t>(rx) + static_cast<std::size_t>(h2)];
                }
            for (Index is = 0; is < S.rows(); ++is)
                for (Index it = 0; it < S.cols(); ++it)
                    out.values[out.index(k, l, static_cast<std::size_t>(is), static_cast<std::size_t>(it))] = S(is, it);
        }
    return out;
}

Surface latent_surface(const NrrrFit& fit, const BasisSpec& x_spec, const BasisSpec& y_spec, const GramMatrix& y_gram,
                       std::span<const double> s_grid, std::span<const double> t_grid) {
    const int d = static_cast<int>(fit.U.rows());
    const int rx = static_cast<int>(fit.V.cols()), ry = static_cast<int>(fit.U.cols());
    const std::vector<MatrixXd> G = latent_pairs(fit, x_spec, y_spec, y_gram, s_grid, t_grid);

    Surface out = make_surface(d, rx, s_grid, t_grid);
    for (int k = 0; k < d; ++k)
        for (int h2 = 0; h2 < rx; ++h2) {
            MatrixXd S = MatrixXd::Zero(idx(static_cast<int>(s_grid.size())), idx(static_cast<int>(t_grid.size())));
            for (int h = 0; h < ry; ++h)
                S += fit.U(k, h) * G[static_cast<std::size_t>(h) * static_cast<std::size_t>(rx) + static_cast<std::size_t>(h2)];
            for (Index is = 0; is < S.rows(); ++is)
                for (Index it = 0; it < S.cols(); ++it)
                    out.values[out.index(k, h2, static_cast<std::size_t>(is), static_cast<std::size_t>(it))] = S(is, it);
        }
    return out;
}

std::vector<MatrixXd> predict_integrated(const MatrixXd& C, const MatrixXd& X, int d, const BasisSpec& y_spec,
                                         const GramMatrix& y_gram, std::span<const double> t_grid) {
    const int Jy = y_spec.num_funcs;
    if (C.cols() != idx(Jy) * d) throw DimensionError("predict: coefficient columns do not match Jy*d");
    if (X.cols() != C.rows())
        throw DimensionError("predict: integrated predictors have " + std::to_string(X.cols()) +
                             " columns but the coefficient matrix expects " + std::to_string(C.rows()));
    if (y_gram.J_inv_sqrt.rows() != Jy) throw DimensionError("predict: Gram matrix does not match the response basis");
    const MatrixXd Psi = whitened_response_basis(y_spec, y_gram, t_grid);  // nt x Jy
    const MatrixXd W = X * C;                                              // n x (Jy d)

    std::vector<MatrixXd> out;
    out.reserve(static_cast<std::size_t>(X.rows()));
    MatrixXd Wi(Jy, d);
    for (Index i = 0; i < X.rows(); ++i) {
        for (int j = 0; j < Jy; ++j) Wi.row(j) = W.row(i).segment(idx(j) * d, d);
        out.push_back(Psi * Wi);
    }
    return out;
}

std::vector<MatrixXd> predict(const MatrixXd& C, std::span<const FunctionalSample> samples, const BasisSpec& x_spec,
                              const BasisSpec& y_spec, const GramMatrix& y_gram, std::span<const double> t_grid) {
    if (samples.empty()) return {};
    const Index px = C.rows() / x_spec.num_funcs;
    if (C.rows() != idx(x_spec.num_funcs) * px) throw DimensionError("predict: coefficient rows do not match Jx*p");
    MatrixXd X(static_cast<Index>(samples.size()), C.rows());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].p() != px)
            throw DimensionError("predict: sample " + std::to_string(i) + " has " + std::to_string(samples[i].p()) +
                                 " predictors, the fit expects " + std::to_string(px));
        X.row(static_cast<Index>(i)) = integrate_x(samples[i], x_spec).transpose();
    }
    const int d = static_cast<int>(C.cols() / y_spec.num_funcs);
    return predict_integrated(C, X, d, y_spec, y_gram, t_grid);
}

}  // namespace nrrr
