#include "nrrr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "nrrr/errors.hpp"
#include "nrrr/estimators.hpp"
#include "nrrr/linalg.hpp"

namespace nrrr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
    MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < A.cols(); ++j) out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<double> uniform_grid(int count) {
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int u = 0; u < count; ++u) grid[static_cast<std::size_t>(u)] = static_cast<double>(u) / (count - 1);
    return grid;
}

// Riemann Gram Phi^T diag(w) Phi on a grid.
MatrixXd riemann_gram(const BasisSpec& spec, const std::vector<double>& grid) {
    const MatrixXd Phi = eval_basis(spec, grid);
    return Phi.transpose() * riemann_weights(grid).asDiagonal() * Phi;
}

// Variable-major (Jy d) x (Jx p) map to the design layout (Jx p) x (Jy d).
MatrixXd to_design_layout(const MatrixXd& T, int p, int d, int Jx, int Jy) {
    MatrixXd C(static_cast<Index>(Jx) * p, static_cast<Index>(Jy) * d);
    for (int jx = 0; jx < Jx; ++jx)
        for (int l = 0; l < p; ++l)
            for (int jy = 0; jy < Jy; ++jy)
                for (int k = 0; k < d; ++k)
                    C(static_cast<Index>(jx) * p + l, static_cast<Index>(jy) * d + k) =
                        T(static_cast<Index>(k) * Jy + jy, static_cast<Index>(l) * Jx + jx);
    return C;
}

double sample_sd(const MatrixXd& M) {
    const double n = static_cast<double>(M.size());
    const double mean = M.mean();
    return std::sqrt((M.array() - mean).square().sum() / (n - 1.0));
}

// Stacked coefficients (columns are samples) to observed curves.
std::vector<FunctionalSample> make_samples(const MatrixXd& xcoef, const MatrixXd& ycoef, const MatrixXd& Phi,
                                           const MatrixXd& Psi, const std::vector<double>& s_grid,
                                           const std::vector<double>& t_grid, int p, int d) {
    const Index Jx = Phi.cols(), Jy = Psi.cols();
    std::vector<FunctionalSample> out(static_cast<std::size_t>(xcoef.cols()));
    for (Index i = 0; i < xcoef.cols(); ++i) {
        FunctionalSample& s = out[static_cast<std::size_t>(i)];
        s.x_grid = s_grid;
        s.y_grid = t_grid;
        s.x_vals.resize(Phi.rows(), p);
        s.y_vals.resize(Psi.rows(), d);
        for (int l = 0; l < p; ++l) s.x_vals.col(l) = Phi * xcoef.col(i).segment(l * Jx, Jx);
        for (int k = 0; k < d; ++k) s.y_vals.col(k) = Psi * ycoef.col(i).segment(k * Jy, Jy);
    }
    return out;
}

}  // namespace

ScenarioSpec setting_preset(int setting) {
    ScenarioSpec s;
    s.setting = setting;
    if (setting == 1) {
        s.p = s.d = 10;
        s.r = 5;
        s.m = s.g = 60;
    } else if (setting == 2) {
        s.p = s.d = 20;
        s.r = 3;
        s.m = s.g = 100;
    } else {
        throw ConfigError("unknown setting " + std::to_string(setting) + " (expected 1 or 2)");
    }
    s.rx = s.ry = 3;
    s.Jx = s.Jy = 8;
    s.n = 100;
    s.n_test = 500;
    return s;
}

void validate_spec(const ScenarioSpec& s) {
    auto fail = [](const std::string& m) { throw ConfigError("scenario: " + m); };
    if (s.n < 1 || s.n_test < 1) fail("n and n_test must be positive");
    if (s.p < 1 || s.d < 1) fail("p and d must be positive");
    if (s.degree < 0) fail("degree must be nonnegative");
    if (s.Jx < s.degree + 1 || s.Jy < s.degree + 1) fail("Jx and Jy must be at least degree + 1");
    if (s.rx < 1 || s.rx > s.p) fail("rx must lie in [1, p]");
    if (s.ry < 1 || s.ry > s.d) fail("ry must lie in [1, d]");
    if (s.r < 1 || s.r > std::min(s.Jx * s.rx, s.Jy * s.ry)) fail("r must lie in [1, min(Jx rx, Jy ry)]");
    if (s.m < 2 || s.g < 2) fail("grids need at least 2 points");
    if (!(s.snr > 0.0)) fail("snr must be positive");
    if (!(s.rho >= 0.0 && s.rho < 1.0)) fail("rho must lie in [0, 1)");
}

GeneratedData generate(const ScenarioSpec& spec) {
    validate_spec(spec);
    GeneratedData out;
    out.spec = spec;
    const int p = spec.p, d = spec.d, Jx = spec.Jx, Jy = spec.Jy;
    out.x_spec = make_bspline(0.0, 1.0, Jx, spec.degree);
    out.y_spec = make_bspline(0.0, 1.0, Jy, spec.degree);
    out.x_gram = gram(out.x_spec);
    out.y_gram = gram(out.y_spec);

    std::mt19937_64 model_rng(spec.model_seed ? *spec.model_seed : derive_seed(spec.seed, 0));
    std::mt19937_64 data_rng(derive_seed(spec.seed, 1));

    out.U0 = linalg::random_orthonormal(d, spec.ry, model_rng);
    out.V0 = linalg::random_orthonormal(p, spec.rx, model_rng);
    out.A0_star = linalg::gaussian_matrix(Jy * spec.ry, spec.r, model_rng);
    out.B0_star = linalg::gaussian_matrix(Jx * spec.rx, spec.r, model_rng);

    const MatrixXd Iy = MatrixXd::Identity(Jy, Jy), Ix = MatrixXd::Identity(Jx, Jx);
    out.K = kron(out.U0, Iy) * out.A0_star * out.B0_star.transpose() * kron(out.V0, Ix).transpose() *
            kron(MatrixXd::Identity(p, p), out.x_gram.J);

    // x ~ N(0, Sigma), Sigma_ab = rho^|a-b| over the stacked Jx*p vector.
    const Index q = static_cast<Index>(Jx) * p;
    MatrixXd Sigma(q, q);
    for (Index a = 0; a < q; ++a)
        for (Index b = 0; b < q; ++b) Sigma(a, b) = std::pow(spec.rho, static_cast<double>(std::abs(a - b)));
    Eigen::LLT<MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("generate: predictor covariance is not positive definite");
    const MatrixXd L = llt.matrixL();

    const MatrixXd xtr = L * linalg::gaussian_matrix(static_cast<int>(q), spec.n, data_rng);
    const MatrixXd signal = out.K * xtr;
    out.sigma = std::isinf(spec.snr) ? 0.0 : sample_sd(signal) / spec.snr;
    const MatrixXd etr = out.sigma * linalg::gaussian_matrix(Jy * d, spec.n, data_rng);
    const MatrixXd xte = L * linalg::gaussian_matrix(static_cast<int>(q), spec.n_test, data_rng);
    const MatrixXd ete = out.sigma * linalg::gaussian_matrix(Jy * d, spec.n_test, data_rng);

    const std::vector<double> s_grid = uniform_grid(spec.g), t_grid = uniform_grid(spec.m);
    const MatrixXd Phi = eval_basis(out.x_spec, s_grid), Psi = eval_basis(out.y_spec, t_grid);
    out.train = make_samples(xtr, signal + etr, Phi, Psi, s_grid, t_grid, p, d);
    out.test = make_samples(xte, out.K * xte + ete, Phi, Psi, s_grid, t_grid, p, d);
    out.train_design = assemble_design(out.train, out.x_spec, out.y_spec, out.y_gram);
    out.test_design = assemble_design(out.test, out.x_spec, out.y_spec, out.y_gram);

    const MatrixXd Ip = MatrixXd::Identity(p, p), Id = MatrixXd::Identity(d, d);
    const MatrixXd Gx = riemann_gram(out.x_spec, s_grid), Gy = riemann_gram(out.y_spec, t_grid);
    const MatrixXd T = kron(Id, out.y_gram.J_inv_sqrt * Gy) * out.K * kron(Ip, Gx.inverse());
    out.C0 = to_design_layout(T, p, d, Jx, Jy);
    const MatrixXd Tn = kron(Id, sqrtm_spd(out.y_gram.J)) * out.K * kron(Ip, out.x_gram.J.inverse());
    out.C0_nominal = to_design_layout(Tn, p, d, Jx, Jy);
    return out;
}

double mspe(const MatrixXd& C_hat, const IntegratedDesign& test) {
    return residual_ss(test, C_hat) / test.n;
}

double msfpe(const std::vector<MatrixXd>& y_hat, const std::vector<MatrixXd>& y_true) {
    if (y_hat.size() != y_true.size() || y_hat.empty()) throw DimensionError("msfpe: curve counts differ or are zero");
    double total = 0.0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        if (y_hat[i].rows() != y_true[i].rows() || y_hat[i].cols() != y_true[i].cols())
            throw DimensionError("msfpe: curve shapes differ");
        total += (y_true[i] - y_hat[i]).squaredNorm();
    }
    return total / static_cast<double>(y_hat.size());
}

double rmspe(const std::vector<MatrixXd>& y_hat, const std::vector<MatrixXd>& y_true,
             const std::vector<std::vector<double>>& grids) {
    if (y_hat.size() != y_true.size() || y_hat.size() != grids.size() || y_hat.empty())
        throw DimensionError("rmspe: curve counts differ or are zero");
    double total = 0.0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        if (y_hat[i].rows() != y_true[i].rows() || y_hat[i].cols() != y_true[i].cols() ||
            static_cast<Index>(grids[i].size()) != y_true[i].rows())
            throw DimensionError("rmspe: curve shapes differ");
        const Eigen::VectorXd w = riemann_weights(grids[i]);
        const double err = w.dot((y_true[i] - y_hat[i]).rowwise().squaredNorm());
        const double ref = w.dot(y_true[i].rowwise().squaredNorm());
        if (!(ref > 0.0)) throw NumericalError("rmspe: observed curve has zero norm");
        total += err / ref;
    }
    return total / static_cast<double>(y_hat.size());
}

std::string method_name(Method m) {
    switch (m) {
        case Method::nrrr: return "NRRR";
        case Method::nrrr_x: return "NRRR-X";
        case Method::nrrs: return "NRRS";
        case Method::rrr: return "RRR";
        case Method::rrs: return "RRS";
        case Method::ols: return "OLS";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (s == "NRRR") return Method::nrrr;
    if (s == "NRRR-X" || s == "NRRR_X" || s == "NRRRX") return Method::nrrr_x;
    if (s == "NRRS") return Method::nrrs;
    if (s == "RRR") return Method::rrr;
    if (s == "RRS") return Method::rrs;
    if (s == "OLS") return Method::ols;
    throw ConfigError("unknown method '" + name + "'");
}

std::uint64_t replication_seed(std::uint64_t base, int rep) {
    return derive_seed(base, 0x100000000ULL + static_cast<std::uint64_t>(rep));
}

MethodFit fit_method(Method method, const IntegratedDesign& train, const RunOptions& opt, std::uint64_t seed) {
    MethodFit out;
    SearchOptions search;
    search.fit.max_iter = opt.max_iter;
    search.fit.tol = opt.tol;
    search.fit.restarts = opt.restarts;
    search.fit.seed = seed;
    search.fix_u = method == Method::nrrr_x;
    search.exhaustive = opt.exhaustive;
    const std::uint64_t fold_seed = derive_seed(seed, 2);

    auto nested_ranks = [&]() -> RankTriple {
        if (opt.fixed_ranks) {
            RankTriple t = *opt.fixed_ranks;
            if (search.fix_u) t.ry = train.d;
            return t;
        }
        if (opt.select != "bic" && opt.select != "cv")
            throw ConfigError("unknown rank selector '" + opt.select + "' (expected bic or cv)");
        out.search = opt.select == "cv" ? select_ranks_cv(train, RankLimits{}, opt.folds, fold_seed, search)
                                        : select_ranks_bic(train, RankLimits{}, search);
        return out.search->selected;
    };
    auto config_for = [&](const RankTriple& t) {
        NrrrConfig cfg = search.fit;
        cfg.r = t.r;
        cfg.rx = t.rx;
        cfg.ry = t.ry;
        return cfg;
    };

    switch (method) {
        case Method::nrrr:
        case Method::nrrr_x: {
            out.ranks = nested_ranks();
            const NrrrConfig cfg = config_for(out.ranks);
            out.fit = method == Method::nrrr ? nrrr_fit(train, cfg) : nrrr_x_fit(train, cfg);
            break;
        }
        case Method::nrrs: {
            out.ranks = nested_ranks();
            NrrrConfig cfg = config_for(out.ranks);
            out.lambda = opt.lambda ? *opt.lambda : select_lambda_cv(train, cfg, opt.folds, fold_seed, opt.lambdas);
            cfg.ridge_lambda = out.lambda;
            out.fit = nrrs_fit(train, cfg);
            break;
        }
        case Method::rrr: {
            out.ranks = {0, train.p, train.d};
            if (opt.fixed_ranks) {
                out.ranks.r = opt.fixed_ranks->r;
            } else {
                out.search = select_rrr_cv(train, opt.folds, fold_seed);
                out.ranks.r = out.search->selected.r;
            }
            out.fit = fit_from_rrr(rrr_fit(train, out.ranks.r), train);
            break;
        }
        case Method::rrs: {
            const std::vector<double> grid = opt.lambda ? std::vector<double>{*opt.lambda} : opt.lambdas;
            if (opt.fixed_ranks && opt.lambda) {
                out.ranks = {opt.fixed_ranks->r, train.p, train.d};
                out.lambda = *opt.lambda;
            } else if (opt.fixed_ranks) {
                // Best ridge level at the requested rank.
                const int r = opt.fixed_ranks->r;
                out.search = select_rrs_cv(train, opt.folds, fold_seed, grid, r);
                const RankScore* best = nullptr;
                for (const auto& s : out.search->search_path)
                    if (s.ok && s.ranks.r == r && (!best || s.score < best->score)) best = &s;
                if (!best) throw NumericalError("rrs: rank " + std::to_string(r) + " is not admissible");
                out.ranks = best->ranks;
                out.lambda = best->lambda;
            } else {
                out.search = select_rrs_cv(train, opt.folds, fold_seed, grid);
                out.ranks = out.search->selected;
                out.lambda = out.search->lambda;
            }
            out.fit = fit_from_rrr(rrs_fit(train, out.ranks.r, out.lambda), train);
            out.fit.lambda = out.lambda;
            break;
        }
        case Method::ols: {
            out.ranks = {0, train.p, train.d};
            RrrFit full;
            full.C = ols_fit(train);
            full.A = MatrixXd::Identity(full.C.cols(), full.C.cols());
            full.B = full.C;
            full.sse = residual_ss(train, full.C);
            full.r = static_cast<int>(full.C.cols());
            out.fit = fit_from_rrr(full, train);
            out.ranks.r = full.r;
            break;
        }
    }
    return out;
}

MethodResult evaluate_method(Method method, const GeneratedData& data, const RunOptions& opt, std::uint64_t seed) {
    const MethodFit mf = fit_method(method, data.train_design, opt, seed);
    const MatrixXd& C = mf.fit.C;
    MethodResult res;
    res.ranks = mf.ranks;
    res.lambda = mf.lambda;
    res.mspe = mspe(C, data.test_design);
    std::vector<MatrixXd> truth;
    truth.reserve(data.test.size());
    for (const auto& s : data.test) truth.push_back(s.y_vals);
    const std::vector<MatrixXd> pred = predict_integrated(C, data.test_design.X, data.train_design.d, data.y_spec,
                                                          data.y_gram, data.test.front().y_grid);
    res.msfpe = msfpe(pred, truth);
    res.est_err = (C - data.C0).norm();
    res.ok = true;
    return res;
}

double trimmed_mean(std::vector<double> v, int trim) {
    if (trim < 0 || static_cast<std::size_t>(2 * trim) >= v.size())
        throw ConfigError("trimmed_mean: need more values than 2*trim");
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (std::size_t i = static_cast<std::size_t>(trim); i < v.size() - static_cast<std::size_t>(trim); ++i) s += v[i];
    return s / static_cast<double>(v.size() - static_cast<std::size_t>(2 * trim));
}

double trimmed_sd(std::vector<double> v, int trim) {
    if (trim < 0 || static_cast<std::size_t>(2 * trim) >= v.size())
        throw ConfigError("trimmed_sd: need more values than 2*trim");
    std::sort(v.begin(), v.end());
    const std::size_t lo = static_cast<std::size_t>(trim), hi = v.size() - static_cast<std::size_t>(trim);
    const std::size_t k = hi - lo;
    if (k < 2) return 0.0;
    double mean = 0.0;
    for (std::size_t i = lo; i < hi; ++i) mean += v[i];
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) ss += (v[i] - mean) * (v[i] - mean);
    return std::sqrt(ss / static_cast<double>(k - 1));
}

ReplicationTable run_replications(const ScenarioSpec& spec, const std::vector<Method>& methods, int n_reps, int trim,
                                  const RunOptions& options) {
    validate_spec(spec);
    if (methods.empty()) throw ConfigError("run_replications: no methods");
    if (trim < 0 || n_reps <= 2 * trim) throw ConfigError("run_replications: need n_reps > 2*trim");
    if (options.select != "bic" && options.select != "cv") throw ConfigError("selector must be 'bic' or 'cv'");

    ReplicationTable table;
    table.spec = spec;
    table.methods = methods;
    table.reps.resize(static_cast<std::size_t>(n_reps));

#pragma omp parallel for schedule(dynamic)
    for (int rep = 0; rep < n_reps; ++rep) {
        ReplicationResult& rr = table.reps[static_cast<std::size_t>(rep)];
        rr.rep = rep;
        rr.seed = replication_seed(spec.seed, rep);
        rr.methods.resize(methods.size());
        try {
            ScenarioSpec s = spec;
            s.seed = rr.seed;
            const GeneratedData data = generate(s);
            rr.sigma = data.sigma;
            for (std::size_t k = 0; k < methods.size(); ++k) {
                try {
                    rr.methods[k] = evaluate_method(methods[k], data, options, derive_seed(rr.seed, 3 + k));
                } catch (const std::exception& e) {
                    rr.methods[k].ok = false;
                    rr.methods[k].error = e.what();
                    rr.ok = false;
                }
            }
        } catch (const std::exception& e) {
            rr.ok = false;
            for (auto& m : rr.methods) m.error = e.what();
        }
    }

    std::vector<const ReplicationResult*> used;
    for (const auto& rr : table.reps)
        if (rr.ok) used.push_back(&rr);
    table.used_reps = static_cast<int>(used.size());
    if (table.used_reps <= 2 * trim)
        throw NumericalError("run_replications: only " + std::to_string(table.used_reps) +
                             " replications succeeded, too few for the requested trimming");

    for (std::size_t k = 0; k < methods.size(); ++k) {
        const Method m = methods[k];
        const bool has_r = m != Method::ols;
        const bool has_rx = m == Method::nrrr || m == Method::nrrr_x || m == Method::nrrs;
        const bool has_ry = m == Method::nrrr || m == Method::nrrs;
        auto rank_stat = [&](auto get, int truth, double& mean, double& match) {
            double s = 0.0, hit = 0.0;
            for (const auto* rr : used) {
                const int v = get(rr->methods[k].ranks);
                s += v;
                hit += v == truth ? 1.0 : 0.0;
            }
            mean = s / static_cast<double>(used.size());
            match = hit / static_cast<double>(used.size());
        };

        SummaryRow base;
        base.setting = spec.setting;
        base.snr = spec.snr;
        base.rho = spec.rho;
        base.method = method_name(m);
        if (has_r) rank_stat([](const RankTriple& t) { return t.r; }, spec.r, base.mean_r, base.match_r);
        if (has_rx) rank_stat([](const RankTriple& t) { return t.rx; }, spec.rx, base.mean_rx, base.match_rx);
        if (has_ry) rank_stat([](const RankTriple& t) { return t.ry; }, spec.ry, base.mean_ry, base.match_ry);

        const std::pair<const char*, double MethodResult::*> metrics[] = {
            {"mspe", &MethodResult::mspe}, {"msfpe", &MethodResult::msfpe}, {"est_err", &MethodResult::est_err}};
        for (const auto& [name, field] : metrics) {
            std::vector<double> v;
            for (const auto* rr : used) v.push_back(rr->methods[k].*field);
            SummaryRow row = base;
            row.metric = name;
            row.trimmed_mean = trimmed_mean(v, trim);
            row.sd = trimmed_sd(v, trim);
            table.rows.push_back(row);
        }
    }
    return table;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "setting,snr,rho,method,metric,trimmed_mean,sd,mean_r,match_r,mean_rx,match_rx,mean_ry,match_ry\n";
    for (const auto& r : rows)
        out << (r.setting > 0 ? std::to_string(r.setting) : std::string("custom")) << ',' << num(r.snr) << ','
            << num(r.rho) << ',' << r.method << ',' << r.metric << ',' << num(r.trimmed_mean) << ',' << num(r.sd)
            << ',' << num(r.mean_r) << ',' << num(r.match_r) << ',' << num(r.mean_rx) << ',' << num(r.match_rx)
            << ',' << num(r.mean_ry) << ',' << num(r.match_ry) << '\n';
}

void write_raw_csv(std::ostream& out, const ReplicationTable& table) {
    out << "rep,seed,rep_ok,method,ok,mspe,msfpe,est_err,r,rx,ry,lambda,error\n";
    for (const auto& rr : table.reps)
        for (std::size_t k = 0; k < table.methods.size(); ++k) {
            const MethodResult& m = rr.methods[k];
            std::string err = m.error;
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            out << rr.rep << ',' << rr.seed << ',' << (rr.ok ? 1 : 0) << ',' << method_name(table.methods[k]) << ','
                << (m.ok ? 1 : 0) << ',' << num(m.mspe) << ',' << num(m.msfpe) << ',' << num(m.est_err) << ','
                << m.ranks.r << ',' << m.ranks.rx << ',' << m.ranks.ry << ',' << num(m.lambda) << ',' << err << '\n';
        }
}

}  // namespace nrrr
