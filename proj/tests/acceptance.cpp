// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance --criterion N   (N = 1..7, or "all")

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nrrr/estimators.hpp"
#include "nrrr/sim.hpp"
#include "support.hpp"

namespace {

using namespace nrrr;
using Eigen::MatrixXd;
using testing::Gen;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

// Tolerances and sizes, fixed here so a run cannot loosen them.
constexpr int kReps = 50;
constexpr int kTrim = 3;
constexpr std::uint64_t kBaseSeed = 20240601;

double row_mean(const ReplicationTable& t, const std::string& method, const std::string& metric) {
    for (const auto& r : t.rows)
        if (r.method == method && r.metric == metric) return r.trimmed_mean;
    return std::nan("");
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Setting 1, SNR 1, rho 0.1: NRRR and RRR trimmed MSPE bands and per-replication wins.
void criterion1(Outcome& o) {
    ScenarioSpec spec = setting_preset(1);
    spec.snr = 1.0;
    spec.rho = 0.1;
    spec.seed = kBaseSeed + 1;
    const ReplicationTable t = run_replications(spec, {Method::nrrr, Method::rrr}, kReps, kTrim);
    const double nrrr = row_mean(t, "NRRR", "mspe"), rrr = row_mean(t, "RRR", "mspe");
    int wins = 0, used = 0;
    for (const auto& r : t.reps) {
        if (!r.ok) continue;
        ++used;
        wins += r.methods[0].mspe < r.methods[1].mspe;
    }
    const double frac = used ? static_cast<double>(wins) / used : 0.0;
    o.detail << "NRRR " << nrrr << " (band [0.91, 1.37]), RRR " << rrr << " (band [1.16, 1.74]), NRRR wins " << wins
             << "/" << used << " ";
    o.check(nrrr >= 0.91 && nrrr <= 1.37, "NRRR band");
    o.check(rrr >= 1.16 && rrr <= 1.74, "RRR band");
    o.check(used == kReps, "all replications succeed");
    o.check(frac >= 0.90, "NRRR < RRR in >= 90%");
}

// Setting 1, SNR 4: BIC recovers (5, 3, 3).
void criterion2(Outcome& o) {
    ScenarioSpec spec = setting_preset(1);
    spec.snr = 4.0;
    spec.rho = 0.1;
    spec.seed = kBaseSeed + 2;
    const ReplicationTable t = run_replications(spec, {Method::nrrr}, kReps, kTrim);
    int hr = 0, hx = 0, hy = 0, used = 0;
    for (const auto& r : t.reps) {
        if (!r.ok) continue;
        ++used;
        const RankTriple& k = r.methods[0].ranks;
        hr += k.r == 5;
        hx += k.rx == 3;
        hy += k.ry == 3;
    }
    o.detail << "r=5 in " << hr << "/" << used << ", rx=3 in " << hx << "/" << used << ", ry=3 in " << hy << "/" << used
             << " ";
    o.check(used == kReps, "all replications succeed");
    o.check(hr >= 0.9 * kReps, "r");
    o.check(hx >= 0.9 * kReps, "rx");
    o.check(hy >= 0.9 * kReps, "ry");
}

// Setting 2, SNR 2, rho 0.5: ordering and +-25% bands.
void criterion3(Outcome& o) {
    ScenarioSpec spec = setting_preset(2);
    spec.snr = 2.0;
    spec.rho = 0.5;
    spec.seed = kBaseSeed + 3;
    const ReplicationTable t = run_replications(spec, {Method::nrrr, Method::nrrr_x, Method::rrr}, kReps, kTrim);
    const double a = row_mean(t, "NRRR", "mspe"), b = row_mean(t, "NRRR-X", "mspe"), c = row_mean(t, "RRR", "mspe");
    o.detail << "NRRR " << a << ", NRRR-X " << b << ", RRR " << c << " (reference 0.246, 0.251, 0.316) ";
    auto band = [](double v, double ref) { return std::abs(v - ref) <= 0.25 * ref; };
    o.check(a <= b && b <= c, "ordering");
    o.check(band(a, 0.246), "NRRR band");
    o.check(band(b, 0.251), "NRRR-X band");
    o.check(band(c, 0.316), "RRR band");
}

// Special cases on random nested instances.
void criterion4(Outcome& o) {
    Gen g(kBaseSeed + 4);
    double worst_full = 0, worst_ols = 0, worst_rrs = 0;
    bool u_identity = true;
    for (int trial = 0; trial < 20; ++trial) {
        const int p = g.integer(2, 5), d = g.integer(2, 5), Jx = g.integer(2, 4), Jy = g.integer(2, 4);
        const int n = g.integer(3 * Jx * p, 4 * Jx * p);
        const int r = g.integer(1, std::min(Jx * p, Jy * d));
        const auto inst = testing::nested_instance(g, n, p, d, Jx, Jy, r, p, d, 0.5);
        const IntegratedDesign& D = inst.design;

        NrrrConfig c;
        c.r = r;
        c.rx = p;
        c.ry = d;
        c.max_iter = 500;
        c.tol = 1e-12;
        const RrrFit rrr = rrr_fit(D, r);
        const NrrrFit full = nrrr_fit(D, c);
        worst_full = std::max(worst_full, std::abs(full.sse - rrr.sse) / std::max(1.0, rrr.sse));

        const int rmax = std::min(Jx * p, Jy * d);
        const double ols = residual_ss(D, ols_fit(D));
        worst_ols = std::max(worst_ols, std::abs(rrr_fit(D, rmax).sse - ols) / std::max(1.0, ols));

        const RrrFit rrs = rrs_fit(D, r, 0.0);
        worst_rrs = std::max(worst_rrs, (rrs.C - rrr.C).norm() / std::max(1.0, rrr.C.norm()));

        c.rx = g.integer(1, p);
        c.ry = d;
        c.r = g.integer(1, std::min(Jx * c.rx, Jy * d));
        const NrrrFit x = nrrr_x_fit(D, c);
        u_identity = u_identity && x.U == MatrixXd::Identity(d, d);
    }
    o.detail << "nested(full)-RRR " << worst_full << ", RRR(full)-OLS " << worst_ols << ", RRS(0)-RRR " << worst_rrs
             << ", NRRR-X U=I " << (u_identity ? "exact" : "violated") << " ";
    o.check(worst_full <= 1e-6, "nested full local ranks vs RRR");
    o.check(worst_ols <= 1e-8, "full-rank RRR vs OLS");
    o.check(worst_rrs <= 1e-9, "RRS at lambda 0 vs RRR");
    o.check(u_identity, "NRRR-X U = I");
}

// Invariants: orthonormality, monotone traces, Gram identity, partition of unity, metrics.
void criterion5(Outcome& o) {
    Gen g(kBaseSeed + 5);
    double worst_orth = 0, worst_rise = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int p = g.integer(1, 6), d = g.integer(1, 6), Jx = g.integer(1, 5), Jy = g.integer(1, 5);
        const int rx = g.integer(1, p), ry = g.integer(1, d);
        const int r = g.integer(1, std::min(Jx * rx, Jy * ry));
        const int n = g.integer(5, 60);
        const auto inst = testing::nested_instance(g, n, p, d, Jx, Jy, r, rx, ry, g.uniform(0.01, 2.0));
        NrrrConfig c;
        c.r = r;
        c.rx = rx;
        c.ry = ry;
        c.restarts = trial % 3;
        c.seed = static_cast<std::uint64_t>(trial);
        const NrrrFit f = trial % 2 ? nrrr_fit(inst.design, c) : ([&] {
            c.ridge_lambda = g.uniform(0.0, 1.0);
            return nrrs_fit(inst.design, c);
        })();
        worst_orth = std::max({worst_orth, (f.U.transpose() * f.U - testing::eye(ry)).norm(),
                               (f.V.transpose() * f.V - testing::eye(rx)).norm()});
        for (std::size_t k = 1; k < f.objective_trace.size(); ++k) {
            const double prev = f.objective_trace[k - 1];
            worst_rise = std::max(worst_rise, (f.objective_trace[k] - prev) / std::max(1.0, prev));
        }
    }

    double worst_gram = 0, worst_pou = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int degree = g.integer(0, 4);
        const double lo = g.uniform(-2, 1), hi = lo + g.uniform(0.5, 3);
        const BasisSpec s = make_bspline(lo, hi, g.integer(degree + 1, degree + 12), degree);
        const GramMatrix G = gram(s);
        worst_gram = std::max(worst_gram,
                              (G.J_inv_sqrt * G.J * G.J_inv_sqrt - testing::eye(s.num_funcs)).norm());
        std::vector<double> pts = g.sorted_points(500, lo, hi);
        pts.push_back(lo);
        pts.push_back(hi);
        const MatrixXd B = eval_basis(s, pts);
        worst_pou = std::max(worst_pou, (B.rowwise().sum().array() - 1.0).abs().maxCoeff());
    }

    // Metric loop oracles on random inputs.
    double worst_metric = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const int n = g.integer(2, 20), cols_x = g.integer(1, 12), cols_y = g.integer(1, 12);
        IntegratedDesign D;
        D.n = n;
        D.X = g.gaussian(n, cols_x);
        D.Y = g.gaussian(n, cols_y);
        const MatrixXd C = g.gaussian(cols_x, cols_y);
        double loop = 0;
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cols_y; ++c) {
                double fit = 0;
                for (int a = 0; a < cols_x; ++a) fit += D.X(i, a) * C(a, c);
                loop += (D.Y(i, c) - fit) * (D.Y(i, c) - fit);
            }
        loop /= n;
        worst_metric = std::max(worst_metric, std::abs(mspe(C, D) - loop) / std::max(1.0, loop));

        const int m = g.integer(2, 30), d = g.integer(1, 4);
        std::vector<MatrixXd> truth, hat;
        std::vector<std::vector<double>> grids;
        double sq = 0, rel = 0;
        for (int i = 0; i < n; ++i) {
            truth.push_back(g.gaussian(m, d));
            hat.push_back(g.gaussian(m, d));
            grids.push_back(g.sorted_points(m, 0, 1));
            double num = 0, den = 0;
            for (int v = 0; v < m; ++v)
                for (int k = 0; k < d; ++k) {
                    const double t = truth.back()(v, k), h = hat.back()(v, k);
                    sq += (t - h) * (t - h);
                    if (v > 0) {
                        const double w = grids.back()[static_cast<std::size_t>(v)] -
                                         grids.back()[static_cast<std::size_t>(v - 1)];
                        num += w * (t - h) * (t - h);
                        den += w * t * t;
                    }
                }
            rel += num / den;
        }
        worst_metric = std::max(worst_metric, std::abs(msfpe(hat, truth) - sq / n) / std::max(1.0, sq / n));
        worst_metric = std::max(worst_metric, std::abs(rmspe(hat, truth, grids) - rel / n) / std::max(1.0, rel / n));
    }

    o.detail << "orthonormality " << worst_orth << ", largest relative trace rise " << worst_rise << ", Gram identity "
             << worst_gram << ", partition of unity " << worst_pou << ", metrics " << worst_metric << " ";
    o.check(worst_orth < 1e-8, "orthonormality");
    o.check(worst_rise <= 1e-9, "monotone objective trace");
    o.check(worst_gram < 1e-8, "Gram inverse square root");
    o.check(worst_pou < 1e-12, "partition of unity");
    o.check(worst_metric < 1e-12, "metric oracles");
}

// Tiny instances: 10 starts of nrrr_fit against 200 starts of the coordinate-descent oracle.
void criterion6(Outcome& o) {
    Gen g(kBaseSeed + 6);
    double worst = 0;
    for (int inst_id = 0; inst_id < 20; ++inst_id) {
        const auto inst = testing::nested_instance(g, 20, 3, 3, 2, 2, 1, 1, 1, 1.0);
        NrrrConfig c;
        c.restarts = 9;
        c.seed = static_cast<std::uint64_t>(inst_id);
        c.max_iter = 5000;
        c.tol = 1e-12;
        const NrrrFit f = nrrr_fit(inst.design, c);
        const auto oracle = testing::nested_oracle(inst.design, 1, 1, 1, 200, 1000 + static_cast<std::uint64_t>(inst_id));
        const double gap = std::abs(f.sse - oracle.objective) / std::max(1.0, oracle.objective);
        worst = std::max(worst, gap);
    }
    o.detail << "largest relative objective gap over 20 instances " << worst << " ";
    o.check(worst <= 1e-5, "objective match");
}

// Fixed truth; estimation error shrinks from n = 100 to n = 400.
void criterion7(Outcome& o) {
    RunOptions ro;
    ro.fixed_ranks = RankTriple{5, 3, 3};
    std::vector<double> med;
    for (int n : {100, 400}) {
        ScenarioSpec spec = setting_preset(1);
        spec.n = n;
        spec.n_test = 50;
        spec.model_seed = kBaseSeed + 70;
        spec.seed = kBaseSeed + 7 + static_cast<std::uint64_t>(n);
        const ReplicationTable t = run_replications(spec, {Method::nrrr}, 30, 0, ro);
        std::vector<double> err;
        for (const auto& r : t.reps)
            if (r.ok) err.push_back(r.methods[0].est_err);
        o.check(err.size() == 30, "all replications succeed at n=" + std::to_string(n));
        med.push_back(median(err));
    }
    const double ratio = med[1] / med[0];
    o.detail << "median ||C_hat - C0||_F " << med[0] << " (n=100), " << med[1] << " (n=400), ratio " << ratio << " ";
    o.check(ratio <= 0.75, "ratio <= 0.75");
}

const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> kCriteria = {
    {"Setting 1 MSPE bands, NRRR vs RRR", criterion1},
    {"Setting 1 rank recovery by BIC", criterion2},
    {"Setting 2 MSPE ordering and bands", criterion3},
    {"special-case equivalences", criterion4},
    {"invariant suite", criterion5},
    {"tiny-instance oracle match", criterion6},
    {"estimation error shrinks with n", criterion7},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string which = "all";
    app.add_option("--criterion", which, "1-7 or all");
    CLI11_PARSE(app, argc, argv);

    std::vector<int> ids;
    if (which == "all") {
        for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) ids.push_back(i);
    } else {
        const int id = std::atoi(which.c_str());
        if (id < 1 || id > static_cast<int>(kCriteria.size())) {
            std::cerr << "unknown criterion '" << which << "'\n";
            return 2;
        }
        ids.push_back(id);
    }
    bool all = true;
    for (int id : ids) {
        Outcome o;
        o.detail.precision(6);
        try {
            kCriteria[static_cast<std::size_t>(id - 1)].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "]";
        }
        std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  "
                  << kCriteria[static_cast<std::size_t>(id - 1)].first << ": " << o.detail.str() << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
