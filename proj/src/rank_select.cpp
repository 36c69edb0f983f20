#include "nrrr/rank_select.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "nrrr/errors.hpp"
#include "nrrr/linalg.hpp"

namespace nrrr {

namespace {

// Two scores within this relative distance count as tied; ties go to the
// lexicographically smaller triple.
constexpr double kTieRelTol = 1e-9;

bool better(const RankScore& a, const RankScore& b) {
    if (!a.ok) return false;
    if (!b.ok) return true;
    const double tol = kTieRelTol * std::max({1.0, std::abs(a.score), std::abs(b.score)});
    if (std::abs(a.score - b.score) <= tol) return a.ranks < b.ranks;
    return a.score < b.score;
}

std::string triple_str(const RankTriple& t) {
    return "(" + std::to_string(t.r) + "," + std::to_string(t.rx) + "," + std::to_string(t.ry) + ")";
}

struct Bounds {
    int r_lo, r_hi, rx_lo, rx_hi, ry_lo, ry_hi;
};

Bounds resolve(const IntegratedDesign& design, const RankLimits& lim, int rank_x, bool fix_u) {
    Bounds b{};
    b.rx_hi = lim.rx_hi > 0 ? std::min(lim.rx_hi, design.p) : design.p;
    b.ry_hi = lim.ry_hi > 0 ? std::min(lim.ry_hi, design.d) : design.d;
    b.rx_lo = std::max(1, lim.rx_lo);
    b.ry_lo = std::max(1, lim.ry_lo);
    if (fix_u) b.ry_lo = b.ry_hi = design.d;
    const int r_cap = std::min(rank_x, design.Jy * design.d);
    b.r_hi = lim.r_hi > 0 ? std::min(lim.r_hi, r_cap) : r_cap;
    b.r_lo = std::max(1, lim.r_lo);
    if (b.rx_lo > b.rx_hi || b.ry_lo > b.ry_hi || b.r_lo > b.r_hi)
        throw ConfigError("rank search: empty rank range");
    return b;
}

bool valid_triple(const IntegratedDesign& design, const RankTriple& t) {
    return t.r >= 1 && t.rx >= 1 && t.ry >= 1 && t.rx <= design.p && t.ry <= design.d &&
           t.r <= std::min(design.Jy * t.ry, design.Jx * t.rx);
}

NrrrFit fit_candidate(const IntegratedDesign& design, const SearchOptions& opt, const RankTriple& t) {
    NrrrConfig cfg = opt.fit;
    cfg.r = t.r;
    cfg.rx = t.rx;
    cfg.ry = t.ry;
    if (opt.fix_u) return nrrr_x_fit(design, cfg);
    return cfg.ridge_lambda > 0.0 ? nrrs_fit(design, cfg) : nrrr_fit(design, cfg);
}

// Scores triples with a caller-provided function, reusing earlier results.
class Scorer {
  public:
    using Fn = std::function<RankScore(const RankTriple&)>;
    Scorer(Fn fn, Exec exec) : fn_(std::move(fn)), exec_(exec) {}

    // Scores the batch (phase-tagged) and appends it to `path`; returns the phase winner.
    RankScore run_phase(const std::vector<RankTriple>& batch, int phase, RankSearchResult& result) {
        std::vector<RankScore> scores(batch.size());
        std::vector<char> fresh(batch.size(), 0);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto it = cache_.find(batch[i]);
            if (it != cache_.end())
                scores[i] = it->second;
            else
                fresh[i] = 1;
        }
        const long m = static_cast<long>(batch.size());
        auto eval = [&](long i) {
            if (!fresh[static_cast<std::size_t>(i)]) return;
            scores[static_cast<std::size_t>(i)] = fn_(batch[static_cast<std::size_t>(i)]);
        };
        if (exec_ == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
            for (long i = 0; i < m; ++i) eval(i);
        } else {
            for (long i = 0; i < m; ++i) eval(i);
        }

        RankScore best;
        best.ok = false;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            RankScore s = scores[i];
            s.phase = phase;
            cache_[batch[i]] = s;
            if (!s.ok) result.warnings.push_back("candidate " + triple_str(s.ranks) + " skipped: " + s.note);
            result.search_path.push_back(s);
            if (i == 0 || better(s, best)) best = s;
        }
        return best;
    }

  private:
    Fn fn_;
    Exec exec_;
    std::map<RankTriple, RankScore> cache_;
};

RankSearchResult search(const IntegratedDesign& design, const RankLimits& limits, const SearchOptions& opt,
                        int rank_x, const Scorer::Fn& fn) {
    const Bounds b = resolve(design, limits, rank_x, opt.fix_u);
    Scorer scorer(fn, opt.exec);
    RankSearchResult result;
    auto finish = [&](const RankScore& best) {
        if (!best.ok) throw NumericalError("rank search: every candidate failed");
        result.selected = best.ranks;
        result.selected_score = best.score;
        return result;
    };

    if (opt.exhaustive) {
        std::vector<RankTriple> grid;
        for (int r = b.r_lo; r <= b.r_hi; ++r)
            for (int rx = b.rx_lo; rx <= b.rx_hi; ++rx)
                for (int ry = b.ry_lo; ry <= b.ry_hi; ++ry)
                    if (valid_triple(design, {r, rx, ry})) grid.push_back({r, rx, ry});
        if (grid.empty()) throw ConfigError("rank search: no valid rank triple in the grid");
        return finish(scorer.run_phase(grid, 0, result));
    }

    auto r_batch = [&](int rx, int ry) {
        std::vector<RankTriple> out;
        for (int r = b.r_lo; r <= b.r_hi; ++r)
            if (valid_triple(design, {r, rx, ry})) out.push_back({r, rx, ry});
        return out;
    };

    // Phase 1: no global reduction, choose r.
    std::vector<RankTriple> batch = r_batch(b.rx_hi, b.ry_hi);
    if (batch.empty()) throw ConfigError("rank search: no valid r at the largest rx, ry");
    RankScore best = scorer.run_phase(batch, 1, result);
    if (!best.ok) return finish(best);
    const int r_hat = best.ranks.r;

    // Phase 2: rx with r fixed.
    batch.clear();
    for (int rx = b.rx_lo; rx <= b.rx_hi; ++rx)
        if (valid_triple(design, {r_hat, rx, b.ry_hi})) batch.push_back({r_hat, rx, b.ry_hi});
    best = scorer.run_phase(batch, 2, result);
    const int rx_hat = best.ok ? best.ranks.rx : b.rx_hi;

    // Phase 3: ry with r, rx fixed.
    batch.clear();
    for (int ry = b.ry_lo; ry <= b.ry_hi; ++ry)
        if (valid_triple(design, {r_hat, rx_hat, ry})) batch.push_back({r_hat, rx_hat, ry});
    best = scorer.run_phase(batch, 3, result);
    const int ry_hat = best.ok ? best.ranks.ry : b.ry_hi;

    // Phase 4: refine r.
    batch.clear();
    for (int r = b.r_lo; r <= std::min(design.Jy * ry_hat, design.Jx * rx_hat); ++r)
        if (r <= b.r_hi || r == r_hat) batch.push_back({r, rx_hat, ry_hat});
    return finish(scorer.run_phase(batch, 4, result));
}

IntegratedDesign without_rows(const IntegratedDesign& design, const std::vector<int>& drop) {
    std::vector<char> mask(static_cast<std::size_t>(design.n), 1);
    for (int i : drop) mask[static_cast<std::size_t>(i)] = 0;
    std::vector<int> keep;
    for (int i = 0; i < design.n; ++i)
        if (mask[static_cast<std::size_t>(i)]) keep.push_back(i);
    return design.rows(keep);
}

struct FoldData {
    IntegratedDesign train;
    IntegratedDesign val;
};

std::vector<FoldData> split(const IntegratedDesign& design, int K, std::uint64_t seed) {
    const auto folds = make_folds(design.n, K, seed);
    std::vector<FoldData> out;
    out.reserve(folds.size());
    for (const auto& f : folds) out.push_back({without_rows(design, f), design.rows(f)});
    return out;
}

}  // namespace

double df_hat(int r, int rx, int ry, int rank_x, int Jx, int Jy, int d) {
    return rx * (static_cast<double>(rank_x) / Jx - rx) + static_cast<double>(ry) * (d - ry) +
           static_cast<double>(Jy * ry + Jx * rx - r) * r;
}

double bic(const IntegratedDesign& design, double sse, double df) {
    // Round-off level SSE means the candidate interpolates; its log would swamp the penalty.
    if (!(sse > kInterpolationRelTol * design.Y.squaredNorm()))
        throw NumericalError("bic: SSE is zero to working precision (the candidate interpolates the data)");
    const double N = static_cast<double>(design.n) * design.d * design.Jy;
    return N * std::log(sse / N) + std::log(N) * df;
}

std::vector<std::vector<int>> make_folds(int n, int K, std::uint64_t seed) {
    if (K < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (n < K) throw ConfigError("cross-validation: fewer samples (" + std::to_string(n) + ") than folds (" +
                                 std::to_string(K) + ")");
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit modulus draw so the partition does not
    // depend on the standard library's distribution implementation.
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(K));
    for (int i = 0; i < n; ++i) folds[static_cast<std::size_t>(i % K)].push_back(perm[static_cast<std::size_t>(i)]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

RankSearchResult select_ranks_bic(const IntegratedDesign& design, const RankLimits& limits,
                                  const SearchOptions& options) {
    const int rank_x = linalg::numerical_rank(design.X);
    auto fn = [&](const RankTriple& t) {
        RankScore s;
        s.ranks = t;
        try {
            const NrrrFit fit = fit_candidate(design, options, t);
            s.sse = fit.sse;
            s.df = df_hat(t.r, t.rx, t.ry, rank_x, design.Jx, design.Jy, design.d);
            s.score = bic(design, s.sse, s.df);
            s.ok = std::isfinite(s.score);
            if (!s.ok) s.note = "non-finite BIC";
        } catch (const std::exception& e) {
            s.ok = false;
            s.note = e.what();
        }
        return s;
    };
    RankSearchResult out = search(design, limits, options, rank_x, fn);
    out.lambda = options.fit.ridge_lambda;
    return out;
}

RankSearchResult select_ranks_cv(const IntegratedDesign& design, const RankLimits& limits, int K, std::uint64_t seed,
                                 const SearchOptions& options) {
    const auto folds = split(design, K, seed);
    const int rank_x = linalg::numerical_rank(design.X);
    auto fn = [&](const RankTriple& t) {
        RankScore s;
        s.ranks = t;
        try {
            double total = 0.0;
            for (const auto& f : folds) total += residual_ss(f.val, fit_candidate(f.train, options, t).C);
            s.sse = total;
            s.score = total;
            s.ok = std::isfinite(total);
            if (!s.ok) s.note = "non-finite held-out error";
        } catch (const std::exception& e) {
            s.ok = false;
            s.note = e.what();
        }
        return s;
    };
    RankSearchResult out = search(design, limits, options, rank_x, fn);
    out.lambda = options.fit.ridge_lambda;
    return out;
}

namespace {

// Summed held-out error of RRR over ranks 1..len for one ridge level.
std::vector<double> rrr_cv_path(const std::vector<FoldData>& folds, double lambda, int max_r) {
    std::vector<double> total;
    for (const auto& f : folds) {
        const IntegratedDesign train = lambda > 0.0 ? ridge_augment(f.train, lambda) : f.train;
        const std::vector<double> path = rrr_holdout_path(train, f.val, max_r);
        if (total.empty())
            total = path;
        else {
            // Folds can differ in admissible rank; keep the common prefix.
            total.resize(std::min(total.size(), path.size()));
            for (std::size_t h = 0; h < total.size(); ++h) total[h] += path[h];
        }
    }
    return total;
}

int rrr_rank_cap(const IntegratedDesign& design, int max_r) {
    const int cap = std::min(linalg::numerical_rank(design.X), static_cast<int>(design.Y.cols()));
    return max_r > 0 ? std::min(max_r, cap) : cap;
}

}  // namespace

RankSearchResult select_rrr_cv(const IntegratedDesign& design, int K, std::uint64_t seed, int max_r) {
    return select_rrs_cv(design, K, seed, {0.0}, max_r);
}

RankSearchResult select_rrs_cv(const IntegratedDesign& design, int K, std::uint64_t seed,
                               const std::vector<double>& lambdas, int max_r) {
    if (lambdas.empty()) throw ConfigError("ridge grid is empty");
    const auto folds = split(design, K, seed);
    const int cap = rrr_rank_cap(design, max_r);
    RankSearchResult out;
    RankScore best;
    bool have = false;
    for (double lambda : lambdas) {
        if (!(lambda >= 0.0)) throw ConfigError("ridge levels must be >= 0");
        const std::vector<double> path = rrr_cv_path(folds, lambda, cap);
        for (std::size_t h = 0; h < path.size(); ++h) {
            RankScore s;
            s.ranks = {static_cast<int>(h) + 1, design.p, design.d};
            s.phase = 1;
            s.lambda = lambda;
            s.ok = std::isfinite(path[h]);
            s.score = s.sse = path[h];
            out.search_path.push_back(s);
            // A tie at the same rank keeps the ridge level seen first.
            if (s.ok && (!have || better(s, best))) {
                best = s;
                out.lambda = lambda;
                have = true;
            }
        }
    }
    if (!have) throw NumericalError("select_rrs_cv: no admissible candidate");
    out.selected = best.ranks;
    out.selected_score = best.score;
    return out;
}

double select_lambda_cv(const IntegratedDesign& design, const NrrrConfig& ranks, int K, std::uint64_t seed,
                        const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw ConfigError("ridge grid is empty");
    const auto folds = split(design, K, seed);
    double best_lambda = lambdas.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double lambda : lambdas) {
        NrrrConfig cfg = ranks;
        cfg.ridge_lambda = lambda;
        double total = 0.0;
        try {
            for (const auto& f : folds) total += residual_ss(f.val, nrrs_fit(f.train, cfg).C);
        } catch (const std::exception&) {
            continue;
        }
        if (!std::isfinite(best_score) || total < best_score - kTieRelTol * std::max(1.0, std::abs(best_score))) {
            best_score = total;
            best_lambda = lambda;
        }
    }
    if (!std::isfinite(best_score)) throw NumericalError("select_lambda_cv: every ridge level failed");
    return best_lambda;
}

std::vector<double> default_lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2}; }

}  // namespace nrrr
