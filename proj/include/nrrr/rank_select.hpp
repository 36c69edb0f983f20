#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "nrrr/estimators.hpp"
#include "nrrr/integrate.hpp"
#include "nrrr/parallel.hpp"

namespace nrrr {

struct RankTriple {
    int r = 0;
    int rx = 0;
    int ry = 0;
    auto operator<=>(const RankTriple&) const = default;
};

/// One evaluated candidate. `phase` is 1..4 for the one-at-a-time search
/// and 0 for the exhaustive grid.
struct RankScore {
    RankTriple ranks;
    int phase = 0;
    bool ok = false;
    double score = 0.0;  ///< BIC or summed held-out SSE
    double sse = 0.0;    ///< training SSE (BIC) or held-out SSE (CV)
    double df = 0.0;     ///< BIC only
    double lambda = 0.0; ///< ridge level of the candidate
    std::string note;    ///< failure reason when !ok
};

struct RankSearchResult {
    std::vector<RankScore> search_path;
    RankTriple selected;
    double selected_score = 0.0;
    double lambda = 0.0;  ///< ridge level picked alongside the ranks, when tuned
    std::vector<std::string> warnings;
};

/// Inclusive bounds for each rank. A zero upper bound means "as large as the
/// design allows" (rank(X) and Jy*d for r, p for rx, d for ry).
struct RankLimits {
    int r_lo = 1, r_hi = 0;
    int rx_lo = 1, rx_hi = 0;
    int ry_lo = 1, ry_hi = 0;
};

struct SearchOptions {
    NrrrConfig fit;          ///< iteration controls, restarts, seed and ridge level; ranks are overwritten
    bool fix_u = false;      ///< NRRR-X: ry pinned to d, U = I
    bool exhaustive = false; ///< score every valid triple instead of the one-at-a-time path
    Exec exec = Exec::parallel;
};

/// rx (rank_x/Jx - rx) + ry (d - ry) + (Jy ry + Jx rx - r) r.
double df_hat(int r, int rx, int ry, int rank_x, int Jx, int Jy, int d);

/// SSE at or below this fraction of ||Y||_F^2 counts as an exact fit.
inline constexpr double kInterpolationRelTol = 1e-10;

/// n d Jy log(SSE / (n d Jy)) + log(n d Jy) df. Throws NumericalError when
/// SSE <= kInterpolationRelTol ||Y||_F^2.
double bic(const IntegratedDesign& design, double sse, double df);

/// Seeded random partition of 0..n-1 into K folds of near-equal size.
std::vector<std::vector<int>> make_folds(int n, int K, std::uint64_t seed);

RankSearchResult select_ranks_bic(const IntegratedDesign& design, const RankLimits& limits,
                                  const SearchOptions& options = {});

/// K-fold CV with summed held-out squared error as the score.
RankSearchResult select_ranks_cv(const IntegratedDesign& design, const RankLimits& limits, int K, std::uint64_t seed,
                                 const SearchOptions& options = {});

/// RRR rank by K-fold CV over 1..max_r (0 = every admissible rank).
RankSearchResult select_rrr_cv(const IntegratedDesign& design, int K, std::uint64_t seed, int max_r = 0);

/// RRS rank and ridge level by K-fold CV over the grid.
RankSearchResult select_rrs_cv(const IntegratedDesign& design, int K, std::uint64_t seed,
                               const std::vector<double>& lambdas, int max_r = 0);

/// Ridge level for fixed nested ranks by K-fold CV (summed held-out SSE).
double select_lambda_cv(const IntegratedDesign& design, const NrrrConfig& ranks, int K, std::uint64_t seed,
                        const std::vector<double>& lambdas);

/// {1e-4, 1e-3, ..., 1e2}.
std::vector<double> default_lambda_grid();

}  // namespace nrrr
