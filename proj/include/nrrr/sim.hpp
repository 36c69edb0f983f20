#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nrrr/basis.hpp"
#include "nrrr/integrate.hpp"
#include "nrrr/rank_select.hpp"

namespace nrrr {

struct ScenarioSpec {
    int setting = 0;  ///< preset id for reporting; 0 = custom
    int n = 100;
    int n_test = 500;
    int p = 10, d = 10;
    int r = 5, rx = 3, ry = 3;
    int Jx = 8, Jy = 8;
    int m = 60;  ///< response grid size
    int g = 60;  ///< predictor grid size
    int degree = 3;
    double snr = 1.0;  ///< infinity gives noiseless data
    double rho = 0.1;
    std::uint64_t seed = 1;
    /// When set, the true (U0, V0, A0*, B0*) come from this seed and stay
    /// fixed while `seed` varies the samples and noise.
    std::optional<std::uint64_t> model_seed;
};

/// Presets 1 and 2 (n = 100, n_test = 500); snr, rho and seed keep their defaults.
ScenarioSpec setting_preset(int setting);

/// Throws ConfigError when the scenario is out of range.
void validate_spec(const ScenarioSpec& spec);

struct GeneratedData {
    ScenarioSpec spec;
    BasisSpec x_spec, y_spec;
    GramMatrix x_gram, y_gram;
    std::vector<FunctionalSample> train, test;
    IntegratedDesign train_design, test_design;

    /// Generating factors; A0_star and B0_star are latent-major
    /// (block h of Jy resp. Jx rows belongs to latent variable h).
    Eigen::MatrixXd U0, V0, A0_star, B0_star;
    /// (Jy d) x (Jx p) map from stacked predictor coefficients to stacked
    /// response coefficients, both variable-major.
    Eigen::MatrixXd K;
    /// Coefficient matrix that the integrated regression targets under the
    /// Riemann rule on this grid (design layout). Nested ranks are preserved.
    Eigen::MatrixXd C0;
    /// Same with exact Gram matrices in place of their Riemann versions.
    Eigen::MatrixXd C0_nominal;
    double sigma = 0.0;
};

GeneratedData generate(const ScenarioSpec& spec);

/// (1/n_te) ||Y_te - X_te C||_F^2.
double mspe(const Eigen::MatrixXd& C_hat, const IntegratedDesign& test);

/// (1/n) sum_i sum_v ||y_i(t_v) - yhat_i(t_v)||^2. Curves are |t| x d.
double msfpe(const std::vector<Eigen::MatrixXd>& y_hat, const std::vector<Eigen::MatrixXd>& y_true);

/// (1/n) sum_i int ||y_i - yhat_i||^2 / int ||y_i||^2 with the Riemann rule on
/// each sample's grid.
double rmspe(const std::vector<Eigen::MatrixXd>& y_hat, const std::vector<Eigen::MatrixXd>& y_true,
             const std::vector<std::vector<double>>& grids);

enum class Method { nrrr, nrrr_x, nrrs, rrr, rrs, ols };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct RunOptions {
    std::string select = "bic";  ///< nested rank selector: "bic" or "cv"
    int folds = 10;
    int restarts = 0;
    int max_iter = 100;
    double tol = 1e-4;
    std::vector<double> lambdas = default_lambda_grid();
    std::optional<RankTriple> fixed_ranks;  ///< skip selection for the nested methods and RRR (r only)
    std::optional<double> lambda;           ///< skip ridge tuning for NRRS and RRS
    bool exhaustive = false;                ///< full rank grid instead of the one-at-a-time search
};

/// A fitted method together with how its tuning values were chosen.
struct MethodFit {
    NrrrFit fit;  ///< baselines are wrapped with U = I_d, V = I_p
    RankTriple ranks;
    double lambda = 0.0;
    std::optional<RankSearchResult> search;  ///< rank (and ridge) search, when one ran
};

/// Selects tuning values per `options` and fits `method` on `train`.
/// `seed` drives restarts and fold assignment.
MethodFit fit_method(Method method, const IntegratedDesign& train, const RunOptions& options, std::uint64_t seed);

struct MethodResult {
    bool ok = false;
    double mspe = 0.0;
    double msfpe = 0.0;
    double est_err = 0.0;  ///< ||C_hat - C0||_F
    RankTriple ranks;
    double lambda = 0.0;
    std::string error;
};

struct ReplicationResult {
    int rep = 0;
    std::uint64_t seed = 0;
    bool ok = true;  ///< false drops the replication from every method
    double sigma = 0.0;
    std::vector<MethodResult> methods;  ///< aligned with the method list
};

struct SummaryRow {
    int setting = 0;
    double snr = 0.0;
    double rho = 0.0;
    std::string method;
    std::string metric;
    double trimmed_mean = 0.0;
    double sd = 0.0;
    /// Rank statistics; NaN where the method has no such rank.
    double mean_r = std::numeric_limits<double>::quiet_NaN();
    double match_r = std::numeric_limits<double>::quiet_NaN();
    double mean_rx = std::numeric_limits<double>::quiet_NaN();
    double match_rx = std::numeric_limits<double>::quiet_NaN();
    double mean_ry = std::numeric_limits<double>::quiet_NaN();
    double match_ry = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicationTable {
    ScenarioSpec spec;
    std::vector<Method> methods;
    std::vector<ReplicationResult> reps;
    std::vector<SummaryRow> rows;
    int used_reps = 0;
};

/// Seed of replication `rep`, derived from (base, rep) through std::seed_seq.
std::uint64_t replication_seed(std::uint64_t base, int rep);

/// Fits one method on a generated data set and scores it on the test set.
MethodResult evaluate_method(Method method, const GeneratedData& data, const RunOptions& options,
                             std::uint64_t seed);

/// Replications run in parallel; every replication draws from its own
/// derived seed so the table does not depend on the thread count.
ReplicationTable run_replications(const ScenarioSpec& spec, const std::vector<Method>& methods, int n_reps, int trim,
                                  const RunOptions& options = {});

/// Mean of the values left after dropping the `trim` smallest and largest.
double trimmed_mean(std::vector<double> values, int trim);

/// Sample standard deviation of the same retained values.
double trimmed_sd(std::vector<double> values, int trim);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// One line per replication and method with the raw metrics.
void write_raw_csv(std::ostream& out, const ReplicationTable& table);

}  // namespace nrrr
