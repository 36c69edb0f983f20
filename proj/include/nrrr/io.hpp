#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nrrr/basis.hpp"
#include "nrrr/estimators.hpp"
#include "nrrr/integrate.hpp"

namespace nrrr {

// ---------------------------------------------------------------------------
// Long-format CSV: subject_id, var_role ("x" | "y"), var_index (1-based), time, value.

struct LongData {
    std::vector<std::string> subject_ids;  ///< in order of first appearance
    std::vector<FunctionalSample> samples;
};

struct ReadOptions {
    bool require_y = true;  ///< false accepts predictor-only files (prediction input)
};

/// Parses the long format. Each subject's grid for a role is the sorted set of
/// its distinct times; every variable of that role must be observed at each
/// grid point exactly once. Throws SchemaError on malformed input.
LongData read_long_csv(std::istream& in, const ReadOptions& options = {});
LongData read_long_csv_file(const std::string& path, const ReadOptions& options = {});

void write_long_csv(std::ostream& out, const LongData& data);

/// Pointwise mean curves removed by center_pointwise.
struct MeanCurves {
    std::vector<double> x_grid;
    Eigen::MatrixXd x_mean;  ///< g x p
    std::vector<double> y_grid;
    Eigen::MatrixXd y_mean;  ///< m x d
};

/// Subtracts, for every variable, the mean curve across subjects at each grid
/// point. All subjects must share the same grids.
MeanCurves center_pointwise(std::vector<FunctionalSample>& samples);

// ---------------------------------------------------------------------------
// Fit artifact (text container, magic "NRRR1").

struct FitArtifact {
    std::string method = "NRRR";
    int p = 0, d = 0;
    bool centered = false;
    MeanCurves means;  ///< stored only when centered
    BasisSpec x_spec, y_spec;
    NrrrFit fit;
};

void save_artifact(std::ostream& out, const FitArtifact& artifact);
FitArtifact load_artifact(std::istream& in);
void save_artifact_file(const std::string& path, const FitArtifact& artifact);
FitArtifact load_artifact_file(const std::string& path);

}  // namespace nrrr
