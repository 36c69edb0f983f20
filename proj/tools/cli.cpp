#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nrrr/errors.hpp"
#include "nrrr/io.hpp"
#include "nrrr/parallel.hpp"
#include "nrrr/sim.hpp"

namespace nrrr::cli {

namespace {

using json = nlohmann::json;

struct Options {
    std::string config;
    int threads = 1;
    std::uint64_t seed = 1;

    // scenario
    int setting = 1;
    double snr = 1.0;
    double rho = 0.1;
    int n = 100;
    int n_test = 500;
    int reps = 50;
    int trim = -1;
    std::string methods = "nrrr,nrrr_x,rrr";
    std::string raw;
    std::string test_out;

    // fitting
    std::string data;
    std::string method = "nrrr";
    std::string ranks;
    std::string select = "bic";
    int folds = 10;
    double lambda = 0.0;
    int jx = 8;
    int jy = 8;
    int degree = 3;
    int restarts = 0;
    int max_iter = 100;
    double tol = 1e-4;
    bool center = false;
    bool exhaustive = false;

    // prediction and surfaces
    std::string fit;
    std::string s_grid;
    std::string t_grid;

    std::string out;
};

struct Command {
    CLI::App* app = nullptr;
    std::string name;
};

// Output goes to --out when given, otherwise to the caller's stream.
class Sink {
  public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw SchemaError("cannot write '" + path + "'");
            stream_ = file_.get();
        }
    }
    std::ostream& operator*() { return *stream_; }
    void finish(const std::string& path) {
        stream_->flush();
        if (!*stream_) throw SchemaError("error while writing '" + (path.empty() ? std::string("output") : path) + "'");
    }

  private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_number(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty()) throw ConfigError(what + ": '" + s + "' is not a number");
    return v;
}

int parse_int(const std::string& s, const std::string& what) {
    const double v = parse_number(s, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(what + ": '" + s + "' is not an integer");
    return static_cast<int>(v);
}

// "r,rx,ry", or a single "r" for the baselines.
std::optional<RankTriple> parse_ranks(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const auto parts = split_list(s);
    RankTriple t;
    if (parts.size() == 1) {
        t.r = parse_int(parts[0], "--ranks");
    } else if (parts.size() == 3) {
        t.r = parse_int(parts[0], "--ranks");
        t.rx = parse_int(parts[1], "--ranks");
        t.ry = parse_int(parts[2], "--ranks");
        if (t.rx < 1 || t.ry < 1) throw ConfigError("--ranks: rx and ry must be positive");
    } else {
        throw ConfigError("--ranks expects r,rx,ry (or a single r)");
    }
    if (t.r < 1) throw ConfigError("--ranks: r must be positive");
    return t;
}

// "lo:hi:count" or an explicit comma-separated list.
std::vector<double> parse_grid(const std::string& s, const std::string& what) {
    std::vector<double> g;
    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(item);
        if (parts.size() != 3) throw ConfigError(what + " expects lo:hi:count");
        const double lo = parse_number(parts[0], what), hi = parse_number(parts[1], what);
        const int count = parse_int(parts[2], what);
        if (count < 1) throw ConfigError(what + ": count must be positive");
        if (count == 1) return {lo};
        for (int i = 0; i < count; ++i) g.push_back(lo + (hi - lo) * i / (count - 1));
    } else {
        for (const auto& item : split_list(s)) g.push_back(parse_number(item, what));
    }
    if (g.empty()) throw ConfigError(what + " is empty");
    return g;
}

std::vector<double> uniform_points(double lo, double hi, int count) {
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
    return g;
}

Method parse_method_checked(const std::string& name) {
    try {
        return parse_method(name);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

RunOptions run_options(const Options& o, bool lambda_given) {
    RunOptions r;
    if (o.select != "bic" && o.select != "cv") throw ConfigError("--select must be bic or cv");
    if (o.folds < 2) throw ConfigError("--folds must be at least 2");
    if (o.restarts < 0) throw ConfigError("--restarts must be >= 0");
    if (o.max_iter < 1) throw ConfigError("--max-iter must be positive");
    if (!(o.tol > 0.0)) throw ConfigError("--tol must be positive");
    r.select = o.select;
    r.folds = o.folds;
    r.restarts = o.restarts;
    r.max_iter = o.max_iter;
    r.tol = o.tol;
    r.exhaustive = o.exhaustive;
    r.fixed_ranks = parse_ranks(o.ranks);
    if (lambda_given) {
        if (!(o.lambda >= 0.0) || !std::isfinite(o.lambda)) throw ConfigError("--lambda must be finite and >= 0");
        r.lambda = o.lambda;
    }
    return r;
}

ScenarioSpec scenario(const Options& o, const CLI::App& app) {
    if (o.setting != 1 && o.setting != 2) throw ConfigError("--setting must be 1 or 2");
    ScenarioSpec s = setting_preset(o.setting);
    s.snr = o.snr;
    s.rho = o.rho;
    s.seed = o.seed;
    if (app.count("--n")) s.n = o.n;
    if (app.count("--n-test")) s.n_test = o.n_test;
    if (app.count("--jx")) s.Jx = o.jx;
    if (app.count("--jy")) s.Jy = o.jy;
    if (app.count("--degree")) s.degree = o.degree;
    try {
        validate_spec(s);
    } catch (const DimensionError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

// Basis domains span every observed time of the role.
std::pair<double, double> time_range(const std::vector<FunctionalSample>& samples, bool x_side) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : samples) {
        const auto& g = x_side ? s.x_grid : s.y_grid;
        if (g.empty()) continue;
        lo = std::min(lo, g.front());
        hi = std::max(hi, g.back());
    }
    if (!(lo < hi)) throw DomainError(std::string(x_side ? "predictor" : "response") + " times span an empty interval");
    return {lo, hi};
}

struct Prepared {
    LongData data;
    FitArtifact artifact;  // bases, centering and dimensions filled in
    IntegratedDesign design;
};

Prepared prepare(const Options& o) {
    if (o.data.empty()) throw ConfigError("--data is required");
    if (o.jx < 1 || o.jy < 1 || o.degree < 0) throw ConfigError("--jx/--jy must be positive and --degree >= 0");
    Prepared p;
    p.data = read_long_csv_file(o.data);
    if (o.center) {
        p.artifact.means = center_pointwise(p.data.samples);
        p.artifact.centered = true;
    }
    const auto [xlo, xhi] = time_range(p.data.samples, true);
    const auto [ylo, yhi] = time_range(p.data.samples, false);
    p.artifact.x_spec = make_bspline(xlo, xhi, o.jx, o.degree);
    p.artifact.y_spec = make_bspline(ylo, yhi, o.jy, o.degree);
    const GramMatrix yg = gram(p.artifact.y_spec);
    p.design = assemble_design(p.data.samples, p.artifact.x_spec, p.artifact.y_spec, yg);
    p.artifact.p = p.design.p;
    p.artifact.d = p.design.d;
    return p;
}

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const Options& o, const CLI::App& app, std::ostream& out, std::ostream& err) {
    const ScenarioSpec spec = scenario(o, app);
    std::vector<Method> methods;
    for (const auto& m : split_list(o.methods)) methods.push_back(parse_method_checked(m));
    if (methods.empty()) throw ConfigError("--methods is empty");
    if (o.reps < 1) throw ConfigError("--reps must be positive");
    const int trim = o.trim >= 0 ? o.trim : o.reps * 20 / 300;
    if (2 * trim >= o.reps) throw ConfigError("--reps must exceed twice --trim");
    const RunOptions ro = run_options(o, app.count("--lambda") > 0);

    const ReplicationTable table = run_replications(spec, methods, o.reps, trim, ro);
    err << "replications used: " << table.used_reps << " of " << o.reps << " (trim " << trim << ")\n";
    for (const auto& r : table.reps)
        if (!r.ok)
            for (const auto& m : r.methods)
                if (!m.ok) err << "replication " << r.rep << " dropped: " << m.error << "\n";

    Sink sink(o.out, out);
    write_summary_csv(*sink, table.rows);
    sink.finish(o.out);
    if (!o.raw.empty()) {
        Sink raw(o.raw, out);
        write_raw_csv(*raw, table);
        raw.finish(o.raw);
    }
    if (!o.out.empty()) {
        for (const auto& row : table.rows) {
            if (row.metric != "mspe") continue;
            out << std::left << std::setw(7) << row.method << " MSPE " << std::setprecision(6) << row.trimmed_mean
                << " (sd " << row.sd << ")";
            if (!std::isnan(row.mean_r)) out << "  mean r " << row.mean_r;
            if (!std::isnan(row.mean_rx)) out << "  rx " << row.mean_rx;
            if (!std::isnan(row.mean_ry)) out << "  ry " << row.mean_ry;
            out << "\n";
        }
    }
    return kOk;
}

int cmd_generate(const Options& o, const CLI::App& app, std::ostream& out, std::ostream& err) {
    const ScenarioSpec spec = scenario(o, app);
    const GeneratedData data = generate(spec);
    LongData train{{}, data.train};
    Sink sink(o.out, out);
    write_long_csv(*sink, train);
    sink.finish(o.out);
    if (!o.test_out.empty()) {
        LongData test{{}, data.test};
        Sink t(o.test_out, out);
        write_long_csv(*t, test);
        t.finish(o.test_out);
    }
    err << "generated n=" << spec.n << " p=" << spec.p << " d=" << spec.d << " sigma=" << num(data.sigma) << "\n";
    return kOk;
}

int cmd_fit(const Options& o, const CLI::App& app, std::ostream& out, std::ostream& err) {
    const Method method = parse_method_checked(o.method);
    const RunOptions ro = run_options(o, app.count("--lambda") > 0);
    Prepared prep = prepare(o);
    const MethodFit mf = fit_method(method, prep.design, ro, o.seed);
    prep.artifact.method = method_name(method);
    prep.artifact.fit = mf.fit;

    Sink sink(o.out, out);
    save_artifact(*sink, prep.artifact);
    sink.finish(o.out);
    err << method_name(method) << ": r=" << mf.fit.r << " rx=" << mf.fit.rx << " ry=" << mf.fit.ry
        << " lambda=" << num(mf.fit.lambda) << " sse=" << num(mf.fit.sse) << " iters=" << mf.fit.iters
        << (mf.fit.converged ? "" : " (not converged)") << "\n";
    return kOk;
}

int cmd_select(const Options& o, const CLI::App& app, std::ostream& out, std::ostream& err) {
    const Method method = parse_method_checked(o.method);
    if (method == Method::ols) throw ConfigError("select: OLS has no ranks to select");
    RunOptions ro = run_options(o, app.count("--lambda") > 0);
    if (ro.fixed_ranks) throw ConfigError("select: --ranks fixes the ranks; drop it to search");
    const Prepared prep = prepare(o);
    const MethodFit mf = fit_method(method, prep.design, ro, o.seed);
    if (!mf.search) throw NumericalError("select: no search was run");
    const RankSearchResult& res = *mf.search;
    for (const auto& w : res.warnings) err << "warning: " << w << "\n";

    // The selected triple is marked on its last evaluation.
    std::size_t marked = res.search_path.size();
    for (std::size_t i = 0; i < res.search_path.size(); ++i)
        if (res.search_path[i].ok && res.search_path[i].ranks == mf.ranks &&
            (method != Method::rrs || res.search_path[i].lambda == mf.lambda))
            marked = i;

    Sink sink(o.out, out);
    const bool as_json = o.out.size() >= 5 && o.out.compare(o.out.size() - 5, 5, ".json") == 0;
    if (as_json) {
        json j;
        j["method"] = method_name(method);
        j["selector"] = method == Method::rrr || method == Method::rrs ? "cv" : o.select;
        j["selected"] = {{"r", mf.ranks.r}, {"rx", mf.ranks.rx}, {"ry", mf.ranks.ry}};
        j["lambda"] = mf.lambda;
        j["warnings"] = res.warnings;
        json path = json::array();
        for (const auto& s : res.search_path) {
            json e = {{"phase", s.phase}, {"r", s.ranks.r},   {"rx", s.ranks.rx},   {"ry", s.ranks.ry},
                      {"ok", s.ok},       {"lambda", s.lambda}, {"note", s.note}};
            if (s.ok) {
                e["score"] = s.score;
                e["sse"] = s.sse;
                e["df"] = s.df;
            }
            path.push_back(e);
        }
        j["search_path"] = path;
        *sink << std::setprecision(17) << j.dump(2) << "\n";
    } else {
        *sink << "phase,r,rx,ry,lambda,ok,score,sse,df,selected,note\n";
        for (std::size_t i = 0; i < res.search_path.size(); ++i) {
            const auto& s = res.search_path[i];
            const double nan = std::numeric_limits<double>::quiet_NaN();
            *sink << s.phase << ',' << s.ranks.r << ',' << s.ranks.rx << ',' << s.ranks.ry << ',' << num(s.lambda)
                  << ',' << (s.ok ? 1 : 0) << ',' << num(s.ok ? s.score : nan) << ',' << num(s.ok ? s.sse : nan) << ','
                  << num(s.ok ? s.df : nan) << ',' << (i == marked ? 1 : 0) << ',' << csv_field(s.note) << '\n';
        }
    }
    sink.finish(o.out);
    err << "selected r=" << mf.ranks.r << " rx=" << mf.ranks.rx << " ry=" << mf.ranks.ry;
    if (method == Method::nrrs || method == Method::rrs) err << " lambda=" << num(mf.lambda);
    err << "\n";
    return kOk;
}

// Linear interpolation of the columns of `vals` (on `grid`) at t.
Eigen::RowVectorXd interpolate_row(const std::vector<double>& grid, const Eigen::MatrixXd& vals, double t) {
    if (grid.size() == 1 || t <= grid.front()) {
        if (t < grid.front() - 1e-12) throw DomainError("prediction time lies outside the training response grid");
        return vals.row(0);
    }
    if (t >= grid.back()) {
        if (t > grid.back() + 1e-12) throw DomainError("prediction time lies outside the training response grid");
        return vals.row(vals.rows() - 1);
    }
    const auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const auto hi = static_cast<Eigen::Index>(it - grid.begin());
    const double w = (t - grid[static_cast<std::size_t>(hi - 1)]) /
                     (grid[static_cast<std::size_t>(hi)] - grid[static_cast<std::size_t>(hi - 1)]);
    return (1.0 - w) * vals.row(hi - 1) + w * vals.row(hi);
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.fit.empty()) throw ConfigError("--fit is required");
    if (o.data.empty()) throw ConfigError("--data is required");
    std::optional<std::vector<double>> fixed_t;
    if (!o.t_grid.empty()) fixed_t = parse_grid(o.t_grid, "--t-grid");

    const FitArtifact art = load_artifact_file(o.fit);
    LongData data = read_long_csv_file(o.data, ReadOptions{false});
    const GramMatrix yg = gram(art.y_spec);

    Sink sink(o.out, out);
    *sink << "subject_id,var_role,var_index,time,value\n" << std::setprecision(17);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        FunctionalSample& s = data.samples[i];
        if (s.p() != art.p)
            throw DimensionError("subject '" + data.subject_ids[i] + "' has " + std::to_string(s.p()) +
                                 " predictors, the fit expects " + std::to_string(art.p));
        if (art.centered) {
            if (s.x_grid != art.means.x_grid)
                throw DimensionError("centered fit: subject '" + data.subject_ids[i] +
                                     "' is not observed on the training predictor grid");
            s.x_vals -= art.means.x_mean;
        }
        std::vector<double> t;
        if (fixed_t)
            t = *fixed_t;
        else if (!s.y_grid.empty())
            t = s.y_grid;
        else
            t = uniform_points(art.y_spec.domain_lo, art.y_spec.domain_hi, 101);
        Eigen::MatrixXd yhat = predict(art.fit.C, std::span<const FunctionalSample>(&s, 1), art.x_spec, art.y_spec,
                                       yg, t)
                                   .front();
        if (art.centered)
            for (std::size_t v = 0; v < t.size(); ++v)
                yhat.row(static_cast<Eigen::Index>(v)) += interpolate_row(art.means.y_grid, art.means.y_mean, t[v]);
        const std::string id = csv_field(data.subject_ids[i]);
        for (Eigen::Index k = 0; k < yhat.cols(); ++k)
            for (std::size_t v = 0; v < t.size(); ++v)
                *sink << id << ",y," << k + 1 << ',' << t[v] << ',' << yhat(static_cast<Eigen::Index>(v), k) << '\n';
    }
    sink.finish(o.out);
    err << "predicted " << data.samples.size() << " subjects\n";
    return kOk;
}

int cmd_surface(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.fit.empty()) throw ConfigError("--fit is required");
    const FitArtifact art = load_artifact_file(o.fit);
    const std::vector<double> s = o.s_grid.empty()
                                      ? uniform_points(art.x_spec.domain_lo, art.x_spec.domain_hi, 51)
                                      : parse_grid(o.s_grid, "--s-grid");
    const std::vector<double> t = o.t_grid.empty()
                                      ? uniform_points(art.y_spec.domain_lo, art.y_spec.domain_hi, 51)
                                      : parse_grid(o.t_grid, "--t-grid");
    const Surface surf = coef_surface(art.fit, art.x_spec, art.y_spec, gram(art.y_spec), s, t);

    Sink sink(o.out, out);
    *sink << "k,l,s,t,value\n" << std::setprecision(17);
    for (int k = 0; k < surf.d; ++k)
        for (int l = 0; l < surf.p; ++l)
            for (std::size_t is = 0; is < s.size(); ++is)
                for (std::size_t it = 0; it < t.size(); ++it)
                    *sink << k + 1 << ',' << l + 1 << ',' << s[is] << ',' << t[it] << ',' << surf.at(k, l, is, it)
                          << '\n';
    sink.finish(o.out);
    err << "surface: " << surf.d << " x " << surf.p << " on " << s.size() << " x " << t.size() << " points\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// Option wiring

void add_common(CLI::App* c, Options& o) {
    c->add_option("--config", o.config, "JSON file of option values; flags on the command line win");
    c->add_option("--threads", o.threads, "OpenMP threads")->check(CLI::PositiveNumber);
    c->add_option("--seed", o.seed, "Random seed");
}

void add_scenario(CLI::App* c, Options& o) {
    c->add_option("--setting", o.setting, "Simulation preset (1 or 2)");
    c->add_option("--snr", o.snr, "Signal-to-noise ratio (inf for noiseless data)");
    c->add_option("--rho", o.rho, "Predictor correlation");
    c->add_option("--n", o.n, "Training sample size");
    c->add_option("--n-test", o.n_test, "Test sample size");
    c->add_option("--jx", o.jx, "Predictor basis size");
    c->add_option("--jy", o.jy, "Response basis size");
    c->add_option("--degree", o.degree, "Spline degree");
}

void add_fitting(CLI::App* c, Options& o, bool with_basis) {
    c->add_option("--method", o.method, "nrrr, nrrr_x, nrrs, rrr, rrs or ols");
    c->add_option("--ranks", o.ranks, "Fixed ranks r,rx,ry (or r for the baselines)");
    c->add_option("--select", o.select, "Nested rank selector: bic or cv");
    c->add_option("--folds", o.folds, "Cross-validation folds");
    c->add_option("--lambda", o.lambda, "Fixed ridge level for nrrs/rrs");
    c->add_option("--restarts", o.restarts, "Extra random starts per fit");
    c->add_option("--max-iter", o.max_iter, "Iteration cap per fit");
    c->add_option("--tol", o.tol, "Relative-change convergence threshold");
    c->add_flag("--exhaustive", o.exhaustive, "Score every rank triple instead of the one-at-a-time path");
    if (with_basis) {
        c->add_option("--data", o.data, "Long-format CSV (subject_id,var_role,var_index,time,value)");
        c->add_option("--jx", o.jx, "Predictor basis size");
        c->add_option("--jy", o.jy, "Response basis size");
        c->add_option("--degree", o.degree, "Spline degree");
        c->add_flag("--center", o.center, "Remove pointwise mean curves before fitting");
    }
}

std::map<std::string, Command> build(CLI::App& app, Options& o) {
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    std::map<std::string, Command> cmds;
    auto add = [&](const char* name, const char* help) {
        CLI::App* c = app.add_subcommand(name, help);
        add_common(c, o);
        cmds[name] = {c, name};
        return c;
    };

    CLI::App* sim = add("simulate", "Run replicated simulations and write the summary table");
    add_scenario(sim, o);
    sim->add_option("--reps", o.reps, "Replications");
    sim->add_option("--trim", o.trim, "Replications trimmed at each end (default reps*20/300)");
    sim->add_option("--methods", o.methods, "Comma-separated methods");
    sim->add_option("--select", o.select, "Nested rank selector: bic or cv");
    sim->add_option("--folds", o.folds, "Cross-validation folds");
    sim->add_option("--ranks", o.ranks, "Fixed ranks r,rx,ry instead of selection");
    sim->add_option("--lambda", o.lambda, "Fixed ridge level for nrrs/rrs");
    sim->add_option("--restarts", o.restarts, "Extra random starts per fit");
    sim->add_option("--max-iter", o.max_iter, "Iteration cap per fit");
    sim->add_option("--tol", o.tol, "Relative-change convergence threshold");
    sim->add_flag("--exhaustive", o.exhaustive, "Score every rank triple instead of the one-at-a-time path");
    sim->add_option("--raw", o.raw, "Per-replication CSV");
    sim->add_option("--out", o.out, "Summary CSV (default stdout)");

    CLI::App* gen = add("generate", "Write one simulated data set as long-format CSV");
    add_scenario(gen, o);
    gen->add_option("--out", o.out, "Training CSV (default stdout)");
    gen->add_option("--test-out", o.test_out, "Test CSV");

    CLI::App* fit = add("fit", "Fit a model to CSV data and write the fit artifact");
    add_fitting(fit, o, true);
    fit->add_option("--out", o.out, "Fit artifact (default stdout)");

    CLI::App* sel = add("select", "Run the rank search and write every evaluated candidate");
    add_fitting(sel, o, true);
    sel->add_option("--out", o.out, "CSV, or JSON when the name ends in .json (default stdout CSV)");

    CLI::App* pred = add("predict", "Predict response curves for the subjects in a CSV");
    pred->add_option("--fit", o.fit, "Fit artifact");
    pred->add_option("--data", o.data, "Long-format CSV with predictor rows");
    pred->add_option("--t-grid", o.t_grid, "lo:hi:count or a comma list (default each subject's response grid)");
    pred->add_option("--out", o.out, "Output CSV (default stdout)");

    CLI::App* surf = add("surface", "Export regression surfaces as long-format CSV");
    surf->add_option("--fit", o.fit, "Fit artifact");
    surf->add_option("--s-grid", o.s_grid, "lo:hi:count or a comma list (default 51 points)");
    surf->add_option("--t-grid", o.t_grid, "lo:hi:count or a comma list (default 51 points)");
    surf->add_option("--out", o.out, "Output CSV (default stdout)");
    return cmds;
}

const Command* active(const std::map<std::string, Command>& cmds) {
    for (const auto& [name, c] : cmds)
        if (c.app->parsed()) return &c;
    return nullptr;
}

// Command-line tokens for the config entries the user did not pass.
std::vector<std::string> config_tokens(const std::string& path, const CLI::App& cmd) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config '" + path + "' must hold a JSON object");
    std::vector<std::string> tokens;
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        const CLI::Option* opt = cmd.get_option_no_throw(flag);
        if (!opt || key == "config") throw ConfigError("config '" + path + "': unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        std::string text;
        if (value.is_string())
            text = value.get<std::string>();
        else if (value.is_array()) {
            for (const auto& v : value) text += (text.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
        } else
            text = value.dump();
        tokens.push_back(flag + "=" + text);
    }
    return tokens;
}

void log_config(const CLI::App& cmd, const std::string& name, std::ostream& err) {
    json j;
    j["command"] = name;
    for (const CLI::Option* opt : cmd.get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
        const std::string key = opt->get_lnames().front();
        const auto& res = opt->results();
        std::string v = opt->count() > 0 && !res.empty() ? res.back() : opt->get_default_str();
        if (opt->get_items_expected_max() == 0) v = opt->as<bool>() ? "true" : "false";
        j[key] = v;
    }
    err << "config " << j.dump() << "\n";
}

int dispatch(const std::string& name, const Options& o, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
    const ThreadScope threads(o.threads);
    if (name == "simulate") return cmd_simulate(o, cmd, out, err);
    if (name == "generate") return cmd_generate(o, cmd, out, err);
    if (name == "fit") return cmd_fit(o, cmd, out, err);
    if (name == "select") return cmd_select(o, cmd, out, err);
    if (name == "predict") return cmd_predict(o, out, err);
    return cmd_surface(o, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        std::vector<std::string> argv = args;
        for (int pass = 0; pass < 2; ++pass) {
            Options o;
            CLI::App app{"Nested reduced-rank regression for multivariate functional data", "nrrr"};
            const auto cmds = build(app, o);
            std::vector<std::string> reversed(argv.rbegin(), argv.rend());
            try {
                app.parse(reversed);
            } catch (const CLI::ParseError& e) {
                const int code = app.exit(e, out, err);
                return code == 0 ? kOk : kUsage;
            }
            const Command* cmd = active(cmds);
            if (pass == 0 && !o.config.empty()) {
                // Re-parse with the config entries appended; explicit flags were skipped.
                const auto extra = config_tokens(o.config, *cmd->app);
                argv.insert(argv.end(), extra.begin(), extra.end());
                continue;
            }
            log_config(*cmd->app, cmd->name, err);
            return dispatch(cmd->name, o, *cmd->app, out, err);
        }
        return kUsage;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace nrrr::cli
