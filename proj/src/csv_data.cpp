#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>

#include "nrrr/errors.hpp"
#include "nrrr/io.hpp"

namespace nrrr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Splits one CSV line; double quotes around a field are removed ("" is a literal quote).
std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw SchemaError("unterminated quoted field");
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& s, const std::string& what, std::size_t line) {
    if (s.empty()) throw SchemaError("line " + std::to_string(line) + ": empty " + what);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE)
        throw SchemaError("line " + std::to_string(line) + ": " + what + " '" + s + "' is not a number");
    return v;
}

int parse_index(const std::string& s, std::size_t line) {
    const double v = parse_double(s, "var_index", line);
    if (v < 1 || v != std::floor(v) || v > 1e6)
        throw SchemaError("line " + std::to_string(line) + ": var_index must be a positive integer");
    return static_cast<int>(v);
}

struct RoleObs {
    std::map<std::pair<int, double>, double> values;  // (var_index, time) -> value
    std::set<double> times;
    int max_index = 0;
};

// Builds the grid and g x p matrix for one role of one subject.
void assemble_role(const RoleObs& obs, const std::string& subject, const char* role, int expected_vars,
                   std::vector<double>& grid, Eigen::MatrixXd& vals) {
    grid.assign(obs.times.begin(), obs.times.end());
    vals.resize(static_cast<Eigen::Index>(grid.size()), expected_vars);
    for (int k = 1; k <= expected_vars; ++k)
        for (std::size_t u = 0; u < grid.size(); ++u) {
            auto it = obs.values.find({k, grid[u]});
            if (it == obs.values.end())
                throw SchemaError("subject '" + subject + "': " + role + std::to_string(k) + " has no value at time " +
                                  std::to_string(grid[u]));
            vals(static_cast<Eigen::Index>(u), k - 1) = it->second;
        }
}

}  // namespace

LongData read_long_csv(std::istream& in, const ReadOptions& options) {
    std::string line;
    std::size_t lineno = 0;
    // Header (skip a UTF-8 byte order mark).
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw SchemaError("CSV is empty (a header is required)");

    const std::vector<std::string> header = split_line(line);
    const char* required[] = {"subject_id", "var_role", "var_index", "time", "value"};
    std::size_t col[5];
    for (int c = 0; c < 5; ++c) {
        auto it = std::find(header.begin(), header.end(), required[c]);
        if (it == header.end()) throw SchemaError(std::string("CSV header lacks column '") + required[c] + "'");
        col[c] = static_cast<std::size_t>(it - header.begin());
    }

    LongData out;
    std::unordered_map<std::string, std::size_t> subject_pos;
    std::vector<RoleObs> xs, ys;

    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split_line(line);
        if (f.size() != header.size())
            throw SchemaError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                              " fields, found " + std::to_string(f.size()));
        const std::string& id = f[col[0]];
        if (id.empty()) throw SchemaError("line " + std::to_string(lineno) + ": empty subject_id");
        const std::string role = f[col[1]];
        if (role != "x" && role != "y")
            throw SchemaError("line " + std::to_string(lineno) + ": var_role must be 'x' or 'y', got '" + role + "'");
        const int index = parse_index(f[col[2]], lineno);
        const double time = parse_double(f[col[3]], "time", lineno);
        const double value = parse_double(f[col[4]], "value", lineno);
        if (!std::isfinite(time) || !std::isfinite(value))
            throw SchemaError("line " + std::to_string(lineno) + ": non-finite time or value");

        auto [it, inserted] = subject_pos.try_emplace(id, out.subject_ids.size());
        if (inserted) {
            out.subject_ids.push_back(id);
            xs.emplace_back();
            ys.emplace_back();
        }
        RoleObs& obs = role == "x" ? xs[it->second] : ys[it->second];
        if (!obs.values.emplace(std::make_pair(index, time), value).second)
            throw SchemaError("line " + std::to_string(lineno) + ": duplicate observation for subject '" + id +
                              "', " + role + std::to_string(index) + " at time " + f[col[3]]);
        obs.times.insert(time);
        obs.max_index = std::max(obs.max_index, index);
    }
    if (out.subject_ids.empty()) throw SchemaError("CSV has a header but no data rows");

    int p = 0, d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        p = std::max(p, xs[i].max_index);
        d = std::max(d, ys[i].max_index);
    }
    if (p == 0) throw SchemaError("CSV has no predictor (x) rows");
    if (options.require_y && d == 0) throw SchemaError("CSV has no response (y) rows");

    out.samples.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::string& id = out.subject_ids[i];
        if (xs[i].times.empty()) throw SchemaError("subject '" + id + "' has no predictor rows");
        assemble_role(xs[i], id, "x", p, out.samples[i].x_grid, out.samples[i].x_vals);
        if (d > 0) {
            if (ys[i].times.empty()) throw SchemaError("subject '" + id + "' has no response rows");
            assemble_role(ys[i], id, "y", d, out.samples[i].y_grid, out.samples[i].y_vals);
        }
    }
    return out;
}

LongData read_long_csv_file(const std::string& path, const ReadOptions& options) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    return read_long_csv(in, options);
}

void write_long_csv(std::ostream& out, const LongData& data) {
    out << "subject_id,var_role,var_index,time,value\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const FunctionalSample& s = data.samples[i];
        const std::string id = i < data.subject_ids.size() ? data.subject_ids[i] : std::to_string(i + 1);
        for (Eigen::Index l = 0; l < s.x_vals.cols(); ++l)
            for (std::size_t u = 0; u < s.x_grid.size(); ++u)
                out << id << ",x," << l + 1 << ',' << s.x_grid[u] << ',' << s.x_vals(static_cast<Eigen::Index>(u), l)
                    << '\n';
        for (Eigen::Index k = 0; k < s.y_vals.cols(); ++k)
            for (std::size_t v = 0; v < s.y_grid.size(); ++v)
                out << id << ",y," << k + 1 << ',' << s.y_grid[v] << ',' << s.y_vals(static_cast<Eigen::Index>(v), k)
                    << '\n';
    }
}

MeanCurves center_pointwise(std::vector<FunctionalSample>& samples) {
    if (samples.empty()) return {};
    const FunctionalSample& first = samples.front();
    for (const auto& s : samples)
        if (s.x_grid != first.x_grid || s.y_grid != first.y_grid || s.p() != first.p() || s.d() != first.d())
            throw SchemaError("pointwise centering needs every subject on the same grids");
    Eigen::MatrixXd xm = Eigen::MatrixXd::Zero(first.x_vals.rows(), first.x_vals.cols());
    Eigen::MatrixXd ym = Eigen::MatrixXd::Zero(first.y_vals.rows(), first.y_vals.cols());
    for (const auto& s : samples) {
        xm += s.x_vals;
        ym += s.y_vals;
    }
    xm /= static_cast<double>(samples.size());
    ym /= static_cast<double>(samples.size());
    for (auto& s : samples) {
        s.x_vals -= xm;
        s.y_vals -= ym;
    }
    return {first.x_grid, xm, first.y_grid, ym};
}

}  // namespace nrrr
