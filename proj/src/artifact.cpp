// NRRR1 fit container. Line-oriented text:
//
//   NRRR1
//   method <name>
//   dims <p> <d> <Jx> <Jy>
//   ranks <r> <rx> <ry>
//   lambda <value>
//   sse <value>
//   converged <0|1>
//   iters <k>
//   centered <0|1>
//   basis x <lo> <hi> <degree> <num_funcs>
//   basis y <lo> <hi> <degree> <num_funcs>
//   array <name> <rows> <cols>        followed by <rows> lines of <cols> values
//   ...
//   end
//
// Arrays: U, V, A, B, C, x_knots, y_knots, objective_trace (knots and trace
// as single rows). Centered fits add x_mean_grid, x_mean (g x p), y_mean_grid
// and y_mean (m x d). Unknown arrays are ignored on load. Numbers carry 17
// significant digits.

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "nrrr/errors.hpp"
#include "nrrr/io.hpp"

namespace nrrr {

namespace {

constexpr const char* kMagic = "NRRR1";

void write_array(std::ostream& out, const char* name, const Eigen::MatrixXd& M) {
    out << "array " << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? " " : "") << M(i, j);
        out << '\n';
    }
}

Eigen::MatrixXd row_of(const std::vector<double>& v) {
    Eigen::MatrixXd M(1, static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) M(0, static_cast<Eigen::Index>(i)) = v[i];
    return M;
}

std::vector<double> vec_of(const Eigen::MatrixXd& M) {
    if (M.rows() > 1) throw SchemaError("artifact: expected a single-row array");
    return std::vector<double>(M.data(), M.data() + M.size());
}

double to_double(const std::string& tok) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() || errno == ERANGE)
        throw SchemaError("artifact: bad number '" + tok + "'");
    return v;
}

int to_int(const std::string& tok) {
    const double v = to_double(tok);
    if (v != static_cast<double>(static_cast<long long>(v)) || v < 0 || v > 1e9)
        throw SchemaError("artifact: bad integer '" + tok + "'");
    return static_cast<int>(v);
}

class Reader {
  public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::vector<std::string> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            std::istringstream ss(line);
            std::vector<std::string> tok;
            std::string t;
            while (ss >> t) tok.push_back(t);
            if (!tok.empty()) return tok;
        }
        throw SchemaError("artifact: unexpected end of file after line " + std::to_string(line_));
    }

    std::vector<std::string> expect(const std::string& key, std::size_t count) {
        auto tok = next();
        if (tok.front() != key || tok.size() != count + 1)
            throw SchemaError("artifact line " + std::to_string(line_) + ": expected '" + key + "' with " +
                              std::to_string(count) + " values");
        return tok;
    }

    Eigen::MatrixXd matrix(int rows, int cols) {
        Eigen::MatrixXd M(rows, cols);
        for (int i = 0; i < rows; ++i) {
            const auto tok = cols > 0 ? next() : std::vector<std::string>{};
            if (static_cast<int>(tok.size()) != cols)
                throw SchemaError("artifact line " + std::to_string(line_) + ": expected " + std::to_string(cols) +
                                  " values");
            for (int j = 0; j < cols; ++j) M(i, j) = to_double(tok[static_cast<std::size_t>(j)]);
        }
        return M;
    }

  private:
    std::istream& in_;
    std::size_t line_ = 0;
};

BasisSpec read_basis(Reader& rd, const char* side) {
    const auto tok = rd.expect("basis", 5);
    if (tok[1] != side) throw SchemaError(std::string("artifact: expected basis ") + side);
    BasisSpec s;
    s.domain_lo = to_double(tok[2]);
    s.domain_hi = to_double(tok[3]);
    s.degree = to_int(tok[4]);
    s.num_funcs = to_int(tok[5]);
    return s;
}

}  // namespace

void save_artifact(std::ostream& out, const FitArtifact& a) {
    const NrrrFit& f = a.fit;
    out << std::setprecision(17);
    out << kMagic << '\n';
    out << "method " << a.method << '\n';
    out << "dims " << a.p << ' ' << a.d << ' ' << a.x_spec.num_funcs << ' ' << a.y_spec.num_funcs << '\n';
    out << "ranks " << f.r << ' ' << f.rx << ' ' << f.ry << '\n';
    out << "lambda " << f.lambda << '\n';
    out << "sse " << f.sse << '\n';
    out << "converged " << (f.converged ? 1 : 0) << '\n';
    out << "iters " << f.iters << '\n';
    out << "centered " << (a.centered ? 1 : 0) << '\n';
    out << "basis x " << a.x_spec.domain_lo << ' ' << a.x_spec.domain_hi << ' ' << a.x_spec.degree << ' '
        << a.x_spec.num_funcs << '\n';
    out << "basis y " << a.y_spec.domain_lo << ' ' << a.y_spec.domain_hi << ' ' << a.y_spec.degree << ' '
        << a.y_spec.num_funcs << '\n';
    write_array(out, "U", f.U);
    write_array(out, "V", f.V);
    write_array(out, "A", f.A);
    write_array(out, "B", f.B);
    write_array(out, "C", f.C);
    write_array(out, "x_knots", row_of(a.x_spec.knots));
    write_array(out, "y_knots", row_of(a.y_spec.knots));
    write_array(out, "objective_trace", row_of(f.objective_trace));
    if (a.centered) {
        write_array(out, "x_mean_grid", row_of(a.means.x_grid));
        write_array(out, "x_mean", a.means.x_mean);
        write_array(out, "y_mean_grid", row_of(a.means.y_grid));
        write_array(out, "y_mean", a.means.y_mean);
    }
    out << "end\n";
}

FitArtifact load_artifact(std::istream& in) {
    Reader rd(in);
    FitArtifact a;
    if (rd.next() != std::vector<std::string>{kMagic}) throw SchemaError("artifact: missing NRRR1 header");
    a.method = rd.expect("method", 1)[1];
    const auto dims = rd.expect("dims", 4);
    a.p = to_int(dims[1]);
    a.d = to_int(dims[2]);
    const int Jx = to_int(dims[3]), Jy = to_int(dims[4]);
    const auto ranks = rd.expect("ranks", 3);
    a.fit.r = to_int(ranks[1]);
    a.fit.rx = to_int(ranks[2]);
    a.fit.ry = to_int(ranks[3]);
    a.fit.lambda = to_double(rd.expect("lambda", 1)[1]);
    a.fit.sse = to_double(rd.expect("sse", 1)[1]);
    a.fit.converged = to_int(rd.expect("converged", 1)[1]) != 0;
    a.fit.iters = to_int(rd.expect("iters", 1)[1]);
    a.centered = to_int(rd.expect("centered", 1)[1]) != 0;
    a.x_spec = read_basis(rd, "x");
    a.y_spec = read_basis(rd, "y");

    std::map<std::string, Eigen::MatrixXd> arrays;
    for (;;) {
        const auto tok = rd.next();
        if (tok.front() == "end") break;
        if (tok.front() != "array" || tok.size() != 4) throw SchemaError("artifact: expected 'array' or 'end'");
        arrays[tok[1]] = rd.matrix(to_int(tok[2]), to_int(tok[3]));
    }
    auto take = [&](const char* name) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw SchemaError(std::string("artifact: missing array ") + name);
        return it->second;
    };
    a.fit.U = take("U");
    a.fit.V = take("V");
    a.fit.A = take("A");
    a.fit.B = take("B");
    a.fit.C = take("C");
    a.x_spec.knots = vec_of(take("x_knots"));
    a.y_spec.knots = vec_of(take("y_knots"));
    a.fit.objective_trace = vec_of(take("objective_trace"));
    if (a.centered) {
        a.means.x_grid = vec_of(take("x_mean_grid"));
        a.means.x_mean = take("x_mean");
        a.means.y_grid = vec_of(take("y_mean_grid"));
        a.means.y_mean = take("y_mean");
        if (a.means.x_mean.rows() != static_cast<Eigen::Index>(a.means.x_grid.size()) || a.means.x_mean.cols() != a.p ||
            a.means.y_mean.rows() != static_cast<Eigen::Index>(a.means.y_grid.size()) || a.means.y_mean.cols() != a.d)
            throw SchemaError("artifact: mean curves do not match their grids");
    }

    if (a.x_spec.num_funcs != Jx || a.y_spec.num_funcs != Jy ||
        a.x_spec.knots.size() != static_cast<std::size_t>(Jx + a.x_spec.degree + 1) ||
        a.y_spec.knots.size() != static_cast<std::size_t>(Jy + a.y_spec.degree + 1))
        throw SchemaError("artifact: basis description is inconsistent");
    if (a.fit.C.rows() != static_cast<Eigen::Index>(Jx) * a.p || a.fit.C.cols() != static_cast<Eigen::Index>(Jy) * a.d)
        throw SchemaError("artifact: C does not match the dimension header");
    if (a.fit.U.rows() != a.d || a.fit.V.rows() != a.p || a.fit.A.cols() != a.fit.B.cols())
        throw SchemaError("artifact: factor shapes do not match the dimension header");
    return a;
}

void save_artifact_file(const std::string& path, const FitArtifact& artifact) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    save_artifact(out, artifact);
    if (!out) throw SchemaError("error while writing '" + path + "'");
}

FitArtifact load_artifact_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    return load_artifact(in);
}

}  // namespace nrrr
