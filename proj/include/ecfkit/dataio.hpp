#pragma once

// File formats.
//
// Dataset CSV (wide, one curve per row):
//   group,<t_1>,<t_2>,...,<t_J>
//   <label>,<y(t_1)>,...,<y(t_J)>
// Groups are ordered by first appearance. Header labels must be strictly
// increasing numbers unless a domain override is given, in which case the
// grid is uniform over the override interval and the labels are ignored.
//
// Test reports, experiment configs, power configs and results are JSON.

#include <ecfkit/asympower.hpp>
#include <ecfkit/ecftest.hpp>
#include <ecfkit/errors.hpp>
#include <ecfkit/grid.hpp>
#include <ecfkit/harness.hpp>
#include <ecfkit/simgen.hpp>

#include <json.hpp>

#include <charconv>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ecfkit {

using json = nlohmann::json;

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

inline std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

inline Dataset read_dataset(std::istream& in, std::optional<std::pair<double, double>> domain_override = std::nullopt) {
    std::string line;
    std::size_t row = 0;
    std::vector<std::string_view> cells;

    // header
    std::string header;
    while (std::getline(in, line)) {
        ++row;
        if (!detail::trim(line).empty()) {
            header = line;
            break;
        }
    }
    if (header.empty()) throw ParseError("empty dataset file");
    if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.erase(0, 3);  // UTF-8 BOM
    const std::size_t header_row = row;
    cells = detail::split_commas(header);
    if (cells.size() < 3) throw ParseError("header needs a group column and at least 2 grid columns", header_row);
    if (cells[0] != "group") throw ParseError("first header cell must be 'group'", header_row, 1);
    const std::size_t J = cells.size() - 1;

    std::optional<Grid> grid;
    if (domain_override) {
        if (!(domain_override->first < domain_override->second))
            throw ParseError("domain override needs a < b");
        grid = make_uniform_grid(static_cast<int>(J), domain_override->first, domain_override->second);
    } else {
        Vector t(static_cast<Eigen::Index>(J));
        for (std::size_t c = 1; c <= J; ++c) {
            const auto v = detail::parse_double(cells[c]);
            if (!v) throw ParseError("grid label '" + std::string(cells[c]) + "' is not a number", header_row, c + 1);
            t[static_cast<Eigen::Index>(c - 1)] = *v;
            if (c > 1 && !(t[static_cast<Eigen::Index>(c - 1)] > t[static_cast<Eigen::Index>(c - 2)]))
                throw ParseError("grid labels must be strictly increasing", header_row, c + 1);
        }
        grid = Grid::trapezoid(std::move(t));
    }

    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;
    std::unordered_map<std::string, std::size_t> index;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        cells = detail::split_commas(line);
        if (cells.size() != J + 1)
            throw ParseError("expected " + std::to_string(J + 1) + " cells, found " + std::to_string(cells.size()), row);
        if (cells[0].empty()) throw ParseError("empty group label", row, 1);
        std::string label(cells[0]);
        auto [it, inserted] = index.try_emplace(label, labels.size());
        if (inserted) {
            labels.push_back(label);
            values.emplace_back();
        }
        auto& dest = values[it->second];
        for (std::size_t c = 1; c <= J; ++c) {
            const auto v = detail::parse_double(cells[c]);
            if (!v) throw ParseError("value '" + std::string(cells[c]) + "' is not a finite number", row, c + 1);
            dest.push_back(*v);
        }
    }

    if (labels.size() < 2) throw ParseError("dataset needs at least 2 groups, found " + std::to_string(labels.size()));
    std::vector<GroupData> groups;
    groups.reserve(labels.size());
    for (std::size_t g = 0; g < labels.size(); ++g) {
        const std::size_t n = values[g].size() / J;
        if (n < 2) throw ParseError("group '" + labels[g] + "' has fewer than 2 rows");
        Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(J));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < J; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[g][i * J + j];
        groups.push_back(GroupData{labels[g], std::move(m)});
    }
    return Dataset(std::move(*grid), std::move(groups));
}

inline Dataset read_dataset(const std::string& path,
                            std::optional<std::pair<double, double>> domain_override = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file '" + path + "'");
    return read_dataset(in, domain_override);
}

inline void write_dataset(const Dataset& ds, std::ostream& out) {
    out << "group";
    for (Eigen::Index j = 0; j < ds.grid().points().size(); ++j) out << ',' << detail::format_double(ds.grid().points()[j]);
    out << '\n';
    for (const auto& g : ds.groups()) {
        for (Eigen::Index i = 0; i < g.curves.rows(); ++i) {
            out << g.id;
            for (Eigen::Index j = 0; j < g.curves.cols(); ++j) out << ',' << detail::format_double(g.curves(i, j));
            out << '\n';
        }
    }
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_dataset(ds, out);
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Test reports

inline json report_to_json(const TestReport& r) {
    json j;
    j["statistic"] = r.statistic;
    j["method"] = std::string(to_string(r.method));
    if (r.ws) {
        j["beta"] = r.ws->beta;
        j["kappa"] = r.ws->kappa;
        j["d"] = r.ws->d;
        j["tr_omega"] = r.ws->tr_omega;
        j["tr_omega2"] = r.ws->tr_omega2;
    }
    j["p_value"] = r.p_value;
    j["alpha"] = r.alpha;
    j["reject"] = r.reject;
    if (r.critical_value) j["critical_value"] = *r.critical_value;
    if (r.permutations) j["permutations"] = *r.permutations;
    if (r.seed) j["seed"] = *r.seed;
    return j;
}

inline TestReport report_from_json(const json& j) {
    TestReport r;
    r.statistic = j.at("statistic").get<double>();
    r.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("beta")) {
        WsParams ws;
        ws.beta = j.at("beta").get<double>();
        ws.kappa = j.at("kappa").get<double>();
        ws.d = j.at("d").get<double>();
        ws.tr_omega = j.value("tr_omega", 0.0);
        ws.tr_omega2 = j.value("tr_omega2", 0.0);
        ws.method = r.method;
        r.ws = ws;
    }
    r.p_value = j.at("p_value").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.reject = j.at("reject").get<bool>();
    if (j.contains("critical_value")) r.critical_value = j.at("critical_value").get<double>();
    if (j.contains("permutations")) r.permutations = j.at("permutations").get<std::size_t>();
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

inline void write_report(const TestReport& r, std::ostream& out) { out << report_to_json(r).dump(2) << '\n'; }

inline void write_report(const TestReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_report(r, out);
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline TestReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open report '" + path + "'");
    try {
        return report_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Experiment configs and results

namespace detail {

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const char* name) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != N) throw ParseError(std::string(name) + " must have " + std::to_string(N) + " entries");
    std::array<double, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("malformed JSON in '" + path + "': " + e.what());
    }
}

}  // namespace detail

/// Simulation settings; unspecified fields keep the scheme's defaults.
inline SimConfig sim_config_from_json(const json& j) {
    try {
        const Scheme scheme = parse_scheme(j.value("scheme", std::string("shift_basis")));
        SimConfig c = scheme == Scheme::last_eigen ? SimConfig::last_eigen_defaults() : SimConfig{};
        if (j.contains("sizes")) {
            c.sizes = j.at("sizes").get<std::vector<std::size_t>>();
            c.k = c.sizes.size();
        }
        if (j.contains("k") && j.at("k").get<std::size_t>() != c.k)
            throw InvalidArgument("k does not match the number of sizes");
        c.J = j.value("J", c.J);
        c.q = j.value("q", c.q);
        c.a_var = j.value("a", c.a_var);
        c.rho = j.value("rho", c.rho);
        c.omega = j.value("omega", c.omega);
        c.delta_mean = j.value("delta", c.delta_mean);
        if (j.contains("u")) c.u = detail::fixed_array<4>(j.at("u"), "u");
        if (j.contains("c1")) c.c1 = detail::fixed_array<4>(j.at("c1"), "c1");
        if (j.contains("dist")) c.dist = parse_innovation(j.at("dist").get<std::string>());
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad simulation config: ") + e.what());
    }
}

inline ExperimentSpec experiment_from_json(const json& j) {
    ExperimentSpec s;
    s.base = sim_config_from_json(j);
    try {
        if (j.contains("omega_values")) s.omega_values = j.at("omega_values").get<std::vector<double>>();
        if (j.contains("tests")) {
            s.tests.clear();
            for (const auto& t : j.at("tests")) s.tests.push_back(parse_method(t.get<std::string>()));
        }
        s.alpha = j.value("alpha", s.alpha);
        s.reps = j.value("reps", s.reps);
        s.permutations = j.value("permutations", s.permutations);
        s.master_seed = j.value("seed", s.master_seed);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad experiment config: ") + e.what());
    }
    if (s.omega_values.empty()) throw InvalidArgument("experiment config: omega_values is empty");
    s.validate();
    return s;
}

inline ExperimentSpec read_experiment(const std::string& path) {
    return experiment_from_json(detail::parse_json_file(path));
}

inline std::string_view short_name(Method m) {
    switch (m) {
        case Method::naive: return "nv";
        case Method::bias_reduced: return "br";
        case Method::permutation: return "rp";
    }
    return "?";
}

/// Columns: omega,test,rate_pct,se_pct,reps
inline void write_cells_csv(const std::vector<CellResult>& cells, std::ostream& out) {
    out << "omega,test,rate_pct,se_pct,reps\n";
    for (const auto& c : cells)
        for (const auto& r : c.rates)
            out << detail::format_double(c.omega) << ',' << short_name(r.test) << ','
                << detail::format_double(r.rate_pct) << ',' << detail::format_double(r.se_pct) << ',' << c.reps
                << '\n';
}

inline json cells_to_json(const std::vector<CellResult>& cells) {
    json arr = json::array();
    for (const auto& c : cells) {
        json jc;
        jc["omega"] = c.omega;
        jc["reps"] = c.reps;
        json rates = json::object();
        for (const auto& r : c.rates) rates[std::string(short_name(r.test))] = {{"rate_pct", r.rate_pct}, {"se_pct", r.se_pct}};
        jc["rates"] = rates;
        arr.push_back(jc);
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Power configs
//
// {
//   "grid":  {"J": 60, "a": 0, "b": 1},
//   "gamma": {"matrix": [[...]]}  or  {"fourier": [l_1, ..., l_q]},
//   "tau":   [0.5, 0.5],
//   "d":     [{"zero": true}, {"fourier": [[C_rs]]}, {"matrix": [[...]]}],
//   "d_scale": 1.0, "alpha": 0.05, "draws": 100000, "eigen_rel_tol": 1e-12
// }
// A "fourier" kernel is K(x, y) = sum_{r,s} C_rs phi_r(x) phi_s(y) over the
// Fourier basis on [a, b] mapped to [0, 1]; a plain list means C = diag(list).

namespace detail {

inline Matrix fourier_kernel(const Grid& grid, const Matrix& coef) {
    int q = static_cast<int>(coef.rows());
    if (q % 2 == 0) ++q;
    const double a = grid.lower();
    const double b = grid.upper();
    Vector unit = (grid.points().array() - a) / (b - a);
    const Grid unit_grid(unit, grid.weights());
    const Matrix phi = fourier_basis(q, unit_grid).topRows(coef.rows());
    return phi.transpose() * coef * phi;
}

inline Matrix json_matrix(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    const auto v = j.get<std::vector<std::vector<double>>>();
    if (static_cast<Eigen::Index>(v.size()) != rows) throw ParseError(what + " has the wrong number of rows");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(v[static_cast<std::size_t>(r)].size()) != cols)
            throw ParseError(what + " has the wrong number of columns");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    return m;
}

inline Matrix kernel_from_json(const json& j, const Grid& grid, const std::string& what) {
    const auto J = static_cast<Eigen::Index>(grid.size());
    if (j.contains("zero")) return Matrix::Zero(J, J);
    if (j.contains("matrix")) return json_matrix(j.at("matrix"), J, J, what);
    if (j.contains("fourier")) {
        const json& f = j.at("fourier");
        if (!f.empty() && f.front().is_number()) {
            const auto ev = f.get<std::vector<double>>();
            Vector diag(static_cast<Eigen::Index>(ev.size()));
            for (std::size_t i = 0; i < ev.size(); ++i) diag[static_cast<Eigen::Index>(i)] = ev[i];
            return fourier_kernel(grid, diag.asDiagonal().toDenseMatrix());
        }
        const auto q = static_cast<Eigen::Index>(f.size());
        return fourier_kernel(grid, json_matrix(f, q, q, what));
    }
    throw ParseError(what + " needs one of 'zero', 'matrix' or 'fourier'");
}

}  // namespace detail

inline PowerSpec power_spec_from_json(const json& j) {
    try {
        const json& g = j.at("grid");
        const Grid grid = g.contains("points")
                              ? Grid::trapezoid([&] {
                                    const auto p = g.at("points").get<std::vector<double>>();
                                    return Vector(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
                                }())
                              : make_uniform_grid(g.at("J").get<int>(), g.value("a", 0.0), g.value("b", 1.0));
        Matrix gm = detail::kernel_from_json(j.at("gamma"), grid, "gamma");
        gm = 0.5 * (gm + gm.transpose()).eval();
        const double scale = j.value("d_scale", 1.0);
        std::vector<CovSurface> ds;
        for (const auto& dj : j.at("d")) {
            Matrix dm = scale * detail::kernel_from_json(dj, grid, "d");
            dm = 0.5 * (dm + dm.transpose()).eval();
            ds.emplace_back(grid, std::move(dm));
        }
        PowerSpec spec{CovSurface(grid, std::move(gm)), std::move(ds), j.at("tau").get<std::vector<double>>()};
        spec.alpha = j.value("alpha", spec.alpha);
        spec.mc_draws = j.value("draws", spec.mc_draws);
        spec.eigen_rel_tol = j.value("eigen_rel_tol", spec.eigen_rel_tol);
        return spec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad power config: ") + e.what());
    }
}

inline json power_report_to_json(const PowerReport& r) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return json{{"omega_eigenvalues", vec(r.omega_eigenvalues)},
                {"delta_sq", vec(r.delta_sq)},
                {"residual_delta_sq", r.residual_delta_sq},
                {"beta", r.beta},
                {"kappa", r.kappa},
                {"d", r.d},
                {"critical_value", r.critical_value},
                {"power", r.power},
                {"mc_se", r.mc_se},
                {"mc_draws", r.mc_draws}};
}

}  // namespace ecfkit
