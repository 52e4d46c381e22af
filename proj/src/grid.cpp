#include "n1plus/grid.hpp"

#include "n1plus/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

namespace n1plus {

namespace {

constexpr const char* kGridFormat = "n1plus-grid/1";

using json = nlohmann::json;

void require_positive(double value, const std::string& what) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ValidationError("nonpositive " + what);
    }
}

bool is_connected(std::size_t n, const std::vector<Line>& lines) {
    if (n == 0) {
        return false;
    }
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& l : lines) {
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (auto w : adj[v]) {
            if (!seen[w]) {
                seen[w] = true;
                ++count;
                stack.push_back(w);
            }
        }
    }
    return count == n;
}

double factor_at(std::span<const double> factors, std::size_t k) {
    return factors.empty() ? 1.0 : factors[k];
}

void check_factors(const Grid& grid, std::span<const double> factors) {
    if (!factors.empty() && factors.size() != grid.line_count()) {
        throw ValidationError("line factor count does not match line count");
    }
}

template <typename T>
T get_required(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) {
        throw ParseError(where + ": missing key '" + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": bad value for '" + key + "': " + e.what());
    }
}

}  // namespace

const char* to_string(BusKind kind) {
    return kind == BusKind::generator ? "generator" : "load";
}

Grid Grid::create(std::vector<Bus> buses, std::vector<Line> lines, int reference_bus_id) {
    if (buses.empty()) {
        throw ValidationError("grid has no buses");
    }
    std::set<int> ids;
    for (const auto& b : buses) {
        if (!ids.insert(b.id).second) {
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        }
        const auto tag = " at bus " + std::to_string(b.id);
        require_positive(b.inertia, "inertia" + tag);
        require_positive(b.damping, "damping" + tag);
        require_positive(b.voltage, "voltage" + tag);
        if (!std::isfinite(b.injection)) {
            throw ValidationError("non-finite injection" + tag);
        }
    }

    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        auto& l = lines[k];
        const auto tag = " on line " + std::to_string(k);
        if (l.from >= buses.size() || l.to >= buses.size()) {
            throw ValidationError("unknown bus" + tag);
        }
        if (l.from == l.to) {
            throw ValidationError("self loop" + tag);
        }
        const auto key = std::minmax(l.from, l.to);
        if (!pairs.insert(key).second) {
            throw ValidationError("parallel line" + tag + " (merge parallel circuits first)");
        }
        if (l.susceptance) {
            require_positive(*l.susceptance, "susceptance" + tag);
            l.stiffness = buses[l.from].voltage * buses[l.to].voltage * *l.susceptance;
        }
        require_positive(l.stiffness, "stiffness" + tag);
        require_positive(l.limit, "limit" + tag);
    }

    if (!is_connected(buses.size(), lines)) {
        throw ValidationError("grid is disconnected");
    }

    const double balance = std::accumulate(buses.begin(), buses.end(), 0.0,
                                           [](double s, const Bus& b) { return s + b.injection; });
    if (std::abs(balance) > kBalanceTolerance) {
        std::ostringstream os;
        os << "injections unbalanced (sum p = " << balance << ")";
        throw ValidationError(os.str());
    }

    Grid g;
    g.buses_ = std::move(buses);
    g.lines_ = std::move(lines);
    g.reference_ = g.index_of(reference_bus_id);
    return g;
}

std::size_t Grid::index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].id == bus_id) {
            return i;
        }
    }
    throw ValidationError("unknown bus id " + std::to_string(bus_id));
}

Eigen::VectorXd Grid::injections() const {
    Eigen::VectorXd p(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        p(i) = buses_[i].injection;
    }
    return p;
}

Eigen::VectorXd Grid::inertias() const {
    Eigen::VectorXd m(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        m(i) = buses_[i].inertia;
    }
    return m;
}

Eigen::VectorXd Grid::dampings() const {
    Eigen::VectorXd d(buses_.size());
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        d(i) = buses_[i].damping;
    }
    return d;
}

std::vector<std::size_t> Grid::monitored_lines() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        if (lines_[k].monitored) {
            out.push_back(k);
        }
    }
    return out;
}

Grid Grid::with_reference(int bus_id) const {
    Grid g = *this;
    g.reference_ = index_of(bus_id);
    return g;
}

Grid Grid::with_limits(std::span<const double> limits) const {
    if (limits.size() != lines_.size()) {
        throw ValidationError("limit count does not match line count");
    }
    Grid g = *this;
    for (std::size_t k = 0; k < limits.size(); ++k) {
        require_positive(limits[k], "limit on line " + std::to_string(k));
        g.lines_[k].limit = limits[k];
    }
    return g;
}

Grid load_grid(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("grid document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("grid document must be an object");
    }
    const auto format = get_required<std::string>(doc, "format", "grid");
    if (format != kGridFormat) {
        throw ParseError("unsupported grid format '" + format + "'");
    }
    if (!doc.contains("buses") || !doc["buses"].is_array()) {
        throw ParseError("grid: 'buses' must be an array");
    }
    if (!doc.contains("lines") || !doc["lines"].is_array()) {
        throw ParseError("grid: 'lines' must be an array");
    }

    std::vector<Bus> buses;
    std::unordered_map<int, std::size_t> index;
    for (const auto& jb : doc["buses"]) {
        const std::string where = "bus #" + std::to_string(buses.size());
        Bus b;
        b.id = get_required<int>(jb, "id", where);
        const auto kind = get_required<std::string>(jb, "kind", where);
        if (kind == "generator") {
            b.kind = BusKind::generator;
        } else if (kind == "load") {
            b.kind = BusKind::load;
        } else {
            throw ParseError(where + ": kind must be 'generator' or 'load'");
        }
        b.inertia = get_required<double>(jb, "m", where);
        b.damping = get_required<double>(jb, "d", where);
        b.injection = get_required<double>(jb, "p", where);
        if (jb.contains("V")) {
            b.voltage = get_required<double>(jb, "V", where);
        }
        index.emplace(b.id, buses.size());
        buses.push_back(b);
    }

    std::vector<Line> lines;
    for (const auto& jl : doc["lines"]) {
        const std::string where = "line #" + std::to_string(lines.size());
        Line l;
        const auto from = get_required<int>(jl, "from", where);
        const auto to = get_required<int>(jl, "to", where);
        const auto fi = index.find(from);
        const auto ti = index.find(to);
        if (fi == index.end() || ti == index.end()) {
            throw ValidationError(where + ": references unknown bus");
        }
        l.from = fi->second;
        l.to = ti->second;
        const bool has_b = jl.contains("B");
        const bool has_beta = jl.contains("beta");
        if (has_b == has_beta) {
            throw ParseError(where + ": exactly one of 'B' or 'beta' is required");
        }
        if (has_b) {
            l.susceptance = get_required<double>(jl, "B", where);
        } else {
            l.stiffness = get_required<double>(jl, "beta", where);
        }
        l.limit = get_required<double>(jl, "limit", where);
        if (jl.contains("monitored")) {
            l.monitored = get_required<bool>(jl, "monitored", where);
        }
        lines.push_back(l);
    }

    const auto reference = get_required<int>(doc, "reference_bus", "grid");
    return Grid::create(std::move(buses), std::move(lines), reference);
}

Grid load_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("grid file not found: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_grid(ss.str());
}

std::string save_grid(const Grid& grid) {
    json doc;
    doc["format"] = kGridFormat;
    json buses = json::array();
    for (const auto& b : grid.buses()) {
        json jb;
        jb["id"] = b.id;
        jb["kind"] = to_string(b.kind);
        jb["m"] = b.inertia;
        jb["d"] = b.damping;
        jb["p"] = b.injection;
        jb["V"] = b.voltage;
        buses.push_back(std::move(jb));
    }
    json lines = json::array();
    for (const auto& l : grid.lines()) {
        json jl;
        jl["from"] = grid.buses()[l.from].id;
        jl["to"] = grid.buses()[l.to].id;
        if (l.susceptance) {
            jl["B"] = *l.susceptance;
        } else {
            jl["beta"] = l.stiffness;
        }
        jl["limit"] = l.limit;
        jl["monitored"] = l.monitored;
        lines.push_back(std::move(jl));
    }
    doc["buses"] = std::move(buses);
    doc["lines"] = std::move(lines);
    doc["reference_bus"] = grid.reference_bus();
    return doc.dump(2) + "\n";
}

Eigen::MatrixXd build_laplacian(const Grid& grid, std::span<const double> line_factors) {
    check_factors(grid, line_factors);
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < grid.line_count(); ++k) {
        const auto& l = grid.lines()[k];
        const double beta = factor_at(line_factors, k) * l.stiffness;
        const auto i = static_cast<Eigen::Index>(l.from);
        const auto j = static_cast<Eigen::Index>(l.to);
        lap(i, i) += beta;
        lap(j, j) += beta;
        lap(i, j) -= beta;
        lap(j, i) -= beta;
    }
    return lap;
}

Eigen::VectorXd steady_state(const Grid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const auto ref = static_cast<Eigen::Index>(grid.reference_index());
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    if (n == 1) {
        return theta;
    }

    // Drop the reference row/column; the reduced Laplacian of a connected graph is SPD.
    const Eigen::MatrixXd lap = build_laplacian(grid);
    const Eigen::VectorXd p = grid.injections();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i != ref) {
            keep.push_back(i);
        }
    }
    const auto r = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd reduced(r, r);
    Eigen::VectorXd rhs(r);
    for (Eigen::Index a = 0; a < r; ++a) {
        rhs(a) = p(keep[a]);
        for (Eigen::Index b = 0; b < r; ++b) {
            reduced(a, b) = lap(keep[a], keep[b]);
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("reduced Laplacian is singular (grid disconnected?)");
    }
    const Eigen::VectorXd sol = llt.solve(rhs);
    for (Eigen::Index a = 0; a < r; ++a) {
        theta(keep[a]) = sol(a);
    }
    return theta;
}

Eigen::MatrixXd build_state_matrix(const Grid& grid, std::span<const double> line_factors) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const Eigen::VectorXd inv_m = grid.inertias().cwiseInverse();
    const Eigen::MatrixXd lap = build_laplacian(grid, line_factors);

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    a.topLeftCorner(n, n) = (-inv_m.cwiseProduct(grid.dampings())).asDiagonal();
    a.topRightCorner(n, n) = -(inv_m.asDiagonal() * lap);
    a.bottomLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    return a;
}

StateSystem build_state_system(const Grid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    StateSystem sys;
    sys.matrix = build_state_matrix(grid);
    sys.forcing = Eigen::VectorXd::Zero(2 * n);
    sys.forcing.head(n) = grid.injections().cwiseQuotient(grid.inertias());
    sys.equilibrium = Eigen::VectorXd::Zero(2 * n);
    sys.equilibrium.tail(n) = steady_state(grid);
    return sys;
}

Eigen::MatrixXd build_flow_map(const Grid& grid, std::span<const double> line_factors) {
    check_factors(grid, line_factors);
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const auto e = static_cast<Eigen::Index>(grid.line_count());
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(e, 2 * n);
    for (Eigen::Index k = 0; k < e; ++k) {
        const auto& l = grid.lines()[static_cast<std::size_t>(k)];
        const double beta = factor_at(line_factors, static_cast<std::size_t>(k)) * l.stiffness;
        f(k, n + static_cast<Eigen::Index>(l.from)) = beta;
        f(k, n + static_cast<Eigen::Index>(l.to)) = -beta;
    }
    return f;
}

}  // namespace n1plus
