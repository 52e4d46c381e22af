#include "n1plus/indicators.hpp"

#include "n1plus/error.hpp"

#include <cmath>

namespace n1plus {

namespace {

void check_line(const Grid& grid, std::size_t line) {
    if (line >= grid.line_count()) {
        throw ValidationError("unknown line index " + std::to_string(line));
    }
}

void check_shape(const Grid& grid, const Trajectory& traj) {
    if (traj.dimension() != static_cast<Eigen::Index>(grid.state_dimension())) {
        throw ValidationError("trajectory does not match the grid");
    }
}

}  // namespace

double effective_stiffness(const Grid& grid, const Trajectory& traj, std::size_t line,
                           std::size_t k) {
    const double beta = grid.lines()[line].stiffness;
    const auto& s = traj.scenario;
    if (s.line && *s.line == line && traj.times[k] < s.duration) {
        return fault_factor(s.kind) * beta;
    }
    return beta;
}

double line_flow(const Grid& grid, const Trajectory& traj, std::size_t line, std::size_t k) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const auto& l = grid.lines()[line];
    const auto c = static_cast<Eigen::Index>(k);
    const double diff = traj.states(n + static_cast<Eigen::Index>(l.from), c) -
                        traj.states(n + static_cast<Eigen::Index>(l.to), c);
    return effective_stiffness(grid, traj, line, k) * diff;
}

LineOverload line_overload_detail(const Trajectory& traj, std::size_t line, const Grid& grid) {
    check_line(grid, line);
    check_shape(grid, traj);
    LineOverload out;
    out.line = line;
    const double limit = grid.lines()[line].limit;
    const std::size_t count = traj.size();
    bool open = false;
    for (std::size_t k = 0; k + 1 < count; ++k) {
        const bool violating = std::abs(line_flow(grid, traj, line, k)) > limit;
        if (violating) {
            out.seconds += traj.times[k + 1] - traj.times[k];
            if (!open) {
                out.intervals.push_back({traj.times[k], traj.times[k + 1]});
                open = true;
            } else {
                out.intervals.back().end = traj.times[k + 1];
            }
        } else {
            open = false;
        }
    }
    return out;
}

double line_overload(const Trajectory& traj, std::size_t line, const Grid& grid) {
    return line_overload_detail(traj, line, grid).seconds;
}

double global_overload(const Trajectory& traj, const Grid& grid) {
    double total = 0.0;
    for (std::size_t line : grid.monitored_lines()) {
        total += line_overload(traj, line, grid);
    }
    return total;
}

OverloadResult overload_report(const Trajectory& traj, const Grid& grid) {
    OverloadResult out;
    out.lines.reserve(grid.line_count());
    for (std::size_t line = 0; line < grid.line_count(); ++line) {
        out.lines.push_back(line_overload_detail(traj, line, grid));
        if (grid.lines()[line].monitored) {
            out.global += out.lines.back().seconds;
        }
    }
    if (grid.monitored_lines().empty()) {
        out.warnings.push_back("no monitored lines; global overload is 0");
    }
    return out;
}

bool in_safety_polytope(const Eigen::VectorXd& theta, const Grid& grid) {
    if (theta.size() != static_cast<Eigen::Index>(grid.bus_count())) {
        throw ValidationError("phase vector does not match the grid");
    }
    for (const auto& l : grid.lines()) {
        const double flow = l.stiffness * (theta(static_cast<Eigen::Index>(l.from)) -
                                           theta(static_cast<Eigen::Index>(l.to)));
        if (std::abs(flow) > l.limit) {
            return false;
        }
    }
    return true;
}

RiskZone classify_risk(double q, const ZoneThresholds& thresholds) {
    if (!(q >= 0.0 && q <= 1.0)) {
        throw ValidationError("probability must lie in [0, 1]");
    }
    if (!(thresholds.yellow >= 0.0 && thresholds.yellow <= thresholds.red && thresholds.red <= 1.0)) {
        throw ValidationError("zone thresholds must satisfy 0 <= yellow <= red <= 1");
    }
    if (q > thresholds.red) {
        return RiskZone::red;
    }
    if (q >= thresholds.yellow) {
        return RiskZone::yellow;
    }
    return RiskZone::green;
}

const char* to_string(RiskZone zone) {
    switch (zone) {
    case RiskZone::green:
        return "green";
    case RiskZone::yellow:
        return "yellow";
    case RiskZone::red:
        return "red";
    }
    return "unknown";
}

}  // namespace n1plus
