#pragma once

#include "n1plus/dynamics.hpp"
#include "n1plus/grid.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace n1plus {

struct Interval {
    double start = 0.0;
    double end = 0.0;
};

struct LineOverload {
    std::size_t line = 0;
    double seconds = 0.0;
    std::vector<Interval> intervals;
};

/// Per-line overload times for every line, and their sum over monitored lines.
struct OverloadResult {
    std::vector<LineOverload> lines;
    double global = 0.0;
    std::vector<std::string> warnings;
};

/// Stiffness of `line` at sample k: the fault factor applies while t_k < tau on the
/// faulted line.
double effective_stiffness(const Grid& grid, const Trajectory& traj, std::size_t line,
                           std::size_t k);

/// beta_ij (theta_i - theta_j) at sample k.
double line_flow(const Grid& grid, const Trajectory& traj, std::size_t line, std::size_t k);

/// Time with |flow| > limit, by the left rectangle rule on the trajectory samples.
double line_overload(const Trajectory& traj, std::size_t line, const Grid& grid);
LineOverload line_overload_detail(const Trajectory& traj, std::size_t line, const Grid& grid);

/// Sum of line_overload over monitored lines; 0 when none are monitored.
double global_overload(const Trajectory& traj, const Grid& grid);

OverloadResult overload_report(const Trajectory& traj, const Grid& grid);

/// |beta_ij (theta_i - theta_j)| <= limit on every line.
bool in_safety_polytope(const Eigen::VectorXd& theta, const Grid& grid);

enum class RiskZone { green, yellow, red };

struct ZoneThresholds {
    double yellow = 0.05;
    double red = 0.10;
};

/// Q > red -> red; yellow <= Q <= red -> yellow; otherwise green.
RiskZone classify_risk(double q, const ZoneThresholds& thresholds = {});
const char* to_string(RiskZone zone);

}  // namespace n1plus
