#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace n1plus {

enum class BusKind { generator, load };

/// Per-unit bus parameters. Inertia in s^2 pu, damping in s pu, injection in pu
/// (generation positive, consumption negative).
struct Bus {
    int id = 0;
    BusKind kind = BusKind::load;
    double inertia = 1.0;
    double damping = 1.0;
    double injection = 0.0;
    double voltage = 1.0;
};

/// A transmission line between two buses, referenced by position in Grid::buses().
struct Line {
    std::size_t from = 0;
    std::size_t to = 0;
    /// Raw susceptance B when the line was specified that way; stiffness is then V_i V_j B.
    std::optional<double> susceptance;
    double stiffness = 0.0;
    double limit = 0.0;
    bool monitored = true;
};

/// Validated, immutable transmission grid.
///
/// Invariants enforced by create(): positive inertia, damping, voltage, stiffness and
/// limits; no self loops or parallel lines; connected graph; injections balanced to
/// within kBalanceTolerance.
class Grid {
public:
    static constexpr double kBalanceTolerance = 1e-9;

    /// Lines may leave stiffness at zero when susceptance is set; it is derived here.
    static Grid create(std::vector<Bus> buses, std::vector<Line> lines, int reference_bus_id);

    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Line>& lines() const noexcept { return lines_; }
    std::size_t bus_count() const noexcept { return buses_.size(); }
    std::size_t line_count() const noexcept { return lines_.size(); }
    std::size_t state_dimension() const noexcept { return 2 * buses_.size(); }
    std::size_t reference_index() const noexcept { return reference_; }
    int reference_bus() const noexcept { return buses_[reference_].id; }
    std::size_t index_of(int bus_id) const;

    Eigen::VectorXd injections() const;
    Eigen::VectorXd inertias() const;
    Eigen::VectorXd dampings() const;
    std::vector<std::size_t> monitored_lines() const;

    /// Copy with a different reference bus.
    Grid with_reference(int bus_id) const;
    /// Copy with every line limit replaced.
    Grid with_limits(std::span<const double> limits) const;

private:
    Grid() = default;

    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::size_t reference_ = 0;
};

/// Parse a grid document (format "n1plus-grid/1"). Throws ParseError or ValidationError.
Grid load_grid(std::string_view document);
Grid load_grid_file(const std::string& path);
std::string save_grid(const Grid& grid);

/// Weighted graph Laplacian. `line_factors`, when non-empty, scales each line's
/// stiffness (one entry per line).
Eigen::MatrixXd build_laplacian(const Grid& grid, std::span<const double> line_factors = {});

/// Pre-fault phases solving L theta = p with theta(reference) = 0.
Eigen::VectorXd steady_state(const Grid& grid);

/// Companion-form state system x' = A x + P with x = (theta_dot; theta).
struct StateSystem {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd forcing;
    Eigen::VectorXd equilibrium;
};

StateSystem build_state_system(const Grid& grid);

/// State matrix for an arbitrary per-line stiffness scaling; factors may be zero.
Eigen::MatrixXd build_state_matrix(const Grid& grid, std::span<const double> line_factors = {});

/// Line flows beta_ij (theta_i - theta_j) as an |E| x 2n map acting on the full state.
Eigen::MatrixXd build_flow_map(const Grid& grid, std::span<const double> line_factors = {});

const char* to_string(BusKind kind);

}  // namespace n1plus
