#pragma once

#include "n1plus/dynamics.hpp"
#include "n1plus/grid.hpp"
#include "n1plus/indicators.hpp"
#include "n1plus/risk.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace n1plus {

inline constexpr const char* kVersion = "0.1.0";

enum class OutputFormat { csv, json_lines };
OutputFormat parse_output_format(std::string_view text);
const char* extension(OutputFormat format);

/// 64-bit FNV-1a as 16 hex digits.
std::string config_hash(std::string_view canonical);

/// Provenance header: `# n1plus <version> command=<c> seed=<s> config=<hash>` for CSV,
/// a single JSON object line for json-lines.
struct OutputHeader {
    std::string command;
    std::uint64_t seed = 0;
    std::string config;

    void write(std::ostream& out, OutputFormat format) const;
};

/// Every line faulted in turn at fixed kind and duration.
struct ScreenResult {
    FaultKind kind = FaultKind::three_phase;
    double tau = 0.0;
    std::vector<std::size_t> monitored;
    /// overload[f][j]: seconds over limit of monitored line j when line f is faulted.
    std::vector<std::vector<double>> overload;
    std::vector<double> global;
    std::size_t escalations = 0;

    /// Monitored lines by worst-case overload over all contingencies, descending.
    std::vector<std::pair<std::size_t, double>> ranking() const;
};

ScreenResult screen(const Grid& grid, FaultKind kind, double tau, double horizon, double dt,
                    const SolveMethod& method);

void write_overload(std::ostream& out, const Grid& grid, const OverloadResult& result,
                    OutputFormat format);
void write_screen(std::ostream& out, const ScreenResult& result, OutputFormat format);
void write_ranking(std::ostream& out, const ScreenResult& result, OutputFormat format);
void write_risk_table(std::ostream& out, const RiskReport& report, OutputFormat format);
void write_estimate(std::ostream& out, const RiskEstimate& estimate, OutputFormat format);
/// Deterministic report document (no timing).
std::string report_to_json(const RiskReport& report);
std::string timing_to_json(const RiskTiming& timing);

/// Human-readable risk table.
void print_risk_table(std::ostream& out, const RiskReport& report);

struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(std::istream& in);
std::string format_double(double v);

}  // namespace n1plus
