#include "n1plus/report.hpp"

#include "n1plus/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace n1plus {

namespace {

using json = nlohmann::json;

std::string intervals_text(const std::vector<Interval>& intervals) {
    std::string s;
    for (const auto& iv : intervals) {
        if (!s.empty()) {
            s += ';';
        }
        s += format_double(iv.start) + ':' + format_double(iv.end);
    }
    return s;
}

json estimate_json(const RiskEstimate& e, const char* zone) {
    json j;
    j["target"] = e.target.label();
    j["gamma"] = e.gamma;
    j["q"] = e.q;
    j["stderr"] = e.std_error;
    j["samples"] = e.samples;
    j["method"] = e.method;
    j["iterations"] = e.iterations;
    j["ess"] = e.ess;
    if (zone != nullptr) {
        j["zone"] = zone;
    }
    return j;
}

json params_json(const ProposalParams& p) {
    return {{"weights", p.weights}, {"rates", p.rates}};
}

}  // namespace

OutputFormat parse_output_format(std::string_view text) {
    if (text == "csv") {
        return OutputFormat::csv;
    }
    if (text == "json-lines") {
        return OutputFormat::json_lines;
    }
    throw ValidationError("unknown output format '" + std::string(text) + "'");
}

const char* extension(OutputFormat format) {
    return format == OutputFormat::csv ? ".csv" : ".jsonl";
}

std::string config_hash(std::string_view canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void OutputHeader::write(std::ostream& out, OutputFormat format) const {
    const std::string hash = config_hash(config);
    if (format == OutputFormat::csv) {
        out << "# n1plus " << kVersion << " command=" << command << " seed=" << seed
            << " config=" << hash << "\n";
    } else {
        out << json{{"n1plus", kVersion}, {"command", command}, {"seed", seed}, {"config", hash}}.dump()
            << "\n";
    }
}

std::vector<std::pair<std::size_t, double>> ScreenResult::ranking() const {
    std::vector<std::pair<std::size_t, double>> r;
    for (std::size_t j = 0; j < monitored.size(); ++j) {
        double worst = 0.0;
        for (const auto& row : overload) {
            worst = std::max(worst, row[j]);
        }
        r.emplace_back(monitored[j], worst);
    }
    std::stable_sort(r.begin(), r.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return r;
}

ScreenResult screen(const Grid& grid, FaultKind kind, double tau, double horizon, double dt,
                    const SolveMethod& method) {
    ScreenResult out;
    out.kind = kind;
    out.tau = tau;
    out.monitored = grid.monitored_lines();
    const PiecewiseSolver solver(grid);
    for (std::size_t f = 0; f < grid.line_count(); ++f) {
        const Trajectory traj = solver.solve(FaultScenario{f, kind, tau, 0.0}, horizon, dt, method);
        out.escalations += traj.meta.escalated ? 1 : 0;
        std::vector<double> row;
        double total = 0.0;
        for (std::size_t l : out.monitored) {
            row.push_back(line_overload(traj, l, grid));
            total += row.back();
        }
        out.overload.push_back(std::move(row));
        out.global.push_back(total);
    }
    return out;
}

void write_overload(std::ostream& out, const Grid& grid, const OverloadResult& result,
                    OutputFormat format) {
    if (format == OutputFormat::csv) {
        out << "line,from,to,monitored,S,intervals\n";
    }
    for (const auto& lo : result.lines) {
        const auto& l = grid.lines()[lo.line];
        const int from = grid.buses()[l.from].id;
        const int to = grid.buses()[l.to].id;
        if (format == OutputFormat::csv) {
            out << lo.line << ',' << from << ',' << to << ',' << (l.monitored ? 1 : 0) << ','
                << format_double(lo.seconds) << ',' << intervals_text(lo.intervals) << "\n";
        } else {
            json iv = json::array();
            for (const auto& i : lo.intervals) {
                iv.push_back({i.start, i.end});
            }
            out << json{{"line", lo.line}, {"from", from}, {"to", to}, {"monitored", l.monitored},
                        {"S", lo.seconds}, {"intervals", iv}}
                       .dump()
                << "\n";
        }
    }
    if (format == OutputFormat::csv) {
        out << "global,,,," << format_double(result.global) << ",\n";
    } else {
        out << json{{"line", "global"}, {"S", result.global}}.dump() << "\n";
    }
}

void write_screen(std::ostream& out, const ScreenResult& result, OutputFormat format) {
    if (format == OutputFormat::csv) {
        out << "faulted";
        for (std::size_t l : result.monitored) {
            out << ",S_" << l;
        }
        out << ",global\n";
        for (std::size_t f = 0; f < result.overload.size(); ++f) {
            out << f;
            for (double s : result.overload[f]) {
                out << ',' << format_double(s);
            }
            out << ',' << format_double(result.global[f]) << "\n";
        }
        return;
    }
    for (std::size_t f = 0; f < result.overload.size(); ++f) {
        json row = json::object();
        for (std::size_t j = 0; j < result.monitored.size(); ++j) {
            row[std::to_string(result.monitored[j])] = result.overload[f][j];
        }
        out << json{{"faulted", f}, {"S", row}, {"global", result.global[f]}}.dump() << "\n";
    }
}

void write_ranking(std::ostream& out, const ScreenResult& result, OutputFormat format) {
    const auto ranking = result.ranking();
    if (format == OutputFormat::csv) {
        out << "rank,line,worst_S\n";
    }
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        if (format == OutputFormat::csv) {
            out << r + 1 << ',' << ranking[r].first << ',' << format_double(ranking[r].second) << "\n";
        } else {
            out << json{{"rank", r + 1}, {"line", ranking[r].first}, {"worst_S", ranking[r].second}}.dump()
                << "\n";
        }
    }
}

void write_estimate(std::ostream& out, const RiskEstimate& e, OutputFormat format) {
    if (format == OutputFormat::csv) {
        out << "target,gamma,q,stderr,samples,method\n";
        out << e.target.label() << ',' << format_double(e.gamma) << ',' << format_double(e.q) << ','
            << format_double(e.std_error) << ',' << e.samples << ',' << e.method << "\n";
    } else {
        out << estimate_json(e, nullptr).dump() << "\n";
    }
}

void write_risk_table(std::ostream& out, const RiskReport& report, OutputFormat format) {
    std::vector<const LineRisk*> rows;
    for (const auto& l : report.lines) {
        rows.push_back(&l);
    }
    rows.push_back(&report.global);
    if (format == OutputFormat::csv) {
        out << "line,q,stderr,zone,samples,method\n";
        for (const auto* r : rows) {
            const auto& e = r->estimate;
            out << (e.target.global ? std::string("global") : std::to_string(e.target.line)) << ','
                << format_double(e.q) << ',' << format_double(e.std_error) << ','
                << to_string(r->zone) << ',' << e.samples << ',' << e.method << "\n";
        }
        return;
    }
    for (const auto* r : rows) {
        out << estimate_json(r->estimate, to_string(r->zone)).dump() << "\n";
    }
}

std::string report_to_json(const RiskReport& report) {
    json j;
    j["n1plus"] = kVersion;
    j["seed"] = report.config.seed;
    j["config"] = json::parse(report.config.to_json());
    j["config_hash"] = config_hash(report.config.to_json());
    json lines = json::array();
    for (const auto& l : report.lines) {
        lines.push_back(estimate_json(l.estimate, to_string(l.zone)));
    }
    j["lines"] = std::move(lines);
    j["global"] = estimate_json(report.global.estimate, to_string(report.global.zone));
    json trace = json::array();
    for (const auto& it : report.ce.history) {
        trace.push_back({{"iteration", it.iteration},
                         {"level", it.level},
                         {"elite", it.elite},
                         {"ess", it.ess},
                         {"change", it.change},
                         {"params", params_json(it.params)}});
    }
    j["ce"] = {{"trace", trace},
               {"samples", report.ce.samples},
               {"reached_gamma", report.ce.reached_gamma},
               {"fallback", report.ce_fallback},
               {"params", params_json(report.ce.params)},
               {"warnings", report.ce.warnings}};
    j["escalations"] = report.escalations;
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

std::string timing_to_json(const RiskTiming& timing) {
    return json{{"setup_s", timing.setup}, {"ce_s", timing.ce}, {"estimate_s", timing.estimate}}.dump(2) +
           "\n";
}

void print_risk_table(std::ostream& out, const RiskReport& report) {
    out << std::left << std::setw(8) << "line" << std::setw(14) << "Q" << std::setw(14) << "stderr"
        << "zone\n";
    auto row = [&](const LineRisk& r) {
        const auto& e = r.estimate;
        std::ostringstream q;
        std::ostringstream s;
        q << std::setprecision(4) << e.q;
        s << std::setprecision(3) << e.std_error;
        out << std::left << std::setw(8) << (e.target.global ? std::string("global") : std::to_string(e.target.line))
            << std::setw(14) << q.str() << std::setw(14) << s.str() << to_string(r.zone) << "\n";
    };
    for (const auto& l : report.lines) {
        row(l);
    }
    row(report.global);
    out << "cross-entropy iterations: " << report.ce.iterations() << ", samples: " << report.ce.samples
        << (report.ce_fallback ? " (fell back to nominal)" : "") << "\n";
    if (report.escalations > 0) {
        out << "perturbative to exact escalations: " << report.escalations << "\n";
    }
}

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            t.comments.push_back(line);
            continue;
        }
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) {
            fields.push_back(field);
        }
        if (line.back() == ',') {
            fields.emplace_back();
        }
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
        } else {
            if (fields.size() != t.header.size()) {
                throw ParseError("CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(t.header.size()));
            }
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

}  // namespace n1plus
