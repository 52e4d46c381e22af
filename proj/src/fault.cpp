#include "n1plus/fault.hpp"

#include "n1plus/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace n1plus {

namespace {

using json = nlohmann::json;

void check_probability_vector(const std::vector<double>& w, const char* what) {
    if (w.empty()) {
        throw ValidationError(std::string(what) + " is empty");
    }
    double total = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw ValidationError(std::string(what) + " has a negative or non-finite entry");
        }
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError(std::string(what) + " does not sum to one");
    }
}

double exponential_density(double rate, double tau) {
    return rate * std::exp(-rate * tau);
}

json scenario_json(const FaultScenario& s) {
    json j;
    j["line"] = s.line ? json(*s.line) : json(nullptr);
    j["kind"] = to_string(s.kind);
    j["tau"] = s.duration;
    j["onset"] = s.onset;
    return j;
}

FaultScenario scenario_from(const json& j) {
    try {
        FaultScenario s;
        if (!j.at("line").is_null()) {
            s.line = j.at("line").get<std::size_t>();
        }
        s.kind = parse_fault_kind(j.at("kind").get<std::string>());
        s.duration = j.at("tau").get<double>();
        s.onset = j.value("onset", 0.0);
        if (s.duration < 0.0) {
            throw ValidationError("scenario duration must be nonnegative");
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad scenario record: ") + e.what());
    }
}

}  // namespace

const char* to_string(FaultKind kind) {
    return kind == FaultKind::three_phase ? "three_phase" : "single_phase";
}

FaultKind parse_fault_kind(std::string_view text) {
    if (text == "three_phase") {
        return FaultKind::three_phase;
    }
    if (text == "single_phase") {
        return FaultKind::single_phase;
    }
    throw ValidationError("unknown fault kind '" + std::string(text) + "'");
}

double fault_factor(FaultKind kind) {
    return kind == FaultKind::three_phase ? 0.0 : 2.0 / 3.0;
}

double fault_factor(const FaultScenario& scenario) {
    return scenario.line ? fault_factor(scenario.kind) : 1.0;
}

std::vector<double> faulted_line_factors(const Grid& grid, const FaultScenario& scenario) {
    std::vector<double> f(grid.line_count(), 1.0);
    if (scenario.line) {
        if (*scenario.line >= grid.line_count()) {
            throw ValidationError("unknown line index " + std::to_string(*scenario.line));
        }
        f[*scenario.line] = fault_factor(scenario.kind);
    }
    return f;
}

Perturbation build_perturbation(const Grid& grid, const FaultScenario& scenario) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    Perturbation pert;
    pert.matrix = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    pert.left = Eigen::VectorXd::Zero(2 * n);
    pert.right = Eigen::VectorXd::Zero(2 * n);
    if (!scenario.line) {
        return pert;
    }
    if (*scenario.line >= grid.line_count()) {
        throw ValidationError("unknown line index " + std::to_string(*scenario.line));
    }
    pert.line = scenario.line;

    // delta L = (f - 1) beta b b^T with b = e_i - e_j; A carries -M^-1 L in its upper-right block.
    const auto& l = grid.lines()[*scenario.line];
    const auto i = static_cast<Eigen::Index>(l.from);
    const auto j = static_cast<Eigen::Index>(l.to);
    const double loss = (1.0 - fault_factor(scenario.kind)) * l.stiffness;
    pert.left(i) = loss / grid.buses()[l.from].inertia;
    pert.left(j) = -loss / grid.buses()[l.to].inertia;
    pert.right(n + i) = 1.0;
    pert.right(n + j) = -1.0;
    pert.matrix = pert.left * pert.right.transpose();
    return pert;
}

NominalLaw NominalLaw::uniform(std::size_t lines, double rate) {
    if (lines == 0) {
        throw ValidationError("nominal law needs at least one line");
    }
    if (!(rate > 0.0)) {
        throw ValidationError("nominal rate must be positive");
    }
    return NominalLaw{std::vector<double>(lines, 1.0 / static_cast<double>(lines)), rate};
}

ProposalParams ProposalParams::from_nominal(const NominalLaw& nominal) {
    return ProposalParams{nominal.weights, std::vector<double>(nominal.weights.size(), nominal.rate)};
}

double nominal_density(const FaultScenario& scenario, const NominalLaw& nominal) {
    if (scenario.duration < 0.0) {
        throw ValidationError("fault duration must be nonnegative");
    }
    if (!(nominal.rate > 0.0)) {
        throw ValidationError("nominal rate must be positive");
    }
    if (!scenario.line) {
        return 0.0;
    }
    if (*scenario.line >= nominal.weights.size()) {
        throw ValidationError("scenario line outside the nominal law");
    }
    return nominal.weights[*scenario.line] * exponential_density(nominal.rate, scenario.duration);
}

double proposal_density(const FaultScenario& scenario, const ProposalParams& proposal) {
    if (scenario.duration < 0.0) {
        throw ValidationError("fault duration must be nonnegative");
    }
    if (!scenario.line) {
        return 0.0;
    }
    const auto a = *scenario.line;
    if (a >= proposal.weights.size() || a >= proposal.rates.size()) {
        throw ValidationError("scenario line outside the proposal");
    }
    if (!(proposal.rates[a] > 0.0)) {
        throw ValidationError("proposal rate must be positive");
    }
    return proposal.weights[a] * exponential_density(proposal.rates[a], scenario.duration);
}

FaultScenario sample_scenario(const ProposalParams& proposal, FaultKind kind, Rng& rng) {
    const auto& w = proposal.weights;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    std::size_t line = w.size() - 1;
    double cumulative = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        cumulative += w[a];
        if (u < cumulative) {
            line = a;
            break;
        }
    }
    // Guard against trailing zero weights absorbing round-off in the cumulative sum.
    while (w[line] == 0.0 && line > 0) {
        --line;
    }
    std::exponential_distribution<double> duration(proposal.rates[line]);
    FaultScenario s;
    s.line = line;
    s.kind = kind;
    s.duration = duration(rng);
    return s;
}

std::string scenario_to_json(const FaultScenario& scenario) {
    return scenario_json(scenario).dump();
}

FaultScenario scenario_from_json(std::string_view text) {
    try {
        return scenario_from(json::parse(text.begin(), text.end()));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
    }
}

ScenarioBatch draw_batch(const ProposalParams& proposal, FaultKind kind, std::size_t count,
                         std::uint64_t seed) {
    check_probability_vector(proposal.weights, "proposal weights");
    ScenarioBatch batch{seed, kind, proposal, {}};
    batch.scenarios.reserve(count);
    Rng rng(seed);
    for (std::size_t k = 0; k < count; ++k) {
        batch.scenarios.push_back(sample_scenario(proposal, kind, rng));
    }
    return batch;
}

std::string batch_to_json(const ScenarioBatch& batch) {
    json j;
    j["seed"] = batch.seed;
    j["kind"] = to_string(batch.kind);
    j["proposal"] = {{"weights", batch.proposal.weights}, {"rates", batch.proposal.rates}};
    json list = json::array();
    for (const auto& s : batch.scenarios) {
        list.push_back(scenario_json(s));
    }
    j["scenarios"] = std::move(list);
    return j.dump();
}

ScenarioBatch batch_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("batch is not valid JSON: ") + e.what());
    }
    try {
        ScenarioBatch b;
        b.seed = j.at("seed").get<std::uint64_t>();
        b.kind = parse_fault_kind(j.at("kind").get<std::string>());
        b.proposal.weights = j.at("proposal").at("weights").get<std::vector<double>>();
        b.proposal.rates = j.at("proposal").at("rates").get<std::vector<double>>();
        for (const auto& s : j.at("scenarios")) {
            b.scenarios.push_back(scenario_from(s));
        }
        return b;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad batch document: ") + e.what());
    }
}

}  // namespace n1plus
