#include "n1plus/risk.hpp"

#include "n1plus/error.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace n1plus {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kBlock = std::size_t{1} << 16;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_gamma(double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw ValidationError("gamma must be a finite nonnegative number");
    }
}

void check_target(const ScoreModel& model, const Target& t) {
    if (!t.global && t.line >= model.line_count()) {
        throw ValidationError("target line " + std::to_string(t.line) + " is not in the grid");
    }
}

void check_law(const ScoreModel& model, const NominalLaw& nominal) {
    if (nominal.weights.size() != model.line_count()) {
        throw ValidationError("nominal law and score model disagree on the line count");
    }
    double total = 0.0;
    for (double w : nominal.weights) {
        if (!(w >= 0.0)) {
            throw ValidationError("nominal weights must be nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("nominal weights must sum to one");
    }
    if (!(nominal.rate > 0.0)) {
        throw ValidationError("nominal rate must be positive");
    }
}

std::vector<FaultScenario> draw(const ProposalParams& proposal, FaultKind kind, std::size_t n,
                                Rng& rng) {
    std::vector<FaultScenario> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back(sample_scenario(proposal, kind, rng));
    }
    return out;
}

Eigen::MatrixXd real_part(const CMatrix& m) {
    return m.real();
}

}  // namespace

std::string Target::label() const {
    return global ? "global" : "line" + std::to_string(line);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

GridScoreModel::GridScoreModel(const Grid& grid, double horizon, double dt, FaultKind kind,
                               const SolveMethod& method)
    : solver_(grid), horizon_(horizon), dt_(dt), kind_(kind), lines_(grid.line_count()) {
    std::size_t unused = 0;
    (void)time_grid(horizon, dt, 0.0, unused);
    if (method.kind == SolveMethod::Kind::reference) {
        throw ValidationError("score model needs a spectral method (exact or perturbative)");
    }
    const Eigen::VectorXd& p = solver_.system().forcing;
    auto regime = [&](SpectralDecomposition dec) {
        Regime r;
        const Eigen::Index n = dec.dimension();
        CVector decay(n);
        CVector kick(n);
        const CVector eta = dec.to_modal(p);
        for (Eigen::Index i = 0; i < n; ++i) {
            decay(i) = std::exp(dec.values(i) * dt);
            kick(i) = phi_function(dec.values(i), dt) * eta(i);
        }
        r.step = real_part(dec.vectors * decay.asDiagonal() * dec.inverse);
        r.offset = real_part(dec.vectors * kick);
        r.dec = std::move(dec);
        return r;
    };
    nominal_ = regime(solver_.base());
    faulted_.reserve(lines_);
    for (std::size_t l = 0; l < lines_; ++l) {
        FaultScenario s{l, kind, 1.0, 0.0};
        bool escalated = false;
        try {
            faulted_.push_back(regime(solver_.faulted_spectrum(s, method, escalated)));
        } catch (const DegeneracyError& e) {
            throw DegeneracyError("faulted spectrum of line " + std::to_string(l) + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("faulted spectrum of line " + std::to_string(l) + ": " + e.what());
        }
        escalations_ += escalated ? 1 : 0;
    }

    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const auto e = static_cast<Eigen::Index>(lines_);
    incidence_ = Eigen::MatrixXd::Zero(e, n);
    stiffness_.resize(e);
    limits_.resize(e);
    monitored_.resize(lines_);
    for (Eigen::Index k = 0; k < e; ++k) {
        const auto& l = grid.lines()[static_cast<std::size_t>(k)];
        incidence_(k, static_cast<Eigen::Index>(l.from)) = 1.0;
        incidence_(k, static_cast<Eigen::Index>(l.to)) = -1.0;
        stiffness_(k) = l.stiffness;
        limits_(k) = l.limit;
        monitored_[static_cast<std::size_t>(k)] = l.monitored;
    }
    base_flows_ = stiffness_.cwiseProduct(incidence_ * solver_.system().equilibrium.tail(n));
    inertia_ = grid.inertias();
    laplacian_ = build_laplacian(grid);
}

double GridScoreModel::score(const FaultScenario& s, std::span<double> per_line) const {
    if (per_line.size() != lines_) {
        throw ValidationError("score buffer has the wrong size");
    }
    if (!(s.duration >= 0.0)) {
        throw ValidationError("fault duration tau must be nonnegative");
    }
    if (s.line && *s.line >= lines_) {
        throw ValidationError("unknown line index " + std::to_string(*s.line));
    }
    if (s.line && s.kind != kind_) {
        throw ValidationError("scenario fault kind does not match the score model");
    }
    std::fill(per_line.begin(), per_line.end(), 0.0);

    const double tau = s.line ? s.duration : 0.0;
    std::size_t sw = 0;
    const std::vector<double> times = time_grid(horizon_, dt_, tau, sw);
    const bool faulted = s.line && sw > 0;
    const std::size_t alpha = s.line.value_or(0);
    const double factor = fault_factor(kind_);

    const auto n = static_cast<Eigen::Index>(inertia_.size());
    const Eigen::VectorXd& p = solver_.system().forcing;
    const Eigen::VectorXd& x0 = solver_.system().equilibrium;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd next(x.size());
    Eigen::VectorXd diff(static_cast<Eigen::Index>(lines_));

    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double width = times[k + 1] - times[k];
        diff.noalias() = incidence_ * x.tail(n);
        for (std::size_t l = 0; l < lines_; ++l) {
            double beta = stiffness_(static_cast<Eigen::Index>(l));
            if (faulted && l == alpha && times[k] < tau) {
                beta *= factor;
            }
            if (std::abs(beta * diff(static_cast<Eigen::Index>(l))) > limits_(static_cast<Eigen::Index>(l))) {
                per_line[l] += width;
            }
        }

        // After clearing, theta_dot^T M theta_dot + dtheta^T L dtheta of the deviation is
        // non-increasing and bounds every flow deviation by sqrt(beta E).
        if (k >= sw && (k - sw) % 16 == 0) {
            const Eigen::VectorXd w = x.head(n);
            const Eigen::VectorXd d = x.tail(n) - x0.tail(n);
            const double energy = w.dot(inertia_.cwiseProduct(w)) + d.dot(laplacian_ * d);
            bool settled = true;
            for (Eigen::Index l = 0; l < stiffness_.size() && settled; ++l) {
                const double bound = std::abs(base_flows_(l)) +
                                     std::sqrt(stiffness_(l) * energy) * (1.0 + 1e-6) + 1e-12;
                settled = bound < limits_(l);
            }
            if (settled) {
                break;
            }
        }

        const Regime& r = (faulted && k + 1 <= sw) ? faulted_[alpha] : nominal_;
        if (std::abs(width - dt_) <= 1e-9 * dt_) {
            next.noalias() = r.step * x;
            x = next + r.offset;
        } else {
            x = propagate(r.dec, x, p, width);
        }
    }

    double total = 0.0;
    for (std::size_t l = 0; l < lines_; ++l) {
        if (monitored_[l]) {
            total += per_line[l];
        }
    }
    return total;
}

BatchScores evaluate_batch(const ScoreModel& model, const std::vector<FaultScenario>& scenarios,
                           unsigned threads) {
    BatchScores out;
    out.lines = model.line_count();
    out.per_line.assign(scenarios.size() * out.lines, 0.0);
    out.global.assign(scenarios.size(), 0.0);
    detail::parallel_for(scenarios.size(), threads, [&](std::size_t k) {
        std::span<double> row(out.per_line.data() + k * out.lines, out.lines);
        out.global[k] = model.score(scenarios[k], row);
    });
    return out;
}

RiskEstimate mc_estimate(const ScoreModel& model, const NominalLaw& nominal, double gamma,
                         std::size_t n, const Target& target, std::uint64_t seed, FaultKind kind,
                         unsigned threads) {
    if (n < 1) {
        throw ValidationError("sample count must be at least 1");
    }
    check_gamma(gamma);
    check_law(model, nominal);
    check_target(model, target);

    const ProposalParams law = ProposalParams::from_nominal(nominal);
    Rng rng(seed);
    std::size_t hits = 0;
    for (std::size_t done = 0; done < n;) {
        const std::size_t block = std::min(kBlock, n - done);
        const auto scenarios = draw(law, kind, block, rng);
        const BatchScores scores = evaluate_batch(model, scenarios, threads);
        for (std::size_t k = 0; k < block; ++k) {
            hits += scores.target(k, target) >= gamma ? 1 : 0;
        }
        done += block;
    }
    RiskEstimate est;
    est.target = target;
    est.gamma = gamma;
    est.samples = n;
    est.method = "mc";
    est.q = static_cast<double>(hits) / static_cast<double>(n);
    est.std_error = std::sqrt(est.q * (1.0 - est.q) / static_cast<double>(n));
    est.ess = static_cast<double>(n);
    return est;
}

CeResult ce_optimize(const ScoreModel& model, const NominalLaw& nominal, double gamma,
                     const Target& target, const CeConfig& config, std::uint64_t seed,
                     FaultKind kind) {
    check_gamma(gamma);
    check_law(model, nominal);
    check_target(model, target);
    if (!(config.rho > 0.0 && config.rho < 1.0)) {
        throw ValidationError("rho must lie in (0, 1)");
    }
    if (config.n_per_iter < 100) {
        throw ValidationError("n_per_iter must be at least 100");
    }
    if (!(config.smoothing > 0.0 && config.smoothing <= 1.0)) {
        throw ValidationError("smoothing must lie in (0, 1]");
    }
    if (!(config.epsilon_mix >= 0.0 && config.epsilon_mix < 1.0)) {
        throw ValidationError("epsilon_mix must lie in [0, 1)");
    }
    if (config.max_iterations < 1 || config.settle_iterations < 1) {
        throw ValidationError("iteration limits must be at least 1");
    }

    const std::size_t lines = model.line_count();
    const std::size_t n = config.n_per_iter;
    CeResult result;
    result.params = ProposalParams::from_nominal(nominal);
    double previous = 0.0;
    int settled = 0;

    for (int it = 1; it <= config.max_iterations; ++it) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(it)));
        const auto scenarios = draw(result.params, kind, n, rng);
        const BatchScores scores = evaluate_batch(model, scenarios, config.threads);
        result.samples += n;

        std::vector<double> s(n);
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = scores.target(k, target);
        }
        std::vector<double> sorted = s;
        std::sort(sorted.begin(), sorted.end());
        const auto qi = static_cast<std::size_t>(
            std::ceil((1.0 - config.rho) * static_cast<double>(n))) - 1;
        double level = std::min(gamma, sorted[std::min(qi, n - 1)]);
        if (level < gamma && level <= previous) {
            const auto above = std::upper_bound(sorted.begin(), sorted.end(), previous);
            if (above == sorted.end()) {
                std::ostringstream msg;
                msg << "no sample exceeds the elite level " << previous << " at iteration " << it
                    << " (gamma " << gamma << ")";
                throw EmptyEliteError(msg.str());
            }
            level = std::min(gamma, *above);
        }

        std::vector<double> mass(lines, 0.0);
        std::vector<double> mass_tau(lines, 0.0);
        double sum_w = 0.0;
        double sum_w2 = 0.0;
        std::size_t elite = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (s[k] < level) {
                continue;
            }
            const FaultScenario& sc = scenarios[k];
            if (!sc.line) {
                continue;
            }
            const double q = proposal_density(sc, result.params);
            if (!(q > 0.0)) {
                throw NumericalError("sampled scenario has zero proposal density");
            }
            const double w = nominal_density(sc, nominal) / q;
            mass[*sc.line] += w;
            mass_tau[*sc.line] += w * sc.duration;
            sum_w += w;
            sum_w2 += w * w;
            ++elite;
        }
        if (elite == 0 || !(sum_w > 0.0)) {
            throw EmptyEliteError("elite set carries no likelihood weight at iteration " +
                                  std::to_string(it));
        }

        CeIteration rec;
        rec.iteration = it;
        rec.level = level;
        rec.elite = elite;
        rec.ess = sum_w * sum_w / sum_w2;
        if (rec.ess < 0.01 * static_cast<double>(n)) {
            result.warnings.push_back("iteration " + std::to_string(it) +
                                      ": effective sample size " + std::to_string(rec.ess) +
                                      " below 1% of the batch");
        }

        ProposalParams next = result.params;
        for (std::size_t a = 0; a < lines; ++a) {
            const double phi_mle = mass[a] / sum_w;
            double rate_mle = result.params.rates[a];
            if (mass[a] > 0.0 && mass_tau[a] > 0.0) {
                rate_mle = mass[a] / mass_tau[a];
            }
            const double phi = config.smoothing * phi_mle +
                               (1.0 - config.smoothing) * result.params.weights[a];
            next.weights[a] = (1.0 - config.epsilon_mix) * phi + config.epsilon_mix * nominal.weights[a];
            next.rates[a] = config.smoothing * rate_mle +
                            (1.0 - config.smoothing) * result.params.rates[a];
        }
        double change = 0.0;
        for (std::size_t a = 0; a < lines; ++a) {
            const double w0 = result.params.weights[a];
            const double r0 = result.params.rates[a];
            change = std::max(change, std::abs(next.weights[a] - w0) / std::max(w0, 1e-300));
            change = std::max(change, std::abs(next.rates[a] - r0) / r0);
        }
        rec.change = change;
        rec.params = next;
        result.history.push_back(rec);
        result.params = std::move(next);
        previous = level;

        if (level >= gamma) {
            result.reached_gamma = true;
            ++settled;
        }
        if (change < config.tolerance || settled >= config.settle_iterations) {
            break;
        }
    }
    return result;
}

std::vector<RiskEstimate> is_estimate_all(const ScoreModel& model, const ProposalParams& proposal,
                                          const NominalLaw& nominal, double gamma, std::size_t n,
                                          const std::vector<Target>& targets, std::uint64_t seed,
                                          FaultKind kind, unsigned threads) {
    if (n < 1) {
        throw ValidationError("sample count must be at least 1");
    }
    check_gamma(gamma);
    check_law(model, nominal);
    for (const auto& t : targets) {
        check_target(model, t);
    }
    if (proposal.weights.size() != model.line_count() ||
        proposal.rates.size() != model.line_count()) {
        throw ValidationError("proposal and score model disagree on the line count");
    }

    struct Acc {
        double sum = 0.0;
        double sum2 = 0.0;
    };
    std::vector<Acc> acc(targets.size());
    Rng rng(seed);
    for (std::size_t done = 0; done < n;) {
        const std::size_t block = std::min(kBlock, n - done);
        const auto scenarios = draw(proposal, kind, block, rng);
        const BatchScores scores = evaluate_batch(model, scenarios, threads);
        for (std::size_t k = 0; k < block; ++k) {
            const double q = proposal_density(scenarios[k], proposal);
            if (!(q > 0.0)) {
                throw NumericalError("sampled scenario has zero proposal density (line " +
                                     std::to_string(scenarios[k].line.value_or(0)) + ")");
            }
            const double w = nominal_density(scenarios[k], nominal) / q;
            for (std::size_t t = 0; t < targets.size(); ++t) {
                if (scores.target(k, targets[t]) >= gamma) {
                    acc[t].sum += w;
                    acc[t].sum2 += w * w;
                }
            }
        }
        done += block;
    }

    std::vector<RiskEstimate> out;
    out.reserve(targets.size());
    const auto nn = static_cast<double>(n);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        RiskEstimate est;
        est.target = targets[t];
        est.gamma = gamma;
        est.samples = n;
        est.method = "ce";
        est.proposal = proposal;
        const double mean = acc[t].sum / nn;
        const double var = std::max(0.0, acc[t].sum2 / nn - mean * mean);
        est.q = std::clamp(mean, 0.0, 1.0);
        est.std_error = std::sqrt(var / nn);
        est.ess = acc[t].sum2 > 0.0 ? acc[t].sum * acc[t].sum / acc[t].sum2 : 0.0;
        out.push_back(std::move(est));
    }
    return out;
}

RiskEstimate is_estimate(const ScoreModel& model, const ProposalParams& proposal,
                         const NominalLaw& nominal, double gamma, std::size_t n,
                         const Target& target, std::uint64_t seed, FaultKind kind,
                         unsigned threads) {
    return is_estimate_all(model, proposal, nominal, gamma, n, {target}, seed, kind, threads).front();
}

RiskConfig RiskConfig::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    RiskConfig c;
    try {
        c.gamma = j.value("gamma", c.gamma);
        c.rho = j.value("rho", c.rho);
        c.n_per_iter = j.value("n_per_iter", c.n_per_iter);
        c.n_final = j.value("n_final", c.n_final);
        c.lambda_nominal = j.value("lambda_nominal", c.lambda_nominal);
        if (j.contains("fault_kind")) {
            c.fault_kind = parse_fault_kind(j.at("fault_kind").get<std::string>());
        }
        c.horizon = j.value("T", c.horizon);
        c.dt = j.value("dt", c.dt);
        const std::string method = j.value("method", std::string("exact"));
        const int m = j.value("m", 0);
        if (method == "exact") {
            c.method = SolveMethod::exact();
        } else if (method == "perturbative") {
            c.method = SolveMethod::perturbative(m);
        } else {
            throw ValidationError("unknown method '" + method + "'");
        }
        c.seed = j.value("seed", c.seed);
        c.epsilon_mix = j.value("epsilon_mix", c.epsilon_mix);
        c.smoothing = j.value("smoothing", c.smoothing);
        c.per_line_reoptimize = j.value("per_line_reoptimize", c.per_line_reoptimize);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad config document: ") + e.what());
    }
    return c;
}

std::string RiskConfig::to_json() const {
    json j;
    j["gamma"] = gamma;
    j["rho"] = rho;
    j["n_per_iter"] = n_per_iter;
    j["n_final"] = n_final;
    j["lambda_nominal"] = lambda_nominal;
    j["fault_kind"] = to_string(fault_kind);
    j["T"] = horizon;
    j["dt"] = dt;
    j["method"] = method.kind == SolveMethod::Kind::perturbative ? "perturbative" : "exact";
    j["m"] = method.m;
    j["seed"] = seed;
    j["epsilon_mix"] = epsilon_mix;
    j["smoothing"] = smoothing;
    j["per_line_reoptimize"] = per_line_reoptimize;
    return j.dump();
}

CeConfig RiskConfig::ce() const {
    CeConfig c;
    c.rho = rho;
    c.smoothing = smoothing;
    c.epsilon_mix = epsilon_mix;
    c.n_per_iter = n_per_iter;
    c.threads = threads;
    return c;
}

RiskReport n1plus(const Grid& grid, const RiskConfig& config) {
    check_gamma(config.gamma);
    if (config.n_final < 1) {
        throw ValidationError("n_final must be at least 1");
    }
    RiskReport report;
    report.config = config;

    auto start = Clock::now();
    const GridScoreModel model(grid, config.horizon, config.dt, config.fault_kind, config.method);
    const NominalLaw nominal = NominalLaw::uniform(grid.line_count(), config.lambda_nominal);
    report.escalations = model.escalations();
    report.timing.setup = seconds_since(start);

    start = Clock::now();
    try {
        report.ce = ce_optimize(model, nominal, config.gamma, Target::all_lines(), config.ce(),
                                derive_seed(config.seed, 1), config.fault_kind);
    } catch (const EmptyEliteError& e) {
        report.ce_fallback = true;
        report.ce = CeResult{};
        report.ce.params = ProposalParams::from_nominal(nominal);
        report.warnings.push_back(std::string("cross-entropy stopped, nominal proposal used: ") +
                                  e.what());
    }
    report.timing.ce = seconds_since(start);

    start = Clock::now();
    std::vector<Target> targets;
    for (std::size_t l : grid.monitored_lines()) {
        targets.push_back(Target::of_line(l));
    }
    targets.push_back(Target::all_lines());
    auto estimates = is_estimate_all(model, report.ce.params, nominal, config.gamma, config.n_final,
                                     targets, derive_seed(config.seed, 2), config.fault_kind,
                                     config.threads);

    if (config.per_line_reoptimize) {
        for (std::size_t t = 0; t + 1 < targets.size(); ++t) {
            const std::size_t l = targets[t].line;
            ProposalParams params = ProposalParams::from_nominal(nominal);
            int iterations = 0;
            try {
                const CeResult ce = ce_optimize(model, nominal, config.gamma, targets[t],
                                                config.ce(), derive_seed(config.seed, 100 + l),
                                                config.fault_kind);
                params = ce.params;
                iterations = ce.iterations();
            } catch (const EmptyEliteError& e) {
                report.warnings.push_back("line " + std::to_string(l) +
                                          ": cross-entropy stopped, nominal proposal used: " + e.what());
            }
            estimates[t] = is_estimate(model, params, nominal, config.gamma, config.n_final,
                                       targets[t], derive_seed(config.seed, 200 + l),
                                       config.fault_kind, config.threads);
            estimates[t].iterations = iterations;
        }
    }
    report.timing.estimate = seconds_since(start);

    for (auto& est : estimates) {
        if (!config.per_line_reoptimize || est.target.global) {
            est.iterations = report.ce.iterations();
        }
        est.warnings = report.ce.warnings;
        LineRisk lr{est, classify_risk(est.q, config.zones)};
        if (est.target.global) {
            report.global = std::move(lr);
        } else {
            report.lines.push_back(std::move(lr));
        }
    }
    return report;
}

}  // namespace n1plus
