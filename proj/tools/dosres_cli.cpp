// dosres: analyze, simulate, sweep and gen-dos subcommands over JSON scenarios.
//
// Exit codes: 0 ok, 1 parse/input/generation error, 2 an analysis bound is
// infeasible (analyze), 3 a certified property failed in simulation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dosres/dosres.hpp"

namespace {

using namespace dosres;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitViolation = 3;

// A-priori Delta* for each logic: the longest inter-attempt gap during DoS.
double worst_case_delta_star(const Scenario& s, double delta2) {
    switch (s.logic) {
        case LogicKind::EventTime:
        case LogicKind::PureTime: return s.delta1;
        case LogicKind::SelfTrigger: return delta2;
        case LogicKind::IdealEvent: return 0.0;
    }
    return s.delta1;
}

struct Analysis {
    KeyValueReport report;
    bool all_feasible = true;
    TrajectoryConstants theorem2;
};

Analysis analyze(const Scenario& s) {
    Analysis out;
    auto& r = out.report;
    const LtiPlant plant = plant_of(s);
    const double riccati = riccati_delta2(plant, s.sigma);
    const double delta2 = effective_delta2(s, plant);
    r.add("delta2", delta2);
    r.add("delta2_source", std::string(s.delta2 ? "config" : "riccati"));
    r.add("riccati_delta2", riccati);
    r.add("delta2_admissible", delta2 <= riccati * (1.0 + 1e-12));

    const PlantEnvelopes env = envelopes_of(plant);
    r.add("mu", env.decay.mu);
    r.add("lambda", env.decay.lambda);
    r.add("theta", env.growth.theta);
    r.add("rho", env.growth.rho);
    r.add("bk_norm", env.bk_norm);
    r.add("phi_norm", env.phi_norm);
    r.add("kappa", s.budget.kappa);
    r.add("tau", s.budget.tau_avg);

    const auto t1 = theorem1_bounds(env, s.sigma, s.budget.kappa, s.budget.tau_avg);
    r.add("rho_star", t1.rho_star);
    r.add("sigma_feasible_trajectory", t1.sigma_feasible);
    append_to(r, "theorem1.", t1);

    const DosSequence seq = resolve_dos(s);
    const double tau_star = seq.empty() ? std::numeric_limits<double>::infinity() : seq.min_duration();
    const auto robust = worst_case_robustness(worst_case_delta_star(s, delta2), tau_star);
    r.add("worst_case_delta_star", robust.delta_star);
    r.add("worst_case_tau_star", robust.tau_star);
    out.theorem2 = theorem2_bounds(env, s.sigma, s.budget.kappa, s.budget.tau_avg, robust);
    append_to(r, "theorem2.", out.theorem2);

    const auto t3 = theorem3_lyapunov(plant, effective_q(s), s.sigma, s.budget.kappa, s.budget.tau_avg);
    r.add("sigma_feasible_lyapunov", t3.sigma_feasible);
    append_to(r, "theorem3.", t3);

    out.all_feasible = t1.feasible() && out.theorem2.feasible() && t3.feasible() && delta2 <= riccati * (1.0 + 1e-12);
    r.add("all_feasible", out.all_feasible);
    return out;
}

int cmd_analyze(const std::string& config, const std::string& report_path) {
    const Scenario s = load_scenario(config);
    const Analysis a = analyze(s);
    std::cout << a.report;
    if (!report_path.empty()) {
        std::ofstream file(report_path);
        if (!file) throw InputError("cannot write report '" + report_path + "'");
        file << a.report;
    }
    return a.all_feasible ? kExitOk : kExitInfeasible;
}

struct SimulationOutcome {
    KeyValueReport report;
    bool violation = false;
    Trace trace;
};

SimulationOutcome simulate(const Scenario& s) {
    SimulationOutcome out;
    auto& r = out.report;
    const SimConfig config = sim_config_of(s);
    out.trace = run(config);
    const Trace& trace = out.trace;
    const double horizon = config.horizon;
    const DosSequence seq = config.dos.clipped(horizon);
    const SamplingRobustness robust = measure_robustness(trace.attempt_times(), seq);

    r.add("delta2", config.trigger.delta2);
    r.add("samples", static_cast<double>(trace.samples.size()));
    r.add("attempts", static_cast<double>(trace.attempts.size()));
    r.add("successes", static_cast<double>(trace.success_times().size()));
    r.add("diverged", trace.diverged);
    r.add("delta_star", robust.delta_star);
    r.add("tau_star", robust.tau_star);
    r.add("xi_horizon", xi_measure(seq, horizon));
    r.add("xi_bar_horizon", robust.xi_bar(horizon));

    const double time_slack = 10.0 * config.crossing_tol;
    const auto rule = check_update_rule(trace, config.trigger.sigma, robust, time_slack);
    r.add("update_rule", std::string(rule.holds ? "holds" : "violated"));
    r.add("update_rule_worst_ratio", rule.worst_ratio);
    out.violation |= !rule.holds;

    const auto lemma = check_lemma1(trace, config.trigger.sigma, robust);
    r.add("lemma1", std::string(lemma.holds ? "holds" : "violated"));
    r.add("lemma1_checked", static_cast<double>(lemma.checked));
    r.add("lemma1_exempt", static_cast<double>(lemma.exempt));
    out.violation |= !lemma.holds;

    // Envelope certificates are derived for the held-input loop only.
    if (config.plant.input_mode() != InputMode::HoldLast) {
        r.add("ges", std::string("uncertified"));
        r.add("ges_reason", std::string("zero_during_dos"));
        return out;
    }
    bool certified = false;
    const PlantEnvelopes env = envelopes_of(config.plant);
    const auto t2 = theorem2_bounds(env, s.sigma, s.budget.kappa, s.budget.tau_avg, robust);
    append_to(r, "theorem2.", t2);
    if (t2.feasible()) {
        certified = true;
        const auto v = verify_ges(trace, t2.alpha, t2.beta);
        r.add("theorem2_ges", std::string(v.holds ? "holds" : "violated"));
        r.add("theorem2_worst_ratio", v.worst_ratio);
        out.violation |= !v.holds;
    } else {
        r.add("theorem2_ges", std::string("uncertified"));
    }
    try {
        const auto t3 = theorem3_lyapunov(config.plant, effective_q(s), s.sigma, s.budget.kappa, s.budget.tau_avg,
                                          robust.inflation());
        append_to(r, "theorem3.", t3);
        if (t3.feasible()) {
            certified = true;
            const auto v = verify_ges(trace, t3.alpha, t3.beta);
            r.add("theorem3_ges", std::string(v.holds ? "holds" : "violated"));
            r.add("theorem3_worst_ratio", v.worst_ratio);
            const auto decay = check_lyapunov_decay(trace, t3, robust, time_slack);
            r.add("theorem3_segment_decay", std::string(decay.holds ? "holds" : "violated"));
            out.violation |= !v.holds || !decay.holds;
        } else {
            r.add("theorem3_ges", std::string("uncertified"));
        }
    } catch (const SolvabilityError& e) {
        r.add("theorem3_ges", std::string("uncertified"));
    }
    r.add("ges", std::string(certified ? (out.violation ? "violated" : "holds") : "uncertified"));
    return out;
}

int cmd_simulate(const std::string& config, const std::string& out_path) {
    const Scenario s = load_scenario(config);
    SimulationOutcome o = simulate(s);
    std::ofstream file(out_path);
    if (!file) throw InputError("cannot write trace '" + out_path + "'");
    write_trace_csv(file, o.trace);
    std::cout << o.report;
    return o.violation ? kExitViolation : kExitOk;
}

// 1 if the peak of ||x|| over the last quarter is below the peak over the
// second quarter, 0 otherwise (including divergence).
std::string ges_observed(const Trace& trace, double horizon) {
    if (trace.diverged) return "0";
    double early = 0.0;
    double late = 0.0;
    for (const auto& s : trace.samples) {
        if (s.t >= 0.25 * horizon && s.t <= 0.5 * horizon) early = std::max(early, s.x_norm);
        if (s.t >= 0.75 * horizon) late = std::max(late, s.x_norm);
    }
    if (early == 0.0) return late == 0.0 ? "1" : "0";
    return late < early ? "1" : "0";
}

struct SweepRow {
    double value = 0.0;
    std::string tau_min, alpha, beta, ges;
};

std::string number_text(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

SweepRow sweep_point(Scenario s, const std::string& param, double value) {
    SweepRow row;
    row.value = value;
    if (param == "tau") s.budget.tau_avg = value;
    else if (param == "sigma") s.sigma = value;
    else s.delta1 = value;
    try {
        const Analysis a = analyze(s);
        row.tau_min = number_text(a.theorem2.tau_min);
        row.alpha = a.theorem2.feasible() ? number_text(a.theorem2.alpha) : "NA";
        row.beta = a.theorem2.feasible() ? number_text(a.theorem2.beta) : "NA";
    } catch (const std::exception&) {
        row.tau_min = row.alpha = row.beta = "NA";
    }
    try {
        SimConfig c = sim_config_of(s);
        row.ges = ges_observed(run(c), c.horizon);
    } catch (const std::exception&) {
        row.ges = "NA";
    }
    return row;
}

int cmd_sweep(const std::string& config, const std::string& param, double from, double to, int steps,
              const std::string& out_path) {
    if (param != "tau" && param != "sigma" && param != "delta1") {
        throw InputError("unknown sweep parameter '" + param + "' (expected tau, sigma or delta1)");
    }
    if (steps < 2) throw InputError("sweep needs at least 2 steps");
    const Scenario s = load_scenario(config);
    std::vector<SweepRow> rows(static_cast<std::size_t>(steps));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            const double value = from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1);
            rows[i] = sweep_point(s, param, value);
        }
    };
    const unsigned n_threads = std::max(1u, std::min(std::thread::hardware_concurrency(), static_cast<unsigned>(steps)));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.value < b.value; });

    std::ofstream file(out_path);
    if (!file) throw InputError("cannot write sweep output '" + out_path + "'");
    file << "value,tau_min,alpha,beta,ges_observed\n";
    for (const auto& row : rows) {
        file << number_text(row.value) << ',' << row.tau_min << ',' << row.alpha << ',' << row.beta << ',' << row.ges
             << '\n';
    }
    return kExitOk;
}

struct GenDosArgs {
    std::string kind;
    double kappa = 1.0;
    double tau = 2.0;
    std::uint64_t seed = 0;
    double horizon = 10.0;
    double min_duration = 0.1;
    double attempt_period = 0.0;
    std::string out;
};

int cmd_gen_dos(const GenDosArgs& g) {
    const DosBudget budget{g.kappa, g.tau};
    budget.validate();
    DosSequence seq;
    if (g.kind == "periodic") {
        // Intervals of length kappa every kappa * tau: the budget holds with equality at every onset.
        seq = gen_periodic(0.0, g.kappa * g.tau, 1.0 / g.tau, g.horizon).sequence;
    } else if (g.kind == "random") {
        seq = gen_random_budgeted(budget, g.min_duration, g.seed, g.horizon);
    } else if (g.kind == "greedy") {
        const double period = g.attempt_period > 0.0 ? g.attempt_period : g.min_duration;
        std::vector<double> attempts;
        for (double t = 0.0; t < g.horizon; t = static_cast<double>(attempts.size()) * period) attempts.push_back(t);
        seq = gen_greedy_adversary(budget, g.min_duration, attempts);
    } else {
        throw InputError("unknown DoS kind '" + g.kind + "' (expected periodic, random or greedy)");
    }
    if (const auto check = check_slow_average(seq, budget, g.horizon); !check) {
        throw GenerationError("generated sequence violates the budget at t = " + number_text(check.time));
    }
    std::ofstream file(g.out);
    if (!file) throw InputError("cannot write DoS file '" + g.out + "'");
    write_dos(file, seq, budget);
    std::cout << "intervals = " << seq.size() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and stability analysis of sampled-data control under DoS"};
    app.require_subcommand(1);

    std::string config, report, out, param;
    double from = 0.0, to = 0.0;
    int steps = 2;
    GenDosArgs gen;

    auto* analyze_cmd = app.add_subcommand("analyze", "Compute envelope constants and certificates");
    analyze_cmd->add_option("--config", config, "Scenario JSON")->required();
    analyze_cmd->add_option("--report", report, "Also write the key-value report here");

    auto* simulate_cmd = app.add_subcommand("simulate", "Simulate and check certified properties");
    simulate_cmd->add_option("--config", config, "Scenario JSON")->required();
    simulate_cmd->add_option("--out", out, "Trace CSV")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep tau, sigma or delta1");
    sweep_cmd->add_option("--config", config, "Scenario JSON")->required();
    sweep_cmd->add_option("--param", param, "tau | sigma | delta1")->required();
    sweep_cmd->add_option("--from", from)->required();
    sweep_cmd->add_option("--to", to)->required();
    sweep_cmd->add_option("--steps", steps)->required();
    sweep_cmd->add_option("--out", out, "Sweep CSV")->required();

    auto* gen_cmd = app.add_subcommand("gen-dos", "Generate a budget-admissible DoS file");
    gen_cmd->add_option("--kind", gen.kind, "periodic | random | greedy")->required();
    gen_cmd->add_option("--kappa", gen.kappa)->required();
    gen_cmd->add_option("--tau", gen.tau)->required();
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--horizon", gen.horizon)->required();
    gen_cmd->add_option("--min-duration", gen.min_duration);
    gen_cmd->add_option("--attempt-period", gen.attempt_period, "Attempt spacing seen by the greedy jammer");
    gen_cmd->add_option("--out", gen.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    try {
        if (*analyze_cmd) return cmd_analyze(config, report);
        if (*simulate_cmd) return cmd_simulate(config, out);
        if (*sweep_cmd) return cmd_sweep(config, param, from, to, steps, out);
        if (*gen_cmd) return cmd_gen_dos(gen);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitError;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return *analyze_cmd ? kExitInfeasible : kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
