#include "lbsim/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lbsim {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        out.push_back(trim(item));
    }
    return out;
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::int64_t x = std::stoll(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return x;
    } catch (const std::exception&) {
        throw ParseError("bad integer for " + key + ": '" + v + "'");
    }
}

Rational parse_rat(const std::string& v, const std::string& key) {
    auto r = parse_rational(v);
    if (!r) {
        throw ParseError("bad rational for " + key + ": '" + v + "'");
    }
    return *r;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError("bad boolean for " + key + ": '" + v + "'");
}

void apply_key(Scenario& sc, const std::string& section, const std::string& key, const std::string& value) {
    if (section == "scenario") {
        if (key == "algorithm") {
            if (value == "continuous") sc.algo = Scenario::Algo::Continuous;
            else if (value == "discrete") sc.algo = Scenario::Algo::Discrete;
            else if (value == "multi") sc.algo = Scenario::Algo::Multi;
            else if (value == "diffusion") sc.algo = Scenario::Algo::Diffusion;
            else if (value == "async") sc.algo = Scenario::Algo::Async;
            else if (value == "selfstab") sc.algo = Scenario::Algo::SelfStab;
            else throw ParseError("unknown algorithm '" + value + "'");
        } else if (key == "eps") {
            sc.eps = parse_rat(value, key);
        } else if (key == "alpha") {
            sc.alpha = parse_rat(value, key);
        } else if (key == "policy") {
            if (value == "round_robin") sc.schedule.policy = SchedulePolicy::RoundRobinFair;
            else if (value == "random_fair") sc.schedule.policy = SchedulePolicy::RandomFair;
            else if (value == "adversarial_longest_queue") sc.schedule.policy = SchedulePolicy::AdversarialLongestQueue;
            else throw ParseError("unknown policy '" + value + "'");
        } else if (key == "seed") {
            sc.schedule.seed = static_cast<std::uint64_t>(parse_int(value, key));
        } else if (key == "k") {
            sc.k = static_cast<int>(parse_int(value, key));
        } else if (key == "fault_seed") {
            sc.faults.seed = static_cast<std::uint64_t>(parse_int(value, key));
        } else if (key == "garbage_frames") {
            sc.faults.max_garbage_per_channel = static_cast<int>(parse_int(value, key));
        } else if (key == "corrupt_state") {
            sc.faults.corrupt_state = parse_bool(value, key);
        } else if (key == "corrupt_loads") {
            sc.faults.corrupt_loads = parse_bool(value, key);
        } else if (key == "corrupt_magnitude") {
            sc.faults.corrupt_magnitude = parse_int(value, key);
        } else if (key == "max_rounds") {
            sc.max_rounds = static_cast<int>(parse_int(value, key));
        } else if (key == "max_steps") {
            sc.max_steps = parse_int(value, key);
        } else if (key == "stride") {
            sc.stride = static_cast<int>(parse_int(value, key));
        } else if (key == "trace") {
            sc.trace_path = value;
        } else if (key == "checks") {
            for (const auto& c : split(value, ',')) {
                if (c.empty()) continue;
                if (c == "monotonic") sc.checks.monotonic = true;
                else if (c == "fairness") sc.checks.fairness = true;
                else if (c == "lemma2") sc.checks.lemma2 = true;
                else if (c == "lemma6") sc.checks.lemma6 = true;
                else if (c == "matching_degree") sc.checks.matching_degree = true;
                else if (c == "conservation") sc.checks.conservation = true;
                else throw ParseError("unknown check '" + c + "'");
            }
        } else {
            throw ParseError("unknown scenario key '" + key + "'");
        }
    } else if (section == "graph") {
        if (key == "source") {
            if (value == "file") sc.graph_from_file = true;
            else if (value == "generate") sc.graph_from_file = false;
            else throw ParseError("graph source must be 'file' or 'generate'");
        } else if (key == "path") {
            sc.graph_path = value;
        } else if (key == "kind") {
            if (value == "path") sc.gspec.kind = GraphKind::Path;
            else if (value == "cycle") sc.gspec.kind = GraphKind::Cycle;
            else if (value == "star") sc.gspec.kind = GraphKind::Star;
            else if (value == "random") sc.gspec.kind = GraphKind::RandomConnected;
            else throw ParseError("unknown graph kind '" + value + "'");
        } else if (key == "n") {
            sc.gspec.n = static_cast<NodeId>(parse_int(value, key));
        } else if (key == "edge_prob") {
            sc.gspec.edge_prob = std::stod(value);
        } else if (key == "graph_seed") {
            sc.gspec.seed = static_cast<std::uint64_t>(parse_int(value, key));
        } else if (key == "loads") {
            if (value == "uniform") sc.linit.kind = LoadInit::Kind::Uniform;
            else if (value == "explicit") sc.linit.kind = LoadInit::Kind::Explicit;
            else if (value == "point_mass") sc.linit.kind = LoadInit::Kind::PointMass;
            else throw ParseError("unknown load init '" + value + "'");
        } else if (key == "load_max") {
            sc.linit.max = parse_int(value, key);
        } else if (key == "load_seed") {
            sc.linit.seed = static_cast<std::uint64_t>(parse_int(value, key));
        } else if (key == "load_list") {
            sc.linit.values.clear();
            for (const auto& item : split(value, ',')) {
                sc.linit.values.push_back(parse_rat(item, key));
            }
        } else if (key == "point_node") {
            sc.linit.node = static_cast<NodeId>(parse_int(value, key));
        } else if (key == "point_amount") {
            sc.linit.amount = parse_int(value, key);
        } else if (key == "point_base") {
            sc.linit.base = parse_int(value, key);
        } else {
            throw ParseError("unknown graph key '" + key + "'");
        }
    } else {
        throw ParseError("unknown section [" + section + "]");
    }
}

void validate_checks(const Scenario& sc) {
    const bool continuous = sc.algo == Scenario::Algo::Continuous;
    const bool discrete = sc.algo == Scenario::Algo::Discrete;
    if (sc.checks.lemma2 && !continuous) {
        throw ParseError("check 'lemma2' applies to the continuous algorithm only");
    }
    if (sc.checks.lemma6 && !discrete) {
        throw ParseError("check 'lemma6' applies to the discrete algorithm only");
    }
    if (sc.checks.matching_degree && !(continuous || discrete)) {
        throw ParseError("check 'matching_degree' applies to single-proposal algorithms only");
    }
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
    Scenario sc;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || section.empty()) {
            throw ParseError("line " + std::to_string(lineno) + ": expected 'key = value' inside a section");
        }
        apply_key(sc, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate_checks(sc);
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open scenario file: " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

namespace {

constexpr char kTraceHeader[] = "idx,l_max,l_min,discrepancy,potential,deals,messages,checks\n";

std::uint32_t enabled_mask(const CheckSet& c) {
    std::uint32_t m = 0;
    if (c.monotonic) m |= 1u;
    if (c.fairness) m |= 2u;
    if (c.lemma2) m |= 4u;
    if (c.lemma6) m |= 8u;
    if (c.matching_degree) m |= 16u;
    if (c.conservation) m |= 32u;
    return m;
}

void trace_row(std::ostream& out, std::int64_t idx, const Metrics& m, std::int64_t deals,
               std::int64_t messages, std::uint32_t checks) {
    out << idx << ',' << to_fraction_string(m.l_max) << ',' << to_fraction_string(m.l_min) << ','
        << to_fraction_string(m.discrepancy) << ',' << to_fraction_string(m.potential) << ',' << deals << ','
        << messages << ',' << checks << '\n';
}

std::string stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::EpsBalanced: return "eps_balanced";
        case StopReason::FixedPoint: return "fixed_point";
        case StopReason::HorizonExceeded: return "horizon_exceeded";
    }
    return "?";
}

void kv(std::ostream& out, const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
}

RunOutcome run_sync_scenario(const Scenario& sc, const Graph& g, LoadVector loads) {
    SyncAlgo algo = DiscreteAlgo{};
    switch (sc.algo) {
        case Scenario::Algo::Continuous: algo = ContinuousAlgo{sc.eps}; break;
        case Scenario::Algo::Discrete: algo = DiscreteAlgo{}; break;
        case Scenario::Algo::Multi: algo = MultiAlgo{}; break;
        case Scenario::Algo::Diffusion: algo = DiffusionAlgo{sc.alpha}; break;
        default: break;
    }
    std::ostringstream trace;
    trace << kTraceHeader;
    const Metrics m0 = compute_metrics(g, loads);
    trace_row(trace, 0, m0, 0, 0, enabled_mask(sc.checks));
    const auto edge_count = static_cast<std::int64_t>(g.edges().size());

    SyncOptions opt;
    opt.max_rounds = sc.max_rounds;
    opt.checks = sc.checks;
    opt.observer = [&](const RoundReport& rep) {
        // Phase 1 proposals, phase 2 acceptances, phase 3 load publication.
        const auto messages = static_cast<std::int64_t>(rep.proposals.size() + rep.deals.size()) + 2 * edge_count;
        trace_row(trace, rep.round_index, rep.metrics_after, static_cast<std::int64_t>(rep.deals.size()),
                  messages, rep.checks_passed);
    };
    auto [final_loads, verdict] = run_sync(g, std::move(loads), algo, opt);

    RunOutcome out;
    std::ostringstream summary;
    kv(summary, "verdict", stop_reason_name(verdict.reason));
    kv(summary, "rounds_used", std::to_string(verdict.rounds_used));
    kv(summary, "deals", std::to_string(verdict.total_deals));
    if (sc.algo == Scenario::Algo::Continuous) {
        kv(summary, "budget_rounds", std::to_string(verdict.budget.continuous_rounds));
    } else if (sc.algo == Scenario::Algo::Discrete) {
        kv(summary, "budget_rounds", std::to_string(verdict.budget.discrete_rounds));
    } else if (sc.algo == Scenario::Algo::Multi) {
        kv(summary, "budget_nk2", std::to_string(verdict.nk2_budget));
    }
    kv(summary, "within_budget", verdict.within_budget ? "true" : "false");
    const Metrics mf = compute_metrics(g, final_loads);
    kv(summary, "final_discrepancy", to_fraction_string(mf.discrepancy));
    kv(summary, "final_potential", to_fraction_string(mf.potential));
    kv(summary, "conservation_drift", to_fraction_string(mf.l_avg * g.node_count() - m0.l_avg * g.node_count()));
    kv(summary, "violations", std::to_string(verdict.violations.size()));
    kv(summary, "first_violation_round", std::to_string(verdict.first_violation_round));
    for (std::size_t i = 0; i < std::min<std::size_t>(verdict.violations.size(), 10); ++i) {
        kv(summary, "violation_" + std::to_string(i), verdict.violations[i]);
    }

    if (!verdict.violations.empty()) {
        out.exit_code = kExitViolation;
    } else if (verdict.reason == StopReason::HorizonExceeded) {
        out.exit_code = kExitHorizon;
    }
    out.summary = summary.str();
    out.trace = trace.str();
    return out;
}

RunOutcome run_async_scenario(const Scenario& sc, const Graph& g, const LoadVector& loads) {
    std::ostringstream trace;
    trace << kTraceHeader;
    const Metrics m0 = compute_metrics(g, loads);
    trace_row(trace, 0, m0, 0, 0, enabled_mask(sc.checks));

    RunOutcome out;
    std::ostringstream summary;
    auto observer = [&](const StepTrace& t) {
        trace_row(trace, t.step, t.metrics, t.deals, t.messages_delivered, t.checks_passed);
    };

    if (sc.algo == Scenario::Algo::Async) {
        AsyncOptions opt;
        opt.max_steps = sc.max_steps;
        opt.checks = sc.checks;
        opt.trace_stride = sc.stride;
        opt.observer = observer;
        auto [final_loads, verdict] = run_async(g, loads, sc.schedule, opt);

        kv(summary, "verdict",
           verdict.reached_balance ? "balanced_quiescent"
                                   : (verdict.horizon_exceeded ? "horizon_exceeded" : "stuck"));
        kv(summary, "steps_used", std::to_string(verdict.steps_used));
        kv(summary, "messages_delivered", std::to_string(verdict.messages_delivered));
        kv(summary, "deals", std::to_string(verdict.deals));
        kv(summary, "deal_budget_nk2", std::to_string(verdict.deal_budget));
        kv(summary, "within_deal_budget", verdict.within_deal_budget ? "true" : "false");
        const Metrics mf = compute_metrics(g, final_loads);
        kv(summary, "final_discrepancy", to_fraction_string(mf.discrepancy));
        kv(summary, "final_potential", to_fraction_string(mf.potential));
        kv(summary, "conservation_drift",
           to_fraction_string(mf.l_avg * g.node_count() - m0.l_avg * g.node_count()));
        kv(summary, "violations", std::to_string(verdict.violations.size()));
        kv(summary, "first_violation_step", std::to_string(verdict.first_violation_step));
        for (std::size_t i = 0; i < std::min<std::size_t>(verdict.violations.size(), 10); ++i) {
            kv(summary, "violation_" + std::to_string(i), verdict.violations[i]);
        }
        if (!verdict.violations.empty()) {
            out.exit_code = kExitViolation;
        } else if (verdict.horizon_exceeded) {
            out.exit_code = kExitHorizon;
        }
    } else {
        StabOptions opt;
        opt.k = sc.k;
        opt.max_steps = sc.max_steps;
        opt.checks = sc.checks;
        opt.trace_stride = sc.stride;
        opt.observer = observer;
        auto [final_loads, verdict] = run_selfstab(g, loads, sc.faults, sc.schedule, opt);

        kv(summary, "verdict",
           verdict.reached_balance ? "balanced_quiescent"
                                   : (verdict.horizon_exceeded ? "horizon_exceeded" : "stuck"));
        kv(summary, "steps_used", std::to_string(verdict.steps_used));
        kv(summary, "micro_steps", std::to_string(verdict.micro_steps));
        kv(summary, "deals", std::to_string(verdict.deals));
        const auto& rep = verdict.report;
        kv(summary, "stabilization_step", std::to_string(rep.stabilization_step));
        kv(summary, "garbage_free_step", std::to_string(rep.garbage_free_step));
        kv(summary, "all_purged_step", std::to_string(rep.all_purged_step));
        kv(summary, "phantom_deliveries", std::to_string(rep.phantom_deliveries));
        kv(summary, "garbage_discarded", std::to_string(rep.garbage_discarded));
        kv(summary, "unexpected_acks", std::to_string(rep.unexpected_acks));
        kv(summary, "watchdog_resets", std::to_string(rep.watchdog_resets));
        kv(summary, "clamp_absorbed", std::to_string(rep.clamp_absorbed));
        kv(summary, "sum_drift", std::to_string(rep.sum_drift));
        kv(summary, "suffix_monotonic", rep.suffix_monotonic ? "true" : "false");
        kv(summary, "suffix_conserved", rep.suffix_conserved ? "true" : "false");
        kv(summary, "suffix_deals_gap_ok", rep.suffix_deals_gap_ok ? "true" : "false");
        const Metrics mf = compute_metrics(g, final_loads);
        kv(summary, "final_discrepancy", to_fraction_string(mf.discrepancy));
        kv(summary, "final_potential", to_fraction_string(mf.potential));
        kv(summary, "violations", std::to_string(verdict.violations.size()));
        for (std::size_t i = 0; i < std::min<std::size_t>(verdict.violations.size(), 10); ++i) {
            kv(summary, "violation_" + std::to_string(i), verdict.violations[i]);
        }
        if (!verdict.violations.empty()) {
            out.exit_code = kExitViolation;
        } else if (verdict.horizon_exceeded) {
            out.exit_code = kExitHorizon;
        }
    }
    out.summary = summary.str();
    out.trace = trace.str();
    return out;
}

}  // namespace

RunOutcome run_scenario(const Scenario& sc) {
    auto [g, loads] = sc.graph_from_file ? load_graph(sc.graph_path, sc.mode())
                                         : generate(sc.gspec, sc.linit, sc.mode());
    switch (sc.algo) {
        case Scenario::Algo::Continuous:
        case Scenario::Algo::Discrete:
        case Scenario::Algo::Multi:
        case Scenario::Algo::Diffusion:
            return run_sync_scenario(sc, g, std::move(loads));
        case Scenario::Algo::Async:
        case Scenario::Algo::SelfStab:
            return run_async_scenario(sc, g, loads);
    }
    throw InvalidParameter("unreachable algorithm");
}

namespace {

std::string resolve_out_path(const std::string& path) {
    if (path.empty() || path.front() == '/') {
        return path;
    }
    const char* dir = std::getenv("LBSIM_OUT_DIR");
    if (dir == nullptr || *dir == '\0') {
        return path;
    }
    std::string d(dir);
    if (d.back() != '/') {
        d += '/';
    }
    return d + path;
}

}  // namespace

int run_scenario_file(const std::string& path, bool quiet) {
    Scenario sc;
    try {
        sc = load_scenario(path);
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitParse;
    }
    RunOutcome outcome;
    try {
        outcome = run_scenario(sc);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitParse;
    }
    if (!sc.trace_path.empty()) {
        const std::string tpath = resolve_out_path(sc.trace_path);
        std::ofstream tf(tpath);
        if (!tf) {
            std::cerr << "cannot write trace: " << tpath << "\n";
            return kExitParse;
        }
        tf << outcome.trace;
        std::ofstream sf(tpath + ".summary");
        sf << outcome.summary;
    }
    if (!quiet) {
        std::cout << outcome.summary;
    }
    return outcome.exit_code;
}

namespace {

std::string find_summary_value(const std::string& summary, const std::string& key) {
    std::istringstream in(summary);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos && line.substr(0, eq) == key) {
            return line.substr(eq + 3);
        }
    }
    return "";
}

}  // namespace

SweepOutcome sweep_runs(const Scenario& base,
                        const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
                        std::uint64_t seed_from, std::uint64_t seed_to, std::size_t grid_cap) {
    SweepOutcome out;
    if (grid.empty()) {
        out.table = "params\tseed\tverdict\trounds\tbudget\tratio\texit\n";
        return out;
    }
    std::size_t combos = 1;
    for (const auto& [key, values] : grid) {
        if (values.empty()) {
            combos = 0;
        } else {
            combos *= values.size();
        }
    }
    const std::uint64_t seeds = seed_to >= seed_from ? seed_to - seed_from + 1 : 0;
    if (combos * std::max<std::uint64_t>(seeds, 1) > grid_cap) {
        throw InvalidParameter("sweep grid exceeds cap");
    }
    std::ostringstream table;
    table << "params\tseed\tverdict\trounds\tbudget\tratio\texit\n";

    for (std::size_t c = 0; c < combos; ++c) {
        Scenario sc = base;
        std::string params;
        std::size_t rem = c;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& [key, values] = grid[i];
            const std::string& v = values[rem % values.size()];
            rem /= values.size();
            const std::string section = key.rfind("graph.", 0) == 0 ? "graph" : "scenario";
            const std::string bare = section == "graph" ? key.substr(6) : key;
            apply_key(sc, section, bare, v);
            if (!params.empty()) params += " ";
            params += key + "=" + v;
        }
        for (std::uint64_t s = seed_from; s <= seed_to && seeds > 0; ++s) {
            Scenario run = sc;
            run.gspec.seed = s;
            run.linit.seed = s + 1000003;
            run.schedule.seed = s;
            run.faults.seed = s;
            run.trace_path.clear();

            SweepRow row;
            row.params = params.empty() ? "-" : params;
            row.seed = s;
            try {
                const RunOutcome res = run_scenario(run);
                row.exit_code = res.exit_code;
                row.verdict = find_summary_value(res.summary, "verdict");
                const std::string rounds = find_summary_value(res.summary, "rounds_used");
                const std::string steps = find_summary_value(res.summary, "steps_used");
                row.rounds = rounds.empty() ? (steps.empty() ? 0 : std::stoll(steps)) : std::stoll(rounds);
                std::string budget = find_summary_value(res.summary, "budget_rounds");
                if (budget.empty()) budget = find_summary_value(res.summary, "deal_budget_nk2");
                if (budget.empty()) budget = find_summary_value(res.summary, "budget_nk2");
                row.budget = budget.empty() ? 0 : std::stoll(budget);
                row.ratio = row.budget > 0 ? static_cast<double>(row.rounds) / static_cast<double>(row.budget) : 0.0;
            } catch (const std::exception& e) {
                row.exit_code = kExitParse;
                row.verdict = std::string("error: ") + e.what();
            }
            out.max_ratio = std::max(out.max_ratio, row.ratio);
            out.exit_code = std::max(out.exit_code, row.exit_code);
            table << row.params << '\t' << row.seed << '\t' << row.verdict << '\t' << row.rounds << '\t'
                  << row.budget << '\t' << row.ratio << '\t' << row.exit_code << '\n';
            out.rows.push_back(std::move(row));
        }
    }
    table << "max_ratio = " << out.max_ratio << "\n";
    out.table = table.str();
    return out;
}

std::vector<std::pair<std::string, std::vector<std::string>>> parse_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open grid file: " + path);
    }
    std::vector<std::pair<std::string, std::vector<std::string>>> grid;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("grid line needs 'key = v1,v2,...': " + line);
        }
        grid.emplace_back(trim(line.substr(0, eq)), split(line.substr(eq + 1), ','));
    }
    return grid;
}

}  // namespace lbsim
