#include "lbsim/sync_engine.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace lbsim {

NeighborhoodSets neighborhood_sets(const Graph& g, const LoadVector& loads, NodeId u) {
    NeighborhoodSets sets;
    for (NodeId v : g.neighbors(u)) {
        if (loads[v] < loads[u]) {
            sets.v_less.push_back(v);
        } else if (loads[v] > loads[u]) {
            sets.v_more.push_back(v);
        }
    }
    return sets;
}

namespace {

// Phase 2 of both single-proposal algorithms: each receiver accepts the
// maximum-amount proposal, ties to the lowest proposer id.
std::vector<Transfer> accept_single(const std::vector<Proposal>& proposals) {
    std::map<NodeId, Proposal> best;
    for (const Proposal& p : proposals) {
        auto it = best.find(p.to);
        if (it == best.end() || p.amount > it->second.amount) {
            best.insert_or_assign(p.to, p);
        }
    }
    std::vector<Transfer> deals;
    deals.reserve(best.size());
    for (const auto& [to, p] : best) {
        deals.push_back({p.from, p.to, p.amount});
    }
    // Report deals in proposer order for stable traces.
    std::sort(deals.begin(), deals.end(),
              [](const Transfer& a, const Transfer& b) { return a.from < b.from; });
    return deals;
}

LoadVector apply_deals(const Graph& g, const LoadVector& loads, const std::vector<Transfer>& deals) {
    std::vector<Rational> next(static_cast<std::size_t>(g.node_count()));
    for (NodeId u = 0; u < g.node_count(); ++u) {
        next[static_cast<std::size_t>(u)] = loads[u];
    }
    for (const Transfer& d : deals) {
        next[static_cast<std::size_t>(d.from)] -= d.amount;
        next[static_cast<std::size_t>(d.to)] += d.amount;
    }
    return LoadVector(loads.mode(), std::move(next));
}

RoundReport make_report(const Graph& g, const LoadVector& before, const LoadVector& after,
                        std::vector<Proposal> proposals, std::vector<Transfer> deals) {
    RoundReport rep;
    rep.proposals = std::move(proposals);
    rep.deals = std::move(deals);
    rep.metrics_before = compute_metrics(g, before);
    rep.metrics_after = compute_metrics(g, after);
    return rep;
}

}  // namespace

std::pair<LoadVector, RoundReport> round_continuous(const Graph& g, const LoadVector& loads) {
    std::vector<Proposal> proposals;
    for (NodeId u = 0; u < g.node_count(); ++u) {
        NodeId target = -1;
        Rational best_gap = 0;
        for (NodeId v : g.neighbors(u)) {
            const Rational gap = loads[u] - loads[v];
            if (gap > 0 && (target < 0 || gap > best_gap)) {
                target = v;
                best_gap = gap;
            }
        }
        if (target >= 0) {
            proposals.push_back({u, target, best_gap / 2, std::nullopt});
        }
    }
    auto deals = accept_single(proposals);
    LoadVector after = apply_deals(g, loads, deals);
    auto rep = make_report(g, loads, after, std::move(proposals), std::move(deals));
    const Rational drop = rep.metrics_before.potential - rep.metrics_after.potential;
    rep.lemma_floor_satisfied = drop >= lemma2_floor(rep.metrics_before.discrepancy, g.diameter());
    return {std::move(after), std::move(rep)};
}

std::pair<LoadVector, RoundReport> round_discrete(const Graph& g, const LoadVector& loads) {
    std::vector<Proposal> proposals;
    for (NodeId u = 0; u < g.node_count(); ++u) {
        const std::int64_t lu = loads.as_int(u);
        NodeId target = -1;
        std::int64_t best_gap = 0;
        for (NodeId v : g.neighbors(u)) {
            const std::int64_t gap = lu - loads.as_int(v);
            if (gap >= 2 && gap > best_gap) {
                target = v;
                best_gap = gap;
            }
        }
        if (target >= 0) {
            proposals.push_back({u, target, Rational(static_cast<long>(best_gap / 2)), std::nullopt});
        }
    }
    auto deals = accept_single(proposals);
    LoadVector after = apply_deals(g, loads, deals);
    auto rep = make_report(g, loads, after, std::move(proposals), std::move(deals));
    const Metrics& mb = rep.metrics_before;
    if (mb.discrepancy >= 2 * g.diameter()) {
        const Rational drop = mb.potential - rep.metrics_after.potential;
        rep.lemma_floor_satisfied = drop >= lemma6_floor(mb.discrepancy, g.diameter());
    }
    return {std::move(after), std::move(rep)};
}

WaterfillPlan plan_waterfill(std::int64_t p_load, const std::vector<std::int64_t>& v_less_loads) {
    const auto q = v_less_loads.size();
    WaterfillPlan plan;
    plan.proposals.assign(q, 0);
    plan.tentative_load = p_load;
    if (q == 0) {
        return plan;
    }
    for (std::int64_t l : v_less_loads) {
        if (l >= p_load) {
            throw InvalidParameter("waterfill neighbor not strictly below p_load");
        }
    }
    auto planned = [&](std::size_t i) { return v_less_loads[i] + plan.proposals[i]; };

    std::size_t i = 0;
    while (plan.tentative_load >= planned(i) + 2) {
        plan.tentative_load -= 1;
        plan.proposals[i] += 1;
        if (i + 1 < q && planned(i) > planned(i + 1)) {
            i += 1;
        } else {
            i = 0;
        }
    }
    // The cursor-advance rule keeps planned loads near-sorted, so the local
    // exit is globally final; this converts that argument into a check.
    for (std::size_t j = 0; j < q; ++j) {
        if (plan.tentative_load >= planned(j) + 2) {
            throw std::logic_error("waterfill exit left a pourable neighbor");
        }
    }
    return plan;
}

std::pair<LoadVector, RoundReport> round_multi(const Graph& g, const LoadVector& loads) {
    struct Incoming {
        NodeId from;
        std::int64_t amount;
        std::int64_t tentative;
    };
    std::vector<Proposal> proposals;
    std::vector<std::vector<Incoming>> inbox(static_cast<std::size_t>(g.node_count()));

    for (NodeId p = 0; p < g.node_count(); ++p) {
        auto sets = neighborhood_sets(g, loads, p);
        if (sets.v_less.empty()) {
            continue;
        }
        // Non-decreasing by load, ties by id (v_less is already id-sorted).
        std::stable_sort(sets.v_less.begin(), sets.v_less.end(),
                         [&](NodeId a, NodeId b) { return loads.as_int(a) < loads.as_int(b); });
        std::vector<std::int64_t> below;
        below.reserve(sets.v_less.size());
        for (NodeId v : sets.v_less) {
            below.push_back(loads.as_int(v));
        }
        const WaterfillPlan plan = plan_waterfill(loads.as_int(p), below);
        for (std::size_t idx = 0; idx < sets.v_less.size(); ++idx) {
            if (plan.proposals[idx] > 0) {
                const NodeId v = sets.v_less[idx];
                proposals.push_back(
                    {p, v, Rational(static_cast<long>(plan.proposals[idx])), plan.tentative_load});
                inbox[static_cast<std::size_t>(v)].push_back({p, plan.proposals[idx], plan.tentative_load});
            }
        }
    }

    // Acceptance: unit round-robin across proposers, tentative-descending
    // (ties lowest id); a unit from q is taken only while the receiver's
    // running load stays strictly below q's tentative.
    std::vector<Transfer> deals;
    std::vector<std::int64_t> delta(static_cast<std::size_t>(g.node_count()), 0);
    for (NodeId p = 0; p < g.node_count(); ++p) {
        auto& incoming = inbox[static_cast<std::size_t>(p)];
        if (incoming.empty()) {
            continue;
        }
        std::sort(incoming.begin(), incoming.end(), [](const Incoming& a, const Incoming& b) {
            if (a.tentative != b.tentative) return a.tentative > b.tentative;
            return a.from < b.from;
        });
        std::vector<std::int64_t> accepted(incoming.size(), 0);
        std::vector<bool> active(incoming.size(), true);
        std::int64_t running = loads.as_int(p);
        std::size_t remaining = incoming.size();
        std::size_t cursor = 0;
        while (remaining > 0) {
            if (active[cursor]) {
                const Incoming& inc = incoming[cursor];
                if (accepted[cursor] < inc.amount && running < inc.tentative) {
                    running += 1;
                    accepted[cursor] += 1;
                } else {
                    active[cursor] = false;
                    --remaining;
                }
            }
            cursor = (cursor + 1) % incoming.size();
        }
        for (std::size_t idx = 0; idx < incoming.size(); ++idx) {
            if (accepted[idx] > 0) {
                deals.push_back({incoming[idx].from, p, Rational(static_cast<long>(accepted[idx]))});
                delta[static_cast<std::size_t>(p)] += accepted[idx];
                delta[static_cast<std::size_t>(incoming[idx].from)] -= accepted[idx];
            }
        }
    }
    std::sort(deals.begin(), deals.end(), [](const Transfer& a, const Transfer& b) {
        if (a.from != b.from) return a.from < b.from;
        return a.to < b.to;
    });

    std::vector<Rational> next(static_cast<std::size_t>(g.node_count()));
    for (NodeId u = 0; u < g.node_count(); ++u) {
        next[static_cast<std::size_t>(u)] = loads[u] + Rational(static_cast<long>(delta[static_cast<std::size_t>(u)]));
    }
    LoadVector after(loads.mode(), std::move(next));

    // Structural contract: a donor debited at most what it proposed, so it
    // never ends below its shipped tentative load.
    for (const Proposal& pr : proposals) {
        if (after[pr.from] < Rational(static_cast<long>(*pr.tentative_load))) {
            throw std::logic_error("multi-neighbor donor ended below its tentative load");
        }
    }

    auto rep = make_report(g, loads, after, std::move(proposals), std::move(deals));
    // Every accepted unit moves across a gap of at least 2, so the potential
    // drops by at least 2 per unit.
    std::int64_t units = 0;
    for (const Transfer& d : rep.deals) {
        units += to_int64(d.amount);
    }
    rep.lemma_floor_satisfied =
        rep.metrics_before.potential - rep.metrics_after.potential >= Rational(2) * Rational(static_cast<long>(units));
    return {std::move(after), std::move(rep)};
}

std::pair<LoadVector, RoundReport> round_diffusion(const Graph& g, const LoadVector& loads,
                                                   const Rational& alpha) {
    if (alpha <= 0 || alpha > 1) {
        throw InvalidParameter("diffusion alpha must be in (0, 1]");
    }
    std::vector<Transfer> sends;
    std::vector<Rational> next(static_cast<std::size_t>(g.node_count()));
    for (NodeId u = 0; u < g.node_count(); ++u) {
        next[static_cast<std::size_t>(u)] = loads[u];
    }
    for (NodeId u = 0; u < g.node_count(); ++u) {
        if (loads[u] == 0) {
            continue;
        }
        const Rational share = alpha * loads[u] / g.degree(u);
        for (NodeId v : g.neighbors(u)) {
            sends.push_back({u, v, share});
            next[static_cast<std::size_t>(u)] -= share;
            next[static_cast<std::size_t>(v)] += share;
        }
    }
    LoadVector after(loads.mode(), std::move(next));
    auto rep = make_report(g, loads, after, {}, std::move(sends));
    rep.proposals.reserve(rep.deals.size());
    for (const Transfer& d : rep.deals) {
        rep.proposals.push_back({d.from, d.to, d.amount, std::nullopt});
    }
    return {std::move(after), std::move(rep)};
}

namespace {

void run_round_checks(const Graph& g, const LoadVector& before, const LoadVector& after,
                      RoundReport& rep, const SyncAlgo& algo, const CheckSet& checks,
                      SyncVerdict& verdict) {
    const int round = rep.round_index;
    std::uint32_t failed = 0;
    auto flag = [&](const std::string& what, std::uint32_t bit = 0) {
        failed |= bit;
        verdict.violations.push_back("round " + std::to_string(round) + ": " + what);
        if (verdict.first_violation_round < 0) {
            verdict.first_violation_round = round;
        }
    };

    const bool single = std::holds_alternative<ContinuousAlgo>(algo) || std::holds_alternative<DiscreteAlgo>(algo);
    const bool multi = std::holds_alternative<MultiAlgo>(algo);
    const bool diffusion = std::holds_alternative<DiffusionAlgo>(algo);

    if (checks.monotonic) {
        const Metrics& mb = rep.metrics_before;
        const Metrics& ma = rep.metrics_after;
        if (ma.l_max > mb.l_max) {
            flag("L_max increased: " + to_fraction_string(mb.l_max) + " -> " + to_fraction_string(ma.l_max), 1u);
        }
        if (ma.l_min < mb.l_min) {
            flag("L_min decreased: " + to_fraction_string(mb.l_min) + " -> " + to_fraction_string(ma.l_min), 1u);
        }
        for (NodeId u = 0; u < g.node_count(); ++u) {
            if (after[u] < 0) {
                flag("negative load at node " + std::to_string(u), 1u);
            }
        }
    }
    if (checks.fairness && !diffusion) {
        for (const Transfer& d : rep.deals) {
            if (!(before[d.from] > before[d.to])) {
                flag("deal " + std::to_string(d.from) + "->" + std::to_string(d.to) + " not higher-to-lower", 2u);
            }
            if (single) {
                if (!is_fair_transfer(before[d.from], before[d.to], d.amount)) {
                    flag("unfair deal " + std::to_string(d.from) + "->" + std::to_string(d.to), 2u);
                }
                if (after[d.to] > after[d.from]) {
                    flag("receiver " + std::to_string(d.to) + " ended above donor " + std::to_string(d.from), 2u);
                }
            }
        }
    }
    if (checks.conservation && before.sum() != after.sum()) {
        flag("load sum not conserved", 32u);
    }
    if (checks.matching_degree && single) {
        std::vector<int> in(static_cast<std::size_t>(g.node_count()), 0);
        std::vector<int> out(static_cast<std::size_t>(g.node_count()), 0);
        for (const Transfer& d : rep.deals) {
            if (++out[static_cast<std::size_t>(d.from)] > 1) {
                flag("node " + std::to_string(d.from) + " has more than one outgoing deal", 16u);
            }
            if (++in[static_cast<std::size_t>(d.to)] > 1) {
                flag("node " + std::to_string(d.to) + " has more than one incoming deal", 16u);
            }
        }
    }
    if (checks.lemma2 && std::holds_alternative<ContinuousAlgo>(algo) && !rep.lemma_floor_satisfied) {
        flag("potential drop below K^2/2D floor", 4u);
    }
    if (checks.lemma6 && std::holds_alternative<DiscreteAlgo>(algo) && !rep.lemma_floor_satisfied) {
        flag("potential drop below K^2/8D floor", 8u);
    }
    if (multi && !rep.lemma_floor_satisfied) {
        flag("multi-neighbor round potential drop below 2 per unit");
    }
    if (multi) {
        // No node joins the extreme-load sets: when L_min (resp. L_max) is
        // unchanged, its membership can only shrink.
        const Metrics& mb = rep.metrics_before;
        const Metrics& ma = rep.metrics_after;
        for (NodeId u = 0; u < g.node_count(); ++u) {
            if (ma.l_min == mb.l_min && after[u] == ma.l_min && before[u] != mb.l_min) {
                flag("node " + std::to_string(u) + " joined the minimum-load set");
            }
            if (ma.l_max == mb.l_max && after[u] == ma.l_max && before[u] != mb.l_max) {
                flag("node " + std::to_string(u) + " joined the maximum-load set");
            }
        }
    }

    // Algebraic fact behind the budget bound: p(G) >= K^2/2 on every snapshot.
    const Metrics& ma = rep.metrics_after;
    if (ma.potential * 2 < ma.discrepancy * ma.discrepancy) {
        flag("potential fell below discrepancy^2 / 2");
    }

    // On a continuous round with proposals, some node at L_min strictly
    // gains and some node at L_max strictly loses.
    if (std::holds_alternative<ContinuousAlgo>(algo) && !rep.proposals.empty()) {
        bool min_gained = false;
        bool max_lost = false;
        const Metrics& mb = rep.metrics_before;
        for (NodeId u = 0; u < g.node_count(); ++u) {
            if (before[u] == mb.l_min && after[u] > before[u]) min_gained = true;
            if (before[u] == mb.l_max && after[u] < before[u]) max_lost = true;
        }
        if (!min_gained) flag("no L_min node strictly gained");
        if (!max_lost) flag("no L_max node strictly lost");
    }

    std::uint32_t enabled = 0;
    if (checks.monotonic) enabled |= 1u;
    if (checks.fairness && !diffusion) enabled |= 2u;
    if (checks.lemma2 && std::holds_alternative<ContinuousAlgo>(algo)) enabled |= 4u;
    if (checks.lemma6 && std::holds_alternative<DiscreteAlgo>(algo)) enabled |= 8u;
    if (checks.matching_degree && single) enabled |= 16u;
    if (checks.conservation) enabled |= 32u;
    rep.checks_passed = enabled & ~failed;
}

}  // namespace

std::pair<LoadVector, SyncVerdict> run_sync(const Graph& g, LoadVector loads, const SyncAlgo& algo,
                                            const SyncOptions& options) {
    SyncVerdict verdict;
    const Metrics initial = compute_metrics(g, loads);

    if (const auto* cont = std::get_if<ContinuousAlgo>(&algo)) {
        verdict.budget = bound_budget(g.node_count(), g.diameter(), initial.discrepancy, cont->eps,
                                      LoadMode::Continuous);
        if (initial.discrepancy <= cont->eps) {
            verdict.reason = StopReason::EpsBalanced;
            return {std::move(loads), std::move(verdict)};
        }
    } else if (std::holds_alternative<DiscreteAlgo>(algo)) {
        verdict.budget =
            bound_budget(g.node_count(), g.diameter(), initial.discrepancy, Rational(0), LoadMode::Discrete);
        if (is_eps_balanced(g, loads, Rational(1))) {
            verdict.reason = StopReason::FixedPoint;
            return {std::move(loads), std::move(verdict)};
        }
    } else if (std::holds_alternative<MultiAlgo>(algo)) {
        const Rational nk2 = Rational(g.node_count()) * initial.discrepancy * initial.discrepancy;
        verdict.nk2_budget = is_integral(nk2) ? to_int64(nk2) : 0;
        if (is_eps_balanced(g, loads, Rational(1))) {
            verdict.reason = StopReason::FixedPoint;
            return {std::move(loads), std::move(verdict)};
        }
    }

    LoadVector state = std::move(loads);
    for (int round = 1; round <= options.max_rounds; ++round) {
        auto [next, rep] = std::visit(
            [&](const auto& a) -> std::pair<LoadVector, RoundReport> {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, ContinuousAlgo>) {
                    return round_continuous(g, state);
                } else if constexpr (std::is_same_v<T, DiscreteAlgo>) {
                    return round_discrete(g, state);
                } else if constexpr (std::is_same_v<T, MultiAlgo>) {
                    return round_multi(g, state);
                } else {
                    return round_diffusion(g, state, a.alpha);
                }
            },
            algo);
        rep.round_index = round;
        verdict.rounds_used = round;
        verdict.total_deals += static_cast<std::int64_t>(rep.deals.size());

        run_round_checks(g, state, next, rep, algo, options.checks, verdict);
        if (options.observer) {
            options.observer(rep);
        }

        const bool changed = !(next == state);
        state = std::move(next);

        if (const auto* cont = std::get_if<ContinuousAlgo>(&algo)) {
            if (rep.metrics_after.discrepancy <= cont->eps) {
                verdict.reason = StopReason::EpsBalanced;
                break;
            }
            if (rep.proposals.empty()) {
                verdict.reason = StopReason::FixedPoint;
                break;
            }
        } else if (std::holds_alternative<DiscreteAlgo>(algo) || std::holds_alternative<MultiAlgo>(algo)) {
            if (rep.proposals.empty()) {
                verdict.reason = StopReason::FixedPoint;
                break;
            }
        } else {
            if (!changed) {
                verdict.reason = StopReason::FixedPoint;
                break;
            }
        }
        if (round == options.max_rounds) {
            verdict.reason = StopReason::HorizonExceeded;
        }
    }

    if (std::holds_alternative<ContinuousAlgo>(algo)) {
        verdict.within_budget = verdict.reason != StopReason::HorizonExceeded &&
                                verdict.rounds_used <= verdict.budget.continuous_rounds;
    } else if (std::holds_alternative<DiscreteAlgo>(algo)) {
        verdict.within_budget = verdict.reason != StopReason::HorizonExceeded &&
                                verdict.rounds_used <= verdict.budget.discrete_rounds;
    } else if (std::holds_alternative<MultiAlgo>(algo)) {
        verdict.within_budget = verdict.reason != StopReason::HorizonExceeded &&
                                verdict.rounds_used <= verdict.nk2_budget;
    } else {
        verdict.within_budget = true;
    }
    return {std::move(state), std::move(verdict)};
}

std::pair<LoadVector, SyncVerdict> run_sync(const Graph& g, LoadVector loads, const SyncAlgo& algo,
                                            const SyncOptions& options, std::vector<RoundReport>& reports) {
    SyncOptions opts = options;
    auto chained = options.observer;
    opts.observer = [&reports, chained](const RoundReport& rep) {
        reports.push_back(rep);
        if (chained) {
            chained(rep);
        }
    };
    return run_sync(g, std::move(loads), algo, opts);
}

}  // namespace lbsim
