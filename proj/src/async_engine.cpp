#include "lbsim/async_engine.hpp"

#include <algorithm>
#include <deque>

#include "lbsim/async_protocol.hpp"
#include "lbsim/detail/scheduler.hpp"

namespace lbsim {

namespace {

struct Channel {
    std::deque<std::pair<AsyncMessage, std::int64_t>> queue;  // message, enqueue step
    std::int64_t next_seq = 0;
    std::int64_t expect_seq = 0;
};

struct DirectedEdges {
    std::vector<std::pair<NodeId, NodeId>> list;
    std::vector<std::vector<int>> index;  // src x dst -> edge id, -1

    explicit DirectedEdges(const Graph& g) {
        const auto n = static_cast<std::size_t>(g.node_count());
        index.assign(n, std::vector<int>(n, -1));
        for (NodeId u = 0; u < g.node_count(); ++u) {
            for (NodeId v : g.neighbors(u)) {
                index[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = static_cast<int>(list.size());
                list.emplace_back(u, v);
            }
        }
    }
};

}  // namespace

std::pair<LoadVector, AsyncVerdict> run_async(const Graph& g, const LoadVector& loads,
                                              const Schedule& schedule, const AsyncOptions& options) {
    if (loads.mode() != LoadMode::Discrete) {
        throw InvalidParameter("async engine runs on discrete loads");
    }
    AsyncVerdict verdict;
    const Metrics m0 = compute_metrics(g, loads);
    const std::int64_t k0 = to_int64(m0.discrepancy);
    verdict.deal_budget = static_cast<std::int64_t>(g.node_count()) * k0 * k0;

    const std::vector<std::int64_t> initial = loads.to_ints();
    std::int64_t initial_sum = 0;
    for (auto v : initial) initial_sum += v;

    AsyncProtocol proto(g, initial, /*clamp_negative_fold=*/false);
    DirectedEdges edges(g);
    std::vector<Channel> channels(edges.list.size());
    detail::WorkScheduler scheduler(schedule);

    std::int64_t step = 0;
    std::int64_t total_queued = 0;
    std::vector<std::int64_t> inflight_ack(static_cast<std::size_t>(g.node_count()), 0);

    std::uint32_t window_failed = 0;
    auto flag = [&](const std::string& what, std::uint32_t bit = 0) {
        window_failed |= bit;
        verdict.violations.push_back("step " + std::to_string(step) + ": " + what);
        if (verdict.first_violation_step < 0) {
            verdict.first_violation_step = step;
        }
    };

    std::vector<Transfer> window_transfers;
    proto.events.on_deal = [&](NodeId q, NodeId p, std::int64_t amount, std::int64_t tentative,
                               std::int64_t tload_before) {
        verdict.deals += 1;
        window_transfers.push_back({q, p, Rational(static_cast<long>(amount))});
        if (options.checks.fairness && !(tentative > tload_before)) {
            flag("deal " + std::to_string(q) + "->" + std::to_string(p) + " accepted without a positive gap", 2u);
        }
    };
    proto.events.on_unexpected_ack = [&](NodeId p, const AsyncMessage& msg) {
        flag("unexpected ack at node " + std::to_string(p) + " from " + std::to_string(msg.src));
    };

    auto enqueue = [&](AsyncMessage msg) {
        const int e = edges.index[static_cast<std::size_t>(msg.src)][static_cast<std::size_t>(msg.dst)];
        if (e < 0) {
            flag("message between non-adjacent nodes");
            return;
        }
        auto& ch = channels[static_cast<std::size_t>(e)];
        msg.seq = ch.next_seq++;
        if (msg.kind == MsgKind::AckMsg && msg.amount > 0) {
            inflight_ack[static_cast<std::size_t>(msg.dst)] += msg.amount;
        }
        ch.queue.emplace_back(msg, step);
        total_queued += 1;
    };

    std::vector<AsyncMessage> out;
    proto.start(out);
    for (auto& m : out) enqueue(m);
    out.clear();

    auto settled_loads = [&]() {
        std::vector<std::int64_t> s = proto.effective_loads();
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] -= inflight_ack[i];
        }
        return s;
    };

    std::int64_t prev_max = to_int64(m0.l_max);
    std::int64_t prev_min = to_int64(m0.l_min);

    std::uint32_t enabled_mask = 0;
    if (options.checks.monotonic) enabled_mask |= 1u;
    if (options.checks.fairness) enabled_mask |= 2u;
    if (options.checks.conservation) enabled_mask |= 32u;
    auto emit_trace = [&]() {
        if (options.observer) {
            StepTrace t;
            t.step = step;
            t.metrics = compute_metrics(g, LoadVector::discrete(settled_loads()));
            t.deals = verdict.deals;
            t.messages_delivered = verdict.messages_delivered;
            t.transfers = std::move(window_transfers);
            t.checks_passed = enabled_mask & ~window_failed;
            options.observer(t);
        }
        window_transfers.clear();
        window_failed = 0;
    };

    bool traced_this_step = false;
    while (true) {
        if (total_queued == 0) {
            const auto settled = settled_loads();
            const bool balanced = is_eps_balanced(g, LoadVector::discrete(settled), Rational(1));
            if (proto.quiescent() && balanced) {
                verdict.reached_balance = true;
            } else {
                // Fair schedules always deliver everything, so an empty
                // system that is not balanced-and-idle is a liveness bug.
                flag(proto.quiescent() ? "quiescent but not 1-Balanced" : "no messages left while nodes wait");
            }
            break;
        }
        if (step >= options.max_steps) {
            verdict.horizon_exceeded = true;
            break;
        }

        // One atomic step: deliver one message, run its handler.
        std::vector<std::size_t> candidates;
        std::vector<std::int64_t> head_steps;
        std::vector<std::size_t> sizes;
        for (std::size_t e = 0; e < channels.size(); ++e) {
            if (!channels[e].queue.empty()) {
                candidates.push_back(e);
                head_steps.push_back(channels[e].queue.front().second);
                sizes.push_back(channels[e].queue.size());
            }
        }
        const std::int64_t age_cap = static_cast<std::int64_t>(g.node_count()) * total_queued;
        const std::size_t pick = scheduler.pick(candidates, head_steps, sizes, step, age_cap);
        auto& ch = channels[candidates[pick]];
        const AsyncMessage msg = ch.queue.front().first;
        ch.queue.pop_front();
        total_queued -= 1;
        step += 1;
        verdict.messages_delivered += 1;

        if (msg.seq != ch.expect_seq) {
            flag("FIFO order broken on edge " + std::to_string(msg.src) + "->" + std::to_string(msg.dst));
        }
        ch.expect_seq = msg.seq + 1;
        if (msg.kind == MsgKind::AckMsg && msg.amount > 0) {
            inflight_ack[static_cast<std::size_t>(msg.dst)] -= msg.amount;
        }

        proto.deliver(msg, out);
        for (auto& m : out) enqueue(m);
        out.clear();

        const auto settled = settled_loads();
        std::int64_t sum = 0;
        std::int64_t cur_max = settled[0];
        std::int64_t cur_min = settled[0];
        for (auto v : settled) {
            sum += v;
            cur_max = std::max(cur_max, v);
            cur_min = std::min(cur_min, v);
        }
        if (options.checks.conservation && sum != initial_sum) {
            flag("settled load sum drifted: " + std::to_string(sum) + " vs " + std::to_string(initial_sum), 32u);
        }
        if (options.checks.monotonic) {
            if (cur_max > prev_max) {
                flag("settled L_max increased", 1u);
            }
            if (cur_min < prev_min) {
                flag("settled L_min decreased", 1u);
            }
            if (cur_min < 0) {
                flag("negative settled load", 1u);
            }
        }
        prev_max = cur_max;
        prev_min = cur_min;

        traced_this_step = false;
        if (options.trace_stride > 0 && step % options.trace_stride == 0) {
            emit_trace();
            traced_this_step = true;
        }
    }
    verdict.steps_used = step;
    if (!traced_this_step && options.trace_stride > 0) {
        emit_trace();
    }
    verdict.within_deal_budget = verdict.deals <= verdict.deal_budget;

    const auto settled = settled_loads();
    std::vector<Rational> final_vals;
    final_vals.reserve(settled.size());
    for (auto v : settled) {
        final_vals.emplace_back(static_cast<long>(v));
    }
    return {LoadVector(LoadMode::Discrete, std::move(final_vals)), std::move(verdict)};
}

}  // namespace lbsim
