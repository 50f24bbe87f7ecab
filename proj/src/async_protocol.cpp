#include "lbsim/async_protocol.hpp"

#include <algorithm>

namespace lbsim {

std::vector<std::int64_t> rr_proposal(std::int64_t load_to_transfer,
                                      const std::vector<std::pair<NodeId, std::int64_t>>& pv_less,
                                      std::int64_t tentative_load) {
    const std::size_t m = pv_less.size();
    std::vector<std::int64_t> amounts(m, 0);
    if (m == 0 || load_to_transfer <= 0) {
        return amounts;
    }
    std::vector<std::size_t> active(m);
    for (std::size_t i = 0; i < m; ++i) active[i] = i;
    // Ascending node id; pv_less is expected in that order already.
    std::sort(active.begin(), active.end(),
              [&](std::size_t a, std::size_t b) { return pv_less[a].first < pv_less[b].first; });

    std::int64_t left = load_to_transfer;
    auto planned = [&](std::size_t i) { return pv_less[i].second + amounts[i]; };

    while (!active.empty() && left > 0) {
        std::int64_t max_planned = planned(active[0]);
        for (std::size_t i : active) {
            max_planned = std::max(max_planned, planned(i));
        }
        const std::int64_t inc = tentative_load - max_planned;
        if (inc > 0 && inc * static_cast<std::int64_t>(active.size()) <= left) {
            for (std::size_t i : active) {
                amounts[i] += inc;
                left -= inc;
            }
            std::erase_if(active, [&](std::size_t i) { return planned(i) >= tentative_load; });
        } else {
            // One unit per visit, ascending id, starting from the lowest
            // loaded member (ties by id).
            std::size_t start = 0;
            for (std::size_t k = 1; k < active.size(); ++k) {
                if (planned(active[k]) < planned(active[start])) {
                    start = k;
                }
            }
            std::size_t cursor = start;
            while (left > 0 && !active.empty()) {
                const std::size_t i = active[cursor];
                if (planned(i) < tentative_load) {
                    amounts[i] += 1;
                    left -= 1;
                    if (planned(i) >= tentative_load) {
                        active.erase(active.begin() + static_cast<std::ptrdiff_t>(cursor));
                        if (active.empty()) break;
                        cursor = cursor % active.size();
                        continue;
                    }
                    cursor = (cursor + 1) % active.size();
                } else {
                    active.erase(active.begin() + static_cast<std::ptrdiff_t>(cursor));
                    if (active.empty()) break;
                    cursor = cursor % active.size();
                }
            }
            break;
        }
    }
    return amounts;
}

CyclePlan plan_cycle(std::int64_t t_load, const std::vector<std::pair<NodeId, std::int64_t>>& cached_v_less) {
    CyclePlan plan;
    plan.tentative_load = t_load;
    if (cached_v_less.empty()) {
        return plan;
    }
    plan.min_load = cached_v_less[0].second;
    for (const auto& [q, l] : cached_v_less) {
        plan.min_load = std::min(plan.min_load, l);
    }
    plan.load_to_transfer = (t_load - plan.min_load) / 2;
    plan.tentative_load = t_load - plan.load_to_transfer;
    for (const auto& [q, l] : cached_v_less) {
        if (l < plan.tentative_load) {
            plan.pv_less.emplace_back(q, l);
        }
    }
    plan.amounts = rr_proposal(plan.load_to_transfer, plan.pv_less, plan.tentative_load);
    return plan;
}

AsyncProtocol::AsyncProtocol(const Graph& g, std::vector<std::int64_t> loads, bool clamp_negative_fold)
    : g_(&g), clamp_(clamp_negative_fold) {
    const auto n = static_cast<std::size_t>(g.node_count());
    nodes_.resize(n);
    slot_.assign(n, std::vector<int>(n, -1));
    purged_.assign(n, false);
    for (NodeId u = 0; u < g.node_count(); ++u) {
        auto& st = nodes_[static_cast<std::size_t>(u)];
        st.load = loads[static_cast<std::size_t>(u)];
        st.t_load = st.load;
        st.cached_load.assign(g.neighbors(u).size(), -1);
        const auto& nbrs = g.neighbors(u);
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            slot_[static_cast<std::size_t>(u)][static_cast<std::size_t>(nbrs[i])] = static_cast<int>(i);
        }
    }
}

void AsyncProtocol::start(std::vector<AsyncMessage>& out) {
    for (NodeId u = 0; u < g_->node_count(); ++u) {
        issue_queries(u, out);
    }
}

void AsyncProtocol::issue_queries(NodeId u, std::vector<AsyncMessage>& out) {
    auto& st = nodes_[static_cast<std::size_t>(u)];
    st.replies_pending = g_->degree(u);
    st.needs_requery = false;
    for (NodeId v : g_->neighbors(u)) {
        AsyncMessage q;
        q.kind = MsgKind::LoadQuery;
        q.src = u;
        q.dst = v;
        q.load = st.effective();  // queries double as load reports
        out.push_back(q);
    }
}

bool AsyncProtocol::set_cache(NodeId u, NodeId neighbor, std::int64_t value) {
    const int s = slot_[static_cast<std::size_t>(u)][static_cast<std::size_t>(neighbor)];
    if (s < 0) {
        return false;  // not adjacent; garbage routing, ignore
    }
    auto& cell = nodes_[static_cast<std::size_t>(u)].cached_load[static_cast<std::size_t>(s)];
    if (cell == value) {
        return false;
    }
    cell = value;
    return true;
}

void AsyncProtocol::wake_if_dormant(NodeId u, std::vector<AsyncMessage>& out) {
    auto& st = nodes_[static_cast<std::size_t>(u)];
    st.needs_requery = true;
    if (st.phase == NodePhase::Idle && st.replies_pending == 0) {
        issue_queries(u, out);
    }
}

void AsyncProtocol::start_cycle(NodeId u, std::vector<AsyncMessage>& out) {
    auto& st = nodes_[static_cast<std::size_t>(u)];
    st.pending_acks.clear();
    // Fold the previous cycle's bookkeeping into the committed load.
    std::int64_t folded = st.load + st.last_received - st.last_gave;
    if (folded < 0) {
        if (clamp_ && events.on_clamp) {
            events.on_clamp(u, -folded);
        }
        folded = clamp_ ? 0 : folded;
    }
    st.load = folded;
    st.last_received = 0;
    st.last_gave = 0;
    st.t_load = st.load;
    purged_[static_cast<std::size_t>(u)] = true;

    std::vector<std::pair<NodeId, std::int64_t>> v_less;
    const auto& nbrs = g_->neighbors(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
        const std::int64_t cached = st.cached_load[i];
        if (cached >= 0 && cached < st.t_load) {
            v_less.emplace_back(nbrs[i], cached);
        }
    }
    st.proposals_this_cycle = false;
    if (!v_less.empty()) {
        const CyclePlan plan = plan_cycle(st.t_load, v_less);
        for (std::size_t i = 0; i < plan.pv_less.size(); ++i) {
            if (plan.amounts[i] <= 0) {
                continue;  // zero-amount proposals are never sent
            }
            AsyncMessage p;
            p.kind = MsgKind::Proposal;
            p.src = u;
            p.dst = plan.pv_less[i].first;
            p.amount = plan.amounts[i];
            p.tentative = plan.tentative_load;
            out.push_back(p);
            st.pending_acks.insert(p.dst);
        }
    }
    if (st.pending_acks.empty()) {
        complete_cycle(u, out);
    } else {
        st.proposals_this_cycle = true;
        st.phase = NodePhase::AwaitingAcks;
    }
}

void AsyncProtocol::complete_cycle(NodeId u, std::vector<AsyncMessage>& out) {
    auto& st = nodes_[static_cast<std::size_t>(u)];
    st.phase = NodePhase::Idle;
    if (st.proposals_this_cycle || st.needs_requery) {
        st.proposals_this_cycle = false;
        issue_queries(u, out);  // loads moved; re-read the neighborhood
    }
    // A cycle that proposed nothing and saw no change leaves the node
    // dormant; this is what makes quiescence reachable.
}

void AsyncProtocol::deliver(const AsyncMessage& msg, std::vector<AsyncMessage>& out) {
    const NodeId u = msg.dst;
    auto& st = nodes_[static_cast<std::size_t>(u)];
    switch (msg.kind) {
        case MsgKind::LoadQuery: {
            AsyncMessage reply;
            reply.kind = MsgKind::LoadReply;
            reply.src = u;
            reply.dst = msg.src;
            reply.load = st.effective();
            out.push_back(reply);
            if (set_cache(u, msg.src, msg.load)) {
                wake_if_dormant(u, out);
            }
            break;
        }
        case MsgKind::LoadReply: {
            const bool changed = set_cache(u, msg.src, msg.load);
            if (st.replies_pending > 0) {
                st.replies_pending -= 1;
                if (st.replies_pending == 0 && st.phase == NodePhase::Idle) {
                    start_cycle(u, out);
                }
            } else if (changed) {
                wake_if_dormant(u, out);  // unsolicited (possible under faults)
            }
            break;
        }
        case MsgKind::Proposal: {
            const std::int64_t gap = msg.tentative - st.t_load;
            std::int64_t deal = std::min(gap, msg.amount);
            if (deal < 0) {
                deal = 0;
            }
            AsyncMessage ack;
            ack.kind = MsgKind::AckMsg;
            ack.src = u;
            ack.dst = msg.src;
            ack.amount = deal;
            out.push_back(ack);
            if (deal > 0) {
                const std::int64_t before = st.t_load;
                st.last_received += deal;
                st.t_load += deal;
                if (events.on_deal) {
                    events.on_deal(msg.src, u, deal, msg.tentative, before);
                }
                wake_if_dormant(u, out);
            }
            break;
        }
        case MsgKind::AckMsg: {
            if (st.pending_acks.erase(msg.src) == 0) {
                if (events.on_unexpected_ack) {
                    events.on_unexpected_ack(u, msg);
                }
                break;
            }
            st.last_gave += std::max<std::int64_t>(0, msg.amount);
            if (st.pending_acks.empty()) {
                complete_cycle(u, out);
            }
            break;
        }
    }
}

bool AsyncProtocol::awaiting_something(NodeId u) const {
    const auto& st = nodes_[static_cast<std::size_t>(u)];
    return st.phase == NodePhase::AwaitingAcks || st.replies_pending > 0;
}

bool AsyncProtocol::quiescent() const {
    for (NodeId u = 0; u < g_->node_count(); ++u) {
        if (awaiting_something(u)) {
            return false;
        }
    }
    return true;
}

std::vector<std::int64_t> AsyncProtocol::effective_loads() const {
    std::vector<std::int64_t> out;
    out.reserve(nodes_.size());
    for (const auto& st : nodes_) {
        out.push_back(st.effective());
    }
    return out;
}

void AsyncProtocol::force_cycle_reset(NodeId u, std::vector<AsyncMessage>& out) {
    auto& st = nodes_[static_cast<std::size_t>(u)];
    st.pending_acks.clear();
    st.phase = NodePhase::Idle;
    st.replies_pending = 0;
    st.proposals_this_cycle = false;
    std::int64_t folded = st.load + st.last_received - st.last_gave;
    if (folded < 0) {
        if (clamp_ && events.on_clamp) {
            events.on_clamp(u, -folded);
        }
        folded = clamp_ ? 0 : folded;
    }
    st.load = folded;
    st.last_received = 0;
    st.last_gave = 0;
    st.t_load = st.load;
    purged_[static_cast<std::size_t>(u)] = true;
    issue_queries(u, out);
}

void AsyncProtocol::clear_purged() { purged_.assign(purged_.size(), false); }

}  // namespace lbsim
