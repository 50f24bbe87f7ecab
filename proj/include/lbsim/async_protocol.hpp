#pragma once

#include <functional>
#include <vector>

#include "lbsim/async_engine.hpp"
#include "lbsim/graph.hpp"

namespace lbsim {

/// Transport-agnostic node logic of the asynchronous algorithm. The engines
/// own delivery order and message queues; handlers here collect outgoing
/// messages into a sink and never inspect global state. The self-stabilizing
/// executor reuses this core verbatim behind its data link.
class AsyncProtocol {
public:
    struct Events {
        /// Deal accepted at receiver p from donor q, amount > 0.
        std::function<void(NodeId q, NodeId p, std::int64_t amount, std::int64_t tentative_q,
                           std::int64_t tload_p_before)>
            on_deal;
        std::function<void(NodeId p, const AsyncMessage& msg)> on_unexpected_ack;
        /// A fold would have gone negative and was clamped (selfstab only).
        std::function<void(NodeId p, std::int64_t absorbed)> on_clamp;
    };

    AsyncProtocol(const Graph& g, std::vector<std::int64_t> loads, bool clamp_negative_fold);

    /// Initial query round for every node.
    void start(std::vector<AsyncMessage>& out);
    void deliver(const AsyncMessage& msg, std::vector<AsyncMessage>& out);

    const Graph& graph() const { return *g_; }
    const AsyncNodeState& node(NodeId u) const { return nodes_[static_cast<std::size_t>(u)]; }
    AsyncNodeState& mutable_node(NodeId u) { return nodes_[static_cast<std::size_t>(u)]; }

    bool quiescent() const;  // every node idle with no outstanding query round
    bool awaiting_something(NodeId u) const;
    std::vector<std::int64_t> effective_loads() const;

    /// Watchdog escape hatch for corrupted await states: abandon the cycle
    /// and re-read the neighborhood. Never needed on fault-free executions.
    void force_cycle_reset(NodeId u, std::vector<AsyncMessage>& out);
    /// True once u has folded (or been reset) since construction/fault.
    bool bookkeeping_purged(NodeId u) const { return purged_[static_cast<std::size_t>(u)]; }
    void clear_purged();

    Events events;

private:
    void issue_queries(NodeId u, std::vector<AsyncMessage>& out);
    void start_cycle(NodeId u, std::vector<AsyncMessage>& out);
    void complete_cycle(NodeId u, std::vector<AsyncMessage>& out);
    /// Returns true when the cached value changed.
    bool set_cache(NodeId u, NodeId neighbor, std::int64_t value);
    void wake_if_dormant(NodeId u, std::vector<AsyncMessage>& out);

    const Graph* g_;
    bool clamp_;
    std::vector<AsyncNodeState> nodes_;
    std::vector<std::vector<int>> slot_;  // node x node -> neighbor slot, -1
    std::vector<bool> purged_;
};

}  // namespace lbsim
