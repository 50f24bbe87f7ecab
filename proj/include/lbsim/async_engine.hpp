#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "lbsim/graph.hpp"
#include "lbsim/metrics.hpp"

namespace lbsim {

enum class MsgKind { LoadQuery, LoadReply, Proposal, AckMsg };

struct AsyncMessage {
    MsgKind kind = MsgKind::LoadQuery;
    NodeId src = 0;
    NodeId dst = 0;
    std::int64_t seq = 0;        // per directed edge send order
    std::int64_t load = 0;       // LoadReply value; queries piggyback the sender's TLoad
    std::int64_t amount = 0;     // Proposal amount / AckMsg deal
    std::int64_t tentative = 0;  // Proposal tentative load
};

enum class NodePhase { Idle, AwaitingAcks };

struct AsyncNodeState {
    std::int64_t load = 0;
    std::int64_t t_load = 0;
    std::int64_t last_received = 0;
    std::int64_t last_gave = 0;
    NodePhase phase = NodePhase::Idle;
    std::set<NodeId> pending_acks;
    std::vector<std::int64_t> cached_load;   // per neighbor slot, -1 = unknown
    int replies_pending = 0;                 // outstanding LoadReplies of the current query round
    bool proposals_this_cycle = false;
    // Set by any local change (deal accepted, cache moved) that neighbors
    // have not been told about; forces one more read before going dormant.
    bool needs_requery = false;
    std::int64_t effective() const { return load + last_received - last_gave; }
};

/// Round-robin proposal split across the lower-loaded peers. While budget and
/// members remain: if raising every member by (tentative - max) fits the
/// remaining budget, do so and drop members that reach the tentative load;
/// otherwise hand out the budget one unit at a time in ascending-id cycles
/// starting from the lowest-loaded member. Returned amounts align with
/// pv_less and sum to at most load_to_transfer.
std::vector<std::int64_t> rr_proposal(std::int64_t load_to_transfer,
                                      const std::vector<std::pair<NodeId, std::int64_t>>& pv_less,
                                      std::int64_t tentative_load);

/// The computational core of a cycle start, on cached neighbor loads.
struct CyclePlan {
    std::int64_t min_load = 0;
    std::int64_t load_to_transfer = 0;
    std::int64_t tentative_load = 0;
    std::vector<std::pair<NodeId, std::int64_t>> pv_less;  // (neighbor, cached load)
    std::vector<std::int64_t> amounts;                     // aligned with pv_less
};
CyclePlan plan_cycle(std::int64_t t_load, const std::vector<std::pair<NodeId, std::int64_t>>& cached_v_less);

enum class SchedulePolicy { RoundRobinFair, RandomFair, AdversarialLongestQueue };

struct Schedule {
    SchedulePolicy policy = SchedulePolicy::RoundRobinFair;
    std::uint64_t seed = 0;
};

struct StepTrace {
    std::int64_t step = 0;
    Metrics metrics;  // on settled loads
    std::int64_t deals = 0;
    std::int64_t messages_delivered = 0;
    std::vector<Transfer> transfers;     // deals since the previous trace row
    std::uint32_t checks_passed = 0x3f;  // since the previous trace row
};

struct AsyncVerdict {
    bool reached_balance = false;
    bool horizon_exceeded = false;
    std::int64_t steps_used = 0;
    std::int64_t messages_delivered = 0;
    std::int64_t deals = 0;
    std::int64_t deal_budget = 0;  // n * K^2 from the initial state
    bool within_deal_budget = true;
    std::vector<std::string> violations;
    std::int64_t first_violation_step = -1;
};

struct AsyncOptions {
    std::int64_t max_steps = 100000;
    CheckSet checks;
    int trace_stride = 0;  // 0 = no per-step traces
    std::function<void(const StepTrace&)> observer;
};

/// Discrete-event interleaving of the asynchronous protocol: one atomic
/// step delivers one
/// message and runs its handler. Per-step invariants (conservation, L_max /
/// L_min monotonicity) are asserted on settled loads: effective loads with
/// in-flight Ack deal amounts already debited from their donors, which is
/// the only reading under which they hold at every step. Terminates when the
/// state is 1-Balanced, all channels are empty and every node is idle.
std::pair<LoadVector, AsyncVerdict> run_async(const Graph& g, const LoadVector& loads,
                                              const Schedule& schedule, const AsyncOptions& options);

}  // namespace lbsim
