#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lbsim/async_engine.hpp"
#include "lbsim/graph.hpp"

namespace lbsim {

struct DataLinkFrame {
    AsyncMessage payload;  // meaningless when is_ack
    int alt_bit = 0;
    bool is_ack = false;
    bool malformed = false;  // garbage that does not parse at the protocol layer
    bool garbage = false;    // fault-injected; provenance visible to the harness only
};

/// Alternating-bit sender. A payload is shipped in two phases: repeatedly as
/// <m, 0> until 2k+1 ACKs are counted, then as <m, 1> until another 2k+1.
/// Only then is the sender ready for the next payload.
class LinkSender {
public:
    explicit LinkSender(int k) : k_(k) {}

    bool busy() const { return current_.has_value(); }
    void submit(AsyncMessage payload);
    DataLinkFrame transmit() const;  // copy of the current frame; pre: busy
    /// Counts one ACK; returns true when this completes the payload.
    bool on_ack();

    int current_bit() const { return bit_; }
    int ack_count() const { return acks_; }
    const std::optional<AsyncMessage>& current() const { return current_; }

    /// Fault injection.
    void corrupt(AsyncMessage garbage_payload, int bit, int acks);

private:
    int k_;
    std::optional<AsyncMessage> current_;
    int bit_ = 0;
    int acks_ = 0;
};

/// Alternating-bit receiver: ACKs every data frame; while swallowing,
/// discards; otherwise delivers on a 0 -> 1 bit transition and then ignores
/// the next k frames to purge possible corruption.
class LinkReceiver {
public:
    explicit LinkReceiver(int k) : k_(k) {}

    struct Result {
        bool emit_ack = true;
        bool swallowed = false;
        std::optional<AsyncMessage> delivered;
        bool delivered_malformed = false;
    };
    Result on_frame(const DataLinkFrame& frame);

    int last_bit() const { return last_bit_; }
    int swallow_remaining() const { return swallow_; }
    void corrupt(int last_bit, int swallow);

private:
    int k_;
    int last_bit_ = 1;  // first payload's 0-phase arms the transition
    int swallow_ = 0;
};

struct FaultModel {
    std::uint64_t seed = 0;
    int max_garbage_per_channel = 0;  // clamped to k at injection
    bool corrupt_state = false;       // bookkeeping, phases, caches, link states
    bool corrupt_loads = false;
    std::int64_t corrupt_magnitude = 100;  // bound for garbage numeric fields
};

struct StabilizationReport {
    std::int64_t stabilization_step = -1;  // -1 when the run never stabilized
    std::int64_t garbage_free_step = 0;
    std::int64_t all_purged_step = 0;
    std::int64_t last_anomaly_step = -1;
    std::int64_t phantom_deliveries = 0;
    std::int64_t garbage_discarded = 0;
    std::int64_t unexpected_acks = 0;
    std::int64_t watchdog_resets = 0;
    std::int64_t requery_sweeps = 0;
    std::int64_t clamp_absorbed = 0;
    std::int64_t sum_drift = 0;  // final settled sum minus the post-fault sum
    bool suffix_monotonic = false;
    bool suffix_conserved = false;
    bool suffix_deals_gap_ok = false;
    bool suffix_balanced = false;
};

struct StabVerdict {
    bool reached_balance = false;
    bool horizon_exceeded = false;
    std::int64_t steps_used = 0;        // protocol-level steps
    std::int64_t micro_steps = 0;       // frame-level events
    std::int64_t frames_delivered = 0;
    std::int64_t deals = 0;
    std::vector<std::string> violations;  // suffix violations only
    StabilizationReport report;
};

struct StabOptions {
    int k = 3;
    std::int64_t max_steps = 100000;
    CheckSet checks;
    int trace_stride = 0;
    std::function<void(const StepTrace&)> observer;
};

/// The asynchronous node logic with every message routed through the
/// self-stabilizing data link; the fault model is applied at step 0. The
/// protocol-level schedule replicates run_async's decision sequence, so a
/// fault-free run delivers messages in exactly the async order and ends with
/// identical loads. The report pins the stabilization step and the suffix
/// checks start there.
std::pair<LoadVector, StabVerdict> run_selfstab(const Graph& g, const LoadVector& loads,
                                                const FaultModel& faults, const Schedule& schedule,
                                                const StabOptions& options);

}  // namespace lbsim
