#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "lbsim/graph.hpp"
#include "lbsim/metrics.hpp"

namespace lbsim {

struct Proposal {
    NodeId from;
    NodeId to;
    Rational amount;                            // > 0
    std::optional<std::int64_t> tentative_load;  // multi-neighbor mode only
};

struct RoundReport {
    int round_index = 0;
    std::vector<Proposal> proposals;
    std::vector<Transfer> deals;  // accepted (from, to, amount)
    Metrics metrics_before;
    Metrics metrics_after;
    // True when the applicable per-round potential floor held (K^2/2D in
    // continuous mode, K^2/8D in discrete mode while K >= 2D); true when no
    // floor applies to the mode/round.
    bool lemma_floor_satisfied = true;
    // Enabled checks that passed this round; bit order matches CheckSet
    // (monotonic, fairness, lemma2, lemma6, matching_degree, conservation).
    std::uint32_t checks_passed = 0x3f;
};

/// Neighbors of a node split by strict load comparison, both sorted by id.
struct NeighborhoodSets {
    std::vector<NodeId> v_less;
    std::vector<NodeId> v_more;
};

NeighborhoodSets neighborhood_sets(const Graph& g, const LoadVector& loads, NodeId u);

/// One three-phase round of the continuous single-proposal algorithm.
/// Ties break to the lowest node id everywhere.
std::pair<LoadVector, RoundReport> round_continuous(const Graph& g, const LoadVector& loads);

/// Discrete single-proposal round: a node proposes only on a gap >= 2,
/// amount floor(gap/2), to the first-in-order neighbor of maximal gap.
std::pair<LoadVector, RoundReport> round_discrete(const Graph& g, const LoadVector& loads);

struct WaterfillPlan {
    std::vector<std::int64_t> proposals;  // aligned with the input order
    std::int64_t tentative_load = 0;
};

/// Unit-decrement water-filling over the strictly smaller loaded neighbors,
/// sorted non-decreasing by load. Executes the planning loop literally:
/// while the cursor neighbor is at least two units below the tentative load
/// (counting already planned units), move one unit and advance the cursor to
/// the next neighbor only while the current one planned strictly above it.
/// Post-exit, no neighbor satisfies the loop condition (asserted).
WaterfillPlan plan_waterfill(std::int64_t p_load, const std::vector<std::int64_t>& v_less_loads);

/// Multi-neighbor round: every node with a nonempty V_less plans by
/// water-filling and sends (prop, tentative) per neighbor; receivers accept
/// units round-robin across proposers ordered by tentative load descending,
/// never rising to or above a donor's tentative; donors are debited by what
/// was accepted. Loads update atomically at round end.
std::pair<LoadVector, RoundReport> round_multi(const Graph& g, const LoadVector& loads);

/// Naive diffusion baseline: each node sends alpha*load/deg to every
/// neighbor simultaneously. Not monotonic; kept as the negative control.
std::pair<LoadVector, RoundReport> round_diffusion(const Graph& g, const LoadVector& loads,
                                                   const Rational& alpha);

struct ContinuousAlgo {
    Rational eps;
};
struct DiscreteAlgo {};
struct MultiAlgo {};
struct DiffusionAlgo {
    Rational alpha;
};
using SyncAlgo = std::variant<ContinuousAlgo, DiscreteAlgo, MultiAlgo, DiffusionAlgo>;

enum class StopReason { EpsBalanced, FixedPoint, HorizonExceeded };

struct SyncVerdict {
    StopReason reason = StopReason::HorizonExceeded;
    int rounds_used = 0;
    std::int64_t total_deals = 0;
    BoundBudget budget;           // from the initial state
    std::int64_t nk2_budget = 0;  // multi-neighbor comparison figure, n * K^2
    bool within_budget = true;
    std::vector<std::string> violations;  // "round N: ..." for enabled checks
    int first_violation_round = -1;
};

struct SyncOptions {
    int max_rounds = 1000;
    CheckSet checks;
    std::function<void(const RoundReport&)> observer;  // optional streaming sink
};

/// Iterates rounds until the termination predicate (continuous: global
/// discrepancy <= eps, a simulator-level stopping rule; discrete/multi:
/// fixed point, i.e. a round with no proposals; diffusion: unchanged state)
/// or max_rounds. Violations of enabled checks are recorded, not thrown.
std::pair<LoadVector, SyncVerdict> run_sync(const Graph& g, LoadVector loads, const SyncAlgo& algo,
                                            const SyncOptions& options);

/// Convenience overload collecting every RoundReport.
std::pair<LoadVector, SyncVerdict> run_sync(const Graph& g, LoadVector loads, const SyncAlgo& algo,
                                            const SyncOptions& options, std::vector<RoundReport>& reports);

}  // namespace lbsim
