#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lbsim/graph.hpp"
#include "lbsim/rational.hpp"

namespace lbsim {

/// Global snapshot metrics, all exact.
struct Metrics {
    Rational l_max;
    Rational l_min;
    Rational l_avg;           // rational even in discrete mode
    Rational discrepancy;     // l_max - l_min
    Rational potential;       // sum_u (load(u) - l_avg)^2
    Rational max_local_diff;  // max over edges |load(u) - load(v)|
};

Metrics compute_metrics(const Graph& g, const LoadVector& loads);

/// True iff every edge's endpoint load difference is at most eps.
bool is_eps_balanced(const Graph& g, const LoadVector& loads, const Rational& eps);

/// Fair transfer: moving `amount` from u to v with load_u - load_v >= 2*amount.
bool is_fair_transfer(const Rational& load_u, const Rational& load_v, const Rational& amount);

struct Transfer {
    NodeId from;
    NodeId to;
    Rational amount;
};

/// Per-transfer rule applied by check_monotonic_step. Single-proposal rounds
/// satisfy the full fairness inequality per deal; multi-neighbor and async
/// deals are aggregates and only guarantee higher-to-lower.
enum class TransferRule { FairPairwise, HigherToLower, Unchecked };

struct CheckResult {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Validates one reported round/step: every transfer higher-to-lower (plus
/// fairness under FairPairwise), L_max non-increasing, L_min non-decreasing,
/// sum conserved exactly, no negative loads. Never throws.
CheckResult check_monotonic_step(const Graph& g, const LoadVector& before, const LoadVector& after,
                                 const std::vector<Transfer>& transfers, TransferRule rule);

/// Worst-case round budgets for the continuous and discrete engines.
struct BoundBudget {
    std::int64_t continuous_rounds = 0;  // ceil((6n+3) * D * ln(ceil(n K^2 / (eps^2/2))))
    std::int64_t discrete_rounds = 0;    // ceil((24n+3) * D * ln(ceil(n K^2 / (2 D^2)))) + 6 n D^2
};

/// K = 0 yields zero budgets. eps is required positive in continuous mode and
/// ignored otherwise. The natural log is evaluated in extended precision and
/// rounded up before the outer ceiling so the budget is never falsely tight.
BoundBudget bound_budget(NodeId n, int diameter, const Rational& k, const Rational& eps, LoadMode mode);

/// Lemma floors, quantified over the round-start discrepancy.
Rational lemma2_floor(const Rational& k, int diameter);  // K^2 / (2D)
Rational lemma6_floor(const Rational& k, int diameter);  // K^2 / (8D)

/// Which invariants an engine run records violations for.
struct CheckSet {
    bool monotonic = false;
    bool fairness = false;
    bool lemma2 = false;
    bool lemma6 = false;
    bool matching_degree = false;
    bool conservation = false;
};

}  // namespace lbsim
