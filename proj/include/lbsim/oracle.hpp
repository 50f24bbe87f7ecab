#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lbsim/graph.hpp"
#include "lbsim/metrics.hpp"

namespace lbsim {

struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OracleReport {
    Rational min_potential;                     // over all reachable states
    bool one_balanced_reachable = false;
    std::vector<Rational> one_balanced_potentials;  // sorted, unique
    std::size_t states_explored = 0;
};

/// Exhaustive enumeration over sequences of single fair transfers (any
/// positive amount per move). horizon >= 0 bounds the number of transfers;
/// horizon < 0 computes the full reachability closure, which is finite since
/// every fair transfer strictly decreases the potential. Intended for tiny
/// discrete instances (n <= 5, load sum <= 12); guarded by state_cap.
OracleReport brute_force_reachable_check(const Graph& g, const LoadVector& loads, int horizon,
                                         std::size_t state_cap = 2'000'000);

}  // namespace lbsim
