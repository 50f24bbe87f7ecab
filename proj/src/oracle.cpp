#include "lbsim/oracle.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <set>
#include <unordered_set>

namespace lbsim {

namespace {

using State = std::vector<std::int64_t>;

// States pack into 8 bits per node; ample for the oracle's tiny-instance
// contract (n <= 5, load sum <= 12).
std::uint64_t pack(const State& s) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        key |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    }
    return key;
}

// Integer-scaled potential: sum_u (n*load(u) - S)^2 keeps the search in
// int64; the true potential is this over n^2.
std::int64_t scaled_potential(const State& s) {
    std::int64_t sum = 0;
    for (auto v : s) sum += v;
    const auto n = static_cast<std::int64_t>(s.size());
    std::int64_t p = 0;
    for (auto v : s) {
        const std::int64_t d = n * v - sum;
        p += d * d;
    }
    return p;
}

bool one_balanced(const Graph& g, const State& s) {
    for (const auto& [u, v] : g.edges()) {
        if (std::llabs(s[static_cast<std::size_t>(u)] - s[static_cast<std::size_t>(v)]) > 1) {
            return false;
        }
    }
    return true;
}

}  // namespace

OracleReport brute_force_reachable_check(const Graph& g, const LoadVector& loads, int horizon,
                                         std::size_t state_cap) {
    if (loads.mode() != LoadMode::Discrete) {
        throw InvalidParameter("oracle works on discrete loads");
    }
    if (g.node_count() > 8) {
        throw InvalidParameter("oracle is meant for tiny instances (n <= 8)");
    }
    const State start = loads.to_ints();
    {
        std::int64_t sum = 0;
        for (auto v : start) sum += v;
        if (sum > 255) {
            throw InvalidParameter("oracle load sum too large");
        }
    }
    const auto n = static_cast<std::int64_t>(g.node_count());
    const Rational n2(static_cast<long>(n * n));

    std::unordered_set<std::uint64_t> seen{pack(start)};
    seen.reserve(4096);
    std::deque<std::pair<State, int>> frontier{{start, 0}};

    std::int64_t best_scaled = scaled_potential(start);
    std::set<std::int64_t> balanced_scaled;
    if (one_balanced(g, start)) {
        balanced_scaled.insert(best_scaled);
    }

    while (!frontier.empty()) {
        auto [state, depth] = std::move(frontier.front());
        frontier.pop_front();
        if (horizon >= 0 && depth >= horizon) {
            continue;
        }
        for (const auto& [a, b] : g.edges()) {
            for (int dir = 0; dir < 2; ++dir) {
                const auto u = static_cast<std::size_t>(dir == 0 ? a : b);
                const auto v = static_cast<std::size_t>(dir == 0 ? b : a);
                const std::int64_t gap = state[u] - state[v];
                for (std::int64_t amount = 1; 2 * amount <= gap; ++amount) {
                    State next = state;
                    next[u] -= amount;
                    next[v] += amount;
                    if (!seen.insert(pack(next)).second) {
                        continue;
                    }
                    if (seen.size() > state_cap) {
                        throw BudgetExceeded("oracle state space exceeds cap");
                    }
                    const std::int64_t p = scaled_potential(next);
                    best_scaled = std::min(best_scaled, p);
                    if (one_balanced(g, next)) {
                        balanced_scaled.insert(p);
                    }
                    frontier.emplace_back(std::move(next), depth + 1);
                }
            }
        }
    }

    OracleReport rep;
    rep.states_explored = seen.size();
    rep.min_potential = Rational(static_cast<long>(best_scaled)) / n2;
    rep.one_balanced_reachable = !balanced_scaled.empty();
    for (std::int64_t p : balanced_scaled) {
        rep.one_balanced_potentials.push_back(Rational(static_cast<long>(p)) / n2);
    }
    return rep;
}

}  // namespace lbsim
