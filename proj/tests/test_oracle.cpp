#include <doctest.h>

#include "lbsim/oracle.hpp"

using namespace lbsim;

TEST_CASE("oracle: triangle [3,0,0] reaches a 1-balanced state within 2 transfers") {
    Graph g = Graph::from_edges(3, {{0, 1}, {0, 2}, {1, 2}});
    const auto rep = brute_force_reachable_check(g, LoadVector::discrete({3, 0, 0}), 2);
    CHECK(rep.one_balanced_reachable);
    CHECK(rep.min_potential == 0);  // [1,1,1]
}

TEST_CASE("oracle: [1,0] is already 1-balanced with no fair transfer") {
    Graph g = Graph::from_edges(2, {{0, 1}});
    const auto rep = brute_force_reachable_check(g, LoadVector::discrete({1, 0}), 6);
    CHECK(rep.states_explored == 1);  // 1 - 0 < 2, nothing moves
    CHECK(rep.one_balanced_reachable);
    CHECK(rep.min_potential == Rational(1, 2));
}

TEST_CASE("oracle: [4,0] reaches potential 0 in one transfer of 2") {
    Graph g = Graph::from_edges(2, {{0, 1}});
    const auto rep = brute_force_reachable_check(g, LoadVector::discrete({4, 0}), 1);
    CHECK(rep.min_potential == 0);
    CHECK(rep.one_balanced_reachable);
}

TEST_CASE("oracle: horizon bounds the search depth") {
    Graph g = Graph::from_edges(2, {{0, 1}});
    const auto rep0 = brute_force_reachable_check(g, LoadVector::discrete({8, 0}), 0);
    CHECK_FALSE(rep0.one_balanced_reachable);
    CHECK(rep0.states_explored == 1);
    const auto closure = brute_force_reachable_check(g, LoadVector::discrete({8, 0}), -1);
    CHECK(closure.one_balanced_reachable);
    CHECK(closure.min_potential == 0);
}

TEST_CASE("oracle: state cap raises BudgetExceeded") {
    Graph g = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    CHECK_THROWS_AS(brute_force_reachable_check(g, LoadVector::discrete({10, 0, 0, 0}), -1, 5), BudgetExceeded);
}

TEST_CASE("oracle rejects continuous loads") {
    Graph g = Graph::from_edges(2, {{0, 1}});
    LoadVector lv(LoadMode::Continuous, {Rational(1, 2), Rational(1, 2)});
    CHECK_THROWS_AS(brute_force_reachable_check(g, lv, 1), InvalidParameter);
}
