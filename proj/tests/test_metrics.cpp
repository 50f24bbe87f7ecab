#include <doctest.h>

#include <random>

#include "lbsim/graph.hpp"
#include "lbsim/metrics.hpp"

using namespace lbsim;

namespace {

std::pair<Graph, LoadVector> edge_graph(std::initializer_list<long> loads, LoadMode mode = LoadMode::Discrete) {
    std::vector<Rational> vals;
    for (long v : loads) vals.emplace_back(v);
    Graph g = Graph::from_edges(static_cast<NodeId>(vals.size()), [&] {
        std::vector<std::pair<NodeId, NodeId>> e;
        for (NodeId u = 0; u + 1 < static_cast<NodeId>(vals.size()); ++u) e.emplace_back(u, u + 1);
        return e;
    }());
    return {std::move(g), LoadVector(mode, std::move(vals))};
}

}  // namespace

TEST_CASE("compute_metrics on [10,0]: direct evaluation of the potential") {
    auto [g, loads] = edge_graph({10, 0});
    const Metrics m = compute_metrics(g, loads);
    CHECK(m.discrepancy == 10);
    CHECK(m.l_avg == 5);
    // oracle: p(u) = (load - avg)^2 summed by hand
    const Rational expected = (Rational(10) - 5) * (Rational(10) - 5) + (Rational(0) - 5) * (Rational(0) - 5);
    CHECK(expected == 50);
    CHECK(m.potential == expected);
}

TEST_CASE("compute_metrics: uniform loads give zero potential and discrepancy") {
    auto [g, loads] = edge_graph({7, 7, 7, 7});
    const Metrics m = compute_metrics(g, loads);
    CHECK(m.potential == 0);
    CHECK(m.discrepancy == 0);
    CHECK(m.max_local_diff == 0);
}

TEST_CASE("compute_metrics: 1-balanced path with growing discrepancy") {
    auto [g, loads] = edge_graph({0, 1, 1, 2});
    const Metrics m = compute_metrics(g, loads);
    CHECK(m.max_local_diff == 1);
    CHECK(m.discrepancy == 2);
}

TEST_CASE("is_eps_balanced") {
    auto [g, loads] = edge_graph({0, 1, 1, 2});
    CHECK(is_eps_balanced(g, loads, 1));
    auto [g2, loads2] = edge_graph({7, 0});
    CHECK_FALSE(is_eps_balanced(g2, loads2, 1));

    // any loads are balanced at eps = discrepancy
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        std::vector<Rational> vals;
        for (int u = 0; u < 6; ++u) vals.emplace_back(static_cast<long>(rng() % 100));
        Graph g3 = Graph::from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}});
        LoadVector lv(LoadMode::Discrete, vals);
        const Metrics m = compute_metrics(g3, lv);
        CHECK(is_eps_balanced(g3, lv, m.discrepancy));
    }
}

TEST_CASE("is_fair_transfer boundary") {
    CHECK(is_fair_transfer(10, 0, 5));
    CHECK_FALSE(is_fair_transfer(10, 0, 6));
    CHECK(is_fair_transfer(7, 0, 3));  // discrete proposal floor(7/2)
}

TEST_CASE("check_monotonic_step accepts a legal single-proposal round") {
    auto [g, before] = edge_graph({8, 0, 4});
    LoadVector after(LoadMode::Discrete, {Rational(4), Rational(4), Rational(4)});
    const auto res = check_monotonic_step(g, before, after, {{0, 1, Rational(4)}}, TransferRule::FairPairwise);
    CHECK(res.ok());
}

TEST_CASE("check_monotonic_step flags a lower-to-higher transfer") {
    auto [g, before] = edge_graph({5, 5});
    LoadVector after(LoadMode::Discrete, {Rational(6), Rational(4)});
    const auto res = check_monotonic_step(g, before, after, {{1, 0, Rational(1)}}, TransferRule::FairPairwise);
    CHECK_FALSE(res.ok());
}

TEST_CASE("check_monotonic_step flags an unfair transfer even when global metrics improve") {
    auto [g, before] = edge_graph({10, 0});
    LoadVector after(LoadMode::Discrete, {Rational(4), Rational(6)});
    const auto res = check_monotonic_step(g, before, after, {{0, 1, Rational(6)}}, TransferRule::FairPairwise);
    CHECK_FALSE(res.ok());
    // the same deal is fine under the weaker aggregated-deal rule
    const auto weaker = check_monotonic_step(g, before, after, {{0, 1, Rational(6)}}, TransferRule::HigherToLower);
    CHECK(weaker.ok());
}

TEST_CASE("check_monotonic_step flags conservation and negativity") {
    auto [g, before] = edge_graph({3, 3});
    LoadVector after(LoadMode::Discrete, {Rational(3), Rational(4)});
    CHECK_FALSE(check_monotonic_step(g, before, after, {}, TransferRule::Unchecked).ok());
}

TEST_CASE("bound_budget: zero discrepancy means zero budget") {
    const BoundBudget b = bound_budget(4, 2, 0, 1, LoadMode::Continuous);
    CHECK(b.continuous_rounds == 0);
    const BoundBudget d = bound_budget(4, 2, 0, 0, LoadMode::Discrete);
    CHECK(d.discrete_rounds == 0);
}

TEST_CASE("bound_budget: continuous budget fixture evaluates to 90") {
    // ceil(15 * ln(ceil(2*100/0.5))) = ceil(15 * ln 400) = 90
    const BoundBudget b = bound_budget(2, 1, 10, 1, LoadMode::Continuous);
    CHECK(b.continuous_rounds == 90);
}

TEST_CASE("bound_budget: discrete formula includes the 6nD^2 tail") {
    const BoundBudget b = bound_budget(2, 1, 10, 0, LoadMode::Discrete);
    // ceil(51 * ln(ceil(200/2))) + 12 = ceil(51 * ln 100) + 12
    CHECK(b.discrete_rounds == 235 + 12);
    CHECK(bound_budget(2, 1, 1, 0, LoadMode::Discrete).discrete_rounds >= 12);
    CHECK_THROWS_AS(bound_budget(1, 1, 1, 1, LoadMode::Continuous), InvalidParameter);
    CHECK_THROWS_AS(bound_budget(2, 1, 1, 0, LoadMode::Continuous), InvalidParameter);
}

TEST_CASE("lemma floors") {
    CHECK(lemma2_floor(10, 2) == 25);           // K^2/(2D)
    CHECK(lemma6_floor(10, 2) == Rational(25, 4));  // K^2/(8D)
}

TEST_CASE("property: potential >= discrepancy^2 / 2 on random snapshots") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const NodeId n = static_cast<NodeId>(2 + rng() % 7);
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (NodeId u = 0; u + 1 < n; ++u) edges.emplace_back(u, u + 1);
        Graph g = Graph::from_edges(n, std::move(edges));
        std::vector<Rational> vals;
        for (NodeId u = 0; u < n; ++u) vals.emplace_back(static_cast<long>(rng() % 1000));
        LoadVector lv(LoadMode::Discrete, std::move(vals));
        const Metrics m = compute_metrics(g, lv);
        REQUIRE(m.potential * 2 >= m.discrepancy * m.discrepancy);
    }
}
