#include <doctest.h>

#include <random>

#include "lbsim/async_engine.hpp"
#include "lbsim/async_protocol.hpp"

using namespace lbsim;

namespace {

CheckSet async_checks() {
    CheckSet c;
    c.monotonic = c.fairness = c.conservation = true;
    return c;
}

Graph path_graph(NodeId n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (NodeId u = 0; u + 1 < n; ++u) e.emplace_back(u, u + 1);
    return Graph::from_edges(n, std::move(e));
}

}  // namespace

TEST_CASE("rr_proposal: equal-raise branch fills three empty targets") {
    const auto amounts = rr_proposal(12, {{0, 0}, {1, 0}, {2, 0}}, 4);
    REQUIRE(amounts.size() == 3);
    CHECK(amounts[0] == 4);
    CHECK(amounts[1] == 4);
    CHECK(amounts[2] == 4);
}

TEST_CASE("rr_proposal: unit round-robin when the raise does not fit") {
    // budget 5, targets at 0 and 3, tentative 6: units go A,B,A,B,A
    const auto amounts = rr_proposal(5, {{0, 0}, {1, 3}}, 6);
    CHECK(amounts[0] == 3);
    CHECK(amounts[1] == 2);
}

TEST_CASE("rr_proposal: zero budget proposes nothing") {
    const auto amounts = rr_proposal(0, {{0, 0}, {1, 1}}, 5);
    CHECK(amounts[0] == 0);
    CHECK(amounts[1] == 0);
}

TEST_CASE("rr_proposal: members stop at the tentative load") {
    const auto amounts = rr_proposal(100, {{0, 0}, {1, 4}}, 5);
    CHECK(amounts[0] == 5);
    CHECK(amounts[1] == 1);
}

TEST_CASE("plan_cycle: cycle-start arithmetic on cached loads") {
    const auto plan = plan_cycle(9, {{1, 0}, {2, 4}});
    CHECK(plan.min_load == 0);
    CHECK(plan.load_to_transfer == 4);
    CHECK(plan.tentative_load == 5);
    REQUIRE(plan.pv_less.size() == 2);
    CHECK(plan.amounts[0] + plan.amounts[1] == 4);
    CHECK(plan.amounts[0] == 3);  // rr tops up the lowest member after the equal raise
    CHECK(plan.amounts[1] == 1);
}

TEST_CASE("plan_cycle: floor arithmetic suppresses a zero transfer") {
    const auto plan = plan_cycle(3, {{1, 2}});
    CHECK(plan.load_to_transfer == 0);
    CHECK(plan.tentative_load == 3);
    CHECK(plan.amounts[0] == 0);
}

TEST_CASE("proposal handler: gap-limited deal and Ack(0)") {
    Graph g = path_graph(2);
    AsyncProtocol proto(g, {4, 10}, false);

    std::vector<AsyncMessage> out;
    AsyncMessage prop;
    prop.kind = MsgKind::Proposal;
    prop.src = 1;
    prop.dst = 0;
    prop.amount = 3;
    prop.tentative = 10;
    proto.deliver(prop, out);
    REQUIRE(!out.empty());
    CHECK(out[0].kind == MsgKind::AckMsg);
    CHECK(out[0].amount == 3);
    CHECK(proto.node(0).t_load == 7);

    out.clear();
    prop.tentative = 7;  // gap now zero
    proto.deliver(prop, out);
    REQUIRE(!out.empty());
    CHECK(out[0].amount == 0);
    CHECK(proto.node(0).t_load == 7);

    out.clear();
    prop.tentative = 9;
    prop.amount = 5;
    proto.deliver(prop, out);
    CHECK(out[0].amount == 2);  // min(gap, amount)
    CHECK(proto.node(0).t_load == 9);
}

TEST_CASE("ack handler: pending set drains and the cycle completes") {
    Graph g = path_graph(3);
    AsyncProtocol proto(g, {9, 0, 4}, false);
    auto& st = proto.mutable_node(1);
    st.phase = NodePhase::AwaitingAcks;
    st.pending_acks = {0, 2};
    st.proposals_this_cycle = true;

    std::vector<AsyncMessage> out;
    AsyncMessage ack;
    ack.kind = MsgKind::AckMsg;
    ack.src = 0;
    ack.dst = 1;
    ack.amount = 3;
    proto.deliver(ack, out);
    CHECK(proto.node(1).last_gave == 3);
    CHECK(proto.node(1).phase == NodePhase::AwaitingAcks);

    ack.src = 2;
    ack.amount = 0;  // Ack(0) is legal and still clears the wait
    proto.deliver(ack, out);
    CHECK(proto.node(1).last_gave == 3);
    CHECK(proto.node(1).phase == NodePhase::Idle);
    // cycle completion re-reads the neighborhood
    int queries = 0;
    for (const auto& m : out) {
        if (m.kind == MsgKind::LoadQuery) ++queries;
    }
    CHECK(queries == 2);
}

TEST_CASE("unexpected ack is reported and ignored") {
    Graph g = path_graph(2);
    AsyncProtocol proto(g, {1, 1}, false);
    bool seen = false;
    proto.events.on_unexpected_ack = [&](NodeId, const AsyncMessage&) { seen = true; };
    std::vector<AsyncMessage> out;
    AsyncMessage ack;
    ack.kind = MsgKind::AckMsg;
    ack.src = 1;
    ack.dst = 0;
    ack.amount = 2;
    proto.deliver(ack, out);
    CHECK(seen);
    CHECK(proto.node(0).last_gave == 0);
}

TEST_CASE("run_async: edge [10,0] settles at [5,5] under every policy") {
    Graph g = path_graph(2);
    for (auto policy : {SchedulePolicy::RoundRobinFair, SchedulePolicy::RandomFair,
                        SchedulePolicy::AdversarialLongestQueue}) {
        AsyncOptions opt;
        opt.max_steps = 100000;
        opt.checks = async_checks();
        auto [fin, verdict] = run_async(g, LoadVector::discrete({10, 0}), {policy, 17}, opt);
        CHECK(verdict.reached_balance);
        CHECK(verdict.violations.empty());
        CHECK(fin.as_int(0) == 5);
        CHECK(fin.as_int(1) == 5);
        CHECK(verdict.deals <= verdict.deal_budget);
    }
}

TEST_CASE("run_async: already 1-balanced input makes zero deals") {
    Graph g = path_graph(4);
    AsyncOptions opt;
    opt.checks = async_checks();
    auto [fin, verdict] =
        run_async(g, LoadVector::discrete({2, 1, 2, 1}), {SchedulePolicy::RoundRobinFair, 0}, opt);
    CHECK(verdict.reached_balance);
    CHECK(verdict.deals == 0);
    CHECK(verdict.violations.empty());
}

TEST_CASE("run_async: seeds change the trace but not conservation or balance") {
    Graph g = path_graph(3);
    AsyncOptions opt;
    opt.checks = async_checks();
    auto [f1, v1] = run_async(g, LoadVector::discrete({9, 0, 4}), {SchedulePolicy::RandomFair, 1}, opt);
    auto [f2, v2] = run_async(g, LoadVector::discrete({9, 0, 4}), {SchedulePolicy::RandomFair, 2}, opt);
    CHECK(v1.reached_balance);
    CHECK(v2.reached_balance);
    CHECK(v1.violations.empty());
    CHECK(v2.violations.empty());
    CHECK(f1.sum() == 13);
    CHECK(f2.sum() == 13);
}

TEST_CASE("run_async: identical seeds give identical outcomes") {
    Graph g = path_graph(3);
    AsyncOptions opt;
    auto [f1, v1] = run_async(g, LoadVector::discrete({9, 0, 4}), {SchedulePolicy::RandomFair, 5}, opt);
    auto [f2, v2] = run_async(g, LoadVector::discrete({9, 0, 4}), {SchedulePolicy::RandomFair, 5}, opt);
    CHECK(f1 == f2);
    CHECK(v1.steps_used == v2.steps_used);
    CHECK(v1.deals == v2.deals);
}

TEST_CASE("property: seeded async runs balance within the deal budget under all checks") {
    std::mt19937_64 meta(31337);
    const SchedulePolicy policies[] = {SchedulePolicy::RoundRobinFair, SchedulePolicy::RandomFair,
                                       SchedulePolicy::AdversarialLongestQueue};
    for (int i = 0; i < 15; ++i) {
        GraphSpec spec{GraphKind::RandomConnected, static_cast<NodeId>(3 + meta() % 6),
                       0.3 + static_cast<double>(meta() % 50) / 100.0, meta()};
        LoadInit init;
        init.kind = LoadInit::Kind::Uniform;
        init.max = 40;
        init.seed = meta();
        auto [g, loads] = generate(spec, init, LoadMode::Discrete);
        AsyncOptions opt;
        opt.max_steps = 500000;
        opt.checks = async_checks();
        auto [fin, verdict] = run_async(g, loads, {policies[i % 3], meta()}, opt);
        REQUIRE(verdict.reached_balance);
        REQUIRE(verdict.violations.empty());
        REQUIRE(verdict.within_deal_budget);
        REQUIRE(is_eps_balanced(g, fin, 1));
        REQUIRE(fin.sum() == loads.sum());
    }
}
