#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lbsim/scenario.hpp"

using namespace lbsim;

namespace {

const char* kDiscretePath =
    "[scenario]\n"
    "algorithm = discrete\n"
    "max_rounds = 100\n"
    "checks = monotonic,fairness,lemma6,matching_degree,conservation\n"
    "trace = out.csv\n"
    "[graph]\n"
    "source = generate\n"
    "kind = path\n"
    "n = 3\n"
    "loads = explicit\n"
    "load_list = 9,0,4\n";

std::string write_temp(const std::string& text) {
    static int counter = 0;
    std::string path = "/tmp/lbsim_test_" + std::to_string(counter++) + ".scn";
    std::ofstream out(path);
    out << text;
    return path;
}

std::string summary_value(const std::string& summary, const std::string& key) {
    std::istringstream in(summary);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + " = ", 0) == 0) {
            return line.substr(key.size() + 3);
        }
    }
    return "";
}

}  // namespace

TEST_CASE("scenario parse: full file round-trips into the struct") {
    const Scenario sc = parse_scenario_text(kDiscretePath);
    CHECK(sc.algo == Scenario::Algo::Discrete);
    CHECK(sc.max_rounds == 100);
    CHECK(sc.checks.monotonic);
    CHECK(sc.checks.lemma6);
    CHECK_FALSE(sc.checks.lemma2);
    CHECK(sc.trace_path == "out.csv");
    CHECK(sc.gspec.kind == GraphKind::Path);
    CHECK(sc.linit.values.size() == 3);
}

TEST_CASE("scenario parse: incompatible checks are rejected at parse time") {
    CHECK_THROWS_AS(parse_scenario_text("[scenario]\nalgorithm = discrete\nchecks = lemma2\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario_text("[scenario]\nalgorithm = continuous\nchecks = lemma6\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario_text("[scenario]\nalgorithm = async\nchecks = matching_degree\n"),
                    ParseError);
    CHECK_THROWS_AS(parse_scenario_text("[scenario]\nbogus_key = 3\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario_text("algorithm = discrete\n"), ParseError);  // key outside a section
}

TEST_CASE("run_scenario: discrete path example") {
    Scenario sc = parse_scenario_text(kDiscretePath);
    sc.trace_path.clear();
    const RunOutcome out = run_scenario(sc);
    CHECK(out.exit_code == kExitOk);
    CHECK(summary_value(out.summary, "verdict") == "fixed_point");
    CHECK(summary_value(out.summary, "rounds_used") == "2");
    CHECK(summary_value(out.summary, "within_budget") == "true");
    CHECK(summary_value(out.summary, "conservation_drift") == "0");
    CHECK(out.trace.rfind("idx,l_max,l_min,discrepancy,potential,deals,messages,checks\n", 0) == 0);
}

TEST_CASE("run_scenario: diffusion overshoot trips the monotonic check with exit 3") {
    const char* text =
        "[scenario]\n"
        "algorithm = diffusion\n"
        "alpha = 1\n"
        "max_rounds = 3\n"
        "checks = monotonic\n"
        "[graph]\n"
        "source = generate\n"
        "kind = star\n"
        "n = 4\n"
        "loads = explicit\n"
        "load_list = 0,8,8,8\n";
    const RunOutcome out = run_scenario(parse_scenario_text(text));
    CHECK(out.exit_code == kExitViolation);
    CHECK(summary_value(out.summary, "first_violation_round") == "1");
}

TEST_CASE("run_scenario_file: malformed scenario exits 2") {
    const std::string path = write_temp("[scenario]\nalgorithm = what\n");
    CHECK(run_scenario_file(path, /*quiet=*/true) == kExitParse);
    std::remove(path.c_str());
}

TEST_CASE("run_scenario: horizon exit code") {
    const char* text =
        "[scenario]\n"
        "algorithm = discrete\n"
        "max_rounds = 1\n"
        "[graph]\n"
        "source = generate\n"
        "kind = path\n"
        "n = 4\n"
        "loads = explicit\n"
        "load_list = 50,0,0,0\n";
    const RunOutcome out = run_scenario(parse_scenario_text(text));
    CHECK(out.exit_code == kExitHorizon);
}

TEST_CASE("run_scenario: async and selfstab scenarios produce summaries") {
    const char* atext =
        "[scenario]\n"
        "algorithm = async\n"
        "policy = random_fair\n"
        "seed = 3\n"
        "max_steps = 100000\n"
        "stride = 10\n"
        "checks = monotonic,fairness,conservation\n"
        "[graph]\n"
        "source = generate\n"
        "kind = cycle\n"
        "n = 5\n"
        "loads = uniform\n"
        "load_max = 30\n"
        "load_seed = 4\n";
    const RunOutcome a = run_scenario(parse_scenario_text(atext));
    CHECK(a.exit_code == kExitOk);
    CHECK(summary_value(a.summary, "verdict") == "balanced_quiescent");
    CHECK(summary_value(a.summary, "within_deal_budget") == "true");
    CHECK(summary_value(a.summary, "conservation_drift") == "0");

    const char* stext =
        "[scenario]\n"
        "algorithm = selfstab\n"
        "policy = round_robin\n"
        "seed = 3\n"
        "k = 3\n"
        "fault_seed = 5\n"
        "garbage_frames = 2\n"
        "corrupt_state = true\n"
        "max_steps = 300000\n"
        "stride = 25\n"
        "[graph]\n"
        "source = generate\n"
        "kind = path\n"
        "n = 4\n"
        "loads = explicit\n"
        "load_list = 12,0,3,1\n";
    const RunOutcome st = run_scenario(parse_scenario_text(stext));
    CHECK(st.exit_code == kExitOk);
    CHECK(summary_value(st.summary, "verdict") == "balanced_quiescent");
    CHECK(summary_value(st.summary, "suffix_monotonic") == "true");
    CHECK(std::stoll(summary_value(st.summary, "stabilization_step")) >= 0);
}

TEST_CASE("determinism: identical scenarios yield byte-identical traces") {
    for (const char* text : {kDiscretePath}) {
        Scenario sc = parse_scenario_text(text);
        sc.trace_path.clear();
        const RunOutcome a = run_scenario(sc);
        const RunOutcome b = run_scenario(sc);
        REQUIRE(a.trace == b.trace);
        REQUIRE(a.summary == b.summary);
    }
}

TEST_CASE("sweep: empty grid gives an empty table with exit 0") {
    const Scenario base = parse_scenario_text(kDiscretePath);
    const SweepOutcome out = sweep_runs(base, {}, 1, 5);
    CHECK(out.exit_code == kExitOk);
    CHECK(out.rows.empty());
}

TEST_CASE("sweep: grid x seeds runs and aggregates the budget ratio") {
    const char* text =
        "[scenario]\n"
        "algorithm = discrete\n"
        "max_rounds = 5000\n"
        "checks = monotonic,conservation\n"
        "[graph]\n"
        "source = generate\n"
        "kind = random\n"
        "n = 6\n"
        "edge_prob = 0.5\n"
        "loads = uniform\n"
        "load_max = 50\n";
    const Scenario base = parse_scenario_text(text);
    const SweepOutcome out = sweep_runs(base, {{"graph.n", {"4", "8"}}}, 1, 3);
    CHECK(out.rows.size() == 6);
    for (const auto& row : out.rows) {
        CHECK(row.exit_code == kExitOk);
        CHECK(row.ratio <= 1.0);
    }
    CHECK(out.max_ratio <= 1.0);
    CHECK(out.exit_code == kExitOk);
}

TEST_CASE("sweep: grid cap is enforced") {
    const Scenario base = parse_scenario_text(kDiscretePath);
    CHECK_THROWS_AS(sweep_runs(base, {{"graph.n", {"4", "5", "6"}}}, 1, 10, 5), InvalidParameter);
}
