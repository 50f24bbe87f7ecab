#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lbsim/async_engine.hpp"
#include "lbsim/graph.hpp"
#include "lbsim/stab_link.hpp"
#include "lbsim/sync_engine.hpp"

namespace lbsim {

/// Parsed experiment description. Line-oriented `key = value` text with
/// [scenario] and [graph] sections; '#' starts a comment.
struct Scenario {
    enum class Algo { Continuous, Discrete, Multi, Diffusion, Async, SelfStab };
    Algo algo = Algo::Discrete;
    Rational eps = 1;           // continuous
    Rational alpha = Rational(1, 2);  // diffusion
    Schedule schedule;          // async / selfstab
    FaultModel faults;          // selfstab
    int k = 3;                  // selfstab
    int max_rounds = 10000;
    std::int64_t max_steps = 1000000;
    int stride = 1;
    CheckSet checks;
    std::string trace_path;

    bool graph_from_file = false;
    std::string graph_path;
    GraphSpec gspec;
    LoadInit linit;

    LoadMode mode() const {
        return (algo == Algo::Continuous || algo == Algo::Diffusion) ? LoadMode::Continuous
                                                                     : LoadMode::Discrete;
    }
};

Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Exit codes: 0 ok, 2 parse error, 3 check violation, 4 horizon exceeded.
inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 2;
inline constexpr int kExitViolation = 3;
inline constexpr int kExitHorizon = 4;

struct RunOutcome {
    int exit_code = kExitOk;
    std::string summary;  // key = value lines
    std::string trace;    // CSV, header included
};

/// Executes the configured engine; deterministic for a fixed scenario.
RunOutcome run_scenario(const Scenario& sc);

/// CLI entry: loads the file, runs, writes the trace (path resolved against
/// $LBSIM_OUT_DIR when relative) plus a .summary next to it, prints the
/// summary to stdout. Returns the exit code.
int run_scenario_file(const std::string& path, bool quiet = false);

struct SweepRow {
    std::string params;
    std::uint64_t seed = 0;
    int exit_code = kExitOk;
    std::string verdict;
    std::int64_t rounds = 0;
    std::int64_t budget = 0;
    double ratio = 0.0;  // rounds / budget, 0 when budget is 0
};

struct SweepOutcome {
    std::vector<SweepRow> rows;
    double max_ratio = 0.0;
    int exit_code = kExitOk;
    std::string table;  // rendered text table
};

/// Cartesian product of grid overrides applied to the template scenario, one
/// run per (combination, seed); the seed feeds the generator and schedule.
SweepOutcome sweep_runs(const Scenario& base,
                        const std::vector<std::pair<std::string, std::vector<std::string>>>& grid,
                        std::uint64_t seed_from, std::uint64_t seed_to, std::size_t grid_cap = 4096);

/// Grid file: `key = v1,v2,...` lines, same keys as scenario files.
std::vector<std::pair<std::string, std::vector<std::string>>> parse_grid_file(const std::string& path);

}  // namespace lbsim
