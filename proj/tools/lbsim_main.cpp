#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "lbsim/scenario.hpp"

namespace {

int cmd_run(const std::string& path, const std::vector<std::string>& extra_checks, int max_rounds,
            const std::string& trace_override) {
    lbsim::Scenario sc;
    try {
        sc = lbsim::load_scenario(path);
        for (const auto& c : extra_checks) {
            if (c == "monotonic") sc.checks.monotonic = true;
            else if (c == "fairness") sc.checks.fairness = true;
            else if (c == "lemma2") sc.checks.lemma2 = true;
            else if (c == "lemma6") sc.checks.lemma6 = true;
            else if (c == "matching_degree") sc.checks.matching_degree = true;
            else if (c == "conservation") sc.checks.conservation = true;
            else throw lbsim::ParseError("unknown check '" + c + "'");
        }
        if (max_rounds > 0) {
            sc.max_rounds = max_rounds;
        }
        if (!trace_override.empty()) {
            sc.trace_path = trace_override;
        }
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return lbsim::kExitParse;
    }

    lbsim::RunOutcome outcome;
    try {
        outcome = lbsim::run_scenario(sc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return lbsim::kExitParse;
    }
    if (!sc.trace_path.empty()) {
        const char* dir = std::getenv("LBSIM_OUT_DIR");
        std::string tpath = sc.trace_path;
        if (tpath.front() != '/' && dir != nullptr && *dir != '\0') {
            tpath = std::string(dir) + (dir[std::string(dir).size() - 1] == '/' ? "" : "/") + tpath;
        }
        std::ofstream tf(tpath);
        if (!tf) {
            std::cerr << "cannot write trace: " << tpath << "\n";
            return lbsim::kExitParse;
        }
        tf << outcome.trace;
        std::ofstream sf(tpath + ".summary");
        sf << outcome.summary;
    }
    std::cout << outcome.summary;
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lbsim: deal-agreement load balancing simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::vector<std::string> checks;
    int max_rounds = 0;
    std::string trace_path;
    auto* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--check", checks, "extra checks to enable")->delimiter(',');
    run->add_option("--max-rounds", max_rounds, "override max rounds");
    run->add_option("--trace", trace_path, "override trace output path");

    std::string template_path;
    std::string grid_path;
    std::string seeds_range = "1..1";
    auto* sweep = app.add_subcommand("sweep", "run a template scenario over a parameter grid");
    sweep->add_option("template", template_path, "template scenario file")->required();
    sweep->add_option("--grid", grid_path, "grid file: key = v1,v2,... lines")->required();
    sweep->add_option("--seeds", seeds_range, "seed range a..b");

    std::string kind = "path";
    int n = 2;
    double edge_prob = 0.5;
    std::uint64_t gseed = 0;
    std::string loads_spec = "uniform:0:0";
    std::string out_path;
    auto* gen = app.add_subcommand("gen-graph", "generate a graph file");
    gen->add_option("--kind", kind, "path|cycle|star|random")->required();
    gen->add_option("--n", n, "node count")->required();
    gen->add_option("--edge-prob", edge_prob, "random kind: edge probability");
    gen->add_option("--graph-seed", gseed, "random kind: seed");
    gen->add_option("--loads", loads_spec,
                    "uniform:<max>:<seed> | explicit:v1,v2,... | point:<node>:<amount>:<base>");
    gen->add_option("-o,--output", out_path, "output file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(scenario_path, checks, max_rounds, trace_path);
        }
        if (sweep->parsed()) {
            const auto dots = seeds_range.find("..");
            if (dots == std::string::npos) {
                std::cerr << "--seeds must be a..b\n";
                return lbsim::kExitParse;
            }
            const auto a = std::stoull(seeds_range.substr(0, dots));
            const auto b = std::stoull(seeds_range.substr(dots + 2));
            const lbsim::Scenario base = lbsim::load_scenario(template_path);
            const auto grid = lbsim::parse_grid_file(grid_path);
            const auto outcome = lbsim::sweep_runs(base, grid, a, b);
            std::cout << outcome.table;
            return outcome.exit_code;
        }
        if (gen->parsed()) {
            lbsim::GraphSpec spec;
            if (kind == "path") spec.kind = lbsim::GraphKind::Path;
            else if (kind == "cycle") spec.kind = lbsim::GraphKind::Cycle;
            else if (kind == "star") spec.kind = lbsim::GraphKind::Star;
            else if (kind == "random") spec.kind = lbsim::GraphKind::RandomConnected;
            else {
                std::cerr << "unknown kind '" << kind << "'\n";
                return lbsim::kExitParse;
            }
            spec.n = n;
            spec.edge_prob = edge_prob;
            spec.seed = gseed;

            lbsim::LoadInit init;
            const auto parts = [&] {
                std::vector<std::string> p;
                std::string cur;
                for (char c : loads_spec) {
                    if (c == ':') {
                        p.push_back(cur);
                        cur.clear();
                    } else {
                        cur += c;
                    }
                }
                p.push_back(cur);
                return p;
            }();
            if (parts[0] == "uniform" && parts.size() == 3) {
                init.kind = lbsim::LoadInit::Kind::Uniform;
                init.max = std::stoll(parts[1]);
                init.seed = std::stoull(parts[2]);
            } else if (parts[0] == "explicit" && parts.size() == 2) {
                init.kind = lbsim::LoadInit::Kind::Explicit;
                std::string cur;
                auto push = [&](const std::string& v) {
                    auto r = lbsim::parse_rational(v);
                    if (!r) throw lbsim::ParseError("bad load '" + v + "'");
                    init.values.push_back(*r);
                };
                for (char c : parts[1]) {
                    if (c == ',') {
                        push(cur);
                        cur.clear();
                    } else {
                        cur += c;
                    }
                }
                push(cur);
            } else if (parts[0] == "point" && parts.size() == 4) {
                init.kind = lbsim::LoadInit::Kind::PointMass;
                init.node = std::stoi(parts[1]);
                init.amount = std::stoll(parts[2]);
                init.base = std::stoll(parts[3]);
            } else {
                std::cerr << "bad --loads spec\n";
                return lbsim::kExitParse;
            }
            const bool continuous = loads_spec.find('/') != std::string::npos;
            auto [g, loads] =
                lbsim::generate(spec, init, continuous ? lbsim::LoadMode::Continuous : lbsim::LoadMode::Discrete);
            lbsim::save_graph(out_path, g, loads);
            std::cout << "wrote " << out_path << " (n=" << g.node_count() << ", D=" << g.diameter() << ")\n";
            return 0;
        }
    } catch (const lbsim::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return lbsim::kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
