#include "lbsim/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>

namespace lbsim {

std::optional<Rational> parse_rational(const std::string& text) {
    if (text.empty()) {
        return std::nullopt;
    }
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) {
            mpz_class num(text, 10);
            return Rational(num);
        }
        mpz_class num(text.substr(0, slash), 10);
        mpz_class den(text.substr(slash + 1), 10);
        if (den == 0) {
            return std::nullopt;
        }
        Rational r(num, den);
        r.canonicalize();
        return r;
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

std::int64_t to_int64(const Rational& r) {
    if (!is_integral(r)) {
        throw InvalidParameter("expected integral value, got " + to_fraction_string(r));
    }
    if (!r.get_num().fits_slong_p()) {
        throw InvalidParameter("value out of int64 range: " + to_fraction_string(r));
    }
    return static_cast<std::int64_t>(r.get_num().get_si());
}

namespace {

std::vector<int> bfs_distances(const Graph& g, NodeId start) {
    std::vector<int> dist(static_cast<std::size_t>(g.node_count()), -1);
    std::deque<NodeId> queue{start};
    dist[static_cast<std::size_t>(start)] = 0;
    while (!queue.empty()) {
        const NodeId u = queue.front();
        queue.pop_front();
        for (NodeId v : g.neighbors(u)) {
            if (dist[static_cast<std::size_t>(v)] < 0) {
                dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

}  // namespace

Graph Graph::from_edges(NodeId node_count, std::vector<std::pair<NodeId, NodeId>> edges) {
    if (node_count < 1) {
        throw ValidationError("graph needs at least one node");
    }
    Graph g;
    g.n_ = node_count;
    g.adj_.assign(static_cast<std::size_t>(node_count), {});
    for (auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= node_count || v >= node_count) {
            throw ValidationError("edge endpoint out of range: " + std::to_string(u) + " " + std::to_string(v));
        }
        if (u == v) {
            throw ValidationError("self-loop on node " + std::to_string(u));
        }
        if (u > v) {
            std::swap(u, v);
        }
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
        throw ValidationError("duplicate edge");
    }
    for (const auto& [u, v] : edges) {
        g.adj_[static_cast<std::size_t>(u)].push_back(v);
        g.adj_[static_cast<std::size_t>(v)].push_back(u);
    }
    for (auto& list : g.adj_) {
        std::sort(list.begin(), list.end());
    }
    g.edges_ = std::move(edges);

    // Connectivity plus exact diameter, all-pairs BFS.
    int diameter = 0;
    for (NodeId s = 0; s < node_count; ++s) {
        const auto dist = bfs_distances(g, s);
        for (NodeId t = 0; t < node_count; ++t) {
            const int d = dist[static_cast<std::size_t>(t)];
            if (d < 0) {
                throw ValidationError("graph is not connected");
            }
            diameter = std::max(diameter, d);
        }
    }
    g.diameter_ = diameter;
    return g;
}

LoadVector::LoadVector(LoadMode mode, std::vector<Rational> values) : mode_(mode), values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] < 0) {
            throw ValidationError("negative load at node " + std::to_string(i));
        }
        if (mode_ == LoadMode::Discrete && !is_integral(values_[i])) {
            throw ValidationError("non-integer load in discrete mode at node " + std::to_string(i));
        }
    }
}

LoadVector LoadVector::discrete(const std::vector<std::int64_t>& values) {
    std::vector<Rational> vals;
    vals.reserve(values.size());
    for (std::int64_t v : values) {
        vals.emplace_back(static_cast<long>(v));
    }
    return LoadVector(LoadMode::Discrete, std::move(vals));
}

void LoadVector::set(NodeId u, Rational value) {
    if (value < 0) {
        throw ValidationError("negative load at node " + std::to_string(u));
    }
    if (mode_ == LoadMode::Discrete && !is_integral(value)) {
        throw ValidationError("non-integer load in discrete mode at node " + std::to_string(u));
    }
    values_[static_cast<std::size_t>(u)] = std::move(value);
}

std::int64_t LoadVector::as_int(NodeId u) const { return to_int64(values_[static_cast<std::size_t>(u)]); }

std::vector<std::int64_t> LoadVector::to_ints() const {
    std::vector<std::int64_t> out;
    out.reserve(values_.size());
    for (NodeId u = 0; u < size(); ++u) {
        out.push_back(as_int(u));
    }
    return out;
}

Rational LoadVector::sum() const {
    Rational total = 0;
    for (const auto& v : values_) {
        total += v;
    }
    return total;
}

namespace {

// mt19937_64 output is specified by the standard, so seeded draws are
// reproducible across toolchains; modulo bias is irrelevant at these sizes.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t bound) {
    return bound == 0 ? 0 : rng() % bound;
}

std::vector<std::pair<NodeId, NodeId>> random_connected_edges(NodeId n, double edge_prob, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::uint64_t threshold =
        static_cast<std::uint64_t>(std::clamp(edge_prob, 0.0, 1.0) * 4294967296.0);
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            if ((rng() & 0xffffffffu) < threshold) {
                edges.emplace_back(u, v);
            }
        }
    }
    // Augment across components until connected: union-find, then one edge
    // from each later component to a seeded node of the first.
    std::vector<NodeId> parent(static_cast<std::size_t>(n));
    for (NodeId u = 0; u < n; ++u) parent[static_cast<std::size_t>(u)] = u;
    auto find = [&](NodeId x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    auto unite = [&](NodeId a, NodeId b) { parent[static_cast<std::size_t>(find(a))] = find(b); };
    for (const auto& [u, v] : edges) {
        unite(u, v);
    }
    for (NodeId u = 1; u < n; ++u) {
        if (find(u) != find(0)) {
            const NodeId anchor = static_cast<NodeId>(draw(rng, static_cast<std::uint64_t>(u)));
            edges.emplace_back(anchor, u);
            unite(anchor, u);
        }
    }
    return edges;
}

}  // namespace

std::pair<Graph, LoadVector> generate(const GraphSpec& spec, const LoadInit& init, LoadMode mode) {
    if (spec.n < 2) {
        throw InvalidParameter("generator needs n >= 2");
    }
    std::vector<std::pair<NodeId, NodeId>> edges;
    switch (spec.kind) {
        case GraphKind::Path:
            for (NodeId u = 0; u + 1 < spec.n; ++u) edges.emplace_back(u, u + 1);
            break;
        case GraphKind::Cycle:
            if (spec.n < 3) {
                throw InvalidParameter("cycle needs n >= 3");
            }
            for (NodeId u = 0; u + 1 < spec.n; ++u) edges.emplace_back(u, u + 1);
            edges.emplace_back(0, spec.n - 1);
            break;
        case GraphKind::Star:
            for (NodeId u = 1; u < spec.n; ++u) edges.emplace_back(0, u);
            break;
        case GraphKind::RandomConnected:
            edges = random_connected_edges(spec.n, spec.edge_prob, spec.seed);
            break;
    }
    Graph g = Graph::from_edges(spec.n, std::move(edges));

    std::vector<Rational> loads(static_cast<std::size_t>(spec.n));
    switch (init.kind) {
        case LoadInit::Kind::Uniform: {
            if (init.max < 0) {
                throw InvalidParameter("uniform load max must be >= 0");
            }
            std::mt19937_64 rng(init.seed);
            for (auto& l : loads) {
                l = Rational(static_cast<long>(draw(rng, static_cast<std::uint64_t>(init.max) + 1)));
            }
            break;
        }
        case LoadInit::Kind::Explicit: {
            if (static_cast<NodeId>(init.values.size()) != spec.n) {
                throw InvalidParameter("explicit load list size mismatch");
            }
            loads = init.values;
            break;
        }
        case LoadInit::Kind::PointMass: {
            if (init.node < 0 || init.node >= spec.n) {
                throw InvalidParameter("point mass node out of range");
            }
            for (auto& l : loads) {
                l = Rational(static_cast<long>(init.base));
            }
            loads[static_cast<std::size_t>(init.node)] = Rational(static_cast<long>(init.amount));
            break;
        }
    }
    return {std::move(g), LoadVector(mode, std::move(loads))};
}

std::pair<Graph, LoadVector> parse_graph_text(const std::string& text, LoadMode mode) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    NodeId n = -1;
    std::vector<std::optional<Rational>> loads;
    std::vector<std::pair<NodeId, NodeId>> edges;

    auto fail = [&](const std::string& what) -> void {
        throw ParseError("line " + std::to_string(lineno) + ": " + what);
    };

    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) {
            continue;
        }
        if (tag == "n") {
            long count = 0;
            if (!(ls >> count) || count < 1 || n >= 0) {
                fail("bad node count");
            }
            n = static_cast<NodeId>(count);
            loads.assign(static_cast<std::size_t>(n), std::nullopt);
        } else if (tag == "node") {
            long id = 0;
            std::string value;
            if (n < 0 || !(ls >> id >> value)) {
                fail("bad node line");
            }
            if (id < 0 || id >= n) {
                throw ValidationError("node id out of range at line " + std::to_string(lineno));
            }
            auto r = parse_rational(value);
            if (!r) {
                fail("unparseable load '" + value + "'");
            }
            if (loads[static_cast<std::size_t>(id)]) {
                throw ValidationError("duplicate node " + std::to_string(id));
            }
            loads[static_cast<std::size_t>(id)] = *r;
        } else if (tag == "edge") {
            long u = 0;
            long v = 0;
            if (n < 0 || !(ls >> u >> v)) {
                fail("bad edge line");
            }
            edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        } else {
            fail("unknown tag '" + tag + "'");
        }
        std::string rest;
        if (ls >> rest) {
            fail("trailing tokens");
        }
    }
    if (n < 0) {
        throw ParseError("missing 'n' header");
    }
    std::vector<Rational> values;
    values.reserve(static_cast<std::size_t>(n));
    for (NodeId u = 0; u < n; ++u) {
        if (!loads[static_cast<std::size_t>(u)]) {
            throw ValidationError("missing load for node " + std::to_string(u));
        }
        values.push_back(*loads[static_cast<std::size_t>(u)]);
    }
    Graph g = Graph::from_edges(n, std::move(edges));
    return {std::move(g), LoadVector(mode, std::move(values))};
}

std::pair<Graph, LoadVector> load_graph(const std::string& path, LoadMode mode) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open graph file: " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_graph_text(buf.str(), mode);
}

std::pair<Graph, LoadVector> load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open graph file: " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const LoadMode mode =
        text.find('/') != std::string::npos ? LoadMode::Continuous : LoadMode::Discrete;
    return parse_graph_text(text, mode);
}

std::string serialize_graph(const Graph& g, const LoadVector& loads) {
    std::ostringstream out;
    out << "n " << g.node_count() << "\n";
    for (NodeId u = 0; u < g.node_count(); ++u) {
        out << "node " << u << " " << to_fraction_string(loads[u]) << "\n";
    }
    for (const auto& [u, v] : g.edges()) {
        out << "edge " << u << " " << v << "\n";
    }
    return out.str();
}

void save_graph(const std::string& path, const Graph& g, const LoadVector& loads) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot write graph file: " + path);
    }
    out << serialize_graph(g, loads);
}

}  // namespace lbsim
