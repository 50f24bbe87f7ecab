#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lbsim/rational.hpp"

namespace lbsim {

/// Dense node identifier, contiguous in [0, node_count).
using NodeId = std::int32_t;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidParameter : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Immutable undirected topology. Connectivity, symmetry and the absence of
/// self-loops/duplicate edges are enforced at construction; the diameter is
/// computed once by all-pairs BFS and cached (topology is static for the
/// lifetime of a simulation).
class Graph {
public:
    static Graph from_edges(NodeId node_count, std::vector<std::pair<NodeId, NodeId>> edges);

    NodeId node_count() const { return n_; }
    const std::vector<NodeId>& neighbors(NodeId u) const { return adj_[static_cast<std::size_t>(u)]; }
    int degree(NodeId u) const { return static_cast<int>(neighbors(u).size()); }
    int diameter() const { return diameter_; }
    /// Undirected edge list, each edge once as (u, v) with u < v, sorted.
    const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

    bool operator==(const Graph& other) const {
        return n_ == other.n_ && edges_ == other.edges_;
    }

private:
    Graph() = default;

    NodeId n_ = 0;
    std::vector<std::vector<NodeId>> adj_;
    std::vector<std::pair<NodeId, NodeId>> edges_;
    int diameter_ = 0;
};

enum class LoadMode { Continuous, Discrete };

/// Per-node load state. Values are exact rationals in both modes; Discrete
/// mode additionally enforces integrality. Loads are never negative.
class LoadVector {
public:
    LoadVector(LoadMode mode, std::vector<Rational> values);
    static LoadVector discrete(const std::vector<std::int64_t>& values);

    LoadMode mode() const { return mode_; }
    NodeId size() const { return static_cast<NodeId>(values_.size()); }
    const Rational& operator[](NodeId u) const { return values_[static_cast<std::size_t>(u)]; }
    void set(NodeId u, Rational value);

    std::int64_t as_int(NodeId u) const;
    std::vector<std::int64_t> to_ints() const;
    Rational sum() const;

    bool operator==(const LoadVector& other) const {
        return mode_ == other.mode_ && values_ == other.values_;
    }

private:
    LoadMode mode_;
    std::vector<Rational> values_;
};

enum class GraphKind { Path, Cycle, Star, RandomConnected };

struct GraphSpec {
    GraphKind kind = GraphKind::Path;
    NodeId n = 2;
    double edge_prob = 0.5;        // RandomConnected only
    std::uint64_t seed = 0;        // RandomConnected only
};

struct LoadInit {
    enum class Kind { Uniform, Explicit, PointMass };
    Kind kind = Kind::Uniform;
    std::int64_t max = 0;          // Uniform: values drawn from [0, max]
    std::uint64_t seed = 0;        // Uniform
    std::vector<Rational> values;  // Explicit
    NodeId node = 0;               // PointMass
    std::int64_t amount = 0;       // PointMass
    std::int64_t base = 0;         // PointMass: every other node
};

/// Deterministic for fixed arguments. Star(n) has node 0 as center.
/// RandomConnected samples Erdos-Renyi edges and augments across components
/// until connected.
std::pair<Graph, LoadVector> generate(const GraphSpec& spec, const LoadInit& init, LoadMode mode);

/// Line-oriented text format, '#' comments:
///   n <count>
///   node <id> <load>     load: integer, or p/q in continuous mode
///   edge <u> <v>
std::pair<Graph, LoadVector> parse_graph_text(const std::string& text, LoadMode mode);
std::pair<Graph, LoadVector> load_graph(const std::string& path, LoadMode mode);
/// Mode inferred: continuous iff any load carries a '/'.
std::pair<Graph, LoadVector> load_graph(const std::string& path);

std::string serialize_graph(const Graph& g, const LoadVector& loads);
void save_graph(const std::string& path, const Graph& g, const LoadVector& loads);

}  // namespace lbsim
