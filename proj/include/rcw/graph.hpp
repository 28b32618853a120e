#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rcw/types.hpp"

namespace rcw {

/// Compressed row adjacency. Undirected graphs store both directions; the
/// relaxed PageRank optimizer also uses it for per-node (directed) rows.
/// Rows never contain the node itself; propagation adds the self-loop.
class Topology {
public:
    Topology() = default;

    static Topology from_pairs(std::size_t num_nodes, std::span<const NodePair> pairs);
    static Topology from_rows(const std::vector<std::vector<NodeId>>& rows);

    std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t num_entries() const { return targets_.size(); }

    std::span<const NodeId> neighbors(NodeId u) const {
        return {targets_.data() + offsets_[u], targets_.data() + offsets_[u + 1]};
    }
    std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
    bool has(NodeId u, NodeId v) const;

private:
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> targets_;
};

/// Immutable undirected attributed graph.
class Graph {
public:
    Graph() = default;
    Graph(std::size_t num_nodes, std::vector<NodePair> edges, Eigen::MatrixXd features,
          std::optional<std::vector<int>> labels, int num_classes);

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_edges() const { return edges_.size(); }
    std::size_t feature_dim() const { return static_cast<std::size_t>(features_.cols()); }
    int num_classes() const { return num_classes_; }

    const std::vector<NodePair>& edges() const { return edges_; }
    const Topology& topology() const { return topology_; }
    const Eigen::MatrixXd& features() const { return features_; }
    const std::optional<std::vector<int>>& labels() const { return labels_; }

    bool has_edge(NodePair p) const { return topology_.has(p.u, p.v); }

    /// FNV-1a digest over node count, edges and feature bits.
    std::uint64_t checksum() const { return checksum_; }

    /// Same nodes, features and labels with a different edge set.
    Graph with_edges(std::vector<NodePair> edges) const;

private:
    std::size_t num_nodes_ = 0;
    std::vector<NodePair> edges_;
    Topology topology_;
    Eigen::MatrixXd features_;
    std::optional<std::vector<int>> labels_;
    int num_classes_ = 0;
    std::uint64_t checksum_ = 0;
};

/// Explanation subgraph of a host graph. `protected_pairs` are non-edges of
/// the host that generation has frozen against disturbance.
struct Witness {
    std::vector<NodeId> nodes;
    std::vector<NodePair> edges;
    std::vector<NodePair> protected_pairs;
    std::uint64_t host_checksum = 0;

    std::size_t size() const { return nodes.size() + edges.size(); }
    bool contains_node(NodeId v) const;
    bool contains_edge(NodePair p) const;
    bool is_frozen(NodePair p) const;

    friend bool operator==(const Witness&, const Witness&) = default;
};

/// Builds a witness over `g`, adding edge endpoints to the node set and
/// sorting everything. Throws IntegrityError on edges absent from `g`.
Witness make_witness(const Graph& g, std::vector<NodeId> nodes, std::vector<NodePair> edges,
                     std::vector<NodePair> protected_pairs = {});
Witness whole_graph_witness(const Graph& g);
void validate_witness(const Witness& w, const Graph& g);

/// True when the witness is G itself (every node and every edge).
bool covers_graph(const Witness& w, const Graph& g);

/// A set of node pairs to flip with its budgets.
struct Disturbance {
    std::vector<NodePair> flips;
    std::size_t k = 0;
    std::optional<std::size_t> b;

    friend bool operator==(const Disturbance&, const Disturbance&) = default;
};

/// Throws ParameterError when `d` repeats a pair, contains a self-pair, exceeds
/// k, or touches a node more than b times.
void check_budget(const Disturbance& d, std::size_t num_nodes);
bool within_budget(std::span<const NodePair> flips, std::size_t k, std::optional<std::size_t> b);

/// G with the witness edges removed, all nodes kept.
Graph subtract(const Graph& g, const Witness& w);

// Edge-set views used by inference. None of them copy features.
Topology witness_topology(const Graph& g, const Witness& w);
Topology remainder_topology(const Graph& g, const Witness& w);

/// Toggles `flips` against a sorted edge list and returns the sorted result.
std::vector<NodePair> toggle_pairs(std::span<const NodePair> edges, std::span<const NodePair> flips);

}  // namespace rcw
