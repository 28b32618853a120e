#pragma once

#include <cstdint>
#include <vector>

#include "rcw/graph.hpp"

namespace rcw {

/// Edge-cut partition with border replication: every node owned by a
/// fragment that has a cut edge brings its hop_radius-neighborhood along.
struct Partition {
    std::vector<std::vector<NodeId>> fragments;   // owned nodes, sorted
    std::vector<std::vector<NodeId>> replicated;  // duplicated non-owned nodes, sorted
    std::vector<std::uint32_t> owner;             // node -> fragment index
    std::size_t hop_radius = 0;

    std::size_t size() const { return fragments.size(); }
    /// Owned plus replicated nodes of fragment i, sorted.
    std::vector<NodeId> local_nodes(std::size_t i) const;
};

/// Seeded multi-source BFS growth. Seeds are picked by farthest-point
/// sampling from the lowest-id minimum-degree node, with seeded tie-breaks;
/// the smallest fragment with a frontier grows next.
Partition partition_graph(const Graph& g, std::size_t n, std::size_t hop_radius, std::uint64_t seed);

/// Nodes within `radius` hops of `sources` (sources included), sorted.
std::vector<NodeId> hop_neighborhood(const Topology& t, std::span<const NodeId> sources, std::size_t radius);

}  // namespace rcw
