#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcw/graph.hpp"

namespace rcw {

/// One bit per unordered node pair (upper triangle, row-major) with an undo
/// log. Single writer: give each concurrent task its own bitmap.
class AdjacencyBitmap {
public:
    using Checkpoint = std::size_t;

    AdjacencyBitmap() = default;
    explicit AdjacencyBitmap(std::size_t num_nodes);
    explicit AdjacencyBitmap(const Graph& g);
    AdjacencyBitmap(std::size_t num_nodes, std::span<const NodePair> edges);

    std::size_t num_nodes() const { return num_nodes_; }

    bool test(NodePair p) const {
        auto i = index(p);
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }
    void flip(NodePair p);

    Checkpoint checkpoint() const { return log_.size(); }
    /// Undoes every flip made after `token`.
    void restore(Checkpoint token);
    /// Undoes every logged flip and clears the log.
    void restore() { restore(0); }

    /// Validates `d` against its budgets and the frozen pairs of `protect`
    /// (when given) before touching any bit, then flips every pair.
    Checkpoint apply(const Disturbance& d, const Witness* protect = nullptr);

    /// Pairs flipped since construction (or the last restore()).
    std::span<const NodePair> delta() const { return log_; }

    std::vector<NodePair> edges() const;
    Topology topology() const { return Topology::from_pairs(num_nodes_, edges()); }
    std::size_t count() const;

    friend bool operator==(const AdjacencyBitmap& a, const AdjacencyBitmap& b) {
        return a.num_nodes_ == b.num_nodes_ && a.words_ == b.words_;
    }

private:
    std::size_t index(NodePair p) const {
        std::size_t u = p.u;
        return u * num_nodes_ - u * (u + 1) / 2 + (p.v - u - 1);
    }

    std::size_t num_nodes_ = 0;
    std::vector<std::uint64_t> words_;
    std::vector<NodePair> log_;
};

}  // namespace rcw
