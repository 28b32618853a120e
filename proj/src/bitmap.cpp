#include "rcw/bitmap.hpp"

#include <bit>

namespace rcw {

AdjacencyBitmap::AdjacencyBitmap(std::size_t num_nodes) : num_nodes_(num_nodes) {
    std::size_t pairs = num_nodes < 2 ? 0 : num_nodes * (num_nodes - 1) / 2;
    words_.assign((pairs + 63) / 64, 0);
}

AdjacencyBitmap::AdjacencyBitmap(const Graph& g) : AdjacencyBitmap(g.num_nodes(), g.edges()) {}

AdjacencyBitmap::AdjacencyBitmap(std::size_t num_nodes, std::span<const NodePair> edges)
    : AdjacencyBitmap(num_nodes) {
    for (const auto& p : edges) {
        auto i = index(p);
        words_[i >> 6] |= std::uint64_t{1} << (i & 63);
    }
}

void AdjacencyBitmap::flip(NodePair p) {
    if (p.is_loop() || p.v >= num_nodes_) throw ParameterError("bitmap flip out of range");
    auto i = index(p);
    words_[i >> 6] ^= std::uint64_t{1} << (i & 63);
    log_.push_back(p);
}

void AdjacencyBitmap::restore(Checkpoint token) {
    while (log_.size() > token) {
        auto i = index(log_.back());
        words_[i >> 6] ^= std::uint64_t{1} << (i & 63);
        log_.pop_back();
    }
}

AdjacencyBitmap::Checkpoint AdjacencyBitmap::apply(const Disturbance& d, const Witness* protect) {
    check_budget(d, num_nodes_);
    if (protect) {
        for (const auto& p : d.flips) {
            if (protect->is_frozen(p)) throw ParameterError("disturbance flips a frozen witness pair");
        }
    }
    auto token = checkpoint();
    for (const auto& p : d.flips) flip(p);
    return token;
}

std::vector<NodePair> AdjacencyBitmap::edges() const {
    std::vector<NodePair> out;
    std::size_t base = 0;
    for (NodeId u = 0; u + 1 < num_nodes_; ++u) {
        std::size_t row = num_nodes_ - u - 1;
        for (std::size_t j = 0; j < row;) {
            std::size_t bit = base + j;
            std::uint64_t word = words_[bit >> 6] >> (bit & 63);
            if (word == 0) {
                j += 64 - (bit & 63);
                continue;
            }
            auto skip = static_cast<std::size_t>(std::countr_zero(word));
            j += skip;
            if (j < row) out.emplace_back(u, static_cast<NodeId>(u + 1 + j));
            ++j;
        }
        base += row;
    }
    return out;
}

std::size_t AdjacencyBitmap::count() const {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
}

}  // namespace rcw
