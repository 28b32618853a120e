#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rcw/graph.hpp"

namespace rcw {

/// Pairs a disturbance may flip against `w`, in lexicographic order: every
/// unordered pair over V that is neither a witness edge nor a protected
/// pair. Empty when the witness is the whole graph (nothing left to disturb).
std::vector<NodePair> candidate_pairs(const Graph& g, const Witness& w);
std::vector<NodePair> all_pairs(std::size_t num_nodes);

/// C(n, j), saturating at UINT64_MAX.
std::uint64_t choose(std::uint64_t n, std::uint64_t j);

/// Streams every size-j subset of `universe` (lexicographic on the pair
/// order of `universe`) in which no node appears more than `b` times.
class DisturbanceEnumerator {
public:
    DisturbanceEnumerator(std::vector<NodePair> universe, std::size_t j, std::optional<std::size_t> b = {});

    /// Writes the next subset into `out`; false when exhausted.
    bool next(std::vector<NodePair>& out);

private:
    bool fits(std::size_t i) const;
    void use(std::size_t i, int delta);

    std::vector<NodePair> universe_;
    std::size_t j_;
    std::optional<std::size_t> b_;
    std::vector<std::size_t> idx_;
    std::vector<std::size_t> usage_;
    std::size_t depth_ = 0;
    std::size_t cursor_ = 0;
    bool done_ = false;
};

/// Convenience wrapper collecting the whole stream (tests, small instances).
std::vector<Disturbance> enumerate_disturbances(const std::vector<NodePair>& universe, std::size_t j,
                                                std::optional<std::size_t> b = {});

/// 64-bit digest of a sorted flip set.
std::uint64_t disturbance_digest(std::vector<NodePair> flips);

}  // namespace rcw
