#include "rcw/disturbance.hpp"

#include <algorithm>
#include <limits>

namespace rcw {

std::vector<NodePair> all_pairs(std::size_t num_nodes) {
    std::vector<NodePair> out;
    out.reserve(num_nodes < 2 ? 0 : num_nodes * (num_nodes - 1) / 2);
    for (NodeId u = 0; u < num_nodes; ++u) {
        for (NodeId v = u + 1; v < num_nodes; ++v) out.emplace_back(u, v);
    }
    return out;
}

std::vector<NodePair> candidate_pairs(const Graph& g, const Witness& w) {
    if (covers_graph(w, g)) return {};
    std::vector<NodePair> out;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        for (NodeId v = u + 1; v < g.num_nodes(); ++v) {
            NodePair p(u, v);
            if (!w.is_frozen(p)) out.push_back(p);
        }
    }
    return out;
}

std::uint64_t choose(std::uint64_t n, std::uint64_t j) {
    if (j > n) return 0;
    j = std::min(j, n - j);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= j; ++i) {
        std::uint64_t num = n - j + i;
        if (result > std::numeric_limits<std::uint64_t>::max() / num) return std::numeric_limits<std::uint64_t>::max();
        result = result * num / i;
    }
    return result;
}

DisturbanceEnumerator::DisturbanceEnumerator(std::vector<NodePair> universe, std::size_t j,
                                             std::optional<std::size_t> b)
    : universe_(std::move(universe)), j_(j), b_(b), idx_(j, 0) {
    if (j_ == 0) throw ParameterError("disturbance size j must be at least 1");
    NodeId max_node = 0;
    for (const auto& p : universe_) max_node = std::max(max_node, p.v);
    usage_.assign(universe_.empty() ? 0 : max_node + 1, 0);
    done_ = universe_.size() < j_;
}

bool DisturbanceEnumerator::fits(std::size_t i) const {
    if (!b_) return true;
    const auto& p = universe_[i];
    return usage_[p.u] < *b_ && usage_[p.v] < *b_;
}

void DisturbanceEnumerator::use(std::size_t i, int delta) {
    const auto& p = universe_[i];
    usage_[p.u] = static_cast<std::size_t>(static_cast<long long>(usage_[p.u]) + delta);
    usage_[p.v] = static_cast<std::size_t>(static_cast<long long>(usage_[p.v]) + delta);
}

bool DisturbanceEnumerator::next(std::vector<NodePair>& out) {
    if (done_) return false;
    const std::size_t n = universe_.size();
    for (;;) {
        if (depth_ == j_) {
            --depth_;
            use(idx_[depth_], -1);
            cursor_ = idx_[depth_] + 1;
        }
        bool placed = false;
        for (std::size_t i = cursor_; i + (j_ - depth_) <= n; ++i) {
            if (fits(i)) {
                use(i, +1);
                idx_[depth_++] = i;
                cursor_ = i + 1;
                placed = true;
                break;
            }
        }
        if (!placed) {
            if (depth_ == 0) {
                done_ = true;
                return false;
            }
            --depth_;
            use(idx_[depth_], -1);
            cursor_ = idx_[depth_] + 1;
            continue;
        }
        if (depth_ == j_) {
            out.resize(j_);
            for (std::size_t d = 0; d < j_; ++d) out[d] = universe_[idx_[d]];
            return true;
        }
    }
}

std::vector<Disturbance> enumerate_disturbances(const std::vector<NodePair>& universe, std::size_t j,
                                                std::optional<std::size_t> b) {
    std::vector<Disturbance> out;
    DisturbanceEnumerator it(universe, j, b);
    std::vector<NodePair> flips;
    while (it.next(flips)) out.push_back(Disturbance{flips, j, b});
    return out;
}

std::uint64_t disturbance_digest(std::vector<NodePair> flips) {
    std::sort(flips.begin(), flips.end());
    // splitmix64 over the packed pairs
    std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ flips.size();
    for (const auto& p : flips) {
        std::uint64_t x = h ^ ((std::uint64_t{p.u} << 32) | p.v);
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        h = x ^ (x >> 31);
    }
    return h;
}

}  // namespace rcw
