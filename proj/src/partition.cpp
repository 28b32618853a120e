#include "rcw/partition.hpp"

#include "rcw/random.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <string>

namespace rcw {

namespace {

constexpr std::uint32_t kUnowned = std::numeric_limits<std::uint32_t>::max();
constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> bfs_distances(const Topology& t, std::span<const NodeId> sources) {
    std::vector<std::size_t> dist(t.num_nodes(), kInf);
    std::deque<NodeId> queue;
    for (NodeId s : sources) {
        if (dist[s] != 0) {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        NodeId x = queue.front();
        queue.pop_front();
        for (NodeId y : t.neighbors(x)) {
            if (dist[y] == kInf) {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    return dist;
}

}  // namespace

std::vector<NodeId> Partition::local_nodes(std::size_t i) const {
    std::vector<NodeId> out;
    out.reserve(fragments[i].size() + replicated[i].size());
    std::merge(fragments[i].begin(), fragments[i].end(), replicated[i].begin(), replicated[i].end(),
               std::back_inserter(out));
    return out;
}

std::vector<NodeId> hop_neighborhood(const Topology& t, std::span<const NodeId> sources, std::size_t radius) {
    auto dist = bfs_distances(t, sources);
    std::vector<NodeId> out;
    for (NodeId x = 0; x < t.num_nodes(); ++x) {
        if (dist[x] <= radius) out.push_back(x);
    }
    return out;
}

Partition partition_graph(const Graph& g, std::size_t n, std::size_t hop_radius, std::uint64_t seed) {
    const std::size_t num_nodes = g.num_nodes();
    if (n < 1 || n > num_nodes) {
        throw ParameterError("partition count " + std::to_string(n) + " must be in [1, " + std::to_string(num_nodes) + "]");
    }
    const Topology& t = g.topology();
    Rng rng(seed);

    std::vector<NodeId> seeds;
    NodeId start = 0;
    for (NodeId x = 1; x < num_nodes; ++x) {
        if (t.degree(x) < t.degree(start)) start = x;
    }
    seeds.push_back(start);
    while (seeds.size() < n) {
        auto dist = bfs_distances(t, seeds);
        std::size_t best = 0;
        std::vector<NodeId> ties;
        for (NodeId x = 0; x < num_nodes; ++x) {
            if (dist[x] == 0) continue;
            if (ties.empty() || dist[x] > best) {
                best = dist[x];
                ties.assign(1, x);
            } else if (dist[x] == best) {
                ties.push_back(x);
            }
        }
        seeds.push_back(ties[ties.size() == 1 ? 0 : rng.below(ties.size())]);
    }

    Partition part;
    part.hop_radius = hop_radius;
    part.owner.assign(num_nodes, kUnowned);
    part.fragments.assign(n, {});
    std::vector<std::deque<NodeId>> frontier(n);
    auto claim = [&](std::size_t f, NodeId x) {
        part.owner[x] = static_cast<std::uint32_t>(f);
        part.fragments[f].push_back(x);
        for (NodeId y : t.neighbors(x)) {
            if (part.owner[y] == kUnowned) frontier[f].push_back(y);
        }
    };
    for (std::size_t f = 0; f < n; ++f) claim(f, seeds[f]);

    std::size_t owned = n;
    NodeId scan = 0;
    while (owned < num_nodes) {
        std::size_t grow = n;
        for (std::size_t f = 0; f < n; ++f) {
            while (!frontier[f].empty() && part.owner[frontier[f].front()] != kUnowned) frontier[f].pop_front();
            if (frontier[f].empty()) continue;
            if (grow == n || part.fragments[f].size() < part.fragments[grow].size()) grow = f;
        }
        if (grow == n) {
            // Remaining nodes sit in components without a seed.
            while (part.owner[scan] != kUnowned) ++scan;
            std::size_t smallest = 0;
            for (std::size_t f = 1; f < n; ++f) {
                if (part.fragments[f].size() < part.fragments[smallest].size()) smallest = f;
            }
            claim(smallest, scan);
            ++owned;
            continue;
        }
        NodeId x = frontier[grow].front();
        frontier[grow].pop_front();
        claim(grow, x);
        ++owned;
    }

    part.replicated.assign(n, {});
    for (std::size_t f = 0; f < n; ++f) {
        auto& owned_nodes = part.fragments[f];
        std::sort(owned_nodes.begin(), owned_nodes.end());
        std::vector<NodeId> border;
        for (NodeId x : owned_nodes) {
            for (NodeId y : t.neighbors(x)) {
                if (part.owner[y] != f) {
                    border.push_back(x);
                    break;
                }
            }
        }
        if (border.empty() || hop_radius == 0) continue;
        for (NodeId y : hop_neighborhood(t, border, hop_radius)) {
            if (part.owner[y] != f) part.replicated[f].push_back(y);
        }
    }
    return part;
}

}  // namespace rcw
