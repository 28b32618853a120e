#include "rcw/graph.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <string>

namespace rcw {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv_u64(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xFFu;
        h *= kFnvPrime;
    }
    return h;
}

void sort_unique(std::vector<NodePair>& pairs) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
}

}  // namespace

Topology Topology::from_pairs(std::size_t num_nodes, std::span<const NodePair> pairs) {
    Topology t;
    t.offsets_.assign(num_nodes + 1, 0);
    for (const auto& p : pairs) {
        ++t.offsets_[p.u + 1];
        ++t.offsets_[p.v + 1];
    }
    for (std::size_t i = 0; i < num_nodes; ++i) t.offsets_[i + 1] += t.offsets_[i];
    t.targets_.resize(t.offsets_.back());
    std::vector<std::size_t> cursor(t.offsets_.begin(), t.offsets_.end() - 1);
    for (const auto& p : pairs) {
        t.targets_[cursor[p.u]++] = p.v;
        t.targets_[cursor[p.v]++] = p.u;
    }
    for (std::size_t u = 0; u < num_nodes; ++u) {
        std::sort(t.targets_.begin() + static_cast<std::ptrdiff_t>(t.offsets_[u]),
                  t.targets_.begin() + static_cast<std::ptrdiff_t>(t.offsets_[u + 1]));
    }
    return t;
}

Topology Topology::from_rows(const std::vector<std::vector<NodeId>>& rows) {
    Topology t;
    t.offsets_.assign(rows.size() + 1, 0);
    for (std::size_t u = 0; u < rows.size(); ++u) t.offsets_[u + 1] = t.offsets_[u] + rows[u].size();
    t.targets_.reserve(t.offsets_.back());
    for (const auto& row : rows) {
        auto begin = t.targets_.size();
        t.targets_.insert(t.targets_.end(), row.begin(), row.end());
        std::sort(t.targets_.begin() + static_cast<std::ptrdiff_t>(begin), t.targets_.end());
    }
    return t;
}

bool Topology::has(NodeId u, NodeId v) const {
    if (u >= num_nodes() || v >= num_nodes()) return false;
    auto row = neighbors(u);
    return std::binary_search(row.begin(), row.end(), v);
}

Graph::Graph(std::size_t num_nodes, std::vector<NodePair> edges, Eigen::MatrixXd features,
             std::optional<std::vector<int>> labels, int num_classes)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes) {
    for (const auto& p : edges_) {
        if (p.is_loop()) throw IntegrityError("self-loop on node " + std::to_string(p.u));
        if (p.v >= num_nodes_) throw IntegrityError("edge endpoint " + std::to_string(p.v) + " out of range");
    }
    sort_unique(edges_);
    if (static_cast<std::size_t>(features_.rows()) != num_nodes_) {
        throw IntegrityError("feature rows (" + std::to_string(features_.rows()) + ") != num_nodes (" +
                             std::to_string(num_nodes_) + ")");
    }
    if (num_classes_ < 1) throw IntegrityError("num_classes must be positive");
    if (labels_) {
        if (labels_->size() != num_nodes_) throw IntegrityError("label count != num_nodes");
        for (int l : *labels_) {
            if (l < 0 || l >= num_classes_) throw IntegrityError("label " + std::to_string(l) + " out of range");
        }
    }
    topology_ = Topology::from_pairs(num_nodes_, edges_);

    std::uint64_t h = fnv_u64(kFnvOffset, num_nodes_);
    for (const auto& p : edges_) h = fnv_u64(fnv_u64(h, p.u), p.v);
    h = fnv_u64(h, static_cast<std::uint64_t>(features_.cols()));
    for (Eigen::Index i = 0; i < features_.rows(); ++i) {
        for (Eigen::Index j = 0; j < features_.cols(); ++j) {
            h = fnv_u64(h, std::bit_cast<std::uint64_t>(features_(i, j)));
        }
    }
    checksum_ = h;
}

Graph Graph::with_edges(std::vector<NodePair> edges) const {
    return Graph(num_nodes_, std::move(edges), features_, labels_, num_classes_);
}

bool Witness::contains_node(NodeId v) const { return std::binary_search(nodes.begin(), nodes.end(), v); }

bool Witness::contains_edge(NodePair p) const { return std::binary_search(edges.begin(), edges.end(), p); }

bool Witness::is_frozen(NodePair p) const {
    return contains_edge(p) || std::binary_search(protected_pairs.begin(), protected_pairs.end(), p);
}

Witness make_witness(const Graph& g, std::vector<NodeId> nodes, std::vector<NodePair> edges,
                     std::vector<NodePair> protected_pairs) {
    Witness w;
    sort_unique(edges);
    for (const auto& p : edges) {
        if (!g.has_edge(p)) {
            throw IntegrityError("witness edge (" + std::to_string(p.u) + "," + std::to_string(p.v) +
                                 ") is not an edge of the host graph");
        }
        nodes.push_back(p.u);
        nodes.push_back(p.v);
    }
    for (NodeId v : nodes) {
        if (v >= g.num_nodes()) throw IntegrityError("witness node " + std::to_string(v) + " out of range");
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    sort_unique(protected_pairs);
    for (const auto& p : protected_pairs) {
        if (p.is_loop() || p.v >= g.num_nodes() || g.has_edge(p)) {
            throw IntegrityError("protected pair must be a non-edge of the host graph");
        }
    }
    w.nodes = std::move(nodes);
    w.edges = std::move(edges);
    w.protected_pairs = std::move(protected_pairs);
    w.host_checksum = g.checksum();
    return w;
}

Witness whole_graph_witness(const Graph& g) {
    std::vector<NodeId> nodes(g.num_nodes());
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<NodeId>(i);
    return make_witness(g, std::move(nodes), g.edges());
}

void validate_witness(const Witness& w, const Graph& g) {
    if (w.host_checksum != g.checksum()) throw IntegrityError("witness host checksum does not match graph");
    if (!std::is_sorted(w.nodes.begin(), w.nodes.end()) || !std::is_sorted(w.edges.begin(), w.edges.end())) {
        throw IntegrityError("witness node/edge lists must be sorted");
    }
    for (NodeId v : w.nodes) {
        if (v >= g.num_nodes()) throw IntegrityError("witness node out of range");
    }
    for (const auto& p : w.edges) {
        if (!g.has_edge(p)) throw IntegrityError("witness edge absent from host graph");
        if (!w.contains_node(p.u) || !w.contains_node(p.v)) throw IntegrityError("witness edge endpoint not in node set");
    }
    for (const auto& p : w.protected_pairs) {
        if (p.is_loop() || p.v >= g.num_nodes() || g.has_edge(p)) {
            throw IntegrityError("protected pair must be a non-edge of the host graph");
        }
    }
}

bool covers_graph(const Witness& w, const Graph& g) {
    return w.nodes.size() == g.num_nodes() && w.edges.size() == g.num_edges();
}

bool within_budget(std::span<const NodePair> flips, std::size_t k, std::optional<std::size_t> b) {
    if (flips.size() > k) return false;
    if (!b) return true;
    std::map<NodeId, std::size_t> usage;
    for (const auto& p : flips) {
        if (++usage[p.u] > *b || ++usage[p.v] > *b) return false;
    }
    return true;
}

void check_budget(const Disturbance& d, std::size_t num_nodes) {
    std::vector<NodePair> sorted = d.flips;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ParameterError("disturbance repeats a node pair");
    }
    for (const auto& p : sorted) {
        if (p.is_loop()) throw ParameterError("disturbance contains a self-pair");
        if (p.v >= num_nodes) throw ParameterError("disturbance pair out of range");
    }
    if (sorted.size() > d.k) {
        throw ParameterError("disturbance flips " + std::to_string(sorted.size()) + " pairs, budget k=" +
                             std::to_string(d.k));
    }
    if (d.b && !within_budget(sorted, d.k, d.b)) {
        throw ParameterError("disturbance exceeds per-node budget b=" + std::to_string(*d.b));
    }
}

std::vector<NodePair> toggle_pairs(std::span<const NodePair> edges, std::span<const NodePair> flips) {
    std::vector<NodePair> sorted_flips(flips.begin(), flips.end());
    std::sort(sorted_flips.begin(), sorted_flips.end());
    std::vector<NodePair> out;
    out.reserve(edges.size() + sorted_flips.size());
    std::set_symmetric_difference(edges.begin(), edges.end(), sorted_flips.begin(), sorted_flips.end(),
                                  std::back_inserter(out));
    return out;
}

Graph subtract(const Graph& g, const Witness& w) {
    std::vector<NodePair> rest;
    rest.reserve(g.num_edges());
    for (const auto& p : w.edges) {
        if (!g.has_edge(p)) throw IntegrityError("witness edge absent from host graph");
    }
    std::set_difference(g.edges().begin(), g.edges().end(), w.edges.begin(), w.edges.end(),
                        std::back_inserter(rest));
    return g.with_edges(std::move(rest));
}

Topology witness_topology(const Graph& g, const Witness& w) { return Topology::from_pairs(g.num_nodes(), w.edges); }

Topology remainder_topology(const Graph& g, const Witness& w) {
    std::vector<NodePair> rest;
    rest.reserve(g.num_edges());
    std::set_difference(g.edges().begin(), g.edges().end(), w.edges.begin(), w.edges.end(),
                        std::back_inserter(rest));
    return Topology::from_pairs(g.num_nodes(), rest);
}

}  // namespace rcw
