#include "rcw/metrics.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <set>
#include <string>

#include "rcw/random.hpp"

namespace rcw {

namespace {

template <class T>
std::size_t symmetric_difference_size(const std::vector<T>& a, const std::vector<T>& b) {
    std::size_t count = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++count;
            ++ia;
        } else if (*ib < *ia) {
            ++count;
            ++ib;
        } else {
            ++ia;
            ++ib;
        }
    }
    return count + static_cast<std::size_t>(std::distance(ia, a.end()) + std::distance(ib, b.end()));
}

void check_test_nodes(const Graph& g, const std::vector<NodeId>& test_nodes) {
    if (test_nodes.empty()) throw ParameterError("fidelity needs at least one test node");
    for (NodeId v : test_nodes) {
        if (v >= g.num_nodes()) throw ParameterError("test node " + std::to_string(v) + " out of range");
    }
}

Eigen::MatrixXd logits_on(const GnnModel& m, const Graph& g, const std::vector<NodePair>& edges) {
    return forward(m, Topology::from_pairs(g.num_nodes(), edges), g.features());
}

std::vector<NodePair> remainder_edges(const Graph& g, const Witness& ws) {
    for (const auto& p : ws.edges) {
        if (!g.has_edge(p)) throw IntegrityError("witness edge absent from host graph");
    }
    std::vector<NodePair> rest;
    std::set_difference(g.edges().begin(), g.edges().end(), ws.edges.begin(), ws.edges.end(),
                        std::back_inserter(rest));
    return rest;
}

double label_change_rate(const Graph& g, const std::vector<NodeId>& test_nodes, const GnnModel& m,
                         const Eigen::MatrixXd& view, bool undefined_view) {
    Eigen::MatrixXd base = forward(m, g.topology(), g.features());
    std::size_t changed = 0;
    for (NodeId v : test_nodes) {
        Label l = argmax_label(base.row(v));
        Label got = undefined_view ? std::nullopt : argmax_label(view.row(v));
        if (got != l) ++changed;
    }
    return static_cast<double>(changed) / static_cast<double>(test_nodes.size());
}

}  // namespace

double normalized_ged_unchecked(const Witness& a, const Witness& b) {
    std::size_t ged = symmetric_difference_size(a.nodes, b.nodes) + symmetric_difference_size(a.edges, b.edges);
    std::size_t size = std::max(a.size(), b.size());
    if (size == 0) return 0.0;
    return static_cast<double>(ged) / static_cast<double>(size);
}

double normalized_ged(const Witness& a, const Witness& b) {
    if (a.host_checksum != b.host_checksum) throw IncompatibleError("witnesses come from different host graphs");
    return normalized_ged_unchecked(a, b);
}

double fidelity_plus(const Graph& g, const Witness& ws, const std::vector<NodeId>& test_nodes, const GnnModel& m) {
    check_test_nodes(g, test_nodes);
    // G minus G is empty: inference there is undefined, which differs from l.
    bool whole = covers_graph(ws, g);
    Eigen::MatrixXd view = whole ? Eigen::MatrixXd() : logits_on(m, g, remainder_edges(g, ws));
    return label_change_rate(g, test_nodes, m, view, whole);
}

double fidelity_minus(const Graph& g, const Witness& ws, const std::vector<NodeId>& test_nodes, const GnnModel& m) {
    check_test_nodes(g, test_nodes);
    for (const auto& p : ws.edges) {
        if (!g.has_edge(p)) throw IntegrityError("witness edge absent from host graph");
    }
    return label_change_rate(g, test_nodes, m, logits_on(m, g, ws.edges), false);
}

EvalReport evaluate(const Graph& g, const Witness& ws, const std::vector<NodeId>& test_nodes, const GnnModel& m,
                    const Witness* other) {
    EvalReport rep;
    rep.fidelity_plus = fidelity_plus(g, ws, test_nodes, m);
    rep.fidelity_minus = fidelity_minus(g, ws, test_nodes, m);
    rep.witness_size = ws.size();
    if (other) rep.normalized_ged = normalized_ged(ws, *other);

    bool whole = covers_graph(ws, g);
    Eigen::MatrixXd base = forward(m, g.topology(), g.features());
    Eigen::MatrixXd wit = logits_on(m, g, ws.edges);
    Eigen::MatrixXd rest = whole ? Eigen::MatrixXd() : logits_on(m, g, remainder_edges(g, ws));
    for (NodeId v : test_nodes) {
        rep.per_node_detail.push_back({v, argmax_label(base.row(v)), argmax_label(wit.row(v)),
                                       whole ? Label{} : argmax_label(rest.row(v))});
    }
    return rep;
}

std::pair<Graph, Disturbance> inject_disturbance(const Graph& g, std::size_t k, double removal_bias,
                                                 std::uint64_t seed) {
    if (!(removal_bias >= 0.0 && removal_bias <= 1.0)) throw ParameterError("removal bias must lie in [0,1]");
    const std::uint64_t n = g.num_nodes();
    const std::uint64_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
    if (k > pairs) {
        throw ParameterError("cannot flip " + std::to_string(k) + " distinct pairs in a graph with " +
                             std::to_string(pairs) + " pairs");
    }
    Rng rng(seed);
    std::vector<NodePair> edges = g.edges();  // shrinking pool of removable edges
    const std::uint64_t non_edges = pairs - g.num_edges();
    std::set<NodePair> inserted;
    std::vector<NodePair> flips;
    while (flips.size() < k) {
        bool removal = rng.uniform() < removal_bias;
        if (edges.empty()) removal = false;
        if (inserted.size() == non_edges) removal = true;
        if (removal) {
            std::size_t i = rng.below(edges.size());
            flips.push_back(edges[i]);
            edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(i));
            continue;
        }
        std::uint64_t remaining = non_edges - inserted.size();
        if (remaining * 4 >= pairs) {
            while (true) {
                NodeId u = static_cast<NodeId>(rng.below(n));
                NodeId v = static_cast<NodeId>(rng.below(n));
                NodePair p(u, v);
                if (u == v || g.has_edge(p) || inserted.contains(p)) continue;
                inserted.insert(p);
                flips.push_back(p);
                break;
            }
        } else {
            // Dense graph: pick the r-th remaining non-edge directly.
            std::uint64_t r = rng.below(remaining);
            for (NodeId u = 0; u < n; ++u) {
                bool found = false;
                for (NodeId v = u + 1; v < n; ++v) {
                    NodePair p(u, v);
                    if (g.has_edge(p) || inserted.contains(p)) continue;
                    if (r-- == 0) {
                        inserted.insert(p);
                        flips.push_back(p);
                        found = true;
                        break;
                    }
                }
                if (found) break;
            }
        }
    }
    std::sort(flips.begin(), flips.end());
    Graph out = g.with_edges(toggle_pairs(g.edges(), flips));
    return {std::move(out), Disturbance{flips, k, std::nullopt}};
}

Graph generate_bahouse(const BAHouseParams& p) {
    if (p.base_nodes < 1 || p.attachment < 1) throw ParameterError("BAHouse needs base nodes and attachment >= 1");
    Rng rng(p.seed);
    std::vector<NodePair> edges;
    std::vector<NodeId> ends;  // every edge endpoint, for preferential sampling
    auto link = [&](NodeId a, NodeId b) {
        edges.emplace_back(a, b);
        ends.push_back(a);
        ends.push_back(b);
    };
    const std::size_t core = std::min(p.base_nodes, p.attachment + 1);
    for (NodeId a = 0; a < core; ++a) {
        for (NodeId b = a + 1; b < core; ++b) link(a, b);
    }
    for (NodeId x = static_cast<NodeId>(core); x < p.base_nodes; ++x) {
        std::vector<NodeId> targets;
        while (targets.size() < p.attachment) {
            NodeId t = ends[rng.below(ends.size())];
            if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
        }
        std::sort(targets.begin(), targets.end());
        for (NodeId t : targets) link(t, x);
    }

    const std::size_t n = p.base_nodes + 5 * p.motifs;
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < p.motifs; ++i) {
        NodeId apex = static_cast<NodeId>(p.base_nodes + 5 * i);
        NodeId m1 = apex + 1, m2 = apex + 2, g1 = apex + 3, g2 = apex + 4;
        edges.emplace_back(apex, m1);
        edges.emplace_back(apex, m2);
        edges.emplace_back(m1, m2);
        edges.emplace_back(m1, g1);
        edges.emplace_back(m2, g2);
        edges.emplace_back(g1, g2);
        edges.emplace_back(g1, static_cast<NodeId>(rng.below(p.base_nodes)));
        labels[apex] = 1;
        labels[m1] = labels[m2] = 2;
        labels[g1] = labels[g2] = 3;
    }

    Topology t = Topology::from_pairs(n, edges);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), kDegreeBuckets);
    for (NodeId u = 0; u < n; ++u) x(u, static_cast<Eigen::Index>(std::min(t.degree(u), kDegreeBuckets - 1))) = 1.0;
    return Graph(n, std::move(edges), std::move(x), std::move(labels), 4);
}

GnnModel fit_appnp_readout(const Graph& g, double alpha, double ridge, double isolated_weight) {
    if (!g.labels()) throw ParameterError("readout fitting needs node labels");
    const auto& labels = *g.labels();
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    const int classes = g.num_classes();
    Eigen::MatrixXd h = solve_propagation(g.topology(), alpha, (1.0 - alpha) * g.features());

    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];
    Eigen::VectorXd w(n);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        int l = labels[static_cast<std::size_t>(i)];
        w[i] = 1.0 / static_cast<double>(counts[l]);
        y(i, l) = 1.0;
    }
    Eigen::MatrixXd hw = w.asDiagonal() * h;
    Eigen::MatrixXd gram = h.transpose() * hw;
    Eigen::MatrixXd rhs = hw.transpose() * y;
    if (isolated_weight > 0.0) {
        const Eigen::MatrixXd& x = g.features();
        Eigen::MatrixXd target = Eigen::MatrixXd::Zero(n, classes);
        target.col(0).setOnes();
        double scale = isolated_weight / static_cast<double>(n);
        gram += scale * x.transpose() * x;
        rhs += scale * x.transpose() * target;
    }
    gram.diagonal().array() += ridge;
    Eigen::MatrixXd theta = gram.ldlt().solve(rhs);
    return GnnModel(AppnpModel{std::move(theta), alpha});
}

GnnModel bahouse_reference_model(const Graph& g) { return fit_appnp_readout(g, 0.3); }

}  // namespace rcw
