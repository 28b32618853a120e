#include "rcw/generate.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <limits>
#include <string>

#include "rcw/disturbance.hpp"
#include "rcw/partition.hpp"

namespace rcw {

namespace {

using Threat = std::pair<NodePair, double>;

void sort_threats(std::vector<Threat>& threats) {
    std::stable_sort(threats.begin(), threats.end(), [](const Threat& a, const Threat& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
}

// Support of every remainder edge for the adversary's objective under the
// final policy: how much pi^T r drops when the edge leaves G minus the witness.
std::vector<Threat> remainder_support(const Configuration& c, NodeId v, const Eigen::VectorXd& r,
                                      const PriResult& res) {
    const double alpha = c.model.appnp().alpha;
    const std::size_t n = c.graph.num_nodes();
    std::vector<std::vector<NodeId>> rows(n);
    std::vector<NodePair> rest;
    std::set_difference(c.graph.edges().begin(), c.graph.edges().end(), c.witness.edges.begin(),
                        c.witness.edges.end(), std::back_inserter(rest));
    Topology base = Topology::from_pairs(n, rest);
    for (NodeId u = 0; u < n; ++u) {
        auto row = base.neighbors(u);
        std::set_symmetric_difference(row.begin(), row.end(), res.policy[u].begin(), res.policy[u].end(),
                                      std::back_inserter(rows[u]));
    }
    Topology t = Topology::from_rows(rows);
    Eigen::VectorXd x = solve_propagation(t, alpha, Eigen::MatrixXd(r)).col(0);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    e[v] = 1.0 - alpha;
    Eigen::VectorXd pi = solve_propagation_transposed(t, alpha, e);
    std::vector<Threat> out;
    for (const auto& p : rest) {
        if (!t.has(p.u, p.v) || !t.has(p.v, p.u)) continue;
        // Removing the edge from both rows; flip_score is the gain of that removal.
        double drop = -(pi[p.u] * flip_score(t, x, r, alpha, p.u, p.v) + pi[p.v] * flip_score(t, x, r, alpha, p.v, p.u));
        if (drop > 0.0) out.emplace_back(p, drop);
    }
    return out;
}

std::vector<Threat> appnp_threats(NodeId v, const Configuration& c, Executor& ex) {
    const auto& appnp = c.model.appnp();
    const std::size_t b = std::min(c.b.value_or(c.k), c.k);
    const Eigen::MatrixXd& base = *c.base_logits;
    const int l = *argmax_label(base.row(v));
    const Eigen::MatrixXd z = c.graph.features() * appnp.theta;
    std::vector<int> classes;
    for (int cls = 0; cls < c.model.num_classes(); ++cls) {
        if (cls != l) classes.push_back(cls);
    }
    if (classes.empty()) return {};

    std::vector<PriResult> results(classes.size());
    PriOptions po;
    po.side = PriSide::factual;
    ex.run(classes.size(), [&](std::size_t i) {
        Eigen::VectorXd r = z.col(classes[i]) - z.col(l);
        results[i] = pri(c, v, r, b, {}, po);
    });
    std::size_t worst = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].upper_bound > results[worst].upper_bound) worst = i;
    }
    if (results[worst].upper_bound >= -kMarginTolerance) return results[worst].threats;

    // Factual side is safe; work on the class closest to certifying the
    // counterfactual side.
    po.side = PriSide::counterfactual;
    std::vector<Eigen::VectorXd> drives(classes.size());
    ex.run(classes.size(), [&](std::size_t i) {
        drives[i] = z.col(l) - z.col(classes[i]);
        results[i] = pri(c, v, drives[i], b, {}, po);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        if (results[i].upper_bound < results[best].upper_bound) best = i;
    }
    std::vector<Threat> threats;
    for (const auto& [p, s] : results[best].threats) {
        if (s > 0.0 && !c.graph.has_edge(p)) threats.emplace_back(p, s);
    }
    auto support = remainder_support(c, v, drives[best], results[best]);
    threats.insert(threats.end(), support.begin(), support.end());
    return threats;
}

double logit_margin(const Eigen::RowVectorXd& z, int l) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < z.size(); ++c) {
        if (c != l) best = std::max(best, z[c]);
    }
    return z[l] - best;
}

std::vector<Threat> probe_threats(NodeId v, const Configuration& c, Executor& ex) {
    const Graph& g = c.graph;
    const int l = *argmax_label(c.base_logits->row(v));
    if (c.model.num_classes() < 2) return {};
    const double m0 = logit_margin(c.base_logits->row(v), l);

    NodeId src[] = {v};
    auto ball = hop_neighborhood(g.topology(), src, c.model.depth());
    std::vector<char> near(g.num_nodes(), 0);
    for (NodeId x : ball) near[x] = 1;
    constexpr std::size_t kWideLimit = 50000;
    const bool wide = ball.size() * g.num_nodes() <= kWideLimit;

    std::vector<NodePair> cands;
    for (NodeId x : ball) {
        for (NodeId y = 0; y < g.num_nodes(); ++y) {
            if (y == x || (!wide && !near[y])) continue;
            if (near[y] && y < x) continue;  // counted from the smaller near endpoint
            NodePair p(x, y);
            if (!c.witness.is_frozen(p)) cands.push_back(p);
        }
    }
    std::sort(cands.begin(), cands.end());

    // Each flip is scored on both sides of the CW property. On G it is a
    // threat when it costs l margin. On G minus the witness, a non-edge is a
    // threat when adding it gives margin back to l; an edge of G is useful
    // when taking it into the witness (dropping it from the remainder) costs
    // l margin there. Decisive pairs rank ahead of every other pair.
    std::vector<NodePair> rest;
    std::set_difference(g.edges().begin(), g.edges().end(), c.witness.edges.begin(), c.witness.edges.end(),
                        std::back_inserter(rest));
    const Eigen::RowVectorXd zr0 = forward(c.model, Topology::from_pairs(g.num_nodes(), rest), g.features()).row(v);
    const double r0 = logit_margin(zr0, l);
    const bool rest_keeps_l = argmax_label(zr0) == l;
    std::vector<double> score(cands.size());
    std::vector<char> breaks(cands.size(), 0);
    ex.run(cands.size(), [&](std::size_t i) {
        NodePair flip[] = {cands[i]};
        const bool edge = g.has_edge(cands[i]);
        auto edges = toggle_pairs(g.edges(), flip);
        Eigen::RowVectorXd z = forward(c.model, Topology::from_pairs(g.num_nodes(), edges), g.features()).row(v);
        auto rest_edges = toggle_pairs(rest, flip);
        Eigen::RowVectorXd zr =
            forward(c.model, Topology::from_pairs(g.num_nodes(), rest_edges), g.features()).row(v);
        const double dr = logit_margin(zr, l) - r0;
        score[i] = std::max(m0 - logit_margin(z, l), edge ? -dr : dr);
        const bool rest_l = argmax_label(zr) == l;
        breaks[i] = argmax_label(z) != l || (edge ? rest_keeps_l && !rest_l : !rest_keeps_l && rest_l);
    });
    double offset = 0.0;
    for (double s : score) offset = std::max(offset, std::abs(s));
    offset += 1.0;
    std::vector<Threat> out;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (breaks[i]) {
            out.emplace_back(cands[i], score[i] + offset);
        } else if (score[i] > kMarginTolerance) {
            out.emplace_back(cands[i], score[i]);
        }
    }
    return out;
}

Witness augment(const Graph& g, const Witness& ws, const std::vector<NodePair>& pairs) {
    auto edges = ws.edges;
    auto protect = ws.protected_pairs;
    for (const auto& p : pairs) (g.has_edge(p) ? edges : protect).push_back(p);
    return make_witness(g, ws.nodes, std::move(edges), std::move(protect));
}

// Fallback growth: the edges of G nearest to v that are not yet witness
// edges, max(k, |witness edges| / 4) of them, so a hopeless instance reaches
// G in logarithmically many steps.
Witness frontier_growth(const Graph& g, const Witness& ws, NodeId v, std::size_t k) {
    const Topology& t = g.topology();
    constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(g.num_nodes(), kInf);
    std::deque<NodeId> queue{v};
    dist[v] = 0;
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
    std::vector<std::pair<std::size_t, NodePair>> ranked;
    for (const auto& p : g.edges()) {
        if (ws.contains_edge(p)) continue;
        ranked.emplace_back(std::min(dist[p.u], dist[p.v]), p);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<NodePair> pick;
    const std::size_t take = std::max<std::size_t>({1, k, ws.edges.size() / 4});
    for (std::size_t i = 0; i < ranked.size() && i < take; ++i) pick.push_back(ranked[i].second);
    return augment(g, ws, pick);
}

}  // namespace

Witness expand(NodeId v, const Witness& ws, const Configuration& c, Executor* ex) {
    if (covers_graph(ws, c.graph)) return ws;
    Configuration cw{c.graph, c.model, ws, {v}, c.k, c.b, c.base_logits};
    if (!cw.base_logits) cw.base_logits = compute_base_logits(c.model, c.graph);
    Executor& run = ex ? *ex : sequential_executor();

    auto threats = c.model.kind() == ModelKind::appnp ? appnp_threats(v, cw, run) : probe_threats(v, cw, run);
    sort_threats(threats);
    // k pairs at a time while the witness is small, then a quarter of its
    // frozen size, so that large instances need logarithmically many rounds.
    const std::size_t batch = std::max(c.k, (ws.edges.size() + ws.protected_pairs.size()) / 4);
    std::vector<NodePair> pick;
    for (const auto& [p, s] : threats) {
        if (pick.size() >= batch) break;
        if (s <= 0.0 || ws.is_frozen(p) || std::find(pick.begin(), pick.end(), p) != pick.end()) continue;
        pick.push_back(p);
    }
    if (pick.empty()) return ws;
    return augment(c.graph, ws, pick);
}

VerifyOutcome SequentialBackend::verify_node(const Configuration& c, NodeId v) {
    Configuration one{c.graph, c.model, c.witness, {v}, c.k, c.b, c.base_logits};
    return verify_rcw(one);
}

GenerationResult robo_gexp(const Graph& g, const std::vector<NodeId>& test_nodes, const GnnModel& m, std::size_t k,
                           std::optional<std::size_t> b) {
    SequentialBackend backend;
    return robo_gexp(g, test_nodes, m, k, b, backend);
}

GenerationResult robo_gexp(const Graph& g, const std::vector<NodeId>& test_nodes, const GnnModel& m, std::size_t k,
                           std::optional<std::size_t> b, VerificationBackend& backend) {
    auto start = std::chrono::steady_clock::now();
    if (k < 1) throw ParameterError("generation needs k >= 1");
    if (b && *b < 1) throw ParameterError("local budget b must be at least 1");
    if (test_nodes.empty()) throw ParameterError("no test nodes");
    m.check_compatible(g.feature_dim());

    std::vector<NodeId> order;
    for (NodeId v : test_nodes) {
        if (v >= g.num_nodes()) throw ParameterError("test node " + std::to_string(v) + " out of range");
        if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
    }
    auto base = compute_base_logits(m, g);
    for (NodeId v : order) {
        if (!argmax_label(base->row(v))) throw ParameterError("test node " + std::to_string(v) + " has no label");
    }

    GenerationResult out;
    Witness ws = make_witness(g, order, {});
    const std::size_t cap = g.num_nodes() + g.num_edges();
    std::size_t steps = 0;

    auto finish = [&](bool trivial) {
        out.trivial = trivial;
        out.witness = trivial ? whole_graph_witness(g) : ws;
        out.stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return out;
    };
    auto robust = [&](NodeId u) {
        ++out.stats.verifications;
        Configuration c{g, m, ws, {u}, k, b, base};
        return backend.verify_node(c, u).robust();
    };
    auto grow = [&](NodeId u) {
        Configuration c{g, m, ws, {u}, k, b, base};
        ++out.stats.expansions;
        Witness next = expand(u, ws, c, &backend.executor());
        // A short batch means the threats are running dry; top up with the
        // nearest edges so hopeless instances still reach G quickly.
        const std::size_t frozen = ws.edges.size() + ws.protected_pairs.size();
        if (next.edges.size() + next.protected_pairs.size() < frozen + std::max(k, frozen / 4)) {
            next = frontier_growth(g, next, u, k);
        }
        if (next == ws || covers_graph(next, g) || ++steps > cap) return false;
        ws = std::move(next);
        return true;
    };

    for (NodeId v : order) {
        while (!robust(v)) {
            if (!grow(v)) return finish(true);
        }
    }
    for (std::size_t i = 0; i < order.size();) {
        if (robust(order[i])) {
            ++i;
            continue;
        }
        if (!grow(order[i])) return finish(true);
        i = 0;
    }
    if (ws.edges.empty()) return finish(true);
    return finish(false);
}

}  // namespace rcw
