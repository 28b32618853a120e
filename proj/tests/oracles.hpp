#pragma once

// Dense reference implementations used as independent oracles. Nothing here
// calls into the library's inference, enumeration or verification code.

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "rcw/graph.hpp"
#include "rcw/model.hpp"
#include "rcw/random.hpp"

namespace oracle {

using rcw::NodeId;
using rcw::NodePair;

inline Eigen::MatrixXd adjacency(std::size_t n, const std::vector<NodePair>& edges) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (auto p : edges) a(p.u, p.v) = a(p.v, p.u) = 1.0;
    return a;
}

/// (1-alpha) (I - alpha D^-1 (A+I))^-1 by dense LU.
inline Eigen::MatrixXd pagerank_matrix(const Eigen::MatrixXd& a, double alpha) {
    const auto n = a.rows();
    Eigen::MatrixXd ah = a + Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd p = ah;
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) /= ah.row(i).sum();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - alpha * p;
    return (1.0 - alpha) * m.fullPivLu().inverse();
}

inline Eigen::MatrixXd appnp_logits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, const Eigen::MatrixXd& theta,
                                    double alpha) {
    return pagerank_matrix(a, alpha) * x * theta;
}

inline Eigen::MatrixXd gcn_logits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x,
                                  const std::vector<rcw::GcnLayer>& layers) {
    const auto n = a.rows();
    Eigen::MatrixXd ah = a + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd d = ah.rowwise().sum().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd norm = d.asDiagonal() * ah * d.asDiagonal();
    Eigen::MatrixXd h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = norm * h * layers[i].weight;
        if (i + 1 < layers.size() && layers[i].activation == rcw::Activation::relu) h = h.cwiseMax(0.0);
    }
    return h;
}

inline Eigen::MatrixXd logits(const rcw::GnnModel& m, const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
    if (m.kind() == rcw::ModelKind::appnp) return appnp_logits(a, x, m.appnp().theta, m.appnp().alpha);
    return gcn_logits(a, x, m.gcn().layers);
}

inline int argmax(const Eigen::RowVectorXd& row) {
    int best = 0;
    for (Eigen::Index c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = static_cast<int>(c);
    }
    return best;
}

inline int label(const rcw::GnnModel& m, const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, NodeId v) {
    return argmax(logits(m, a, x).row(v));
}

/// Witness/remainder/disturbance bookkeeping, all on dense matrices.
struct Instance {
    const rcw::Graph& g;
    const rcw::GnnModel& m;
    const rcw::Witness& w;
    std::vector<NodeId> test_nodes;

    bool whole() const {
        return w.nodes.size() == g.num_nodes() && w.edges.size() == g.num_edges();
    }
    Eigen::MatrixXd full() const { return adjacency(g.num_nodes(), g.edges()); }
    Eigen::MatrixXd witness_view() const { return adjacency(g.num_nodes(), w.edges); }
    Eigen::MatrixXd remainder() const {
        Eigen::MatrixXd a = full();
        for (auto p : w.edges) a(p.u, p.v) = a(p.v, p.u) = 0.0;
        return a;
    }

    /// Pairs a disturbance may flip: all pairs minus witness edges and
    /// protected pairs; none for the whole-graph witness.
    std::vector<NodePair> universe() const {
        std::vector<NodePair> out;
        if (whole()) return out;
        std::set<NodePair> frozen(w.edges.begin(), w.edges.end());
        frozen.insert(w.protected_pairs.begin(), w.protected_pairs.end());
        for (NodeId u = 0; u < g.num_nodes(); ++u) {
            for (NodeId v = u + 1; v < g.num_nodes(); ++v) {
                if (!frozen.count({u, v})) out.emplace_back(u, v);
            }
        }
        return out;
    }

    bool factual() const {
        Eigen::MatrixXd a = full(), aw = witness_view();
        for (NodeId v : test_nodes) {
            if (label(m, a, g.features(), v) != label(m, aw, g.features(), v)) return false;
        }
        return true;
    }

    bool counterfactual() const {
        if (!factual()) return false;
        if (whole()) return true;
        Eigen::MatrixXd a = full(), ar = remainder();
        for (NodeId v : test_nodes) {
            if (label(m, a, g.features(), v) == label(m, ar, g.features(), v)) return false;
        }
        return true;
    }

    /// CW property of every test node with `flips` toggled on G and on G
    /// minus the witness.
    bool holds_under(const std::vector<NodePair>& flips) const {
        Eigen::MatrixXd a = full(), ar = remainder();
        Eigen::MatrixXd ad = a, ard = ar;
        for (auto p : flips) {
            ad(p.u, p.v) = ad(p.v, p.u) = 1.0 - ad(p.u, p.v);
            ard(p.u, p.v) = ard(p.v, p.u) = 1.0 - ard(p.u, p.v);
        }
        Eigen::MatrixXd z = logits(m, a, g.features());
        Eigen::MatrixXd zd = logits(m, ad, g.features());
        Eigen::MatrixXd zr = logits(m, ard, g.features());
        for (NodeId v : test_nodes) {
            int l = argmax(z.row(v));
            if (argmax(zd.row(v)) != l || argmax(zr.row(v)) == l) return false;
        }
        return true;
    }
};

/// Calls f on every subset of `universe` with 1..k elements in which no node
/// appears more than b times. Stops when f returns false.
inline void for_each_disturbance(const std::vector<NodePair>& universe, std::size_t k, std::optional<std::size_t> b,
                                 const std::function<bool(const std::vector<NodePair>&)>& f) {
    std::vector<NodePair> cur;
    std::vector<std::size_t> use(1024, 0);
    bool stop = false;
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t left) {
        if (left == 0) {
            if (!f(cur)) stop = true;
            return;
        }
        for (std::size_t i = start; i < universe.size() && !stop; ++i) {
            auto p = universe[i];
            if (b && (use[p.u] >= *b || use[p.v] >= *b)) continue;
            ++use[p.u], ++use[p.v];
            cur.push_back(p);
            rec(i + 1, left - 1);
            cur.pop_back();
            --use[p.u], --use[p.v];
        }
    };
    for (std::size_t j = 1; j <= k && !stop; ++j) rec(0, j);
}

/// Exhaustive k-RCW check; returns the first breaking disturbance if any.
struct BruteVerdict {
    bool cw = false;
    bool robust = false;
    std::optional<std::vector<NodePair>> counterexample;
};

inline BruteVerdict brute_force(const Instance& inst, std::size_t k, std::optional<std::size_t> b) {
    BruteVerdict out;
    out.cw = inst.counterfactual();
    if (!out.cw) return out;
    out.robust = true;
    for_each_disturbance(inst.universe(), k, b, [&](const std::vector<NodePair>& flips) {
        if (inst.holds_under(flips)) return true;
        out.robust = false;
        out.counterexample = flips;
        return false;
    });
    return out;
}

inline std::vector<NodePair> random_edges(rcw::Rng& rng, std::size_t n, double p) {
    std::vector<NodePair> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            if (rng.uniform() < p) edges.emplace_back(u, v);
        }
    }
    return edges;
}

inline Eigen::MatrixXd random_features(rcw::Rng& rng, std::size_t n, std::size_t f) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    }
    return x;
}

/// Node 0 weakly prefers class 0 on its own; nodes 1..3 are its neighbours
/// and carry strong class-1 features; the remaining nodes are weak noise.
/// Removing 0's support edges flips it back to class 0, so node 0 has
/// non-trivial counterfactual witnesses.
inline rcw::Graph planted_graph(std::uint64_t seed, std::size_t min_nodes = 9) {
    rcw::Rng rng(seed);
    std::size_t n = min_nodes + rng.below(3);
    std::vector<NodePair> edges;
    for (NodeId s = 1; s <= 3; ++s) edges.emplace_back(0, s);
    for (NodeId u = 1; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            if (rng.uniform() < 0.25) edges.emplace_back(u, v);
        }
    }
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index s = 1; s <= 3; ++s) x(s, 1) = 2.0 + rng.uniform();
    for (Eigen::Index i = 4; i < x.rows(); ++i) x(i, 0) = 0.3 * rng.uniform();
    x(0, 0) = 1.0;
    return rcw::Graph(n, std::move(edges), std::move(x), std::nullopt, 2);
}

inline rcw::GnnModel planted_appnp() { return rcw::GnnModel(rcw::AppnpModel{Eigen::MatrixXd::Identity(2, 2), 0.6}); }

inline rcw::GnnModel planted_gcn() {
    return rcw::GnnModel(rcw::GcnModel{{{Eigen::MatrixXd::Identity(2, 2), rcw::Activation::identity}}});
}

}  // namespace oracle
