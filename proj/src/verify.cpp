#include "rcw/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rcw/bitmap.hpp"
#include "rcw/disturbance.hpp"
#include "rcw/executor.hpp"
#include "rcw/partition.hpp"

namespace rcw {

const char* to_string(VerifyStatus s) {
    switch (s) {
        case VerifyStatus::not_witness: return "NotWitness";
        case VerifyStatus::not_counterfactual: return "NotCounterfactual";
        case VerifyStatus::not_robust: return "NotRobust";
        case VerifyStatus::robust: return "Robust";
    }
    return "?";
}

void validate_configuration(const Configuration& c) {
    const Graph& g = c.graph;
    c.model.check_compatible(g.feature_dim());
    if (c.witness.host_checksum != g.checksum()) throw IncompatibleError("witness was built for a different graph");
    validate_witness(c.witness, g);
    for (NodeId v : c.test_nodes) {
        if (v >= g.num_nodes()) throw ParameterError("test node " + std::to_string(v) + " out of range");
        if (!c.witness.contains_node(v)) {
            throw ParameterError("test node " + std::to_string(v) + " is not a witness node");
        }
    }
    if (c.b && *c.b < 1) throw ParameterError("local budget b must be at least 1");
}

std::shared_ptr<const Eigen::MatrixXd> compute_base_logits(const GnnModel& m, const Graph& g) {
    return std::make_shared<const Eigen::MatrixXd>(forward(m, g.topology(), g.features()));
}

namespace {

std::vector<Label> row_labels(const Eigen::MatrixXd& logits) {
    std::vector<Label> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_label(logits.row(i));
    return out;
}

}  // namespace

ViewOracle::ViewOracle(const Configuration& c) : c_(c) {
    validate_configuration(c);
    base_ = c.base_logits ? c.base_logits : compute_base_logits(c.model, c.graph);
    whole_ = covers_graph(c.witness, c.graph);
    witness_labels_ = labels_on(witness_topology(c.graph, c.witness));
    if (whole_) {
        remainder_ = Topology::from_pairs(c.graph.num_nodes(), {});
        remainder_labels_.assign(c.graph.num_nodes(), std::nullopt);
    } else {
        std::set_difference(c.graph.edges().begin(), c.graph.edges().end(), c.witness.edges.begin(),
                            c.witness.edges.end(), std::back_inserter(remainder_edges_));
        remainder_ = Topology::from_pairs(c.graph.num_nodes(), remainder_edges_);
        remainder_labels_ = labels_on(remainder_);
    }
}

std::vector<Label> ViewOracle::labels_on(const Topology& t) const {
    return row_labels(forward(c_.model, t, c_.graph.features()));
}

Label ViewOracle::base_label(NodeId v) const { return argmax_label(base_->row(v)); }
Label ViewOracle::witness_label(NodeId v) const { return witness_labels_.at(v); }
Label ViewOracle::remainder_label(NodeId v) const { return remainder_labels_.at(v); }

std::vector<Label> ViewOracle::disturbed_labels(std::span<const NodePair> flips) const {
    auto edges = toggle_pairs(c_.graph.edges(), flips);
    return labels_on(Topology::from_pairs(c_.graph.num_nodes(), edges));
}

std::vector<Label> ViewOracle::disturbed_remainder_labels(std::span<const NodePair> flips) const {
    if (whole_) return std::vector<Label>(c_.graph.num_nodes(), std::nullopt);
    auto edges = toggle_pairs(remainder_edges_, flips);
    return labels_on(Topology::from_pairs(c_.graph.num_nodes(), edges));
}

bool ViewOracle::holds_under(NodeId v, std::span<const NodePair> flips) const {
    Label l = base_label(v);
    if (witness_label(v) != l) return false;
    if (disturbed_labels(flips)[v] != l) return false;
    return disturbed_remainder_labels(flips)[v] != l;
}

namespace {

std::optional<VerifyOutcome> check_cw(const ViewOracle& o) {
    for (NodeId v : o.config().test_nodes) {
        if (!o.is_factual(v)) return VerifyOutcome{VerifyStatus::not_witness, std::nullopt, v};
    }
    for (NodeId v : o.config().test_nodes) {
        if (!o.is_counterfactual(v)) return VerifyOutcome{VerifyStatus::not_counterfactual, std::nullopt, v};
    }
    return std::nullopt;
}

}  // namespace

bool verify_witness(const Configuration& c) {
    ViewOracle o(c);
    return std::all_of(c.test_nodes.begin(), c.test_nodes.end(), [&](NodeId v) { return o.is_factual(v); });
}

bool verify_cw(const Configuration& c) {
    ViewOracle o(c);
    return std::all_of(c.test_nodes.begin(), c.test_nodes.end(), [&](NodeId v) { return o.is_counterfactual(v); });
}

VerifyOutcome verify_rcw_bruteforce(const Configuration& c, const BruteForceOptions& opts) {
    ViewOracle o(c);
    if (auto fail = check_cw(o)) return *fail;
    if (c.k == 0 || o.whole_graph()) return {};

    auto universe = candidate_pairs(c.graph, c.witness);
    std::uint64_t total = 0;
    for (std::size_t j = 1; j <= c.k; ++j) {
        std::uint64_t cj = choose(universe.size(), j);
        total = cj > std::numeric_limits<std::uint64_t>::max() - total ? std::numeric_limits<std::uint64_t>::max()
                                                                        : total + cj;
    }
    if (total > opts.max_disturbances) {
        throw CapacityError("exhaustive search needs up to " + std::to_string(total) + " disturbances, cap is " +
                            std::to_string(opts.max_disturbances));
    }

    const std::size_t n = c.graph.num_nodes();
    AdjacencyBitmap full(c.graph);
    AdjacencyBitmap rest(n, o.remainder_edges());
    std::vector<Label> base(n);
    for (NodeId v : c.test_nodes) base[v] = o.base_label(v);

    std::vector<NodePair> flips;
    for (std::size_t j = 1; j <= c.k; ++j) {
        DisturbanceEnumerator en(universe, j, c.b);
        while (en.next(flips)) {
            for (const auto& p : flips) {
                full.flip(p);
                rest.flip(p);
            }
            auto g_labels = o.labels_on(full.topology());
            auto r_labels = o.labels_on(rest.topology());
            full.restore();
            rest.restore();
            for (NodeId v : c.test_nodes) {
                if (g_labels[v] != base[v] || r_labels[v] == base[v]) {
                    return {VerifyStatus::not_robust, Disturbance{flips, c.k, c.b}, v};
                }
            }
        }
    }
    return {};
}

MarginReport worst_case_margin(const Configuration& c, NodeId v, const Disturbance& candidate) {
    const auto& appnp = c.model.appnp();
    validate_configuration(c);
    if (v >= c.graph.num_nodes()) throw ParameterError("node " + std::to_string(v) + " out of range");
    check_budget(candidate, c.graph.num_nodes());

    auto base = c.base_logits ? c.base_logits : compute_base_logits(c.model, c.graph);
    Label l = argmax_label(base->row(v));
    auto edges = toggle_pairs(c.graph.edges(), candidate.flips);
    Eigen::VectorXd pi = pagerank_vector(Topology::from_pairs(c.graph.num_nodes(), edges), v, appnp.alpha);
    Eigen::MatrixXd z = c.graph.features() * appnp.theta;
    Eigen::RowVectorXd weighted = pi.transpose() * z;

    MarginReport rep;
    rep.node = v;
    rep.base_label = *l;
    rep.worst = std::numeric_limits<double>::infinity();
    rep.argmin_class = *l;
    rep.witness_disturbance = candidate;
    for (int cls = 0; cls < c.model.num_classes(); ++cls) {
        if (cls == *l) continue;
        double m = weighted[*l] - weighted[cls];
        rep.per_class_margins[cls] = m;
        if (m < rep.worst) {
            rep.worst = m;
            rep.argmin_class = cls;
        }
    }
    return rep;
}

double flip_score(const Topology& t, const Eigen::VectorXd& x, const Eigen::VectorXd& r, double alpha, NodeId u,
                  NodeId target) {
    double sign = t.has(u, target) ? -1.0 : 1.0;
    return sign * (x[target] - (x[u] - r[u]) / alpha);
}

namespace {

struct Scored {
    NodeId node;
    double value;
};

// Symmetric difference of two sorted rows.
std::vector<NodeId> toggle_row(std::span<const NodeId> base, const std::vector<NodeId>& flips) {
    std::vector<NodeId> out;
    out.reserve(base.size() + flips.size());
    std::set_symmetric_difference(base.begin(), base.end(), flips.begin(), flips.end(), std::back_inserter(out));
    return out;
}

class PolicySearch {
public:
    PolicySearch(const Configuration& c, NodeId v, const Eigen::VectorXd& r, std::size_t b, const PriOptions& opts)
        : c_(c), v_(v), r_(r), b_(b), opts_(opts), alpha_(c.model.appnp().alpha), n_(c.graph.num_nodes()) {
        if (static_cast<std::size_t>(r.size()) != n_) throw ParameterError("drive vector length must equal node count");
        if (v >= n_) throw ParameterError("node " + std::to_string(v) + " out of range");
        if (opts.side == PriSide::factual) {
            base_edges_ = c.graph.edges();
        } else if (!covers_graph(c.witness, c.graph)) {
            std::set_difference(c.graph.edges().begin(), c.graph.edges().end(), c.witness.edges.begin(),
                                c.witness.edges.end(), std::back_inserter(base_edges_));
        }
        base_ = Topology::from_pairs(n_, base_edges_);

        frozen_.assign(n_, {});
        auto freeze = [&](const NodePair& p) {
            frozen_[p.u].push_back(p.v);
            frozen_[p.v].push_back(p.u);
        };
        for (const auto& p : c.witness.edges) freeze(p);
        for (const auto& p : c.witness.protected_pairs) freeze(p);
        for (auto& row : frozen_) std::sort(row.begin(), row.end());

        allowed_.assign(n_, !covers_graph(c.witness, c.graph));
        if (opts.restrict_to) {
            std::vector<char> mask(n_, 0);
            for (NodeId x : *opts.restrict_to) {
                if (x < n_) mask[x] = 1;
            }
            for (std::size_t x = 0; x < n_; ++x) allowed_[x] = allowed_[x] && mask[x];
        }
        if (opts.prune_radius) {
            std::vector<char> mask(n_, 0);
            NodeId src[] = {v};
            for (NodeId x : hop_neighborhood(base_, src, *opts.prune_radius)) mask[x] = 1;
            for (std::size_t x = 0; x < n_; ++x) allowed_[x] = allowed_[x] && mask[x];
        }
        policy_.assign(n_, {});
        base_label_ = argmax_label((c.base_logits ? *c.base_logits : *compute_base_logits(c.model, c.graph)).row(v));
    }

    bool flippable(NodeId u, NodeId x) const {
        return u != x && allowed_[u] && allowed_[x] && !std::binary_search(frozen_[u].begin(), frozen_[u].end(), x);
    }

    void seed(const Disturbance& e0) {
        for (const auto& p : e0.flips) {
            if (p.is_loop() || p.v >= n_ || !flippable(p.u, p.v)) continue;
            for (NodeId end : {p.u, p.v}) {
                auto& row = policy_[end];
                NodeId other = p.other(end);
                if (row.size() < b_ && !std::binary_search(row.begin(), row.end(), other)) {
                    row.insert(std::lower_bound(row.begin(), row.end(), other), other);
                }
            }
        }
    }

    PriResult run() {
        PriResult out;
        std::size_t cap = opts_.max_iterations;
        if (cap == 0) {
            std::size_t frozen = 0;
            for (const auto& row : frozen_) frozen += row.size();
            cap = std::max<std::size_t>(1, n_ * (n_ - 1) / 2 - frozen / 2);
        }
        bool stale = true;
        while (true) {
            evaluate();
            stale = false;
            ++out.iterations;
            auto step = improve();
            out.objective = (1.0 - alpha_) * x_[v_];
            out.upper_bound = out.objective + step.residual;
            if (opts_.stop_on_counterexample) {
                if (auto ce = find_counterexample()) {
                    out.counterexample = std::move(ce);
                    break;
                }
            }
            if (opts_.stop_when_certified && out.upper_bound < -kMarginTolerance) break;
            if (opts_.stop_when_uncertifiable && out.objective >= -kMarginTolerance) break;
            if (!step.switched) {
                out.converged = true;
                break;
            }
            if (out.iterations >= cap) break;
            policy_ = std::move(next_);
            stale = true;
        }
        if (stale) evaluate();
        out.policy = policy_;
        out.disturbance = Disturbance{projection(), c_.k, b_};
        out.threats = rank(out.disturbance.flips);
        return out;
    }

private:
    Topology current() const {
        std::vector<std::vector<NodeId>> rows(n_);
        for (NodeId u = 0; u < n_; ++u) rows[u] = toggle_row(base_.neighbors(u), policy_[u]);
        return Topology::from_rows(rows);
    }

    void evaluate() {
        topo_ = current();
        Eigen::MatrixXd rhs = r_;
        x_ = solve_propagation(topo_, alpha_, rhs).col(0);
    }

    struct Step {
        double residual = 0.0;
        bool switched = false;
    };

    // Best-response step into next_. The residual alpha * max_u (best average
    // - current average) bounds how far the evaluated policy is from optimal;
    // a node only switches on a strict improvement.
    Step improve() {
        std::vector<NodeId> order(n_);
        std::iota(order.begin(), order.end(), NodeId{0});
        std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return x_[a] > x_[b]; });

        Step step;
        std::vector<char> in_row(n_, 0);
        std::vector<Scored> adds, rems;
        next_ = policy_;
        for (NodeId u = 0; u < n_; ++u) {
            if (!allowed_[u]) continue;
            auto row = base_.neighbors(u);
            double sum0 = x_[u];
            for (NodeId y : row) {
                sum0 += x_[y];
                in_row[y] = 1;
            }
            const double cnt0 = static_cast<double>(row.size() + 1);

            rems.clear();
            for (NodeId y : row) {
                if (flippable(u, y)) rems.push_back({y, x_[y]});
            }
            std::size_t keep = std::min(b_, rems.size());
            std::partial_sort(rems.begin(), rems.begin() + static_cast<std::ptrdiff_t>(keep), rems.end(),
                              [](const Scored& a, const Scored& b) {
                                  return a.value != b.value ? a.value < b.value : a.node < b.node;
                              });
            rems.resize(keep);

            adds.clear();
            for (NodeId y : order) {
                if (adds.size() >= b_) break;
                if (in_row[y] || !flippable(u, y)) continue;
                adds.push_back({y, x_[y]});
            }
            for (NodeId y : row) in_row[y] = 0;

            double best = sum0 / cnt0;
            std::size_t best_a = 0, best_d = 0;
            double add_sum = 0.0;
            for (std::size_t a = 0; a <= adds.size(); ++a) {
                if (a > 0) add_sum += adds[a - 1].value;
                double rem_sum = 0.0;
                for (std::size_t d = 0; a + d <= b_ && d <= rems.size(); ++d) {
                    if (d > 0) rem_sum += rems[d - 1].value;
                    if (cnt0 + a - d < 1.0) continue;
                    double val = (sum0 + add_sum - rem_sum) / (cnt0 + static_cast<double>(a) - static_cast<double>(d));
                    if (val > best) {
                        best = val;
                        best_a = a;
                        best_d = d;
                    }
                }
            }

            auto cur_row = topo_.neighbors(u);
            double cur = x_[u];
            for (NodeId y : cur_row) cur += x_[y];
            cur /= static_cast<double>(cur_row.size() + 1);

            step.residual = std::max(step.residual, alpha_ * (best - cur));
            if (best > cur + 1e-13 * (1.0 + std::abs(cur))) {
                std::vector<NodeId> targets;
                for (std::size_t i = 0; i < best_a; ++i) targets.push_back(adds[i].node);
                for (std::size_t i = 0; i < best_d; ++i) targets.push_back(rems[i].node);
                std::sort(targets.begin(), targets.end());
                next_[u] = std::move(targets);
                step.switched = true;
            }
        }
        return step;
    }

    std::vector<NodePair> projection() const {
        std::vector<NodePair> out;
        for (NodeId u = 0; u < n_; ++u) {
            for (NodeId y : policy_[u]) out.emplace_back(u, y);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool chose(NodeId u, NodeId y) const { return std::binary_search(policy_[u].begin(), policy_[u].end(), y); }

    // Threat of flipping each pair of the projection: the pi_v-weighted gain of
    // both endpoints' rows, measured on the evaluated policy.
    std::vector<std::pair<NodePair, double>> rank(const std::vector<NodePair>& pairs) const {
        std::vector<std::pair<NodePair, double>> out;
        if (pairs.empty()) return out;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        e[v_] = 1.0 - alpha_;
        Eigen::VectorXd pi = solve_propagation_transposed(topo_, alpha_, e);
        for (const auto& p : pairs) {
            double threat = 0.0;
            for (NodeId w : {p.u, p.v}) {
                NodeId o = p.other(w);
                double s = flip_score(topo_, x_, r_, alpha_, w, o);
                threat += pi[w] * (chose(w, o) ? -s : s);
            }
            out.emplace_back(p, threat);
        }
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        return out;
    }

    std::optional<Disturbance> find_counterexample() const {
        auto pairs = projection();
        if (pairs.empty()) return std::nullopt;
        std::optional<std::size_t> local = c_.b ? c_.b : std::optional<std::size_t>(b_);
        if (!within_budget(pairs, c_.k, local)) {
            std::vector<NodePair> picked;
            for (const auto& [p, threat] : rank(pairs)) {
                if (threat <= 0.0 || picked.size() >= c_.k) break;
                picked.push_back(p);
                if (!within_budget(picked, c_.k, local)) picked.pop_back();
            }
            std::sort(picked.begin(), picked.end());
            pairs = std::move(picked);
        }
        if (pairs.empty()) return std::nullopt;
        auto edges = toggle_pairs(base_edges_, pairs);
        Label got = argmax_label(forward(c_.model, Topology::from_pairs(n_, edges), c_.graph.features()).row(v_));
        bool breaks = opts_.side == PriSide::factual ? got != base_label_ : got == base_label_;
        if (!breaks) return std::nullopt;
        return Disturbance{std::move(pairs), c_.k, c_.b};
    }

    const Configuration& c_;
    NodeId v_;
    const Eigen::VectorXd& r_;
    std::size_t b_;
    PriOptions opts_;
    double alpha_;
    std::size_t n_;
    std::vector<NodePair> base_edges_;
    Topology base_;
    std::vector<std::vector<NodeId>> frozen_;
    std::vector<char> allowed_;
    std::vector<std::vector<NodeId>> policy_;
    std::vector<std::vector<NodeId>> next_;
    Label base_label_;
    Topology topo_;
    Eigen::VectorXd x_;
};

}  // namespace

PriResult pri(const Configuration& c, NodeId v, const Eigen::VectorXd& r, std::size_t b, const Disturbance& e0,
              const PriOptions& opts) {
    c.model.appnp();
    PolicySearch search(c, v, r, b, opts);
    search.seed(e0);
    return search.run();
}

VerifyOutcome verify_rcw_appnp_node(const ViewOracle& oracle, NodeId v, const AppnpVerifyOptions& opts) {
    const Configuration& c = oracle.config();
    const auto& appnp = c.model.appnp();
    if (!oracle.is_factual(v)) return {VerifyStatus::not_witness, std::nullopt, v};
    if (!oracle.is_counterfactual(v)) return {VerifyStatus::not_counterfactual, std::nullopt, v};
    if (c.k == 0 || oracle.whole_graph()) return {};

    const std::size_t b = std::min(c.b.value_or(c.k), c.k);
    const int l = *oracle.base_label(v);
    const Eigen::MatrixXd z = c.graph.features() * appnp.theta;
    std::vector<int> classes;
    for (int cls = 0; cls < c.model.num_classes(); ++cls) {
        if (cls != l) classes.push_back(cls);
    }
    Executor& ex = opts.executor ? *opts.executor : sequential_executor();
    std::vector<PriResult> results(classes.size());

    PriOptions po;
    po.prune_radius = opts.prune_radius;
    po.stop_when_certified = true;

    // Factual side: no class may overtake l on any disturbed G.
    po.side = PriSide::factual;
    po.stop_when_uncertifiable = true;
    ex.run(classes.size(), [&](std::size_t i) {
        Eigen::VectorXd r = z.col(classes[i]) - z.col(l);
        results[i] = pri(c, v, r, b, {}, po);
    });
    for (const auto& res : results) {
        if (res.counterexample) return {VerifyStatus::not_robust, res.counterexample, v};
        if (!(res.upper_bound < -kMarginTolerance)) return {VerifyStatus::not_robust, std::nullopt, v};
    }

    // Counterfactual side: some class must beat l on every disturbed G minus
    // the witness.
    po.side = PriSide::counterfactual;
    po.stop_when_uncertifiable = false;
    ex.run(classes.size(), [&](std::size_t i) {
        Eigen::VectorXd r = z.col(l) - z.col(classes[i]);
        results[i] = pri(c, v, r, b, {}, po);
    });
    for (const auto& res : results) {
        if (res.counterexample) return {VerifyStatus::not_robust, res.counterexample, v};
        if (res.upper_bound < -kMarginTolerance) return {};
    }
    return {VerifyStatus::not_robust, std::nullopt, v};
}

VerifyOutcome verify_rcw_appnp(const Configuration& c, const AppnpVerifyOptions& opts) {
    c.model.appnp();
    ViewOracle o(c);
    if (auto fail = check_cw(o)) return *fail;
    for (NodeId v : c.test_nodes) {
        auto out = verify_rcw_appnp_node(o, v, opts);
        if (!out.robust()) return out;
    }
    return {};
}

VerifyOutcome verify_rcw(const Configuration& c) {
    if (c.model.kind() == ModelKind::appnp) return verify_rcw_appnp(c);
    return verify_rcw_bruteforce(c);
}

}  // namespace rcw
