#include "rcw/parallel.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "rcw/bitmap.hpp"
#include "rcw/disturbance.hpp"

namespace rcw {

namespace {

// Flip sets are stored alongside digests below this universe size.
constexpr std::size_t kExactLimit = std::size_t{1} << 16;
constexpr std::size_t kBatch = 4096;

struct Membership {
    std::vector<std::vector<char>> local;  // fragment -> node -> in local set

    explicit Membership(const Partition& part, std::size_t n) : local(part.size(), std::vector<char>(n, 0)) {
        for (std::size_t f = 0; f < part.size(); ++f) {
            for (NodeId x : part.local_nodes(f)) local[f][x] = 1;
        }
    }

    std::size_t owner(NodePair p) const {
        for (std::size_t f = 0; f < local.size(); ++f) {
            if (local[f][p.u] && local[f][p.v]) return f;
        }
        return local.size();
    }
};

// Label checks for one node on bitmap overlays of G and of G minus the witness.
struct Checker {
    const ViewOracle& oracle;
    NodeId v;
    Label l;
    AdjacencyBitmap full;
    AdjacencyBitmap rest;

    Checker(const ViewOracle& o, NodeId node)
        : oracle(o),
          v(node),
          l(o.base_label(node)),
          full(o.config().graph),
          rest(o.config().graph.num_nodes(), o.remainder_edges()) {}

    bool breaks(const std::vector<NodePair>& flips) {
        for (const auto& p : flips) {
            full.flip(p);
            rest.flip(p);
        }
        bool broken = oracle.labels_on(full.topology())[v] != l || oracle.labels_on(rest.topology())[v] == l;
        full.restore();
        rest.restore();
        return broken;
    }
};

}  // namespace

void SyncState::merge(std::size_t worker, const LocalVerdict& delta) {
    if (per_worker_deltas.size() <= worker) per_worker_deltas.resize(worker + 1);
    auto& mine = per_worker_deltas[worker];
    mine.insert(mine.end(), delta.digests.begin(), delta.digests.end());
    verified.insert(delta.digests.begin(), delta.digests.end());
    if (keep_exact) exact.insert(delta.checked.begin(), delta.checked.end());
}

bool SyncState::seen(const std::vector<NodePair>& flips) const {
    if (!verified.contains(disturbance_digest(flips))) return false;
    return !keep_exact || exact.contains(flips);
}

std::vector<NodePair> fragment_universe(const Partition& part, std::size_t fragment, const Graph& g,
                                        const Witness& w) {
    if (fragment >= part.size()) throw ParameterError("fragment index out of range");
    if (covers_graph(w, g)) return {};
    Membership member(part, g.num_nodes());
    auto nodes = part.local_nodes(fragment);
    std::vector<NodePair> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            NodePair p(nodes[i], nodes[j]);
            if (!w.is_frozen(p) && member.owner(p) == fragment) out.push_back(p);
        }
    }
    return out;
}

LocalVerdict para_verify_rcw(const WorkerTask& task, const Configuration& c, const std::atomic<bool>* abort) {
    if (!task.partition) throw ParameterError("worker task has no partition");
    LocalVerdict out;
    Configuration local{c.graph, c.model, task.witness_snapshot, {task.node}, c.k, c.b, c.base_logits};
    ViewOracle oracle(local);
    if (oracle.whole_graph() || c.k == 0) return out;

    if (c.model.kind() == ModelKind::appnp) {
        const auto& appnp = c.model.appnp();
        const std::size_t b = std::min(c.b.value_or(c.k), c.k);
        const int l = *oracle.base_label(task.node);
        const Eigen::MatrixXd z = c.graph.features() * appnp.theta;
        PriOptions po;
        po.restrict_to = task.partition->local_nodes(task.fragment_id);
        for (PriSide side : {PriSide::factual, PriSide::counterfactual}) {
            po.side = side;
            for (int cls = 0; cls < c.model.num_classes(); ++cls) {
                if (cls == l || (abort && abort->load())) continue;
                Eigen::VectorXd r = side == PriSide::factual ? Eigen::VectorXd(z.col(cls) - z.col(l))
                                                             : Eigen::VectorXd(z.col(l) - z.col(cls));
                auto res = pri(local, task.node, r, b, {}, po);
                if (res.counterexample) {
                    out.outcome = {VerifyStatus::not_robust, res.counterexample, task.node};
                    return out;
                }
            }
        }
        return out;
    }

    auto universe = fragment_universe(*task.partition, task.fragment_id, c.graph, task.witness_snapshot);
    const bool keep = universe.size() < kExactLimit;
    Checker check(oracle, task.node);
    DisturbanceEnumerator en(universe, task.j, c.b);
    std::vector<NodePair> flips;
    while (en.next(flips)) {
        if (abort && abort->load()) break;
        out.digests.push_back(disturbance_digest(flips));
        if (keep) out.checked.push_back(flips);
        if (check.breaks(flips)) {
            out.outcome = {VerifyStatus::not_robust, Disturbance{flips, c.k, c.b}, task.node};
            break;
        }
    }
    return out;
}

VerifyOutcome ParallelBackend::verify_node(const Configuration& c, NodeId v) {
    Configuration one{c.graph, c.model, c.witness, {v}, c.k, c.b, c.base_logits};
    if (c.model.kind() == ModelKind::appnp) {
        ++rounds_;
        AppnpVerifyOptions opts;
        opts.executor = &pool_;
        return verify_rcw_appnp(one, opts);
    }
    return bruteforce(one, v);
}

VerifyOutcome ParallelBackend::bruteforce(const Configuration& c, NodeId v) {
    ViewOracle oracle(c);
    if (!oracle.is_factual(v)) return {VerifyStatus::not_witness, std::nullopt, v};
    if (!oracle.is_counterfactual(v)) return {VerifyStatus::not_counterfactual, std::nullopt, v};
    if (c.k == 0 || oracle.whole_graph()) return {};

    auto universe = candidate_pairs(c.graph, c.witness);
    std::uint64_t total = 0;
    for (std::size_t j = 1; j <= c.k; ++j) {
        std::uint64_t cj = choose(universe.size(), j);
        total = cj > std::numeric_limits<std::uint64_t>::max() - total ? std::numeric_limits<std::uint64_t>::max()
                                                                        : total + cj;
    }
    BruteForceOptions limits;
    if (total > limits.max_disturbances) {
        throw CapacityError("exhaustive search needs up to " + std::to_string(total) + " disturbances, cap is " +
                            std::to_string(limits.max_disturbances));
    }

    const std::size_t workers = pool_.size();
    SyncState sync;
    sync.keep_exact = universe.size() < kExactLimit;
    std::vector<Checker> checkers;
    checkers.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) checkers.emplace_back(oracle, v);

    for (std::size_t j = 1; j <= c.k; ++j) {
        ++rounds_;
        // Local rounds: worker w takes fragments w, w + workers, ...
        std::atomic<bool> abort{false};
        std::vector<std::vector<LocalVerdict>> local(workers);
        try {
            pool_.run(workers, [&](std::size_t w) {
                for (std::size_t f = w; f < part_.size(); f += workers) {
                    WorkerTask task{f, c.witness, v, j, &part_};
                    local[w].push_back(para_verify_rcw(task, c, &abort));
                    if (!local[w].back().outcome.robust()) {
                        abort.store(true);
                        return;
                    }
                }
            });
        } catch (const std::exception& e) {
            throw Error("worker failure while verifying node " + std::to_string(v) + " at j=" + std::to_string(j) +
                        ": " + e.what());
        }
        for (std::size_t w = 0; w < workers; ++w) {
            for (const auto& verdict : local[w]) {
                if (!verdict.outcome.robust()) return verdict.outcome;
                sync.merge(w, verdict);
            }
        }

        // Coordinator round over the rest of the universe, batched.
        DisturbanceEnumerator en(universe, j, c.b);
        std::vector<std::vector<NodePair>> batch;
        std::vector<NodePair> flips;
        bool more = true;
        while (more) {
            batch.clear();
            while (batch.size() < kBatch && (more = en.next(flips))) {
                if (!sync.seen(flips)) batch.push_back(flips);
            }
            if (batch.empty()) break;
            sync.coordinator_verified += batch.size();
            std::vector<std::size_t> first(workers, batch.size());
            pool_.run(workers, [&](std::size_t w) {
                for (std::size_t i = w; i < batch.size(); i += workers) {
                    if (abort.load()) return;
                    if (checkers[w].breaks(batch[i])) {
                        first[w] = i;
                        abort.store(true);
                        return;
                    }
                }
            });
            std::size_t hit = *std::min_element(first.begin(), first.end());
            if (hit < batch.size()) {
                coordinator_verified_ += sync.coordinator_verified;
                return {VerifyStatus::not_robust, Disturbance{batch[hit], c.k, c.b}, v};
            }
        }
    }
    coordinator_verified_ += sync.coordinator_verified;
    return {};
}

GenerationResult para_robo_gexp(const Graph& g, const std::vector<NodeId>& test_nodes, const GnnModel& m,
                                std::size_t k, std::optional<std::size_t> b, std::size_t workers,
                                std::uint64_t seed) {
    if (workers < 1) throw ParameterError("worker count must be at least 1");
    if (g.num_nodes() == 0) throw ParameterError("empty graph");
    auto part = partition_graph(g, std::min(workers, g.num_nodes()), std::max(k, m.depth()), seed);
    WorkerPool pool(workers);
    ParallelBackend backend(part, pool);
    auto result = robo_gexp(g, test_nodes, m, k, b, backend);
    result.stats.workers = workers;
    result.stats.coordinator_verified = backend.coordinator_verified();
    result.stats.rounds = backend.rounds();
    return result;
}

}  // namespace rcw
