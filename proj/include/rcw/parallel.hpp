#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <set>
#include <unordered_set>
#include <vector>

#include "rcw/executor.hpp"
#include "rcw/generate.hpp"
#include "rcw/partition.hpp"

namespace rcw {

/// One unit of local verification: test node `node`, disturbances of exactly
/// `j` pairs, restricted to the pair universe owned by fragment `fragment_id`.
struct WorkerTask {
    std::size_t fragment_id = 0;
    Witness witness_snapshot;
    NodeId node = 0;
    std::size_t j = 1;
    const Partition* partition = nullptr;
};

struct LocalVerdict {
    /// NotRobust only with a counterexample that breaks the node on the whole
    /// graph; Robust means no local disproof was found.
    VerifyOutcome outcome;
    /// Digests of every disturbance checked, and the flip sets themselves when
    /// the universe is small enough to keep them (guards against collisions).
    std::vector<std::uint64_t> digests;
    std::vector<std::vector<NodePair>> checked;
};

/// Pairs of the fragment's local node set (owned plus replicated) that a
/// disturbance may flip. A pair belongs to the lowest-index fragment whose
/// local set holds both endpoints, so fragment universes are disjoint.
std::vector<NodePair> fragment_universe(const Partition& part, std::size_t fragment, const Graph& g,
                                        const Witness& w);

/// Exhaustive search over the fragment universe (APPNP: policy search with
/// flips restricted to the fragment's nodes). Any disproof found here is a
/// disproof for the whole graph. Stops early once `abort` is raised.
LocalVerdict para_verify_rcw(const WorkerTask& task, const Configuration& c,
                             const std::atomic<bool>* abort = nullptr);

/// Coordinator bookkeeping for one test node: digests verified so far
/// (cumulative over j) and the deltas each worker reported.
struct SyncState {
    std::unordered_set<std::uint64_t> verified;
    std::set<std::vector<NodePair>> exact;
    bool keep_exact = true;

    void merge(std::size_t worker, const LocalVerdict& delta);
    bool seen(const std::vector<NodePair>& flips) const;
    std::vector<std::vector<std::uint64_t>> per_worker_deltas;
    std::size_t coordinator_verified = 0;
};

/// Verification backend for the generator that spreads work over a pool:
/// APPNP runs its per-class searches on the workers; other models run the
/// fragment-local rounds first, then the coordinator verifies the remaining
/// disturbances (skipping synchronized digests) in parallel batches.
class ParallelBackend final : public VerificationBackend {
public:
    ParallelBackend(const Partition& part, WorkerPool& pool) : part_(part), pool_(pool) {}

    VerifyOutcome verify_node(const Configuration& c, NodeId v) override;
    Executor& executor() override { return pool_; }

    std::size_t coordinator_verified() const { return coordinator_verified_; }
    std::size_t rounds() const { return rounds_; }

private:
    VerifyOutcome bruteforce(const Configuration& c, NodeId v);

    const Partition& part_;
    WorkerPool& pool_;
    std::size_t coordinator_verified_ = 0;
    std::size_t rounds_ = 0;
};

/// Parallel expand-verify generation. Produces the same witness and the same
/// expansion/verification counts as robo_gexp.
GenerationResult para_robo_gexp(const Graph& g, const std::vector<NodeId>& test_nodes, const GnnModel& m,
                                std::size_t k, std::optional<std::size_t> b, std::size_t workers,
                                std::uint64_t seed);

}  // namespace rcw
