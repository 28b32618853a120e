#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rcw/executor.hpp"
#include "rcw/graph.hpp"
#include "rcw/model.hpp"
#include "rcw/verify.hpp"

namespace rcw {

struct GenerationStats {
    std::size_t expansions = 0;
    /// Verifier calls (one per test node checked).
    std::size_t verifications = 0;
    double wall_time = 0.0;  // seconds
    // Filled by the parallel generator.
    std::size_t workers = 1;
    std::size_t coordinator_verified = 0;
    std::size_t rounds = 0;
};

struct GenerationResult {
    Witness witness;
    /// Set when generation fell back to the whole graph.
    bool trivial = false;
    GenerationStats stats;
};

/// Grows `ws` by the pairs that most threaten v. APPNP: the flips of the most
/// threatening class found by the policy search (factual side first, then the
/// counterfactual side once the factual side is certified). Other models: a
/// single-flip probe of v's logit margin on G and on G minus the witness, over
/// pairs near v. Pairs that are edges of G become witness edges, the rest
/// become protected pairs. At most max(k, frozen pairs / 4) pairs are added;
/// `ws` is returned unchanged when nothing threatens v.
Witness expand(NodeId v, const Witness& ws, const Configuration& c, Executor* ex = nullptr);

/// Verifies one test node against a configuration. The generator only uses
/// the verdict, so any sound and complete-for-its-model backend produces the
/// same witness.
class VerificationBackend {
public:
    virtual ~VerificationBackend() = default;
    virtual VerifyOutcome verify_node(const Configuration& c, NodeId v) = 0;
    virtual Executor& executor() = 0;
};

class SequentialBackend final : public VerificationBackend {
public:
    VerifyOutcome verify_node(const Configuration& c, NodeId v) override;
    Executor& executor() override { return sequential_executor(); }
};

/// Expand-verify generation: starts from the test nodes alone, then for each
/// test node in order expands until it verifies, and finally re-verifies every
/// test node (expanding the first failure again). When expansion finds no
/// threatening pair the witness takes the edges nearest the node instead.
/// Falls back to the whole graph when growth stalls, when it would cover G,
/// or after |V| + |E| growth steps.
GenerationResult robo_gexp(const Graph& g, const std::vector<NodeId>& test_nodes, const GnnModel& m, std::size_t k,
                           std::optional<std::size_t> b = {});
GenerationResult robo_gexp(const Graph& g, const std::vector<NodeId>& test_nodes, const GnnModel& m, std::size_t k,
                           std::optional<std::size_t> b, VerificationBackend& backend);

}  // namespace rcw
