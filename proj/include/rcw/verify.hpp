#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "rcw/graph.hpp"
#include "rcw/model.hpp"

namespace rcw {

/// A verification instance: does `witness` explain every test node of
/// `graph` under `model`, robustly against k-disturbances (and the local
/// budget b when set)?
struct Configuration {
    const Graph& graph;
    const GnnModel& model;
    Witness witness;
    std::vector<NodeId> test_nodes;
    std::size_t k = 0;
    std::optional<std::size_t> b;
    /// Logits of `model` on `graph`, shared across configurations of one run.
    std::shared_ptr<const Eigen::MatrixXd> base_logits;
};

void validate_configuration(const Configuration& c);
std::shared_ptr<const Eigen::MatrixXd> compute_base_logits(const GnnModel& m, const Graph& g);

enum class VerifyStatus { not_witness, not_counterfactual, not_robust, robust };

const char* to_string(VerifyStatus s);

struct VerifyOutcome {
    VerifyStatus status = VerifyStatus::robust;
    /// A disturbance that, replayed, breaks the CW property of failing_node.
    /// The APPNP verifier may reject without one when it cannot certify.
    std::optional<Disturbance> counterexample;
    std::optional<NodeId> failing_node;

    bool robust() const { return status == VerifyStatus::robust; }
};

/// Label queries on the views a configuration needs: G, the witness view
/// (all nodes, witness edges only), G minus the witness, and disturbed
/// versions of the latter two.
class ViewOracle {
public:
    explicit ViewOracle(const Configuration& c);

    const Configuration& config() const { return c_; }
    Label base_label(NodeId v) const;
    Label witness_label(NodeId v) const;
    /// Undefined when the witness is G (G minus G is empty).
    Label remainder_label(NodeId v) const;

    /// Labels of all nodes on G with `flips` toggled, and on G minus the
    /// witness with `flips` toggled.
    std::vector<Label> disturbed_labels(std::span<const NodePair> flips) const;
    std::vector<Label> disturbed_remainder_labels(std::span<const NodePair> flips) const;

    bool is_factual(NodeId v) const { return witness_label(v) == base_label(v); }
    bool is_counterfactual(NodeId v) const { return is_factual(v) && remainder_label(v) != base_label(v); }

    /// CW property of v under `flips`: M(v, G~) = l, M(v, G_w) = l and
    /// M(v, G~ minus G_w) != l.
    bool holds_under(NodeId v, std::span<const NodePair> flips) const;

    const Topology& remainder() const { return remainder_; }
    const std::vector<NodePair>& remainder_edges() const { return remainder_edges_; }
    bool whole_graph() const { return whole_; }
    const Eigen::MatrixXd& base_logits() const { return *base_; }

    /// Argmax labels of every node on an arbitrary edge set over V.
    std::vector<Label> labels_on(const Topology& t) const;

private:
    const Configuration& c_;
    std::shared_ptr<const Eigen::MatrixXd> base_;
    std::vector<NodePair> remainder_edges_;
    Topology remainder_;
    std::vector<Label> witness_labels_;
    std::vector<Label> remainder_labels_;
    bool whole_ = false;
};

bool verify_witness(const Configuration& c);
bool verify_cw(const Configuration& c);

struct BruteForceOptions {
    std::uint64_t max_disturbances = 10'000'000;
};

/// Exhaustive k-disturbance search (restricted to b when set). Returns the
/// first disproving disturbance in (size, lexicographic) order.
VerifyOutcome verify_rcw_bruteforce(const Configuration& c, const BruteForceOptions& opts = {});

/// Worst-case margin bookkeeping of one test node under one disturbance.
struct MarginReport {
    NodeId node = 0;
    int base_label = 0;
    std::map<int, double> per_class_margins;
    double worst = 0.0;
    int argmin_class = 0;
    Disturbance witness_disturbance;
};

/// pi_v^T (Z_l - Z_c) for every c != l on G disturbed by `candidate`, where
/// Z = X theta and l = M(v, G). APPNP only.
MarginReport worst_case_margin(const Configuration& c, NodeId v, const Disturbance& candidate);

enum class PriSide {
    /// Optimizes over G: the adversary wants M(v, G~) != l.
    factual,
    /// Optimizes over G minus the witness: the adversary wants the label to
    /// return to l once the witness is removed.
    counterfactual,
};

struct PriOptions {
    PriSide side = PriSide::factual;
    /// 0 selects the number of candidate pairs.
    std::size_t max_iterations = 0;
    /// Stop once the current policy projects to a valid (k,b)-disturbance
    /// that breaks v (replayed through real inference).
    bool stop_on_counterexample = true;
    /// Stop once the objective reaches -kMarginTolerance: from there on the
    /// node cannot be certified for this class.
    bool stop_when_uncertifiable = false;
    /// Stop once upper_bound drops below -kMarginTolerance.
    bool stop_when_certified = false;
    /// Restrict flips to pairs whose endpoints both lie within this many hops
    /// of v. Off by default: APPNP propagation is global, so pruning can hide
    /// a threat.
    std::optional<std::size_t> prune_radius;
    /// Only nodes listed here may flip pairs (both endpoints must be listed).
    /// Used for fragment-local searches.
    std::optional<std::vector<NodeId>> restrict_to;
};

struct PriResult {
    /// Undirected projection of the final policy: every pair flipped by
    /// either endpoint.
    Disturbance disturbance;
    /// Per-node flipped targets relative to the base rows (the relaxed policy).
    std::vector<std::vector<NodeId>> policy;
    /// pi_v^T r under the final policy. At convergence this is the maximum
    /// over every policy where each node rewires at most b of its own pairs,
    /// a superset of the (k,b)-disturbances.
    double objective = 0.0;
    /// Certified upper bound on that maximum: objective plus the Bellman
    /// residual of the final policy. Equals objective at an exact fixed point.
    double upper_bound = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::optional<Disturbance> counterexample;
    /// Pairs of `disturbance` ranked by threat (most harmful first).
    std::vector<std::pair<NodePair, double>> threats;
};

/// Policy iteration for max pi_v^T r under local budget b. Each node u keeps
/// an action (at most b of its own pairs flipped); every round evaluates
/// X = (I - alpha D^-1 A')^-1 r, and switches u to its best response when that
/// strictly beats its current action. The single-flip improvement of u
/// towards u' is s(u,u') = (1 - 2A'_uu') (X_u' - (X_u - r_u)/alpha).
PriResult pri(const Configuration& c, NodeId v, const Eigen::VectorXd& r, std::size_t b, const Disturbance& e0,
              const PriOptions& opts = {});

/// s(u,u') on the overlay `t` given X solved on it.
double flip_score(const Topology& t, const Eigen::VectorXd& x, const Eigen::VectorXd& r, double alpha, NodeId u,
                  NodeId target);

class Executor;

struct AppnpVerifyOptions {
    std::optional<std::size_t> prune_radius;
    /// Runs the per-class searches; sequential when null. Verdicts do not
    /// depend on the executor.
    Executor* executor = nullptr;
};

/// Certifying verifier for APPNP. For every class c != l the factual-side
/// optimum of pi^T (Z_c - Z_l) must stay below zero, and for some class c the
/// counterfactual-side optimum of pi^T (Z_l - Z_c) over G minus the witness
/// must stay below zero. Robust is therefore sound; NotRobust carries a
/// replayable counterexample whenever one was found. Without b the local
/// budget defaults to k.
VerifyOutcome verify_rcw_appnp(const Configuration& c, const AppnpVerifyOptions& opts = {});
VerifyOutcome verify_rcw_appnp_node(const ViewOracle& oracle, NodeId v, const AppnpVerifyOptions& opts = {});

/// APPNP verifier for APPNP models, exhaustive search otherwise.
VerifyOutcome verify_rcw(const Configuration& c);

}  // namespace rcw
