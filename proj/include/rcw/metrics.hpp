#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "rcw/graph.hpp"
#include "rcw/model.hpp"

namespace rcw {

/// (|node symmetric difference| + |edge symmetric difference|) divided by the
/// larger witness size (nodes + edges). Throws IncompatibleError when the
/// witnesses come from different host graphs.
double normalized_ged(const Witness& a, const Witness& b);
/// Same without the host check, for comparing witnesses of a graph and of a
/// disturbed copy of it (shared node identities).
double normalized_ged_unchecked(const Witness& a, const Witness& b);

/// Fraction of test nodes whose label changes once the witness edges are
/// removed from G. Ideal value 1.
double fidelity_plus(const Graph& g, const Witness& ws, const std::vector<NodeId>& test_nodes, const GnnModel& m);
/// Fraction of test nodes whose label changes when inference runs on the
/// witness alone. Ideal value 0.
double fidelity_minus(const Graph& g, const Witness& ws, const std::vector<NodeId>& test_nodes, const GnnModel& m);

struct NodeDetail {
    NodeId node = 0;
    Label label;
    Label witness_label;
    Label remainder_label;
};

struct EvalReport {
    std::optional<double> normalized_ged;
    double fidelity_plus = 0.0;
    double fidelity_minus = 0.0;
    std::size_t witness_size = 0;
    std::vector<NodeDetail> per_node_detail;
};

/// Fidelity scores and per-node labels of `ws`; GED against `other` when given.
EvalReport evaluate(const Graph& g, const Witness& ws, const std::vector<NodeId>& test_nodes, const GnnModel& m,
                    const Witness* other = nullptr);

/// Samples k distinct flips; each is an existing edge with probability
/// removal_bias and a non-edge otherwise (falling back to the other kind when
/// one runs out). Returns the disturbed graph and the flips.
std::pair<Graph, Disturbance> inject_disturbance(const Graph& g, std::size_t k, double removal_bias,
                                                 std::uint64_t seed);

struct BAHouseParams {
    std::size_t base_nodes = 200;
    std::size_t motifs = 20;
    std::size_t attachment = 7;
    std::uint64_t seed = 0;
};

/// Barabasi-Albert base (seed clique on attachment+1 nodes, then preferential
/// attachment) with 5-node house motifs. Each house is apex, two middle nodes
/// and two ground nodes: apex-m1, apex-m2, m1-m2, m1-g1, m2-g2, g1-g2; g1 links
/// to a random base node. Labels: base 0, apex 1, middle 2, ground 3.
/// Features are one-hot degree buckets min(degree, 7).
Graph generate_bahouse(const BAHouseParams& p = {});

inline constexpr std::size_t kDegreeBuckets = 8;

/// Deterministic APPNP readout for a labelled graph: class-balanced ridge
/// regression of the one-hot labels on the propagated features. With
/// isolated_weight > 0 the raw feature rows (a node seen without edges) are
/// also fitted to class 0, so that labels hinge on structure and removing a
/// node's edges can change its label.
GnnModel fit_appnp_readout(const Graph& g, double alpha, double ridge = 1e-3, double isolated_weight = 0.0);

/// The APPNP model shipped with the synthetic BAHouse data.
GnnModel bahouse_reference_model(const Graph& g);

}  // namespace rcw
