#pragma once

#include <optional>
#include <string>

#include "rcw/generate.hpp"
#include "rcw/graph.hpp"
#include "rcw/metrics.hpp"
#include "rcw/model.hpp"
#include "rcw/partition.hpp"
#include "rcw/verify.hpp"

namespace rcw {

/// Witness file contents: the witness plus the budgets it was built for.
struct WitnessDocument {
    Witness witness;
    /// Test nodes the witness was generated for; verify and eval default to them.
    std::vector<NodeId> test_nodes;
    std::size_t k = 0;
    std::optional<std::size_t> b;
    bool trivial = false;
    std::optional<GenerationStats> stats;
};

// All parse functions throw IntegrityError on malformed input.

std::string read_text(const std::string& path);
/// Writes atomically enough for CLI use (truncate + write); throws on failure.
void write_text(const std::string& path, const std::string& text);

Graph parse_graph(const std::string& json);
std::string dump_graph(const Graph& g);
Graph load_graph(const std::string& path);

/// Edge list `u<TAB>v` per line; optional feature rows (one per node,
/// tab-separated) and `node<TAB>label` lines. Self-loops and repeated edges
/// are dropped. Without features every node gets the single feature 1.
Graph load_graph_tsv(const std::string& edges_path, const std::string& features_path = {},
                     const std::string& labels_path = {});

GnnModel parse_model(const std::string& json);
std::string dump_model(const GnnModel& m);
GnnModel load_model(const std::string& path);

WitnessDocument parse_witness(const std::string& json);
/// Witness JSON as written by `generate`; stats carry only expansions and
/// verifications so the file does not depend on timing or worker count.
std::string dump_witness(const WitnessDocument& doc);

std::string dump_outcome(const VerifyOutcome& o);
std::string dump_eval(const EvalReport& r);
std::string dump_stats(const GenerationStats& s);
std::string dump_partition(const Partition& p);

}  // namespace rcw
