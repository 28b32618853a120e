#include "rcw/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "rcw/generate.hpp"
#include "rcw/io.hpp"
#include "rcw/metrics.hpp"
#include "rcw/parallel.hpp"
#include "rcw/partition.hpp"
#include "rcw/random.hpp"
#include "rcw/verify.hpp"

namespace rcw {

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

class Logger {
public:
    explicit Logger(std::ostream& err) : err_(err) {
        const char* env = std::getenv("RCW_LOG");
        std::string v = env ? env : "";
        if (v == "info") level_ = LogLevel::info;
        if (v == "debug") level_ = LogLevel::debug;
    }

    void error(const std::string& msg) { err_ << "rcw: error: " << msg << '\n'; }
    void info(const std::string& msg) {
        if (level_ >= LogLevel::info) err_ << "rcw: " << msg << '\n';
    }
    void debug(const std::string& msg) {
        if (level_ >= LogLevel::debug) err_ << "rcw: [debug] " << msg << '\n';
    }

private:
    std::ostream& err_;
    LogLevel level_ = LogLevel::error;
};

struct RunConfig {
    std::string graph_path;
    std::string graph_format = "json";
    std::string features_path;
    std::string labels_path;
    std::string model_path;
    std::string witness_path;
    std::string witness2_path;
    std::string test_nodes;
    std::optional<std::size_t> sample;
    std::optional<std::size_t> k;
    std::optional<std::size_t> b;
    std::size_t workers = 1;
    std::uint64_t seed = 0;
    double removal_bias = 0.9;
    std::optional<std::size_t> disturb;
    std::string output_path;
    std::string stats_path;
    std::string model_output_path;
    // synth
    BAHouseParams bahouse;
    std::string model_kind = "fitted";
    double alpha = 0.3;
    // partition
    std::size_t parts = 2;
    std::size_t hop_radius = 1;
};

void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.output_path.empty()) {
        out << text;
    } else {
        write_text(cfg.output_path, text);
    }
}

Graph load_input_graph(const RunConfig& cfg) {
    if (cfg.graph_path.empty()) throw ParameterError("--graph is required");
    if (cfg.graph_format == "tsv") return load_graph_tsv(cfg.graph_path, cfg.features_path, cfg.labels_path);
    return load_graph(cfg.graph_path);
}

GnnModel load_input_model(const RunConfig& cfg) {
    if (cfg.model_path.empty()) throw ParameterError("--model is required");
    return load_model(cfg.model_path);
}

WitnessDocument load_input_witness(const std::string& path, const Graph& g) {
    if (path.empty()) throw ParameterError("--witness is required");
    WitnessDocument doc = parse_witness(read_text(path));
    if (doc.witness.host_checksum != g.checksum()) {
        throw IncompatibleError("witness " + path + " was built for a different graph (checksum mismatch)");
    }
    return doc;
}

std::vector<NodeId> parse_node_list(const std::string& text) {
    std::vector<NodeId> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        std::size_t used = 0;
        unsigned long long id = 0;
        try {
            id = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw ParameterError("bad node id '" + item + "' in --test-nodes");
        out.push_back(static_cast<NodeId>(id));
    }
    return out;
}

/// Uniform sample without replacement (partial Fisher-Yates), sorted.
std::vector<NodeId> sample_nodes(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) {
        throw ParameterError("--sample " + std::to_string(count) + " exceeds node count " + std::to_string(n));
    }
    std::vector<NodeId> ids(n);
    for (NodeId i = 0; i < n; ++i) ids[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(ids[i], ids[i + rng.below(n - i)]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<NodeId> resolve_test_nodes(const RunConfig& cfg, const Graph& g, const WitnessDocument* doc) {
    if (!cfg.test_nodes.empty() && cfg.sample) throw ParameterError("--test-nodes and --sample are exclusive");
    if (!cfg.test_nodes.empty()) return parse_node_list(cfg.test_nodes);
    if (cfg.sample) return sample_nodes(g.num_nodes(), *cfg.sample, cfg.seed);
    if (doc && !doc->test_nodes.empty()) return doc->test_nodes;
    throw ParameterError("no test nodes: pass --test-nodes or --sample");
}

std::string join(const std::vector<NodeId>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i]);
    return s;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, Logger& log) {
    Graph g = load_input_graph(cfg);
    GnnModel m = load_input_model(cfg);
    WitnessDocument doc = load_input_witness(cfg.witness_path, g);
    auto nodes = resolve_test_nodes(cfg, g, &doc);
    std::size_t k = cfg.k.value_or(doc.k);
    std::optional<std::size_t> b = cfg.b ? cfg.b : doc.b;
    log.info("verifying " + std::to_string(nodes.size()) + " test nodes, k=" + std::to_string(k));
    Configuration c{g, m, doc.witness, nodes, k, b, nullptr};
    VerifyOutcome o = verify_rcw(c);
    log.info(std::string("status ") + to_string(o.status));
    emit(cfg, dump_outcome(o), out);
    return o.robust() ? exit_success : exit_negative;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out, Logger& log) {
    Graph g = load_input_graph(cfg);
    GnnModel m = load_input_model(cfg);
    auto nodes = resolve_test_nodes(cfg, g, nullptr);
    if (!cfg.k) throw ParameterError("--k is required");
    if (cfg.workers < 1) throw ParameterError("--workers must be at least 1");
    log.info("generating for test nodes " + join(nodes) + " with " + std::to_string(cfg.workers) + " workers");
    GenerationResult r = cfg.workers == 1 ? robo_gexp(g, nodes, m, *cfg.k, cfg.b)
                                          : para_robo_gexp(g, nodes, m, *cfg.k, cfg.b, cfg.workers, cfg.seed);
    log.info("witness size " + std::to_string(r.witness.size()) + (r.trivial ? " (trivial)" : "") + ", " +
             std::to_string(r.stats.expansions) + " expansions, " + std::to_string(r.stats.verifications) +
             " verifications, " + std::to_string(r.stats.wall_time) + " s");
    WitnessDocument doc{r.witness, nodes, *cfg.k, cfg.b, r.trivial, r.stats};
    emit(cfg, dump_witness(doc), out);
    if (!cfg.stats_path.empty()) write_text(cfg.stats_path, dump_stats(r.stats));
    return r.trivial ? exit_trivial : exit_success;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, Logger& log) {
    Graph g = load_input_graph(cfg);
    GnnModel m = load_input_model(cfg);
    WitnessDocument doc = load_input_witness(cfg.witness_path, g);
    auto nodes = resolve_test_nodes(cfg, g, &doc);
    EvalReport report;
    if (!cfg.witness2_path.empty()) {
        if (cfg.disturb) throw ParameterError("--witness2 and --disturb are exclusive");
        WitnessDocument other = parse_witness(read_text(cfg.witness2_path));
        report = evaluate(g, doc.witness, nodes, m, &other.witness);
    } else {
        report = evaluate(g, doc.witness, nodes, m);
        if (cfg.disturb) {
            // Regenerate on a disturbed copy and compare against the original.
            auto [disturbed, flips] = inject_disturbance(g, *cfg.disturb, cfg.removal_bias, cfg.seed);
            log.info("regenerating on a graph with " + std::to_string(flips.flips.size()) + " flips");
            std::size_t k = cfg.k.value_or(doc.k);
            std::optional<std::size_t> b = cfg.b ? cfg.b : doc.b;
            GenerationResult r = cfg.workers <= 1
                                     ? robo_gexp(disturbed, nodes, m, k, b)
                                     : para_robo_gexp(disturbed, nodes, m, k, b, cfg.workers, cfg.seed);
            report.normalized_ged = normalized_ged_unchecked(doc.witness, r.witness);
        }
    }
    emit(cfg, dump_eval(report), out);
    return exit_success;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out, Logger& log) {
    Graph g = generate_bahouse(cfg.bahouse);
    log.info("synthesized " + std::to_string(g.num_nodes()) + " nodes, " + std::to_string(g.num_edges()) + " edges");
    emit(cfg, dump_graph(g), out);
    if (!cfg.model_output_path.empty()) {
        std::optional<GnnModel> m;
        if (cfg.model_kind == "fitted") {
            m = bahouse_reference_model(g);
        } else if (cfg.model_kind == "appnp") {
            m = synthesize_appnp(g.feature_dim(), g.num_classes(), cfg.alpha, cfg.seed);
        } else if (cfg.model_kind == "gcn") {
            m = synthesize_gcn(g.feature_dim(), 16, g.num_classes(), 2, cfg.seed);
        } else {
            throw ParameterError("unknown --model-kind " + cfg.model_kind);
        }
        write_text(cfg.model_output_path, dump_model(*m));
    }
    return exit_success;
}

int cmd_partition(const RunConfig& cfg, std::ostream& out, Logger&) {
    Graph g = load_input_graph(cfg);
    emit(cfg, dump_partition(partition_graph(g, cfg.parts, cfg.hop_radius, cfg.seed)), out);
    return exit_success;
}

void add_graph_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--graph", cfg.graph_path, "Graph file (JSON, or TSV edge list)")->required();
    sub->add_option("--format", cfg.graph_format, "Graph file format")->check(CLI::IsMember({"json", "tsv"}));
    sub->add_option("--features", cfg.features_path, "TSV feature rows (with --format tsv)");
    sub->add_option("--labels", cfg.labels_path, "TSV node<TAB>label lines (with --format tsv)");
}

void add_run_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--model", cfg.model_path, "Model JSON")->required();
    auto* nodes = sub->add_option("--test-nodes", cfg.test_nodes, "Comma-separated test nodes");
    sub->add_option("--sample", cfg.sample, "Sample this many test nodes uniformly")->excludes(nodes);
    sub->add_option("--k", cfg.k, "Disturbance budget");
    sub->add_option("--b", cfg.b, "Local budget per node")->check(CLI::PositiveNumber);
    sub->add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "Seed for sampling and partitioning");
    sub->add_option("--output", cfg.output_path, "Write the JSON result here instead of stdout");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Logger log(err);
    RunConfig cfg;
    CLI::App app{"Verify and generate k-robust counterfactual witnesses for GNN node classification", "rcw"};
    app.require_subcommand(1);

    auto* verify = app.add_subcommand("verify", "Check that a witness is a k-RCW for the test nodes");
    add_graph_options(verify, cfg);
    add_run_options(verify, cfg);
    verify->add_option("--witness", cfg.witness_path, "Witness JSON")->required();

    auto* generate = app.add_subcommand("generate", "Generate a k-RCW for the test nodes");
    add_graph_options(generate, cfg);
    add_run_options(generate, cfg);
    generate->add_option("--stats", cfg.stats_path, "Write generation statistics JSON here");

    auto* eval = app.add_subcommand("eval", "Report fidelity and GED of a witness");
    add_graph_options(eval, cfg);
    add_run_options(eval, cfg);
    eval->add_option("--witness", cfg.witness_path, "Witness JSON")->required();
    auto* w2 = eval->add_option("--witness2", cfg.witness2_path, "Second witness for GED");
    eval->add_option("--disturb", cfg.disturb, "Regenerate on a graph disturbed by this many flips")->excludes(w2);
    eval->add_option("--removal-bias", cfg.removal_bias, "Share of disturbance flips that remove edges")
        ->check(CLI::Range(0.0, 1.0));

    auto* synth = app.add_subcommand("synth", "Write the synthetic BAHouse graph");
    synth->add_option("--base", cfg.bahouse.base_nodes, "Barabasi-Albert base nodes");
    synth->add_option("--motifs", cfg.bahouse.motifs, "House motifs");
    synth->add_option("--attach", cfg.bahouse.attachment, "Edges per new base node")->check(CLI::PositiveNumber);
    synth->add_option("--seed", cfg.seed, "Seed");
    synth->add_option("--output", cfg.output_path, "Write the graph here instead of stdout");
    synth->add_option("--model-output", cfg.model_output_path, "Also write a model for the graph");
    synth->add_option("--model-kind", cfg.model_kind, "fitted (APPNP readout), appnp or gcn (random weights)")
        ->check(CLI::IsMember({"fitted", "appnp", "gcn"}));
    synth->add_option("--alpha", cfg.alpha, "Teleport probability of the random APPNP model")
        ->check(CLI::Range(0.0, 1.0));

    auto* part = app.add_subcommand("partition", "Partition a graph into fragments with border replication");
    add_graph_options(part, cfg);
    part->add_option("--parts", cfg.parts, "Number of fragments")->check(CLI::PositiveNumber);
    part->add_option("--hop-radius", cfg.hop_radius, "Replication radius around border nodes");
    part->add_option("--seed", cfg.seed, "Seed");
    part->add_option("--output", cfg.output_path, "Write the partition here instead of stdout");

    // CLI11 consumes arguments from the back.
    std::vector<std::string> rest;
    for (std::size_t i = args.size(); i-- > 1;) rest.push_back(args[i]);
    try {
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? exit_success : exit_error;
    }
    cfg.bahouse.seed = cfg.seed;

    try {
        auto start = std::chrono::steady_clock::now();
        int code = exit_error;
        if (*verify) code = cmd_verify(cfg, out, log);
        if (*generate) code = cmd_generate(cfg, out, log);
        if (*eval) code = cmd_eval(cfg, out, log);
        if (*synth) code = cmd_synth(cfg, out, log);
        if (*part) code = cmd_partition(cfg, out, log);
        log.debug("finished in " +
                  std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()) +
                  " s, exit " + std::to_string(code));
        return code;
    } catch (const std::exception& e) {
        log.error(e.what());
        return exit_error;
    }
}

}  // namespace rcw
