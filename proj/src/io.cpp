#include "rcw/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rcw {

using nlohmann::json;

namespace {

json pairs_json(const std::vector<NodePair>& pairs) {
    json out = json::array();
    for (const auto& p : pairs) out.push_back({p.u, p.v});
    return out;
}

std::vector<NodePair> pairs_from(const json& j, const char* what) {
    if (!j.is_array()) throw IntegrityError(std::string(what) + " must be an array of pairs");
    std::vector<NodePair> out;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2) throw IntegrityError(std::string(what) + " entries must be [u, v]");
        out.emplace_back(e[0].get<NodeId>(), e[1].get<NodeId>());
    }
    return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

Eigen::MatrixXd matrix_from(const json& j, const char* what) {
    if (!j.is_array()) throw IntegrityError(std::string(what) + " must be a list of rows");
    if (j.empty()) return Eigen::MatrixXd(0, 0);
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw IntegrityError(std::string(what) + " rows differ in length");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    return m;
}

// Wraps parse and type errors of the JSON layer into IntegrityError.
template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw IntegrityError(std::string("malformed ") + what + ": " + e.what());
    }
}

std::string checksum_hex(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

json label_json(const Label& l) { return l ? json(*l) : json(nullptr); }

}  // namespace

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParameterError("cannot write " + path);
    out << text;
    if (!out) throw ParameterError("failed writing " + path);
}

Graph parse_graph(const std::string& text) {
    return guarded("graph", [&] {
        json j = json::parse(text);
        auto n = j.at("num_nodes").get<std::size_t>();
        auto edges = pairs_from(j.at("edges"), "edges");
        Eigen::MatrixXd x = matrix_from(j.at("features"), "features");
        if (n > 0 && x.rows() == 0) throw IntegrityError("features missing");
        std::optional<std::vector<int>> labels;
        if (j.contains("labels") && !j["labels"].is_null()) labels = j["labels"].get<std::vector<int>>();
        return Graph(n, std::move(edges), std::move(x), std::move(labels), j.at("num_classes").get<int>());
    });
}

std::string dump_graph(const Graph& g) {
    json j;
    j["num_nodes"] = g.num_nodes();
    j["edges"] = pairs_json(g.edges());
    j["features"] = matrix_json(g.features());
    if (g.labels()) j["labels"] = *g.labels();
    j["num_classes"] = g.num_classes();
    return j.dump() + "\n";
}

Graph load_graph(const std::string& path) { return parse_graph(read_text(path)); }

Graph load_graph_tsv(const std::string& edges_path, const std::string& features_path,
                     const std::string& labels_path) {
    std::vector<NodePair> edges;
    std::size_t n = 0;
    {
        std::istringstream in(read_text(edges_path));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            long long u, v;
            if (!(ls >> u >> v) || u < 0 || v < 0) {
                throw IntegrityError(edges_path + ":" + std::to_string(lineno) + ": expected two node ids");
            }
            n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(u, v)) + 1);
            if (u != v) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        }
    }
    std::vector<std::vector<double>> rows;
    if (!features_path.empty()) {
        std::istringstream in(read_text(features_path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::vector<double> row;
            double x;
            while (ls >> x) row.push_back(x);
            if (!rows.empty() && row.size() != rows[0].size()) {
                throw IntegrityError(features_path + ": feature rows differ in length");
            }
            rows.push_back(std::move(row));
        }
        n = std::max(n, rows.size());
        if (rows.size() != n) throw IntegrityError(features_path + ": expected one feature row per node");
    }
    std::optional<std::vector<int>> labels;
    int classes = 1;
    if (!labels_path.empty()) {
        labels.emplace(n, 0);
        std::istringstream in(read_text(labels_path));
        long long node;
        int label;
        while (in >> node >> label) {
            if (node < 0 || static_cast<std::size_t>(node) >= n || label < 0) {
                throw IntegrityError(labels_path + ": label line out of range");
            }
            (*labels)[static_cast<std::size_t>(node)] = label;
            classes = std::max(classes, label + 1);
        }
    }
    Eigen::MatrixXd x;
    if (rows.empty()) {
        x = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 1);
    } else {
        x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < rows[i].size(); ++c) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
        }
    }
    return Graph(n, std::move(edges), std::move(x), std::move(labels), classes);
}

GnnModel parse_model(const std::string& text) {
    return guarded("model", [&]() -> GnnModel {
        json j = json::parse(text);
        auto kind = j.at("kind").get<std::string>();
        if (kind == "gcn") {
            GcnModel m;
            for (const auto& layer : j.at("layers")) {
                auto act = layer.value("activation", std::string("relu"));
                if (act != "relu" && act != "identity") throw IntegrityError("unknown activation " + act);
                m.layers.push_back({matrix_from(layer.at("weight"), "weight"),
                                    act == "relu" ? Activation::relu : Activation::identity});
            }
            return GnnModel(std::move(m));
        }
        if (kind == "appnp") {
            return GnnModel(AppnpModel{matrix_from(j.at("theta"), "theta"), j.at("alpha").get<double>()});
        }
        throw UnsupportedModelError("unknown model kind " + kind);
    });
}

std::string dump_model(const GnnModel& m) {
    json j;
    if (m.kind() == ModelKind::gcn) {
        j["kind"] = "gcn";
        j["layers"] = json::array();
        for (const auto& layer : m.gcn().layers) {
            j["layers"].push_back({{"weight", matrix_json(layer.weight)},
                                   {"activation", layer.activation == Activation::relu ? "relu" : "identity"}});
        }
    } else {
        j["kind"] = "appnp";
        j["alpha"] = m.appnp().alpha;
        j["theta"] = matrix_json(m.appnp().theta);
    }
    return j.dump() + "\n";
}

GnnModel load_model(const std::string& path) { return parse_model(read_text(path)); }

WitnessDocument parse_witness(const std::string& text) {
    return guarded("witness", [&] {
        json j = json::parse(text);
        WitnessDocument doc;
        doc.witness.nodes = j.at("nodes").get<std::vector<NodeId>>();
        doc.witness.edges = pairs_from(j.at("edges"), "edges");
        if (j.contains("protected_pairs")) doc.witness.protected_pairs = pairs_from(j["protected_pairs"], "protected_pairs");
        std::sort(doc.witness.nodes.begin(), doc.witness.nodes.end());
        std::sort(doc.witness.edges.begin(), doc.witness.edges.end());
        std::sort(doc.witness.protected_pairs.begin(), doc.witness.protected_pairs.end());
        doc.witness.host_checksum = std::stoull(j.at("host_checksum").get<std::string>(), nullptr, 16);
        if (j.contains("test_nodes")) doc.test_nodes = j["test_nodes"].get<std::vector<NodeId>>();
        doc.k = j.value("k", std::size_t{0});
        if (j.contains("b") && !j["b"].is_null()) doc.b = j["b"].get<std::size_t>();
        doc.trivial = j.value("trivial", false);
        if (j.contains("stats") && j["stats"].is_object()) {
            GenerationStats s;
            s.expansions = j["stats"].value("expansions", std::size_t{0});
            s.verifications = j["stats"].value("verifications", std::size_t{0});
            doc.stats = s;
        }
        return doc;
    });
}

std::string dump_witness(const WitnessDocument& doc) {
    json j;
    j["nodes"] = doc.witness.nodes;
    j["edges"] = pairs_json(doc.witness.edges);
    j["protected_pairs"] = pairs_json(doc.witness.protected_pairs);
    j["test_nodes"] = doc.test_nodes;
    j["k"] = doc.k;
    j["b"] = doc.b ? json(*doc.b) : json(nullptr);
    j["trivial"] = doc.trivial;
    if (doc.stats) j["stats"] = {{"expansions", doc.stats->expansions}, {"verifications", doc.stats->verifications}};
    j["host_checksum"] = checksum_hex(doc.witness.host_checksum);
    return j.dump() + "\n";
}

std::string dump_outcome(const VerifyOutcome& o) {
    json j;
    j["status"] = to_string(o.status);
    j["failing_node"] = o.failing_node ? json(*o.failing_node) : json(nullptr);
    j["counterexample"] = o.counterexample ? pairs_json(o.counterexample->flips) : json(nullptr);
    return j.dump(2) + "\n";
}

std::string dump_eval(const EvalReport& r) {
    json j;
    j["normalized_ged"] = r.normalized_ged ? json(*r.normalized_ged) : json(nullptr);
    j["fidelity_plus"] = r.fidelity_plus;
    j["fidelity_minus"] = r.fidelity_minus;
    j["witness_size"] = r.witness_size;
    j["per_node_detail"] = json::array();
    for (const auto& d : r.per_node_detail) {
        j["per_node_detail"].push_back({{"node", d.node},
                                        {"label", label_json(d.label)},
                                        {"witness_label", label_json(d.witness_label)},
                                        {"remainder_label", label_json(d.remainder_label)}});
    }
    return j.dump(2) + "\n";
}

std::string dump_stats(const GenerationStats& s) {
    json j{{"expansions", s.expansions},       {"verifications", s.verifications},
           {"wall_time", s.wall_time},         {"workers", s.workers},
           {"coordinator_verified", s.coordinator_verified}, {"rounds", s.rounds}};
    return j.dump(2) + "\n";
}

std::string dump_partition(const Partition& p) {
    json j;
    j["hop_radius"] = p.hop_radius;
    j["fragments"] = p.fragments;
    j["replicated"] = p.replicated;
    return j.dump(2) + "\n";
}

}  // namespace rcw
