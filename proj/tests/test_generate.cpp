#include "doctest.h"

#include "oracles.hpp"
#include "rcw/generate.hpp"
#include "rcw/metrics.hpp"

using namespace rcw;

namespace {

// Star with centre 0. Spoke 1 carries strong class-1 features, the other
// spokes lean to class 0, so the centre is class 1 only through spoke 1.
Graph star_instance() {
    Eigen::MatrixXd x(5, 2);
    x << 0.6, 0.0, 0.0, 8.0, 0.3, 0.0, 0.3, 0.0, 0.3, 0.0;
    return Graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, x, std::nullopt, 2);
}

bool contains(const Witness& big, const Witness& small) {
    for (NodeId v : small.nodes) {
        if (!big.contains_node(v)) return false;
    }
    for (auto p : small.edges) {
        if (!big.contains_edge(p)) return false;
    }
    for (auto p : small.protected_pairs) {
        if (!big.is_frozen(p)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("expand adds the dominating spoke of a star") {
    Graph g = star_instance();
    for (const GnnModel& m : {oracle::planted_gcn(), oracle::planted_appnp()}) {
        // The spoke whose removal costs the centre the most margin.
        Eigen::MatrixXd a = oracle::adjacency(5, g.edges());
        Eigen::MatrixXd z = oracle::logits(m, a, g.features());
        REQUIRE(oracle::argmax(z.row(0)) == 1);
        double worst = 1e300;
        NodePair best;
        for (NodeId s = 1; s <= 4; ++s) {
            Eigen::MatrixXd ad = a;
            ad(0, s) = ad(s, 0) = 0.0;
            Eigen::MatrixXd zd = oracle::logits(m, ad, g.features());
            double margin = zd(0, 1) - zd(0, 0);
            if (margin < worst) worst = margin, best = {0, s};
        }
        CHECK(best == NodePair{0, 1});
        Witness ws = make_witness(g, {0}, {});
        Configuration c{g, m, ws, {0}, 1, 1, nullptr};
        Witness out = expand(0, ws, c);
        CHECK(out.contains_edge({0, 1}));
        CHECK(contains(out, ws));
    }
}

TEST_CASE("expand leaves the whole graph alone") {
    Graph g = star_instance();
    GnnModel m = oracle::planted_appnp();
    Witness ws = whole_graph_witness(g);
    Configuration c{g, m, ws, {0}, 2, 1, nullptr};
    CHECK(expand(0, ws, c) == ws);
}

TEST_CASE("expand only grows the witness") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Graph g = oracle::planted_graph(seed);
        GnnModel m = seed % 2 ? oracle::planted_appnp() : oracle::planted_gcn();
        Rng rng(seed);
        std::vector<NodePair> we;
        for (auto p : g.edges()) {
            if (rng.uniform() < 0.2) we.push_back(p);
        }
        Witness ws = make_witness(g, {0}, we);
        Configuration c{g, m, ws, {0}, 2, 1, nullptr};
        Witness out = expand(0, ws, c);
        CHECK(contains(out, ws));
        CHECK(out.size() + out.protected_pairs.size() <= ws.size() + ws.protected_pairs.size() + 2 * 2);
        validate_witness(out, g);
    }
}

TEST_CASE("generation on planted instances is valid and non-trivial") {
    std::size_t nontrivial = 0;
    for (std::uint64_t seed = 1; seed <= 16; ++seed) {
        Graph g = oracle::planted_graph(seed, 7);
        GnnModel m = seed % 2 ? oracle::planted_appnp() : oracle::planted_gcn();
        std::size_t k = 1 + seed % 2;
        auto r = robo_gexp(g, {0}, m, k, 1);
        CHECK(r.stats.verifications >= 1);
        if (r.trivial) {
            CHECK(covers_graph(r.witness, g));
            continue;
        }
        ++nontrivial;
        CHECK(r.witness.size() < g.num_nodes() + g.num_edges());
        CHECK_FALSE(r.witness.edges.empty());
        auto naive = oracle::brute_force({g, m, r.witness, {0}}, k, 1);
        CHECK(naive.cw);
        CHECK(naive.robust);
        CHECK(fidelity_plus(g, r.witness, {0}, m) == 1.0);
        CHECK(fidelity_minus(g, r.witness, {0}, m) == 0.0);
    }
    CHECK(nontrivial >= 12);
}

TEST_CASE("witness edges stay in the test node's component") {
    // Component {0,1,2}: node 0 is class 1 only through its edge to node 1.
    // Component {3,4,5} is far away and class 0.
    Eigen::MatrixXd x(6, 2);
    x << 1.0, 0.0, 0.0, 1.5, 0.0, 3.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0;
    Graph g(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}}, x, std::nullopt, 2);
    GnnModel m = oracle::planted_gcn();
    auto r = robo_gexp(g, {0}, m, 1, 1);
    REQUIRE_FALSE(r.trivial);
    CHECK(r.witness.contains_edge({0, 1}));
    for (auto p : r.witness.edges) CHECK(p.v <= 2);
    auto naive = oracle::brute_force({g, m, r.witness, {0}}, 1, 1);
    CHECK(naive.robust);
}

TEST_CASE("without any counterfactual witness generation returns the whole graph") {
    // Node 0's own features outweigh everything its neighbours can bring, so
    // removing any edge set leaves its label unchanged.
    Eigen::MatrixXd x(5, 2);
    x << 5.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0;
    Graph g(5, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}}, x, std::nullopt, 2);
    for (const GnnModel& m : {oracle::planted_gcn(), oracle::planted_appnp()}) {
        const auto& edges = g.edges();
        for (std::size_t mask = 0; mask < (1u << edges.size()); ++mask) {
            std::vector<NodePair> we;
            for (std::size_t i = 0; i < edges.size(); ++i) {
                if (mask & (1u << i)) we.push_back(edges[i]);
            }
            Witness w = make_witness(g, {0}, we);
            if (covers_graph(w, g)) continue;
            CHECK_FALSE(oracle::Instance{g, m, w, {0}}.counterfactual());
        }
        auto r = robo_gexp(g, {0}, m, 2, 1);
        CHECK(r.trivial);
        CHECK(covers_graph(r.witness, g));
        CHECK(verify_rcw(Configuration{g, m, r.witness, {0}, 2, 1, nullptr}).robust());
    }
}

TEST_CASE("generation parameter errors") {
    Graph g = oracle::planted_graph(1);
    GnnModel m = oracle::planted_appnp();
    CHECK_THROWS_AS(robo_gexp(g, {0}, m, 0), ParameterError);
    CHECK_THROWS_AS(robo_gexp(g, {}, m, 1), ParameterError);
    CHECK_THROWS_AS(robo_gexp(g, {0}, m, 1, 0), ParameterError);
    CHECK_THROWS_AS(robo_gexp(g, {static_cast<NodeId>(g.num_nodes())}, m, 1), ParameterError);
}

TEST_CASE("generation is deterministic") {
    Graph g = oracle::planted_graph(8);
    for (const GnnModel& m : {oracle::planted_appnp(), oracle::planted_gcn()}) {
        auto a = robo_gexp(g, {0, 2}, m, 1, 1);
        auto b = robo_gexp(g, {0, 2}, m, 1, 1);
        CHECK(a.witness == b.witness);
        CHECK(a.trivial == b.trivial);
        CHECK(a.stats.expansions == b.stats.expansions);
        CHECK(a.stats.verifications == b.stats.verifications);
    }
}
