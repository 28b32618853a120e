#include "doctest.h"

#include "oracles.hpp"
#include "rcw/bitmap.hpp"
#include "rcw/disturbance.hpp"
#include "rcw/verify.hpp"

using namespace rcw;

namespace {

GnnModel identity_gcn(int classes) {
    return GnnModel(GcnModel{{{Eigen::MatrixXd::Identity(classes, classes), Activation::identity}}});
}

GnnModel identity_appnp(int classes, double alpha) {
    return GnnModel(AppnpModel{Eigen::MatrixXd::Identity(classes, classes), alpha});
}

// 0 - 1 - 2 - 3 path; node 0 leans to class 0 on its own, node 1 pulls it to class 1.
Graph path_instance() {
    Eigen::MatrixXd x(4, 2);
    x << 1.0, 0.0, 0.0, 3.0, 0.5, 0.0, 0.5, 0.0;
    return Graph(4, {{0, 1}, {1, 2}, {2, 3}}, x, std::nullopt, 2);
}

}  // namespace

TEST_CASE("factual witness checks") {
    Graph g = path_instance();
    GnnModel m = identity_gcn(2);
    SUBCASE("whole graph") {
        Configuration c{g, m, whole_graph_witness(g), {0, 1, 2, 3}, 0, {}, nullptr};
        CHECK(verify_witness(c));
        CHECK(verify_cw(c));
    }
    SUBCASE("a node whose own features decide its label") {
        // Node 1 is class 1 both alone and with its neighbours.
        Configuration c{g, m, make_witness(g, {1}, {}), {1}, 0, {}, nullptr};
        CHECK(oracle::label(m, oracle::adjacency(4, g.edges()), g.features(), 1) == 1);
        CHECK(verify_witness(c));
    }
    SUBCASE("label depends on an excluded neighbour") {
        Configuration c{g, m, make_witness(g, {0}, {}), {0}, 0, {}, nullptr};
        CHECK(oracle::label(m, oracle::adjacency(4, g.edges()), g.features(), 0) == 1);
        CHECK(oracle::label(m, oracle::adjacency(4, {}), g.features(), 0) == 0);
        CHECK_FALSE(verify_witness(c));
        CHECK_FALSE(verify_cw(c));
    }
    SUBCASE("the supporting edge makes a counterfactual witness") {
        Configuration c{g, m, make_witness(g, {0}, {{0, 1}}), {0}, 0, {}, nullptr};
        CHECK(verify_witness(c));
        CHECK(verify_cw(c));
        CHECK(verify_rcw_bruteforce(c).robust());
    }
}

TEST_CASE("factual witness whose removal keeps the label is not counterfactual") {
    // 5 nodes: 0 and 1 are both class 1; the witness keeps edge 0-1, but node 0
    // is class 1 through its own features as well.
    Eigen::MatrixXd x(5, 2);
    x << 0.0, 2.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0;
    Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, x, std::nullopt, 2);
    GnnModel m = identity_gcn(2);
    Configuration c{g, m, make_witness(g, {0}, {{0, 1}}), {0}, 0, {}, nullptr};
    oracle::Instance inst{g, m, c.witness, {0}};
    CHECK(inst.factual());
    CHECK_FALSE(inst.counterfactual());
    CHECK(verify_witness(c));
    CHECK_FALSE(verify_cw(c));
    CHECK(verify_rcw_bruteforce(c).status == VerifyStatus::not_counterfactual);
}

TEST_CASE("configuration validation") {
    Graph g = path_instance();
    Graph other = Graph(4, {{0, 1}}, g.features(), std::nullopt, 2);
    GnnModel m = identity_gcn(2);
    Witness foreign = make_witness(other, {0}, {});
    CHECK_THROWS_AS(verify_cw(Configuration{g, m, foreign, {0}, 1, {}, nullptr}), IncompatibleError);
    CHECK_THROWS_AS(verify_cw(Configuration{g, m, make_witness(g, {1}, {}), {0}, 1, {}, nullptr}), ParameterError);
    CHECK_THROWS_AS(verify_cw(Configuration{g, m, make_witness(g, {0}, {}), {0}, 1, 0, nullptr}), ParameterError);
    CHECK_THROWS_AS(verify_cw(Configuration{g, identity_gcn(3), make_witness(g, {0}, {}), {0}, 1, {}, nullptr}),
                    ParameterError);
}

TEST_CASE("brute force trivial cases") {
    Graph g = path_instance();
    GnnModel m = identity_gcn(2);
    SUBCASE("k = 0 on a counterfactual witness") {
        Configuration c{g, m, make_witness(g, {0}, {{0, 1}}), {0}, 0, {}, nullptr};
        CHECK(verify_rcw_bruteforce(c).robust());
    }
    SUBCASE("whole graph is robust for any k") {
        for (std::size_t k : {1, 3, 6}) {
            Configuration c{g, m, whole_graph_witness(g), {0, 1, 2, 3}, k, {}, nullptr};
            CHECK(verify_rcw_bruteforce(c).robust());
        }
    }
    SUBCASE("capacity guard") {
        Configuration c{g, m, make_witness(g, {0}, {{0, 1}}), {0}, 3, {}, nullptr};
        CHECK_THROWS_AS(verify_rcw_bruteforce(c, BruteForceOptions{10}), CapacityError);
    }
}

TEST_CASE("a single flip that rewires influence breaks the witness") {
    // 6 nodes. Node 0 is class 1 through edge 0-1. Node 5 carries strong
    // class-1 features: linking 0 to 5 keeps node 0 at class 1 even once the
    // witness edge is removed.
    Eigen::MatrixXd x(6, 2);
    x << 1.0, 0.0, 0.0, 3.0, 0.2, 0.0, 0.2, 0.0, 0.2, 0.0, 0.0, 5.0;
    Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, x, std::nullopt, 2);
    GnnModel m = identity_gcn(2);
    Configuration c{g, m, make_witness(g, {0}, {{0, 1}}), {0}, 1, {}, nullptr};
    auto out = verify_rcw_bruteforce(c);
    REQUIRE(out.status == VerifyStatus::not_robust);
    REQUIRE(out.counterexample);
    oracle::Instance inst{g, m, c.witness, {0}};
    auto naive = oracle::brute_force(inst, 1, {});
    REQUIRE(naive.counterexample);
    CHECK(out.counterexample->flips == *naive.counterexample);
    CHECK(out.failing_node == 0);
    CHECK_FALSE(inst.holds_under(out.counterexample->flips));
}

namespace {

struct RandomCase {
    Graph g;
    GnnModel m;
    Witness w;
    std::vector<NodeId> test_nodes;
    std::size_t k;
    std::optional<std::size_t> b;
};

RandomCase random_case(std::uint64_t seed, bool appnp) {
    Rng rng(seed);
    bool planted = rng.below(2) == 0;
    Graph g = planted ? oracle::planted_graph(seed, 5) : [&] {
        std::size_t n = 4 + rng.below(4);
        return Graph(n, oracle::random_edges(rng, n, 0.4), oracle::random_features(rng, n, 2), std::nullopt, 2);
    }();
    GnnModel m = planted ? (appnp ? oracle::planted_appnp() : oracle::planted_gcn())
                         : (appnp ? synthesize_appnp(2, 2, 0.2 + 0.6 * rng.uniform(), seed)
                                  : synthesize_gcn(2, 3, 2, 1 + rng.below(2), seed));
    std::vector<NodePair> we;
    for (auto p : g.edges()) {
        if (rng.uniform() < 0.5) we.push_back(p);
    }
    std::vector<NodeId> nodes{0};
    if (rng.below(3) == 0) nodes.push_back(static_cast<NodeId>(1 + rng.below(g.num_nodes() - 1)));
    Witness w = make_witness(g, nodes, we);
    std::size_t k = 1 + rng.below(2);
    std::optional<std::size_t> b;
    if (rng.below(2)) b = 1 + rng.below(2);
    return {g, m, w, nodes, k, b};
}

}  // namespace

TEST_CASE("brute force agrees with a naive dense re-implementation") {
    std::size_t cw = 0, robust = 0;
    for (std::uint64_t seed = 1; seed <= 120; ++seed) {
        auto rc = random_case(seed, seed % 2 == 0);
        Configuration c{rc.g, rc.m, rc.w, rc.test_nodes, rc.k, rc.b, nullptr};
        oracle::Instance inst{rc.g, rc.m, rc.w, rc.test_nodes};
        auto naive = oracle::brute_force(inst, rc.k, rc.b);
        auto out = verify_rcw_bruteforce(c);
        CHECK(verify_cw(c) == naive.cw);
        CHECK(verify_witness(c) == inst.factual());
        if (!naive.cw) {
            CHECK((out.status == VerifyStatus::not_witness || out.status == VerifyStatus::not_counterfactual));
            continue;
        }
        ++cw;
        robust += naive.robust;
        CHECK(out.robust() == naive.robust);
        if (!naive.robust) {
            REQUIRE(out.counterexample);
            CHECK(out.counterexample->flips == *naive.counterexample);
        }
    }
    MESSAGE("counterfactual instances: " << cw << ", robust: " << robust);
    CHECK(cw > 10);
}

TEST_CASE("counterexamples replay through the bitmap") {
    for (std::uint64_t seed = 1; seed <= 80; ++seed) {
        auto rc = random_case(seed, true);
        Configuration c{rc.g, rc.m, rc.w, rc.test_nodes, rc.k, rc.b, nullptr};
        for (const auto& out : {verify_rcw_bruteforce(c), verify_rcw_appnp(c)}) {
            if (!out.counterexample) continue;
            CHECK(out.counterexample->flips.size() <= rc.k);
            CHECK(within_budget(out.counterexample->flips, rc.k, rc.b.value_or(rc.k)));
            AdjacencyBitmap bm(rc.g);
            bm.apply(*out.counterexample, &rc.w);
            Graph disturbed = rc.g.with_edges(bm.edges());
            // The witness edges survive the disturbance, so the witness itself
            // carries over to the disturbed graph.
            Witness moved = make_witness(disturbed, rc.w.nodes, rc.w.edges);
            Configuration dc{disturbed, rc.m, moved, rc.test_nodes, 0, {}, nullptr};
            CHECK_FALSE(verify_cw(dc));
        }
    }
}

TEST_CASE("monotonicity in k and in the test set") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        auto rc = random_case(seed, seed % 3 == 0);
        Configuration c{rc.g, rc.m, rc.w, rc.test_nodes, rc.k, rc.b, nullptr};
        if (!verify_rcw_bruteforce(c).robust()) continue;
        ++checked;
        for (std::size_t k2 = 0; k2 <= rc.k; ++k2) {
            for (std::size_t mask = 1; mask < (1u << rc.test_nodes.size()); ++mask) {
                std::vector<NodeId> sub;
                for (std::size_t i = 0; i < rc.test_nodes.size(); ++i) {
                    if (mask & (1u << i)) sub.push_back(rc.test_nodes[i]);
                }
                Configuration c2{rc.g, rc.m, rc.w, sub, k2, rc.b, nullptr};
                CHECK(verify_rcw_bruteforce(c2).robust());
            }
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("worst-case margin") {
    SUBCASE("identical class columns give zero margin") {
        Eigen::MatrixXd theta(2, 3);
        theta << 1, 1, 0, 0, 0, 1;
        GnnModel m(AppnpModel{theta, 0.3});
        Eigen::MatrixXd x(3, 2);
        x << 1, 0, 1, 0.2, 1, 0.1;
        Graph g(3, {{0, 1}, {1, 2}}, x, std::nullopt, 3);
        Configuration c{g, m, make_witness(g, {0}, {}), {0}, 1, {}, nullptr};
        auto rep = worst_case_margin(c, 0, {});
        CHECK(rep.base_label == 0);
        CHECK(std::abs(rep.per_class_margins.at(1)) < 1e-15);
        CHECK(rep.worst == doctest::Approx(0.0));
    }
    SUBCASE("empty disturbance where the label strictly dominates") {
        Graph g = path_instance();
        GnnModel m = identity_appnp(2, 0.3);
        Configuration c{g, m, make_witness(g, {1}, {}), {1}, 1, {}, nullptr};
        auto rep = worst_case_margin(c, 1, {});
        CHECK(rep.worst > 0.0);
        for (auto [cls, margin] : rep.per_class_margins) CHECK(margin > 0.0);
    }
    SUBCASE("single flip on a 4-node star matches the dense oracle") {
        Rng rng(12);
        Eigen::MatrixXd x = oracle::random_features(rng, 4, 3);
        Eigen::MatrixXd theta = oracle::random_features(rng, 3, 3);
        Graph g(4, {{0, 1}, {0, 2}, {0, 3}}, x, std::nullopt, 3);
        GnnModel m(AppnpModel{theta, 0.25});
        Configuration c{g, m, make_witness(g, {1}, {}), {1}, 1, {}, nullptr};
        Disturbance d{{{1, 2}}, 1, std::nullopt};
        auto rep = worst_case_margin(c, 1, d);
        Eigen::MatrixXd z0 = oracle::appnp_logits(oracle::adjacency(4, g.edges()), x, theta, 0.25);
        Eigen::MatrixXd z = oracle::appnp_logits(oracle::adjacency(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}}), x, theta, 0.25);
        int l = oracle::argmax(z0.row(1));
        CHECK(rep.base_label == l);
        for (auto [cls, margin] : rep.per_class_margins) CHECK(std::abs(margin - (z(1, l) - z(1, cls))) < 1e-12);
    }
    SUBCASE("gcn is rejected") {
        Graph g = path_instance();
        GnnModel m = identity_gcn(2);
        Configuration c{g, m, make_witness(g, {0}, {}), {0}, 1, {}, nullptr};
        CHECK_THROWS_AS(worst_case_margin(c, 0, {}), UnsupportedModelError);
    }
}

TEST_CASE("pri fixed points and optimality") {
    Graph g(4, {{0, 1}, {0, 2}, {0, 3}}, Eigen::MatrixXd::Identity(4, 4), std::nullopt, 4);
    GnnModel m = identity_appnp(4, 0.3);
    Configuration c{g, m, make_witness(g, {1}, {}), {1}, 1, 1, nullptr};
    PriOptions quiet;
    quiet.stop_on_counterexample = false;

    SUBCASE("zero drive leaves the empty seed unchanged") {
        auto res = pri(c, 1, Eigen::VectorXd::Zero(4), 1, {}, quiet);
        CHECK(res.converged);
        CHECK(res.iterations == 1);
        CHECK(res.disturbance.flips.empty());
        CHECK(res.objective == 0.0);
    }
    SUBCASE("a constant drive keeps any seed") {
        Disturbance e0{{{1, 2}}, 1, 1};
        auto res = pri(c, 1, Eigen::VectorXd::Constant(4, 0.7), 1, e0, quiet);
        CHECK(res.converged);
        CHECK(res.iterations == 1);
        CHECK(res.disturbance.flips == e0.flips);
    }
    SUBCASE("attains the best single flip on a star") {
        for (NodeId target = 0; target < 4; ++target) {
            Eigen::VectorXd r = Eigen::VectorXd::Zero(4);
            r[target] = 1.0;
            r[0] -= 0.5;
            auto res = pri(c, 1, r, 1, {}, quiet);
            double best = -1e300;
            for (auto p : all_pairs(4)) {
                auto edges = toggle_pairs(g.edges(), std::vector<NodePair>{p});
                Eigen::MatrixXd pi = oracle::pagerank_matrix(oracle::adjacency(4, edges), 0.3);
                best = std::max(best, pi.row(1).dot(r));
            }
            CHECK(res.converged);
            CHECK(res.objective >= best - 1e-12);
            CHECK(res.upper_bound >= res.objective - 1e-15);
            if (res.disturbance.flips.size() == 1) CHECK(res.objective == doctest::Approx(best).epsilon(1e-12));
        }
    }
}

TEST_CASE("pri upper bound dominates every admissible disturbance") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Rng rng(seed);
        std::size_t n = 4 + rng.below(4);
        Graph g(n, oracle::random_edges(rng, n, 0.4), oracle::random_features(rng, n, 2), std::nullopt, 2);
        double alpha = 0.2 + 0.6 * rng.uniform();
        GnnModel m(AppnpModel{Eigen::MatrixXd::Identity(2, 2), alpha});
        std::size_t b = 1 + rng.below(2);
        Configuration c{g, m, make_witness(g, {0}, {}), {0}, 2, b, nullptr};
        Eigen::VectorXd r = oracle::random_features(rng, n, 1).col(0);
        PriOptions opts;
        opts.stop_on_counterexample = false;
        auto res = pri(c, 0, r, b, {}, opts);
        double best = oracle::pagerank_matrix(oracle::adjacency(n, g.edges()), alpha).row(0).dot(r);
        oracle::for_each_disturbance(all_pairs(n), 2, b, [&](const std::vector<NodePair>& f) {
            auto edges = toggle_pairs(g.edges(), f);
            best = std::max(best, oracle::pagerank_matrix(oracle::adjacency(n, edges), alpha).row(0).dot(r));
            return true;
        });
        CHECK(res.upper_bound >= best - 1e-10);
    }
}

TEST_CASE("appnp verifier basics") {
    Graph g = path_instance();
    GnnModel m = identity_appnp(2, 0.5);
    SUBCASE("whole graph") {
        Configuration c{g, m, whole_graph_witness(g), {0, 1, 2, 3}, 3, 1, nullptr};
        CHECK(verify_rcw_appnp(c).robust());
    }
    SUBCASE("rejects gcn") {
        GnnModel gm = identity_gcn(2);
        Configuration c{g, gm, whole_graph_witness(g), {0}, 1, 1, nullptr};
        CHECK_THROWS_AS(verify_rcw_appnp(c), UnsupportedModelError);
    }
    SUBCASE("reports failing cw checks first") {
        // Alone, the planted node falls back to class 0.
        Graph pg = oracle::planted_graph(1);
        GnnModel pm = oracle::planted_appnp();
        Configuration c{pg, pm, make_witness(pg, {0}, {}), {0}, 1, 1, nullptr};
        REQUIRE_FALSE(oracle::Instance{pg, pm, c.witness, {0}}.factual());
        CHECK(verify_rcw_appnp(c).status == VerifyStatus::not_witness);
    }
}

TEST_CASE("appnp verifier is sound and finds brute-force counterexamples") {
    std::size_t robust = 0, agree_negative = 0, negatives = 0;
    for (std::uint64_t seed = 1; seed <= 150; ++seed) {
        auto rc = random_case(seed, true);
        std::size_t b = rc.b.value_or(rc.k);
        Configuration c{rc.g, rc.m, rc.w, rc.test_nodes, rc.k, b, nullptr};
        auto naive = oracle::brute_force({rc.g, rc.m, rc.w, rc.test_nodes}, rc.k, b);
        if (!naive.cw) continue;
        auto out = verify_rcw_appnp(c);
        if (out.robust()) {
            ++robust;
            CHECK(naive.robust);
        }
        if (!naive.robust) {
            ++negatives;
            agree_negative += !out.robust();
            CHECK_FALSE(out.robust());
        }
    }
    MESSAGE("robust verdicts " << robust << ", brute-force negatives " << negatives);
    CHECK(agree_negative == negatives);
}
