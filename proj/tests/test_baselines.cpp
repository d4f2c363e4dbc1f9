#include <gtest/gtest.h>

#include <cmath>

#include "microseg/baselines.hpp"
#include "microseg/scenario.hpp"

using namespace microseg;

namespace {

Env nine_env() { return make_env(nine_node_aigc()); }

} // namespace

TEST(NoSegmentation, SelectsEveryTrustEdge) {
    const Env env = nine_env();
    const auto seg = no_segmentation(env);
    for (int i = 0; i < seg.m(); ++i)
        for (int j = i + 1; j < seg.m(); ++j)
            EXPECT_EQ(seg.selected(i, j), env.trust.has_edge(i, j));
    EXPECT_TRUE(segmentation_valid(seg, env.trust));
}

TEST(NoSegmentation, EdgelessTrustGraphGivesEmptySegmentation) {
    Env env = nine_env();
    Scenario sc = nine_node_aigc();
    sc.trust_edges.clear();
    const Env bare = make_env(sc);
    const auto seg = no_segmentation(bare);
    EXPECT_EQ(seg.selected_count(), 0);
    EXPECT_DOUBLE_EQ(reward(seg, bare), 0.0);
}

TEST(RandomSegmentation, OnePartEqualsNoSegmentation) {
    const Env env = nine_env();
    Rng rng(1);
    const auto seg = random_segmentation(env, rng, 1);
    EXPECT_TRUE(seg == no_segmentation(env));
}

TEST(RandomSegmentation, SingletonPartsHaveNoEdges) {
    const Env env = nine_env();
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const auto seg = random_segmentation(env, rng, env.trust.node_count());
        EXPECT_EQ(seg.selected_count(), 0);
        EXPECT_DOUBLE_EQ(reward(seg, env), 0.0);
    }
}

TEST(RandomSegmentation, InternalEdgeFractionMatchesCombinatorialExpectation) {
    // For a balanced partition of m nodes into 2 parts, an edge is internal
    // to its part with probability (C(a,2)+C(b,2))/C(m,2); the two-part
    // segmentation keeps on average half of those (one part evaluated).
    const Env env = nine_env();
    const int m = env.trust.node_count();
    const int a = (m + 1) / 2, b = m / 2;
    const double p_internal =
        (0.5 * a * (a - 1) + 0.5 * b * (b - 1)) / (0.5 * m * (m - 1));
    // The evaluated part is chosen uniformly, so an edge survives iff it is
    // internal AND its (uniform random) part is the chosen one.
    const double p_kept = (0.5 * a * (a - 1) / (0.5 * m * (m - 1))) * 0.5 +
                          (0.5 * b * (b - 1) / (0.5 * m * (m - 1))) * 0.5;
    (void)p_internal;
    const int edges = env.trust.edge_count();
    Rng rng(3);
    const int trials = 20000;
    double acc = 0.0, acc2 = 0.0;
    for (int s = 0; s < trials; ++s) {
        const double frac =
            random_segmentation(env, rng, 2).selected_count() / static_cast<double>(edges);
        acc += frac;
        acc2 += frac * frac;
    }
    const double mean = acc / trials;
    const double se = std::sqrt((acc2 / trials - mean * mean) / trials);
    EXPECT_NEAR(mean, p_kept, 4 * se);
}

TEST(RandomSegmentation, DeterministicUnderSeed) {
    const Env env = nine_env();
    Rng a(42), b(42);
    EXPECT_TRUE(random_segmentation(env, a, 3) == random_segmentation(env, b, 3));
}

namespace {

// Exhaustive bipartition oracle: minimum cut weight over all balanced
// two-way splits (part sizes differing by at most one).
double min_cut_oracle(const Env& env, bool trust_weights) {
    const int m = env.trust.node_count();
    double best = 1e300;
    for (int assign = 0; assign < (1 << m); ++assign) {
        const int size_a = __builtin_popcount(static_cast<unsigned>(assign));
        if (std::abs(2 * size_a - m) > 1) continue;
        double cut = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) {
                if (!env.trust.has_edge(i, j)) continue;
                const bool side_i = assign >> i & 1, side_j = assign >> j & 1;
                if (side_i != side_j) cut += trust_weights ? env.trust.omega(i, j) : 1.0;
            }
        best = std::min(best, cut);
    }
    return best;
}

double cut_weight(const Env& env, const std::vector<int>& labels, bool trust_weights) {
    double cut = 0.0;
    for (int i = 0; i < env.trust.node_count(); ++i)
        for (int j = i + 1; j < env.trust.node_count(); ++j)
            if (env.trust.has_edge(i, j) &&
                labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)])
                cut += trust_weights ? env.trust.omega(i, j) : 1.0;
    return cut;
}

// Two four-node cliques joined by one low-trust bridge.
Env two_clique_env() {
    Scenario sc;
    sc.name = "two_cliques";
    for (int i = 0; i < 8; ++i)
        sc.nodes.push_back({i, 100.0 * i, 10.0 * (i % 3), 60.0, 25.0, 1 + i % 4});
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) sc.trust_edges.push_back({i, j, 0.85});
    for (int i = 4; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j) sc.trust_edges.push_back({i, j, 0.8});
    sc.trust_edges.push_back({3, 4, 0.1});  // the bridge
    sc.service.steps = {{1, 50, 5, 2e6, 0.5, 0.15},
                        {2, 80, 8, 4e6, 0.5, 0.15},
                        {3, 100, 10, 4e6, 0.5, 0.15}};
    sc.service.deadline_s = 20.0;
    sc.service.channel = {1e6, 2.5, 1e-10};
    sc.service.weights = {1.0, 1.0, 4.0};
    return make_env(sc);
}

} // namespace

TEST(GreedyPartition, TrustCostCutsTheBridge) {
    const Env env = two_clique_env();
    const auto labels = greedy_partition_labels(env, GreedyCost::Trust, 2);
    EXPECT_NEAR(cut_weight(env, labels, true), min_cut_oracle(env, true), 1e-12);
    // The bridge is the only edge crossed.
    EXPECT_NE(labels[3], labels[4]);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(labels[static_cast<std::size_t>(i)], labels[0]);
    for (int i = 4; i < 8; ++i) EXPECT_EQ(labels[static_cast<std::size_t>(i)], labels[4]);
}

TEST(GreedyPartition, UniformWeightsStayBalanced) {
    const Env env = nine_env();
    const auto labels = greedy_partition_labels(env, GreedyCost::Trust, 2);
    int count_a = 0;
    for (int l : labels) count_a += l == 0 ? 1 : 0;
    EXPECT_NEAR(count_a, env.trust.node_count() / 2.0, 0.5 + 1e-12);
}

TEST(GreedyPartition, ResourceVariantBalancesResources) {
    const Env env = two_clique_env();
    const auto labels = greedy_partition_labels(env, GreedyCost::Resource, 2);
    double max_c = 0.0, max_t = 0.0;
    for (int i = 0; i < env.trust.node_count(); ++i) {
        const auto& nd = env.physical.node(env.trust.physical_id(i));
        max_c = std::max(max_c, nd.compute_gflops);
        max_t = std::max(max_t, nd.transmit_watt);
    }
    double side[2] = {0.0, 0.0};
    for (int i = 0; i < env.trust.node_count(); ++i) {
        const auto& nd = env.physical.node(env.trust.physical_id(i));
        side[labels[static_cast<std::size_t>(i)]] +=
            nd.compute_gflops / max_c + nd.transmit_watt / max_t;
    }
    const double total = side[0] + side[1];
    EXPECT_LE(std::abs(side[0] - side[1]), 0.1 * total);
}

TEST(GreedyPartition, ReturnsValidBestPart) {
    const Env env = nine_env();
    for (GreedyCost cost : {GreedyCost::Trust, GreedyCost::Resource}) {
        const auto seg = greedy_partition(env, cost, 2);
        EXPECT_TRUE(segmentation_valid(seg, env.trust));
    }
    EXPECT_THROW(greedy_partition(env, GreedyCost::Trust, 1), ValidationError);
}

TEST(GreedyPartition, IsolatedNodesSpreadRoundRobin) {
    Scenario sc = nine_node_aigc();
    // Disconnect nodes 7 and 8 entirely.
    std::vector<TrustGraph::Edge> kept;
    for (const auto& e : sc.trust_edges)
        if (e.a < 7 && e.b < 7) kept.push_back(e);
    sc.trust_edges = kept;
    const Env env = make_env(sc);
    const auto labels = greedy_partition_labels(env, GreedyCost::Trust, 2);
    EXPECT_EQ(labels.size(), 9u);
    EXPECT_NE(labels[7], labels[8]);  // round-robin separates them
}

TEST(DrlBaseline, ZeroEpochsGivesInitialNet) {
    const Env env = make_env(random_scenario(77, 4, 3, 1.0));
    DenoiserConfig nc;
    nc.layers = 1;
    nc.heads = 2;
    nc.head_dim = 3;
    nc.node_dim = 6;
    nc.edge_dim = 4;
    nc.time_dim = 4;
    TrainConfig tc;
    tc.epochs = 0;
    tc.seed = 5;
    const auto res = drl_baseline(env, nc, tc);
    EXPECT_TRUE(res.log.epochs.empty());
    EXPECT_EQ(res.net.params().flat, DenoiseNet::init(nc, 5).params().flat);
    EXPECT_TRUE(segmentation_valid(drl_argmax_segmentation(res.net, env), env.trust));
}

TEST(DrlBaseline, LearnsOnToyEnvironment) {
    const Env env = make_env(random_scenario(77, 4, 3, 1.0));
    DenoiserConfig nc;
    nc.layers = 1;
    nc.heads = 2;
    nc.head_dim = 4;
    nc.node_dim = 8;
    nc.edge_dim = 4;
    nc.time_dim = 4;
    TrainConfig tc;
    tc.epochs = 80;
    tc.batch_size = 16;
    tc.learning_rate = 0.05;
    tc.seed = 3;
    const auto res = drl_baseline(env, nc, tc);
    double early = 0.0, late = 0.0;
    for (int k = 0; k < 10; ++k) {
        early += res.log.epochs[static_cast<std::size_t>(k)].avg_reward;
        late += res.log.epochs[res.log.epochs.size() - 1 - static_cast<std::size_t>(k)]
                    .avg_reward;
    }
    EXPECT_GT(late, early);
    // Determinism under the seed.
    const auto res2 = drl_baseline(env, nc, tc);
    EXPECT_EQ(res.net.params().flat, res2.net.params().flat);
}
