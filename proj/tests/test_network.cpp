#include <gtest/gtest.h>

#include <cmath>

#include "microseg/network.hpp"
#include "microseg/rng.hpp"

using namespace microseg;

TEST(PhysicalGraph, PythagoreanDistance) {
    auto g = PhysicalGraph::build({{0, 0, 10, 5}, {3, 4, 10, 5}});
    EXPECT_DOUBLE_EQ(g.distance(0, 1), 5.0);
    EXPECT_DOUBLE_EQ(g.distance(1, 0), 5.0);
}

TEST(PhysicalGraph, SingleNode) {
    auto g = PhysicalGraph::build({{1, 2, 10, 5}});
    EXPECT_EQ(g.node_count(), 1);
    EXPECT_DOUBLE_EQ(g.distance(0, 0), 0.0);
}

TEST(PhysicalGraph, DistancesMatchRecomputation) {
    Rng rng(42);
    std::vector<PhysicalNode> nodes;
    for (int i = 0; i < 9; ++i)
        nodes.push_back({rng.uniform() * 1000, rng.uniform() * 1000, 1 + rng.uniform() * 99,
                         1 + rng.uniform() * 49});
    auto g = PhysicalGraph::build(nodes);
    for (int i = 0; i < 9; ++i) {
        for (int j = 0; j < 9; ++j) {
            const double dx = nodes[i].x - nodes[j].x;
            const double dy = nodes[i].y - nodes[j].y;
            EXPECT_NEAR(g.distance(i, j), std::sqrt(dx * dx + dy * dy), 1e-12);
            EXPECT_DOUBLE_EQ(g.distance(i, j), g.distance(j, i));
        }
    }
}

TEST(PhysicalGraph, RejectsInvalidNodes) {
    EXPECT_THROW(PhysicalGraph::build({}), ValidationError);
    EXPECT_THROW(PhysicalGraph::build({{0, 0, 0.0, 5}}), ValidationError);
    EXPECT_THROW(PhysicalGraph::build({{0, 0, 10, -1}}), ValidationError);
    const double nan = std::nan("");
    EXPECT_THROW(PhysicalGraph::build({{nan, 0, 10, 5}}), ValidationError);
}

namespace {

PhysicalGraph nine_physical() {
    std::vector<PhysicalNode> nodes;
    Rng rng(7);
    for (int i = 0; i < 9; ++i)
        nodes.push_back({rng.uniform() * 500, rng.uniform() * 500, 10 + rng.uniform() * 90,
                         5 + rng.uniform() * 45});
    return PhysicalGraph::build(nodes);
}

} // namespace

TEST(TrustGraph, BuildAndAccess) {
    auto t = TrustGraph::build({0, 1, 2}, {1, 2, 3}, {{0, 1, 0.8}, {1, 2, 0.3}});
    EXPECT_EQ(t.node_count(), 3);
    EXPECT_TRUE(t.has_edge(0, 1));
    EXPECT_FALSE(t.has_edge(0, 2));
    EXPECT_DOUBLE_EQ(t.omega(0, 1), 0.8);
    EXPECT_DOUBLE_EQ(t.omega(1, 0), 0.8);
    EXPECT_EQ(t.edge_count(), 2);
    EXPECT_THROW(t.omega(0, 2), ValidationError);
    EXPECT_THROW(TrustGraph::build({0}, {1}, {{0, 0, 0.5}}), ValidationError);
    EXPECT_THROW(TrustGraph::build({0, 1}, {1, 1}, {{0, 1, 1.5}}), ValidationError);
}

TEST(TrustGraph, RemoveNodeDropsIncidentEdges) {
    std::vector<int> ids(9), roles(9, 1);
    for (int i = 0; i < 9; ++i) ids[i] = i;
    std::vector<TrustGraph::Edge> edges;
    for (int i = 0; i < 8; ++i) edges.push_back({i, i + 1, 0.5});
    edges.push_back({3, 7, 0.9});
    auto t = TrustGraph::build(ids, roles, edges);

    auto after = apply_trust_event(t, RemoveNode{3});
    EXPECT_EQ(after.node_count(), 8);
    EXPECT_FALSE(after.contains(3));
    for (int i = 0; i < after.node_count(); ++i)
        for (int j = 0; j < after.node_count(); ++j)
            if (i != j && after.has_edge(i, j)) {
                EXPECT_NE(after.physical_id(i), 3);
                EXPECT_NE(after.physical_id(j), 3);
            }
    EXPECT_THROW(apply_trust_event(t, RemoveNode{99}), ValidationError);
}

TEST(TrustGraph, DeltaClamps) {
    auto t = TrustGraph::build({0, 1}, {1, 2}, {{0, 1, 0.8}});
    auto up = apply_trust_event(t, TrustDelta{0, 1, 0.5});
    EXPECT_DOUBLE_EQ(up.omega(0, 1), 1.0);
    auto t2 = TrustGraph::build({0, 1}, {1, 2}, {{0, 1, 0.5}});
    auto down = apply_trust_event(t2, TrustDelta{0, 1, -0.3});
    EXPECT_NEAR(down.omega(0, 1), 0.2, 1e-15);
}

TEST(FuseLayers, NoFilteringKeepsAllNodes) {
    auto phys = nine_physical();
    std::vector<int> ids(9), roles(9);
    for (int i = 0; i < 9; ++i) {
        ids[i] = i;
        roles[i] = 1 + i % 4;
    }
    auto trust = TrustGraph::build(ids, roles, {{0, 1, 0.5}, {2, 3, 0.7}});
    auto cond = fuse_layers(phys, trust);
    EXPECT_EQ(cond.m, 9);
    EXPECT_EQ(cond.node_features.size(), 9u * 5u);
    EXPECT_EQ(cond.edge_features.size(), 9u * 9u * 2u);
}

TEST(FuseLayers, SubsetFiltersPhysicalNodes) {
    auto phys = nine_physical();
    std::vector<int> ids = {0, 2, 3, 5, 6, 7, 8};
    std::vector<int> roles(7, 1);
    auto trust = TrustGraph::build(ids, roles, {{0, 2, 0.4}});
    auto cond = fuse_layers(phys, trust);
    EXPECT_EQ(cond.m, 7);
}

TEST(FuseLayers, TrustChannelPassThrough) {
    // With omega values 0, 0.2, 0.9 and 1.0 present, min-max normalization
    // is the identity on the trust channel.
    auto phys = PhysicalGraph::build(
        {{0, 0, 10, 5}, {100, 0, 20, 6}, {0, 100, 30, 7}, {100, 100, 40, 8}});
    auto trust = TrustGraph::build({0, 1, 2, 3}, {1, 2, 3, 4},
                                   {{0, 1, 0.2}, {0, 2, 0.9}, {1, 3, 1.0}});
    auto cond = fuse_layers(phys, trust);
    EXPECT_DOUBLE_EQ(cond.edge_at(0, 1, 1), 0.2);
    EXPECT_DOUBLE_EQ(cond.edge_at(1, 0, 1), 0.2);
    EXPECT_DOUBLE_EQ(cond.edge_at(0, 2, 1), 0.9);
    EXPECT_DOUBLE_EQ(cond.edge_at(2, 3, 1), 0.0);  // no edge
}

TEST(FuseLayers, RejectsUnknownTrustNode) {
    auto phys = PhysicalGraph::build({{0, 0, 10, 5}});
    auto trust = TrustGraph::build({3}, {1}, {});
    EXPECT_THROW(fuse_layers(phys, trust), ValidationError);
}

TEST(FuseLayers, IdempotentAndNormalized) {
    auto phys = nine_physical();
    std::vector<int> ids(9), roles(9);
    for (int i = 0; i < 9; ++i) {
        ids[i] = i;
        roles[i] = 1 + i % 4;
    }
    Rng rng(11);
    std::vector<TrustGraph::Edge> edges;
    for (int i = 0; i < 9; ++i)
        for (int j = i + 1; j < 9; ++j)
            if (rng.uniform() < 0.5) edges.push_back({i, j, rng.uniform()});
    auto trust = TrustGraph::build(ids, roles, edges);

    auto a = fuse_layers(phys, trust);
    auto b = fuse_layers(phys, trust);
    EXPECT_EQ(a.node_features, b.node_features);
    EXPECT_EQ(a.edge_features, b.edge_features);

    // Every non-constant channel spans exactly [0, 1].
    for (int c = 0; c < ConditionTensor::kNodeChannels; ++c) {
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < a.m; ++i) {
            lo = std::min(lo, a.node_at(i, c));
            hi = std::max(hi, a.node_at(i, c));
        }
        if (hi > lo) {
            EXPECT_DOUBLE_EQ(lo, 0.0);
            EXPECT_DOUBLE_EQ(hi, 1.0);
        } else {
            EXPECT_DOUBLE_EQ(hi, 0.0);
        }
    }
    for (int c = 0; c < ConditionTensor::kEdgeChannels; ++c) {
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < a.m; ++i)
            for (int j = 0; j < a.m; ++j) {
                lo = std::min(lo, a.edge_at(i, j, c));
                hi = std::max(hi, a.edge_at(i, j, c));
                EXPECT_DOUBLE_EQ(a.edge_at(i, j, c), a.edge_at(j, i, c));
            }
        if (hi > lo) {
            EXPECT_DOUBLE_EQ(lo, 0.0);
            EXPECT_DOUBLE_EQ(hi, 1.0);
        }
    }
}

TEST(TrustScheme, TableStoresWhatWasWritten) {
    StaticTrustTable table(0.25);
    table.seed(0, 1, 0.6);
    table.seed(2, 1, 0.3);
    EXPECT_DOUBLE_EQ(table.evaluate(0, 1), 0.6);
    EXPECT_DOUBLE_EQ(table.evaluate(1, 0), 0.6);  // symmetric
    table.record_interaction(0, 1, 1.0);
    EXPECT_DOUBLE_EQ(table.evaluate(0, 1), 0.75 * 0.6 + 0.25 * 1.0);
    EXPECT_THROW(table.evaluate(5, 6), ValidationError);
    EXPECT_THROW(table.seed(0, 1, 1.4), ValidationError);
}
