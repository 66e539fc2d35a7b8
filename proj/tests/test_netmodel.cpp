#include <gtest/gtest.h>

#include "hrlsched/netmodel.hpp"
#include "support/topologies.hpp"

using namespace hrlsched;
using namespace testsupport;

TEST(BuildGraph, GridTopologyLinksMatchRanges) {
    const NetworkGraph g = default_grid_topology();
    EXPECT_TRUE(g.has_link(3, 4));   // 30 m apart
    EXPECT_TRUE(g.has_link(1, 3));   // 30 m
    EXPECT_FALSE(g.has_link(1, 6));  // 70 m > 50
    EXPECT_TRUE(g.has_link(2, 6));   // exactly 50 m (30-40-50 triangle), boundary included
    EXPECT_FALSE(g.has_link(2, 4));  // 60 m
}

TEST(BuildGraph, OutOfRangePairHasNoLinks) {
    const NetworkGraph g = build_graph({{1, 0, 0}, {2, 0, 60}}, 50.0, 100.0);
    EXPECT_TRUE(g.links().empty());
}

TEST(BuildGraph, RejectsBadInput) {
    EXPECT_THROW(build_graph({{1, 0, 0}, {1, 10, 0}}, 50, 100), ConfigError);
    EXPECT_THROW(build_graph({{1, 0, 0}, {2, 10, 0}}, 0, 100), ConfigError);
    EXPECT_THROW(build_graph({{1, 0, 0}}, 50, 100), ConfigError);
    EXPECT_THROW(build_graph({{1, 0, 0}, {2, 0, 0}}, 50, 100), ConfigError);
    EXPECT_THROW(build_graph({{1, 0, 0}, {2, 10, 0}}, 50, 40), ConfigError);
}

TEST(BuildGraph, LinkSymmetryOnRandomTopologies) {
    Rng rng(7);
    std::uniform_real_distribution<double> coord(0.0, 150.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<NodePosition> pos;
        const int n = 2 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) pos.push_back({i + 1, coord(rng), coord(rng)});
        NetworkGraph g;
        try {
            g = build_graph(pos, 60.0, 120.0);
        } catch (const ConfigError&) {
            continue;  // coincident points
        }
        for (const auto& [a, b] : g.links()) EXPECT_TRUE(g.has_link(b, a));
        EXPECT_EQ(g.num_links() % 2, 0);
    }
}

TEST(ForwardingTree, GridTopologyParents) {
    const NetworkGraph g = default_grid_topology();
    const ForwardingTree tree = build_forwarding_tree(g);
    // one hop from the sink
    EXPECT_EQ(tree.parent(2), 1);
    EXPECT_EQ(tree.parent(3), 1);
    EXPECT_EQ(tree.parent(4), 1);
    // node 5 is reachable through 2 or 3; the lower id wins
    EXPECT_EQ(tree.parent(5), 2);
    EXPECT_EQ(tree.parent(6), 2);
    EXPECT_EQ(tree.parent(7), 3);
    EXPECT_EQ(tree.parent(8), 5);
    EXPECT_EQ(tree.parent(9), 5);
    EXPECT_EQ(tree.parent(10), 6);
}

TEST(ForwardingTree, TwoNodeChain) {
    const NetworkGraph g = chain_topology(2);
    const ForwardingTree tree = build_forwarding_tree(g);
    EXPECT_EQ(tree.parent(2), 1);
}

TEST(ForwardingTree, HopCountsMatchIndependentBfs) {
    for (const NetworkGraph& g :
         {default_grid_topology(), chain_topology(5), square_topology()}) {
        const ForwardingTree tree = build_forwarding_tree(g);
        const auto dist = bfs_distances(g, 1);
        for (const auto& np : g.nodes())
            EXPECT_EQ(tree.hop_count(np.node_id), dist.at(np.node_id));
    }
}

TEST(ForwardingTree, UnreachableNodeNamesOffender) {
    // two clusters out of range of each other
    const NetworkGraph g =
        build_graph({{1, 0, 0}, {2, 40, 0}, {3, 300, 0}, {4, 340, 0}}, 50.0, 100.0);
    try {
        build_forwarding_tree(g);
        FAIL() << "expected TopologyError";
    } catch (const TopologyError& e) {
        EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    }
}

TEST(PathLinks, GridTopologyPaths) {
    const ForwardingTree tree = build_forwarding_tree(default_grid_topology());
    const std::vector<Link> expected{{8, 5}, {5, 2}, {2, 1}};
    EXPECT_EQ(path_links(tree, 8), expected);
    EXPECT_TRUE(path_links(tree, 1).empty());
    EXPECT_EQ(path_links(tree, 3), (std::vector<Link>{{3, 1}}));
    EXPECT_THROW(path_links(tree, 99), LookupError);
}

TEST(Determinism, SamePositionsSameGraphAndTree) {
    const NetworkGraph a = default_grid_topology();
    const NetworkGraph b = default_grid_topology();
    EXPECT_EQ(a.links(), b.links());
    EXPECT_EQ(build_forwarding_tree(a).edges(), build_forwarding_tree(b).edges());
}
