#include <gtest/gtest.h>

#include "idealflow/graph.hpp"
#include "support/generators.hpp"

using namespace idealflow;
using idealflow::testing::Rng;

namespace {

DirectedNetwork five_node() {
  return from_adjacency({{0, 1, 1, 1, 1}, {0, 0, 1, 1, 1}, {0, 1, 0, 1, 1}, {1, 0, 0, 0, 1}, {0, 0, 0, 1, 0}});
}

DirectedNetwork path3() { return DirectedNetwork(3, {{0, 1}, {1, 2}}); }

Error error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorCode::InvalidArgument, "");
}

}  // namespace

TEST(Network, ArcsAreSortedRowMajor) {
  DirectedNetwork net(3, {{2, 0}, {0, 2}, {0, 1}, {1, 2}});
  ASSERT_EQ(net.arc_count(), 4u);
  EXPECT_EQ(net.arcs()[0].head, 1u);
  EXPECT_EQ(net.arcs()[1].head, 2u);
  EXPECT_EQ(net.arcs()[3].tail, 2u);
  EXPECT_EQ(net.out_degree(0), 2u);
  EXPECT_EQ(net.out_degree(1), 1u);
  EXPECT_EQ(net.out_begin(2), 3u);
  EXPECT_EQ(net.find_arc(1, 2), std::optional<std::size_t>(2));
  EXPECT_FALSE(net.find_arc(2, 1));
}

TEST(Network, RejectsBadArcs) {
  EXPECT_EQ(error_of([] { DirectedNetwork(2, {{0, 1}, {0, 1}}); }).code(), ErrorCode::DuplicateArc);
  EXPECT_EQ(error_of([] { DirectedNetwork(2, {{0, 2}}); }).code(), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_of([] { DirectedNetwork(2, {{0, 1, 0.0}}); }).code(), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_of([] { DirectedNetwork(2, {{0, 1, -3.0}}); }).code(), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_of([] { DirectedNetwork(2, {}, {"a"}); }).code(), ErrorCode::InvalidArgument);
}

TEST(Network, FiveNodeHasThirteenArcs) {
  const auto net = five_node();
  EXPECT_EQ(net.node_count(), 5u);
  EXPECT_EQ(net.arc_count(), 13u);
  EXPECT_EQ(max_out_degree(net), 4u);
}

TEST(Network, WithAndWithoutArc) {
  const auto net = path3();
  const auto more = net.with_arc({2, 0});
  EXPECT_EQ(more.arc_count(), 3u);
  EXPECT_EQ(net.arc_count(), 2u);
  EXPECT_EQ(error_of([&] { more.with_arc({2, 0}); }).code(), ErrorCode::DuplicateArc);
  EXPECT_EQ(more.without_arc(2, 0), net);
  EXPECT_EQ(error_of([&] { net.without_arc(2, 0); }).code(), ErrorCode::MissingArc);
}

TEST(Network, SelfLoopsRemoved) {
  DirectedNetwork net(2, {{0, 0}, {0, 1}, {1, 0}});
  EXPECT_TRUE(net.has_self_loops());
  const auto clean = remove_self_loops(net);
  EXPECT_FALSE(clean.has_self_loops());
  EXPECT_EQ(clean.arc_count(), 2u);
}

TEST(Network, LabelsDefaultToOneBased) {
  EXPECT_EQ(path3().label(0), "1");
  DirectedNetwork named(2, {{0, 1}}, {"a", "b"});
  EXPECT_EQ(named.label(1), "b");
}

TEST(Connectivity, Examples) {
  EXPECT_TRUE(is_strongly_connected(five_node()));
  EXPECT_FALSE(is_strongly_connected(path3()));
  EXPECT_TRUE(is_strongly_connected(DirectedNetwork(1, {})));
  EXPECT_TRUE(is_strongly_connected(DirectedNetwork(0, {})));
  EXPECT_EQ(strong_components(path3()).count, 3u);
}

// Two nodes are in the same component iff each reaches the other in the
// Floyd-Warshall closure.
TEST(Connectivity, ComponentsMatchReachabilityClosure) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = idealflow::testing::uniform_index(rng, 1, 25);
    const auto net = idealflow::testing::random_digraph(rng, n, idealflow::testing::uniform_real(rng, 0.0, 0.3));
    const auto comps = strong_components(net);
    const auto hops = idealflow::testing::all_pairs_hops(net);
    std::set<std::size_t> distinct(comps.of.begin(), comps.of.end());
    EXPECT_EQ(distinct.size(), comps.count);
    bool all = true;
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = 0; j < n; ++j) {
        const bool mutual = idealflow::testing::reaches(hops, i, j) && idealflow::testing::reaches(hops, j, i);
        ASSERT_EQ(mutual, comps.of[i] == comps.of[j]) << "trial " << trial;
        all = all && mutual;
      }
    }
    EXPECT_EQ(all, is_strongly_connected(net));
  }
}

TEST(Augment, PathGetsCloud) {
  const auto aug = augment_with_cloud(path3());
  ASSERT_TRUE(aug.cloudNode);
  EXPECT_EQ(*aug.cloudNode, 3u);
  EXPECT_EQ(aug.baseNodeCount, 3u);
  EXPECT_EQ(aug.network.node_count(), 4u);
  EXPECT_EQ(aug.dummyArcs.size(), 2u);
  EXPECT_TRUE(aug.network.find_arc(3, 0));
  EXPECT_TRUE(aug.network.find_arc(2, 3));
  EXPECT_TRUE(aug.is_dummy(3, 0));
  EXPECT_FALSE(aug.is_dummy(0, 1));
  EXPECT_TRUE(is_strongly_connected(aug.network));
}

TEST(Augment, StronglyConnectedUnchanged) {
  const auto aug = augment_with_cloud(five_node());
  EXPECT_FALSE(aug.cloudNode);
  EXPECT_EQ(aug.network, five_node());
  EXPECT_TRUE(aug.dummyArcs.empty());
}

TEST(Augment, WeavingSection) {
  // two entries merge, then split to two exits
  DirectedNetwork weaving(6, {{0, 2}, {1, 2}, {2, 3}, {3, 4}, {3, 5}});
  const auto aug = augment_with_cloud(weaving, 2.5);
  ASSERT_TRUE(aug.cloudNode);
  EXPECT_EQ(aug.dummyArcs.size(), 4u);
  for (const Arc& a : aug.dummyArcs) EXPECT_EQ(a.capacity, 2.5);
  EXPECT_TRUE(aug.network.find_arc(6, 0));
  EXPECT_TRUE(aug.network.find_arc(6, 1));
  EXPECT_TRUE(aug.network.find_arc(4, 6));
  EXPECT_TRUE(aug.network.find_arc(5, 6));
}

TEST(Augment, SinkCycleAttached) {
  // 0 -> {1 <-> 2}: the sink component has out-arcs internally but none leaving
  DirectedNetwork net(3, {{0, 1}, {1, 2}, {2, 1}});
  const auto aug = augment_with_cloud(net);
  EXPECT_TRUE(is_strongly_connected(aug.network));
  EXPECT_TRUE(aug.network.find_arc(1, 3));
}

TEST(Augment, IsolatedNodeFails) {
  DirectedNetwork net(3, {{0, 1}});
  EXPECT_EQ(error_of([&] { augment_with_cloud(net); }).code(), ErrorCode::AugmentationFailed);
}

TEST(Augment, RandomDigraphsBecomeStronglyConnected) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = idealflow::testing::uniform_index(rng, 2, 20);
    auto net = idealflow::testing::random_digraph(rng, n, idealflow::testing::uniform_real(rng, 0.05, 0.4));
    std::vector<std::size_t> degree(n, 0);
    for (const Arc& a : net.arcs()) ++degree[a.tail], ++degree[a.head];
    if (std::count(degree.begin(), degree.end(), 0u) > 0) continue;
    const auto aug = augment_with_cloud(net);
    EXPECT_TRUE(is_strongly_connected(aug.network));
    for (const Arc& a : net.arcs()) EXPECT_TRUE(aug.network.find_arc(a.tail, a.head));
  }
}

TEST(Incidence, ColumnsFollowArcOrder) {
  const auto net = five_node();
  const auto b = incidence(net);
  const Eigen::MatrixXd d(b.matrix);
  ASSERT_EQ(d.rows(), 5);
  ASSERT_EQ(d.cols(), 13);
  for (std::size_t k = 0; k < net.arc_count(); ++k) {
    const Arc& a = net.arcs()[k];
    EXPECT_EQ(d(static_cast<Eigen::Index>(a.tail), static_cast<Eigen::Index>(k)), 1.0);
    EXPECT_EQ(d(static_cast<Eigen::Index>(a.head), static_cast<Eigen::Index>(k)), -1.0);
    EXPECT_EQ(d.col(static_cast<Eigen::Index>(k)).cwiseAbs().sum(), 2.0);
  }
  EXPECT_NEAR(d.colwise().sum().cwiseAbs().maxCoeff(), 0.0, 0.0);
}

TEST(Diameter, MatchesFloydWarshall) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = idealflow::testing::uniform_index(rng, 1, 25);
    const auto net = idealflow::testing::random_strongly_connected(rng, n, 0.05);
    const auto hops = idealflow::testing::all_pairs_hops(net);
    std::size_t expect = 0;
    for (const auto& row : hops) expect = std::max(expect, *std::max_element(row.begin(), row.end()));
    EXPECT_EQ(diameter(net), expect);
  }
  EXPECT_EQ(diameter(five_node()), 3u);
  EXPECT_EQ(error_of([] { diameter(path3()); }).code(), ErrorCode::NotStronglyConnected);
}
