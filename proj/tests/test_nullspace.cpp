#include <gtest/gtest.h>

#include "idealflow/markov.hpp"
#include "idealflow/nullspace.hpp"
#include "support/generators.hpp"

using namespace idealflow;
namespace gen = idealflow::testing;

namespace {

DirectedNetwork five_node() {
  return from_adjacency({{0, 1, 1, 1, 1}, {0, 0, 1, 1, 1}, {0, 1, 0, 1, 1}, {1, 0, 0, 0, 1}, {0, 0, 0, 1, 0}});
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

double max_diff(const IdealFlowMatrix& a, const IdealFlowMatrix& b) {
  return (a.dense() - b.dense()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Constraints, FiveNodeShape) {
  const auto net = five_node();
  const auto c = build_constraints(net);
  EXPECT_EQ(c.matrix.rows(), 8);
  EXPECT_EQ(c.matrix.cols(), 13);
  const auto d = build_system(net);
  EXPECT_EQ(d.matrix.rows(), 13);
  EXPECT_EQ(d.matrix.cols(), 13);
  EXPECT_EQ(d.nodeCount, 5u);
  Eigen::FullPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(d.matrix)};
  EXPECT_EQ(lu.rank(), 12);
}

TEST(Constraints, RowsChainOutArcs) {
  const auto net = five_node();
  const Eigen::MatrixXd c(build_constraints(net).matrix);
  // node 1 has out-arcs at columns 0..3
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_EQ(c(0, 1), -1.0);
  EXPECT_EQ(c(2, 2), 1.0);
  EXPECT_EQ(c(2, 3), -1.0);
  for (Eigen::Index r = 0; r < c.rows(); ++r) EXPECT_EQ(c.row(r).sum(), 0.0);
}

TEST(Split, PositiveAndNegativeParts) {
  const auto b = incidence(five_node());
  const auto s = split_incidence(b);
  const Eigen::MatrixXd pos(s.positive), neg(s.negative), full(b.matrix);
  EXPECT_EQ((pos + neg - full).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(pos.minCoeff(), 0.0);
  EXPECT_LE(neg.maxCoeff(), 0.0);
}

TEST(SolveNull, FiveNodeEdgeVector) {
  const auto net = five_node();
  const Eigen::VectorXd e = normalize_edges(solve_null(build_system(net)));
  const double expect[] = {2, 2, 2, 2, 1, 1, 1, 1, 1, 1, 8, 8, 12};
  for (int k = 0; k < 13; ++k) EXPECT_NEAR(e[k], expect[k], 1e-9);
  const Eigen::VectorXd loads = node_loads(split_incidence(incidence(net)), e);
  const double margins[] = {8, 3, 3, 16, 12};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(loads[i], margins[i], 1e-9);
}

TEST(SolveNull, Errors) {
  AugmentedSystem empty;
  EXPECT_EQ(code_of([&] { solve_null(empty); }), ErrorCode::DegenerateNullSpace);
  // dangling node: system is not square
  DirectedNetwork dangling(3, {{0, 1}, {0, 2}, {1, 0}});
  EXPECT_EQ(code_of([&] { solve_null(build_system(dangling)); }), ErrorCode::DegenerateNullSpace);
  // two disjoint cycles: two-dimensional kernel
  DirectedNetwork split(4, {{0, 1}, {1, 0}, {2, 3}, {3, 2}});
  EXPECT_EQ(code_of([&] { solve_null(build_system(split)); }), ErrorCode::DegenerateNullSpace);
  NullspaceOptions sparse;
  sparse.denseLimit = 0;
  EXPECT_EQ(code_of([&] { solve_null(build_system(split), sparse); }), ErrorCode::DegenerateNullSpace);
  EXPECT_EQ(code_of([&] { nullspace_ideal_flow(split); }), ErrorCode::NotStronglyConnected);
}

TEST(NormalizeEdges, Errors) {
  EXPECT_EQ(code_of([] { normalize_edges(Eigen::VectorXd()); }), ErrorCode::EmptyFlow);
  Eigen::VectorXd e(3);
  e << 1, 0, 2;
  EXPECT_EQ(code_of([&] { normalize_edges(e); }), ErrorCode::NonPositiveEntry);
}

TEST(NodeLoads, ConservationViolated) {
  const auto net = five_node();
  Eigen::VectorXd e = Eigen::VectorXd::Ones(13);
  EXPECT_EQ(code_of([&] { node_loads(split_incidence(incidence(net)), e); }), ErrorCode::ConservationViolated);
}

TEST(NullspaceFlow, AgreesWithMarkovOnRandomNetworks) {
  gen::Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = gen::random_strongly_connected(rng, gen::uniform_index(rng, 2, 30), 0.1);
    const auto m = normalize_min(markov_ideal_flow(net));
    const auto ns = nullspace_ideal_flow(net);
    EXPECT_LT(max_diff(m, ns), 1e-8 * std::max(1.0, m.max_arc().value)) << "trial " << trial;
  }
}

TEST(NullspaceFlow, SparseRouteAgreesWithDense) {
  gen::Rng rng(43);
  NullspaceOptions sparse;
  sparse.denseLimit = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto net = gen::random_strongly_connected(rng, gen::uniform_index(rng, 2, 60), 0.05);
    EXPECT_LT(max_diff(nullspace_ideal_flow(net), nullspace_ideal_flow(net, sparse)), 1e-8);
  }
}
