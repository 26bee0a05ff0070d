#include <gtest/gtest.h>

#include "idealflow/whatif.hpp"
#include "support/cycle_edits.hpp"
#include "support/generators.hpp"

using namespace idealflow;
namespace gen = idealflow::testing;
using gen::add;
using gen::remove;

namespace {

SessionOptions with_reference() {
  SessionOptions o;
  o.referenceArc = IdPair{2, 3};
  return o;
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

}  // namespace

TEST(CycleEdits, StageValues) {
  const auto stages = replay(gen::cycle5(), with_reference(), gen::cycle_edits(true));
  ASSERT_EQ(stages.size(), 5u);
  for (const auto& a : stages[0].flows) EXPECT_NEAR(a.flow, 1.0, 1e-9);
  EXPECT_NEAR(stages[1].flow(5, 1), 2.0, 1e-9);
  EXPECT_NEAR(stages[1].flow(1, 2), 2.0, 1e-9);
  EXPECT_NEAR(stages[2].maxFlowArc.flow, 4.0, 1e-9);
  EXPECT_NEAR(stages[2].flow(2, 3), 1.0, 1e-9);
  EXPECT_NEAR(stages[3].maxFlowArc.flow, 6.0, 1e-9);
  EXPECT_EQ(stages[3].maxFlowArc.tail, 5);
  EXPECT_EQ(stages[3].maxFlowArc.head, 1);
  EXPECT_NEAR(stages[4].flow(5, 1), 3.5, 1e-9);
  for (const auto& s : stages) {
    ASSERT_TRUE(s.referenceArc);
    EXPECT_NEAR(s.referenceArc->flow, 1.0, 1e-9);
    EXPECT_LT(s.premagicResidual, 1e-9);
  }
  const auto alt = replay(gen::cycle5(), with_reference(), gen::cycle_edits(false));
  EXPECT_NEAR(alt.back().flow(5, 1), 4.0, 1e-9);
}

TEST(CycleEdits, CycleEntropyIsZero) {
  Session s(gen::cycle5(), {});
  for (double h : s.snapshot().entropyPerNode) EXPECT_EQ(h, 0.0);
  EXPECT_EQ(s.snapshot().networkEntropy, 0.0);
}

TEST(Session, UndoRestoresPreviousSnapshot) {
  Session s(gen::cycle5(), with_reference());
  for (const auto& e : {add(2, 5), add(1, 3)}) s.apply(e);
  const MetricsSnapshot c = s.snapshot();
  s.apply(add(2, 4));
  EXPECT_NEAR(s.snapshot().maxFlowArc.flow, 6.0, 1e-9);
  EXPECT_EQ(s.undo(), c);
  EXPECT_NEAR(s.snapshot().maxFlowArc.flow, 4.0, 1e-9);
  const auto again = s.apply(add(2, 4));
  EXPECT_EQ(snapshot_to_json(again).dump(), snapshot_to_json(replay(gen::cycle5(), with_reference(),
                                                                       {add(2, 5), add(1, 3), add(2, 4)})
                                                                    .back())
                                               .dump());
}

TEST(Session, RejectedEditsLeaveStateUnchanged) {
  Session s(gen::cycle5(), {});
  s.apply(add(2, 5));
  const auto before = snapshot_to_json(s.snapshot()).dump();
  EXPECT_EQ(code_of([&] { s.apply(add(2, 5)); }), ErrorCode::DuplicateArc);
  EXPECT_EQ(code_of([&] { s.apply(remove(3, 1)); }), ErrorCode::MissingArc);
  EXPECT_EQ(code_of([&] { s.apply(remove(5, 1)); }), ErrorCode::NotStronglyConnected);
  EXPECT_EQ(code_of([&] { s.apply(add(2, 2)); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { s.apply(add(2, 99)); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(snapshot_to_json(s.snapshot()).dump(), before);
  EXPECT_EQ(s.stage(), 1u);
  EXPECT_EQ(s.edits().size(), 1u);
}

TEST(Session, EmptyHistory) {
  Session s(gen::cycle5(), {});
  EXPECT_EQ(code_of([&] { s.undo(); }), ErrorCode::EmptyHistory);
}

TEST(Session, NotStronglyConnectedWithoutAugment) {
  auto doc = gen::cycle5();
  doc.arcs.pop_back();
  EXPECT_EQ(code_of([&] { Session(doc, {}); }), ErrorCode::NotStronglyConnected);
  SessionOptions opts;
  opts.augment = true;
  Session s(doc, opts);
  ASSERT_TRUE(s.snapshot().cloudNode);
  EXPECT_EQ(*s.snapshot().cloudNode, 6);
  EXPECT_EQ(s.snapshot().nodeCount, 6u);
  // with the cloud, removing a path arc is allowed
  s.apply(remove(2, 3));
  EXPECT_EQ(s.stage(), 1u);
}

TEST(Session, FlowMethodsAgree) {
  Session s(gen::cycle5(), {});
  for (const auto& e : {add(2, 5), add(1, 3), add(2, 4)}) s.apply(e);
  const auto m = s.flow(FlowNormalization::Min, FlowMethod::Markov);
  const auto n = s.flow(FlowNormalization::Min, FlowMethod::Nullspace);
  EXPECT_LT((m.dense() - n.dense()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(m.max_arc().value, 6.0, 1e-9);
  EXPECT_NEAR(s.flow(FlowNormalization::Total, FlowMethod::Markov).total(), 1.0, 1e-12);
}

// Replaying the same random edit sequence twice gives byte-identical snapshots.
TEST(Session, ReplayDeterminism) {
  gen::Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = gen::random_strongly_connected(rng, gen::uniform_index(rng, 3, 12), 0.15);
    const auto doc = document_from_network(net);
    SessionOptions opts;
    opts.augment = true;
    Session live(doc, opts);
    std::vector<Edit> accepted;
    for (int k = 0; k < 15; ++k) {
      const long long t = static_cast<long long>(gen::uniform_index(rng, 1, net.node_count()));
      const long long h = static_cast<long long>(gen::uniform_index(rng, 1, net.node_count()));
      const Edit e{rng() % 2 ? EditOp::Add : EditOp::Remove, t, h, 1.0};
      try {
        live.apply(e);
        accepted.push_back(e);
      } catch (const Error&) {
      }
    }
    const auto stages = replay(doc, opts, accepted);
    EXPECT_EQ(snapshot_to_json(stages.back()).dump(), snapshot_to_json(live.snapshot()).dump());
  }
}

TEST(Script, Forms) {
  const auto bare = parse_whatif_script(R"([{"op": "add", "tail": 2, "head": 5}])");
  ASSERT_EQ(bare.edits.size(), 1u);
  EXPECT_FALSE(bare.referenceArc);
  const auto full = parse_whatif_script(
      R"({"referenceArc": {"tail": 2, "head": 3}, "edits": [{"op": "remove", "tail": 1, "head": 2, "capacity": 3}]})");
  EXPECT_EQ(full.edits[0], (Edit{EditOp::Remove, 1, 2, 3.0}));
  EXPECT_EQ(full.referenceArc, (IdPair{2, 3}));
  EXPECT_EQ(parse_whatif_script("[]").edits.size(), 0u);
  try {
    parse_whatif_script(R"({"edits": [{"op": "flip", "tail": 1, "head": 2}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_EQ(e.detail(), "edits[0].op");
  }
}

TEST(Replay, EmptyScriptAndRejection) {
  EXPECT_EQ(replay(gen::cycle5(), {}, {}).size(), 1u);
  try {
    replay(gen::cycle5(), {}, {add(2, 5), remove(5, 1)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EditRejected);
    EXPECT_EQ(e.detail(), "2");
  }
  const auto report = replay_report(replay(gen::cycle5(), {}, {add(2, 5)}));
  EXPECT_EQ(report["stages"].size(), 2u);
  EXPECT_EQ(report["stages"][1]["lastEdit"]["op"], "add");
}
