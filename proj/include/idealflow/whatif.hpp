#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idealflow/error.hpp"
#include "idealflow/format.hpp"
#include "idealflow/graph.hpp"
#include "idealflow/io.hpp"
#include "idealflow/markov.hpp"
#include "idealflow/nullspace.hpp"

namespace idealflow {

// Dynamic-graph what-if analysis: a network plus an ordered list of arc
// edits, with the ideal flow recomputed from scratch after every edit.
// Nodes are addressed by their document ids throughout.

struct IdPair {
  long long tail = 0;
  long long head = 0;
  friend bool operator==(const IdPair&, const IdPair&) = default;
};

struct SessionOptions {
  bool augment = false;
  bool capacityWeighted = false;
  std::optional<IdPair> referenceArc;
  double dummyCapacity = 1.0;
};

enum class EditOp { Add, Remove };

struct Edit {
  EditOp op = EditOp::Add;
  long long tail = 0;
  long long head = 0;
  double capacity = 1.0;
  friend bool operator==(const Edit&, const Edit&) = default;
};

struct ArcFlow {
  long long tail = 0;
  long long head = 0;
  double flow = 0.0;
  friend bool operator==(const ArcFlow&, const ArcFlow&) = default;
};

struct MetricsSnapshot {
  std::size_t stage = 0;
  std::optional<Edit> lastEdit;
  std::size_t nodeCount = 0;
  std::optional<long long> cloudNode;
  std::vector<ArcFlow> flows;  ///< min-normalized, row-major
  ArcFlow maxFlowArc;
  double premagicResidual = 0.0;
  std::vector<double> entropyPerNode;  ///< bits, node order of the (augmented) network
  double networkEntropy = 0.0;
  std::optional<ArcFlow> referenceArc;

  friend bool operator==(const MetricsSnapshot&, const MetricsSnapshot&) = default;

  double flow(long long tail, long long head) const {
    for (const auto& a : flows) {
      if (a.tail == tail && a.head == head) return a.flow;
    }
    return 0.0;
  }
};

inline nlohmann::ordered_json edit_to_json(const Edit& e) {
  return {{"op", e.op == EditOp::Add ? "add" : "remove"},
          {"tail", e.tail},
          {"head", e.head},
          {"capacity", round_significant(e.capacity)}};
}

inline Edit edit_from_json(const nlohmann::json& j, const std::string& path = "edit") {
  if (!j.is_object()) throw detail::schema_error(path, "expected an object");
  Edit e;
  if (!j.contains("op") || !j["op"].is_string()) throw detail::schema_error(path + ".op", "expected \"add\" or \"remove\"");
  const auto op = j["op"].get<std::string>();
  if (op == "add") e.op = EditOp::Add;
  else if (op == "remove") e.op = EditOp::Remove;
  else throw detail::schema_error(path + ".op", "expected \"add\" or \"remove\"");
  if (!j.contains("tail") || !j.contains("head")) throw detail::schema_error(path, "missing tail or head");
  e.tail = detail::json_id(j["tail"], path + ".tail");
  e.head = detail::json_id(j["head"], path + ".head");
  if (j.contains("capacity")) {
    e.capacity = detail::json_number(j["capacity"], path + ".capacity");
    if (!(e.capacity > 0.0)) throw detail::schema_error(path + ".capacity", "must be positive");
  }
  return e;
}

inline nlohmann::ordered_json snapshot_to_json(const MetricsSnapshot& s) {
  auto arc = [](const ArcFlow& a, const char* key) {
    return nlohmann::ordered_json{{"tail", a.tail}, {"head", a.head}, {key, round_significant(a.flow)}};
  };
  nlohmann::ordered_json j;
  j["stage"] = s.stage;
  j["lastEdit"] = s.lastEdit ? edit_to_json(*s.lastEdit) : nlohmann::ordered_json(nullptr);
  j["nodeCount"] = s.nodeCount;
  j["cloudNode"] = s.cloudNode ? nlohmann::ordered_json(*s.cloudNode) : nlohmann::ordered_json(nullptr);
  j["flows"] = nlohmann::ordered_json::array();
  for (const auto& a : s.flows) j["flows"].push_back(arc(a, "flow"));
  j["maxFlowArc"] = arc(s.maxFlowArc, "value");
  j["premagicResidual"] = round_significant(s.premagicResidual);
  nlohmann::ordered_json perNode = nlohmann::ordered_json::array();
  for (double h : s.entropyPerNode) perNode.push_back(round_significant(h));
  j["entropy"] = {{"perNode", perNode}, {"network", round_significant(s.networkEntropy)}};
  j["referenceArc"] = s.referenceArc ? arc(*s.referenceArc, "flow") : nlohmann::ordered_json(nullptr);
  return j;
}

enum class FlowNormalization { Min, Total };
enum class FlowMethod { Markov, Nullspace };

/// One analysis session. Stage 0 is the loaded network; each accepted edit
/// appends a stage. A rejected edit throws and leaves the session untouched.
class Session {
 public:
  Session(NetworkDocument doc, SessionOptions opts) : doc_(std::move(doc)), opts_(std::move(opts)) {
    if (!(opts_.dummyCapacity > 0.0)) throw Error(ErrorCode::InvalidArgument, "dummy capacity must be positive");
    for (const auto& n : doc_.nodes) ids_.push_back(n.id);
    cloudId_ = ids_.empty() ? 1 : *std::max_element(ids_.begin(), ids_.end()) + 1;
    DirectedNetwork net = to_network(doc_);
    if (net.has_self_loops()) net = remove_self_loops(net);
    stages_.push_back(make_stage(std::move(net), std::nullopt, 0));
  }

  const NetworkDocument& document() const noexcept { return doc_; }
  const SessionOptions& options() const noexcept { return opts_; }
  const MetricsSnapshot& snapshot() const { return stages_.back().snapshot; }
  std::size_t stage() const noexcept { return stages_.size() - 1; }
  const DirectedNetwork& network() const { return stages_.back().network; }

  std::vector<Edit> edits() const {
    std::vector<Edit> out;
    for (const auto& s : stages_) {
      if (s.edit) out.push_back(*s.edit);
    }
    return out;
  }

  const MetricsSnapshot& apply(const Edit& edit) {
    const NodeId tail = node_index(edit.tail);
    const NodeId head = node_index(edit.head);
    if (tail == head) throw Error(ErrorCode::InvalidArgument, "self-loop edits are not allowed");
    const DirectedNetwork& current = network();
    DirectedNetwork next = edit.op == EditOp::Add ? current.with_arc({tail, head, edit.capacity})
                                                  : current.without_arc(tail, head);
    stages_.push_back(make_stage(std::move(next), edit, stages_.size()));
    return snapshot();
  }

  const MetricsSnapshot& undo() {
    if (stages_.size() == 1) throw Error(ErrorCode::EmptyHistory, "history is empty; nothing to undo");
    stages_.pop_back();
    return snapshot();
  }

  /// Current flow under the requested normalization and method, in the
  /// node order of the (augmented) network.
  IdealFlowMatrix flow(FlowNormalization normalization, FlowMethod method) const {
    const DirectedNetwork net = analysed_network(network()).network;
    IdealFlowMatrix f;
    if (method == FlowMethod::Nullspace) {
      if (opts_.capacityWeighted) {
        throw Error(ErrorCode::InvalidArgument, "the null-space method computes standard (uniform) flow only");
      }
      f = nullspace_ideal_flow(net);
    } else {
      f = markov_ideal_flow(net, opts_.capacityWeighted);
    }
    return normalization == FlowNormalization::Min ? normalize_min(f) : normalize_total(f, 1.0);
  }

  /// Document id of a node index in the analysed network (cloud included).
  long long node_id(NodeId i) const { return i < ids_.size() ? ids_[i] : cloudId_; }

  std::vector<ArcFlow> arc_flows(const IdealFlowMatrix& f) const {
    std::vector<ArcFlow> out;
    const auto& m = f.matrix();
    for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
        out.push_back({node_id(static_cast<NodeId>(it.row())), node_id(static_cast<NodeId>(it.col())), it.value()});
      }
    }
    return out;
  }

 private:
  struct Stage {
    DirectedNetwork network;
    std::optional<Edit> edit;
    MetricsSnapshot snapshot;
  };

  NodeId node_index(long long id) const {
    auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) throw Error(ErrorCode::InvalidArgument, "unknown node id " + std::to_string(id));
    return static_cast<NodeId>(it - ids_.begin());
  }

  AugmentedNetwork analysed_network(const DirectedNetwork& net) const {
    if (opts_.augment) return augment_with_cloud(net, opts_.dummyCapacity);
    if (!is_strongly_connected(net)) {
      throw Error(ErrorCode::NotStronglyConnected, "network is not strongly connected");
    }
    return AugmentedNetwork{net, net.node_count(), std::nullopt, {}};
  }

  Stage make_stage(DirectedNetwork net, std::optional<Edit> edit, std::size_t stage) const {
    const AugmentedNetwork aug = analysed_network(net);
    const StochasticMatrix t = opts_.capacityWeighted ? capacity_transition(aug.network) : uniform_transition(aug.network);
    const PerronVector pi = stationary(t, 1.0);
    const IdealFlowMatrix f = normalize_min(ideal_flow(pi, t));
    const EntropyReport entropy = network_entropy(t, pi);

    MetricsSnapshot s;
    s.stage = stage;
    s.lastEdit = edit;
    s.nodeCount = aug.network.node_count();
    if (aug.cloudNode) s.cloudNode = cloudId_;
    s.flows = arc_flows(f);
    const auto top = f.max_arc();
    s.maxFlowArc = {node_id(top.tail), node_id(top.head), top.value};
    s.premagicResidual = is_premagic(f, 1e-9).residual;
    s.entropyPerNode.assign(entropy.perNode.begin(), entropy.perNode.end());
    s.networkEntropy = entropy.networkEntropy;
    if (opts_.referenceArc) {
      for (const auto& a : s.flows) {
        if (a.tail == opts_.referenceArc->tail && a.head == opts_.referenceArc->head) s.referenceArc = a;
      }
    }
    return Stage{std::move(net), std::move(edit), std::move(s)};
  }

  NetworkDocument doc_;
  SessionOptions opts_;
  std::vector<long long> ids_;
  long long cloudId_ = 0;
  std::vector<Stage> stages_;
};

struct WhatIfScript {
  std::vector<Edit> edits;
  std::optional<IdPair> referenceArc;
};

/// Either a bare array of edits or {"edits": [...], "referenceArc": {tail, head}}.
inline WhatIfScript parse_whatif_script(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw detail::schema_error("$", std::string("invalid JSON: ") + e.what());
  }
  WhatIfScript script;
  const nlohmann::json* edits = &j;
  std::string base;
  if (j.is_object()) {
    if (!j.contains("edits") || !j["edits"].is_array()) throw detail::schema_error("edits", "expected an array");
    edits = &j["edits"];
    base = "edits";
    if (j.contains("referenceArc")) {
      const auto& r = j["referenceArc"];
      if (!r.is_object() || !r.contains("tail") || !r.contains("head")) {
        throw detail::schema_error("referenceArc", "expected {tail, head}");
      }
      script.referenceArc = IdPair{detail::json_id(r["tail"], "referenceArc.tail"),
                                   detail::json_id(r["head"], "referenceArc.head")};
    }
  } else if (!j.is_array()) {
    throw detail::schema_error("$", "expected an array of edits or an object with \"edits\"");
  }
  for (std::size_t i = 0; i < edits->size(); ++i) {
    script.edits.push_back(edit_from_json((*edits)[i], base + "[" + std::to_string(i) + "]"));
  }
  return script;
}

/// Stage-by-stage replay; stage 0 is the unedited network. An edit that is
/// rejected surfaces as EditRejected naming the stage it would have created.
inline std::vector<MetricsSnapshot> replay(const NetworkDocument& doc, const SessionOptions& opts,
                                           const std::vector<Edit>& edits) {
  Session session(doc, opts);
  std::vector<MetricsSnapshot> stages{session.snapshot()};
  for (std::size_t k = 0; k < edits.size(); ++k) {
    try {
      stages.push_back(session.apply(edits[k]));
    } catch (const Error& e) {
      throw Error(ErrorCode::EditRejected, "stage " + std::to_string(k + 1) + ": " + e.what(), std::to_string(k + 1));
    }
  }
  return stages;
}

inline nlohmann::ordered_json replay_report(const std::vector<MetricsSnapshot>& stages) {
  nlohmann::ordered_json j;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stages) j["stages"].push_back(snapshot_to_json(s));
  return j;
}

}  // namespace idealflow
