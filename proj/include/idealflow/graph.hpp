#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "idealflow/error.hpp"

namespace idealflow {

/// Dense node index, 0..n-1. Files and the HTTP API present 1-based ids.
using NodeId = std::size_t;

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct Arc {
  NodeId tail = 0;
  NodeId head = 0;
  double capacity = 1.0;

  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Simple weighted digraph. Arcs are kept in adjacency row-major order
/// (sorted by tail, then head); every matrix built from a network uses this
/// order for its columns or nonzeros.
class DirectedNetwork {
 public:
  DirectedNetwork() = default;

  DirectedNetwork(std::size_t nodeCount, std::vector<Arc> arcs, std::vector<std::string> labels = {})
      : n_(nodeCount), arcs_(std::move(arcs)), labels_(std::move(labels)) {
    if (!labels_.empty() && labels_.size() != n_) {
      throw Error(ErrorCode::InvalidArgument, "label count does not match node count");
    }
    for (const Arc& a : arcs_) {
      if (a.tail >= n_ || a.head >= n_) {
        throw Error(ErrorCode::InvalidArgument,
                    "arc " + std::to_string(a.tail + 1) + "->" + std::to_string(a.head + 1) +
                        " references a node outside 1.." + std::to_string(n_));
      }
      if (!(a.capacity > 0.0) || a.capacity == std::numeric_limits<double>::infinity()) {
        throw Error(ErrorCode::InvalidArgument, "arc " + std::to_string(a.tail + 1) + "->" +
                                                    std::to_string(a.head + 1) +
                                                    " has non-positive capacity");
      }
    }
    std::sort(arcs_.begin(), arcs_.end(), [](const Arc& x, const Arc& y) {
      return std::pair(x.tail, x.head) < std::pair(y.tail, y.head);
    });
    for (std::size_t k = 1; k < arcs_.size(); ++k) {
      if (arcs_[k].tail == arcs_[k - 1].tail && arcs_[k].head == arcs_[k - 1].head) {
        throw Error(ErrorCode::DuplicateArc, "duplicate arc " + std::to_string(arcs_[k].tail + 1) +
                                                 "->" + std::to_string(arcs_[k].head + 1));
      }
    }
    rowStart_.assign(n_ + 1, 0);
    for (const Arc& a : arcs_) ++rowStart_[a.tail + 1];
    for (std::size_t i = 0; i < n_; ++i) rowStart_[i + 1] += rowStart_[i];
  }

  std::size_t node_count() const noexcept { return n_; }
  std::size_t arc_count() const noexcept { return arcs_.size(); }
  std::span<const Arc> arcs() const noexcept { return arcs_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::string label(NodeId i) const {
    return labels_.empty() ? std::to_string(i + 1) : labels_[i];
  }

  /// Out-arcs of node i, in head order. Indices into arcs() start at out_begin(i).
  std::span<const Arc> out_arcs(NodeId i) const {
    return std::span<const Arc>(arcs_).subspan(rowStart_[i], rowStart_[i + 1] - rowStart_[i]);
  }
  std::size_t out_begin(NodeId i) const { return rowStart_[i]; }
  std::size_t out_degree(NodeId i) const { return rowStart_[i + 1] - rowStart_[i]; }

  std::optional<std::size_t> find_arc(NodeId tail, NodeId head) const {
    if (tail >= n_) return std::nullopt;
    auto row = out_arcs(tail);
    auto it = std::lower_bound(row.begin(), row.end(), head,
                               [](const Arc& a, NodeId h) { return a.head < h; });
    if (it == row.end() || it->head != head) return std::nullopt;
    return rowStart_[tail] + static_cast<std::size_t>(it - row.begin());
  }

  bool has_self_loops() const {
    return std::any_of(arcs_.begin(), arcs_.end(), [](const Arc& a) { return a.tail == a.head; });
  }

  DirectedNetwork with_arc(Arc arc) const {
    if (find_arc(arc.tail, arc.head)) {
      throw Error(ErrorCode::DuplicateArc, "arc " + label(arc.tail) + "->" + label(arc.head) +
                                               " already exists");
    }
    auto arcs = arcs_;
    arcs.push_back(arc);
    return DirectedNetwork(n_, std::move(arcs), labels_);
  }

  DirectedNetwork without_arc(NodeId tail, NodeId head) const {
    auto k = find_arc(tail, head);
    if (!k) {
      throw Error(ErrorCode::MissingArc,
                  "arc " + std::to_string(tail + 1) + "->" + std::to_string(head + 1) + " does not exist");
    }
    auto arcs = arcs_;
    arcs.erase(arcs.begin() + static_cast<std::ptrdiff_t>(*k));
    return DirectedNetwork(n_, std::move(arcs), labels_);
  }

  friend bool operator==(const DirectedNetwork& x, const DirectedNetwork& y) {
    return x.n_ == y.n_ && x.arcs_ == y.arcs_ && x.labels_ == y.labels_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<Arc> arcs_;
  std::vector<std::string> labels_;
  std::vector<std::size_t> rowStart_ = {0};
};

/// Network from a 0/1 adjacency matrix given row by row; unit capacities.
inline DirectedNetwork from_adjacency(const std::vector<std::vector<int>>& adjacency) {
  std::vector<Arc> arcs;
  for (std::size_t i = 0; i < adjacency.size(); ++i) {
    if (adjacency[i].size() != adjacency.size()) {
      throw Error(ErrorCode::NotSquare, "adjacency matrix is not square");
    }
    for (std::size_t j = 0; j < adjacency[i].size(); ++j) {
      if (adjacency[i][j] != 0) arcs.push_back({i, j, 1.0});
    }
  }
  return DirectedNetwork(adjacency.size(), std::move(arcs));
}

inline DirectedNetwork remove_self_loops(const DirectedNetwork& net) {
  std::vector<Arc> arcs;
  arcs.reserve(net.arc_count());
  for (const Arc& a : net.arcs()) {
    if (a.tail != a.head) arcs.push_back(a);
  }
  return DirectedNetwork(net.node_count(), std::move(arcs), net.labels());
}

/// Strongly connected components (iterative Tarjan). Component ids are
/// assigned in reverse topological order of the condensation: a component
/// only has arcs into components with smaller ids.
struct Components {
  std::vector<std::size_t> of;
  std::size_t count = 0;
};

inline Components strong_components(const DirectedNetwork& net) {
  const std::size_t n = net.node_count();
  constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, unvisited), low(n, 0);
  std::vector<bool> onStack(n, false);
  std::vector<NodeId> stack;
  Components comps{std::vector<std::size_t>(n, 0), 0};
  std::size_t counter = 0;

  std::vector<std::pair<NodeId, std::size_t>> frames;  // (node, next out-arc offset)
  for (NodeId root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    onStack[root] = true;
    while (!frames.empty()) {
      auto& [v, next] = frames.back();
      auto row = net.out_arcs(v);
      if (next < row.size()) {
        NodeId w = row[next++].head;
        if (index[w] == unvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          onStack[w] = true;
          frames.emplace_back(w, 0);
        } else if (onStack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      NodeId done = v;
      frames.pop_back();
      if (!frames.empty()) {
        NodeId parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
      if (low[done] == index[done]) {
        NodeId w;
        do {
          w = stack.back();
          stack.pop_back();
          onStack[w] = false;
          comps.of[w] = comps.count;
        } while (w != done);
        ++comps.count;
      }
    }
  }
  return comps;
}

inline bool is_strongly_connected(const DirectedNetwork& net) {
  if (net.node_count() <= 1) return true;
  return strong_components(net).count == 1;
}

struct AugmentedNetwork {
  DirectedNetwork network;                 ///< base plus cloud node and dummy arcs
  std::size_t baseNodeCount = 0;
  std::optional<NodeId> cloudNode;         ///< always index baseNodeCount when present
  std::vector<Arc> dummyArcs;

  bool is_dummy(NodeId tail, NodeId head) const {
    return cloudNode && (tail == *cloudNode || head == *cloudNode);
  }
};

/// Connects a reducible network through one cloud node. Zero-in-degree nodes
/// receive an arc from the cloud and zero-out-degree nodes send one to it; any
/// source or sink component of the condensation still left over is attached
/// through its lowest-index node. Nodes with no arcs at all are left alone.
inline AugmentedNetwork augment_with_cloud(const DirectedNetwork& net, double dummyCapacity = 1.0) {
  if (net.has_self_loops()) {
    throw Error(ErrorCode::InvalidArgument, "augment_with_cloud needs a self-loop-free network");
  }
  if (!(dummyCapacity > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "dummy capacity must be positive");
  }
  AugmentedNetwork out{net, net.node_count(), std::nullopt, {}};
  if (is_strongly_connected(net)) return out;

  const std::size_t n = net.node_count();
  const NodeId cloud = n;
  std::vector<std::size_t> inDeg(n, 0);
  for (const Arc& a : net.arcs()) ++inDeg[a.head];

  std::vector<bool> fromCloud(n, false), toCloud(n, false);
  for (NodeId i = 0; i < n; ++i) {
    const bool isolated = inDeg[i] == 0 && net.out_degree(i) == 0;
    if (isolated) continue;
    if (inDeg[i] == 0) fromCloud[i] = true;
    if (net.out_degree(i) == 0) toCloud[i] = true;
  }

  auto build = [&] {
    std::vector<Arc> arcs(net.arcs().begin(), net.arcs().end());
    std::vector<Arc> dummies;
    for (NodeId i = 0; i < n; ++i) {
      if (toCloud[i]) dummies.push_back({i, cloud, dummyCapacity});
      if (fromCloud[i]) dummies.push_back({cloud, i, dummyCapacity});
    }
    arcs.insert(arcs.end(), dummies.begin(), dummies.end());
    std::vector<std::string> labels = net.labels();
    if (!labels.empty()) labels.push_back("cloud");
    return std::pair(DirectedNetwork(n + 1, std::move(arcs), std::move(labels)), dummies);
  };

  auto [augmented, dummies] = build();
  if (!is_strongly_connected(augmented)) {
    // Attach remaining source/sink basins of the condensation.
    Components comps = strong_components(augmented);
    std::vector<bool> hasIn(comps.count, false), hasOut(comps.count, false);
    std::vector<NodeId> lowest(comps.count, kNoNode);
    for (NodeId v = 0; v <= n; ++v) {
      lowest[comps.of[v]] = std::min(lowest[comps.of[v]], v);
    }
    for (const Arc& a : augmented.arcs()) {
      if (comps.of[a.tail] != comps.of[a.head]) {
        hasOut[comps.of[a.tail]] = true;
        hasIn[comps.of[a.head]] = true;
      }
    }
    for (std::size_t c = 0; c < comps.count; ++c) {
      NodeId rep = lowest[c];
      if (rep == cloud || comps.of[cloud] == c) continue;
      const bool isolated = inDeg[rep] == 0 && net.out_degree(rep) == 0 && !hasIn[c] && !hasOut[c];
      if (isolated) continue;
      if (!hasIn[c]) fromCloud[rep] = true;
      if (!hasOut[c]) toCloud[rep] = true;
    }
    std::tie(augmented, dummies) = build();
  }
  if (!is_strongly_connected(augmented)) {
    throw Error(ErrorCode::AugmentationFailed,
                "network is still not strongly connected after adding the cloud node");
  }
  out.network = std::move(augmented);
  out.cloudNode = cloud;
  out.dummyArcs = std::move(dummies);
  return out;
}

/// Node-by-arc incidence: +1 where the arc leaves the node (tail), -1 where it
/// enters (head). Column j is the j-th arc in row-major adjacency order.
struct IncidenceMatrix {
  Eigen::SparseMatrix<double> matrix;  // n x p
  std::vector<Arc> columns;
};

inline IncidenceMatrix incidence(const DirectedNetwork& net) {
  if (net.has_self_loops()) {
    throw Error(ErrorCode::InvalidArgument, "incidence needs a self-loop-free network");
  }
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const auto p = static_cast<Eigen::Index>(net.arc_count());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * net.arc_count());
  for (Eigen::Index j = 0; j < p; ++j) {
    const Arc& a = net.arcs()[static_cast<std::size_t>(j)];
    entries.emplace_back(static_cast<Eigen::Index>(a.tail), j, 1.0);
    entries.emplace_back(static_cast<Eigen::Index>(a.head), j, -1.0);
  }
  IncidenceMatrix out;
  out.matrix.resize(n, p);
  out.matrix.setFromTriplets(entries.begin(), entries.end());
  out.columns.assign(net.arcs().begin(), net.arcs().end());
  return out;
}

/// Unweighted shortest-path hop counts from `source`; unreachable = max().
inline std::vector<std::size_t> bfs_distances(const DirectedNetwork& net, NodeId source) {
  std::vector<std::size_t> dist(net.node_count(), std::numeric_limits<std::size_t>::max());
  std::queue<NodeId> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    NodeId v = frontier.front();
    frontier.pop();
    for (const Arc& a : net.out_arcs(v)) {
      if (dist[a.head] == std::numeric_limits<std::size_t>::max()) {
        dist[a.head] = dist[v] + 1;
        frontier.push(a.head);
      }
    }
  }
  return dist;
}

inline std::size_t diameter(const DirectedNetwork& net) {
  std::size_t best = 0;
  for (NodeId s = 0; s < net.node_count(); ++s) {
    for (std::size_t d : bfs_distances(net, s)) {
      if (d == std::numeric_limits<std::size_t>::max()) {
        throw Error(ErrorCode::NotStronglyConnected, "diameter is undefined for a reducible network");
      }
      best = std::max(best, d);
    }
  }
  return best;
}

inline std::size_t max_out_degree(const DirectedNetwork& net) {
  std::size_t best = 0;
  for (NodeId i = 0; i < net.node_count(); ++i) best = std::max(best, net.out_degree(i));
  return best;
}

}  // namespace idealflow
