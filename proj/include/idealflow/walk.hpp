#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SparseCore>

#include "idealflow/error.hpp"
#include "idealflow/format.hpp"
#include "idealflow/graph.hpp"
#include "idealflow/markov.hpp"

namespace idealflow {

struct SimConfig {
  std::size_t agents = 1;
  std::size_t steps = 1;
  std::uint64_t seed = 0;
  /// Empty: each agent starts at a node drawn uniformly from its own stream.
  /// Otherwise agent a starts at initialPlacement[a % size].
  std::vector<NodeId> initialPlacement;
  /// Unrecorded steps taken before counting starts.
  std::size_t burnIn = 0;
  /// Worker threads; output does not depend on this.
  unsigned workers = 1;

  void validate(std::size_t nodeCount) const {
    if (agents == 0) throw Error(ErrorCode::InvalidArgument, "agent count must be at least 1");
    if (steps == 0) throw Error(ErrorCode::InvalidArgument, "step count must be at least 1");
    for (NodeId v : initialPlacement) {
      if (v >= nodeCount) throw Error(ErrorCode::InvalidArgument, "initial placement node out of range");
    }
  }
};

using CountMatrix = Eigen::SparseMatrix<long long, Eigen::RowMajor>;

/// Trajectory counts; counts(i, j) = transitions observed on arc i->j.
struct FlowCount {
  CountMatrix counts;
  long long total() const { return counts.sum(); }
};

struct Checkpoint {
  std::uint64_t transitions = 0;
  double maxRelativeError = 0.0;
};

struct ConvergenceSeries {
  std::vector<Checkpoint> checkpoints;

  /// CSV with columns transitions,max_rel_error.
  std::string to_csv() const {
    std::ostringstream out;
    out << "transitions,max_rel_error\n";
    for (const Checkpoint& c : checkpoints) out << c.transitions << ',' << format_number(c.maxRelativeError) << '\n';
    return out.str();
  }
};

namespace detail {

/// Per-agent substream: mt19937_64 seeded from (seed, agentIndex) through
/// std::seed_seq, whose mixing algorithm is fixed by the standard.
inline std::mt19937_64 agent_engine(std::uint64_t seed, std::uint64_t agent) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(agent), static_cast<std::uint32_t>(agent >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_draw(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

struct WalkTable {
  std::vector<Eigen::Index> rowStart;
  std::vector<NodeId> head;
  std::vector<double> cumulative;

  explicit WalkTable(const StochasticMatrix& t) {
    const auto& m = t.matrix();
    rowStart.assign(static_cast<std::size_t>(m.rows()) + 1, 0);
    for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
      double acc = 0.0;
      for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
        if (it.value() <= 0.0) continue;
        acc += it.value();
        head.push_back(static_cast<NodeId>(it.col()));
        cumulative.push_back(acc);
      }
      rowStart[static_cast<std::size_t>(i) + 1] = static_cast<Eigen::Index>(head.size());
      cumulative.back() = 1.0;
    }
  }

  /// Index of the chosen out-arc (position in head/cumulative).
  std::size_t choose(NodeId node, double u) const {
    auto begin = cumulative.begin() + rowStart[node];
    auto end = cumulative.begin() + rowStart[node + 1];
    auto it = std::upper_bound(begin, end, u);
    if (it == end) --it;
    return static_cast<std::size_t>(it - cumulative.begin());
  }
};

/// Step numbers (1-based, strictly increasing, last == steps) whose elapsed
/// transitions agents*t follow 1000 * 2^k.
inline std::vector<std::size_t> checkpoint_steps(std::size_t agents, std::size_t steps, std::size_t maxCount) {
  std::vector<std::size_t> out;
  const double total = static_cast<double>(agents) * static_cast<double>(steps);
  for (double target = 1000.0; target < total && out.size() + 1 < maxCount; target *= 2.0) {
    auto t = static_cast<std::size_t>(std::ceil(target / static_cast<double>(agents)));
    t = std::max<std::size_t>(t, 1);
    if (t >= steps) break;
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  out.push_back(steps);
  return out;
}

}  // namespace detail

/// Runs the walks and returns cumulative counts at each requested step
/// (strictly increasing, last must equal cfg.steps).
inline std::vector<FlowCount> simulate_checkpoints(const DirectedNetwork& net, const StochasticMatrix& t,
                                                   const SimConfig& cfg, const std::vector<std::size_t>& steps) {
  if (t.size() != net.node_count()) {
    throw Error(ErrorCode::DimensionMismatch, "transition matrix does not match the network");
  }
  cfg.validate(net.node_count());
  if (steps.empty() || steps.back() != cfg.steps || !std::is_sorted(steps.begin(), steps.end())) {
    throw Error(ErrorCode::InvalidArgument, "checkpoint steps must be increasing and end at the step count");
  }
  if (!is_irreducible(t)) throw Error(ErrorCode::NotIrreducible, "random walk needs an irreducible chain");

  const detail::WalkTable table(t);
  const std::size_t arcs = table.head.size();
  const std::size_t buckets = steps.size();
  const std::size_t n = net.node_count();
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(cfg.agents)));

  // bucket[c * arcs + k]: transitions on arc k during steps (steps[c-1], steps[c]].
  std::vector<std::vector<long long>> local(workers, std::vector<long long>(buckets * arcs, 0));
  auto run = [&](unsigned w) {
    auto& bucket = local[w];
    const std::size_t begin = cfg.agents * w / workers;
    const std::size_t end = cfg.agents * (w + 1) / workers;
    for (std::size_t a = begin; a < end; ++a) {
      auto eng = detail::agent_engine(cfg.seed, a);
      NodeId node;
      if (cfg.initialPlacement.empty()) {
        node = std::min(n - 1, static_cast<NodeId>(detail::unit_draw(eng) * static_cast<double>(n)));
      } else {
        node = cfg.initialPlacement[a % cfg.initialPlacement.size()];
      }
      for (std::size_t b = 0; b < cfg.burnIn; ++b) node = table.head[table.choose(node, detail::unit_draw(eng))];
      std::size_t c = 0;
      for (std::size_t step = 1; step <= cfg.steps; ++step) {
        while (step > steps[c]) ++c;
        const std::size_t k = table.choose(node, detail::unit_draw(eng));
        ++bucket[c * arcs + k];
        node = table.head[k];
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }

  std::vector<long long> merged(buckets * arcs, 0);
  for (const auto& part : local) {
    for (std::size_t k = 0; k < merged.size(); ++k) merged[k] += part[k];
  }
  std::vector<FlowCount> out;
  out.reserve(buckets);
  std::vector<long long> running(arcs, 0);
  for (std::size_t c = 0; c < buckets; ++c) {
    std::vector<Eigen::Triplet<long long>> entries;
    entries.reserve(arcs);
    for (NodeId i = 0; i < n; ++i) {
      for (auto k = table.rowStart[i]; k < table.rowStart[i + 1]; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        running[uk] += merged[c * arcs + uk];
        entries.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(table.head[uk]), running[uk]);
      }
    }
    FlowCount fc;
    fc.counts.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    fc.counts.setFromTriplets(entries.begin(), entries.end());
    fc.counts.makeCompressed();
    out.push_back(std::move(fc));
  }
  return out;
}

/// Node-based Markov random walk of cfg.agents agents for cfg.steps steps.
/// Reproducible from cfg.seed regardless of cfg.workers.
inline FlowCount simulate(const DirectedNetwork& net, const StochasticMatrix& t, const SimConfig& cfg) {
  return std::move(simulate_checkpoints(net, t, cfg, {cfg.steps}).back());
}

/// R / min(R) over nonzero entries. Arcs never traversed stay 0.
inline IdealFlowMatrix relative_flow(const FlowCount& r) {
  SparseRowMatrix m = r.counts.cast<double>();
  return normalize_min(IdealFlowMatrix(std::move(m)));
}

/// max over arcs of exact's support of |estimate - exact| / exact.
inline double max_relative_error(const IdealFlowMatrix& estimate, const IdealFlowMatrix& exact) {
  double worst = 0.0;
  const auto& m = exact.matrix();
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
      if (it.value() <= 0.0) continue;
      const double est = estimate(static_cast<NodeId>(it.row()), static_cast<NodeId>(it.col()));
      worst = std::max(worst, std::abs(est - it.value()) / it.value());
    }
  }
  return worst;
}

/// Error of the simulated relative flow against the exact min-normalized flow
/// at geometric checkpoints (ratio 2 from 1000 transitions); at most
/// checkpointCount entries, the last one at agents * steps.
inline ConvergenceSeries convergence_series(const DirectedNetwork& net, const StochasticMatrix& t,
                                            const SimConfig& cfg, std::size_t checkpointCount) {
  if (checkpointCount == 0) throw Error(ErrorCode::InvalidArgument, "need at least one checkpoint");
  const IdealFlowMatrix exact = normalize_min(ideal_flow(stationary(t, 1.0), t));
  const auto steps = detail::checkpoint_steps(cfg.agents, cfg.steps, checkpointCount);
  const auto counts = simulate_checkpoints(net, t, cfg, steps);
  ConvergenceSeries series;
  for (std::size_t c = 0; c < steps.size(); ++c) {
    series.checkpoints.push_back(
        {static_cast<std::uint64_t>(cfg.agents) * steps[c], max_relative_error(relative_flow(counts[c]), exact)});
  }
  return series;
}

struct PropagateOptions {
  double injection = 100.0;
  std::size_t maxIterations = 1000000;
  double tolerance = 1e-13;
};

/// Deterministic flow propagation: inject at the origin, then repeatedly set
/// each node's load to the sum of its in-arc flows, splitting every load
/// equally over the out-arcs. A periodic network makes the plain iteration
/// cycle; once the change stops shrinking, consecutive iterates are averaged.
/// Returns the min-normalized arc flows.
inline IdealFlowMatrix propagate_flow(const DirectedNetwork& net, NodeId origin, const PropagateOptions& opts = {}) {
  const std::size_t n = net.node_count();
  if (origin >= n) throw Error(ErrorCode::InvalidArgument, "origin node out of range");
  if (!(opts.injection > 0.0)) throw Error(ErrorCode::InvalidArgument, "injection must be positive");
  if (net.has_self_loops()) throw Error(ErrorCode::InvalidArgument, "network has self-loops");
  if (!is_strongly_connected(net)) {
    throw Error(ErrorCode::NotStronglyConnected, "flow propagation needs a strongly connected network");
  }
  for (NodeId i = 0; i < n; ++i) {
    if (net.out_degree(i) == 0) throw Error(ErrorCode::DanglingNode, "node " + net.label(i) + " has no out-arcs");
  }

  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  load[static_cast<Eigen::Index>(origin)] = opts.injection;
  Eigen::VectorXd next(load.size());
  bool damped = false;
  const std::size_t window = n + 1;
  std::vector<double> history;
  double change = 0.0;
  for (std::size_t iter = 0; iter < opts.maxIterations; ++iter) {
    next.setZero();
    for (NodeId i = 0; i < n; ++i) {
      const double share = load[static_cast<Eigen::Index>(i)] / static_cast<double>(net.out_degree(i));
      for (const Arc& a : net.out_arcs(i)) next[static_cast<Eigen::Index>(a.head)] += share;
    }
    if (damped) next = 0.5 * (next + load);
    change = (next - load).lpNorm<Eigen::Infinity>() / next.lpNorm<Eigen::Infinity>();
    load.swap(next);
    if (change < opts.tolerance) {
      Eigen::VectorXd edges(static_cast<Eigen::Index>(net.arc_count()));
      for (std::size_t k = 0; k < net.arc_count(); ++k) {
        const Arc& a = net.arcs()[k];
        edges[static_cast<Eigen::Index>(k)] =
            load[static_cast<Eigen::Index>(a.tail)] / static_cast<double>(net.out_degree(a.tail));
      }
      std::vector<Eigen::Triplet<double>> entries;
      for (std::size_t k = 0; k < net.arc_count(); ++k) {
        const Arc& a = net.arcs()[k];
        entries.emplace_back(static_cast<Eigen::Index>(a.tail), static_cast<Eigen::Index>(a.head),
                             edges[static_cast<Eigen::Index>(k)]);
      }
      return normalize_min(IdealFlowMatrix(detail::from_triplets(n, entries)));
    }
    history.push_back(change);
    if (!damped && history.size() > window && change > 0.9 * history[history.size() - 1 - window]) {
      damped = true;
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "no convergence after " + std::to_string(opts.maxIterations) + " iterations",
              "last relative change " + format_number(change));
}

}  // namespace idealflow
