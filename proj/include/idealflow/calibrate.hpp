#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idealflow/error.hpp"
#include "idealflow/format.hpp"
#include "idealflow/graph.hpp"
#include "idealflow/markov.hpp"

namespace idealflow {

enum class FitMode { ClosedForm, GoldenSection };

struct FitOptions {
  FitMode mode = FitMode::ClosedForm;
  /// Cloud node of an augmented network; arcs touching it are dummy arcs.
  std::optional<NodeId> cloudNode;
  bool includeDummyArcs = false;
  /// Golden-section stopping width, relative to the bracket midpoint.
  double searchTolerance = 1e-6;
  std::size_t tracePoints = 41;
};

struct ArcResidual {
  NodeId tail = 0;
  NodeId head = 0;
  double observed = 0.0;
  double fitted = 0.0;
  double residual() const { return observed - fitted; }
};

struct CalibrationResult {
  double kappa = 0.0;
  double sse = 0.0;
  double mse = 0.0;
  std::size_t arcCount = 0;
  std::vector<ArcResidual> residuals;                   ///< row-major arc order
  std::vector<std::pair<double, double>> searchTrace;  ///< (kappa, sse), sorted by kappa
};

/// Unit-total ideal flow of the chain implied by observed flows.
inline IdealFlowMatrix unit_ideal_flow(const SparseRowMatrix& observed) {
  StochasticMatrix t = transition_from_flows(observed);
  return ideal_flow(stationary(t, 1.0), t);
}

namespace detail {

struct PairedArcs {
  std::vector<NodeId> tail, head;
  std::vector<double> unit, observed;
};

// Union support of the two matrices, minus dummy arcs unless requested.
inline PairedArcs pair_arcs(const IdealFlowMatrix& unit, const SparseRowMatrix& observed, const FitOptions& opts) {
  std::set<std::pair<NodeId, NodeId>> keys;
  auto collect = [&](const SparseRowMatrix& m) {
    for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
        if (it.value() != 0.0) keys.emplace(static_cast<NodeId>(it.row()), static_cast<NodeId>(it.col()));
      }
    }
  };
  collect(unit.matrix());
  collect(observed);
  PairedArcs out;
  for (auto [i, j] : keys) {
    if (!opts.includeDummyArcs && opts.cloudNode && (i == *opts.cloudNode || j == *opts.cloudNode)) continue;
    out.tail.push_back(i);
    out.head.push_back(j);
    out.unit.push_back(unit(i, j));
    out.observed.push_back(observed.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }
  return out;
}

inline double sse_at(const PairedArcs& arcs, double kappa) {
  double s = 0.0;
  for (std::size_t k = 0; k < arcs.unit.size(); ++k) {
    const double r = arcs.observed[k] - kappa * arcs.unit[k];
    s += r * r;
  }
  return s;
}

}  // namespace detail

/// Least-squares fit of one global scale: min over kappa of
/// sum (observed - kappa * unit)^2. Closed form is exact; golden-section
/// searches [sum(observed)/10, 10 sum(observed)] and keeps its trace.
inline CalibrationResult fit_scale(const IdealFlowMatrix& unit, const SparseRowMatrix& observed,
                                   const FitOptions& opts = {}) {
  if (unit.size() != static_cast<std::size_t>(observed.rows()) || observed.rows() != observed.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "unit flow and observed flow sizes differ");
  }
  const auto arcs = detail::pair_arcs(unit, observed, opts);
  double uu = 0.0, uo = 0.0, total = 0.0;
  for (std::size_t k = 0; k < arcs.unit.size(); ++k) {
    uu += arcs.unit[k] * arcs.unit[k];
    uo += arcs.unit[k] * arcs.observed[k];
    total += arcs.observed[k];
  }
  if (!(uu > 0.0)) throw Error(ErrorCode::ZeroUnitFlow, "unit flow is zero on every fitted arc");

  CalibrationResult result;
  auto evaluate = [&](double kappa) {
    const double s = detail::sse_at(arcs, kappa);
    result.searchTrace.emplace_back(kappa, s);
    return s;
  };

  const double lo = total > 0.0 ? total / 10.0 : 0.1;
  const double hi = total > 0.0 ? total * 10.0 : 10.0;
  if (opts.mode == FitMode::ClosedForm) {
    result.kappa = uo / uu;
    // Trace for plotting: log-spaced over the search bracket, plus the optimum.
    const std::size_t m = std::max<std::size_t>(opts.tracePoints, 2);
    for (std::size_t k = 0; k < m; ++k) {
      evaluate(lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(m - 1)));
    }
    evaluate(result.kappa);
  } else {
    const double invPhi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invPhi * (b - a), d = a + invPhi * (b - a);
    double fc = evaluate(c), fd = evaluate(d);
    while ((b - a) > opts.searchTolerance * 0.5 * (a + b)) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - invPhi * (b - a);
        fc = evaluate(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + invPhi * (b - a);
        fd = evaluate(d);
      }
    }
    evaluate(0.5 * (a + b));
    result.kappa = std::min_element(result.searchTrace.begin(), result.searchTrace.end(),
                                    [](const auto& x, const auto& y) { return x.second < y.second; })
                       ->first;
  }
  std::sort(result.searchTrace.begin(), result.searchTrace.end());

  result.arcCount = arcs.unit.size();
  for (std::size_t k = 0; k < arcs.unit.size(); ++k) {
    result.residuals.push_back({arcs.tail[k], arcs.head[k], arcs.observed[k], result.kappa * arcs.unit[k]});
  }
  result.sse = detail::sse_at(arcs, result.kappa);
  result.mse = result.arcCount ? result.sse / static_cast<double>(result.arcCount) : 0.0;
  return result;
}

/// Observed flows on an augmented network with the dummy arcs filled in by
/// node imbalance: cloud->v carries v's outflow excess, v->cloud its inflow
/// excess. Without a cloud the input is returned unchanged.
inline SparseRowMatrix fill_dummy_observations(const AugmentedNetwork& aug, const SparseRowMatrix& observedBase) {
  const std::size_t n = aug.network.node_count();
  std::vector<Eigen::Triplet<double>> entries;
  for (Eigen::Index i = 0; i < observedBase.outerSize(); ++i) {
    for (SparseRowMatrix::InnerIterator it(observedBase, i); it; ++it) {
      entries.emplace_back(it.row(), it.col(), it.value());
    }
  }
  if (aug.cloudNode) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd in = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < observedBase.outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(observedBase, i); it; ++it) {
        out[it.row()] += it.value();
        in[it.col()] += it.value();
      }
    }
    const auto cloud = static_cast<Eigen::Index>(*aug.cloudNode);
    for (const Arc& a : aug.dummyArcs) {
      if (a.tail == *aug.cloudNode) {
        const auto v = static_cast<Eigen::Index>(a.head);
        entries.emplace_back(cloud, v, std::max(0.0, out[v] - in[v]));
      } else {
        const auto v = static_cast<Eigen::Index>(a.tail);
        entries.emplace_back(v, cloud, std::max(0.0, in[v] - out[v]));
      }
    }
  }
  return detail::from_triplets(n, entries);
}

inline nlohmann::ordered_json calibration_to_json(const CalibrationResult& r, const std::vector<std::string>& labels) {
  auto name = [&](NodeId i) { return i < labels.size() ? labels[i] : std::to_string(i + 1); };
  nlohmann::ordered_json j;
  j["kappa"] = round_significant(r.kappa);
  j["sse"] = round_significant(r.sse);
  j["mse"] = round_significant(r.mse);
  j["arcCount"] = r.arcCount;
  j["residuals"] = nlohmann::ordered_json::array();
  for (const auto& a : r.residuals) {
    j["residuals"].push_back({{"tail", name(a.tail)},
                              {"head", name(a.head)},
                              {"observed", round_significant(a.observed)},
                              {"fitted", round_significant(a.fitted)},
                              {"residual", round_significant(a.residual())}});
  }
  j["searchTrace"] = nlohmann::ordered_json::array();
  for (const auto& [k, s] : r.searchTrace) {
    j["searchTrace"].push_back({{"kappa", round_significant(k)}, {"sse", round_significant(s)}});
  }
  return j;
}

inline std::string residuals_csv(const CalibrationResult& r, const std::vector<std::string>& labels) {
  auto name = [&](NodeId i) { return i < labels.size() ? labels[i] : std::to_string(i + 1); };
  std::ostringstream out;
  out << "tail,head,observed,fitted,residual\n";
  for (const auto& a : r.residuals) {
    out << name(a.tail) << ',' << name(a.head) << ',' << format_number(a.observed) << ','
        << format_number(a.fitted) << ',' << format_number(a.residual()) << '\n';
  }
  return out.str();
}

inline std::string search_trace_csv(const CalibrationResult& r) {
  std::ostringstream out;
  out << "kappa,sse\n";
  for (const auto& [k, s] : r.searchTrace) out << format_number(k) << ',' << format_number(s) << '\n';
  return out.str();
}

}  // namespace idealflow
