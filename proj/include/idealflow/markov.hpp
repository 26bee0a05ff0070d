#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "idealflow/error.hpp"
#include "idealflow/graph.hpp"

namespace idealflow {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace detail {

inline SparseRowMatrix from_triplets(std::size_t n, const std::vector<Eigen::Triplet<double>>& entries) {
  SparseRowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  return m;
}

/// Network whose arcs are the stored nonzeros of a square matrix.
inline DirectedNetwork support_network(const SparseRowMatrix& m) {
  std::vector<Arc> arcs;
  arcs.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
      if (it.value() != 0.0 && it.row() != it.col()) {
        arcs.push_back({static_cast<NodeId>(it.row()), static_cast<NodeId>(it.col()), 1.0});
      }
    }
  }
  return DirectedNetwork(static_cast<std::size_t>(m.rows()), std::move(arcs));
}

}  // namespace detail

/// Row-stochastic transition matrix with zero diagonal.
class StochasticMatrix {
 public:
  static constexpr double kRowTolerance = 1e-12;

  explicit StochasticMatrix(SparseRowMatrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw Error(ErrorCode::NotSquare, "transition matrix is not square");
    m_.makeCompressed();
    for (Eigen::Index i = 0; i < m_.outerSize(); ++i) {
      double sum = 0.0;
      bool any = false;
      for (SparseRowMatrix::InnerIterator it(m_, i); it; ++it) {
        if (it.value() < 0.0 || !std::isfinite(it.value())) {
          throw Error(ErrorCode::InvalidArgument, "transition probabilities must be finite and nonnegative");
        }
        if (it.col() == i && it.value() != 0.0) {
          throw Error(ErrorCode::InvalidArgument, "transition matrix has a self-loop at node " +
                                                      std::to_string(i + 1));
        }
        any = any || it.value() > 0.0;
        sum += it.value();
      }
      if (!any) {
        throw Error(ErrorCode::DanglingNode, "node " + std::to_string(i + 1) + " has no out-arcs",
                    std::to_string(i));
      }
      if (std::abs(sum - 1.0) > kRowTolerance) {
        throw Error(ErrorCode::InvalidArgument,
                    "row " + std::to_string(i + 1) + " sums to " + std::to_string(sum));
      }
    }
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  const SparseRowMatrix& matrix() const noexcept { return m_; }
  double operator()(NodeId i, NodeId j) const {
    return m_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  SparseRowMatrix m_;
};

/// Stationary node vector with sum(values) == scale.
struct PerronVector {
  Eigen::VectorXd values;
  double scale = 1.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
};

/// Nonnegative square flow matrix; stored nonzeros are the arc support.
class IdealFlowMatrix {
 public:
  IdealFlowMatrix() = default;

  explicit IdealFlowMatrix(SparseRowMatrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw Error(ErrorCode::NotSquare, "flow matrix is not square");
    m_.makeCompressed();
    for (Eigen::Index k = 0; k < m_.nonZeros(); ++k) {
      double v = m_.valuePtr()[k];
      if (v < 0.0 || !std::isfinite(v)) {
        throw Error(ErrorCode::InvalidArgument, "flow entries must be finite and nonnegative");
      }
    }
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  const SparseRowMatrix& matrix() const noexcept { return m_; }
  double operator()(NodeId i, NodeId j) const {
    return m_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  Eigen::VectorXd row_sums() const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m_.rows());
    for (Eigen::Index i = 0; i < m_.outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(m_, i); it; ++it) s[i] += it.value();
    }
    return s;
  }

  Eigen::VectorXd col_sums() const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m_.cols());
    for (Eigen::Index i = 0; i < m_.outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(m_, i); it; ++it) s[it.col()] += it.value();
    }
    return s;
  }

  double total() const { return m_.sum(); }

  /// Smallest strictly positive entry, or nullopt when every entry is zero.
  std::optional<double> min_positive() const {
    std::optional<double> best;
    for (Eigen::Index k = 0; k < m_.nonZeros(); ++k) {
      double v = m_.valuePtr()[k];
      if (v > 0.0 && (!best || v < *best)) best = v;
    }
    return best;
  }

  struct ArcValue {
    NodeId tail = 0;
    NodeId head = 0;
    double value = 0.0;
  };

  /// Largest entry; ties resolve to the first in row-major order.
  ArcValue max_arc() const {
    ArcValue best{0, 0, -1.0};
    for (Eigen::Index i = 0; i < m_.outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(m_, i); it; ++it) {
        if (it.value() > best.value) {
          best = {static_cast<NodeId>(it.row()), static_cast<NodeId>(it.col()), it.value()};
        }
      }
    }
    if (best.value < 0.0) best.value = 0.0;
    return best;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(m_); }

 private:
  SparseRowMatrix m_;
};

inline StochasticMatrix uniform_transition(const DirectedNetwork& net) {
  if (net.has_self_loops()) {
    throw Error(ErrorCode::InvalidArgument, "remove self-loops before building a transition matrix");
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(net.arc_count());
  for (NodeId i = 0; i < net.node_count(); ++i) {
    const std::size_t deg = net.out_degree(i);
    if (deg == 0) {
      throw Error(ErrorCode::DanglingNode, "node " + net.label(i) + " has no out-arcs", std::to_string(i));
    }
    for (const Arc& a : net.out_arcs(i)) {
      entries.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a.head),
                           1.0 / static_cast<double>(deg));
    }
  }
  return StochasticMatrix(detail::from_triplets(net.node_count(), entries));
}

inline StochasticMatrix capacity_transition(const DirectedNetwork& net) {
  if (net.has_self_loops()) {
    throw Error(ErrorCode::InvalidArgument, "remove self-loops before building a transition matrix");
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(net.arc_count());
  for (NodeId i = 0; i < net.node_count(); ++i) {
    if (net.out_degree(i) == 0) {
      throw Error(ErrorCode::DanglingNode, "node " + net.label(i) + " has no out-arcs", std::to_string(i));
    }
    double total = 0.0;
    for (const Arc& a : net.out_arcs(i)) total += a.capacity;
    for (const Arc& a : net.out_arcs(i)) {
      entries.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a.head),
                           a.capacity / total);
    }
  }
  return StochasticMatrix(detail::from_triplets(net.node_count(), entries));
}

/// Row-normalizes observed flows. Zero entries are dropped from the support.
inline StochasticMatrix transition_from_flows(const SparseRowMatrix& observed) {
  if (observed.rows() != observed.cols()) throw Error(ErrorCode::NotSquare, "flow matrix is not square");
  std::vector<Eigen::Triplet<double>> entries;
  for (Eigen::Index i = 0; i < observed.outerSize(); ++i) {
    double total = 0.0;
    for (SparseRowMatrix::InnerIterator it(observed, i); it; ++it) {
      if (it.value() < 0.0 || !std::isfinite(it.value())) {
        throw Error(ErrorCode::InvalidArgument, "observed flows must be finite and nonnegative");
      }
      total += it.value();
    }
    if (!(total > 0.0)) {
      throw Error(ErrorCode::DanglingNode, "node " + std::to_string(i + 1) + " has zero observed outflow",
                  std::to_string(i));
    }
    for (SparseRowMatrix::InnerIterator it(observed, i); it; ++it) {
      if (it.value() > 0.0) entries.emplace_back(it.row(), it.col(), it.value() / total);
    }
  }
  return StochasticMatrix(detail::from_triplets(static_cast<std::size_t>(observed.rows()), entries));
}

inline bool is_irreducible(const StochasticMatrix& t) {
  return is_strongly_connected(detail::support_network(t.matrix()));
}

struct StationaryOptions {
  /// Above this node count the balance system is factored with SparseLU.
  std::size_t denseLimit = 512;
  /// Relative residual bound: ||pi T - pi||_inf <= tolerance * kappa / n.
  double tolerance = 1e-9;
  std::size_t maxPowerIterations = 1000000;
};

namespace detail {

inline double stationary_residual(const SparseRowMatrix& t, const Eigen::VectorXd& pi) {
  Eigen::VectorXd piT = t.transpose() * pi;
  return (piT - pi).lpNorm<Eigen::Infinity>();
}

// Lazy power iteration pi <- pi (I + T) / 2; converges for any irreducible T.
inline Eigen::VectorXd lazy_power_iteration(const SparseRowMatrix& t, double kappa, double bound,
                                            std::size_t maxIterations) {
  const auto n = t.rows();
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, kappa / static_cast<double>(n));
  SparseRowMatrix tt = t.transpose();
  for (std::size_t k = 0; k < maxIterations; ++k) {
    Eigen::VectorXd next = 0.5 * (pi + tt * pi);
    next *= kappa / next.sum();
    pi.swap(next);
    if (k % 16 == 0 && stationary_residual(t, pi) <= bound) break;
  }
  return pi;
}

}  // namespace detail

/// Solves pi T = pi with sum(pi) = kappa. One redundant balance row of
/// (T^T - I) is replaced by the normalization row, which is nonsingular
/// exactly when T is irreducible; aperiodicity is not needed.
inline PerronVector stationary(const StochasticMatrix& t, double kappa, const StationaryOptions& opts = {}) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::NonPositiveScale, "kappa must be positive");
  }
  if (!is_irreducible(t)) {
    throw Error(ErrorCode::NotIrreducible, "transition matrix support is not strongly connected");
  }
  const auto n = static_cast<Eigen::Index>(t.size());
  const double bound = opts.tolerance * kappa / static_cast<double>(n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = kappa;
  Eigen::VectorXd pi;

  if (t.size() <= opts.denseLimit) {
    Eigen::MatrixXd a = Eigen::MatrixXd(t.matrix().transpose()) - Eigen::MatrixXd::Identity(n, n);
    a.row(n - 1).setOnes();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    pi = lu.solve(rhs);
    // One step of iterative refinement.
    pi += lu.solve(rhs - a * pi);
  } else {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(t.matrix().nonZeros() + 2 * n));
    const auto& m = t.matrix();
    for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
        if (it.col() != n - 1) entries.emplace_back(it.col(), it.row(), it.value());
      }
    }
    for (Eigen::Index i = 0; i < n - 1; ++i) entries.emplace_back(i, i, -1.0);
    for (Eigen::Index j = 0; j < n; ++j) entries.emplace_back(n - 1, j, 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() == Eigen::Success) {
      pi = lu.solve(rhs);
      if (lu.info() == Eigen::Success) pi += lu.solve(rhs - a * pi);
    }
    if (pi.size() != n || !pi.allFinite() || detail::stationary_residual(m, pi) > bound) {
      pi = detail::lazy_power_iteration(m, kappa, bound, opts.maxPowerIterations);
    }
  }

  const double residual = detail::stationary_residual(t.matrix(), pi);
  if (!pi.allFinite() || residual > bound || (pi.array() <= 0.0).any()) {
    throw Error(ErrorCode::SolverFailure,
                "stationary residual " + std::to_string(residual) + " exceeds " + std::to_string(bound));
  }
  return PerronVector{std::move(pi), kappa};
}

/// F[i][j] = pi[i] * T[i][j].
inline IdealFlowMatrix ideal_flow(const PerronVector& pi, const StochasticMatrix& t) {
  if (pi.size() != t.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Perron vector length " + std::to_string(pi.size()) +
                                                  " does not match transition size " + std::to_string(t.size()));
  }
  SparseRowMatrix f = t.matrix();
  for (Eigen::Index i = 0; i < f.outerSize(); ++i) {
    for (SparseRowMatrix::InnerIterator it(f, i); it; ++it) it.valueRef() *= pi.values[i];
  }
  return IdealFlowMatrix(std::move(f));
}

inline IdealFlowMatrix scale(const IdealFlowMatrix& f, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::NonPositiveScale, "scale factor must be positive");
  }
  SparseRowMatrix m = f.matrix() * kappa;
  return IdealFlowMatrix(std::move(m));
}

inline IdealFlowMatrix normalize_min(const IdealFlowMatrix& f) {
  auto lo = f.min_positive();
  if (!lo) throw Error(ErrorCode::EmptyFlow, "flow matrix has no positive entry");
  SparseRowMatrix m = f.matrix();
  for (Eigen::Index k = 0; k < m.nonZeros(); ++k) {
    double& v = m.valuePtr()[k];
    v = v == *lo ? 1.0 : v / *lo;
  }
  return IdealFlowMatrix(std::move(m));
}

/// Scales so that the entries sum to `total`.
inline IdealFlowMatrix normalize_total(const IdealFlowMatrix& f, double total = 1.0) {
  const double sum = f.total();
  if (!(sum > 0.0)) throw Error(ErrorCode::EmptyFlow, "flow matrix has no positive entry");
  return scale(f, total / sum);
}

/// Rounded copy when every entry is within `tol` of an integer; display only.
inline std::optional<IdealFlowMatrix> snap_to_integers(const IdealFlowMatrix& f, double tol = 1e-6) {
  SparseRowMatrix m = f.matrix();
  for (Eigen::Index k = 0; k < m.nonZeros(); ++k) {
    double& v = m.valuePtr()[k];
    double r = std::round(v);
    if (std::abs(v - r) > tol) return std::nullopt;
    v = r;
  }
  return IdealFlowMatrix(std::move(m));
}

struct PremagicCheck {
  bool premagic = false;
  double residual = 0.0;  ///< max_i |rowSum_i - colSum_i|
};

inline PremagicCheck is_premagic(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::NotSquare, "premagic check needs a square matrix");
  if (m.size() == 0) return {true, 0.0};
  const double residual = (m.rowwise().sum() - m.colwise().sum().transpose()).lpNorm<Eigen::Infinity>();
  const double ref = std::max(1.0, m.cwiseAbs().maxCoeff());
  return {residual <= tol * ref, residual};
}

inline PremagicCheck is_premagic(const IdealFlowMatrix& f, double tol) {
  if (f.size() == 0) return {true, 0.0};
  const double residual = (f.row_sums() - f.col_sums()).lpNorm<Eigen::Infinity>();
  const double ref = std::max(1.0, f.max_arc().value);
  return {residual <= tol * ref, residual};
}

/// Entropy in bits of row i; zero probabilities contribute nothing.
inline double node_entropy(const StochasticMatrix& t, NodeId i) {
  double h = 0.0;
  for (SparseRowMatrix::InnerIterator it(t.matrix(), static_cast<Eigen::Index>(i)); it; ++it) {
    const double p = it.value();
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

struct EntropyReport {
  Eigen::VectorXd perNode;      ///< bits
  double networkEntropy = 0.0;  ///< pi-weighted mean of perNode (entropy rate), bits
};

inline EntropyReport network_entropy(const StochasticMatrix& t, const PerronVector& pi) {
  if (pi.size() != t.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Perron vector does not match transition size");
  }
  EntropyReport r;
  r.perNode.resize(static_cast<Eigen::Index>(t.size()));
  for (NodeId i = 0; i < t.size(); ++i) r.perNode[static_cast<Eigen::Index>(i)] = node_entropy(t, i);
  const double total = pi.values.sum();
  r.networkEntropy = total > 0.0 ? pi.values.dot(r.perNode) / total : 0.0;
  return r;
}

/// max(pi)/min(pi) <= (max out-degree)^diameter.
inline bool perron_ratio_check(const PerronVector& pi, const DirectedNetwork& net) {
  if (pi.size() != net.node_count() || pi.size() == 0) return false;
  const double ratio = pi.values.maxCoeff() / pi.values.minCoeff();
  const double bound = std::pow(static_cast<double>(max_out_degree(net)), static_cast<double>(diameter(net)));
  // Equality cases (e.g. a cycle, ratio 1 vs bound 1) must survive rounding.
  return ratio <= bound * (1.0 + 1e-12);
}

/// Markov route end to end: uniform (or capacity) transition, stationary
/// vector at total kappa, Hadamard assembly.
inline IdealFlowMatrix markov_ideal_flow(const DirectedNetwork& net, bool capacityWeighted = false,
                                         double kappa = 1.0) {
  StochasticMatrix t = capacityWeighted ? capacity_transition(net) : uniform_transition(net);
  return ideal_flow(stationary(t, kappa), t);
}

}  // namespace idealflow
