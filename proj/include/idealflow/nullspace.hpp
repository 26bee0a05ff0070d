#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "idealflow/error.hpp"
#include "idealflow/graph.hpp"
#include "idealflow/markov.hpp"

namespace idealflow {

// Standard (uniform-split) ideal flow from the stacked system
//   D = [B; C],  D e = 0,
// where B is the incidence matrix (node conservation) and C forces equal
// flow on the out-arcs of each node. D is p x p with rank p - 1 on a strongly
// connected network, so e is unique up to scale.

struct IncidenceSplit {
  Eigen::SparseMatrix<double> positive;  ///< entries in {0, +1}
  Eigen::SparseMatrix<double> negative;  ///< entries in {0, -1}
};

inline IncidenceSplit split_incidence(const IncidenceMatrix& b) {
  IncidenceSplit s;
  s.positive = b.matrix.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; }).pruned();
  s.negative = b.matrix.unaryExpr([](double v) { return v < 0.0 ? v : 0.0; }).pruned();
  return s;
}

struct ConstraintMatrix {
  Eigen::SparseMatrix<double> matrix;  ///< q x p
};

/// Consecutive chaining e1 = e2, e2 = e3, ... over each node's out-arcs,
/// giving outdeg(i) - 1 rows per node and q = p - n rows in total.
inline ConstraintMatrix build_constraints(const DirectedNetwork& net) {
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::Index row = 0;
  for (NodeId i = 0; i < net.node_count(); ++i) {
    const auto first = static_cast<Eigen::Index>(net.out_begin(i));
    const auto deg = static_cast<Eigen::Index>(net.out_degree(i));
    for (Eigen::Index k = 0; k + 1 < deg; ++k, ++row) {
      entries.emplace_back(row, first + k, 1.0);
      entries.emplace_back(row, first + k + 1, -1.0);
    }
  }
  ConstraintMatrix c;
  c.matrix.resize(row, static_cast<Eigen::Index>(net.arc_count()));
  c.matrix.setFromTriplets(entries.begin(), entries.end());
  return c;
}

struct AugmentedSystem {
  Eigen::SparseMatrix<double> matrix;  ///< (n + q) x p, B stacked over C
  std::size_t nodeCount = 0;
};

inline AugmentedSystem stack_system(const IncidenceMatrix& b, const ConstraintMatrix& c) {
  if (b.matrix.cols() != c.matrix.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "incidence and constraint column counts differ");
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(b.matrix.nonZeros() + c.matrix.nonZeros()));
  for (Eigen::Index j = 0; j < b.matrix.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(b.matrix, j); it; ++it) {
      entries.emplace_back(it.row(), it.col(), it.value());
    }
  }
  const Eigen::Index offset = b.matrix.rows();
  for (Eigen::Index j = 0; j < c.matrix.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(c.matrix, j); it; ++it) {
      entries.emplace_back(offset + it.row(), it.col(), it.value());
    }
  }
  AugmentedSystem d;
  d.matrix.resize(offset + c.matrix.rows(), b.matrix.cols());
  d.matrix.setFromTriplets(entries.begin(), entries.end());
  d.matrix.makeCompressed();
  d.nodeCount = static_cast<std::size_t>(offset);
  return d;
}

inline AugmentedSystem build_system(const DirectedNetwork& net) {
  return stack_system(incidence(net), build_constraints(net));
}

struct NullspaceOptions {
  /// Node counts above this, or arc counts above four times this, use the
  /// sparse pinned-variable solve.
  std::size_t denseLimit = 512;
  double tolerance = 1e-9;
};

namespace detail {

inline Eigen::VectorXd sign_fix(Eigen::VectorXd e, double tol) {
  if (e[0] < 0.0) e = -e;
  const double top = e.cwiseAbs().maxCoeff();
  if (!(top > 0.0) || (e.array() <= tol * top).any()) {
    throw Error(ErrorCode::DegenerateNullSpace, "null vector is not strictly positive");
  }
  return e / top;
}

}  // namespace detail

/// Positive null vector of D, scaled so its largest entry is 1.
///
/// Dense route: full-pivot LU kernel, which also verifies that the kernel is
/// one-dimensional. Sparse route: B's first row is redundant (B's rows sum to
/// zero), so it is replaced by the pin e_0 = 1 and the square system is
/// factored with SparseLU; a singular factorization means the kernel is not
/// one-dimensional.
inline Eigen::VectorXd solve_null(const AugmentedSystem& d, const NullspaceOptions& opts = {}) {
  const Eigen::Index p = d.matrix.cols();
  if (p == 0) throw Error(ErrorCode::DegenerateNullSpace, "system has no arcs");
  if (d.matrix.rows() != p) {
    throw Error(ErrorCode::DegenerateNullSpace,
                "stacked system is " + std::to_string(d.matrix.rows()) + "x" + std::to_string(p) +
                    "; every node needs at least one out-arc");
  }
  Eigen::VectorXd e;
  if (d.nodeCount <= opts.denseLimit && static_cast<std::size_t>(p) <= 4 * opts.denseLimit) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(d.matrix)};
    if (lu.dimensionOfKernel() != 1) {
      throw Error(ErrorCode::DegenerateNullSpace,
                  "null space has dimension " + std::to_string(lu.dimensionOfKernel()));
    }
    e = lu.kernel().col(0);
  } else {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(d.matrix.nonZeros()));
    for (Eigen::Index j = 0; j < d.matrix.outerSize(); ++j) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(d.matrix, j); it; ++it) {
        if (it.row() != 0) entries.emplace_back(it.row(), it.col(), it.value());
      }
    }
    entries.emplace_back(0, 0, 1.0);
    Eigen::SparseMatrix<double> pinned(p, p);
    pinned.setFromTriplets(entries.begin(), entries.end());
    pinned.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(pinned);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorCode::DegenerateNullSpace, "pinned system is singular; null space is not one-dimensional");
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    rhs[0] = 1.0;
    e = lu.solve(rhs);
    e += lu.solve(rhs - pinned * e);
    if (lu.info() != Eigen::Success || !e.allFinite()) {
      throw Error(ErrorCode::DegenerateNullSpace, "sparse solve failed");
    }
  }
  e = detail::sign_fix(std::move(e), opts.tolerance);
  const double residual = (d.matrix * e).lpNorm<Eigen::Infinity>();
  if (residual > opts.tolerance) {
    throw Error(ErrorCode::DegenerateNullSpace, "D e residual " + std::to_string(residual));
  }
  return e;
}

/// f = e / min(e).
inline Eigen::VectorXd normalize_edges(const Eigen::VectorXd& e) {
  if (e.size() == 0) throw Error(ErrorCode::EmptyFlow, "edge vector is empty");
  if ((e.array() <= 0.0).any()) throw Error(ErrorCode::NonPositiveEntry, "edge flows must be positive");
  const double lo = e.minCoeff();
  return e.unaryExpr([lo](double v) { return v == lo ? 1.0 : v / lo; });
}

/// n = B+ e (node throughput); checks B+ e == -B- e.
inline Eigen::VectorXd node_loads(const IncidenceSplit& split, const Eigen::VectorXd& e, double tol = 1e-9) {
  if (split.positive.cols() != e.size()) {
    throw Error(ErrorCode::DimensionMismatch, "edge vector length does not match incidence columns");
  }
  Eigen::VectorXd out = split.positive * e;
  Eigen::VectorXd in = -(split.negative * e);
  const double ref = std::max(1.0, e.size() ? e.cwiseAbs().maxCoeff() : 0.0);
  const double residual = (out - in).size() ? (out - in).lpNorm<Eigen::Infinity>() : 0.0;
  if (residual > tol * ref) {
    throw Error(ErrorCode::ConservationViolated, "outflow and inflow differ by " + std::to_string(residual));
  }
  return out;
}

/// Places an edge vector (arc order of `net`) into a flow matrix.
inline IdealFlowMatrix edges_to_flow(const DirectedNetwork& net, const Eigen::VectorXd& edges) {
  if (static_cast<std::size_t>(edges.size()) != net.arc_count()) {
    throw Error(ErrorCode::DimensionMismatch, "edge vector length does not match arc count");
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(net.arc_count());
  for (std::size_t k = 0; k < net.arc_count(); ++k) {
    const Arc& a = net.arcs()[k];
    entries.emplace_back(static_cast<Eigen::Index>(a.tail), static_cast<Eigen::Index>(a.head),
                         edges[static_cast<Eigen::Index>(k)]);
  }
  return IdealFlowMatrix(detail::from_triplets(net.node_count(), entries));
}

/// Min-normalized standard ideal flow by the null-space route.
inline IdealFlowMatrix nullspace_ideal_flow(const DirectedNetwork& net, const NullspaceOptions& opts = {}) {
  if (!is_strongly_connected(net)) {
    throw Error(ErrorCode::NotStronglyConnected, "null-space method needs a strongly connected network");
  }
  return edges_to_flow(net, normalize_edges(solve_null(build_system(net), opts)));
}

}  // namespace idealflow
