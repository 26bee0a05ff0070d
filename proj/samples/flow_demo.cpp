// Ideal flow of a small network, printed as a matrix with its margins.
#include <iostream>

#include "idealflow/idealflow.hpp"

int main() {
  using namespace idealflow;
  const DirectedNetwork net = from_adjacency({
      {0, 1, 1, 1, 1},
      {0, 0, 1, 1, 1},
      {0, 1, 0, 1, 1},
      {1, 0, 0, 0, 1},
      {0, 0, 0, 1, 0},
  });
  const IdealFlowMatrix f = normalize_min(markov_ideal_flow(net));
  std::cout << export_matrix_csv(f);
  const Eigen::VectorXd rows = f.row_sums(), cols = f.col_sums();
  std::cout << "row sums:";
  for (Eigen::Index i = 0; i < rows.size(); ++i) std::cout << ' ' << format_number(rows[i]);
  std::cout << "\ncol sums:";
  for (Eigen::Index i = 0; i < cols.size(); ++i) std::cout << ' ' << format_number(cols[i]);
  std::cout << "\ntotal: " << format_number(f.total()) << '\n';
}
