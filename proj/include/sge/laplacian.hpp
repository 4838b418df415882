#pragma once

#include <Eigen/SparseCore>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sge/graph.hpp"

namespace sge {

// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}, stored sparse.
// Rows and columns of isolated vertices are identically zero, so each
// isolated vertex contributes one extra zero eigenvalue.
template <typename Scalar = double>
struct LaplacianView {
  Eigen::SparseMatrix<Scalar> matrix;
  std::vector<bool> isolated;
};

template <typename Scalar = double>
LaplacianView<Scalar> build_normalized_laplacian(const DynGraph& graph) {
  const VertexId n = graph.vertex_count();
  if (n < 1) throw std::invalid_argument("graph must have at least one vertex");

  LaplacianView<Scalar> lap;
  lap.isolated.assign(static_cast<std::size_t>(n), false);

  std::vector<Scalar> inv_sqrt_degree(static_cast<std::size_t>(n), Scalar(0));
  for (VertexId v = 0; v < n; ++v) {
    const VertexId d = graph.degree(v);
    if (d == 0)
      lap.isolated[static_cast<std::size_t>(v)] = true;
    else
      inv_sqrt_degree[static_cast<std::size_t>(v)] =
          Scalar(1) / std::sqrt(static_cast<Scalar>(d));
  }

  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) +
                   2 * static_cast<std::size_t>(graph.edge_count()));
  for (VertexId v = 0; v < n; ++v) {
    if (lap.isolated[static_cast<std::size_t>(v)]) continue;
    triplets.emplace_back(v, v, Scalar(1));
    for (const VertexId u : graph.neighbors(v))
      triplets.emplace_back(
          v, u,
          -inv_sqrt_degree[static_cast<std::size_t>(v)] *
              inv_sqrt_degree[static_cast<std::size_t>(u)]);
  }
  lap.matrix.resize(n, n);
  lap.matrix.setFromTriplets(triplets.begin(), triplets.end());
  lap.matrix.makeCompressed();
  return lap;
}

}  // namespace sge
