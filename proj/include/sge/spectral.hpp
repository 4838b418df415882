#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "sge/eigs.hpp"
#include "sge/graph.hpp"
#include "sge/laplacian.hpp"

namespace sge {

// Offline initializer: columns are the eigenvectors of the normalized
// Laplacian at positions 2..k+1 of the ascending spectrum. Exactly one zero
// eigenvalue is skipped; further zero modes of a disconnected graph are
// kept, since they still minimize the quadratic form.
template <typename Scalar = double>
Eigen::MatrixX<Scalar> spectral_embed(const DynGraph& graph, int k,
                                      const EigsOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  const VertexId n = graph.vertex_count();
  if (k + 1 > n)
    throw std::invalid_argument(
        "embedding dimension requires at least k + 1 vertices (k = " +
        std::to_string(k) + ", vertices = " + std::to_string(n) + ")");

  const LaplacianView<Scalar> lap = build_normalized_laplacian<Scalar>(graph);
  const auto pairs = eigendecompose(lap, k + 1, opts);

  Eigen::MatrixX<Scalar> embedding(n, k);
  for (int c = 0; c < k; ++c)
    embedding.col(c) = pairs[static_cast<std::size_t>(c) + 1].vector;
  return embedding;
}

// Value of the spectral objective tr(F^T L F) for either Laplacian variant;
// mainly a diagnostic for comparing the normalized initializer against the
// unnormalized quadratic form.
template <typename Derived>
typename Derived::Scalar laplacian_quadratic_trace(
    const Eigen::MatrixBase<Derived>& F, const DynGraph& graph,
    bool normalized = true) {
  using Scalar = typename Derived::Scalar;
  Scalar trace = 0;
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    const Scalar dv = static_cast<Scalar>(graph.degree(v));
    for (const VertexId u : graph.neighbors(v)) {
      if (u > v) continue;
      const Scalar du = static_cast<Scalar>(graph.degree(u));
      if (normalized) {
        const auto diff =
            F.row(v) / std::sqrt(dv) - F.row(u) / std::sqrt(du);
        trace += diff.squaredNorm();
      } else {
        trace += (F.row(v) - F.row(u)).squaredNorm();
      }
    }
  }
  return trace;
}

}  // namespace sge
