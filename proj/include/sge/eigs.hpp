#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sge/laplacian.hpp"
#include "sge/rng.hpp"

namespace sge {

template <typename Scalar = double>
struct EigenPair {
  Scalar value;
  Eigen::VectorX<Scalar> vector;
};

struct EigsOptions {
  // Graphs at or below this order use the dense solver; larger ones use the
  // restarted iterative solver.
  int dense_threshold = 512;
  // Required bound on ||M x - lambda x|| for every returned pair.
  double tolerance = 1e-8;
  // Iterative basis cap per restart cycle; 0 picks one from the requested
  // pair count.
  int max_basis = 0;
  // Total matvec budget across restarts; 0 scales one from the basis cap.
  int max_iterations = 0;
  int check_every = 8;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double achieved_residual)
      : std::runtime_error(what + " (achieved residual " +
                           std::to_string(achieved_residual) + ")"),
        achieved_residual_(achieved_residual) {}

  double achieved_residual() const { return achieved_residual_; }

 private:
  double achieved_residual_;
};

// Fixes the sign so the largest-magnitude entry is positive. Ties resolve
// to the lowest index, and magnitudes within a few ulps of the maximum
// count as tied: eigenvectors of symmetric structures carry equal-magnitude
// entries whose rounding direction must not decide the sign.
template <typename Scalar>
void canonicalize_sign(Eigen::VectorX<Scalar>& v) {
  if (v.size() == 0) return;
  const Scalar best = v.cwiseAbs().maxCoeff();
  const Scalar cutoff =
      best * (Scalar(1) - Scalar(8) * std::numeric_limits<Scalar>::epsilon());
  Eigen::Index pivot = 0;
  while (pivot < v.size() && std::abs(v[pivot]) < cutoff) ++pivot;
  if (v[pivot] < Scalar(0)) v = -v;
}

namespace detail {

template <typename Scalar>
std::vector<EigenPair<Scalar>> smallest_pairs_dense(
    const Eigen::SparseMatrix<Scalar>& M, int m, const EigsOptions& opts) {
  const Eigen::MatrixX<Scalar> dense(M);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixX<Scalar>> solver(dense);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("dense eigendecomposition failed", 1.0);

  std::vector<EigenPair<Scalar>> pairs(static_cast<std::size_t>(m));
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    pairs[static_cast<std::size_t>(i)].value = solver.eigenvalues()[i];
    Eigen::VectorX<Scalar> v = solver.eigenvectors().col(i);
    canonicalize_sign(v);
    const double residual =
        (dense * v - solver.eigenvalues()[i] * v).norm();
    worst = std::max(worst, residual);
    pairs[static_cast<std::size_t>(i)].vector = std::move(v);
  }
  if (worst > opts.tolerance)
    throw ConvergenceError("dense eigenpairs exceed residual tolerance",
                           worst);
  return pairs;
}

// Iterative route: thick-restart Krylov iteration on M itself. The basis
// grows by the image of its newest vector under full two-pass
// reorthogonalization, Rayleigh-Ritz supplies eigenpair estimates, and when
// the basis hits its cap the iteration compresses to the best Ritz vectors
// plus the outgoing Krylov direction and keeps extending. Sparse matvecs
// are the only large-scale operation, so cost per step is O(nnz + n j).
// Breakdown (an invariant subspace) is handled by injecting a fresh
// deterministic direction, which also recovers multiple eigenvalues.
template <typename Scalar>
std::vector<EigenPair<Scalar>> smallest_pairs_iterative(
    const Eigen::SparseMatrix<Scalar>& M, int m, const EigsOptions& opts) {
  using Matrix = Eigen::MatrixX<Scalar>;
  using Vector = Eigen::VectorX<Scalar>;

  const Eigen::Index n = M.rows();
  const int cap = opts.max_basis > 0
                      ? static_cast<int>(std::min<Eigen::Index>(n, opts.max_basis))
                      : static_cast<int>(std::min<Eigen::Index>(
                            n, std::max(4 * m + 50, 250)));
  if (cap < m)
    throw std::invalid_argument("basis cap smaller than requested pair count");

  // Restarting needs headroom past the retained block. A cap without that
  // headroom gets a single pass, so deliberately starved configurations
  // fail deterministically instead of spinning inside restarts.
  const int keep = std::min(2 * m, cap - 8);
  const bool restartable = keep >= m;
  const long budget = opts.max_iterations > 0
                          ? opts.max_iterations
                          : std::max(20L * cap, 2000L);

  Matrix basis(n, cap);
  Matrix projected = Matrix::Zero(cap, cap);

  std::uint64_t inject_state = 0x5EEDB0B5C0FFEE11ULL;
  const auto fresh_direction = [&]() {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
      v[i] = static_cast<Scalar>(splitmix64(inject_state) >> 11) *
                 static_cast<Scalar>(0x1.0p-53) -
             static_cast<Scalar>(0.5);
    return v;
  };

  // Two-pass orthogonalization keeps the basis orthonormal to machine
  // precision even for nearly dependent candidates.
  const auto orthonormalize = [&](const Vector& v, int j) {
    Vector u = v;
    for (int pass = 0; pass < 2; ++pass)
      if (j > 0) u -= basis.leftCols(j) * (basis.leftCols(j).transpose() * u);
    const Scalar norm = u.norm();
    if (norm < Scalar(1e-8)) return Vector();
    return Vector(u / norm);
  };

  Vector candidate = fresh_direction();
  int j = 0;
  long spent = 0;
  double best_worst_residual = std::numeric_limits<double>::infinity();
  std::vector<Scalar> previous_ritz;

  while (spent < budget) {
    Vector v = orthonormalize(candidate, j);
    int guard = 0;
    while (v.size() == 0) {
      if (++guard > 16)
        throw ConvergenceError("could not extend iteration basis",
                               best_worst_residual);
      v = orthonormalize(fresh_direction(), j);
    }
    basis.col(j) = v;
    const Vector image = M * v;
    projected.block(0, j, j + 1, 1) =
        basis.leftCols(j + 1).transpose() * image;
    projected.block(j, 0, 1, j).noalias() =
        projected.block(0, j, j, 1).transpose();
    ++j;
    ++spent;
    candidate = image;

    const bool at_cap = j == cap;
    if (j < m || (j % opts.check_every != 0 && !at_cap)) continue;

    Eigen::SelfAdjointEigenSolver<Matrix> ritz(
        projected.topLeftCorner(j, j));
    if (ritz.info() != Eigen::Success) {
      if (at_cap) break;
      continue;
    }

    // Eigen orders ascending, so the wanted smallest pairs come first.
    std::vector<Scalar> wanted(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
      wanted[static_cast<std::size_t>(i)] = ritz.eigenvalues()[i];

    // Cheap gate: only pay for residuals once the Ritz values stabilize.
    bool stable = previous_ritz.size() == wanted.size();
    if (stable)
      for (std::size_t i = 0; i < wanted.size(); ++i)
        if (std::abs(wanted[i] - previous_ritz[i]) >
            Scalar(1e-10) * std::max<Scalar>(Scalar(1), std::abs(wanted[i])))
          stable = false;
    previous_ritz = std::move(wanted);

    if (stable || at_cap) {
      std::vector<EigenPair<Scalar>> pairs(static_cast<std::size_t>(m));
      double worst = 0.0;
      for (int i = 0; i < m; ++i) {
        Vector x = basis.leftCols(j) * ritz.eigenvectors().col(i);
        x.normalize();
        const Scalar lambda = x.dot(M * x);
        const double residual = (M * x - lambda * x).norm();
        worst = std::max(worst, residual);
        pairs[static_cast<std::size_t>(i)].value = lambda;
        pairs[static_cast<std::size_t>(i)].vector = std::move(x);
      }
      best_worst_residual = std::min(best_worst_residual, worst);
      if (worst <= opts.tolerance) {
        std::sort(pairs.begin(), pairs.end(), [](const auto& a,
                                                 const auto& b) {
          return a.value < b.value;
        });
        for (auto& pair : pairs) canonicalize_sign(pair.vector);
        return pairs;
      }
    }

    if (!at_cap) continue;
    if (!restartable || spent >= budget) break;

    // Compress to the retained Ritz vectors; the outgoing Krylov direction
    // (projected against the full pre-restart basis) seeds the next cycle.
    Vector outgoing = orthonormalize(candidate, cap);
    const Matrix compressed =
        basis.leftCols(cap) * ritz.eigenvectors().leftCols(keep);
    basis.leftCols(keep) = compressed;
    projected.topLeftCorner(keep, keep) =
        ritz.eigenvalues().head(keep).asDiagonal();
    j = keep;
    candidate = outgoing.size() == 0 ? fresh_direction() : std::move(outgoing);
  }
  throw ConvergenceError(
      "iterative eigensolver did not converge (basis cap " +
          std::to_string(cap) + ", iteration budget " + std::to_string(budget) +
          ")",
      best_worst_residual);
}

}  // namespace detail

// The m smallest eigenpairs of a symmetric positive semidefinite sparse
// matrix, ascending, each with ||M x - lambda x|| <= opts.tolerance.
template <typename Scalar = double>
std::vector<EigenPair<Scalar>> smallest_eigenpairs(
    const Eigen::SparseMatrix<Scalar>& M, int m,
    const EigsOptions& opts = {}) {
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix not square");
  if (m < 1 || m > M.rows())
    throw std::invalid_argument("requested pair count out of range");
  if (M.rows() <= opts.dense_threshold)
    return detail::smallest_pairs_dense(M, m, opts);
  return detail::smallest_pairs_iterative(M, m, opts);
}

template <typename Scalar = double>
std::vector<EigenPair<Scalar>> eigendecompose(const LaplacianView<Scalar>& lap,
                                              int m,
                                              const EigsOptions& opts = {}) {
  return smallest_eigenpairs(lap.matrix, m, opts);
}

}  // namespace sge
