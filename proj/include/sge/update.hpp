#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sge/graph.hpp"
#include "sge/influence.hpp"

namespace sge {

// Step size for one arrival given the influenced-set size; the unique root
// in (0, 1] that keeps the updated columns orthonormal.
template <typename Scalar = double>
Scalar alpha(std::int64_t influenced_size) {
  if (influenced_size < 1)
    throw std::invalid_argument("alpha requires a non-empty influenced set");
  return Scalar(1) - std::sqrt(Scalar(1) -
                               Scalar(1) / static_cast<Scalar>(influenced_size));
}

// Representation of the arriving vertex: the mean of the influenced rows,
// or the zero row when nothing was influenced.
template <typename Derived>
Eigen::RowVectorX<typename Derived::Scalar> generate_new_row(
    const Eigen::MatrixBase<Derived>& F, std::span<const VertexId> influenced) {
  using Scalar = typename Derived::Scalar;
  Eigen::RowVectorX<Scalar> row = Eigen::RowVectorX<Scalar>::Zero(F.cols());
  if (influenced.empty()) return row;
  for (const VertexId u : influenced) {
    if (u < 0 || u >= F.rows())
      throw std::invalid_argument("influenced vertex out of range");
    row += F.row(u);
  }
  row /= static_cast<Scalar>(influenced.size());
  return row;
}

template <typename Scalar = double>
struct UpdateStep {
  VertexId new_vertex = 0;
  std::vector<VertexId> influenced;
  bool has_alpha = false;
  Scalar alpha = 0;
  Eigen::RowVectorX<Scalar> new_row;
};

// Column-orthonormal embedding with one row per vertex. Storage grows by
// doubling so appends stay amortized constant and do not disturb per-arrival
// timing medians.
template <typename Scalar = double>
class Embedding {
 public:
  explicit Embedding(int dimension) : storage_(0, dimension) {
    if (dimension < 1)
      throw std::invalid_argument("embedding dimension must be >= 1");
  }

  static Embedding from_matrix(const Eigen::MatrixX<Scalar>& matrix) {
    Embedding e(static_cast<int>(matrix.cols()));
    e.storage_ = matrix;
    e.rows_ = matrix.rows();
    return e;
  }

  int dimension() const { return static_cast<int>(storage_.cols()); }
  Eigen::Index rows() const { return rows_; }

  auto view() const { return storage_.topRows(rows_); }

  auto row(VertexId v) {
    check_row(v);
    return storage_.row(v);
  }
  auto row(VertexId v) const {
    check_row(v);
    return storage_.row(v);
  }

  void append_row(const Eigen::RowVectorX<Scalar>& row) {
    if (row.size() != storage_.cols())
      throw std::invalid_argument("row dimension mismatch");
    if (rows_ == storage_.rows())
      storage_.conservativeResize(std::max<Eigen::Index>(2 * rows_, 16),
                                  Eigen::NoChange);
    storage_.row(rows_) = row;
    ++rows_;
  }

  // max |F^T F - I|; the orthonormality invariant holds when this is <= 1e-8.
  Scalar orthogonality_residual() const {
    const Eigen::MatrixX<Scalar> gram = view().transpose() * view();
    return (gram - Eigen::MatrixX<Scalar>::Identity(dimension(), dimension()))
        .cwiseAbs()
        .maxCoeff();
  }

 private:
  void check_row(VertexId v) const {
    if (v < 0 || v >= rows_)
      throw std::invalid_argument("embedding row " + std::to_string(v) +
                                  " out of range");
  }

  Eigen::MatrixX<Scalar> storage_;
  Eigen::Index rows_ = 0;
};

// Applies one arrival to the embedding: append the mean row for the new
// vertex and pull every influenced row toward zero along it by alpha. The
// two moves cancel exactly in the Gram matrix, so column orthonormality is
// preserved up to rounding.
template <typename Scalar>
UpdateStep<Scalar> apply_update(Embedding<Scalar>& embedding,
                                VertexId new_vertex,
                                std::span<const VertexId> influenced) {
  if (new_vertex != embedding.rows())
    throw std::invalid_argument("arriving vertex must take the next row");
  for (std::size_t i = 0; i < influenced.size(); ++i) {
    const VertexId u = influenced[i];
    if (u == new_vertex)
      throw std::invalid_argument("influenced set contains the arriving vertex");
    if (u < 0 || u >= embedding.rows())
      throw std::invalid_argument("influenced vertex out of range");
    if (i > 0 && influenced[i] <= influenced[i - 1])
      throw std::invalid_argument("influenced set must be sorted and unique");
  }

  UpdateStep<Scalar> step;
  step.new_vertex = new_vertex;
  step.influenced.assign(influenced.begin(), influenced.end());
  step.new_row = generate_new_row(embedding.view(), influenced);
  if (!influenced.empty()) {
    step.has_alpha = true;
    step.alpha = alpha<Scalar>(static_cast<std::int64_t>(influenced.size()));
    for (const VertexId u : influenced)
      embedding.row(u) -= step.alpha * step.new_row;
  }
  embedding.append_row(step.new_row);
  return step;
}

// Replaces the embedding with the orthonormal factor of its QR
// decomposition; optional drift guard for very long streams.
template <typename Scalar>
void reorthonormalize(Embedding<Scalar>& embedding) {
  Eigen::MatrixX<Scalar> F = embedding.view();
  Eigen::HouseholderQR<Eigen::MatrixX<Scalar>> qr(F);
  Eigen::MatrixX<Scalar> q =
      qr.householderQ() *
      Eigen::MatrixX<Scalar>::Identity(F.rows(), F.cols());
  // Pin the factor's sign so the guard itself is deterministic.
  const Eigen::MatrixX<Scalar> r =
      qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int c = 0; c < q.cols(); ++c)
    if (r(c, c) < Scalar(0)) q.col(c) = -q.col(c);
  embedding = Embedding<Scalar>::from_matrix(q);
}

struct StreamConfig {
  int depth = 1;
  std::uint64_t seed = 0;
  // Every this many arrivals the embedding is re-orthonormalized; 0 leaves
  // the closed-form update on its own, which the invariants already cover.
  int reorth_interval = 0;
  // Off by default: the cached cascade variant changes the sampling
  // distribution at depth >= 2 once entries exist.
  bool incremental_influence = false;
};

template <typename Scalar = double>
struct StepRecord {
  UpdateStep<Scalar> step;
  InfluenceResult influence;
  std::int64_t influence_ns = 0;
  std::int64_t update_ns = 0;
};

// Streaming state: the growing graph, the embedding, and the cascade cache.
// process_arrival implements one full arrival: graph first, then influence
// identification on the post-arrival graph, then the closed-form update.
template <typename Scalar = double>
class StreamState {
 public:
  StreamState(DynGraph graph, const Eigen::MatrixX<Scalar>& initial,
              StreamConfig cfg)
      : graph_(std::move(graph)),
        embedding_(Embedding<Scalar>::from_matrix(initial)),
        cfg_(cfg) {
    if (initial.rows() != graph_.vertex_count())
      throw std::invalid_argument(
          "initial embedding must have one row per vertex");
  }

  const DynGraph& graph() const { return graph_; }
  const Embedding<Scalar>& embedding() const { return embedding_; }
  const InfluenceCache& cache() const { return cache_; }
  const StreamConfig& config() const { return cfg_; }

  StepRecord<Scalar> process_arrival(const ArrivalEvent& event) {
    using Clock = std::chrono::steady_clock;
    apply_arrival(graph_, event);

    const InfluenceConfig icfg{cfg_.depth, arrival_seed(cfg_.seed, event.vertex)};
    const auto t0 = Clock::now();
    InfluenceResult influence =
        cfg_.incremental_influence
            ? incremental_influenced_set(cache_, graph_, event.vertex, icfg)
            : influenced_set(graph_, event.vertex, icfg);
    const auto t1 = Clock::now();
    UpdateStep<Scalar> step =
        apply_update(embedding_, event.vertex, influence.influenced);
    const auto t2 = Clock::now();

    cache_.store(event.vertex, influence);
    ++arrivals_;
    if (cfg_.reorth_interval > 0 && arrivals_ % cfg_.reorth_interval == 0)
      reorthonormalize(embedding_);

    StepRecord<Scalar> record;
    record.step = std::move(step);
    record.influence = std::move(influence);
    record.influence_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    record.update_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t1).count();
    return record;
  }

 private:
  DynGraph graph_;
  Embedding<Scalar> embedding_;
  InfluenceCache cache_;
  StreamConfig cfg_;
  std::int64_t arrivals_ = 0;
};

}  // namespace sge
