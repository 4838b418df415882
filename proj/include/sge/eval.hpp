#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sge/graph.hpp"
#include "sge/rng.hpp"
#include "sge/spectral.hpp"
#include "sge/update.hpp"

namespace sge {

// Dense class labels, one per vertex, ids in 0..class_count-1.
struct LabeledDataset {
  std::vector<int> labels;
  int class_count = 0;
};

inline void validate_labels(const LabeledDataset& data) {
  if (data.class_count < 2)
    throw std::invalid_argument("at least two classes required");
  for (const int label : data.labels)
    if (label < 0 || label >= data.class_count)
      throw std::invalid_argument("label out of range");
}

// --- one-vs-rest logistic regression -------------------------------------

template <typename Scalar = double>
struct LogRegModel {
  Eigen::MatrixX<Scalar> weights;  // class_count x dim
  Eigen::VectorX<Scalar> bias;     // class_count
};

namespace detail {

template <typename Scalar>
Scalar softplus(Scalar s) {
  return s > Scalar(0) ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

// Full-batch gradient descent with backtracking line search on the
// L2-regularized mean logistic loss of one binary subproblem. The bias is
// left unregularized, so all-zero features still learn the class prior.
template <typename Scalar>
std::pair<Eigen::VectorX<Scalar>, Scalar> fit_binary(
    const Eigen::MatrixX<Scalar>& X, const Eigen::VectorX<Scalar>& targets,
    Scalar l2, int max_iterations, Scalar gradient_tolerance) {
  const Scalar n = static_cast<Scalar>(X.rows());
  Eigen::VectorX<Scalar> w = Eigen::VectorX<Scalar>::Zero(X.cols());
  Scalar b = 0;

  const auto objective = [&](const Eigen::VectorX<Scalar>& wv, Scalar bv) {
    const Eigen::VectorX<Scalar> scores =
        (X * wv).array() + bv;
    Scalar loss = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      loss += softplus(scores[i]) - targets[i] * scores[i];
    return loss / n + l2 / (2 * n) * wv.squaredNorm();
  };

  Scalar step = 1;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorX<Scalar> scores = (X * w).array() + b;
    const Eigen::VectorX<Scalar> probabilities =
        scores.unaryExpr([](Scalar s) {
          return s >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-s))
                                : std::exp(s) / (Scalar(1) + std::exp(s));
        });
    const Eigen::VectorX<Scalar> residual = probabilities - targets;
    const Eigen::VectorX<Scalar> grad_w =
        X.transpose() * residual / n + (l2 / n) * w;
    const Scalar grad_b = residual.sum() / n;
    const Scalar grad_norm =
        std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
    if (grad_norm <= gradient_tolerance) break;

    const Scalar current = objective(w, b);
    step = std::min<Scalar>(step * 2, 1e4);
    for (;;) {
      const Eigen::VectorX<Scalar> w_next = w - step * grad_w;
      const Scalar b_next = b - step * grad_b;
      if (objective(w_next, b_next) <=
          current - Scalar(1e-4) * step * grad_norm * grad_norm) {
        w = w_next;
        b = b_next;
        break;
      }
      step /= 2;
      if (step < Scalar(1e-18)) {
        w -= step * grad_w;
        b -= step * grad_b;
        break;
      }
    }
  }
  return {w, b};
}

}  // namespace detail

template <typename Scalar = double>
LogRegModel<Scalar> train_logreg_ovr(const Eigen::MatrixX<Scalar>& X,
                                     std::span<const int> labels,
                                     int class_count, Scalar l2 = 1,
                                     int max_iterations = 1000,
                                     Scalar gradient_tolerance = 1e-6) {
  if (X.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("one label per row required");
  if (class_count < 2) throw std::invalid_argument("need at least two classes");
  if (X.rows() < class_count)
    throw std::invalid_argument("fewer samples than classes");
  int distinct = 0;
  std::vector<bool> seen(static_cast<std::size_t>(class_count), false);
  for (const int label : labels) {
    if (label < 0 || label >= class_count)
      throw std::invalid_argument("label out of range");
    if (!seen[static_cast<std::size_t>(label)]) {
      seen[static_cast<std::size_t>(label)] = true;
      ++distinct;
    }
  }
  if (distinct < 2)
    throw std::invalid_argument("training labels contain a single class");

  LogRegModel<Scalar> model;
  model.weights = Eigen::MatrixX<Scalar>::Zero(class_count, X.cols());
  model.bias = Eigen::VectorX<Scalar>::Zero(class_count);
  for (int c = 0; c < class_count; ++c) {
    Eigen::VectorX<Scalar> targets(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      targets[i] = labels[static_cast<std::size_t>(i)] == c ? Scalar(1)
                                                            : Scalar(0);
    const auto [w, b] =
        detail::fit_binary(X, targets, l2, max_iterations, gradient_tolerance);
    model.weights.row(c) = w.transpose();
    model.bias[c] = b;
  }
  return model;
}

// argmax of the per-class scores; ties resolve to the lowest class id.
template <typename Scalar = double>
std::vector<int> predict_logreg(const LogRegModel<Scalar>& model,
                                const Eigen::MatrixX<Scalar>& X) {
  const Eigen::MatrixX<Scalar> scores =
      (X * model.weights.transpose()).rowwise() + model.bias.transpose();
  std::vector<int> predictions(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(scores.cols()); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    predictions[static_cast<std::size_t>(i)] = best;
  }
  return predictions;
}

// --- F1 -------------------------------------------------------------------

struct F1Scores {
  double micro = 0;
  double macro = 0;
};

// Micro pools true/false positives over classes (equal to accuracy for
// single-label prediction); macro averages per-class F1 over all classes,
// scoring 0 for classes absent from both truth and prediction.
inline F1Scores f1_scores(std::span<const int> y_true,
                          std::span<const int> y_pred, int class_count) {
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("label vectors must have equal length");
  if (y_true.empty()) throw std::invalid_argument("empty label vectors");
  if (class_count < 1) throw std::invalid_argument("class count must be >= 1");

  std::vector<std::int64_t> tp(static_cast<std::size_t>(class_count), 0);
  std::vector<std::int64_t> fp(static_cast<std::size_t>(class_count), 0);
  std::vector<std::int64_t> fn(static_cast<std::size_t>(class_count), 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= class_count || p < 0 || p >= class_count)
      throw std::invalid_argument("label out of range");
    if (t == p) {
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fn[static_cast<std::size_t>(t)];
      ++fp[static_cast<std::size_t>(p)];
    }
  }

  std::int64_t tp_total = 0, fp_total = 0, fn_total = 0;
  double macro_sum = 0;
  for (int c = 0; c < class_count; ++c) {
    const auto i = static_cast<std::size_t>(c);
    tp_total += tp[i];
    fp_total += fp[i];
    fn_total += fn[i];
    const std::int64_t denominator = 2 * tp[i] + fp[i] + fn[i];
    macro_sum += denominator == 0
                     ? 0.0
                     : 2.0 * static_cast<double>(tp[i]) /
                           static_cast<double>(denominator);
  }

  F1Scores scores;
  const std::int64_t micro_denominator = 2 * tp_total + fp_total + fn_total;
  scores.micro = micro_denominator == 0
                     ? 0.0
                     : 2.0 * static_cast<double>(tp_total) /
                           static_cast<double>(micro_denominator);
  scores.macro = macro_sum / static_cast<double>(class_count);
  return scores;
}

// --- k-means --------------------------------------------------------------

template <typename Scalar = double>
struct KmeansRun {
  std::vector<std::vector<int>> assignments;  // one vector per repeat
  std::vector<Scalar> inertia;
};

namespace detail {

template <typename Scalar>
std::vector<int> kmeans_single(const Eigen::MatrixX<Scalar>& X, int K,
                               Rng& rng, int max_iterations, Scalar& inertia) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixX<Scalar> centroids(K, X.cols());

  // k-means++ seeding: first centroid uniform, the rest sampled
  // proportionally to squared distance from the nearest chosen one.
  Eigen::VectorX<Scalar> nearest =
      Eigen::VectorX<Scalar>::Constant(n, std::numeric_limits<Scalar>::max());
  centroids.row(0) = X.row(static_cast<Eigen::Index>(
      rng.below(static_cast<std::uint64_t>(n))));
  for (int c = 1; c < K; ++c) {
    for (Eigen::Index i = 0; i < n; ++i)
      nearest[i] = std::min(
          nearest[i], (X.row(i) - centroids.row(c - 1)).squaredNorm());
    const Scalar total = nearest.sum();
    Eigen::Index chosen = 0;
    if (total > Scalar(0)) {
      const Scalar target = static_cast<Scalar>(rng.uniform()) * total;
      Scalar cumulative = 0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        cumulative += nearest[i];
        if (cumulative > target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = X.row(chosen);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      Scalar best_distance = (X.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < K; ++c) {
        const Scalar d = (X.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_distance) {
          best_distance = d;
          best = c;
        }
      }
      if (assignment[static_cast<std::size_t>(i)] != best) {
        assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;

    Eigen::MatrixX<Scalar> sums = Eigen::MatrixX<Scalar>::Zero(K, X.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(K), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += X.row(i);
      ++counts[static_cast<std::size_t>(
          assignment[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < K; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) =
            sums.row(c) /
            static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: re-seed from the point farthest from its centroid.
        Eigen::Index farthest = 0;
        Scalar worst = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          const Scalar d =
              (X.row(i) -
               centroids.row(assignment[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d > worst) {
            worst = d;
            farthest = i;
          }
        }
        centroids.row(c) = X.row(farthest);
      }
    }
  }

  inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    inertia +=
        (X.row(i) - centroids.row(assignment[static_cast<std::size_t>(i)]))
            .squaredNorm();
  return assignment;
}

}  // namespace detail

template <typename Scalar = double>
KmeansRun<Scalar> kmeans(const Eigen::MatrixX<Scalar>& X, int K,
                         int repeats = 10, std::uint64_t seed = 0,
                         int max_iterations = 300) {
  if (K < 1) throw std::invalid_argument("cluster count must be >= 1");
  if (X.rows() < K)
    throw std::invalid_argument("fewer points than clusters");
  if (repeats < 1) throw std::invalid_argument("repeat count must be >= 1");

  KmeansRun<Scalar> run;
  run.assignments.reserve(static_cast<std::size_t>(repeats));
  run.inertia.resize(static_cast<std::size_t>(repeats), 0);
  for (int r = 0; r < repeats; ++r) {
    Rng rng(mix_seed(seed, 0x4B4D454153000000ULL +
                               static_cast<std::uint64_t>(r)));
    run.assignments.push_back(detail::kmeans_single(
        X, K, rng, max_iterations, run.inertia[static_cast<std::size_t>(r)]));
  }
  return run;
}

// --- partition agreement --------------------------------------------------

namespace detail {

inline double entropy_from_counts(const std::vector<std::int64_t>& counts,
                                  std::int64_t n) {
  double h = 0;
  for (const std::int64_t count : counts)
    if (count > 0) {
      const double p = static_cast<double>(count) / static_cast<double>(n);
      h -= p * std::log(p);
    }
  return h;
}

struct Contingency {
  std::vector<std::int64_t> row_totals;
  std::vector<std::int64_t> column_totals;
  std::vector<std::vector<std::int64_t>> cells;
  std::int64_t n = 0;
};

inline Contingency contingency_table(std::span<const int> a,
                                     std::span<const int> b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("partitions must be non-empty, equal length");
  int rows = 0, columns = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0)
      throw std::invalid_argument("partition labels must be non-negative");
    rows = std::max(rows, a[i] + 1);
    columns = std::max(columns, b[i] + 1);
  }
  Contingency table;
  table.n = static_cast<std::int64_t>(a.size());
  table.row_totals.assign(static_cast<std::size_t>(rows), 0);
  table.column_totals.assign(static_cast<std::size_t>(columns), 0);
  table.cells.assign(static_cast<std::size_t>(rows),
                     std::vector<std::int64_t>(static_cast<std::size_t>(columns), 0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table.row_totals[static_cast<std::size_t>(a[i])];
    ++table.column_totals[static_cast<std::size_t>(b[i])];
    ++table.cells[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
  }
  return table;
}

inline double joint_entropy(const Contingency& table) {
  double h = 0;
  for (const auto& row : table.cells)
    for (const std::int64_t count : row)
      if (count > 0) {
        const double p =
            static_cast<double>(count) / static_cast<double>(table.n);
        h -= p * std::log(p);
      }
  return h;
}

}  // namespace detail

// Normalized mutual information 2 I(A;B) / (H(A) + H(B)) with natural
// logarithms; 1 when both partitions are single-cluster, 0 when the mutual
// information vanishes.
inline double nmi(std::span<const int> a, std::span<const int> b) {
  const auto table = detail::contingency_table(a, b);
  const double ha = detail::entropy_from_counts(table.row_totals, table.n);
  const double hb = detail::entropy_from_counts(table.column_totals, table.n);
  if (ha + hb == 0.0) return 1.0;
  const double mutual = ha + hb - detail::joint_entropy(table);
  if (mutual <= 0.0) return 0.0;
  return 2.0 * mutual / (ha + hb);
}

// completeness = 1 - H(K|C)/H(K) for cluster assignment K against class
// labels C; 1 when every class sits wholly inside one cluster, and by
// convention 1 when the assignment has a single cluster.
inline double completeness(std::span<const int> assignment,
                           std::span<const int> labels) {
  const auto table = detail::contingency_table(assignment, labels);
  const double hk = detail::entropy_from_counts(table.row_totals, table.n);
  if (hk == 0.0) return 1.0;
  const double hc = detail::entropy_from_counts(table.column_totals, table.n);
  const double conditional = detail::joint_entropy(table) - hc;
  return 1.0 - conditional / hk;
}

// --- streaming experiment -------------------------------------------------

template <typename Scalar = double>
struct ExperimentConfig {
  int k = 16;
  double train_fraction = 0.2;
  std::uint64_t seed = 0;
  int depth = 1;
  Scalar l2 = 1;
  int kmeans_repeats = 10;
  int reorth_interval = 0;
  bool incremental_influence = false;
  EigsOptions eigs;
};

struct EvalReport {
  bool classification_skipped = false;
  std::optional<double> micro_f1;
  std::optional<double> macro_f1;
  double nmi = 0;
  double completeness = 0;
  std::int64_t vertex_count = 0;
  std::int64_t prefix_size = 0;
  std::int64_t arrivals = 0;
};

template <typename Scalar = double>
struct ExperimentResult {
  EvalReport report;
  Eigen::MatrixX<Scalar> final_embedding;
  // One frozen row per post-prefix arrival, captured the moment the vertex
  // arrived; later stream progress never touches these copies.
  Eigen::MatrixX<Scalar> frozen_rows;
  Eigen::MatrixX<Scalar> prefix_embedding;
  std::vector<StepRecord<Scalar>> steps;
  Eigen::Index prefix_size = 0;
};

// Replays the stream: offline embedding on the first ceil(p n) arrivals,
// closed-form updates for the rest. Downstream protocol: the classifier
// trains on the prefix rows as of the end of the prefix and is tested on the
// frozen arrival rows; clustering sees the full final matrix.
template <typename Scalar = double>
ExperimentResult<Scalar> run_stream(const std::vector<ArrivalEvent>& events,
                                    const ExperimentConfig<Scalar>& cfg) {
  const auto n = static_cast<Eigen::Index>(events.size());
  if (n == 0) throw std::invalid_argument("empty arrival stream");
  if (cfg.train_fraction <= 0 || cfg.train_fraction > 1)
    throw std::invalid_argument("train fraction must lie in (0, 1]");
  const auto prefix = static_cast<Eigen::Index>(
      std::ceil(cfg.train_fraction * static_cast<double>(n)));

  ExperimentResult<Scalar> result;
  result.prefix_size = prefix;
  result.report.vertex_count = n;
  result.report.prefix_size = prefix;
  result.report.arrivals = n - prefix;

  DynGraph graph;
  for (Eigen::Index t = 0; t < prefix; ++t)
    apply_arrival(graph, events[static_cast<std::size_t>(t)]);
  result.prefix_embedding = spectral_embed<Scalar>(graph, cfg.k, cfg.eigs);

  if (prefix == n) {
    result.final_embedding = result.prefix_embedding;
    result.frozen_rows.resize(0, cfg.k);
    return result;
  }

  StreamState<Scalar> state(
      std::move(graph), result.prefix_embedding,
      StreamConfig{cfg.depth, cfg.seed, cfg.reorth_interval,
                   cfg.incremental_influence});
  result.frozen_rows.resize(n - prefix, cfg.k);
  result.steps.reserve(static_cast<std::size_t>(n - prefix));
  for (Eigen::Index t = prefix; t < n; ++t) {
    StepRecord<Scalar> record =
        state.process_arrival(events[static_cast<std::size_t>(t)]);
    result.frozen_rows.row(t - prefix) = record.step.new_row;
    result.steps.push_back(std::move(record));
  }
  result.final_embedding = state.embedding().view();
  return result;
}

template <typename Scalar = double>
ExperimentResult<Scalar> run_streaming_experiment(
    const std::vector<ArrivalEvent>& events, const LabeledDataset& labels,
    const ExperimentConfig<Scalar>& cfg) {
  validate_labels(labels);
  if (labels.labels.size() != events.size())
    throw std::invalid_argument("one label per vertex required");

  ExperimentResult<Scalar> result = run_stream(events, cfg);
  const Eigen::Index prefix = result.prefix_size;
  const auto n = static_cast<Eigen::Index>(events.size());

  if (prefix < n) {
    const std::span<const int> all(labels.labels);
    const auto model = train_logreg_ovr<Scalar>(
        result.prefix_embedding, all.subspan(0, static_cast<std::size_t>(prefix)),
        labels.class_count, cfg.l2);
    const std::vector<int> predictions =
        predict_logreg(model, result.frozen_rows);
    const F1Scores scores =
        f1_scores(all.subspan(static_cast<std::size_t>(prefix)), predictions,
                  labels.class_count);
    result.report.micro_f1 = scores.micro;
    result.report.macro_f1 = scores.macro;
  } else {
    result.report.classification_skipped = true;
  }

  const KmeansRun<Scalar> clusters =
      kmeans(result.final_embedding, labels.class_count, cfg.kmeans_repeats,
             mix_seed(cfg.seed, 0xC1A5533D00000000ULL));
  double nmi_sum = 0, completeness_sum = 0;
  for (const auto& assignment : clusters.assignments) {
    nmi_sum += nmi(assignment, labels.labels);
    completeness_sum += completeness(assignment, labels.labels);
  }
  const auto repeats = static_cast<double>(clusters.assignments.size());
  result.report.nmi = nmi_sum / repeats;
  result.report.completeness = completeness_sum / repeats;
  return result;
}

}  // namespace sge
