#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "sge/graph.hpp"
#include "sge/update.hpp"

namespace {

Eigen::MatrixXd random_orthonormal(sge::Rng& rng, int n, int k) {
  Eigen::MatrixXd a(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = rng.uniform() - 0.5;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
}

std::vector<sge::VertexId> random_subset(sge::Rng& rng, sge::VertexId n,
                                         std::uint64_t max_size) {
  std::set<sge::VertexId> picked;
  const std::uint64_t want = rng.below(max_size + 1);
  while (picked.size() < want &&
         picked.size() < static_cast<std::size_t>(n))
    picked.insert(
        static_cast<sge::VertexId>(rng.below(static_cast<std::uint64_t>(n))));
  return {picked.begin(), picked.end()};
}

}  // namespace

TEST_CASE("alpha is the orthonormality-preserving root") {
  CHECK(sge::alpha<double>(1) == 1.0);
  CHECK(std::abs(sge::alpha<double>(2) - (1.0 - 1.0 / std::sqrt(2.0))) <=
        1e-15);
  CHECK(std::abs(sge::alpha<double>(4) - (1.0 - std::sqrt(3.0) / 2.0)) <=
        1e-15);

  for (std::int64_t m = 1; m <= 100; ++m) {
    const double a = sge::alpha<double>(m);
    CHECK(a > 0);
    CHECK(a <= 1);
    CHECK(std::abs(a * a - 2 * a + 1.0 / static_cast<double>(m)) <= 1e-15);
  }

  CHECK_THROWS_AS(sge::alpha<double>(0), std::invalid_argument);
  CHECK_THROWS_AS(sge::alpha<double>(-3), std::invalid_argument);
}

TEST_CASE("new rows average the influenced rows") {
  Eigen::MatrixXd f(3, 2);
  f << 1, 2, 3, 4, 5, 6;

  const std::vector<sge::VertexId> none;
  CHECK(sge::generate_new_row(f, none).isZero(0));

  const std::vector<sge::VertexId> pair{0, 2};
  const Eigen::RowVector2d mean(3, 4);
  CHECK((sge::generate_new_row(f, pair) - mean).cwiseAbs().maxCoeff() <=
        1e-15);

  const std::vector<sge::VertexId> bad{0, 3};
  CHECK_THROWS_AS(sge::generate_new_row(f, bad), std::invalid_argument);
}

TEST_CASE("single-column worked example") {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd f(2, 1);
  f << inv_sqrt2, inv_sqrt2;
  auto e = sge::Embedding<double>::from_matrix(f);

  const std::vector<sge::VertexId> influenced{0};
  const auto step = sge::apply_update(e, 2, influenced);

  CHECK(step.has_alpha);
  CHECK(step.alpha == 1.0);
  CHECK(step.new_row.size() == 1);
  CHECK(step.new_row[0] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  REQUIRE(e.rows() == 3);
  CHECK(std::abs(e.row(0)[0]) <= 1e-12);
  CHECK(e.row(1)[0] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(e.row(2)[0] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(e.orthogonality_residual() <= 1e-12);
}

TEST_CASE("two-column worked example") {
  auto e = sge::Embedding<double>::from_matrix(Eigen::MatrixXd::Identity(2, 2));
  const std::vector<sge::VertexId> influenced{0, 1};
  const auto step = sge::apply_update(e, 2, influenced);

  const double a = 1.0 - 1.0 / std::sqrt(2.0);
  CHECK(step.alpha == doctest::Approx(a).epsilon(1e-15));
  CHECK(step.new_row[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(step.new_row[1] == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(e.row(0)[0] == doctest::Approx(0.8535533905932737).epsilon(1e-12));
  CHECK(e.row(0)[1] == doctest::Approx(-0.1464466094067263).epsilon(1e-12));
  CHECK(e.row(1)[0] == doctest::Approx(-0.1464466094067263).epsilon(1e-12));
  CHECK(e.row(1)[1] == doctest::Approx(0.8535533905932737).epsilon(1e-12));
  CHECK(e.row(2)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e.row(2)[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e.orthogonality_residual() <= 1e-12);
}

TEST_CASE("empty influence appends a zero row and touches nothing") {
  auto e = sge::Embedding<double>::from_matrix(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd before = e.view();

  const std::vector<sge::VertexId> none;
  const auto step = sge::apply_update(e, 2, none);
  CHECK_FALSE(step.has_alpha);
  CHECK(step.new_row.isZero(0));
  REQUIRE(e.rows() == 3);
  CHECK((e.view().topRows(2).array() == before.array()).all());
  CHECK(e.view().row(2).isZero(0));
  CHECK(e.orthogonality_residual() <= 1e-15);
}

TEST_CASE("update argument validation") {
  auto e = sge::Embedding<double>::from_matrix(Eigen::MatrixXd::Identity(3, 2));
  const auto update = [&](sge::VertexId v, std::vector<sge::VertexId> inf) {
    sge::apply_update(e, v, inf);
  };
  CHECK_THROWS_AS(update(2, {}), std::invalid_argument);
  CHECK_THROWS_AS(update(4, {}), std::invalid_argument);
  CHECK_THROWS_AS(update(3, {3}), std::invalid_argument);
  CHECK_THROWS_AS(update(3, {-1}), std::invalid_argument);
  CHECK_THROWS_AS(update(3, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(update(3, {1, 1}), std::invalid_argument);
  CHECK(e.rows() == 3);
  CHECK(e.orthogonality_residual() <= 1e-15);

  CHECK_THROWS_AS(sge::Embedding<double>(0), std::invalid_argument);
  sge::Embedding<double> fresh(2);
  CHECK_THROWS_AS(fresh.append_row(Eigen::RowVectorXd::Zero(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fresh.row(0), std::invalid_argument);
}

TEST_CASE("influenced rows move by exactly alpha times the new row") {
  sge::Rng rng(606);
  auto e = sge::Embedding<double>::from_matrix(random_orthonormal(rng, 12, 4));
  const Eigen::MatrixXd before = e.view();

  const std::vector<sge::VertexId> influenced{1, 5, 9};
  const auto step = sge::apply_update(e, 12, influenced);

  for (sge::VertexId v = 0; v < 12; ++v) {
    const bool touched = std::binary_search(influenced.begin(),
                                            influenced.end(), v);
    if (touched) {
      const Eigen::RowVectorXd expected =
          before.row(v) - step.alpha * step.new_row;
      CHECK((e.view().row(v) - expected).cwiseAbs().maxCoeff() <= 1e-15);
    } else {
      CHECK((e.view().row(v).array() == before.row(v).array()).all());
    }
  }
}

TEST_CASE("a thousand random updates each preserve orthonormality") {
  sge::Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(29));
    const int k = 1 + static_cast<int>(rng.below(
                          static_cast<std::uint64_t>(std::min(n - 1, 8))));
    auto e = sge::Embedding<double>::from_matrix(
        random_orthonormal(rng, n, k));
    const auto influenced =
        random_subset(rng, static_cast<sge::VertexId>(n), 6);
    sge::apply_update(e, static_cast<sge::VertexId>(n), influenced);
    CHECK(e.orthogonality_residual() <= 1e-12);
  }
}

TEST_CASE("ten thousand chained updates accumulate no drift") {
  sge::Rng rng(55555);
  auto e = sge::Embedding<double>::from_matrix(Eigen::MatrixXd::Identity(8, 8));
  for (int step = 0; step < 10000; ++step) {
    const auto n = static_cast<sge::VertexId>(e.rows());
    const auto influenced = random_subset(rng, n, 5);
    sge::apply_update(e, n, influenced);
    if (step % 1000 == 999) CHECK(e.orthogonality_residual() <= 1e-8);
  }
  CHECK(e.rows() == 10008);
  CHECK(e.orthogonality_residual() <= 1e-8);
}

TEST_CASE("capacity doubling preserves existing rows") {
  sge::Rng rng(321);
  sge::Embedding<double> e(3);
  std::vector<Eigen::RowVector3d> mirror;
  for (int i = 0; i < 100; ++i) {
    Eigen::RowVector3d row(rng.uniform(), rng.uniform(), rng.uniform());
    e.append_row(row);
    mirror.push_back(row);
    REQUIRE(e.rows() == i + 1);
    for (int j = 0; j <= i; ++j)
      CHECK((e.view().row(j).array() ==
             mirror[static_cast<std::size_t>(j)].array())
                .all());
  }
}

TEST_CASE("reorthonormalization heals drift deterministically") {
  sge::Rng rng(777);
  Eigen::MatrixXd f = random_orthonormal(rng, 20, 5);
  const Eigen::MatrixXd clean = f;

  // An already orthonormal embedding is a fixed point up to rounding.
  auto e = sge::Embedding<double>::from_matrix(f);
  sge::reorthonormalize(e);
  CHECK((Eigen::MatrixXd(e.view()) - clean).cwiseAbs().maxCoeff() <= 1e-10);

  for (int i = 0; i < f.rows(); ++i)
    for (int j = 0; j < f.cols(); ++j) f(i, j) += 1e-4 * (rng.uniform() - 0.5);
  auto drifted = sge::Embedding<double>::from_matrix(f);
  CHECK(drifted.orthogonality_residual() > 1e-8);
  sge::reorthonormalize(drifted);
  CHECK(drifted.orthogonality_residual() <= 1e-12);

  auto again = sge::Embedding<double>::from_matrix(f);
  sge::reorthonormalize(again);
  CHECK((Eigen::MatrixXd(drifted.view()).array() ==
         Eigen::MatrixXd(again.view()).array())
            .all());
}

TEST_CASE("stream state advances graph, cascade, and embedding together") {
  sge::DynGraph prefix;
  apply_arrival(prefix, {0, {}});
  apply_arrival(prefix, {1, {0}});

  sge::StreamState<double> state(prefix, Eigen::MatrixXd::Identity(2, 2),
                                 {.depth = 2, .seed = 42});

  const auto record = state.process_arrival({2, {1}});
  CHECK(state.graph().vertex_count() == 3);
  CHECK(state.graph().has_edge(1, 2));
  CHECK(state.embedding().rows() == 3);
  CHECK(state.cache().has(2));
  CHECK(record.influence.seed == sge::arrival_seed(42, 2));
  CHECK(record.step.new_vertex == 2);
  CHECK(record.influence_ns >= 0);
  CHECK(record.update_ns >= 0);
  CHECK(state.embedding().orthogonality_residual() <= 1e-12);

  const auto isolated = state.process_arrival({3, {}});
  CHECK_FALSE(isolated.step.has_alpha);
  CHECK(state.embedding().view().row(3).isZero(0));
  CHECK(state.embedding().orthogonality_residual() <= 1e-12);

  CHECK_THROWS_AS(sge::StreamState<double>(
                      state.graph(), Eigen::MatrixXd::Identity(2, 2), {}),
                  std::invalid_argument);
}

TEST_CASE("long streams keep the invariants under every variant") {
  const auto run = [](sge::StreamConfig cfg) {
    sge::DynGraph prefix;
    apply_arrival(prefix, {0, {}});
    apply_arrival(prefix, {1, {0}});
    sge::StreamState<double> state(prefix, Eigen::MatrixXd::Identity(2, 2),
                                   cfg);
    sge::Rng rng(2024);
    for (sge::VertexId v = 2; v < 502; ++v) {
      sge::ArrivalEvent event{v, {}};
      for (sge::VertexId u = 0; u < v; ++u)
        if (rng.bernoulli(3.0 / static_cast<double>(v)))
          event.edges.push_back(u);
      state.process_arrival(event);
      if (v % 50 == 0)
        CHECK(state.embedding().orthogonality_residual() <= 1e-10);
    }
    CHECK(state.graph().vertex_count() == 502);
    CHECK(state.embedding().rows() == 502);
    CHECK(state.embedding().orthogonality_residual() <= 1e-10);
    return Eigen::MatrixXd(state.embedding().view());
  };

  const Eigen::MatrixXd plain = run({.depth = 2, .seed = 9});
  const Eigen::MatrixXd replay = run({.depth = 2, .seed = 9});
  CHECK((plain.array() == replay.array()).all());

  run({.depth = 2, .seed = 9, .reorth_interval = 100});
  run({.depth = 2, .seed = 9, .incremental_influence = true});
}
