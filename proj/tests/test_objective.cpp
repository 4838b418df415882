#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sge/graph.hpp"
#include "sge/objective.hpp"
#include "sge/update.hpp"

namespace {

sge::DynGraph path(int n) {
  sge::DynGraph g;
  apply_arrival(g, {0, {}});
  for (sge::VertexId v = 1; v < n; ++v)
    apply_arrival(g, {v, {static_cast<sge::VertexId>(v - 1)}});
  return g;
}

Eigen::MatrixXd random_orthonormal(sge::Rng& rng, int n, int k) {
  Eigen::MatrixXd a(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = rng.uniform() - 0.5;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
}

}  // namespace

TEST_CASE("smoothness is the squared displacement of surviving rows") {
  Eigen::MatrixXd prev(2, 2);
  prev << 1, 0, 0, 1;
  Eigen::MatrixXd next(3, 2);
  next << 1, 1, 0, 3, 9, 9;
  // Row displacements (0,1) and (0,2); the appended row does not enter.
  CHECK(sge::smoothness_loss(prev, next) == doctest::Approx(5.0));

  CHECK_THROWS_AS(sge::smoothness_loss(prev, prev), std::invalid_argument);
  CHECK_THROWS_AS(sge::smoothness_loss(next, prev), std::invalid_argument);
}

TEST_CASE("smoothness equals the padded Frobenius form") {
  sge::Rng rng(15);
  const int n = 14, k = 3;
  Eigen::MatrixXd prev(n, k), next(n + 1, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) prev(i, j) = rng.uniform();
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j < k; ++j) next(i, j) = rng.uniform();

  Eigen::MatrixXd select = Eigen::MatrixXd::Zero(n, n + 1);
  select.leftCols(n).setIdentity();
  const double direct = sge::smoothness_loss(prev, next);
  const double padded = (select * next - prev).squaredNorm();
  CHECK(direct == doctest::Approx(padded).epsilon(1e-12));
}

TEST_CASE("homophily sums squared edge differences") {
  const sge::DynGraph g = path(3);
  Eigen::MatrixXd f(3, 2);
  f << 0, 1, 2, 3, 5, 8;
  CHECK(sge::homophily_loss(f, g) == doctest::Approx(42.0));

  Eigen::MatrixXd wrong(2, 2);
  CHECK_THROWS_AS(sge::homophily_loss(wrong, g), std::invalid_argument);
}

TEST_CASE("loss weights track the graph size") {
  const sge::DynGraph g = path(3);
  Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(3, 1);
  next << 1, 2, 4;

  const auto loss = sge::total_loss(prev, next, g);
  CHECK(loss.gamma_smoothness == doctest::Approx(1.0 / 3.0));
  CHECK(loss.gamma_homophily == doctest::Approx(1.0 / 8.0));
  CHECK(loss.smoothness == doctest::Approx(5.0));
  CHECK(loss.homophily == doctest::Approx(5.0));
  CHECK(loss.total == doctest::Approx(5.0 / 3.0 + 5.0 / 8.0));
  CHECK_FALSE(loss.degenerate_homophily);

  sge::DynGraph edgeless;
  apply_arrival(edgeless, {0, {}});
  apply_arrival(edgeless, {1, {}});
  apply_arrival(edgeless, {2, {}});
  const auto degenerate = sge::total_loss(prev, next, edgeless);
  CHECK(degenerate.degenerate_homophily);
  CHECK(degenerate.gamma_homophily == 0);
  CHECK(degenerate.total ==
        doctest::Approx(degenerate.gamma_smoothness * degenerate.smoothness));
}

TEST_CASE("one update's smoothness is alpha squared on the worked example") {
  auto e = sge::Embedding<double>::from_matrix(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd prev = e.view();
  const std::vector<sge::VertexId> influenced{0, 1};
  const auto step = sge::apply_update(e, 2, influenced);
  const Eigen::MatrixXd next = e.view();

  const double a = 1.0 - 1.0 / std::sqrt(2.0);
  const double ls = sge::smoothness_loss(prev, next);
  CHECK(ls == doctest::Approx(a * a).epsilon(1e-12));
  CHECK(ls == doctest::Approx(0.0857864376269049).epsilon(1e-10));

  // Same number through the closed form |I| alpha^2 ||r||^2.
  const double closed =
      2.0 * step.alpha * step.alpha * step.new_row.squaredNorm();
  CHECK(ls == doctest::Approx(closed).epsilon(1e-12));
}

TEST_CASE("orthogonality residual measures the Gram gap") {
  CHECK(sge::orthogonality_residual(Eigen::MatrixXd::Identity(5, 3)) == 0);

  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(5, 3);
  f.col(1) *= 1.1;
  CHECK(sge::orthogonality_residual(f) == doctest::Approx(0.21).epsilon(1e-12));
}

TEST_CASE("Procrustes alignment recovers a planted rotation") {
  sge::Rng rng(63);
  const Eigen::MatrixXd a = random_orthonormal(rng, 20, 4);
  const Eigen::MatrixXd planted = random_orthonormal(rng, 4, 4);
  const Eigen::MatrixXd b = a * planted;

  const Eigen::MatrixXd r = sge::procrustes_rotation(a, b);
  CHECK((r - planted).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((r.transpose() * r - Eigen::MatrixXd::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
  CHECK((a * r - b).cwiseAbs().maxCoeff() <= 1e-10);

  Eigen::MatrixXd wrong(3, 4);
  CHECK_THROWS_AS(sge::procrustes_rotation(a, wrong), std::invalid_argument);
}

TEST_CASE("deviation record against an identical retrain is zero") {
  auto e = sge::Embedding<double>::from_matrix(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd prev = e.view();
  sge::DynGraph g = path(2);
  apply_arrival(g, {2, {0, 1}});
  const std::vector<sge::VertexId> influenced{0, 1};
  const auto step = sge::apply_update(e, 2, influenced);
  const Eigen::MatrixXd streamed = e.view();

  const auto record = sge::deviation_step(prev, streamed, streamed, g, step);
  CHECK(record.delta_loss == 0);
  CHECK(record.alpha == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)));
  CHECK(record.bound == doctest::Approx(2 * record.alpha));
  CHECK(record.smoothness_term >= 0);
  CHECK(record.homophily_term >= 0);
}

TEST_CASE("empty influence leaves the step size undefined") {
  auto e = sge::Embedding<double>::from_matrix(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd prev = e.view();
  sge::DynGraph g = path(2);
  apply_arrival(g, {2, {}});
  const std::vector<sge::VertexId> none;
  const auto step = sge::apply_update(e, 2, none);
  const Eigen::MatrixXd streamed = e.view();

  const auto record = sge::deviation_step(prev, streamed, streamed, g, step);
  CHECK(std::isnan(record.alpha));
  CHECK(std::isnan(record.bound));
  CHECK(record.delta_loss == 0);
}

TEST_CASE("weighted smoothness stays below the step size along a stream") {
  sge::DynGraph prefix;
  apply_arrival(prefix, {0, {}});
  apply_arrival(prefix, {1, {0}});
  sge::StreamState<double> state(prefix, Eigen::MatrixXd::Identity(2, 2),
                                 {.depth = 2, .seed = 31337});
  sge::Rng rng(5);
  for (sge::VertexId v = 2; v < 102; ++v) {
    sge::ArrivalEvent event{v, {static_cast<sge::VertexId>(rng.below(
                                static_cast<std::uint64_t>(v)))}};
    const Eigen::MatrixXd prev = state.embedding().view();
    const auto rec = state.process_arrival(event);
    const Eigen::MatrixXd streamed = state.embedding().view();

    const auto record = sge::deviation_step(prev, streamed, streamed,
                                            state.graph(), rec.step);
    if (rec.step.has_alpha) {
      CHECK(record.smoothness_term <= record.alpha + 1e-15);
      // The closed form ties the weighted smoothness to the update data.
      const double closed = static_cast<double>(rec.step.influenced.size()) /
                            static_cast<double>(state.graph().vertex_count()) *
                            record.alpha * record.alpha *
                            rec.step.new_row.squaredNorm();
      CHECK(record.smoothness_term == doctest::Approx(closed).epsilon(1e-10));
    } else {
      CHECK(record.smoothness_term == 0);
    }
  }
}

TEST_CASE("deviation diagnostic walks seeds and steps") {
  std::vector<sge::ArrivalEvent> events;
  events.push_back({0, {}});
  sge::Rng rng(17);
  for (sge::VertexId v = 1; v < 16; ++v) {
    sge::ArrivalEvent event{v, {static_cast<sge::VertexId>(rng.below(
                                static_cast<std::uint64_t>(v)))}};
    if (v > 2 && rng.bernoulli(0.5)) {
      auto extra = static_cast<sge::VertexId>(
          rng.below(static_cast<std::uint64_t>(v)));
      if (extra != event.edges[0]) event.edges.push_back(extra);
    }
    std::sort(event.edges.begin(), event.edges.end());
    events.push_back(event);
  }

  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto report = sge::deviation_diagnostic(events, 10, 2, seeds, 1);

  CHECK(report.steps == 6);
  CHECK(report.seeds == 3);
  REQUIRE(report.records.size() == 18);
  CHECK(report.within_bound_fraction >= 0);
  CHECK(report.within_bound_fraction <= 1);

  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const auto& record = report.records[i];
    CHECK(record.step >= 10);
    CHECK(record.step < 16);
    CHECK(record.seed == seeds[i % 3]);
    CHECK(record.delta_loss >= 0);
    // The precondition verdict is shared by every seed of a step.
    CHECK(record.precondition_ok == report.records[i - i % 3].precondition_ok);
  }

  CHECK_THROWS_AS(sge::deviation_diagnostic(events, 10, 2, {}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(sge::deviation_diagnostic(events, 0, 2, seeds, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(sge::deviation_diagnostic(events, 99, 2, seeds, 1),
                  std::invalid_argument);
}
