#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "sge/graph.hpp"
#include "sge/laplacian.hpp"
#include "sge/spectral.hpp"

namespace {

sge::DynGraph path3() {
  sge::DynGraph g;
  apply_arrival(g, {0, {}});
  apply_arrival(g, {1, {0}});
  apply_arrival(g, {2, {1}});
  return g;
}

}  // namespace

TEST_CASE("normalized Laplacian of a path has the expected entries") {
  const auto lap = sge::build_normalized_laplacian(path3());
  const Eigen::MatrixXd dense(lap.matrix);
  const double c = -1.0 / std::sqrt(2.0);

  Eigen::Matrix3d expected;
  expected << 1, c, 0, c, 1, c, 0, c, 1;
  CHECK((dense - expected).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(lap.isolated == std::vector<bool>{false, false, false});
}

TEST_CASE("isolated vertices contribute zero rows and are flagged") {
  sge::DynGraph g;
  apply_arrival(g, {0, {}});
  apply_arrival(g, {1, {}});
  apply_arrival(g, {2, {0}});
  const auto lap = sge::build_normalized_laplacian(g);
  const Eigen::MatrixXd dense(lap.matrix);
  CHECK(dense.row(1).cwiseAbs().maxCoeff() == 0);
  CHECK(dense.col(1).cwiseAbs().maxCoeff() == 0);
  CHECK(lap.isolated == std::vector<bool>{false, true, false});

  sge::DynGraph empty;
  CHECK_THROWS_AS(sge::build_normalized_laplacian(empty),
                  std::invalid_argument);
}

TEST_CASE("path embedding skips the ground mode") {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  const Eigen::MatrixXd f1 = sge::spectral_embed(path3(), 1);
  REQUIRE(f1.rows() == 3);
  REQUIRE(f1.cols() == 1);
  CHECK(f1(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(std::abs(f1(1, 0)) <= 1e-12);
  CHECK(f1(2, 0) == doctest::Approx(-inv_sqrt2).epsilon(1e-12));

  const Eigen::MatrixXd f2 = sge::spectral_embed(path3(), 2);
  REQUIRE(f2.cols() == 2);
  CHECK((f2.col(0) - f1.col(0)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(f2(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(f2(1, 1) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(f2(2, 1) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("embedding columns are orthonormal eigenvectors") {
  sge::Rng rng(314159);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<sge::VertexId>(8 + rng.below(40));
    const sge::DynGraph graph =
        oracle::random_graph(rng, n, 0.15 + 0.3 * rng.uniform());
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));

    const Eigen::MatrixXd f = sge::spectral_embed(graph, k);
    REQUIRE(f.rows() == n);
    REQUIRE(f.cols() == k);

    const Eigen::MatrixXd gram = f.transpose() * f;
    CHECK((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() <=
          1e-8);

    const auto lap = sge::build_normalized_laplacian(graph);
    const auto pairs = sge::eigendecompose(lap, k + 1);
    for (int c = 0; c < k; ++c) {
      const double lambda = pairs[static_cast<std::size_t>(c) + 1].value;
      CHECK((lap.matrix * f.col(c) - lambda * f.col(c)).norm() <= 1e-8);
    }
  }
}

TEST_CASE("quadratic trace equals the sum of kept eigenvalues") {
  sge::Rng rng(2718);
  const sge::DynGraph graph = oracle::random_graph(rng, 40, 0.2);
  const int k = 6;

  const Eigen::MatrixXd f = sge::spectral_embed(graph, k);
  const auto lap = sge::build_normalized_laplacian(graph);
  const auto pairs = sge::eigendecompose(lap, k + 1);

  double eigenvalue_sum = 0;
  for (int c = 1; c <= k; ++c)
    eigenvalue_sum += pairs[static_cast<std::size_t>(c)].value;

  const double edge_route = sge::laplacian_quadratic_trace(f, graph, true);
  const double matrix_route =
      (f.transpose() * Eigen::MatrixXd(lap.matrix) * f).trace();
  CHECK(edge_route == doctest::Approx(eigenvalue_sum).epsilon(1e-10));
  CHECK(edge_route == doctest::Approx(matrix_route).epsilon(1e-10));
}

TEST_CASE("unnormalized trace reduces to plain edge differences") {
  const sge::DynGraph g = path3();
  Eigen::MatrixXd f(3, 2);
  f << 0, 1, 2, 3, 5, 8;
  // Edges (0,1) and (1,2): (2-0)^2+(3-1)^2 + (5-2)^2+(8-3)^2 = 42.
  CHECK(sge::laplacian_quadratic_trace(f, g, false) ==
        doctest::Approx(42.0).epsilon(1e-14));
}

TEST_CASE("embedding keeps extra null modes of a disconnected graph") {
  sge::DynGraph g;
  apply_arrival(g, {0, {}});
  apply_arrival(g, {1, {0}});
  apply_arrival(g, {2, {0, 1}});
  apply_arrival(g, {3, {}});

  const Eigen::MatrixXd f = sge::spectral_embed(g, 2);
  const auto lap = sge::build_normalized_laplacian(g);
  CHECK((lap.matrix * f.col(0)).norm() <= 1e-10);
  CHECK((lap.matrix * f.col(1) - 1.5 * f.col(1)).norm() <= 1e-10);
}

TEST_CASE("embedding dimension validation") {
  CHECK_THROWS_AS(sge::spectral_embed(path3(), 0), std::invalid_argument);
  CHECK_THROWS_AS(sge::spectral_embed(path3(), 3), std::invalid_argument);
  CHECK_THROWS_WITH_AS(sge::spectral_embed(path3(), 3),
                       "embedding dimension requires at least k + 1 vertices "
                       "(k = 3, vertices = 3)",
                       std::invalid_argument);
}
