#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "fibertrace/error.hpp"
#include "fibertrace/pullback.hpp"
#include "test_util.hpp"

using namespace fibertrace;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

/// Independent kernel route for cross-checks: eigenvectors of the metric
/// matrix itself whose eigenvalues fall below tol^2 * lambda_max.
Eigen::MatrixXd kernel_by_eigendecomposition(const MetricTensor& metric, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(metric.matrix);
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double cutoff = tol * tol * values.maxCoeff();
  Eigen::Index r = 0;
  while (r < values.size() && values[r] <= cutoff) ++r;
  return eig.eigenvectors().leftCols(r);
}

/// Polyline through the images of `poly` sampled at `samples` points per
/// segment, mapped through layers 1..k. Oracle-side discretization of the
/// image curve.
Polyline image_polyline(const NetworkSpec& net, int k, const Polyline& poly, int samples) {
  Polyline image;
  for (std::size_t s = 0; s + 1 < poly.vertices.size(); ++s) {
    for (int q = 0; q < samples; ++q) {
      const double t = static_cast<double>(q) / samples;
      const Eigen::VectorXd point =
          poly.vertices[s] + t * (poly.vertices[s + 1] - poly.vertices[s]);
      image.vertices.push_back(forward(net, 1, k, point));
    }
  }
  image.vertices.push_back(forward(net, 1, k, poly.vertices.back()));
  return image;
}

}  // namespace

TEST_CASE("pullback of the Euclidean metric through the 3->2 linear map") {
  const NetworkSpec net = ftest::load_fixture("linear_map_3to2.json");
  const MetricTensor metric = pullback_metric(net, 0, vec3(0.3, -1.2, 0.9));

  Eigen::MatrixXd expected(3, 3);
  expected << 10, 5, 17, 5, 5, 9, 17, 9, 29;
  REQUIRE((metric.matrix - expected).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE(metric.rank == 2);
}

TEST_CASE("identity network pulls back to the output metric everywhere") {
  Eigen::MatrixXd g(2, 2);
  g << 2.0, 0.3, 0.3, 1.5;
  const NetworkSpec net(
      {SmoothLayer{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                   Activation::Identity}},
      g);
  std::mt19937 rng(5);
  for (int i = 0; i < 20; ++i) {
    const MetricTensor metric = pullback_metric(net, 0, ftest::random_vector(rng, 2, 5.0));
    REQUIRE((metric.matrix - g).cwiseAbs().maxCoeff() <= 1e-14);
    REQUIRE(metric.rank == 2);
  }
}

TEST_CASE("shallow softplus fixture has rank-1 pullback everywhere") {
  const NetworkSpec net = ftest::load_fixture("softplus_2_2_1.json");
  std::mt19937 rng(6);
  for (int i = 0; i < 50; ++i) {
    const MetricTensor metric = pullback_metric(net, 0, ftest::random_vector(rng, 2, 3.0));
    REQUIRE(metric.rank == 1);
    REQUIRE(metric.matrix.rows() == 2);
  }
}

TEST_CASE("kernel of the 3->2 linear map is spanned by (8,1,-5)") {
  const NetworkSpec net = ftest::load_fixture("linear_map_3to2.json");
  const KernelBasis kernel = kernel_basis(net, 0, vec3(0, 0, 0));
  REQUIRE(kernel.kernel_dim == 1);
  REQUIRE(kernel.rank == 2);
  REQUIRE(ftest::sin_angle_to_line(kernel.vectors.col(0), vec3(8, 1, -5)) <= 1e-12);
  // deterministic orientation: first sizable component positive
  REQUIRE(kernel.vectors(0, 0) > 0.0);
}

TEST_CASE("kernel field of the shallow softplus fixture is constant (1,-2)/sqrt5") {
  const NetworkSpec net = ftest::load_fixture("softplus_2_2_1.json");
  std::mt19937 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = ftest::random_vector(rng, 2, 3.0);
    const KernelBasis kernel = kernel_basis(net, 0, x);
    REQUIRE(kernel.kernel_dim == 1);
    REQUIRE(ftest::sin_angle_to_line(kernel.vectors.col(0), vec2(1, -2)) <= 1e-6);
    REQUIRE(kernel.vectors(0, 0) > 0.0);
  }
}

TEST_CASE("kernels of intermediate spaces are exposed through at_layer") {
  // after the first layer of the shallow fixture, only the first coordinate
  // feeds the output, so the kernel of g^(1) is the second coordinate axis
  const NetworkSpec net = ftest::load_fixture("softplus_2_2_1.json");
  const KernelBasis kernel = kernel_basis(net, 1, vec2(0.7, 0.4));
  REQUIRE(kernel.kernel_dim == 1);
  REQUIRE(ftest::sin_angle_to_line(kernel.vectors.col(0), vec2(0, 1)) <= 1e-12);

  // at_layer == n is the output space itself: full rank, trivial kernel
  Eigen::VectorXd y(1);
  y << 0.3;
  REQUIRE(kernel_basis(net, 2, y).kernel_dim == 0);
}

TEST_CASE("square full-rank network has an empty kernel") {
  const NetworkSpec net = ftest::load_fixture("identity_2_2.json");
  const KernelBasis kernel = kernel_basis(net, 0, vec2(0.4, -0.9));
  REQUIRE(kernel.kernel_dim == 0);
  REQUIRE(kernel.rank == 2);
  REQUIRE(kernel.vectors.cols() == 0);
}

TEST_CASE("kernel columns are orthonormal and annihilated by the jacobian") {
  std::mt19937 rng(808);
  int nontrivial = 0;
  for (int trial = 0; trial < 60; ++trial) {
    ftest::RandomNetOptions opts;
    opts.nonincreasing_dims = true;
    opts.random_output_metric = (trial % 2 == 0);
    const NetworkSpec net = ftest::random_net(rng, opts);
    const Eigen::VectorXd x = ftest::random_vector(rng, net.dim(0), 2.0);
    const KernelBasis kernel = kernel_basis(net, 0, x);
    if (kernel.kernel_dim == 0) continue;
    ++nontrivial;

    const Eigen::MatrixXd gram =
        kernel.vectors.transpose() * kernel.vectors -
        Eigen::MatrixXd::Identity(kernel.kernel_dim, kernel.kernel_dim);
    REQUIRE(gram.cwiseAbs().maxCoeff() <= 1e-10);

    const Eigen::MatrixXd jac = composite_jacobian(net, 1, net.num_layers(), x);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const double sigma_max = svd.singularValues()[0];
    for (Eigen::Index c = 0; c < kernel.kernel_dim; ++c) {
      REQUIRE((jac * kernel.vectors.col(c)).norm() <= 1e-8 * std::max(sigma_max, 1e-30));
    }
  }
  REQUIRE(nontrivial >= 10);
}

TEST_CASE("svd and eigendecomposition kernel routes agree") {
  std::mt19937 rng(909);
  for (int trial = 0; trial < 40; ++trial) {
    ftest::RandomNetOptions opts;
    opts.nonincreasing_dims = true;
    const NetworkSpec net = ftest::random_net(rng, opts);
    const Eigen::VectorXd x = ftest::random_vector(rng, net.dim(0), 2.0);
    const KernelBasis kernel = kernel_basis(net, 0, x);
    if (kernel.kernel_dim == 0) continue;

    const MetricTensor metric = pullback_metric(net, 0, x);
    const Eigen::MatrixXd eig_kernel = kernel_by_eigendecomposition(metric, 1e-6);
    if (eig_kernel.cols() != kernel.kernel_dim) continue;  // threshold disagreement
    REQUIRE(ftest::sin_max_principal_angle(kernel.vectors, eig_kernel) <= 1e-6);
  }

  // and on the exact fixture, where both routes are unambiguous
  const NetworkSpec net = ftest::load_fixture("linear_map_3to2.json");
  const Eigen::VectorXd x = vec3(0.1, 0.2, 0.3);
  const KernelBasis kernel = kernel_basis(net, 0, x);
  const Eigen::MatrixXd eig_kernel =
      kernel_by_eigendecomposition(pullback_metric(net, 0, x), 1e-6);
  REQUIRE(eig_kernel.cols() == 1);
  REQUIRE(ftest::sin_max_principal_angle(kernel.vectors, eig_kernel) <= 1e-6);
}

TEST_CASE("seminorm basics") {
  const NetworkSpec linear = ftest::load_fixture("linear_map_3to2.json");
  const MetricTensor metric = pullback_metric(linear, 0, vec3(0, 0, 0));

  SUBCASE("kernel vectors have zero seminorm") {
    const KernelBasis kernel = kernel_basis(linear, 0, vec3(0, 0, 0));
    REQUIRE(seminorm(metric, kernel.vectors.col(0)) <= 1e-8);
  }
  SUBCASE("unit coordinate vector") {
    REQUIRE(seminorm(metric, vec3(1, 0, 0)) ==
            doctest::Approx(std::sqrt(10.0)).epsilon(1e-14));
  }
  SUBCASE("euclidean 3-4-5 on the identity metric") {
    MetricTensor identity;
    identity.matrix = Eigen::MatrixXd::Identity(2, 2);
    identity.point = vec2(0, 0);
    identity.rank = 2;
    REQUIRE(seminorm(identity, vec2(3, 4)) == doctest::Approx(5.0));
  }
  SUBCASE("dimension mismatch") {
    REQUIRE_THROWS_AS(seminorm(metric, vec2(1, 0)), Error);
  }
}

TEST_CASE("pseudolength of null segments vanishes") {
  const NetworkSpec net = ftest::load_fixture("linear_map_3to2.json");
  Polyline segment;
  segment.vertices = {vec3(0.5, 0.5, 0.5), vec3(0.5 + 8, 0.5 + 1, 0.5 - 5)};
  REQUIRE(pseudolength(net, 0, segment, 8) <= 1e-10);
}

TEST_CASE("pseudolength of a straight segment under the identity network") {
  const NetworkSpec net = ftest::load_fixture("identity_2_2.json");
  Polyline segment;
  segment.vertices = {vec2(0, 0), vec2(3, 4)};
  REQUIRE(pseudolength(net, 0, segment, 1) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("pseudolength is additive over concatenation") {
  std::mt19937 rng(1212);
  const NetworkSpec net = ftest::random_net(rng);
  const Polyline whole = ftest::random_polyline(rng, net.dim(0), 6, 2.0);
  Polyline head, tail;
  head.vertices.assign(whole.vertices.begin(), whole.vertices.begin() + 4);
  tail.vertices.assign(whole.vertices.begin() + 3, whole.vertices.end());
  const double sum = pseudolength(net, 0, head, 16) + pseudolength(net, 0, tail, 16);
  REQUIRE(pseudolength(net, 0, whole, 16) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("pseudolength rejects degenerate input") {
  const NetworkSpec net = ftest::load_fixture("identity_2_2.json");
  Polyline single;
  single.vertices = {vec2(0, 0)};
  REQUIRE_THROWS_AS(pseudolength(net, 0, single, 8), Error);
  Polyline ok;
  ok.vertices = {vec2(0, 0), vec2(1, 1)};
  REQUIRE_THROWS_AS(pseudolength(net, 0, ok, 0), Error);
}

TEST_CASE("lengths are preserved through the layer chain") {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 30; ++trial) {
    const NetworkSpec net = ftest::random_net(rng);
    const Polyline poly = ftest::random_polyline(rng, net.dim(0), 10, 2.0);
    const double base = pseudolength(net, 0, poly, 64);
    for (int k = 1; k <= net.num_layers(); ++k) {
      const Polyline image = image_polyline(net, k, poly, 64);
      const double image_length = pseudolength(net, k, image, 64);
      CAPTURE(trial);
      CAPTURE(k);
      REQUIRE(std::abs(base - image_length) <= 1e-4 * (1.0 + base));
    }
  }
}

TEST_CASE("pullback metrics are symmetric positive semidefinite with bounded rank") {
  std::mt19937 rng(31415);
  for (int trial = 0; trial < 200; ++trial) {
    ftest::RandomNetOptions opts;
    opts.random_output_metric = (trial % 3 == 0);
    const NetworkSpec net = ftest::random_net(rng, opts);
    const Eigen::VectorXd x = ftest::random_vector(rng, net.dim(0), 3.0);
    const MetricTensor metric = pullback_metric(net, 0, x);

    REQUIRE((metric.matrix - metric.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(metric.matrix);
    const double max_eig = eig.eigenvalues().maxCoeff();
    REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10 * std::max(max_eig, 0.0));
    REQUIRE(metric.rank <= net.dim(net.num_layers()));
  }
}

TEST_CASE("fixture metrics reach full output rank") {
  const NetworkSpec linear = ftest::load_fixture("linear_map_3to2.json");
  REQUIRE(pullback_metric(linear, 0, vec3(1, 1, 1)).rank == 2);
  const NetworkSpec shallow = ftest::load_fixture("softplus_2_2_1.json");
  REQUIRE(pullback_metric(shallow, 0, vec2(0.3, 0.8)).rank == 1);
}

TEST_CASE("distance bound: coincident points and the identity network") {
  const NetworkSpec net = ftest::load_fixture("identity_2_2.json");
  REQUIRE(pseudodistance_upper_bound(net, vec2(0.7, -0.2), vec2(0.7, -0.2)).bound == 0.0);

  DistanceBoundOptions opts;
  opts.segments = 8;
  const DistanceBound bound = pseudodistance_upper_bound(net, vec2(0, 0), vec2(3, 4), opts);
  REQUIRE(std::abs(bound.bound - 5.0) <= 1e-10);
}

TEST_CASE("distance bound collapses along the null line of the softplus fixture") {
  const NetworkSpec net = ftest::load_fixture("softplus_2_2_1.json");
  DistanceBoundOptions opts;
  opts.segments = 32;
  opts.descent_iters = 80;
  const DistanceBound bound = pseudodistance_upper_bound(net, vec2(0, 0), vec2(1, -2), opts);
  REQUIRE(bound.bound <= 1e-4);
}

TEST_CASE("distance bound never increases under segment doubling") {
  const NetworkSpec net = ftest::load_fixture("softplus_2_2_1.json");
  std::mt19937 rng(555);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd a = ftest::random_vector(rng, 2, 2.0);
    const Eigen::VectorXd b = ftest::random_vector(rng, 2, 2.0);
    double previous = -1.0;
    for (int segments : {4, 8, 16, 32}) {
      DistanceBoundOptions opts;
      opts.segments = segments;
      opts.descent_iters = 30;
      const double bound = pseudodistance_upper_bound(net, a, b, opts).bound;
      if (previous >= 0.0) {
        REQUIRE(bound <= previous + 1e-9);
      }
      previous = bound;
    }
  }
}

TEST_CASE("pullback validates its inputs") {
  const NetworkSpec net = ftest::load_fixture("softplus_2_2_1.json");
  REQUIRE_THROWS_AS(pullback_metric(net, 5, vec2(0, 0)), Error);
  REQUIRE_THROWS_AS(pullback_metric(net, 0, vec3(0, 0, 0)), Error);
  REQUIRE_THROWS_AS(kernel_basis(net, 0, vec2(0, 0), 1.5), Error);
}
