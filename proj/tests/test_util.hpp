#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fibertrace/pullback.hpp"
#include "fibertrace/smooth_net.hpp"
#include "fibertrace/spec_io.hpp"

namespace ftest {

inline std::string fixture_path(const std::string& name) {
  return std::string(FIBERTRACE_FIXTURE_DIR) + "/" + name;
}

inline fibertrace::NetworkSpec load_fixture(const std::string& name) {
  return fibertrace::load_network_file(fixture_path(name));
}

// ---- closed forms for the shallow softplus fixtures ------------------------
//
// softplus_2_2_1.json computes f(x0,x1) = ln(1 + (1 + e^{2 x0 + x1})^4); its
// level lines satisfy 2 x0 + x1 = const and the metric kernel is spanned by
// (1,-2)/sqrt(5). The closed form below is evaluated through pow/exp directly,
// an arithmetic path independent of the layer chain.

inline double softplus_chain_value(double x0, double x1) {
  return std::log1p(std::pow(1.0 + std::exp(2.0 * x0 + x1), 4.0));
}

// softplus_2_1_1.json parameters (first layer (a,b)+d, second layer c):
inline constexpr double kWeightFixtureA = 0.8;
inline constexpr double kWeightFixtureB = -0.5;
inline constexpr double kWeightFixtureD = 0.3;
inline constexpr double kWeightFixtureC = 1.2;

inline double weight_chain_value(double a, double b, double d, double x0, double x1) {
  return std::log1p(
      std::pow(1.0 + std::exp(a * x0 + b * x1 + d), kWeightFixtureC));
}

// ---- geometry helpers -------------------------------------------------------

/// sin of the angle between a unit vector and the line spanned by `axis`.
inline double sin_angle_to_line(const Eigen::VectorXd& unit, const Eigen::VectorXd& axis) {
  const Eigen::VectorXd n = axis.normalized();
  return (unit - unit.dot(n) * n).norm();
}

/// sin of the largest principal angle between equal-dimension subspaces with
/// orthonormal bases a and b. Resolution bottoms out near sqrt(epsilon); use
/// max_projection_residual when asserting tighter agreement.
inline double sin_max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b);
  const double c = svd.singularValues().minCoeff();
  return std::sqrt(std::max(0.0, 1.0 - c * c));
}

/// Largest distance of a column of b from the span of the orthonormal basis a.
inline double max_projection_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    worst = std::max(worst, (b.col(c) - a * (a.transpose() * b.col(c))).norm());
  }
  return worst;
}

// ---- random problem generation ----------------------------------------------

inline Eigen::VectorXd random_vector(std::mt19937& rng, Eigen::Index dim, double radius) {
  std::uniform_real_distribution<double> unif(-radius, radius);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = unif(rng);
  return v;
}

struct RandomNetOptions {
  int min_layers = 2;
  int max_layers = 4;
  int max_width = 6;
  bool nonincreasing_dims = false;  // forces a constant-dimension kernel
  bool random_output_metric = false;
  bool allow_identity = true;
};

inline fibertrace::NetworkSpec random_net(std::mt19937& rng,
                                          const RandomNetOptions& opts = {}) {
  std::uniform_int_distribution<int> layer_count(opts.min_layers, opts.max_layers);
  std::uniform_int_distribution<int> width(1, opts.max_width);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n = layer_count(rng);
  std::vector<int> dims(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) dims[static_cast<std::size_t>(i)] = width(rng);
  if (opts.nonincreasing_dims) {
    for (int i = 1; i <= n; ++i) {
      auto& d = dims[static_cast<std::size_t>(i)];
      d = std::min(d, dims[static_cast<std::size_t>(i - 1)]);
    }
  }

  std::vector<fibertrace::SmoothLayer> layers;
  layers.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const int rows = dims[static_cast<std::size_t>(i)];
    const int cols = dims[static_cast<std::size_t>(i - 1)];
    fibertrace::SmoothLayer layer;
    layer.weights.resize(rows, cols);
    const double scale = 0.8 / std::sqrt(static_cast<double>(cols));
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) layer.weights(r, c) = scale * gauss(rng);
    }
    layer.bias.resize(rows);
    for (int r = 0; r < rows; ++r) layer.bias[r] = 0.3 * gauss(rng);

    const int kinds = opts.allow_identity ? 4 : 3;
    switch (std::uniform_int_distribution<int>(0, kinds - 1)(rng)) {
      case 0:
        layer.activation = fibertrace::Activation::Sigmoid;
        break;
      case 1:
        layer.activation = fibertrace::Activation::Softplus;
        break;
      case 2:
        layer.activation = fibertrace::Activation::Tanh;
        break;
      default:
        layer.activation = fibertrace::Activation::Identity;
        break;
    }
    layers.push_back(std::move(layer));
  }

  Eigen::MatrixXd metric;
  if (opts.random_output_metric) {
    const int dn = dims.back();
    Eigen::MatrixXd q(dn, dn);
    for (int r = 0; r < dn; ++r) {
      for (int c = 0; c < dn; ++c) q(r, c) = gauss(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    Eigen::MatrixXd orth = qr.householderQ();
    Eigen::VectorXd eigs(dn);
    std::uniform_real_distribution<double> spread(0.5, 2.0);
    for (int r = 0; r < dn; ++r) eigs[r] = spread(rng);
    metric = orth * eigs.asDiagonal() * orth.transpose();
    metric = 0.5 * (metric + metric.transpose());
  }
  return fibertrace::NetworkSpec(std::move(layers), std::move(metric));
}

inline fibertrace::Polyline random_polyline(std::mt19937& rng, Eigen::Index dim, int segments,
                                            double radius) {
  fibertrace::Polyline poly;
  poly.vertices.reserve(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) {
    poly.vertices.push_back(random_vector(rng, dim, radius));
  }
  return poly;
}

}  // namespace ftest
