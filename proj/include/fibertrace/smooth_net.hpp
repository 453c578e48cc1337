#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fibertrace/activation.hpp"

namespace fibertrace {

/// One layer map x -> F(A x + b) with F applied componentwise.
struct SmoothLayer {
  Eigen::MatrixXd weights;  // d_i x d_{i-1}
  Eigen::VectorXd bias;     // d_i
  Activation activation = Activation::Identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

Eigen::VectorXd apply_layer(const SmoothLayer& layer, const Eigen::VectorXd& x);

/// d_i x d_{i-1} Jacobian of the layer map at x: diag(F'(Ax+b)) * A.
Eigen::MatrixXd layer_jacobian(const SmoothLayer& layer, const Eigen::VectorXd& x);

/// An immutable chain of smooth layers together with a constant symmetric
/// positive-definite metric on the output space.
///
/// Indexing convention used across the whole library: layers are numbered
/// 1..n and the spaces they connect 0..n, so layer i maps space i-1 to
/// space i. dim(i) is the dimension of space i.
///
/// Instances are immutable after construction and safe to share across
/// threads; every operation on them is a pure function.
class NetworkSpec {
 public:
  NetworkSpec(std::vector<SmoothLayer> layers, Eigen::MatrixXd output_metric);

  /// Euclidean output metric.
  explicit NetworkSpec(std::vector<SmoothLayer> layers);

  int num_layers() const { return static_cast<int>(layers_.size()); }
  Eigen::Index dim(int space) const;
  const SmoothLayer& layer(int index) const;  // index in 1..n
  const std::vector<SmoothLayer>& layers() const { return layers_; }

  const Eigen::MatrixXd& output_metric() const { return output_metric_; }

  /// Symmetric S with S*S = output_metric; identity for the Euclidean case.
  const Eigen::MatrixXd& output_metric_sqrt() const { return output_metric_sqrt_; }

 private:
  std::vector<SmoothLayer> layers_;
  Eigen::MatrixXd output_metric_;
  Eigen::MatrixXd output_metric_sqrt_;
};

/// Applies layers from_layer..to_layer to x (both ends inclusive, 1-based).
Eigen::VectorXd forward(const NetworkSpec& net, int from_layer, int to_layer,
                        const Eigen::VectorXd& x);

/// All intermediate values of the chain: x, then the output of each layer in
/// from_layer..to_layer. Size to_layer - from_layer + 2.
std::vector<Eigen::VectorXd> forward_trajectory(const NetworkSpec& net, int from_layer,
                                                int to_layer, const Eigen::VectorXd& x);

/// Jacobian of the composite map at x, the product of the layer Jacobians
/// evaluated along the forward trajectory.
Eigen::MatrixXd composite_jacobian(const NetworkSpec& net, int from_layer, int to_layer,
                                   const Eigen::VectorXd& x);

/// Central-difference approximation of composite_jacobian with error O(eps^2).
/// Verification oracle only; the analytic path never uses it.
Eigen::MatrixXd finite_diff_jacobian(const NetworkSpec& net, int from_layer, int to_layer,
                                     const Eigen::VectorXd& x, double eps);

struct LayerRankReport {
  int layer = 0;  // 1..n
  Eigen::Index rank = 0;
  Eigen::Index max_rank = 0;  // min(d_i, d_{i-1})
  double smallest_singular_value = 0.0;
  double largest_singular_value = 0.0;
  bool pass = false;
};

/// Singular values of each weight matrix; a layer passes iff its numerical
/// rank at threshold tol * sigma_max equals min(d_i, d_{i-1}).
std::vector<LayerRankReport> check_full_rank(const NetworkSpec& net, double tol);

/// Relative singular-value threshold used for rank decisions when the caller
/// does not override it: ambient_dim * machine_epsilon * 64.
double default_rank_tol(Eigen::Index ambient_dim);

}  // namespace fibertrace
