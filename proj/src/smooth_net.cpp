#include "fibertrace/smooth_net.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "fibertrace/error.hpp"

namespace fibertrace {

namespace {

void require_layer_input(const SmoothLayer& layer, const Eigen::VectorXd& x) {
  if (x.size() != layer.in_dim()) {
    fail(ErrorCode::DimensionMismatch,
         "layer expects input of dimension " + std::to_string(layer.in_dim()) + ", got " +
             std::to_string(x.size()));
  }
}

void require_range(const NetworkSpec& net, int from_layer, int to_layer) {
  const int n = net.num_layers();
  if (from_layer < 1 || to_layer > n || from_layer > to_layer) {
    fail(ErrorCode::InvalidRange, "layer range " + std::to_string(from_layer) + ".." +
                                      std::to_string(to_layer) + " invalid for a " +
                                      std::to_string(n) + "-layer network");
  }
}

void require_input(const NetworkSpec& net, int from_layer, const Eigen::VectorXd& x) {
  if (x.size() != net.dim(from_layer - 1)) {
    fail(ErrorCode::DimensionMismatch,
         "expected a vector of dimension " + std::to_string(net.dim(from_layer - 1)) +
             " for space " + std::to_string(from_layer - 1) + ", got " +
             std::to_string(x.size()));
  }
}

}  // namespace

Eigen::VectorXd apply_layer(const SmoothLayer& layer, const Eigen::VectorXd& x) {
  require_layer_input(layer, x);
  Eigen::VectorXd z = layer.weights * x + layer.bias;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = activate(layer.activation, z[i]);
  }
  return z;
}

Eigen::MatrixXd layer_jacobian(const SmoothLayer& layer, const Eigen::VectorXd& x) {
  require_layer_input(layer, x);
  const Eigen::VectorXd z = layer.weights * x + layer.bias;
  Eigen::MatrixXd jac = layer.weights;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    jac.row(i) *= activate_derivative(layer.activation, z[i]);
  }
  return jac;
}

NetworkSpec::NetworkSpec(std::vector<SmoothLayer> layers, Eigen::MatrixXd output_metric)
    : layers_(std::move(layers)), output_metric_(std::move(output_metric)) {
  if (layers_.empty()) {
    fail(ErrorCode::InvalidArgument, "a network needs at least one layer");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const SmoothLayer& layer = layers_[i];
    if (layer.weights.size() == 0) {
      fail(ErrorCode::InvalidArgument, "layer " + std::to_string(i + 1) + " has empty weights");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      fail(ErrorCode::InvalidArgument,
           "layer " + std::to_string(i + 1) + " contains NaN or Inf entries");
    }
    if (layer.bias.size() != layer.out_dim()) {
      fail(ErrorCode::DimensionMismatch,
           "layer " + std::to_string(i + 1) + ": bias has dimension " +
               std::to_string(layer.bias.size()) + ", weights have " +
               std::to_string(layer.out_dim()) + " rows");
    }
    if (i > 0 && layer.in_dim() != layers_[i - 1].out_dim()) {
      fail(ErrorCode::DimensionMismatch,
           "layer " + std::to_string(i + 1) + " expects input dimension " +
               std::to_string(layer.in_dim()) + " but layer " + std::to_string(i) +
               " outputs " + std::to_string(layers_[i - 1].out_dim()));
    }
  }

  const Eigen::Index dn = layers_.back().out_dim();
  if (output_metric_.size() == 0) {
    output_metric_ = Eigen::MatrixXd::Identity(dn, dn);
  }
  if (output_metric_.rows() != dn || output_metric_.cols() != dn) {
    fail(ErrorCode::DimensionMismatch,
         "output metric must be " + std::to_string(dn) + "x" + std::to_string(dn));
  }
  if (!output_metric_.allFinite()) {
    fail(ErrorCode::NonSpdMetric, "output metric contains NaN or Inf entries");
  }
  const double asym = (output_metric_ - output_metric_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) {
    fail(ErrorCode::NonSpdMetric, "output metric is not symmetric (max asymmetry " +
                                      std::to_string(asym) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(output_metric_);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    fail(ErrorCode::NonSpdMetric, "output metric must have strictly positive eigenvalues");
  }
  output_metric_sqrt_ = eig.eigenvectors() *
                        eig.eigenvalues().cwiseSqrt().asDiagonal() *
                        eig.eigenvectors().transpose();
}

NetworkSpec::NetworkSpec(std::vector<SmoothLayer> layers)
    : NetworkSpec(std::move(layers), Eigen::MatrixXd()) {}

Eigen::Index NetworkSpec::dim(int space) const {
  if (space < 0 || space > num_layers()) {
    fail(ErrorCode::InvalidRange, "space index " + std::to_string(space) +
                                      " outside 0.." + std::to_string(num_layers()));
  }
  return space == 0 ? layers_.front().in_dim() : layers_[space - 1].out_dim();
}

const SmoothLayer& NetworkSpec::layer(int index) const {
  if (index < 1 || index > num_layers()) {
    fail(ErrorCode::InvalidRange, "layer index " + std::to_string(index) +
                                      " outside 1.." + std::to_string(num_layers()));
  }
  return layers_[static_cast<std::size_t>(index - 1)];
}

Eigen::VectorXd forward(const NetworkSpec& net, int from_layer, int to_layer,
                        const Eigen::VectorXd& x) {
  require_range(net, from_layer, to_layer);
  require_input(net, from_layer, x);
  Eigen::VectorXd value = x;
  for (int k = from_layer; k <= to_layer; ++k) {
    value = apply_layer(net.layer(k), value);
  }
  return value;
}

std::vector<Eigen::VectorXd> forward_trajectory(const NetworkSpec& net, int from_layer,
                                                int to_layer, const Eigen::VectorXd& x) {
  require_range(net, from_layer, to_layer);
  require_input(net, from_layer, x);
  std::vector<Eigen::VectorXd> values;
  values.reserve(static_cast<std::size_t>(to_layer - from_layer + 2));
  values.push_back(x);
  for (int k = from_layer; k <= to_layer; ++k) {
    values.push_back(apply_layer(net.layer(k), values.back()));
  }
  return values;
}

Eigen::MatrixXd composite_jacobian(const NetworkSpec& net, int from_layer, int to_layer,
                                   const Eigen::VectorXd& x) {
  require_range(net, from_layer, to_layer);
  require_input(net, from_layer, x);
  Eigen::MatrixXd jac = layer_jacobian(net.layer(from_layer), x);
  Eigen::VectorXd value = apply_layer(net.layer(from_layer), x);
  for (int k = from_layer + 1; k <= to_layer; ++k) {
    jac = layer_jacobian(net.layer(k), value) * jac;
    value = apply_layer(net.layer(k), value);
  }
  return jac;
}

Eigen::MatrixXd finite_diff_jacobian(const NetworkSpec& net, int from_layer, int to_layer,
                                     const Eigen::VectorXd& x, double eps) {
  if (!(eps > 0.0)) {
    fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  }
  require_range(net, from_layer, to_layer);
  require_input(net, from_layer, x);
  const Eigen::Index rows = net.dim(to_layer);
  const Eigen::Index cols = x.size();
  Eigen::MatrixXd jac(rows, cols);
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < cols; ++j) {
    probe[j] = x[j] + eps;
    const Eigen::VectorXd hi = forward(net, from_layer, to_layer, probe);
    probe[j] = x[j] - eps;
    const Eigen::VectorXd lo = forward(net, from_layer, to_layer, probe);
    probe[j] = x[j];
    jac.col(j) = (hi - lo) / (2.0 * eps);
  }
  return jac;
}

std::vector<LayerRankReport> check_full_rank(const NetworkSpec& net, double tol) {
  if (tol < 0.0) {
    fail(ErrorCode::InvalidArgument, "rank tolerance must be non-negative");
  }
  std::vector<LayerRankReport> reports;
  reports.reserve(static_cast<std::size_t>(net.num_layers()));
  for (int k = 1; k <= net.num_layers(); ++k) {
    const SmoothLayer& layer = net.layer(k);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(layer.weights);
    const Eigen::VectorXd& sv = svd.singularValues();
    LayerRankReport report;
    report.layer = k;
    report.max_rank = std::min(layer.out_dim(), layer.in_dim());
    report.largest_singular_value = sv.size() > 0 ? sv[0] : 0.0;
    report.smallest_singular_value = sv.size() > 0 ? sv[sv.size() - 1] : 0.0;
    const double threshold = tol * report.largest_singular_value;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv[i] > threshold && sv[i] > 0.0) ++rank;
    }
    report.rank = rank;
    report.pass = (rank == report.max_rank);
    reports.push_back(report);
  }
  return reports;
}

double default_rank_tol(Eigen::Index ambient_dim) {
  return static_cast<double>(ambient_dim) * std::numeric_limits<double>::epsilon() * 64.0;
}

}  // namespace fibertrace
