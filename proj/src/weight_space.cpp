#include "fibertrace/weight_space.hpp"

#include <string>

#include "fibertrace/error.hpp"

namespace fibertrace {

namespace {

void require_weight_point(const NetworkSpec& net, const WeightPoint& w) {
  const SmoothLayer& first = net.layer(1);
  if (w.weights.rows() != first.out_dim() || w.weights.cols() != first.in_dim() ||
      w.bias.size() != first.out_dim()) {
    fail(ErrorCode::DimensionMismatch,
         "weight point has shape " + std::to_string(w.weights.rows()) + "x" +
             std::to_string(w.weights.cols()) + " + bias " + std::to_string(w.bias.size()) +
             ", first layer is " + std::to_string(first.out_dim()) + "x" +
             std::to_string(first.in_dim()));
  }
}

void require_fixed_input(const NetworkSpec& net, const Eigen::VectorXd& x) {
  if (x.size() != net.dim(0)) {
    fail(ErrorCode::DimensionMismatch,
         "expected an input of dimension " + std::to_string(net.dim(0)) + ", got " +
             std::to_string(x.size()));
  }
}

}  // namespace

Eigen::VectorXd WeightPoint::flatten() const {
  Eigen::VectorXd flat(weights.size() + bias.size());
  Eigen::Index pos = 0;
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      flat[pos++] = weights(r, c);
    }
  }
  flat.tail(bias.size()) = bias;
  return flat;
}

WeightPoint WeightPoint::unflatten(const Eigen::VectorXd& flat, Eigen::Index rows,
                                   Eigen::Index cols) {
  if (flat.size() != rows * (cols + 1)) {
    fail(ErrorCode::DimensionMismatch,
         "flat vector of size " + std::to_string(flat.size()) + " cannot hold a " +
             std::to_string(rows) + "x" + std::to_string(cols) + " layer with bias");
  }
  WeightPoint w;
  w.weights.resize(rows, cols);
  Eigen::Index pos = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      w.weights(r, c) = flat[pos++];
    }
  }
  w.bias = flat.tail(rows);
  return w;
}

WeightPoint first_layer_point(const NetworkSpec& net) {
  const SmoothLayer& first = net.layer(1);
  return WeightPoint{first.weights, first.bias};
}

Eigen::VectorXd first_layer_output(const NetworkSpec& net, const Eigen::VectorXd& x,
                                   const WeightPoint& w) {
  require_fixed_input(net, x);
  require_weight_point(net, w);
  SmoothLayer substituted{w.weights, w.bias, net.layer(1).activation};
  return apply_layer(substituted, x);
}

Eigen::VectorXd weight_forward(const NetworkSpec& net, const Eigen::VectorXd& x,
                               const WeightPoint& w) {
  Eigen::VectorXd value = first_layer_output(net, x, w);
  if (net.num_layers() > 1) {
    value = forward(net, 2, net.num_layers(), value);
  }
  return value;
}

Eigen::MatrixXd weight_jacobian(const NetworkSpec& net, const Eigen::VectorXd& x,
                                const WeightPoint& w) {
  require_fixed_input(net, x);
  require_weight_point(net, w);

  const Eigen::Index d0 = w.weights.cols();
  const Eigen::Index d1 = w.weights.rows();
  const Eigen::VectorXd z = w.weights * x + w.bias;
  const Activation kind = net.layer(1).activation;

  // Sensitivity of the first-layer output to the flattened parameters:
  // row a holds F'(z_a) * x_b in the slots of weight row a and F'(z_a) in the
  // slot of bias a.
  Eigen::MatrixXd first(d1, d1 * (d0 + 1));
  first.setZero();
  for (Eigen::Index a = 0; a < d1; ++a) {
    const double fprime = activate_derivative(kind, z[a]);
    first.block(a, a * d0, 1, d0) = fprime * x.transpose();
    first(a, d1 * d0 + a) = fprime;
  }

  if (net.num_layers() == 1) {
    return first;
  }
  Eigen::VectorXd y1 = z;
  for (Eigen::Index a = 0; a < d1; ++a) {
    y1[a] = activate(kind, z[a]);
  }
  return composite_jacobian(net, 2, net.num_layers(), y1) * first;
}

FiberProblem weight_space_problem(const NetworkSpec& net, const Eigen::VectorXd& x,
                                  double rank_tol) {
  require_fixed_input(net, x);
  const Eigen::Index d0 = net.dim(0);
  const Eigen::Index d1 = net.dim(1);

  FiberProblem problem;
  problem.metric_sqrt = net.output_metric_sqrt();
  problem.rank_tol = rank_tol;
  problem.value = [&net, x, d0, d1](const Eigen::VectorXd& flat) {
    return weight_forward(net, x, WeightPoint::unflatten(flat, d1, d0));
  };
  problem.jacobian = [&net, x, d0, d1](const Eigen::VectorXd& flat) {
    return weight_jacobian(net, x, WeightPoint::unflatten(flat, d1, d0));
  };
  return problem;
}

KernelBasis weight_kernel(const NetworkSpec& net, const Eigen::VectorXd& x,
                          const WeightPoint& w, double tol) {
  require_weight_point(net, w);
  if (tol >= 1.0) {
    fail(ErrorCode::InvalidArgument, "rank tolerance must lie in (0,1)");
  }
  return kernel_basis_at(weight_space_problem(net, x, tol), w.flatten());
}

CurveTrace trace_weight_class(const NetworkSpec& net, const Eigen::VectorXd& x,
                              const WeightPoint& w, const Eigen::VectorXd& coeffs,
                              const TraceConfig& cfg) {
  require_weight_point(net, w);
  TraceConfig resolved = cfg;
  resolved.kernel_coeffs = coeffs;
  return trace_fiber(weight_space_problem(net, x, cfg.rank_tol), w.flatten(), resolved);
}

}  // namespace fibertrace
