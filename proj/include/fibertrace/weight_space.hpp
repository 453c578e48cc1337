#pragma once

#include <Eigen/Dense>

#include "fibertrace/fiber_problem.hpp"
#include "fibertrace/smooth_net.hpp"

namespace fibertrace {

/// A point in the space of first-layer parameters: the weight matrix and the
/// bias vector, with a fixed flattening (weights row-major, then the bias) so
/// the space can be treated as plain R^{d1*(d0+1)}.
struct WeightPoint {
  Eigen::MatrixXd weights;  // d1 x d0
  Eigen::VectorXd bias;     // d1

  Eigen::VectorXd flatten() const;
  static WeightPoint unflatten(const Eigen::VectorXd& flat, Eigen::Index rows,
                               Eigen::Index cols);
};

WeightPoint first_layer_point(const NetworkSpec& net);

/// Output of layer 1 at x with the layer's parameters replaced by w.
Eigen::VectorXd first_layer_output(const NetworkSpec& net, const Eigen::VectorXd& x,
                                   const WeightPoint& w);

/// Full network output at the fixed input x with the first-layer parameters
/// replaced by w; layers 2..n keep the network's own parameters.
Eigen::VectorXd weight_forward(const NetworkSpec& net, const Eigen::VectorXd& x,
                               const WeightPoint& w);

/// Jacobian of the network output with respect to the flattened first-layer
/// parameters at fixed x: the sensitivity of the pre-activation to A_{ab} is
/// x_b and to b_a is 1, scaled by the activation derivative and chained
/// through the remaining layers. Shape d_n x (d1*(d0+1)).
Eigen::MatrixXd weight_jacobian(const NetworkSpec& net, const Eigen::VectorXd& x,
                                const WeightPoint& w);

/// The first layer as a map from flattened parameter space to the output
/// space, at fixed input x.
FiberProblem weight_space_problem(const NetworkSpec& net, const Eigen::VectorXd& x,
                                  double rank_tol = 0.0);

/// Orthonormal basis of the null space of weight_jacobian at w: directions in
/// parameter space that leave the network output at x unchanged to first
/// order. Works at every x, including inputs with zero components.
KernelBasis weight_kernel(const NetworkSpec& net, const Eigen::VectorXd& x,
                          const WeightPoint& w, double tol = 0.0);

/// Null-curve trace through w in first-layer parameter space: the traced
/// parameters keep the network output at x fixed to within cfg.corrector_tol.
/// `coeffs` combines the kernel basis columns and may be zero, which yields a
/// stationary trace.
CurveTrace trace_weight_class(const NetworkSpec& net, const Eigen::VectorXd& x,
                              const WeightPoint& w, const Eigen::VectorXd& coeffs,
                              const TraceConfig& cfg);

}  // namespace fibertrace
