#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fibertrace/fiber_problem.hpp"
#include "fibertrace/smooth_net.hpp"

namespace fibertrace {

/// Pullback of the output metric to one of the network's intermediate spaces,
/// evaluated at a point. Symmetric positive semidefinite; generally rank
/// deficient, with rank at most the output dimension.
struct MetricTensor {
  Eigen::VectorXd point;
  Eigen::MatrixXd matrix;  // d x d
  Eigen::Index rank = 0;
  double tol_used = 0.0;
};

/// Piecewise-linear curve, parameterized uniformly on [0,1].
struct Polyline {
  std::vector<Eigen::VectorXd> vertices;  // at least two, equal dimensions
};

/// The map carrying space `at_layer` to the output space, together with the
/// output metric square root. at_layer ranges over 0..n; n yields the
/// identity map on the output space itself.
FiberProblem input_space_problem(const NetworkSpec& net, int at_layer, double rank_tol = 0.0);

/// J^T g J at x, with J the Jacobian of the map from space at_layer to the
/// output space and g the output metric. Rank by singular-value thresholding
/// of S*J at relative tolerance `tol` (<= 0 picks the default).
MetricTensor pullback_metric(const NetworkSpec& net, int at_layer, const Eigen::VectorXd& x,
                             double tol = 0.0);

/// Orthonormal basis of the null space of the pullback metric at x, computed
/// from the SVD of S*J rather than from the metric matrix itself (singular
/// values of S*J are the square roots of the metric eigenvalues, which halves
/// the dynamic range the threshold has to cope with). Explicit tolerances
/// must lie in (0,1).
KernelBasis kernel_basis(const NetworkSpec& net, int at_layer, const Eigen::VectorXd& x,
                         double tol = 0.0);

/// sqrt(max(v^T G v, 0)); the clamp absorbs round-off on null vectors.
double seminorm(const MetricTensor& metric, const Eigen::VectorXd& v);

/// Pseudolength of the polyline under the pullback metric at `at_layer`,
/// midpoint quadrature with quad_points samples per segment. Additive over
/// concatenation and zero on curves tangent to the metric kernel.
double pseudolength(const NetworkSpec& net, int at_layer, const Polyline& curve,
                    int quad_points);

struct DistanceBoundOptions {
  int segments = 16;       // interior vertices of the finest descent polyline
  int descent_iters = 60;  // gradient-descent iterations per refinement level
  double step = 0.25;      // initial descent step, backtracked as needed
  int quad_points = 16;    // quadrature density used for candidate lengths
};

struct DistanceBound {
  double bound = 0.0;
  bool descent_converged = false;
};

/// Upper bound on the pseudodistance between x and y: the smallest
/// pseudolength over a family of explicit polylines from x to y (the straight
/// segment plus energy-descent refinements over a doubling ladder of interior
/// vertex counts up to opts.segments). A bound on the infimum, not the
/// infimum itself. Evaluating with a doubled ladder only adds candidates, so
/// refinement never increases the result.
DistanceBound pseudodistance_upper_bound(const NetworkSpec& net, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y,
                                         const DistanceBoundOptions& opts = {});

}  // namespace fibertrace
