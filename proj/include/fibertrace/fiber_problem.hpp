#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fibertrace {

/// A smooth map R^d -> R^m together with the symmetric square root of the
/// constant SPD metric on the codomain. All kernel extraction, null-curve
/// integration and fiber projection operates on this view; the input-space
/// and weight-space front ends both reduce to it.
struct FiberProblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  Eigen::MatrixXd metric_sqrt;  // m x m symmetric
  double rank_tol = 0.0;        // <= 0 means default_rank_tol(d)

  /// || metric_sqrt * v ||, the metric norm on the codomain.
  double codomain_norm(const Eigen::VectorXd& v) const;
};

/// Orthonormal basis of the null space of the pulled-back metric at a point,
/// i.e. of S*J where S is the codomain metric square root and J the Jacobian.
struct KernelBasis {
  Eigen::VectorXd point;
  Eigen::MatrixXd vectors;          // d x r, orthonormal columns
  Eigen::Index kernel_dim = 0;      // r
  Eigen::Index rank = 0;            // d - r
  Eigen::VectorXd singular_values;  // of S*J, descending
  double tol_used = 0.0;
};

/// Basis columns are sign-fixed deterministically (first component larger than
/// 1e-12 in magnitude made positive).
KernelBasis kernel_basis_at(const FiberProblem& problem, const Eigen::VectorXd& x);

/// Procrustes-aligns the columns of `basis` to `reference` (both orthonormal,
/// same shape); reduces to a sign flip for a single column.
Eigen::MatrixXd align_basis(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& reference);

struct ProjectionResult {
  Eigen::VectorXd point;
  double residual = 0.0;  // metric norm of value(point) - target
  int iterations = 0;
  bool converged = false;
};

/// Gauss-Newton refinement of x toward the fiber value(x) = target, using
/// minimum-norm pseudoinverse steps (orthogonal to the metric kernel) with
/// backtracking. Never throws on stagnation: the best iterate is returned
/// with converged = false.
ProjectionResult project_to_fiber(const FiberProblem& problem, Eigen::VectorXd x,
                                  const Eigen::VectorXd& target, double tol, int max_iters);

struct TraceConfig {
  double step_size = 0.01;
  int n_steps = 0;  // sign selects the direction along the null field
  double corrector_tol = 1e-8;
  int corrector_max_iters = 40;
  std::optional<Eigen::VectorXd> seed_direction;
  std::optional<Eigen::VectorXd> kernel_coeffs;  // required when kernel_dim > 1
  double rank_tol = 0.0;                         // <= 0 means default
};

enum class TraceStatus {
  Completed,
  StepRejected,      // kernel dimension changed along the way
  CorrectorStalled,  // projection could not reach corrector_tol
};

/// Polyline produced by null-curve integration. Every vertex carries the map
/// value at that vertex and its drift, the metric-norm distance of that value
/// from the value at the start vertex. Vertices are only appended once the
/// corrector has certified drift <= corrector_tol.
struct CurveTrace {
  std::vector<Eigen::VectorXd> vertices;
  std::vector<Eigen::VectorXd> outputs;
  std::vector<double> drift;
  double pseudolength_estimate = 0.0;
  TraceStatus status = TraceStatus::Completed;
  std::string stop_reason;        // empty when Completed
  long corrector_iterations = 0;  // summed over all steps

  double max_drift() const;
};

/// Predictor-corrector integration of the null field from `start`:
/// |n_steps| fixed RK4 steps of size +-step_size, each followed by a
/// Gauss-Newton projection back onto the fiber of the start value.
///
/// Throws EmptyKernel when the kernel at `start` is trivial and
/// AmbiguousDirection when it has dimension > 1 and no kernel_coeffs are
/// given. Kernel-dimension changes and corrector stalls end the trace early
/// with the partial result and a non-Completed status.
CurveTrace trace_fiber(const FiberProblem& problem, const Eigen::VectorXd& start,
                       const TraceConfig& cfg);

/// Pseudolength of the polyline through `vertices` under the pulled-back
/// metric, midpoint quadrature with quad_points samples per segment.
double polyline_pseudolength(const FiberProblem& problem,
                             const std::vector<Eigen::VectorXd>& vertices, int quad_points);

}  // namespace fibertrace
