#include "fibertrace/pullback.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "fibertrace/error.hpp"

namespace fibertrace {

namespace {

void require_space_point(const NetworkSpec& net, int at_layer, const Eigen::VectorXd& x) {
  if (at_layer < 0 || at_layer > net.num_layers()) {
    fail(ErrorCode::InvalidRange, "space index " + std::to_string(at_layer) +
                                      " outside 0.." + std::to_string(net.num_layers()));
  }
  if (x.size() != net.dim(at_layer)) {
    fail(ErrorCode::DimensionMismatch,
         "expected a vector of dimension " + std::to_string(net.dim(at_layer)) +
             " for space " + std::to_string(at_layer) + ", got " + std::to_string(x.size()));
  }
}

double validated_tol(double tol, Eigen::Index ambient_dim) {
  if (tol <= 0.0) {
    return default_rank_tol(ambient_dim);
  }
  if (tol >= 1.0) {
    fail(ErrorCode::InvalidArgument, "rank tolerance must lie in (0,1)");
  }
  return tol;
}

}  // namespace

FiberProblem input_space_problem(const NetworkSpec& net, int at_layer, double rank_tol) {
  if (at_layer < 0 || at_layer > net.num_layers()) {
    fail(ErrorCode::InvalidRange, "space index " + std::to_string(at_layer) +
                                      " outside 0.." + std::to_string(net.num_layers()));
  }
  const int n = net.num_layers();
  FiberProblem problem;
  problem.metric_sqrt = net.output_metric_sqrt();
  problem.rank_tol = rank_tol;
  if (at_layer == n) {
    // The output space itself: the identity map.
    const Eigen::Index dn = net.dim(n);
    problem.value = [](const Eigen::VectorXd& x) { return x; };
    problem.jacobian = [dn](const Eigen::VectorXd&) {
      return Eigen::MatrixXd::Identity(dn, dn).eval();
    };
  } else {
    problem.value = [&net, at_layer, n](const Eigen::VectorXd& x) {
      return forward(net, at_layer + 1, n, x);
    };
    problem.jacobian = [&net, at_layer, n](const Eigen::VectorXd& x) {
      return composite_jacobian(net, at_layer + 1, n, x);
    };
  }
  return problem;
}

MetricTensor pullback_metric(const NetworkSpec& net, int at_layer, const Eigen::VectorXd& x,
                             double tol) {
  require_space_point(net, at_layer, x);
  const double rank_tol = validated_tol(tol, x.size());
  const FiberProblem problem = input_space_problem(net, at_layer, rank_tol);

  const Eigen::MatrixXd scaled = problem.metric_sqrt * problem.jacobian(x);

  MetricTensor metric;
  metric.point = x;
  metric.matrix = scaled.transpose() * scaled;
  metric.matrix = 0.5 * (metric.matrix + metric.matrix.transpose());
  metric.tol_used = rank_tol;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rank_tol * sv[0] : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff && sv[i] > 0.0) ++metric.rank;
  }
  return metric;
}

KernelBasis kernel_basis(const NetworkSpec& net, int at_layer, const Eigen::VectorXd& x,
                         double tol) {
  require_space_point(net, at_layer, x);
  const double rank_tol = validated_tol(tol, x.size());
  return kernel_basis_at(input_space_problem(net, at_layer, rank_tol), x);
}

double seminorm(const MetricTensor& metric, const Eigen::VectorXd& v) {
  if (v.size() != metric.matrix.rows()) {
    fail(ErrorCode::DimensionMismatch,
         "vector dimension " + std::to_string(v.size()) + " does not match the metric (" +
             std::to_string(metric.matrix.rows()) + ")");
  }
  return std::sqrt(std::max(v.dot(metric.matrix * v), 0.0));
}

double pseudolength(const NetworkSpec& net, int at_layer, const Polyline& curve,
                    int quad_points) {
  if (curve.vertices.size() < 2) {
    fail(ErrorCode::EmptyCurve, "a polyline needs at least two vertices");
  }
  require_space_point(net, at_layer, curve.vertices.front());
  return polyline_pseudolength(input_space_problem(net, at_layer, 0.0), curve.vertices,
                               quad_points);
}

namespace {

/// Pseudolength of the polyline x -> interior -> y with the given interior
/// vertices stacked in one flat vector.
double chain_length(const FiberProblem& problem, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const Eigen::VectorXd& interior_flat,
                    int quad_points) {
  const Eigen::Index d = x.size();
  const Eigen::Index m = interior_flat.size() / d;
  std::vector<Eigen::VectorXd> vertices;
  vertices.reserve(static_cast<std::size_t>(m) + 2);
  vertices.push_back(x);
  for (Eigen::Index i = 0; i < m; ++i) {
    vertices.push_back(interior_flat.segment(i * d, d));
  }
  vertices.push_back(y);
  return polyline_pseudolength(problem, vertices, quad_points);
}

/// Gradient of the frozen-metric discrete energy with respect to the interior
/// vertices: metric matrices are evaluated at segment midpoints and held
/// fixed, which drops the metric-derivative term. Used only as a descent
/// direction; acceptance is decided on the true pseudolength.
Eigen::VectorXd frozen_energy_gradient(const FiberProblem& problem, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& interior_flat) {
  const Eigen::Index d = x.size();
  const Eigen::Index m = interior_flat.size() / d;
  std::vector<Eigen::VectorXd> vertices;
  vertices.reserve(static_cast<std::size_t>(m) + 2);
  vertices.push_back(x);
  for (Eigen::Index i = 0; i < m; ++i) {
    vertices.push_back(interior_flat.segment(i * d, d));
  }
  vertices.push_back(y);

  std::vector<Eigen::MatrixXd> metrics;
  metrics.reserve(vertices.size() - 1);
  for (std::size_t s = 0; s + 1 < vertices.size(); ++s) {
    const Eigen::VectorXd mid = 0.5 * (vertices[s] + vertices[s + 1]);
    const Eigen::MatrixXd scaled = problem.metric_sqrt * problem.jacobian(mid);
    metrics.push_back(scaled.transpose() * scaled);
  }

  Eigen::VectorXd grad(interior_flat.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t v = static_cast<std::size_t>(i) + 1;
    const Eigen::VectorXd to_prev = vertices[v] - vertices[v - 1];
    const Eigen::VectorXd to_next = vertices[v + 1] - vertices[v];
    grad.segment(i * d, d) = 2.0 * (metrics[v - 1] * to_prev - metrics[v] * to_next);
  }
  return grad;
}

struct DescentOutcome {
  double length = 0.0;
  bool converged = false;
};

DescentOutcome descend_polyline(const FiberProblem& problem, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y, int interior, int iters,
                                double step, int quad_points) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd flat(static_cast<Eigen::Index>(interior) * d);
  for (int i = 0; i < interior; ++i) {
    const double t = static_cast<double>(i + 1) / (interior + 1);
    flat.segment(static_cast<Eigen::Index>(i) * d, d) = x + t * (y - x);
  }

  double length = chain_length(problem, x, y, flat, quad_points);
  bool stationary = false;
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd grad = frozen_energy_gradient(problem, x, y, flat);
    const double gnorm = grad.norm();
    if (gnorm < 1e-14 * (1.0 + length)) {
      stationary = true;
      break;
    }
    double alpha = step / gnorm;
    bool improved = false;
    for (int bt = 0; bt < 20; ++bt) {
      const Eigen::VectorXd candidate = flat - alpha * grad;
      const double cand_length = chain_length(problem, x, y, candidate, quad_points);
      if (cand_length < length) {
        flat = candidate;
        length = cand_length;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) {
      stationary = true;  // no descent direction left at this resolution
      break;
    }
  }
  return {length, stationary};
}

}  // namespace

DistanceBound pseudodistance_upper_bound(const NetworkSpec& net, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& y,
                                         const DistanceBoundOptions& opts) {
  require_space_point(net, 0, x);
  require_space_point(net, 0, y);
  if (opts.segments < 0 || opts.descent_iters < 0) {
    fail(ErrorCode::InvalidArgument, "segments and descent iterations must be >= 0");
  }

  const FiberProblem problem = input_space_problem(net, 0, 0.0);

  if ((x - y).norm() == 0.0) {
    return {0.0, true};
  }

  // Straight segment, evaluated at a fixed total sample count so the
  // candidate does not depend on opts.segments.
  std::vector<Eigen::VectorXd> straight{x, y};
  double bound = polyline_pseudolength(problem, straight, 256);
  bool converged = true;

  // Doubling ladder of interior vertex counts; each level is a deterministic
  // candidate of its own, so enlarging the ladder can only lower the minimum.
  for (int interior = 1; interior <= opts.segments; interior *= 2) {
    const DescentOutcome outcome = descend_polyline(problem, x, y, interior,
                                                    opts.descent_iters, opts.step,
                                                    opts.quad_points);
    bound = std::min(bound, outcome.length);
    converged = converged && outcome.converged;
  }
  return {std::max(bound, 0.0), converged};
}

}  // namespace fibertrace
