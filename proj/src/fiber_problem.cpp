#include "fibertrace/fiber_problem.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "fibertrace/error.hpp"
#include "fibertrace/smooth_net.hpp"

namespace fibertrace {

namespace {

double resolved_rank_tol(const FiberProblem& problem, Eigen::Index ambient_dim) {
  return problem.rank_tol > 0.0 ? problem.rank_tol : default_rank_tol(ambient_dim);
}

/// Minimum-norm least-squares solve via SVD with relative rank threshold.
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& mat, const Eigen::VectorXd& rhs,
                           double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rel_tol * sv[0] : 0.0;
  Eigen::VectorXd coeff = svd.matrixU().transpose() * rhs;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    coeff[i] = sv[i] > cutoff && sv[i] > 0.0 ? coeff[i] / sv[i] : 0.0;
  }
  return svd.matrixV() * coeff;
}

struct KernelFrame {
  Eigen::MatrixXd basis;      // d x r, orthonormal
  Eigen::VectorXd direction;  // combined; zero when the combination vanishes
};

Eigen::VectorXd combine(const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs) {
  Eigen::VectorXd dir = basis * coeffs;
  const double norm = dir.norm();
  if (norm > 1e-300) {
    dir /= norm;
  } else {
    dir.setZero();
  }
  return dir;
}

/// Kernel frame at `point`, aligned against the previous frame. Rejects the
/// step when the kernel dimension differs from the frame's.
KernelFrame advance_frame(const FiberProblem& problem, const Eigen::VectorXd& point,
                          const KernelFrame& prev, const Eigen::VectorXd& coeffs) {
  const KernelBasis kb = kernel_basis_at(problem, point);
  if (kb.kernel_dim != prev.basis.cols()) {
    fail(ErrorCode::StepRejected,
         "kernel dimension changed from " + std::to_string(prev.basis.cols()) + " to " +
             std::to_string(kb.kernel_dim) + " along the step");
  }
  KernelFrame frame;
  frame.basis = align_basis(kb.vectors, prev.basis);
  frame.direction = combine(frame.basis, coeffs);
  return frame;
}

}  // namespace

double FiberProblem::codomain_norm(const Eigen::VectorXd& v) const {
  return (metric_sqrt * v).norm();
}

KernelBasis kernel_basis_at(const FiberProblem& problem, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd jac = problem.jacobian(x);
  const Eigen::MatrixXd scaled = problem.metric_sqrt * jac;
  const double tol = resolved_rank_tol(problem, scaled.cols());

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? tol * sv[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff && sv[i] > 0.0) ++rank;
  }

  KernelBasis basis;
  basis.point = x;
  basis.rank = rank;
  basis.kernel_dim = scaled.cols() - rank;
  basis.singular_values = sv;
  basis.tol_used = tol;
  basis.vectors = svd.matrixV().rightCols(basis.kernel_dim);
  for (Eigen::Index c = 0; c < basis.vectors.cols(); ++c) {
    for (Eigen::Index r = 0; r < basis.vectors.rows(); ++r) {
      const double entry = basis.vectors(r, c);
      if (std::abs(entry) > 1e-12) {
        if (entry < 0.0) basis.vectors.col(c) *= -1.0;
        break;
      }
    }
  }
  return basis;
}

Eigen::MatrixXd align_basis(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& reference) {
  if (basis.cols() == 0) {
    return basis;
  }
  if (basis.cols() == 1) {
    return basis.col(0).dot(reference.col(0)) < 0.0 ? Eigen::MatrixXd(-basis) : basis;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.transpose() * reference,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  return basis * (svd.matrixU() * svd.matrixV().transpose());
}

ProjectionResult project_to_fiber(const FiberProblem& problem, Eigen::VectorXd x,
                                  const Eigen::VectorXd& target, double tol, int max_iters) {
  if (!(tol > 0.0)) {
    fail(ErrorCode::InvalidArgument, "projection tolerance must be positive");
  }
  const double rel_tol = resolved_rank_tol(problem, x.size());

  Eigen::VectorXd residual = problem.value(x) - target;
  double res_norm = problem.codomain_norm(residual);

  ProjectionResult best;
  best.point = x;
  best.residual = res_norm;

  int iter = 0;
  while (res_norm > tol && iter < max_iters) {
    const Eigen::VectorXd step = pinv_solve(problem.jacobian(x), residual, rel_tol);
    if (step.norm() < 1e-300) {
      break;  // residual orthogonal to the range; no progress possible
    }
    double alpha = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 30; ++bt) {
      const Eigen::VectorXd candidate = x - alpha * step;
      const Eigen::VectorXd cand_residual = problem.value(candidate) - target;
      const double cand_norm = problem.codomain_norm(cand_residual);
      if (cand_norm < res_norm) {
        x = candidate;
        residual = cand_residual;
        res_norm = cand_norm;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    ++iter;
    if (res_norm < best.residual) {
      best.point = x;
      best.residual = res_norm;
    }
    if (!improved) {
      break;
    }
  }

  best.iterations = iter;
  best.converged = best.residual <= tol;
  return best;
}

double CurveTrace::max_drift() const {
  double worst = 0.0;
  for (double d : drift) worst = std::max(worst, d);
  return worst;
}

double polyline_pseudolength(const FiberProblem& problem,
                             const std::vector<Eigen::VectorXd>& vertices, int quad_points) {
  if (quad_points < 1) {
    fail(ErrorCode::InvalidArgument, "quadrature needs at least one sample per segment");
  }
  if (vertices.size() < 2) {
    fail(ErrorCode::EmptyCurve, "a polyline needs at least two vertices");
  }
  // The uniform parameterization cancels out of the midpoint rule: each
  // segment contributes the mean of ||S J delta|| over its sample points.
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < vertices.size(); ++s) {
    const Eigen::VectorXd& a = vertices[s];
    const Eigen::VectorXd& b = vertices[s + 1];
    if (a.size() != b.size()) {
      fail(ErrorCode::DimensionMismatch, "polyline vertices have mixed dimensions");
    }
    const Eigen::VectorXd delta = b - a;
    double segment = 0.0;
    for (int q = 0; q < quad_points; ++q) {
      const double t = (q + 0.5) / quad_points;
      const Eigen::VectorXd mid = a + t * delta;
      segment += problem.codomain_norm(problem.jacobian(mid) * delta);
    }
    total += segment / quad_points;
  }
  return total;
}

CurveTrace trace_fiber(const FiberProblem& problem, const Eigen::VectorXd& start,
                       const TraceConfig& cfg) {
  if (!(cfg.step_size > 0.0)) {
    fail(ErrorCode::InvalidArgument, "step size must be positive");
  }
  if (!(cfg.corrector_tol > 0.0)) {
    fail(ErrorCode::InvalidArgument, "corrector tolerance must be positive");
  }

  const Eigen::VectorXd target = problem.value(start);

  CurveTrace trace;
  trace.vertices.push_back(start);
  trace.outputs.push_back(target);
  trace.drift.push_back(0.0);
  if (cfg.n_steps == 0) {
    return trace;
  }

  const KernelBasis seed_kernel = kernel_basis_at(problem, start);
  if (seed_kernel.kernel_dim == 0) {
    fail(ErrorCode::EmptyKernel, "the metric kernel at the start point is trivial");
  }
  if (seed_kernel.kernel_dim > 1 && !cfg.kernel_coeffs) {
    fail(ErrorCode::AmbiguousDirection,
         "kernel dimension is " + std::to_string(seed_kernel.kernel_dim) +
             "; a coefficient vector is required");
  }
  Eigen::VectorXd coeffs = cfg.kernel_coeffs ? *cfg.kernel_coeffs
                                             : Eigen::VectorXd::Ones(1);
  if (coeffs.size() != seed_kernel.kernel_dim) {
    fail(ErrorCode::DimensionMismatch,
         "coefficient vector has dimension " + std::to_string(coeffs.size()) +
             ", kernel has dimension " + std::to_string(seed_kernel.kernel_dim));
  }

  KernelFrame frame;
  frame.basis = seed_kernel.vectors;
  frame.direction = combine(frame.basis, coeffs);
  if (cfg.seed_direction && cfg.seed_direction->size() == start.size() &&
      frame.direction.dot(*cfg.seed_direction) < 0.0) {
    frame.basis *= -1.0;
    frame.direction *= -1.0;
  }

  const double h = cfg.n_steps < 0 ? -cfg.step_size : cfg.step_size;
  const int steps = std::abs(cfg.n_steps);

  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd& x0 = trace.vertices.back();
    Eigen::VectorXd predicted;
    KernelFrame next_frame;
    try {
      const Eigen::VectorXd v1 = advance_frame(problem, x0, frame, coeffs).direction;
      const Eigen::VectorXd v2 =
          advance_frame(problem, x0 + 0.5 * h * v1, frame, coeffs).direction;
      const Eigen::VectorXd v3 =
          advance_frame(problem, x0 + 0.5 * h * v2, frame, coeffs).direction;
      const Eigen::VectorXd v4 = advance_frame(problem, x0 + h * v3, frame, coeffs).direction;
      predicted = x0 + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
    } catch (const Error& e) {
      trace.status = TraceStatus::StepRejected;
      trace.stop_reason = e.what();
      break;
    }

    const ProjectionResult corrected =
        project_to_fiber(problem, predicted, target, cfg.corrector_tol,
                         cfg.corrector_max_iters);
    trace.corrector_iterations += corrected.iterations;
    if (!corrected.converged) {
      trace.status = TraceStatus::CorrectorStalled;
      trace.stop_reason = "corrector residual " + std::to_string(corrected.residual) +
                          " above tolerance after " + std::to_string(corrected.iterations) +
                          " iterations";
      break;
    }

    try {
      next_frame = advance_frame(problem, corrected.point, frame, coeffs);
    } catch (const Error& e) {
      trace.status = TraceStatus::StepRejected;
      trace.stop_reason = e.what();
      break;
    }

    frame = next_frame;
    trace.vertices.push_back(corrected.point);
    trace.outputs.push_back(problem.value(corrected.point));
    trace.drift.push_back(problem.codomain_norm(trace.outputs.back() - target));
  }

  if (trace.vertices.size() >= 2) {
    trace.pseudolength_estimate = polyline_pseudolength(problem, trace.vertices, 4);
  }
  return trace;
}

}  // namespace fibertrace
