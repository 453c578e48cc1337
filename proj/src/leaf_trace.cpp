#include "fibertrace/leaf_trace.hpp"

#include <cmath>
#include <string>

#include "fibertrace/error.hpp"

namespace fibertrace {

namespace {

void require_input_point(const NetworkSpec& net, const Eigen::VectorXd& x) {
  if (x.size() != net.dim(0)) {
    fail(ErrorCode::DimensionMismatch,
         "expected an input of dimension " + std::to_string(net.dim(0)) + ", got " +
             std::to_string(x.size()));
  }
}

Eigen::VectorXd combined_direction(const KernelBasis& kernel,
                                   const std::optional<Eigen::VectorXd>& prev,
                                   const std::optional<Eigen::VectorXd>& coeffs) {
  if (kernel.kernel_dim == 0) {
    fail(ErrorCode::EmptyKernel, "the metric kernel at this point is trivial");
  }
  Eigen::VectorXd dir;
  if (kernel.kernel_dim == 1) {
    dir = kernel.vectors.col(0);
    if (coeffs && coeffs->size() == 1 && (*coeffs)[0] < 0.0) {
      dir = -dir;
    }
  } else {
    if (!coeffs) {
      fail(ErrorCode::AmbiguousDirection,
           "kernel dimension is " + std::to_string(kernel.kernel_dim) +
               "; a coefficient vector is required");
    }
    if (coeffs->size() != kernel.kernel_dim) {
      fail(ErrorCode::DimensionMismatch,
           "coefficient vector has dimension " + std::to_string(coeffs->size()) +
               ", kernel has dimension " + std::to_string(kernel.kernel_dim));
    }
    dir = kernel.vectors * (*coeffs);
    const double norm = dir.norm();
    if (norm < 1e-300) {
      fail(ErrorCode::InvalidArgument, "kernel combination is the zero vector");
    }
    dir /= norm;
  }
  if (prev && prev->size() == dir.size() && dir.dot(*prev) < 0.0) {
    dir = -dir;
  }
  return dir;
}

}  // namespace

Eigen::VectorXd null_direction(const NetworkSpec& net, const Eigen::VectorXd& x,
                               const std::optional<Eigen::VectorXd>& prev,
                               const std::optional<Eigen::VectorXd>& coeffs) {
  require_input_point(net, x);
  const FiberProblem problem = input_space_problem(net, 0);
  return combined_direction(kernel_basis_at(problem, x), prev, coeffs);
}

Eigen::VectorXd rk4_null_step(const NetworkSpec& net, const Eigen::VectorXd& x, double h,
                              const Eigen::VectorXd& prev,
                              const std::optional<Eigen::VectorXd>& coeffs) {
  require_input_point(net, x);
  const FiberProblem problem = input_space_problem(net, 0);

  const KernelBasis at_start = kernel_basis_at(problem, x);
  const Eigen::Index r = at_start.kernel_dim;
  const std::optional<Eigen::VectorXd> prev_opt(prev);

  auto stage = [&](const Eigen::VectorXd& point) {
    const KernelBasis kernel = kernel_basis_at(problem, point);
    if (kernel.kernel_dim != r) {
      fail(ErrorCode::StepRejected,
           "kernel dimension changed from " + std::to_string(r) + " to " +
               std::to_string(kernel.kernel_dim) + " within the step");
    }
    return combined_direction(kernel, prev_opt, coeffs);
  };

  const Eigen::VectorXd v1 = stage(x);
  const Eigen::VectorXd v2 = stage(x + 0.5 * h * v1);
  const Eigen::VectorXd v3 = stage(x + 0.5 * h * v2);
  const Eigen::VectorXd v4 = stage(x + h * v3);
  return x + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
}

ProjectionResult project_to_fiber(const NetworkSpec& net, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& target, double tol, int max_iters) {
  require_input_point(net, x);
  if (target.size() != net.dim(net.num_layers())) {
    fail(ErrorCode::DimensionMismatch,
         "target must live in the output space of dimension " +
             std::to_string(net.dim(net.num_layers())));
  }
  return project_to_fiber(input_space_problem(net, 0), x, target, tol, max_iters);
}

CurveTrace trace_leaf(const NetworkSpec& net, const Eigen::VectorXd& p, const TraceConfig& cfg) {
  require_input_point(net, p);
  return trace_fiber(input_space_problem(net, 0, cfg.rank_tol), p, cfg);
}

FiberCertificate same_class_certificate(const NetworkSpec& net, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y, const TraceConfig& cfg,
                                        double out_tol, double spatial_tol) {
  require_input_point(net, x);
  require_input_point(net, y);
  if (out_tol < 0.0 || spatial_tol <= 0.0) {
    fail(ErrorCode::InvalidArgument, "tolerances must be positive");
  }

  const FiberProblem problem = input_space_problem(net, 0, cfg.rank_tol);
  const Eigen::VectorXd target = problem.value(x);

  FiberCertificate cert;
  cert.output_gap = problem.codomain_norm(target - problem.value(y));
  if (cert.output_gap > out_tol) {
    cert.verdict = FiberVerdict::DifferentFiber;
    cert.detail = "outputs differ by " + std::to_string(cert.output_gap) +
                  " in the output metric";
    return cert;
  }

  CurveTrace trace;
  trace.vertices.push_back(x);
  trace.outputs.push_back(target);
  trace.drift.push_back(0.0);

  auto connected = [&]() {
    cert.verdict = FiberVerdict::Connected;
    cert.detail = "reached the companion point after " +
                  std::to_string(trace.vertices.size() - 1) + " steps";
    if (trace.vertices.size() >= 2) {
      trace.pseudolength_estimate = polyline_pseudolength(problem, trace.vertices, 4);
    }
    cert.evidence = std::move(trace);
  };

  if ((x - y).norm() <= spatial_tol) {
    connected();
    return cert;
  }

  // Greedy walk: at each step the kernel projection of the remaining gap
  // picks the direction, an Euler predictor moves at most step_size, and the
  // corrector restores the fiber. Failure to make progress is inconclusive by
  // construction, never a negative verdict.
  const int budget = std::abs(cfg.n_steps);
  for (int k = 0; k < budget; ++k) {
    const Eigen::VectorXd& cur = trace.vertices.back();
    const Eigen::VectorXd gap = y - cur;

    const KernelBasis kernel = kernel_basis_at(problem, cur);
    if (kernel.kernel_dim == 0) {
      cert.detail = "kernel vanished before reaching the companion point";
      return cert;
    }
    Eigen::VectorXd dir = kernel.vectors * (kernel.vectors.transpose() * gap);
    const double dir_norm = dir.norm();
    if (dir_norm <= 1e-12 * (1.0 + gap.norm())) {
      cert.detail = "remaining gap is orthogonal to the kernel";
      return cert;
    }
    dir /= dir_norm;

    const double h = std::min(cfg.step_size, gap.norm());
    const ProjectionResult corrected = project_to_fiber(
        problem, cur + h * dir, target, cfg.corrector_tol, cfg.corrector_max_iters);
    trace.corrector_iterations += corrected.iterations;
    if (!corrected.converged) {
      cert.detail = "corrector stalled at residual " + std::to_string(corrected.residual);
      return cert;
    }

    trace.vertices.push_back(corrected.point);
    trace.outputs.push_back(problem.value(corrected.point));
    trace.drift.push_back(problem.codomain_norm(trace.outputs.back() - target));

    if ((corrected.point - y).norm() <= spatial_tol) {
      connected();
      return cert;
    }
  }

  cert.detail = "step budget of " + std::to_string(budget) + " exhausted";
  return cert;
}

const char* to_string(FiberVerdict verdict) {
  switch (verdict) {
    case FiberVerdict::DifferentFiber:
      return "DifferentFiber";
    case FiberVerdict::Connected:
      return "Connected";
    case FiberVerdict::SameFiberUnknown:
      return "SameFiberUnknown";
  }
  return "?";
}

}  // namespace fibertrace
