#pragma once

#include <Eigen/Dense>
#include <optional>

#include "fibertrace/fiber_problem.hpp"
#include "fibertrace/pullback.hpp"
#include "fibertrace/smooth_net.hpp"

namespace fibertrace {

/// Unit vector in the kernel of the pullback metric at x (input space).
///
/// For a one-dimensional kernel the basis vector is sign-aligned with `prev`
/// when given (dot >= 0), otherwise the deterministic orientation of the
/// basis is kept. For higher-dimensional kernels `coeffs` selects the
/// combination of the orthonormal basis columns; without it the direction is
/// ambiguous and an error is raised.
Eigen::VectorXd null_direction(const NetworkSpec& net, const Eigen::VectorXd& x,
                               const std::optional<Eigen::VectorXd>& prev = std::nullopt,
                               const std::optional<Eigen::VectorXd>& coeffs = std::nullopt);

/// One classical RK4 step of size h along the null field starting at x, with
/// the kernel re-extracted and sign-aligned at every internal stage. Throws
/// StepRejected if the kernel dimension changes between stages.
Eigen::VectorXd rk4_null_step(const NetworkSpec& net, const Eigen::VectorXd& x, double h,
                              const Eigen::VectorXd& prev,
                              const std::optional<Eigen::VectorXd>& coeffs = std::nullopt);

/// Gauss-Newton projection of x onto the fiber N(x) = target of the full
/// network map. Residuals are measured in the output metric norm.
ProjectionResult project_to_fiber(const NetworkSpec& net, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& target, double tol, int max_iters);

/// Traces the equivalence class through p: |n_steps| RK4 null steps, each
/// followed by projection back onto the fiber of N(p). Negative n_steps
/// traces the opposite direction.
CurveTrace trace_leaf(const NetworkSpec& net, const Eigen::VectorXd& p, const TraceConfig& cfg);

enum class FiberVerdict {
  DifferentFiber,    // outputs differ beyond tolerance; provably not equivalent
  Connected,         // a null trace from x reached y; equivalence certified
  SameFiberUnknown,  // outputs agree but no connection found within budget
};

struct FiberCertificate {
  FiberVerdict verdict = FiberVerdict::SameFiberUnknown;
  double output_gap = 0.0;  // metric norm of N(x) - N(y)
  std::optional<CurveTrace> evidence;
  std::string detail;
};

/// Decides the fiber relation between x and y. Equal outputs are necessary
/// but not sufficient for equivalence, so the positive direction is searched:
/// a null trace from x whose direction is the kernel projection of y - x,
/// re-evaluated each step, with the step budget cfg.n_steps. Connected is
/// issued once the trace comes within spatial_tol of y.
FiberCertificate same_class_certificate(const NetworkSpec& net, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y, const TraceConfig& cfg,
                                        double out_tol, double spatial_tol = 1e-6);

const char* to_string(FiberVerdict verdict);

}  // namespace fibertrace
