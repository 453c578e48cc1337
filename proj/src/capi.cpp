#include "fibertrace.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <utility>

#include "fibertrace/error.hpp"
#include "fibertrace/fiber_problem.hpp"
#include "fibertrace/leaf_trace.hpp"
#include "fibertrace/pullback.hpp"
#include "fibertrace/smooth_net.hpp"
#include "fibertrace/spec_io.hpp"
#include "fibertrace/version.hpp"
#include "fibertrace/weight_space.hpp"

struct ft_net {
  fibertrace::NetworkSpec net;
};

struct ft_kernel {
  fibertrace::KernelBasis basis;
};

struct ft_trace {
  fibertrace::CurveTrace trace;
};

namespace {

thread_local std::string g_last_error;

ft_status status_of(fibertrace::ErrorCode code) {
  using fibertrace::ErrorCode;
  switch (code) {
    case ErrorCode::Schema:
      return FT_ERR_SCHEMA;
    case ErrorCode::DimensionMismatch:
      return FT_ERR_DIMENSION;
    case ErrorCode::InvalidRange:
      return FT_ERR_INVALID_RANGE;
    case ErrorCode::InvalidArgument:
      return FT_ERR_INVALID_ARGUMENT;
    case ErrorCode::EmptyKernel:
      return FT_ERR_EMPTY_KERNEL;
    case ErrorCode::AmbiguousDirection:
      return FT_ERR_AMBIGUOUS_DIRECTION;
    case ErrorCode::StepRejected:
      return FT_ERR_STEP_REJECTED;
    case ErrorCode::NoConvergence:
      return FT_ERR_NO_CONVERGENCE;
    case ErrorCode::NonSpdMetric:
      return FT_ERR_NON_SPD_METRIC;
    case ErrorCode::EmptyCurve:
      return FT_ERR_EMPTY_CURVE;
    case ErrorCode::Io:
      return FT_ERR_IO;
    case ErrorCode::Internal:
      return FT_ERR_INTERNAL;
  }
  return FT_ERR_INTERNAL;
}

template <typename Fn>
ft_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FT_OK;
  } catch (const fibertrace::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FT_ERR_INTERNAL;
  }
}

Eigen::VectorXd to_vector(const double* data, int len) {
  if (data == nullptr || len < 0) {
    fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null or negative-length buffer");
  }
  return Eigen::Map<const Eigen::VectorXd>(data, len);
}

void copy_out(const Eigen::VectorXd& value, double* out, int out_len,
              const char* what) {
  if (out == nullptr || out_len != value.size()) {
    fibertrace::fail(fibertrace::ErrorCode::DimensionMismatch,
                     std::string(what) + " buffer must hold " +
                         std::to_string(value.size()) + " values, got " +
                         std::to_string(out_len));
  }
  Eigen::Map<Eigen::VectorXd>(out, out_len) = value;
}

void copy_out_row_major(const Eigen::MatrixXd& value, double* out, int out_len,
                        const char* what) {
  if (out == nullptr || out_len != value.size()) {
    fibertrace::fail(fibertrace::ErrorCode::DimensionMismatch,
                     std::string(what) + " buffer must hold " +
                         std::to_string(value.size()) + " values, got " +
                         std::to_string(out_len));
  }
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      out, value.rows(), value.cols()) = value;
}

const fibertrace::NetworkSpec& net_of(const ft_net* net) {
  if (net == nullptr) {
    fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null network handle");
  }
  return net->net;
}

fibertrace::TraceConfig to_config(const ft_trace_config* cfg) {
  if (cfg == nullptr) {
    fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null trace config");
  }
  fibertrace::TraceConfig out;
  out.step_size = cfg->step_size;
  out.n_steps = cfg->n_steps;
  out.corrector_tol = cfg->corrector_tol;
  out.corrector_max_iters = cfg->corrector_max_iters;
  out.rank_tol = cfg->rank_tol;
  if (cfg->seed_direction != nullptr && cfg->seed_direction_len > 0) {
    out.seed_direction = to_vector(cfg->seed_direction, cfg->seed_direction_len);
  }
  if (cfg->kernel_coeffs != nullptr && cfg->kernel_coeffs_len > 0) {
    out.kernel_coeffs = to_vector(cfg->kernel_coeffs, cfg->kernel_coeffs_len);
  }
  return out;
}

fibertrace::WeightPoint weight_point_of(const fibertrace::NetworkSpec& net,
                                        const double* wflat, int wflat_len) {
  if (wflat == nullptr) {
    return fibertrace::first_layer_point(net);
  }
  return fibertrace::WeightPoint::unflatten(to_vector(wflat, wflat_len), net.dim(1),
                                            net.dim(0));
}

}  // namespace

extern "C" {

const char* ft_version(void) { return fibertrace::kVersion; }

const char* ft_last_error(void) { return g_last_error.c_str(); }

ft_status ft_net_load_file(const char* path, ft_net** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null argument");
    }
    *out = new ft_net{fibertrace::load_network_file(path)};
  });
}

ft_status ft_net_load_json(const char* json_text, ft_net** out) {
  return guarded([&] {
    if (json_text == nullptr || out == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null argument");
    }
    *out = new ft_net{fibertrace::load_network_json(json_text)};
  });
}

void ft_net_free(ft_net* net) { delete net; }

int ft_net_num_layers(const ft_net* net) {
  return net == nullptr ? -1 : net->net.num_layers();
}

int ft_net_dim(const ft_net* net, int space) {
  if (net == nullptr || space < 0 || space > net->net.num_layers()) {
    return -1;
  }
  return static_cast<int>(net->net.dim(space));
}

ft_status ft_net_forward(const ft_net* net, int from_layer, int to_layer, const double* x,
                         int x_len, double* out, int out_len) {
  return guarded([&] {
    const Eigen::VectorXd value =
        fibertrace::forward(net_of(net), from_layer, to_layer, to_vector(x, x_len));
    copy_out(value, out, out_len, "output");
  });
}

ft_status ft_net_jacobian(const ft_net* net, int from_layer, int to_layer, const double* x,
                          int x_len, double* out, int out_len) {
  return guarded([&] {
    const Eigen::MatrixXd jac = fibertrace::composite_jacobian(
        net_of(net), from_layer, to_layer, to_vector(x, x_len));
    copy_out_row_major(jac, out, out_len, "jacobian");
  });
}

ft_status ft_net_check_rank(const ft_net* net, double tol, ft_rank_report* reports,
                            int max_reports, int* n_reports) {
  return guarded([&] {
    const fibertrace::NetworkSpec& spec = net_of(net);
    const double resolved =
        tol < 0.0 ? fibertrace::default_rank_tol(spec.dim(0)) : tol;
    const auto results = fibertrace::check_full_rank(spec, resolved);
    if (n_reports != nullptr) {
      *n_reports = static_cast<int>(results.size());
    }
    if (reports == nullptr) {
      return;
    }
    const int count = std::min<int>(max_reports, static_cast<int>(results.size()));
    for (int i = 0; i < count; ++i) {
      const auto& r = results[static_cast<std::size_t>(i)];
      reports[i] = ft_rank_report{r.layer,
                                  static_cast<int>(r.rank),
                                  static_cast<int>(r.max_rank),
                                  r.smallest_singular_value,
                                  r.largest_singular_value,
                                  r.pass ? 1 : 0};
    }
  });
}

ft_status ft_pullback_metric(const ft_net* net, int at_layer, const double* x, int x_len,
                             double rank_tol, double* metric, int metric_len, int* rank) {
  return guarded([&] {
    const fibertrace::MetricTensor result =
        fibertrace::pullback_metric(net_of(net), at_layer, to_vector(x, x_len), rank_tol);
    copy_out_row_major(result.matrix, metric, metric_len, "metric");
    if (rank != nullptr) {
      *rank = static_cast<int>(result.rank);
    }
  });
}

ft_status ft_kernel_basis(const ft_net* net, int at_layer, const double* x, int x_len,
                          double rank_tol, ft_kernel** out) {
  return guarded([&] {
    if (out == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null output handle");
    }
    *out = new ft_kernel{
        fibertrace::kernel_basis(net_of(net), at_layer, to_vector(x, x_len), rank_tol)};
  });
}

ft_status ft_weight_kernel(const ft_net* net, const double* x, int x_len,
                           const double* wflat, int wflat_len, double rank_tol,
                           ft_kernel** out) {
  return guarded([&] {
    if (out == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null output handle");
    }
    const fibertrace::NetworkSpec& spec = net_of(net);
    *out = new ft_kernel{fibertrace::weight_kernel(
        spec, to_vector(x, x_len), weight_point_of(spec, wflat, wflat_len), rank_tol)};
  });
}

int ft_kernel_dim(const ft_kernel* kernel) {
  return kernel == nullptr ? -1 : static_cast<int>(kernel->basis.kernel_dim);
}

int ft_kernel_ambient_dim(const ft_kernel* kernel) {
  return kernel == nullptr ? -1 : static_cast<int>(kernel->basis.vectors.rows());
}

int ft_kernel_rank(const ft_kernel* kernel) {
  return kernel == nullptr ? -1 : static_cast<int>(kernel->basis.rank);
}

double ft_kernel_tol_used(const ft_kernel* kernel) {
  return kernel == nullptr ? -1.0 : kernel->basis.tol_used;
}

ft_status ft_kernel_vector(const ft_kernel* kernel, int j, double* out, int out_len) {
  return guarded([&] {
    if (kernel == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null kernel handle");
    }
    if (j < 0 || j >= kernel->basis.kernel_dim) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidRange,
                       "kernel column " + std::to_string(j) + " outside 0.." +
                           std::to_string(kernel->basis.kernel_dim - 1));
    }
    copy_out(kernel->basis.vectors.col(j), out, out_len, "kernel vector");
  });
}

ft_status ft_kernel_singular_values(const ft_kernel* kernel, double* out, int out_len,
                                    int* n_values) {
  return guarded([&] {
    if (kernel == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null kernel handle");
    }
    const Eigen::VectorXd& sv = kernel->basis.singular_values;
    if (n_values != nullptr) {
      *n_values = static_cast<int>(sv.size());
    }
    if (out != nullptr) {
      copy_out(sv, out, out_len, "singular values");
    }
  });
}

void ft_kernel_free(ft_kernel* kernel) { delete kernel; }

ft_status ft_pseudolength(const ft_net* net, int at_layer, const double* vertices,
                          int n_vertices, int dim, int quad_points, double* out) {
  return guarded([&] {
    if (vertices == nullptr || out == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null argument");
    }
    if (n_vertices < 2) {
      fibertrace::fail(fibertrace::ErrorCode::EmptyCurve,
                       "a polyline needs at least two vertices");
    }
    fibertrace::Polyline curve;
    curve.vertices.reserve(static_cast<std::size_t>(n_vertices));
    for (int i = 0; i < n_vertices; ++i) {
      curve.vertices.push_back(to_vector(vertices + static_cast<std::ptrdiff_t>(i) * dim, dim));
    }
    *out = fibertrace::pseudolength(net_of(net), at_layer, curve, quad_points);
  });
}

ft_status ft_pseudodistance_bound(const ft_net* net, const double* x, const double* y,
                                  int dim, int segments, int descent_iters, double step,
                                  double* bound, int* descent_converged) {
  return guarded([&] {
    if (bound == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null output");
    }
    fibertrace::DistanceBoundOptions opts;
    opts.segments = segments;
    opts.descent_iters = descent_iters;
    if (step > 0.0) {
      opts.step = step;
    }
    const fibertrace::DistanceBound result = fibertrace::pseudodistance_upper_bound(
        net_of(net), to_vector(x, dim), to_vector(y, dim), opts);
    *bound = result.bound;
    if (descent_converged != nullptr) {
      *descent_converged = result.descent_converged ? 1 : 0;
    }
  });
}

void ft_trace_config_init(ft_trace_config* cfg) {
  if (cfg == nullptr) return;
  std::memset(cfg, 0, sizeof(*cfg));
  cfg->step_size = 0.01;
  cfg->n_steps = 100;
  cfg->corrector_tol = 1e-8;
  cfg->corrector_max_iters = 40;
  cfg->rank_tol = 0.0;
}

ft_status ft_trace_leaf(const ft_net* net, const double* p, int dim,
                        const ft_trace_config* cfg, ft_trace** out) {
  return guarded([&] {
    if (out == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null output handle");
    }
    *out = new ft_trace{
        fibertrace::trace_leaf(net_of(net), to_vector(p, dim), to_config(cfg))};
  });
}

ft_status ft_trace_weight_class(const ft_net* net, const double* x, int x_len,
                                const double* wflat, int wflat_len,
                                const ft_trace_config* cfg, ft_trace** out) {
  return guarded([&] {
    if (out == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null output handle");
    }
    const fibertrace::NetworkSpec& spec = net_of(net);
    const fibertrace::TraceConfig config = to_config(cfg);
    if (!config.kernel_coeffs) {
      fibertrace::fail(fibertrace::ErrorCode::AmbiguousDirection,
                       "weight traces need kernel coefficients");
    }
    *out = new ft_trace{fibertrace::trace_weight_class(
        spec, to_vector(x, x_len), weight_point_of(spec, wflat, wflat_len),
        *config.kernel_coeffs, config)};
  });
}

ft_status ft_weight_forward(const ft_net* net, const double* x, int x_len,
                            const double* wflat, int wflat_len, double* first_layer_out,
                            int first_layer_len, double* net_out, int net_out_len) {
  return guarded([&] {
    const fibertrace::NetworkSpec& spec = net_of(net);
    const Eigen::VectorXd input = to_vector(x, x_len);
    const fibertrace::WeightPoint w = weight_point_of(spec, wflat, wflat_len);
    if (first_layer_out != nullptr) {
      copy_out(fibertrace::first_layer_output(spec, input, w), first_layer_out,
               first_layer_len, "first-layer output");
    }
    if (net_out != nullptr) {
      copy_out(fibertrace::weight_forward(spec, input, w), net_out, net_out_len,
               "network output");
    }
  });
}

int ft_trace_num_vertices(const ft_trace* trace) {
  return trace == nullptr ? -1 : static_cast<int>(trace->trace.vertices.size());
}

int ft_trace_point_dim(const ft_trace* trace) {
  if (trace == nullptr || trace->trace.vertices.empty()) return -1;
  return static_cast<int>(trace->trace.vertices.front().size());
}

int ft_trace_output_dim(const ft_trace* trace) {
  if (trace == nullptr || trace->trace.outputs.empty()) return -1;
  return static_cast<int>(trace->trace.outputs.front().size());
}

ft_status ft_trace_vertex(const ft_trace* trace, int k, double* out, int out_len) {
  return guarded([&] {
    if (trace == nullptr || k < 0 ||
        k >= static_cast<int>(trace->trace.vertices.size())) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidRange, "vertex index out of range");
    }
    copy_out(trace->trace.vertices[static_cast<std::size_t>(k)], out, out_len, "vertex");
  });
}

ft_status ft_trace_output(const ft_trace* trace, int k, double* out, int out_len) {
  return guarded([&] {
    if (trace == nullptr || k < 0 || k >= static_cast<int>(trace->trace.outputs.size())) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidRange, "vertex index out of range");
    }
    copy_out(trace->trace.outputs[static_cast<std::size_t>(k)], out, out_len, "output");
  });
}

double ft_trace_drift(const ft_trace* trace, int k) {
  if (trace == nullptr || k < 0 || k >= static_cast<int>(trace->trace.drift.size())) {
    return -1.0;
  }
  return trace->trace.drift[static_cast<std::size_t>(k)];
}

double ft_trace_pseudolength(const ft_trace* trace) {
  return trace == nullptr ? -1.0 : trace->trace.pseudolength_estimate;
}

ft_trace_status ft_trace_get_status(const ft_trace* trace) {
  if (trace == nullptr) return FT_TRACE_COMPLETED;
  switch (trace->trace.status) {
    case fibertrace::TraceStatus::Completed:
      return FT_TRACE_COMPLETED;
    case fibertrace::TraceStatus::StepRejected:
      return FT_TRACE_STEP_REJECTED;
    case fibertrace::TraceStatus::CorrectorStalled:
      return FT_TRACE_CORRECTOR_STALLED;
  }
  return FT_TRACE_COMPLETED;
}

const char* ft_trace_stop_reason(const ft_trace* trace) {
  return trace == nullptr ? "" : trace->trace.stop_reason.c_str();
}

long ft_trace_corrector_iterations(const ft_trace* trace) {
  return trace == nullptr ? -1 : trace->trace.corrector_iterations;
}

void ft_trace_free(ft_trace* trace) { delete trace; }

ft_status ft_certify(const ft_net* net, const double* x, const double* y, int dim,
                     const ft_trace_config* cfg, double out_tol, double spatial_tol,
                     int* verdict, double* output_gap, ft_trace** evidence) {
  return guarded([&] {
    if (verdict == nullptr) {
      fibertrace::fail(fibertrace::ErrorCode::InvalidArgument, "null verdict output");
    }
    fibertrace::FiberCertificate cert = fibertrace::same_class_certificate(
        net_of(net), to_vector(x, dim), to_vector(y, dim), to_config(cfg), out_tol,
        spatial_tol > 0.0 ? spatial_tol : 1e-6);
    switch (cert.verdict) {
      case fibertrace::FiberVerdict::DifferentFiber:
        *verdict = FT_VERDICT_DIFFERENT_FIBER;
        break;
      case fibertrace::FiberVerdict::Connected:
        *verdict = FT_VERDICT_CONNECTED;
        break;
      case fibertrace::FiberVerdict::SameFiberUnknown:
        *verdict = FT_VERDICT_SAME_FIBER_UNKNOWN;
        break;
    }
    if (output_gap != nullptr) {
      *output_gap = cert.output_gap;
    }
    if (evidence != nullptr) {
      *evidence = cert.evidence ? new ft_trace{std::move(*cert.evidence)} : nullptr;
    }
  });
}

}  // extern "C"
