/* fibertrace C API
 *
 * Networks of smooth layers seen as maps between spaces, the pullback of the
 * output metric to any earlier space, its null directions, and traces of the
 * level sets / equivalence classes those directions integrate to -- in input
 * space and in first-layer parameter space.
 *
 * Conventions:
 *   - layers are numbered 1..n, the spaces they connect 0..n; layer i maps
 *     space i-1 to space i, and dimension queries use the space index;
 *   - matrices cross the boundary in row-major order;
 *   - every fallible call returns ft_status; on failure ft_last_error()
 *     describes the problem for the calling thread;
 *   - objects returned through ft_*_free-able handles are owned by the
 *     caller. Handles are immutable once created and may be shared across
 *     threads.
 */

#ifndef FIBERTRACE_H
#define FIBERTRACE_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ft_status {
  FT_OK = 0,
  /* the next four line up with the CLI exit codes */
  FT_ERR_SCHEMA = 2,
  FT_ERR_DIMENSION = 3,
  FT_ERR_EMPTY_KERNEL = 4,
  FT_ERR_INTERNAL = 5,
  FT_ERR_INVALID_RANGE = 6,
  FT_ERR_INVALID_ARGUMENT = 7,
  FT_ERR_AMBIGUOUS_DIRECTION = 8,
  FT_ERR_STEP_REJECTED = 9,
  FT_ERR_NO_CONVERGENCE = 10,
  FT_ERR_NON_SPD_METRIC = 11,
  FT_ERR_EMPTY_CURVE = 12,
  FT_ERR_IO = 13
} ft_status;

typedef enum ft_trace_status {
  FT_TRACE_COMPLETED = 0,
  FT_TRACE_STEP_REJECTED = 1,   /* kernel dimension changed; partial result */
  FT_TRACE_CORRECTOR_STALLED = 2 /* drift tolerance unreachable; partial result */
} ft_trace_status;

typedef enum ft_verdict {
  FT_VERDICT_DIFFERENT_FIBER = 0,
  FT_VERDICT_CONNECTED = 1,
  FT_VERDICT_SAME_FIBER_UNKNOWN = 2
} ft_verdict;

typedef struct ft_net ft_net;
typedef struct ft_kernel ft_kernel;
typedef struct ft_trace ft_trace;

const char* ft_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* ft_last_error(void);

/* ---- networks ---------------------------------------------------------- */

ft_status ft_net_load_file(const char* path, ft_net** out);
ft_status ft_net_load_json(const char* json_text, ft_net** out);
void ft_net_free(ft_net* net);

int ft_net_num_layers(const ft_net* net);
/* Dimension d_i of space i, 0..n; negative on a bad index. */
int ft_net_dim(const ft_net* net, int space);

/* out must hold dim(to_layer) values. */
ft_status ft_net_forward(const ft_net* net, int from_layer, int to_layer, const double* x,
                         int x_len, double* out, int out_len);

/* Row-major dim(to_layer) x dim(from_layer-1) Jacobian of the composite map. */
ft_status ft_net_jacobian(const ft_net* net, int from_layer, int to_layer, const double* x,
                          int x_len, double* out, int out_len);

typedef struct ft_rank_report {
  int layer;
  int rank;
  int max_rank;
  double smallest_singular_value;
  double largest_singular_value;
  int pass;
} ft_rank_report;

/* Fills up to max_reports entries (one per layer); *n_reports receives the
 * layer count. tol < 0 picks the library default threshold. */
ft_status ft_net_check_rank(const ft_net* net, double tol, ft_rank_report* reports,
                            int max_reports, int* n_reports);

/* ---- pullback metric and kernels --------------------------------------- */

/* Pullback of the output metric to space at_layer (0..n) at x: row-major
 * d x d matrix into `metric`, numerical rank into *rank. rank_tol <= 0 picks
 * the default. */
ft_status ft_pullback_metric(const ft_net* net, int at_layer, const double* x, int x_len,
                             double rank_tol, double* metric, int metric_len, int* rank);

/* Orthonormal basis of the pullback-metric kernel at x. */
ft_status ft_kernel_basis(const ft_net* net, int at_layer, const double* x, int x_len,
                          double rank_tol, ft_kernel** out);

/* Kernel of the output map seen as a function of the first layer's flattened
 * parameters (weights row-major, then bias) at fixed input x. wflat may be
 * NULL to use the network's own first-layer parameters. */
ft_status ft_weight_kernel(const ft_net* net, const double* x, int x_len,
                           const double* wflat, int wflat_len, double rank_tol,
                           ft_kernel** out);

int ft_kernel_dim(const ft_kernel* kernel);         /* r */
int ft_kernel_ambient_dim(const ft_kernel* kernel); /* d */
int ft_kernel_rank(const ft_kernel* kernel);        /* d - r */
double ft_kernel_tol_used(const ft_kernel* kernel);
/* Column j of the basis, j in 0..r-1; out must hold d values. */
ft_status ft_kernel_vector(const ft_kernel* kernel, int j, double* out, int out_len);
/* Singular values of S*J, descending; *n_values receives the count. */
ft_status ft_kernel_singular_values(const ft_kernel* kernel, double* out, int out_len,
                                    int* n_values);
void ft_kernel_free(ft_kernel* kernel);

/* ---- pseudolength and distance bound ----------------------------------- */

/* Pseudolength of the polyline through n_vertices points of dimension dim
 * (row-major vertex per row) under the pullback metric at space at_layer,
 * midpoint quadrature with quad_points samples per segment. */
ft_status ft_pseudolength(const ft_net* net, int at_layer, const double* vertices,
                          int n_vertices, int dim, int quad_points, double* out);

/* Upper bound on the pseudodistance between inputs x and y: best explicit
 * polyline among the straight segment and energy-descent refinements up to
 * `segments` interior vertices. *descent_converged reports whether every
 * descent level reached a stationary polyline (the bound is valid either
 * way). */
ft_status ft_pseudodistance_bound(const ft_net* net, const double* x, const double* y,
                                  int dim, int segments, int descent_iters, double step,
                                  double* bound, int* descent_converged);

/* ---- null-curve traces (predictor-corrector) --------------------------- */

typedef struct ft_trace_config {
  double step_size;
  int n_steps;            /* sign selects the direction */
  double corrector_tol;   /* drift guarantee per vertex */
  int corrector_max_iters;
  const double* seed_direction; /* optional, length = point dimension */
  int seed_direction_len;
  const double* kernel_coeffs;  /* required when the kernel dimension > 1 */
  int kernel_coeffs_len;
  double rank_tol;        /* <= 0: default */
} ft_trace_config;

void ft_trace_config_init(ft_trace_config* cfg);

/* Null-curve trace of the equivalence class through input p. */
ft_status ft_trace_leaf(const ft_net* net, const double* p, int dim,
                        const ft_trace_config* cfg, ft_trace** out);

/* Null-curve trace in first-layer parameter space at fixed input x, starting
 * from wflat (NULL: the network's own parameters). Kernel coefficients in cfg
 * select the combination; zeros give a stationary trace. */
ft_status ft_trace_weight_class(const ft_net* net, const double* x, int x_len,
                                const double* wflat, int wflat_len,
                                const ft_trace_config* cfg, ft_trace** out);

/* Network output (and optionally the first-layer output) at fixed input x
 * with the first layer's parameters replaced by wflat. Either output pointer
 * may be NULL. */
ft_status ft_weight_forward(const ft_net* net, const double* x, int x_len,
                            const double* wflat, int wflat_len, double* first_layer_out,
                            int first_layer_len, double* net_out, int net_out_len);

int ft_trace_num_vertices(const ft_trace* trace);
int ft_trace_point_dim(const ft_trace* trace);
int ft_trace_output_dim(const ft_trace* trace);
ft_status ft_trace_vertex(const ft_trace* trace, int k, double* out, int out_len);
ft_status ft_trace_output(const ft_trace* trace, int k, double* out, int out_len);
/* Distance of the vertex's output from the start output, in the output
 * metric norm; bounded by corrector_tol for every emitted vertex. */
double ft_trace_drift(const ft_trace* trace, int k);
double ft_trace_pseudolength(const ft_trace* trace);
ft_trace_status ft_trace_get_status(const ft_trace* trace);
const char* ft_trace_stop_reason(const ft_trace* trace);
long ft_trace_corrector_iterations(const ft_trace* trace);
void ft_trace_free(ft_trace* trace);

/* ---- equivalence certificates ------------------------------------------ */

/* Decides whether inputs x and y can be certified to lie on the same fiber.
 * Output gap above out_tol is a definite negative; otherwise a budgeted
 * greedy null-curve search from x toward y runs, and an endpoint within
 * spatial_tol of y certifies the connection. *verdict receives the outcome,
 * *output_gap the measured gap, and *evidence (may be NULL) the connecting
 * trace when the verdict is FT_VERDICT_CONNECTED. */
ft_status ft_certify(const ft_net* net, const double* x, const double* y, int dim,
                     const ft_trace_config* cfg, double out_tol, double spatial_tol,
                     int* verdict, double* output_gap, ft_trace** evidence);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FIBERTRACE_H */
