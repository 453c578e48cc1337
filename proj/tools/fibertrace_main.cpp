// Command-line front end. Everything numeric goes through the shared
// library's C interface; this translation unit only parses arguments and
// formats results.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fibertrace.h"

namespace {

using nlohmann::json;

struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void die(int exit_code, const std::string& message) {
  throw CliError{exit_code, message};
}

int exit_code_for(ft_status status) {
  switch (status) {
    case FT_OK:
      return 0;
    case FT_ERR_SCHEMA:
      return 2;
    case FT_ERR_DIMENSION:
      return 3;
    case FT_ERR_EMPTY_KERNEL:
      return 4;
    default:
      return 5;
  }
}

void check(ft_status status) {
  if (status != FT_OK) {
    die(exit_code_for(status), ft_last_error());
  }
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) {
        ++used;
      }
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      die(2, "cannot parse \"" + item + "\" as a number in point \"" + text + "\"");
    }
    pos = comma + 1;
  }
  return values;
}

/// 17 significant digits: lossless round trip for 64-bit floats.
std::string fmt17(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

struct NetHandle {
  ft_net* net = nullptr;
  ~NetHandle() { ft_net_free(net); }
};

struct KernelHandle {
  ft_kernel* kernel = nullptr;
  ~KernelHandle() { ft_kernel_free(kernel); }
};

struct TraceHandle {
  ft_trace* trace = nullptr;
  ~TraceHandle() { ft_trace_free(trace); }
};

void load_net(const std::string& path, NetHandle& handle) {
  check(ft_net_load_file(path.c_str(), &handle.net));
}

json manifest_json(const std::string& command, const json& inputs, const json& config,
                   const json& diagnostics) {
  return json{{"command", command},
              {"tool_version", ft_version()},
              {"inputs", inputs},
              {"config", config},
              {"diagnostics", diagnostics}};
}

void emit_stdout(json document) {
  std::cout << document.dump(2) << "\n";
}

/// Data files are written whole, through a temp file and a rename, so readers
/// never observe partial output. The manifest lands next to the file; the
/// wall time lives only there, keeping the data file reproducible.
void write_file_atomically(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      die(5, "cannot open \"" + temp.string() + "\" for writing");
    }
    out << content;
    if (!out.good()) {
      die(5, "failed while writing \"" + temp.string() + "\"");
    }
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    die(5, "cannot rename \"" + temp.string() + "\" to \"" + target.string() + "\": " +
               ec.message());
  }
}

void write_manifest_sidecar(const std::string& out_path, json manifest, double wall_ms) {
  manifest["wall_time_ms"] = wall_ms;
  write_file_atomically(out_path + ".manifest.json", manifest.dump(2) + "\n");
}

const char* trace_status_name(ft_trace_status status) {
  switch (status) {
    case FT_TRACE_COMPLETED:
      return "completed";
    case FT_TRACE_STEP_REJECTED:
      return "step_rejected";
    case FT_TRACE_CORRECTOR_STALLED:
      return "corrector_stalled";
  }
  return "?";
}

const char* verdict_name(int verdict) {
  switch (verdict) {
    case FT_VERDICT_DIFFERENT_FIBER:
      return "DifferentFiber";
    case FT_VERDICT_CONNECTED:
      return "Connected";
    case FT_VERDICT_SAME_FIBER_UNKNOWN:
      return "SameFiberUnknown";
  }
  return "?";
}

struct TraceColumns {
  std::vector<std::string> names;  // after the leading t column
};

struct TraceTable {
  std::string csv;
  double max_drift = 0.0;
  ft_trace_status status = FT_TRACE_COMPLETED;
};

json trace_diagnostics(const ft_trace* trace, double max_drift) {
  return json{{"n_vertices", ft_trace_num_vertices(trace)},
              {"max_drift", max_drift},
              {"corrector_iterations", ft_trace_corrector_iterations(trace)},
              {"pseudolength_estimate", ft_trace_pseudolength(trace)},
              {"trace_status", trace_status_name(ft_trace_get_status(trace))},
              {"stop_reason", ft_trace_stop_reason(trace)}};
}

// ---- subcommands ----------------------------------------------------------

int cmd_eval(const std::string& spec_path, const std::string& point_text) {
  NetHandle net;
  load_net(spec_path, net);
  std::vector<double> value = parse_point(point_text);
  const json input_point = value;

  const int n = ft_net_num_layers(net.net);
  json layers = json::array();
  for (int k = 1; k <= n; ++k) {
    std::vector<double> next(static_cast<std::size_t>(ft_net_dim(net.net, k)));
    check(ft_net_forward(net.net, k, k, value.data(), static_cast<int>(value.size()),
                         next.data(), static_cast<int>(next.size())));
    layers.push_back(next);
    value = std::move(next);
  }

  json doc{{"output", value}, {"layers", layers}};
  doc["manifest"] = manifest_json(
      "eval", {{"spec", spec_path}, {"x", input_point}}, json::object(), json::object());
  emit_stdout(doc);
  return 0;
}

int cmd_kernel(const std::string& spec_path, const std::string& point_text, int layer,
               double tol) {
  NetHandle net;
  load_net(spec_path, net);
  const std::vector<double> x = parse_point(point_text);

  KernelHandle kernel;
  check(ft_kernel_basis(net.net, layer, x.data(), static_cast<int>(x.size()), tol,
                        &kernel.kernel));

  const int dim = ft_kernel_ambient_dim(kernel.kernel);
  const int r = ft_kernel_dim(kernel.kernel);
  json vectors = json::array();
  for (int j = 0; j < r; ++j) {
    std::vector<double> column(static_cast<std::size_t>(dim));
    check(ft_kernel_vector(kernel.kernel, j, column.data(), dim));
    vectors.push_back(column);
  }
  int n_sv = 0;
  check(ft_kernel_singular_values(kernel.kernel, nullptr, 0, &n_sv));
  std::vector<double> singular(static_cast<std::size_t>(n_sv));
  check(ft_kernel_singular_values(kernel.kernel, singular.data(), n_sv, &n_sv));

  json doc{{"layer", layer},
           {"point", x},
           {"kernel_dim", r},
           {"rank", ft_kernel_rank(kernel.kernel)},
           {"tol_used", ft_kernel_tol_used(kernel.kernel)},
           {"singular_values", singular},
           {"vectors", vectors}};
  doc["manifest"] = manifest_json("kernel", {{"spec", spec_path}, {"x", x}},
                                  {{"layer", layer}, {"tol", tol}}, json::object());
  emit_stdout(doc);
  return 0;
}

ft_trace_config make_config(int steps, double h, const std::optional<std::vector<double>>& coeffs) {
  ft_trace_config cfg;
  ft_trace_config_init(&cfg);
  cfg.n_steps = steps;
  cfg.step_size = h;
  if (coeffs) {
    cfg.kernel_coeffs = coeffs->data();
    cfg.kernel_coeffs_len = static_cast<int>(coeffs->size());
  }
  return cfg;
}

json config_json(const ft_trace_config& cfg, const std::optional<std::vector<double>>& coeffs) {
  return json{{"steps", cfg.n_steps},
              {"h", cfg.step_size},
              {"coeffs", coeffs ? json(*coeffs) : json(nullptr)},
              {"corrector_tol", cfg.corrector_tol},
              {"corrector_max_iters", cfg.corrector_max_iters}};
}

TraceTable render_trace_csv(const ft_trace* trace, double h, int steps,
                            const std::vector<std::string>& value_columns,
                            const std::function<std::string(int)>& row_values) {
  TraceTable table;
  std::string& csv = table.csv;
  csv = "t";
  for (const std::string& name : value_columns) {
    csv += "," + name;
  }
  csv += ",drift\n";

  const double direction = steps < 0 ? -1.0 : 1.0;
  const int count = ft_trace_num_vertices(trace);
  for (int k = 0; k < count; ++k) {
    const double drift = ft_trace_drift(trace, k);
    table.max_drift = std::max(table.max_drift, drift);
    csv += fmt17(direction * h * k);
    csv += row_values(k);
    csv += "," + fmt17(drift) + "\n";
  }
  table.status = ft_trace_get_status(trace);
  if (table.status != FT_TRACE_COMPLETED) {
    csv += "truncated\n";
  }
  return table;
}

int deliver_trace(const std::string& command, const std::string& out_path,
                  const TraceTable& table, json manifest,
                  std::chrono::steady_clock::time_point started) {
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  if (out_path.empty()) {
    std::cout << table.csv;
  } else {
    write_file_atomically(out_path, table.csv);
    write_manifest_sidecar(out_path, std::move(manifest), wall_ms);
  }
  (void)command;
  return 0;
}

int cmd_trace(const std::string& spec_path, const std::string& point_text, int steps,
              double h, const std::optional<std::vector<double>>& coeffs,
              const std::string& out_path) {
  const auto started = std::chrono::steady_clock::now();
  NetHandle net;
  load_net(spec_path, net);
  const std::vector<double> p = parse_point(point_text);

  const ft_trace_config cfg = make_config(steps, h, coeffs);
  TraceHandle trace;
  check(ft_trace_leaf(net.net, p.data(), static_cast<int>(p.size()), &cfg, &trace.trace));

  const int d0 = ft_trace_point_dim(trace.trace);
  const int dn = ft_trace_output_dim(trace.trace);
  std::vector<std::string> columns;
  for (int i = 0; i < d0; ++i) columns.push_back("x_" + std::to_string(i));
  for (int i = 0; i < dn; ++i) columns.push_back("out_" + std::to_string(i));

  std::vector<double> vertex(static_cast<std::size_t>(d0));
  std::vector<double> output(static_cast<std::size_t>(dn));
  const TraceTable table = render_trace_csv(
      trace.trace, h, steps, columns, [&](int k) {
        check(ft_trace_vertex(trace.trace, k, vertex.data(), d0));
        check(ft_trace_output(trace.trace, k, output.data(), dn));
        std::string row;
        for (double v : vertex) row += "," + fmt17(v);
        for (double v : output) row += "," + fmt17(v);
        return row;
      });

  json manifest = manifest_json("trace", {{"spec", spec_path}, {"p", p}},
                                config_json(cfg, coeffs),
                                trace_diagnostics(trace.trace, table.max_drift));
  return deliver_trace("trace", out_path, table, std::move(manifest), started);
}

int cmd_weight_trace(const std::string& spec_path, const std::string& point_text, int steps,
                     double h, const std::optional<std::vector<double>>& coeffs,
                     const std::string& out_path) {
  const auto started = std::chrono::steady_clock::now();
  NetHandle net;
  load_net(spec_path, net);
  const std::vector<double> x = parse_point(point_text);
  if (!coeffs) {
    die(2, "weight traces need --coeffs (the kernel is at least two-dimensional)");
  }

  const ft_trace_config cfg = make_config(steps, h, coeffs);
  TraceHandle trace;
  check(ft_trace_weight_class(net.net, x.data(), static_cast<int>(x.size()), nullptr, 0,
                              &cfg, &trace.trace));

  const int wdim = ft_trace_point_dim(trace.trace);
  const int d1 = ft_net_dim(net.net, 1);
  const int dn = ft_trace_output_dim(trace.trace);
  std::vector<std::string> columns;
  for (int i = 0; i < wdim; ++i) columns.push_back("w_" + std::to_string(i));
  for (int i = 0; i < d1; ++i) columns.push_back("layer1_" + std::to_string(i));
  for (int i = 0; i < dn; ++i) columns.push_back("out_" + std::to_string(i));

  std::vector<double> wflat(static_cast<std::size_t>(wdim));
  std::vector<double> first(static_cast<std::size_t>(d1));
  std::vector<double> output(static_cast<std::size_t>(dn));
  const TraceTable table = render_trace_csv(
      trace.trace, h, steps, columns, [&](int k) {
        check(ft_trace_vertex(trace.trace, k, wflat.data(), wdim));
        check(ft_weight_forward(net.net, x.data(), static_cast<int>(x.size()), wflat.data(),
                                wdim, first.data(), d1, nullptr, 0));
        check(ft_trace_output(trace.trace, k, output.data(), dn));
        std::string row;
        for (double v : wflat) row += "," + fmt17(v);
        for (double v : first) row += "," + fmt17(v);
        for (double v : output) row += "," + fmt17(v);
        return row;
      });

  json manifest = manifest_json("weight-trace", {{"spec", spec_path}, {"x", x}},
                                config_json(cfg, coeffs),
                                trace_diagnostics(trace.trace, table.max_drift));
  return deliver_trace("weight-trace", out_path, table, std::move(manifest), started);
}

int cmd_certify(const std::string& spec_path, const std::string& x_text,
                const std::string& y_text, int budget, double out_tol) {
  NetHandle net;
  load_net(spec_path, net);
  const std::vector<double> x = parse_point(x_text);
  const std::vector<double> y = parse_point(y_text);
  if (x.size() != y.size()) {
    die(3, "x and y have different dimensions");
  }

  ft_trace_config cfg;
  ft_trace_config_init(&cfg);
  cfg.n_steps = budget;
  cfg.step_size = 0.05;

  int verdict = 0;
  double gap = 0.0;
  TraceHandle evidence;
  check(ft_certify(net.net, x.data(), y.data(), static_cast<int>(x.size()), &cfg, out_tol,
                   1e-6, &verdict, &gap, &evidence.trace));

  json doc{{"verdict", verdict_name(verdict)}, {"output_gap", gap}};
  if (evidence.trace != nullptr) {
    double max_drift = 0.0;
    for (int k = 0; k < ft_trace_num_vertices(evidence.trace); ++k) {
      max_drift = std::max(max_drift, ft_trace_drift(evidence.trace, k));
    }
    const int d0 = ft_trace_point_dim(evidence.trace);
    std::vector<double> endpoint(static_cast<std::size_t>(d0));
    check(ft_trace_vertex(evidence.trace, ft_trace_num_vertices(evidence.trace) - 1,
                          endpoint.data(), d0));
    doc["evidence"] = json{{"n_vertices", ft_trace_num_vertices(evidence.trace)},
                           {"endpoint", endpoint},
                           {"max_drift", max_drift},
                           {"pseudolength_estimate", ft_trace_pseudolength(evidence.trace)}};
  } else {
    doc["evidence"] = nullptr;
  }
  doc["manifest"] =
      manifest_json("certify", {{"spec", spec_path}, {"x", x}, {"y", y}},
                    {{"budget", budget}, {"out_tol", out_tol}, {"h", cfg.step_size}},
                    json::object());
  emit_stdout(doc);
  return 0;
}

int cmd_check(const std::string& spec_path, double tol) {
  // tol < 0 leaves the threshold to the library
  NetHandle net;
  load_net(spec_path, net);

  int n_layers = 0;
  check(ft_net_check_rank(net.net, tol, nullptr, 0, &n_layers));
  std::vector<ft_rank_report> reports(static_cast<std::size_t>(n_layers));
  check(ft_net_check_rank(net.net, tol, reports.data(), n_layers, &n_layers));

  bool all_pass = true;
  json layers = json::array();
  for (const ft_rank_report& r : reports) {
    all_pass = all_pass && r.pass != 0;
    layers.push_back(json{{"layer", r.layer},
                          {"rank", r.rank},
                          {"max_rank", r.max_rank},
                          {"smallest_singular_value", r.smallest_singular_value},
                          {"largest_singular_value", r.largest_singular_value},
                          {"pass", r.pass != 0}});
  }

  json doc{{"layers", layers}, {"all_pass", all_pass}};
  doc["manifest"] = manifest_json("check", {{"spec", spec_path}}, {{"tol", tol}},
                                  {{"all_pass", all_pass}});
  emit_stdout(doc);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Level-set and equivalence-class explorer for smooth layered networks"};
  app.require_subcommand(1);
  // --h is a real option below, so help must not claim -h
  app.set_help_flag("--help", "print help and exit");

  std::string spec_path;
  std::string point_text;
  std::string companion_text;
  std::string out_path;
  std::string coeffs_text;
  int layer = 0;
  double tol = 0.0;
  int steps = 100;
  double h = 0.01;
  int budget = 256;
  double out_tol = 1e-8;

  CLI::App* eval = app.add_subcommand("eval", "network output and per-layer values");
  eval->add_option("spec", spec_path)->required();
  eval->add_option("x", point_text)->required();

  CLI::App* kernel = app.add_subcommand("kernel", "null directions of the pullback metric");
  kernel->add_option("spec", spec_path)->required();
  kernel->add_option("x", point_text)->required();
  kernel->add_option("--layer", layer, "space index 0..n");
  kernel->add_option("--tol", tol, "relative rank tolerance in (0,1)");

  CLI::App* trace = app.add_subcommand("trace", "null-curve trace of a level set");
  trace->set_help_flag("--help", "print help and exit");
  trace->add_option("spec", spec_path)->required();
  trace->add_option("p", point_text)->required();
  trace->add_option("--steps", steps, "step count; negative traces backward");
  trace->add_option("--h", h, "step size");
  trace->add_option("--coeffs", coeffs_text, "kernel combination, comma-separated");
  trace->add_option("--out", out_path, "CSV destination (stdout if omitted)");

  CLI::App* wtrace =
      app.add_subcommand("weight-trace", "first-layer parameter trace at fixed input");
  wtrace->set_help_flag("--help", "print help and exit");
  wtrace->add_option("spec", spec_path)->required();
  wtrace->add_option("x", point_text)->required();
  wtrace->add_option("--coeffs", coeffs_text, "kernel combination, comma-separated")
      ->required();
  wtrace->add_option("--steps", steps, "step count; negative traces backward");
  wtrace->add_option("--h", h, "step size");
  wtrace->add_option("--out", out_path, "CSV destination (stdout if omitted)");

  CLI::App* certify = app.add_subcommand("certify", "same-equivalence-class certificate");
  certify->add_option("spec", spec_path)->required();
  certify->add_option("x", point_text)->required();
  certify->add_option("y", companion_text)->required();
  certify->add_option("--budget", budget, "step budget for the connecting search");
  certify->add_option("--out-tol", out_tol, "output gap above which fibers differ");

  CLI::App* chk = app.add_subcommand("check", "full-rank and validity report");
  chk->add_option("spec", spec_path)->required();
  CLI::Option* chk_tol =
      chk->add_option("--tol", tol, "relative rank tolerance (default: library choice)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    std::optional<std::vector<double>> coeffs;
    if (!coeffs_text.empty()) {
      coeffs = parse_point(coeffs_text);
    }
    if (eval->parsed()) return cmd_eval(spec_path, point_text);
    if (kernel->parsed()) return cmd_kernel(spec_path, point_text, layer, tol);
    if (trace->parsed())
      return cmd_trace(spec_path, point_text, steps, h, coeffs, out_path);
    if (wtrace->parsed())
      return cmd_weight_trace(spec_path, point_text, steps, h, coeffs, out_path);
    if (certify->parsed())
      return cmd_certify(spec_path, point_text, companion_text, budget, out_tol);
    if (chk->parsed()) return cmd_check(spec_path, chk_tol->count() > 0 ? tol : -1.0);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
  return 5;
}
