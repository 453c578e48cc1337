#pragma once

#include <string>

#include "fibertrace/smooth_net.hpp"

namespace fibertrace {

/// Parses a network description:
///
///   {
///     "layers": [
///       { "activation": "identity" | "sigmoid" | "softplus" | "tanh",
///         "weights": [[...], ...],   // row-major d_i x d_{i-1}
///         "bias": [...] },           // d_i
///       ...
///     ],
///     "output_metric": [[...], ...]  // optional, square SPD; identity if absent
///   }
///
/// Violations are reported with the JSON path of the offending field (or the
/// parser's line/column for malformed documents) and raise Schema errors.
/// `origin` labels the source in messages, typically the file name.
NetworkSpec load_network_json(const std::string& json_text,
                              const std::string& origin = "<string>");

NetworkSpec load_network_file(const std::string& path);

}  // namespace fibertrace
