#include "fibertrace/spec_io.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fibertrace/error.hpp"

namespace fibertrace {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& origin, const std::string& path,
                              const std::string& what) {
  fail(ErrorCode::Schema, origin + ": " + path + ": " + what);
}

const json& require_field(const std::string& origin, const json& object,
                          const std::string& path, const std::string& key) {
  auto it = object.find(key);
  if (it == object.end()) {
    schema_fail(origin, path, "missing required field \"" + key + "\"");
  }
  return *it;
}

void reject_unknown_keys(const std::string& origin, const json& object,
                         const std::string& path, std::initializer_list<const char*> known) {
  for (auto it = object.begin(); it != object.end(); ++it) {
    bool ok = false;
    for (const char* key : known) {
      if (it.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      schema_fail(origin, path, "unknown field \"" + it.key() + "\"");
    }
  }
}

double parse_number(const std::string& origin, const json& value, const std::string& path) {
  if (!value.is_number()) {
    schema_fail(origin, path, "expected a number, got " + std::string(value.type_name()));
  }
  return value.get<double>();
}

Eigen::VectorXd parse_vector(const std::string& origin, const json& value,
                             const std::string& path) {
  if (!value.is_array()) {
    schema_fail(origin, path, "expected an array of numbers, got " +
                                  std::string(value.type_name()));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] =
        parse_number(origin, value[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

Eigen::MatrixXd parse_matrix(const std::string& origin, const json& value,
                             const std::string& path) {
  if (!value.is_array() || value.empty()) {
    schema_fail(origin, path, "expected a non-empty array of rows");
  }
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    rows.push_back(parse_vector(origin, value[i], row_path));
    if (rows.back().size() == 0) {
      schema_fail(origin, row_path, "rows must not be empty");
    }
    if (rows.back().size() != rows.front().size()) {
      schema_fail(origin, row_path,
                  "row length " + std::to_string(rows.back().size()) +
                      " differs from row 0 length " + std::to_string(rows.front().size()));
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return out;
}

}  // namespace

NetworkSpec load_network_json(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    // nlohmann reports line/column positions in parse messages; overflowing
    // numbers surface here as out_of_range.
    fail(ErrorCode::Schema, origin + ": " + e.what());
  }
  if (!doc.is_object()) {
    schema_fail(origin, "$", "top level must be an object");
  }
  reject_unknown_keys(origin, doc, "$", {"layers", "output_metric"});

  const json& layers_json = require_field(origin, doc, "$", "layers");
  if (!layers_json.is_array() || layers_json.empty()) {
    schema_fail(origin, "$.layers", "expected a non-empty array of layer objects");
  }

  std::vector<SmoothLayer> layers;
  layers.reserve(layers_json.size());
  for (std::size_t i = 0; i < layers_json.size(); ++i) {
    const std::string path = "$.layers[" + std::to_string(i) + "]";
    const json& layer_json = layers_json[i];
    if (!layer_json.is_object()) {
      schema_fail(origin, path, "expected an object");
    }
    reject_unknown_keys(origin, layer_json, path, {"activation", "weights", "bias"});

    const json& activation_json = require_field(origin, layer_json, path, "activation");
    if (!activation_json.is_string()) {
      schema_fail(origin, path + ".activation", "expected a string");
    }

    SmoothLayer layer;
    try {
      layer.activation = activation_from_string(activation_json.get<std::string>());
    } catch (const Error& e) {
      schema_fail(origin, path + ".activation", e.what());
    }
    layer.weights =
        parse_matrix(origin, require_field(origin, layer_json, path, "weights"),
                     path + ".weights");
    layer.bias = parse_vector(origin, require_field(origin, layer_json, path, "bias"),
                              path + ".bias");
    if (layer.bias.size() != layer.weights.rows()) {
      schema_fail(origin, path + ".bias",
                  "dimension " + std::to_string(layer.bias.size()) +
                      " does not match the " + std::to_string(layer.weights.rows()) +
                      " weight rows");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      schema_fail(origin, path, "weights and bias must be finite");
    }
    if (i > 0 && layer.weights.cols() != layers.back().weights.rows()) {
      schema_fail(origin, path + ".weights",
                  "expects input dimension " + std::to_string(layer.weights.cols()) +
                      " but the previous layer outputs " +
                      std::to_string(layers.back().weights.rows()));
    }
    layers.push_back(std::move(layer));
  }

  Eigen::MatrixXd output_metric;
  if (doc.contains("output_metric")) {
    output_metric = parse_matrix(origin, doc["output_metric"], "$.output_metric");
  }

  try {
    return NetworkSpec(std::move(layers), std::move(output_metric));
  } catch (const Error& e) {
    // Constructor-level violations (non-SPD metric, ...) are still schema
    // problems from the caller's point of view.
    fail(ErrorCode::Schema, origin + ": " + e.what());
  }
}

NetworkSpec load_network_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::Io, "cannot open \"" + path + "\" for reading");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_network_json(buffer.str(), path);
}

}  // namespace fibertrace
