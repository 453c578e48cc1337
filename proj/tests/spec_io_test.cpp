#include <doctest.h>

#include <string>

#include "fibertrace/error.hpp"
#include "fibertrace/spec_io.hpp"
#include "test_util.hpp"

using namespace fibertrace;

namespace {

std::string schema_message(const std::string& json_text) {
  try {
    load_network_json(json_text, "doc");
    return "";
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::Schema);
    return e.what();
  }
}

}  // namespace

TEST_CASE("all shipped fixtures load") {
  REQUIRE(ftest::load_fixture("linear_map_3to2.json").num_layers() == 1);
  REQUIRE(ftest::load_fixture("softplus_2_2_1.json").num_layers() == 2);
  REQUIRE(ftest::load_fixture("softplus_2_1_1.json").num_layers() == 2);
  REQUIRE(ftest::load_fixture("identity_2_2.json").num_layers() == 1);

  const NetworkSpec net = ftest::load_fixture("softplus_2_2_1.json");
  REQUIRE(net.dim(0) == 2);
  REQUIRE(net.dim(1) == 2);
  REQUIRE(net.dim(2) == 1);
  REQUIRE(net.layer(1).activation == Activation::Softplus);
  REQUIRE(net.output_metric() == Eigen::MatrixXd::Identity(1, 1));
}

TEST_CASE("default output metric is the identity") {
  const NetworkSpec net = load_network_json(
      R"({"layers":[{"activation":"tanh","weights":[[1,2]],"bias":[0]}]})");
  REQUIRE(net.output_metric() == Eigen::MatrixXd::Identity(1, 1));
  REQUIRE(net.output_metric_sqrt() == Eigen::MatrixXd::Identity(1, 1));
}

TEST_CASE("malformed documents report parser positions") {
  const std::string msg = schema_message("{\"layers\": [");
  REQUIRE(msg.find("doc") != std::string::npos);
  REQUIRE(msg.find("line") != std::string::npos);
}

TEST_CASE("missing fields are reported with their path") {
  const std::string msg =
      schema_message(R"({"layers":[{"activation":"tanh","weights":[[1]]}]})");
  REQUIRE(msg.find("$.layers[0]") != std::string::npos);
  REQUIRE(msg.find("bias") != std::string::npos);
}

TEST_CASE("unknown activation names are rejected in place") {
  const std::string msg = schema_message(
      R"({"layers":[{"activation":"relu","weights":[[1]],"bias":[0]}]})");
  REQUIRE(msg.find("$.layers[0].activation") != std::string::npos);
  REQUIRE(msg.find("relu") != std::string::npos);
}

TEST_CASE("ragged weight rows are rejected with the offending row") {
  const std::string msg = schema_message(
      R"({"layers":[{"activation":"tanh","weights":[[1,2],[3]],"bias":[0,0]}]})");
  REQUIRE(msg.find("$.layers[0].weights[1]") != std::string::npos);
}

TEST_CASE("non-numeric entries are rejected with the offending element") {
  const std::string msg = schema_message(
      R"({"layers":[{"activation":"tanh","weights":[[1,"x"]],"bias":[0]}]})");
  REQUIRE(msg.find("$.layers[0].weights[0][1]") != std::string::npos);
}

TEST_CASE("unknown keys are named") {
  const std::string top = schema_message(R"({"layers":[],"extra":1})");
  REQUIRE(top.find("extra") != std::string::npos);
  const std::string nested = schema_message(
      R"({"layers":[{"activation":"tanh","weights":[[1]],"bias":[0],"dropout":0.5}]})");
  REQUIRE(nested.find("dropout") != std::string::npos);
  REQUIRE(nested.find("$.layers[0]") != std::string::npos);
}

TEST_CASE("bias length must match the weight rows") {
  const std::string msg = schema_message(
      R"({"layers":[{"activation":"tanh","weights":[[1],[2]],"bias":[0]}]})");
  REQUIRE(msg.find("$.layers[0].bias") != std::string::npos);
}

TEST_CASE("chained dimensions must match") {
  const std::string msg = schema_message(R"({"layers":[
      {"activation":"tanh","weights":[[1,2]],"bias":[0]},
      {"activation":"tanh","weights":[[1,2]],"bias":[0]}]})");
  REQUIRE(msg.find("$.layers[1].weights") != std::string::npos);
}

TEST_CASE("empty layer arrays are rejected") {
  const std::string msg = schema_message(R"({"layers":[]})");
  REQUIRE(msg.find("$.layers") != std::string::npos);
}

TEST_CASE("top level must be an object") {
  const std::string msg = schema_message(R"([1,2,3])");
  REQUIRE(msg.find("top level") != std::string::npos);
}

TEST_CASE("output metric violations are schema errors") {
  const std::string asym = schema_message(R"({"layers":[
      {"activation":"tanh","weights":[[1,0],[0,1]],"bias":[0,0]}],
      "output_metric":[[1,0.5],[0,1]]})");
  REQUIRE(asym.find("symmetric") != std::string::npos);

  const std::string indefinite = schema_message(R"({"layers":[
      {"activation":"tanh","weights":[[1,0],[0,1]],"bias":[0,0]}],
      "output_metric":[[1,0],[0,-2]]})");
  REQUIRE(indefinite.find("positive") != std::string::npos);

  const std::string wrong_size = schema_message(R"({"layers":[
      {"activation":"tanh","weights":[[1,0],[0,1]],"bias":[0,0]}],
      "output_metric":[[1]]})");
  REQUIRE(wrong_size.find("2x2") != std::string::npos);
}

TEST_CASE("NaN and Inf literals cannot sneak in") {
  // JSON has no NaN literal, but huge exponents produce Inf after parsing
  const std::string msg = schema_message(
      R"({"layers":[{"activation":"tanh","weights":[[1e999]],"bias":[0]}]})");
  REQUIRE(!msg.empty());
}

TEST_CASE("missing files surface as Io errors") {
  try {
    load_network_file(ftest::fixture_path("does_not_exist.json"));
    REQUIRE(false);
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::Io);
  }
}
