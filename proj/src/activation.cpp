#include "fibertrace/activation.hpp"

#include <cmath>

#include "fibertrace/error.hpp"

namespace fibertrace {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::Identity:
      return x;
    case Activation::Sigmoid:
      return stable_sigmoid(x);
    case Activation::Softplus:
      // max(x,0) + log1p(e^{-|x|}) never overflows and equals x to full
      // precision once x is large.
      return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    case Activation::Tanh:
      return std::tanh(x);
  }
  fail(ErrorCode::Internal, "unknown activation kind");
}

double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::Identity:
      return 1.0;
    case Activation::Sigmoid:
      // sigma(x) * sigma(-x); 1 - sigma(x) would round to zero near x ~ 37.
      return stable_sigmoid(x) * stable_sigmoid(-x);
    case Activation::Softplus:
      return stable_sigmoid(x);
    case Activation::Tanh: {
      // sech^2(x); 1 - tanh^2 cancels to zero already around |x| ~ 19.
      const double e = std::exp(-std::abs(x));
      const double sech = 2.0 * e / (1.0 + e * e);
      return sech * sech;
    }
  }
  fail(ErrorCode::Internal, "unknown activation kind");
}

const char* to_string(Activation kind) {
  switch (kind) {
    case Activation::Identity:
      return "identity";
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Softplus:
      return "softplus";
    case Activation::Tanh:
      return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softplus") return Activation::Softplus;
  if (name == "tanh") return Activation::Tanh;
  fail(ErrorCode::Schema,
       "unknown activation \"" + name + "\" (expected identity|sigmoid|softplus|tanh)");
}

}  // namespace fibertrace
