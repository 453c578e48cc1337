#pragma once

#include <string>

namespace fibertrace {

/// Componentwise activation functions. Every kind is a smooth diffeomorphism
/// of the real line onto its image with strictly positive derivative, which is
/// what the layer maps require.
enum class Activation {
  Identity,
  Sigmoid,
  Softplus,
  Tanh,
};

double activate(Activation kind, double x);

/// Derivative of `activate`. Formulated so the result stays strictly positive
/// deep into the tails instead of rounding to zero (sigmoid'(x) as
/// sigma(x)*sigma(-x), tanh'(x) as sech^2 from exp(-|x|)).
double activate_derivative(Activation kind, double x);

const char* to_string(Activation kind);

/// Parses "identity" | "sigmoid" | "softplus" | "tanh"; throws Schema otherwise.
Activation activation_from_string(const std::string& name);

}  // namespace fibertrace
