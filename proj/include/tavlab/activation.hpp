// Hidden-layer activations with their first/second-derivative sup bounds.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace tavlab {

// `identity` marks the linear output layer; hidden layers use the other three.
enum class Activation { relu, sigmoid, tanh, identity };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  throw std::logic_error("unknown activation");
}

inline Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation: " + name);
}

// sup |phi'|
inline double beta_phi(Activation a) {
  switch (a) {
    case Activation::relu: return 1.0;
    case Activation::sigmoid: return 0.25;
    case Activation::tanh: return 1.0;
    case Activation::identity: return 1.0;
  }
  throw std::logic_error("unknown activation");
}

// sup |phi''|
inline double gamma_phi(Activation a) {
  switch (a) {
    case Activation::relu: return 0.0;
    case Activation::sigmoid: return 1.0 / (6.0 * std::sqrt(3.0));
    case Activation::tanh: return 4.0 / (3.0 * std::sqrt(3.0));
    case Activation::identity: return 0.0;
  }
  throw std::logic_error("unknown activation");
}

struct ActivationValue {
  double value;
  double d1;
  double d2;
};

// Value and first two derivatives. relu uses phi'(0) = 0, phi'' = 0
// everywhere by convention.
inline ActivationValue activation_eval(Activation a, double z) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? ActivationValue{z, 1.0, 0.0} : ActivationValue{0.0, 0.0, 0.0};
    case Activation::sigmoid: {
      const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                : std::exp(z) / (1.0 + std::exp(z));
      const double d1 = s * (1.0 - s);
      return {s, d1, d1 * (1.0 - 2.0 * s)};
    }
    case Activation::tanh: {
      const double t = std::tanh(z);
      const double d1 = 1.0 - t * t;
      return {t, d1, -2.0 * t * d1};
    }
    case Activation::identity:
      return {z, 1.0, 0.0};
  }
  throw std::logic_error("unknown activation");
}

}  // namespace tavlab
