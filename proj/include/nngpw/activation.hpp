#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "nngpw/errors.hpp"

namespace nngpw {

enum class ActivationKind { relu, identity, tanh, custom };

inline std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::identity: return "identity";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::custom: return "custom";
  }
  return "unknown";
}

/// Pointwise activation together with its Lipschitz constant.
///
/// The constant is supplied, never inferred from samples; validate() only
/// checks that the supplied value is not contradicted on a fine grid.
class Activation {
 public:
  static Activation relu() { return Activation(ActivationKind::relu, "relu", 1.0, nullptr); }
  static Activation identity() {
    return Activation(ActivationKind::identity, "identity", 1.0, nullptr);
  }
  static Activation tanh() { return Activation(ActivationKind::tanh, "tanh", 1.0, nullptr); }
  static Activation custom(std::string name, std::function<double(double)> fn, double lipschitz) {
    require(static_cast<bool>(fn), "custom activation needs a callable");
    return Activation(ActivationKind::custom, std::move(name), lipschitz,
                      std::make_shared<std::function<double(double)>>(std::move(fn)));
  }

  /// Builds one of the named activations ("relu", "identity", "tanh").
  static Activation from_name(const std::string& name) {
    if (name == "relu") return relu();
    if (name == "identity") return identity();
    if (name == "tanh") return tanh();
    throw ConfigError("unknown activation '" + name + "'");
  }

  double operator()(double z) const {
    switch (kind_) {
      case ActivationKind::relu: return z > 0.0 ? z : 0.0;
      case ActivationKind::identity: return z;
      case ActivationKind::tanh: return std::tanh(z);
      case ActivationKind::custom: return (*fn_)(z);
    }
    return 0.0;
  }

  ActivationKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double lipschitz() const { return lipschitz_; }
  bool has_closed_form() const {
    return kind_ == ActivationKind::relu || kind_ == ActivationKind::identity;
  }

 private:
  Activation(ActivationKind kind, std::string name, double lipschitz,
             std::shared_ptr<const std::function<double(double)>> fn)
      : kind_(kind), name_(std::move(name)), lipschitz_(lipschitz), fn_(std::move(fn)) {}

  ActivationKind kind_;
  std::string name_;
  double lipschitz_;
  std::shared_ptr<const std::function<double(double)>> fn_;
};

/// Checks the Lipschitz constant and non-triviality on 10^5 points of [-10, 10].
inline void validate(const Activation& activation) {
  require(activation.lipschitz() > 0.0 && std::isfinite(activation.lipschitz()),
          "activation Lipschitz constant must be positive and finite");
  if (activation.kind() == ActivationKind::relu || activation.kind() == ActivationKind::identity)
    require(activation.lipschitz() == 1.0, "relu and identity have Lipschitz constant 1");

  constexpr int kGrid = 100000;
  constexpr double kLo = -10.0;
  constexpr double kStep = 20.0 / (kGrid - 1);
  bool nonzero = false;
  double previous = activation(kLo);
  for (int i = 1; i < kGrid; ++i) {
    const double value = activation(kLo + i * kStep);
    require(std::isfinite(value), "activation '" + activation.name() + "' is not finite on the grid");
    if (std::abs(value - previous) > activation.lipschitz() * kStep + 1e-12)
      throw ConfigError("activation '" + activation.name() + "' violates its Lipschitz constant");
    nonzero = nonzero || value != 0.0 || previous != 0.0;
    previous = value;
  }
  require(nonzero, "activation '" + activation.name() + "' vanishes identically");
}

}  // namespace nngpw
