#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nngpw/activation.hpp"
#include "nngpw/errors.hpp"
#include "nngpw/network.hpp"
#include "nngpw/psd.hpp"
#include "nngpw/quadrature.hpp"

namespace nngpw {

/// Limit covariance K^(l)[X] over k inputs.
///
/// bias_included is false for the bias-free variant K_0^(l) used by the
/// bound constants.
struct KernelMatrix {
  int layer = 1;
  Matrix values;
  bool bias_included = true;

  Eigen::Index k() const { return values.rows(); }
};

/// Second moments (q_xx, q_xy, q_yy) of a centred Gaussian pair.
struct BivariateMoment {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  void validate() const {
    const double scale = std::max(1.0, std::abs(xx * yy));
    if (!(xx >= 0.0) || !(yy >= 0.0) || !(xy * xy <= xx * yy + 1e-12 * scale) || !std::isfinite(xy))
      throw NotPsdError("bivariate moment is not positive semi-definite");
  }
};

enum class Backend { closed_form, quadrature };

inline std::string to_string(Backend backend) {
  return backend == Backend::closed_form ? "closed_form" : "quadrature";
}

inline Backend backend_from_string(const std::string& text) {
  if (text == "closed_form") return Backend::closed_form;
  if (text == "quadrature") return Backend::quadrature;
  throw ConfigError("unknown kernel backend '" + text + "'");
}

inline constexpr int kDefaultQuadratureOrder = 64;

/// Arc-cosine form of E[relu(u) relu(v)].
inline double relu_pair_closed_form(const BivariateMoment& m) {
  const double scale = std::sqrt(m.xx * m.yy);
  if (scale == 0.0) return 0.0;
  const double cos_theta = std::clamp(m.xy / scale, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  return scale / (2.0 * std::numbers::pi) *
         (std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta)) +
          (std::numbers::pi - theta) * cos_theta);
}

namespace detail {

/// Zeroes a marginal whose variance is negligible relative to the other.
inline BivariateMoment drop_degenerate_marginals(BivariateMoment m) {
  const double cutoff = 1e-14 * std::max(m.xx, m.yy);
  if (m.xx <= cutoff) m.xx = m.xy = 0.0;
  if (m.yy <= cutoff) m.yy = m.xy = 0.0;
  return m;
}

inline double quadrature_pair_expectation(const BivariateMoment& m, const Activation& activation,
                                          int order) {
  Eigen::Matrix2d cov;
  cov << m.xx, m.xy, m.xy, m.yy;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
  const Eigen::Vector2d roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Matrix2d root = solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
  const double u0 = root(0, 0), u1 = root(0, 1), v0 = root(1, 0), v1 = root(1, 1);

  // Rays on which u or v changes sign.
  std::vector<double> breakpoints;
  for (const auto& [a, b] : {std::pair{u0, u1}, std::pair{v0, v1}}) {
    if (a == 0.0 && b == 0.0) continue;
    const double angle = std::atan2(-a, b);
    breakpoints.push_back(angle);
    breakpoints.push_back(angle + std::numbers::pi);
  }
  return polar_rule(order).expectation(
      [&](double z0, double z1) { return activation(u0 * z0 + u1 * z1) * activation(v0 * z0 + v1 * z1); },
      std::move(breakpoints));
}

}  // namespace detail

/// E[sigma(u) sigma(v)] for (u, v) centred Gaussian with second moments m.
inline double gaussian_pair_expectation(const BivariateMoment& moment, const Activation& activation,
                                        Backend backend, int order = kDefaultQuadratureOrder) {
  moment.validate();
  const BivariateMoment m = detail::drop_degenerate_marginals(moment);
  if (backend == Backend::closed_form) {
    switch (activation.kind()) {
      case ActivationKind::identity: return m.xy;
      case ActivationKind::relu: return relu_pair_closed_form(m);
      default:
        throw ConfigError("no closed form for activation '" + activation.name() + "'");
    }
  }
  return detail::quadrature_pair_expectation(m, activation, order);
}

/// K^(1)[x_i, x_j] = (c_w / n_0) <x_i, x_j> + c_b.
inline KernelMatrix kernel_base(const InputSet& inputs, double weight_variance, double bias_variance) {
  inputs.validate();
  require(weight_variance > 0.0 && bias_variance >= 0.0, "kernel_base: invalid variances");
  KernelMatrix kernel;
  kernel.layer = 1;
  kernel.bias_included = true;
  kernel.values = (weight_variance / static_cast<double>(inputs.dim())) *
                      (inputs.points.transpose() * inputs.points) +
                  Matrix::Constant(inputs.k(), inputs.k(), bias_variance);
  kernel.values = symmetrize(kernel.values);
  return kernel;
}

namespace detail {

inline KernelMatrix kernel_step_impl(const KernelMatrix& previous, const Activation& activation,
                                     double weight_variance, double bias_variance, Backend backend,
                                     int order) {
  require(weight_variance > 0.0 && bias_variance >= 0.0, "kernel_step: invalid variances");
  require(previous.bias_included, "kernel_step expects a kernel that includes the bias term");
  check_psd(previous.values, kPsdTolerance, "kernel_step input");
  const Eigen::Index k = previous.k();
  Matrix next(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      BivariateMoment m{previous.values(i, i), previous.values(i, j), previous.values(j, j)};
      // Round-off can push a 2x2 minor a hair outside the PSD cone.
      const double bound = std::sqrt(std::max(0.0, m.xx * m.yy));
      m.xy = std::clamp(m.xy, -bound, bound);
      next(i, j) = weight_variance * gaussian_pair_expectation(m, activation, backend, order) + bias_variance;
      next(j, i) = next(i, j);
    }
  }
  KernelMatrix out;
  out.layer = previous.layer + 1;
  out.values = symmetrize(next);
  check_psd(out.values, kPsdTolerance, "kernel_step output");
  return out;
}

}  // namespace detail

/// K^(l+1) = c_w E[sigma(G) (x) sigma(G)] + c_b, G ~ N(K^(l)).
inline KernelMatrix kernel_step(const KernelMatrix& previous, const Activation& activation,
                                double weight_variance, double bias_variance, Backend backend,
                                int order = kDefaultQuadratureOrder) {
  KernelMatrix out =
      detail::kernel_step_impl(previous, activation, weight_variance, bias_variance, backend, order);
  out.bias_included = true;
  return out;
}

/// K_0^(l+1) = c_w E[sigma(G) (x) sigma(G)]: the step without the bias shift.
inline KernelMatrix kernel_step_without_bias(const KernelMatrix& previous, const Activation& activation,
                                             double weight_variance, Backend backend,
                                             int order = kDefaultQuadratureOrder) {
  KernelMatrix out = detail::kernel_step_impl(previous, activation, weight_variance, 0.0, backend, order);
  out.bias_included = false;
  return out;
}

/// K^(1), ..., K^(L). The k x k kernels do not depend on the widths.
inline std::vector<KernelMatrix> kernel_chain(const NetworkConfig& config, const InputSet& inputs,
                                              Backend backend, int order = kDefaultQuadratureOrder) {
  config.validate();
  require(inputs.dim() == config.input_dim(), "input dimension does not match n_0");
  std::vector<KernelMatrix> chain;
  chain.reserve(static_cast<std::size_t>(config.depth()));
  chain.push_back(kernel_base(inputs, config.variances[0].weight, config.variances[0].bias));
  for (int l = 1; l < config.depth(); ++l) {
    const auto& v = config.variances[static_cast<std::size_t>(l)];
    chain.push_back(kernel_step(chain.back(), config.activation, v.weight, v.bias, backend, order));
  }
  return chain;
}

inline void to_json(nlohmann::json& j, const KernelMatrix& kernel) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(kernel.values.size()));
  for (Eigen::Index r = 0; r < kernel.k(); ++r)
    for (Eigen::Index c = 0; c < kernel.k(); ++c) values.push_back(kernel.values(r, c));
  j = nlohmann::json{{"layer", kernel.layer},
                     {"k", kernel.k()},
                     {"bias_included", kernel.bias_included},
                     {"values", values}};
}

inline void from_json(const nlohmann::json& j, KernelMatrix& kernel) {
  const auto k = j.at("k").get<Eigen::Index>();
  const auto values = j.at("values").get<std::vector<double>>();
  require(k >= 1 && static_cast<Eigen::Index>(values.size()) == k * k, "kernel JSON: values must hold k*k entries");
  kernel.layer = j.at("layer").get<int>();
  kernel.bias_included = j.at("bias_included").get<bool>();
  kernel.values.resize(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c) kernel.values(r, c) = values[static_cast<std::size_t>(r * k + c)];
}

}  // namespace nngpw
