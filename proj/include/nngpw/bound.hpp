#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nngpw/activation.hpp"
#include "nngpw/errors.hpp"
#include "nngpw/kernel.hpp"
#include "nngpw/network.hpp"
#include "nngpw/psd.hpp"
#include "nngpw/rng.hpp"

namespace nngpw {

inline constexpr std::size_t kDefaultMcSamples = 100'000;

namespace detail {

inline constexpr std::size_t kShardSize = 1u << 14;

/// Calls fn(rng) once per draw; draw d uses shard stream d / kShardSize, so
/// results do not depend on how shards would be distributed.
template <typename Fn>
void for_each_draw(std::size_t draws, SeedStream stream, Fn&& fn) {
  for (std::size_t shard = 0; shard * kShardSize < draws; ++shard) {
    Rng rng = stream.child(shard).rng();
    const std::size_t end = std::min(draws, (shard + 1) * kShardSize);
    for (std::size_t d = shard * kShardSize; d < end; ++d) fn(rng);
  }
}

/// Running mean and variance (Welford).
struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double standard_error() const { return std::sqrt(variance() / static_cast<double>(std::max<std::size_t>(count, 1))); }
};

inline Backend preferred_backend(const Activation& activation) {
  return activation.has_closed_form() ? Backend::closed_form : Backend::quadrature;
}

}  // namespace detail

inline nlohmann::json to_json_value(const NetworkConfig& config) {
  nlohmann::json variances = nlohmann::json::array();
  for (const auto& v : config.variances) variances.push_back({v.weight, v.bias});
  return {{"widths", config.widths},
          {"variances", variances},
          {"activation", config.activation.name()},
          {"lipschitz", config.activation.lipschitz()}};
}

/// FNV-1a over the canonical JSON of the architecture and the input set.
inline std::string config_hash(const NetworkConfig& config, const InputSet& inputs) {
  nlohmann::json j = to_json_value(config);
  std::vector<double> points(inputs.points.data(), inputs.points.data() + inputs.points.size());
  j["inputs"] = points;
  j["k"] = inputs.k();
  char buffer[24];
  std::snprintf(buffer, sizeof buffer, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(j.dump())));
  return buffer;
}

struct ConstantEstimate {
  double value = 0.0;           // C^(l+1)
  double standard_error = 0.0;  // delta method from the numerator
  double numerator = 0.0;       // E ||c_w sigma(G) (x) sigma(G) - K_0||_F^2
  double numerator_error = 0.0;
  double lambda_plus = 0.0;     // smallest strictly positive eigenvalue of K_0
};

/// Monte Carlo estimate of
///   C^(l+1) = sqrt(E ||c_w sigma(G) (x) sigma(G) - K_0^(l+1)||^2 / lambda_plus(K_0^(l+1))),
/// with G ~ N(K^(l)) in R^k and K_0^(l+1) computed exactly.
inline ConstantEstimate estimate_constant(const KernelMatrix& previous, const Activation& activation,
                                          double weight_variance, std::size_t mc_samples, SeedStream stream) {
  require(mc_samples >= 2, "estimate_constant needs at least two Monte Carlo samples");
  const KernelMatrix k0 = kernel_step_without_bias(previous, activation, weight_variance,
                                                   detail::preferred_backend(activation));
  ConstantEstimate out;
  out.lambda_plus = lambda_plus(k0.values);

  const Matrix root = sqrt_psd(previous.values);
  const Eigen::Index k = previous.k();
  Vector z(k);
  Vector features(k);
  detail::RunningMoments moments;
  detail::for_each_draw(mc_samples, stream, [&](Rng& rng) {
    rng.fill_normal(z);
    features = (root * z).unaryExpr([&](double g) { return activation(g); });
    moments.add((weight_variance * features * features.transpose() - k0.values).squaredNorm());
  });
  out.numerator = moments.mean;
  out.numerator_error = moments.standard_error();
  out.value = std::sqrt(out.numerator / out.lambda_plus);
  out.standard_error = out.value > 0.0 ? out.numerator_error / (2.0 * out.value * out.lambda_plus)
                                       : std::sqrt(out.numerator_error / out.lambda_plus);
  return out;
}

/// Right-hand side of the layer-l Wasserstein bound, term by term.
struct BoundBreakdown {
  int layer = 1;
  std::vector<double> constants;        // C^(2), ..., C^(l)
  std::vector<double> constant_errors;
  std::vector<double> terms;            // one per hidden layer i = 1, ..., l-1
  double total = 0.0;
  double total_error = 0.0;             // sum of |term coefficient| * stderr(C); valid under any correlation
  std::size_t mc_samples = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

inline void to_json(nlohmann::json& j, const BoundBreakdown& bound) {
  j = nlohmann::json{{"config_hash", bound.config_hash},
                     {"layer", bound.layer},
                     {"constants", bound.constants},
                     {"constant_errors", bound.constant_errors},
                     {"terms", bound.terms},
                     {"total", bound.total},
                     {"total_error", bound.total_error},
                     {"mc_samples", bound.mc_samples},
                     {"seed", bound.seed}};
}

namespace detail {

/// sqrt(n_l) * sum_i C^(i+1) Lip^(l-i-1) sqrt(prod_{j=i+1}^{l-1} c_w^(j)) / sqrt(n_i).
inline BoundBreakdown assemble_bound(const NetworkConfig& config, int layer,
                                     const std::vector<ConstantEstimate>& constants) {
  BoundBreakdown bound;
  bound.layer = layer;
  const double lip = config.activation.lipschitz();
  const double sqrt_out = std::sqrt(static_cast<double>(config.widths[static_cast<std::size_t>(layer)]));
  for (int i = 1; i < layer; ++i) {
    const ConstantEstimate& c = constants[static_cast<std::size_t>(i - 1)];
    double weight_product = 1.0;
    for (int j = i + 1; j < layer; ++j) weight_product *= config.variances[static_cast<std::size_t>(j)].weight;
    const double coefficient = sqrt_out * std::pow(lip, layer - i - 1) * std::sqrt(weight_product) /
                               std::sqrt(static_cast<double>(config.widths[static_cast<std::size_t>(i)]));
    bound.constants.push_back(c.value);
    bound.constant_errors.push_back(c.standard_error);
    bound.terms.push_back(coefficient * c.value);
    bound.total += coefficient * c.value;
    bound.total_error += coefficient * c.standard_error;
  }
  return bound;
}

/// C^(2), ..., C^(last) from a kernel chain. Every layer reuses the same
/// draw stream (common random numbers), so C^(i+1) does not depend on the
/// depth it is requested for.
inline std::vector<ConstantEstimate> chain_constants(const NetworkConfig& config,
                                                     const std::vector<KernelMatrix>& chain, int last,
                                                     std::size_t mc_samples, SeedStream stream) {
  std::vector<ConstantEstimate> constants;
  for (int i = 1; i < last; ++i) {
    constants.push_back(estimate_constant(chain[static_cast<std::size_t>(i - 1)], config.activation,
                                          config.variances[static_cast<std::size_t>(i)].weight, mc_samples,
                                          stream.child("constants")));
  }
  return constants;
}

}  // namespace detail

/// Evaluates the bound at `layer` (default: the output layer L).
inline BoundBreakdown rhs_bound(const NetworkConfig& config, const InputSet& inputs, std::size_t mc_samples,
                                SeedStream stream, std::optional<int> layer = std::nullopt) {
  config.validate();
  inputs.validate();
  const int target = layer.value_or(config.depth());
  require(target >= 1 && target <= config.depth(), "bound layer must lie in 1..L");
  const auto chain = kernel_chain(config, inputs, detail::preferred_backend(config.activation));
  const auto constants = detail::chain_constants(config, chain, target, mc_samples, stream);
  BoundBreakdown bound = detail::assemble_bound(config, target, constants);
  bound.mc_samples = mc_samples;
  bound.seed = stream.key();
  bound.config_hash = config_hash(config, inputs);
  return bound;
}

/// Constant-width family of networks indexed by depth.
struct DepthTemplate {
  int width = 32;
  int output_width = 1;
  LayerVariance variance;
  Activation activation = Activation::relu();
  InputSet inputs;

  NetworkConfig at_depth(int depth) const {
    return NetworkConfig::uniform(static_cast<int>(inputs.dim()), width, depth, output_width, variance, activation);
  }
};

struct DepthProfile {
  std::vector<int> depths;
  std::vector<double> totals;
  std::vector<double> total_errors;
  double geometric_factor = 0.0;  // Lip * sqrt(c_w): per-layer weight of older terms
  bool numerically_bounded = false;  // last increment < 1e-3 * last total
};

/// Bound totals across depths; identical to calling rhs_bound per depth.
inline DepthProfile deep_limit_profile(const DepthTemplate& family, const std::vector<int>& depths,
                                       std::size_t mc_samples, SeedStream stream) {
  require(!depths.empty(), "deep_limit_profile needs at least one depth");
  int max_depth = 1;
  for (const int d : depths) {
    require(d >= 1, "depths must be >= 1");
    max_depth = std::max(max_depth, d);
  }
  const NetworkConfig deepest = family.at_depth(max_depth);
  deepest.validate();
  const auto chain = kernel_chain(deepest, family.inputs, detail::preferred_backend(family.activation));
  const auto constants = detail::chain_constants(deepest, chain, max_depth, mc_samples, stream);

  DepthProfile profile;
  profile.geometric_factor = family.activation.lipschitz() * std::sqrt(family.variance.weight);
  for (const int d : depths) {
    const BoundBreakdown bound = detail::assemble_bound(family.at_depth(d), d, constants);
    profile.depths.push_back(d);
    profile.totals.push_back(bound.total);
    profile.total_errors.push_back(bound.total_error);
  }
  if (profile.totals.size() >= 2) {
    const double last = profile.totals.back();
    const double increment = last - profile.totals[profile.totals.size() - 2];
    profile.numerically_bounded = std::abs(increment) < 1e-3 * last;
  }
  return profile;
}

/// Source of i.i.d. vectors in R^k for the square-root concentration check.
struct VectorSampler {
  std::string name;
  Eigen::Index dim = 1;
  std::function<void(Rng&, Vector&)> draw;
  std::optional<Matrix> second_moment;  // E[X (x) X] when known in closed form
  std::optional<double> spread;         // E||X (x) X - M||_F^2 when known

  static VectorSampler gaussian(const Matrix& covariance) {
    const Matrix root = sqrt_psd(covariance);
    VectorSampler s;
    s.name = "gaussian";
    s.dim = covariance.rows();
    s.draw = [root, z = Vector(covariance.rows())](Rng& rng, Vector& out) mutable {
      rng.fill_normal(z);
      out = root * z;
    };
    s.second_moment = symmetrize(covariance);
    // Isserlis: E||XX^T||^2 = (tr K)^2 + 2||K||^2.
    s.spread = covariance.trace() * covariance.trace() + covariance.squaredNorm();
    return s;
  }

  static VectorSampler activated_gaussian(const Matrix& covariance, const Activation& activation) {
    const Matrix root = sqrt_psd(covariance);
    VectorSampler s;
    s.name = activation.name() + "_gaussian";
    s.dim = covariance.rows();
    s.draw = [root, activation, z = Vector(covariance.rows())](Rng& rng, Vector& out) mutable {
      rng.fill_normal(z);
      out = (root * z).unaryExpr([&](double g) { return activation(g); });
    };
    if (activation.has_closed_form()) {
      KernelMatrix previous{1, covariance, true};
      s.second_moment = kernel_step_without_bias(previous, activation, 1.0, Backend::closed_form).values;
    }
    return s;
  }

  static VectorSampler constant(const Vector& value) {
    VectorSampler s;
    s.name = "constant";
    s.dim = value.size();
    s.draw = [value](Rng&, Vector& out) { out = value; };
    s.second_moment = value * value.transpose();
    s.spread = 0.0;
    return s;
  }
};

struct LemmaCheck {
  double lhs = 0.0;             // E ||sqrt(M_n) - sqrt(M)||_F^2
  double lhs_error = 0.0;
  double rhs = 0.0;             // E ||X (x) X - M||_F^2 / (n lambda_plus(M))
  double lambda_plus = 0.0;
  bool margin_ok = false;       // lhs <= rhs + 3 stderr(lhs)
};

inline constexpr std::size_t kDefaultMomentSamples = 10'000'000;

/// Monte Carlo check of the square-root concentration inequality for the
/// empirical second moment M_n of n i.i.d. draws.
inline LemmaCheck lemma_sqrt_check(const VectorSampler& sampler, int n, std::size_t mc_outer, SeedStream stream,
                                   std::size_t moment_samples = kDefaultMomentSamples) {
  require(n >= 1 && mc_outer >= 2, "lemma_sqrt_check needs n >= 1 and mc_outer >= 2");
  const Eigen::Index k = sampler.dim;
  Vector x(k);

  Matrix second_moment;
  if (sampler.second_moment) {
    second_moment = *sampler.second_moment;
  } else {
    second_moment = Matrix::Zero(k, k);
    detail::for_each_draw(moment_samples, stream.child("moment"), [&](Rng& rng) {
      sampler.draw(rng, x);
      second_moment.noalias() += x * x.transpose();
    });
    second_moment /= static_cast<double>(moment_samples);
  }
  second_moment = symmetrize(second_moment);

  double spread = 0.0;
  if (sampler.spread) {
    spread = *sampler.spread;
  } else {
    detail::RunningMoments moments;
    detail::for_each_draw(moment_samples, stream.child("spread"), [&](Rng& rng) {
      sampler.draw(rng, x);
      moments.add((x * x.transpose() - second_moment).squaredNorm());
    });
    spread = moments.mean;
  }

  LemmaCheck out;
  out.lambda_plus = lambda_plus(second_moment);
  out.rhs = spread / (static_cast<double>(n) * out.lambda_plus);

  const Matrix root = sqrt_psd(second_moment);
  detail::RunningMoments lhs;
  Matrix empirical(k, k);
  for (std::size_t outer = 0; outer < mc_outer; ++outer) {
    Rng rng = stream.child("outer").child(outer).rng();
    empirical.setZero();
    for (int i = 0; i < n; ++i) {
      sampler.draw(rng, x);
      empirical.noalias() += x * x.transpose();
    }
    empirical /= static_cast<double>(n);
    lhs.add((sqrt_psd(empirical) - root).squaredNorm());
  }
  out.lhs = lhs.mean;
  out.lhs_error = lhs.standard_error();
  out.margin_ok = out.lhs <= out.rhs + 3.0 * out.lhs_error;
  return out;
}

/// A_bar[j1, j2] = (c_w / n_l) sum_m A[m, j1] A[m, j2].
inline Matrix wa_expected_covariance(const Matrix& a, double weight_variance) {
  return symmetrize(weight_variance / static_cast<double>(a.rows()) * (a.transpose() * a));
}

/// Largest deviation, in standard-error units, between Monte Carlo moments
/// of (W (x) Id_k) A and their closed forms Id (x) A_bar and
/// (c_w n_next / n_l) ||A||^2.
inline double wa_covariance_check(const Matrix& a, double weight_variance, int next_width,
                                  std::size_t mc_samples, SeedStream stream) {
  require(a.allFinite() && a.rows() >= 1 && a.cols() >= 1, "wa_covariance_check: A must be finite");
  require(next_width >= 1 && mc_samples >= 2 && weight_variance > 0.0, "wa_covariance_check: bad arguments");
  const Eigen::Index n_in = a.rows();
  const Eigen::Index k = a.cols();
  const Eigen::Index dim = next_width * k;
  const Matrix expected = kron_identity(next_width, wa_expected_covariance(a, weight_variance));
  const double expected_norm = weight_variance * next_width / static_cast<double>(n_in) * a.squaredNorm();

  Matrix sum = Matrix::Zero(dim, dim);
  Matrix sum_sq = Matrix::Zero(dim, dim);
  detail::RunningMoments norm;
  Matrix w(next_width, n_in);
  const double scale = std::sqrt(weight_variance / static_cast<double>(n_in));
  detail::for_each_draw(mc_samples, stream, [&](Rng& rng) {
    rng.fill_normal(w);
    const Matrix y = scale * w * a;
    const Eigen::RowVectorXd flat = flatten(y);
    const Matrix outer = flat.transpose() * flat;
    sum += outer;
    sum_sq += outer.cwiseProduct(outer);
    norm.add(y.squaredNorm());
  });

  const auto m = static_cast<double>(mc_samples);
  double worst = 0.0;
  auto score = [&](double estimate, double truth, double error) {
    const double gap = std::abs(estimate - truth);
    if (error > 0.0) return gap / error;
    return gap <= 1e-12 * std::max(1.0, std::abs(truth)) ? 0.0 : std::numeric_limits<double>::infinity();
  };
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double mean = sum(i, j) / m;
      const double variance = std::max(0.0, (sum_sq(i, j) / m - mean * mean) * m / (m - 1.0));
      worst = std::max(worst, score(mean, expected(i, j), std::sqrt(variance / m)));
    }
  }
  worst = std::max(worst, score(norm.mean, expected_norm, norm.standard_error()));
  return worst;
}

}  // namespace nngpw
