#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "nngpw/activation.hpp"
#include "nngpw/errors.hpp"
#include "nngpw/rng.hpp"
#include "nngpw/samples.hpp"

namespace nngpw {

/// Weight and bias variance pair (c_w, c_b) of one layer.
struct LayerVariance {
  double weight = 1.0;
  double bias = 0.0;
};

/// Fully connected architecture: widths (n_0, ..., n_L) and one variance
/// pair per weight layer.
struct NetworkConfig {
  std::vector<int> widths;
  std::vector<LayerVariance> variances;
  Activation activation = Activation::relu();

  int depth() const { return static_cast<int>(widths.size()) - 1; }
  int input_dim() const { return widths.front(); }
  int output_width() const { return widths.back(); }

  void validate() const {
    require(widths.size() >= 2, "network needs depth L >= 1");
    require(variances.size() + 1 == widths.size(), "need exactly one variance pair per layer");
    for (const int n : widths) require(n >= 1, "layer widths must be >= 1");
    for (const auto& v : variances) {
      require(v.weight > 0.0 && std::isfinite(v.weight), "weight variance must be positive");
      require(v.bias >= 0.0 && std::isfinite(v.bias), "bias variance must be non-negative");
    }
    nngpw::validate(activation);
  }

  /// n_0 -> hidden x (depth - 1) -> n_out, with the same variances everywhere.
  static NetworkConfig uniform(int input_dim, int hidden, int depth, int output_width,
                               LayerVariance variance, Activation activation) {
    NetworkConfig config;
    config.widths.push_back(input_dim);
    for (int l = 1; l < depth; ++l) config.widths.push_back(hidden);
    config.widths.push_back(output_width);
    config.variances.assign(static_cast<std::size_t>(depth), variance);
    config.activation = std::move(activation);
    return config;
  }
};

/// k inputs stored as the columns of an n_0 x k matrix.
struct InputSet {
  Matrix points;

  Eigen::Index k() const { return points.cols(); }
  Eigen::Index dim() const { return points.rows(); }

  void validate() const {
    require(points.rows() >= 1 && points.cols() >= 1, "input set needs n_0 >= 1 and k >= 1");
    require(points.allFinite(), "input set contains non-finite entries");
  }

  /// k points uniform on the unit sphere of R^{n_0}.
  static InputSet on_sphere(int input_dim, int k, SeedStream stream) {
    require(input_dim >= 1 && k >= 1, "sphere inputs need n_0 >= 1 and k >= 1");
    Rng rng = stream.rng();
    InputSet inputs{Matrix(input_dim, k)};
    for (int j = 0; j < k; ++j) {
      double norm = 0.0;
      do {
        for (int i = 0; i < input_dim; ++i) inputs.points(i, j) = rng.normal();
        norm = inputs.points.col(j).norm();
      } while (norm == 0.0);
      inputs.points.col(j) /= norm;
    }
    return inputs;
  }
};

/// One realization of all weights W^(l) (n_{l+1} x n_l) and biases b^(l).
struct ParamDraw {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// f^(1)[X], ..., f^(L)[X], each n_l x k.
struct LayerOutputs {
  std::vector<Matrix> layers;

  const Matrix& final_layer() const { return layers.back(); }
};

inline ParamDraw sample_params(const NetworkConfig& config, SeedStream stream) {
  ParamDraw params;
  const int depth = config.depth();
  params.weights.reserve(static_cast<std::size_t>(depth));
  params.biases.reserve(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    const int fan_in = config.widths[static_cast<std::size_t>(l)];
    const int fan_out = config.widths[static_cast<std::size_t>(l) + 1];
    const auto& variance = config.variances[static_cast<std::size_t>(l)];

    Matrix w(fan_out, fan_in);
    Rng weight_rng = stream.child("weights").child(static_cast<std::uint64_t>(l)).rng();
    weight_rng.fill_normal(w);
    w *= std::sqrt(variance.weight / fan_in);

    Vector b = Vector::Zero(fan_out);
    if (variance.bias > 0.0) {
      Rng bias_rng = stream.child("bias").child(static_cast<std::uint64_t>(l)).rng();
      bias_rng.fill_normal(b);
      b *= std::sqrt(variance.bias);
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

inline LayerOutputs forward(const ParamDraw& params, const InputSet& inputs,
                            const Activation& activation) {
  require(!params.weights.empty() && params.weights.size() == params.biases.size(),
          "parameter draw has inconsistent layer count");
  LayerOutputs out;
  out.layers.reserve(params.weights.size());
  Matrix current = inputs.points;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Matrix& w = params.weights[l];
    const Vector& b = params.biases[l];
    if (w.cols() != current.rows() || b.size() != w.rows())
      throw ConfigError("shape mismatch at layer " + std::to_string(l));
    if (l > 0) current = current.unaryExpr([&](double z) { return activation(z); }).eval();
    Matrix next = w * current;
    next.colwise() += b;
    out.layers.push_back(next);
    current = std::move(next);
  }
  return out;
}

/// Row vector of an n_l x k layer output in neuron-major order.
inline Eigen::RowVectorXd flatten(const Matrix& layer) {
  Eigen::RowVectorXd row(layer.size());
  for (Eigen::Index i = 0; i < layer.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.cols(); ++j) row(i * layer.cols() + j) = layer(i, j);
  return row;
}

inline constexpr std::size_t kDefaultMaxSampleElements = 50'000'000;

/// N independent realizations of flatten(f^(L)[X]); replicate r uses the
/// parameter stream `stream.child(r)`.
inline OutputSampleSet sample_outputs(const NetworkConfig& config, const InputSet& inputs,
                                      std::size_t n_samples, SeedStream stream,
                                      std::size_t max_elements = kDefaultMaxSampleElements) {
  config.validate();
  inputs.validate();
  require(n_samples >= 1, "n_samples must be >= 1");
  require(inputs.dim() == config.input_dim(), "input dimension does not match n_0");
  const auto dim = static_cast<std::size_t>(config.output_width()) * static_cast<std::size_t>(inputs.k());
  if (n_samples > max_elements / dim)
    throw ResourceLimitError("sample set of " + std::to_string(n_samples) + " x " +
                             std::to_string(dim) + " exceeds the element cap");
  OutputSampleSet samples;
  samples.provenance = Provenance::network;
  samples.rows.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < n_samples; ++r) {
    const ParamDraw params = sample_params(config, stream.child(r));
    samples.rows.row(static_cast<Eigen::Index>(r)) =
        flatten(forward(params, inputs, config.activation).final_layer());
  }
  return samples;
}

}  // namespace nngpw
