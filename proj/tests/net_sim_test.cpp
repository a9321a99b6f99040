#include <cmath>

#include <gtest/gtest.h>

#include "nngpw/kernel.hpp"
#include "nngpw/network.hpp"
#include "test_support.hpp"

namespace nngpw {
namespace {

NetworkConfig two_layer(int n0, int n1, int n2, Activation activation = Activation::relu()) {
  NetworkConfig config;
  config.widths = {n0, n1, n2};
  config.variances = {{1.0, 0.5}, {2.0, 0.25}};
  config.activation = std::move(activation);
  return config;
}

TEST(NetworkConfig, RejectsInconsistentShapes) {
  NetworkConfig config = two_layer(2, 3, 1);
  config.variances.pop_back();
  EXPECT_THROW(config.validate(), ConfigError);
  config = two_layer(2, 0, 1);
  EXPECT_THROW(config.validate(), ConfigError);
  config = two_layer(2, 3, 1);
  config.variances[0].weight = 0.0;
  EXPECT_THROW(config.validate(), ConfigError);
  config.variances[0] = {1.0, -1.0};
  EXPECT_THROW(config.validate(), ConfigError);
}

TEST(Activation, LipschitzContractIsChecked) {
  EXPECT_NO_THROW(validate(Activation::relu()));
  EXPECT_NO_THROW(validate(Activation::tanh()));
  EXPECT_NO_THROW(validate(Activation::custom("softplus", [](double z) { return std::log1p(std::exp(z)); }, 1.0)));
  EXPECT_THROW(validate(Activation::custom("double", [](double z) { return 2.0 * z; }, 1.0)), ConfigError);
  EXPECT_THROW(validate(Activation::custom("zero", [](double) { return 0.0; }, 1.0)), ConfigError);
}

TEST(SampleParams, ZeroBiasVarianceGivesZeroBiases) {
  NetworkConfig config = two_layer(3, 5, 2);
  config.variances = {{1.0, 0.0}, {1.0, 0.0}};
  const ParamDraw params = sample_params(config, SeedStream(1));
  for (const auto& b : params.biases) EXPECT_TRUE(b.isZero(0.0));
}

TEST(SampleParams, WeightVarianceFollowsFanIn) {
  // 2000 entries of N(0, c_w / n_0) with n_0 = 1000.
  NetworkConfig config;
  config.widths = {1000, 2};
  config.variances = {{1.0, 0.0}};
  const ParamDraw params = sample_params(config, SeedStream(5));
  const Eigen::MatrixXd& w = params.weights[0];
  ASSERT_EQ(w.rows(), 2);
  ASSERT_EQ(w.cols(), 1000);
  const double mean = w.mean();
  const double variance = (w.array() - mean).square().sum() / (w.size() - 1);
  EXPECT_GT(variance, 0.001 * 0.85);
  EXPECT_LT(variance, 0.001 * 1.15);
}

TEST(SampleParams, IdenticalSeedsAreBitwiseIdentical) {
  const NetworkConfig config = two_layer(4, 6, 3);
  const ParamDraw a = sample_params(config, SeedStream(77));
  const ParamDraw b = sample_params(config, SeedStream(77));
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    EXPECT_EQ(a.weights[l], b.weights[l]);
    EXPECT_EQ(a.biases[l], b.biases[l]);
  }
  const ParamDraw c = sample_params(config, SeedStream(78));
  EXPECT_NE(a.weights[0], c.weights[0]);
}

TEST(Forward, SingleLayerArithmetic) {
  ParamDraw params;
  params.weights = {(Eigen::MatrixXd(1, 2) << 1, 2).finished()};
  params.biases = {(Eigen::VectorXd(1) << 3).finished()};
  const InputSet inputs{(Eigen::MatrixXd(2, 1) << 1, 1).finished()};
  const LayerOutputs out = forward(params, inputs, Activation::relu());
  ASSERT_EQ(out.layers.size(), 1u);
  EXPECT_DOUBLE_EQ(out.final_layer()(0, 0), 6.0);
}

TEST(Forward, IdentityNetworkIsMatrixProduct) {
  Rng rng(3);
  ParamDraw params;
  params.weights = {Eigen::MatrixXd(4, 3), Eigen::MatrixXd(2, 4)};
  rng.fill_normal(params.weights[0]);
  rng.fill_normal(params.weights[1]);
  params.biases = {Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(2)};
  InputSet inputs{Eigen::MatrixXd(3, 5)};
  rng.fill_normal(inputs.points);
  const LayerOutputs out = forward(params, inputs, Activation::identity());
  EXPECT_TRUE(out.final_layer().isApprox(params.weights[1] * params.weights[0] * inputs.points, 1e-14));
}

TEST(Forward, ReluKillsNegativePreactivation) {
  ParamDraw params;
  params.weights = {(Eigen::MatrixXd(1, 1) << -1).finished(), (Eigen::MatrixXd(1, 1) << 5).finished()};
  params.biases = {(Eigen::VectorXd(1) << 0).finished(), (Eigen::VectorXd(1) << 7).finished()};
  const InputSet inputs{(Eigen::MatrixXd(1, 1) << 2).finished()};
  const LayerOutputs out = forward(params, inputs, Activation::relu());
  EXPECT_DOUBLE_EQ(out.layers[0](0, 0), -2.0);
  EXPECT_DOUBLE_EQ(out.final_layer()(0, 0), 7.0);
}

TEST(Forward, ShapeMismatchThrows) {
  const ParamDraw params = sample_params(two_layer(3, 4, 1), SeedStream(1));
  const InputSet inputs{Eigen::MatrixXd::Ones(2, 2)};
  EXPECT_THROW(forward(params, inputs, Activation::relu()), ConfigError);
}

TEST(SampleOutputs, SingleSampleMatchesForwardPass) {
  const NetworkConfig config = two_layer(3, 4, 2);
  const InputSet inputs = InputSet::on_sphere(3, 2, SeedStream(9));
  const SeedStream stream(123);
  const OutputSampleSet samples = sample_outputs(config, inputs, 1, stream);
  const auto expected = flatten(forward(sample_params(config, stream.child(0)), inputs, config.activation).final_layer());
  EXPECT_EQ(samples.rows.row(0), expected);
  EXPECT_EQ(samples.dim(), 4);
  EXPECT_EQ(samples.provenance, Provenance::network);
}

TEST(SampleOutputs, FlatteningIsNeuronMajor) {
  const Eigen::MatrixXd layer = (Eigen::MatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const Eigen::RowVectorXd flat = flatten(layer);
  EXPECT_EQ(flat, (Eigen::RowVectorXd(6) << 1, 2, 3, 4, 5, 6).finished());
}

TEST(SampleOutputs, BiasOnlyOutputHasUnitVariance) {
  NetworkConfig config;
  config.widths = {1, 1};
  config.variances = {{1.0, 1.0}};
  const InputSet inputs{Eigen::MatrixXd::Zero(1, 1)};
  constexpr int kN = 20000;
  const OutputSampleSet samples = sample_outputs(config, inputs, kN, SeedStream(4));
  const double mean = samples.rows.mean();
  const double variance = (samples.rows.array() - mean).square().sum() / (kN - 1);
  EXPECT_NEAR(variance, 1.0, 5.0 / std::sqrt(kN));
}

TEST(SampleOutputs, DisjointStreamsAreUncorrelated) {
  NetworkConfig config = NetworkConfig::uniform(2, 8, 2, 1, {1.0, 1.0}, Activation::relu());
  const InputSet inputs = InputSet::on_sphere(2, 1, SeedStream(1));
  constexpr int kN = 10000;
  const auto a = sample_outputs(config, inputs, kN, SeedStream(100).child("a"));
  const auto b = sample_outputs(config, inputs, kN, SeedStream(100).child("b"));
  const Eigen::ArrayXd x = a.rows.col(0).array() - a.rows.col(0).mean();
  const Eigen::ArrayXd y = b.rows.col(0).array() - b.rows.col(0).mean();
  const double correlation = (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
  EXPECT_LT(std::abs(correlation), 4.0 / std::sqrt(kN));
}

TEST(SampleOutputs, ResourceCapIsEnforced) {
  const NetworkConfig config = two_layer(2, 3, 4);
  const InputSet inputs = InputSet::on_sphere(2, 5, SeedStream(1));
  EXPECT_THROW(sample_outputs(config, inputs, 100, SeedStream(1), 1000), ResourceLimitError);
  EXPECT_NO_THROW(sample_outputs(config, inputs, 50, SeedStream(1), 1000));
}

TEST(NetSimProperties, BaseCaseCovarianceIsIdentityKronKernel) {
  NetworkConfig config;
  config.widths = {3, 2};
  config.variances = {{1.5, 0.5}};
  const InputSet inputs = InputSet::on_sphere(3, 3, SeedStream(21));
  constexpr int kN = 20000;
  const OutputSampleSet samples = sample_outputs(config, inputs, kN, SeedStream(22));
  const Eigen::MatrixXd second = samples.rows.transpose() * samples.rows / kN;
  const KernelMatrix k1 = kernel_base(inputs, 1.5, 0.5);
  const Eigen::MatrixXd expected = kron_identity(2, k1.values);
  const double dim = static_cast<double>(samples.dim());
  EXPECT_LT(samples.rows.colwise().mean().norm(), 5.0 * std::sqrt(dim / kN) * 2.0);
  EXPECT_LT((second - expected).norm(), 5.0 * dim / std::sqrt(kN));
}

TEST(NetSimProperties, NeuronPermutationLeavesMomentsInvariant) {
  const NetworkConfig config = NetworkConfig::uniform(2, 6, 2, 3, {1.0, 0.3}, Activation::tanh());
  const InputSet inputs = InputSet::on_sphere(2, 2, SeedStream(2));
  const OutputSampleSet samples = sample_outputs(config, inputs, 500, SeedStream(3));
  // Swap neuron blocks 0 and 2 (k = 2 columns each) in every row.
  Eigen::MatrixXd permuted = samples.rows;
  permuted.middleCols(0, 2) = samples.rows.middleCols(4, 2);
  permuted.middleCols(4, 2) = samples.rows.middleCols(0, 2);
  const Eigen::MatrixXd cov = samples.rows.transpose() * samples.rows;
  const Eigen::MatrixXd cov_perm = permuted.transpose() * permuted;
  EXPECT_NEAR(cov.trace(), cov_perm.trace(), 1e-9 * cov.trace());
  EXPECT_NEAR(cov.norm(), cov_perm.norm(), 1e-9 * cov.norm());
}

TEST(NetSimProperties, LipschitzPropagationBound) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkConfig config = NetworkConfig::uniform(3, 7, 3, 2, {1.3, 0.2}, Activation::tanh());
    const ParamDraw params = sample_params(config, SeedStream(static_cast<std::uint64_t>(trial)));
    InputSet x{Eigen::MatrixXd(3, 4)}, y{Eigen::MatrixXd(3, 4)};
    rng.fill_normal(x.points);
    rng.fill_normal(y.points);
    const LayerOutputs fx = forward(params, x, config.activation);
    const LayerOutputs fy = forward(params, y, config.activation);
    double operator_norms = 1.0;
    for (std::size_t l = 0; l < fx.layers.size(); ++l) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(params.weights[l]);
      operator_norms *= svd.singularValues()(0);
      const double bound = operator_norms * std::pow(config.activation.lipschitz(), static_cast<double>(l)) *
                           (x.points - y.points).norm();
      EXPECT_LE((fx.layers[l] - fy.layers[l]).norm(), bound * (1 + 1e-12));
    }
  }
}

}  // namespace
}  // namespace nngpw
