#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nngpw/kernel.hpp"
#include "test_support.hpp"

namespace nngpw {
namespace {

constexpr double kInvTwoPi = 1.0 / (2.0 * std::numbers::pi);

InputSet columns(std::initializer_list<std::initializer_list<double>> points) {
  const auto k = static_cast<Eigen::Index>(points.size());
  const auto n0 = static_cast<Eigen::Index>(points.begin()->size());
  InputSet inputs{Eigen::MatrixXd(n0, k)};
  Eigen::Index c = 0;
  for (const auto& p : points) {
    Eigen::Index r = 0;
    for (double v : p) inputs.points(r++, c) = v;
    ++c;
  }
  return inputs;
}

BivariateMoment random_moment(Rng& rng) {
  // Entries in [0, 10]: diagonal uniform, correlation uniform in [-1, 1] with some exact extremes.
  const double xx = 10.0 * rng.uniform();
  const double yy = 10.0 * rng.uniform();
  double rho = 2.0 * rng.uniform() - 1.0;
  const double pick = rng.uniform();
  if (pick < 0.05) rho = 1.0;
  else if (pick < 0.1) rho = -1.0;
  return {xx, rho * std::sqrt(xx * yy), yy};
}

TEST(KernelBase, OrthogonalUnitInputs) {
  const KernelMatrix k = kernel_base(columns({{1, 0}, {0, 1}}), 1.0, 0.0);
  EXPECT_TRUE(k.values.isApprox((Eigen::Matrix2d() << 0.5, 0, 0, 0.5).finished()));
  EXPECT_EQ(k.layer, 1);
  EXPECT_TRUE(k.bias_included);
}

TEST(KernelBase, ZeroInputsGiveBiasOnly) {
  const KernelMatrix k = kernel_base(InputSet{Eigen::MatrixXd::Zero(3, 4)}, 1.7, 1.0);
  EXPECT_EQ(k.values, Eigen::MatrixXd::Ones(4, 4));
}

TEST(KernelBase, ScalarValue) {
  const KernelMatrix k = kernel_base(columns({{1, 1}}), 2.0, 1.0);
  ASSERT_EQ(k.k(), 1);
  EXPECT_DOUBLE_EQ(k.values(0, 0), 3.0);
}

TEST(KernelBase, RejectsBadVariances) {
  EXPECT_THROW(kernel_base(columns({{1, 1}}), 0.0, 1.0), ConfigError);
  EXPECT_THROW(kernel_base(columns({{1, 1}}), 1.0, -1.0), ConfigError);
}

TEST(PairExpectation, ReluExamples) {
  for (Backend backend : {Backend::closed_form, Backend::quadrature}) {
    EXPECT_NEAR(gaussian_pair_expectation({1, 1, 1}, Activation::relu(), backend), 0.5, 1e-12);
    EXPECT_NEAR(gaussian_pair_expectation({1, -1, 1}, Activation::relu(), backend), 0.0, 1e-12);
    EXPECT_NEAR(gaussian_pair_expectation({1, 0, 1}, Activation::relu(), backend), kInvTwoPi, 1e-12);
    EXPECT_NEAR(gaussian_pair_expectation({0, 0, 1}, Activation::relu(), backend), 0.0, 1e-15);
  }
}

TEST(PairExpectation, IdentityClosedFormIsCovariance) {
  EXPECT_DOUBLE_EQ(gaussian_pair_expectation({2, -0.7, 3}, Activation::identity(), Backend::closed_form), -0.7);
  EXPECT_NEAR(gaussian_pair_expectation({2, -0.7, 3}, Activation::identity(), Backend::quadrature), -0.7, 1e-12);
}

TEST(PairExpectation, ClosedFormUnavailableForTanh) {
  EXPECT_THROW(gaussian_pair_expectation({1, 0.5, 1}, Activation::tanh(), Backend::closed_form), ConfigError);
}

TEST(PairExpectation, RejectsNonPsdMoment) {
  EXPECT_THROW(gaussian_pair_expectation({1, 2, 1}, Activation::relu(), Backend::closed_form), NotPsdError);
  EXPECT_THROW(gaussian_pair_expectation({-1, 0, 1}, Activation::relu(), Backend::quadrature), NotPsdError);
}

TEST(PairExpectation, BackendsAgreeOnRandomMoments) {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const BivariateMoment m = random_moment(rng);
    for (const Activation& act : {Activation::relu(), Activation::identity()}) {
      const double a = gaussian_pair_expectation(m, act, Backend::closed_form);
      const double b = gaussian_pair_expectation(m, act, Backend::quadrature);
      worst = std::max(worst, std::abs(a - b));
    }
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(PairExpectation, QuadratureMatchesGridOracleForTanh) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const BivariateMoment m = random_moment(rng);
    const double oracle = testing::grid_pair_expectation(m.xx, m.xy, m.yy, [](double z) { return std::tanh(z); });
    EXPECT_NEAR(gaussian_pair_expectation(m, Activation::tanh(), Backend::quadrature), oracle, 1e-5);
  }
}

TEST(PairExpectation, ReluMatchesGridOracle) {
  const double oracle = testing::grid_pair_expectation(2.0, 0.6, 1.5, [](double z) { return std::max(z, 0.0); });
  EXPECT_NEAR(gaussian_pair_expectation({2.0, 0.6, 1.5}, Activation::relu(), Backend::closed_form), oracle, 1e-5);
}

TEST(KernelStep, IdentityIsAffine) {
  Rng rng(1);
  KernelMatrix prev{1, testing::random_psd(4, rng), true};
  const KernelMatrix next = kernel_step(prev, Activation::identity(), 1.3, 0.4, Backend::closed_form);
  const Eigen::MatrixXd expected = 1.3 * prev.values + 0.4 * Eigen::MatrixXd::Ones(4, 4);
  EXPECT_LT((next.values - expected).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_EQ(next.layer, 2);
}

TEST(KernelStep, ReluOnIdentity) {
  const KernelMatrix prev{1, Eigen::MatrixXd::Identity(2, 2), true};
  for (Backend backend : {Backend::closed_form, Backend::quadrature}) {
    const KernelMatrix next = kernel_step(prev, Activation::relu(), 1.0, 0.0, backend);
    EXPECT_NEAR(next.values(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(next.values(1, 1), 0.5, 1e-12);
    EXPECT_NEAR(next.values(0, 1), kInvTwoPi, 1e-12);
    EXPECT_EQ(next.values(0, 1), next.values(1, 0));
  }
}

TEST(KernelStep, ZeroKernelGivesBias) {
  const KernelMatrix prev{1, Eigen::MatrixXd::Zero(3, 3), true};
  for (const Activation& act : {Activation::relu(), Activation::tanh()}) {
    const KernelMatrix next = kernel_step(prev, act, 2.0, 0.7, Backend::quadrature);
    EXPECT_LT((next.values - 0.7 * Eigen::MatrixXd::Ones(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(KernelStep, WithoutBiasDropsConstant) {
  Rng rng(5);
  const KernelMatrix prev{1, testing::random_psd(3, rng), true};
  const KernelMatrix with = kernel_step(prev, Activation::relu(), 1.0, 0.9, Backend::closed_form);
  const KernelMatrix without = kernel_step_without_bias(prev, Activation::relu(), 1.0, Backend::closed_form);
  EXPECT_FALSE(without.bias_included);
  EXPECT_LT((with.values - without.values - 0.9 * Eigen::MatrixXd::Ones(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(kernel_step(without, Activation::relu(), 1.0, 0.0, Backend::closed_form), ConfigError);
}

TEST(KernelStep, DuplicateInputsDoNotProduceNan) {
  const KernelMatrix k1 = kernel_base(columns({{0.6, 0.8}, {0.6, 0.8}, {1, 0}}), 1.0, 0.5);
  const KernelMatrix k2 = kernel_step(k1, Activation::relu(), 1.0, 0.5, Backend::closed_form);
  EXPECT_TRUE(k2.values.allFinite());
  EXPECT_NEAR(k2.values(0, 1), k2.values(0, 0), 1e-14);
}

TEST(KernelStep, MonteCarloConsistency) {
  const InputSet inputs = InputSet::on_sphere(3, 3, SeedStream(11));
  const KernelMatrix k1 = kernel_base(inputs, 1.0, 0.3);
  const KernelMatrix k2 = kernel_step(k1, Activation::relu(), 1.5, 0.3, Backend::closed_form);
  const Eigen::LLT<Eigen::MatrixXd> llt(k1.values);
  const Eigen::MatrixXd l = llt.matrixL();
  Rng rng(99);
  constexpr int kDraws = 1000000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3), sum_sq = Eigen::MatrixXd::Zero(3, 3);
  Eigen::Vector3d z;
  for (int d = 0; d < kDraws; ++d) {
    rng.fill_normal(z);
    const Eigen::Vector3d s = (l * z).cwiseMax(0.0);
    const Eigen::Matrix3d sample = 1.5 * s * s.transpose() + 0.3 * Eigen::Matrix3d::Ones();
    sum += sample;
    sum_sq += sample.cwiseAbs2();
  }
  const Eigen::MatrixXd mean = sum / kDraws;
  const Eigen::MatrixXd se = ((sum_sq / kDraws - mean.cwiseAbs2()) / kDraws).cwiseSqrt();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_LE(std::abs(mean(i, j) - k2.values(i, j)), 5.0 * se(i, j)) << i << "," << j;
}

TEST(KernelChain, SingleLayerIsBase) {
  NetworkConfig config;
  config.widths = {2, 5};
  config.variances = {{1.2, 0.1}};
  const InputSet inputs = InputSet::on_sphere(2, 3, SeedStream(1));
  const auto chain = kernel_chain(config, inputs, Backend::quadrature);
  ASSERT_EQ(chain.size(), 1u);
  EXPECT_EQ(chain[0].values, kernel_base(inputs, 1.2, 0.1).values);
}

TEST(KernelChain, LinearIdentityChainIsProductOfVariances) {
  NetworkConfig config;
  config.widths = {3, 4, 4, 4, 2};
  config.variances = {{1.5, 0.0}, {0.5, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  config.activation = Activation::identity();
  const InputSet inputs = InputSet::on_sphere(3, 4, SeedStream(2));
  const auto chain = kernel_chain(config, inputs, Backend::quadrature);
  ASSERT_EQ(chain.size(), 4u);
  EXPECT_LT((chain.back().values - 3.0 * chain.front().values).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(KernelChain, ReluBackendsAgree) {
  const NetworkConfig config = NetworkConfig::uniform(4, 10, 6, 1, {1.3, 0.2}, Activation::relu());
  const InputSet inputs = InputSet::on_sphere(4, 5, SeedStream(3));
  const auto a = kernel_chain(config, inputs, Backend::closed_form);
  const auto b = kernel_chain(config, inputs, Backend::quadrature);
  for (std::size_t l = 0; l < a.size(); ++l) EXPECT_LE((a[l].values - b[l].values).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(KernelChain, ReluDiagonalStaysPositive) {
  const NetworkConfig config = NetworkConfig::uniform(3, 8, 30, 1, {1.0, 0.1}, Activation::relu());
  InputSet inputs{Eigen::MatrixXd::Zero(3, 2)};
  inputs.points(0, 1) = 1.0;
  for (const auto& k : kernel_chain(config, inputs, Backend::closed_form)) {
    EXPECT_GT(k.values.diagonal().minCoeff(), 0.0);
    EXPECT_NO_THROW(check_psd(k.values, kPsdTolerance, "chain"));
  }
}

TEST(KernelJson, RoundTrip) {
  Rng rng(4);
  const KernelMatrix k{3, testing::random_psd(3, rng), false};
  const nlohmann::json j = k;
  EXPECT_EQ(j.at("k"), 3);
  EXPECT_EQ(j.at("values").size(), 9u);
  EXPECT_DOUBLE_EQ(j.at("values")[1].get<double>(), k.values(0, 1));
  const auto back = j.get<KernelMatrix>();
  EXPECT_EQ(back.values, k.values);
  EXPECT_EQ(back.layer, 3);
  EXPECT_FALSE(back.bias_included);
}

TEST(KernelJson, RejectsWrongLength) {
  nlohmann::json j = {{"layer", 1}, {"k", 2}, {"bias_included", true}, {"values", {1.0, 0.0, 0.0}}};
  EXPECT_THROW(j.get<KernelMatrix>(), ConfigError);
}

}  // namespace
}  // namespace nngpw
