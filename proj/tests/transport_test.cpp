#include <cmath>

#include <gtest/gtest.h>

#include "nngpw/transport.hpp"
#include "test_support.hpp"

namespace nngpw {
namespace {

using Eigen::MatrixXd;

OutputSampleSet external(MatrixXd rows) {
  OutputSampleSet s;
  s.rows = std::move(rows);
  s.provenance = Provenance::external;
  return s;
}

OutputSampleSet random_cloud(int n, int dim, Rng& rng) {
  MatrixXd rows(n, dim);
  rng.fill_normal(rows);
  return external(rows);
}

KernelMatrix scalar_kernel(double v) { return {1, (MatrixXd(1, 1) << v).finished(), true}; }

TEST(LimitGaussian, ZeroKernelGivesZeroRows) {
  const auto s = sample_limit_gaussian({1, MatrixXd::Zero(3, 3), true}, 2, 50, SeedStream(1));
  EXPECT_EQ(s.dim(), 6);
  EXPECT_TRUE(s.rows.isZero(0.0));
  EXPECT_EQ(s.provenance, Provenance::gaussian);
}

TEST(LimitGaussian, CovarianceIsIdentityKronKernel) {
  constexpr int kN = 20000;
  const int k = 3;
  const auto s = sample_limit_gaussian({1, MatrixXd::Identity(k, k), true}, 2, kN, SeedStream(2));
  const MatrixXd cov = s.rows.transpose() * s.rows / kN;
  EXPECT_LT((cov - MatrixXd::Identity(2 * k, 2 * k)).norm(), 5.0 * 2 * k / std::sqrt(kN));
}

TEST(LimitGaussian, DeterministicPerSeedAndTagsKernel) {
  Rng rng(3);
  const KernelMatrix kernel{2, testing::random_psd(2, rng), true};
  const auto a = sample_limit_gaussian(kernel, 3, 100, SeedStream(4));
  const auto b = sample_limit_gaussian(kernel, 3, 100, SeedStream(4));
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.source_id, kernel_id(kernel));
  EXPECT_NE(sample_limit_gaussian(kernel, 3, 100, SeedStream(5)).rows, a.rows);
}

TEST(W2Assignment, Examples) {
  Rng rng(6);
  const auto a = random_cloud(30, 3, rng);
  EXPECT_EQ(w2_assignment(a, a).value, 0.0);
  const auto p = external((MatrixXd(1, 2) << 0, 0).finished());
  const auto q = external((MatrixXd(1, 2) << 3, 4).finished());
  const W2Estimate e = w2_assignment(p, q);
  EXPECT_DOUBLE_EQ(e.value, 5.0);
  EXPECT_EQ(e.standard_error, 0.0);
  EXPECT_EQ(e.n_used, 1);
}

TEST(W2Assignment, RejectsMismatchAndCap) {
  Rng rng(7);
  EXPECT_THROW(w2_assignment(random_cloud(5, 2, rng), random_cloud(6, 2, rng)), ConfigError);
  EXPECT_THROW(w2_assignment(random_cloud(5, 2, rng), random_cloud(5, 3, rng)), ConfigError);
  EXPECT_THROW(w2_assignment(random_cloud(20, 2, rng), random_cloud(20, 2, rng), SeedStream(0), 10),
               ResourceLimitError);
}

TEST(W2Assignment, MatchesBruteForce) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const int dim = 1 + static_cast<int>(rng.below(4));
    const auto a = random_cloud(6, dim, rng);
    const auto b = random_cloud(6, dim, rng);
    EXPECT_NEAR(w2_assignment(a, b).value, testing::brute_force_w2(a.rows, b.rows), 1e-10);
  }
}

TEST(W2Assignment, MetricAxioms) {
  Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto a = random_cloud(40, 3, rng);
    const auto b = random_cloud(40, 3, rng);
    const auto c = random_cloud(40, 3, rng);
    const double ab = w2_assignment(a, b).value;
    EXPECT_NEAR(ab, w2_assignment(b, a).value, 1e-12);
    EXPECT_LE(ab, w2_assignment(a, c).value + w2_assignment(c, b).value + 1e-9);
  }
}

TEST(W2Assignment, ShiftCancellationAndCouplingBound) {
  Rng rng(10);
  const auto a = random_cloud(60, 2, rng);
  const auto b = random_cloud(60, 2, rng);
  const Eigen::RowVector2d shift(3.5, -1.25);
  const auto a2 = external(a.rows.rowwise() + shift);
  const auto b2 = external(b.rows.rowwise() + shift);
  const double base = w2_assignment(a, b).value;
  EXPECT_NEAR(w2_assignment(a2, b2).value, base, 1e-10);
  const double paired = std::sqrt((a.rows - b.rows).rowwise().squaredNorm().mean());
  EXPECT_LE(base, paired + 1e-12);
}

TEST(W2Sorted, Examples) {
  const auto a = external((MatrixXd(2, 1) << 0, 1).finished());
  const auto b = external((MatrixXd(2, 1) << 1, 0).finished());
  EXPECT_EQ(w2_sorted_1d(a, a).value, 0.0);
  EXPECT_EQ(w2_sorted_1d(a, b).value, 0.0);
  Rng rng(11);
  EXPECT_THROW(w2_sorted_1d(random_cloud(5, 2, rng), random_cloud(5, 2, rng)), ConfigError);
}

TEST(W2Sorted, EqualsAssignmentInOneDimension) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + static_cast<int>(rng.below(50));
    const auto a = random_cloud(n, 1, rng);
    const auto b = random_cloud(n, 1, rng);
    EXPECT_NEAR(w2_sorted_1d(a, b).value, w2_assignment(a, b).value, 1e-10);
  }
}

TEST(W2Sorted, StandardErrorIsPositiveAndDeterministic) {
  Rng rng(13);
  const auto a = random_cloud(400, 1, rng);
  const auto b = external(2.0 * random_cloud(400, 1, rng).rows);
  const W2Estimate x = w2_sorted_1d(a, b, SeedStream(3));
  const W2Estimate y = w2_sorted_1d(a, b, SeedStream(3));
  EXPECT_GT(x.standard_error, 0.0);
  EXPECT_EQ(x.standard_error, y.standard_error);
  EXPECT_EQ(x.method, W2Method::sorted_1d);
}

TEST(W2Plugin, Examples) {
  EXPECT_EQ(w2_gaussian_plugin(external(MatrixXd::Zero(10, 1)), scalar_kernel(0.0), 1).value, 0.0);
  const auto sample = sample_limit_gaussian(scalar_kernel(1.0), 1, 20000, SeedStream(14));
  EXPECT_NEAR(w2_gaussian_plugin(sample, scalar_kernel(4.0), 1).value, 1.0, 0.03);
}

TEST(W2Plugin, ShrinksOnItsOwnLaw) {
  Rng rng(15);
  const KernelMatrix kernel{1, testing::random_psd(2, rng), true};
  const double small = w2_gaussian_plugin(sample_limit_gaussian(kernel, 2, 400, SeedStream(1)), kernel, 2).value;
  const double large = w2_gaussian_plugin(sample_limit_gaussian(kernel, 2, 25600, SeedStream(2)), kernel, 2).value;
  EXPECT_LT(large, small);
  EXPECT_LT(large, 0.05);
}

TEST(W2Plugin, RequiresMoreRowsThanDim) {
  EXPECT_THROW(w2_gaussian_plugin(external(MatrixXd::Ones(3, 4)), {1, MatrixXd::Identity(2, 2), true}, 2),
               ConfigError);
}

TEST(NullCalibration, SortedMeanIsSmall) {
  const NullCalibration null = null_calibration(scalar_kernel(1.0), 1, 10000, W2Method::sorted_1d, SeedStream(16));
  EXPECT_LT(null.mean, 0.05);
  EXPECT_GT(null.std, 0.0);
  EXPECT_TRUE(null.std_available);
  EXPECT_EQ(null.repeats, 20);
  const NullCalibration again = null_calibration(scalar_kernel(1.0), 1, 10000, W2Method::sorted_1d, SeedStream(16));
  EXPECT_EQ(null.mean, again.mean);
  EXPECT_EQ(null.std, again.std);
}

TEST(NullCalibration, SingleRepeatFlagsSentinel) {
  const NullCalibration null =
      null_calibration(scalar_kernel(1.0), 1, 200, W2Method::assignment, SeedStream(17), 1);
  EXPECT_EQ(null.std, 0.0);
  EXPECT_FALSE(null.std_available);
  EXPECT_THROW(null_calibration(scalar_kernel(1.0), 1, 200, W2Method::assignment, SeedStream(17), 0), ConfigError);
}

TEST(SamplesCsv, RoundTrip) {
  Rng rng(18);
  OutputSampleSet s = random_cloud(7, 3, rng);
  s.provenance = Provenance::gaussian;
  s.source_id = "abc";
  std::stringstream buffer;
  write_samples_csv(buffer, s);
  const OutputSampleSet back = read_samples_csv(buffer);
  EXPECT_EQ(back.rows, s.rows);
  EXPECT_EQ(back.provenance, Provenance::gaussian);
  EXPECT_EQ(back.source_id, "abc");
}

}  // namespace
}  // namespace nngpw
