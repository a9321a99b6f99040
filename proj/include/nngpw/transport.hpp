#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nngpw/assignment.hpp"
#include "nngpw/errors.hpp"
#include "nngpw/kernel.hpp"
#include "nngpw/psd.hpp"
#include "nngpw/rng.hpp"
#include "nngpw/samples.hpp"

namespace nngpw {

enum class W2Method { assignment, sorted_1d, gaussian_plugin };

inline std::string to_string(W2Method method) {
  switch (method) {
    case W2Method::assignment: return "assignment";
    case W2Method::sorted_1d: return "sorted_1d";
    case W2Method::gaussian_plugin: return "gaussian_plugin";
  }
  return "assignment";
}

inline W2Method w2_method_from_string(const std::string& text) {
  if (text == "assignment") return W2Method::assignment;
  if (text == "sorted_1d") return W2Method::sorted_1d;
  if (text == "gaussian_plugin") return W2Method::gaussian_plugin;
  throw ConfigError("unknown W2 estimator '" + text + "'");
}

struct W2Estimate {
  double value = 0.0;
  W2Method method = W2Method::assignment;
  double standard_error = 0.0;  // split-half resampling; 0 when halves are too small
  Eigen::Index n_used = 0;
};

inline constexpr Eigen::Index kDefaultAssignmentCap = 4096;
inline constexpr int kSplitHalfRepeats = 5;

/// Stable identifier of a kernel matrix (FNV-1a of its JSON form).
inline std::string kernel_id(const KernelMatrix& kernel) {
  const std::uint64_t hash = detail::fnv1a(nlohmann::json(kernel).dump());
  char buffer[24];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

/// N draws of N(Id_{n_L} (x) K): each row holds n_L independent blocks
/// sqrt(K) z, laid out like a flattened network output.
inline OutputSampleSet sample_limit_gaussian(const KernelMatrix& kernel, int output_width,
                                             std::size_t n_samples, SeedStream stream) {
  require(output_width >= 1 && n_samples >= 1, "sample_limit_gaussian: bad sizes");
  const Matrix root = sqrt_psd(kernel.values);
  const Eigen::Index k = kernel.k();
  OutputSampleSet samples;
  samples.provenance = Provenance::gaussian;
  samples.source_id = kernel_id(kernel);
  samples.rows.resize(static_cast<Eigen::Index>(n_samples), output_width * k);
  Vector z(k);
  for (std::size_t r = 0; r < n_samples; ++r) {
    Rng rng = stream.child(r).rng();
    for (int neuron = 0; neuron < output_width; ++neuron) {
      rng.fill_normal(z);
      samples.rows.block(static_cast<Eigen::Index>(r), neuron * k, 1, k) = (root * z).transpose();
    }
  }
  return samples;
}

namespace detail {

/// Squared Euclidean cost between rows of two point clouds, stored
/// row-major for contiguous access.
class SquaredEuclideanCost {
 public:
  SquaredEuclideanCost(const Matrix& a, const Matrix& b)
      : dim_(a.cols()), a_(row_major(a)), b_(row_major(b)) {}

  double operator()(std::ptrdiff_t i, std::ptrdiff_t j) const {
    const double* x = a_.data() + i * dim_;
    const double* y = b_.data() + j * dim_;
    double sum = 0.0;
    for (Eigen::Index d = 0; d < dim_; ++d) {
      const double diff = x[d] - y[d];
      sum += diff * diff;
    }
    return sum;
  }

 private:
  static std::vector<double> row_major(const Matrix& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return out;
  }

  Eigen::Index dim_;
  std::vector<double> a_;
  std::vector<double> b_;
};

inline void check_pair(const Matrix& a, const Matrix& b) {
  require(a.rows() >= 1 && a.rows() == b.rows(), "W2 estimate needs equal, non-zero sample counts");
  require(a.cols() == b.cols(), "W2 estimate needs equal dimensions");
}

inline double assignment_value(const Matrix& a, const Matrix& b, Eigen::Index cap) {
  check_pair(a, b);
  if (a.rows() > cap)
    throw ResourceLimitError("assignment W2 with N = " + std::to_string(a.rows()) +
                             " exceeds the cap of " + std::to_string(cap));
  const SquaredEuclideanCost cost(a, b);
  const AssignmentResult result = solve_assignment(static_cast<std::size_t>(a.rows()), cost);
  return std::sqrt(std::max(0.0, result.total_cost / static_cast<double>(a.rows())));
}

inline double sorted_1d_value(const Matrix& a, const Matrix& b) {
  check_pair(a, b);
  require(a.cols() == 1, "sorted_1d W2 needs one-dimensional samples");
  std::vector<double> x(a.data(), a.data() + a.rows());
  std::vector<double> y(b.data(), b.data() + b.rows());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(sum / static_cast<double>(x.size()));
}

inline Matrix sample_covariance(const Matrix& rows) {
  const Matrix centred = rows.rowwise() - rows.colwise().mean();
  return symmetrize(centred.transpose() * centred / static_cast<double>(rows.rows() - 1));
}

inline double plugin_value(const Matrix& a, const KernelMatrix& kernel, int output_width) {
  require(a.cols() == output_width * kernel.k(), "plugin W2: dimension must be n_L * k");
  require(a.rows() > a.cols(), "plugin W2 needs more samples than dimensions");
  return bures_w2(sample_covariance(a), kron_identity(output_width, kernel.values));
}

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& index, Eigen::Index count) {
  Matrix out(count, m.cols());
  for (Eigen::Index r = 0; r < count; ++r) out.row(r) = m.row(index[static_cast<std::size_t>(r)]);
  return out;
}

inline std::vector<Eigen::Index> shuffled(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> index(static_cast<std::size_t>(n));
  std::iota(index.begin(), index.end(), Eigen::Index{0});
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(index[static_cast<std::size_t>(i)],
              index[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
  return index;
}

/// Standard error from five random half-samples: sd(half values) / sqrt(2).
template <typename HalfFn>
double split_half_stderr(Eigen::Index n, Eigen::Index min_half, SeedStream stream, HalfFn&& half_value) {
  const Eigen::Index half = n / 2;
  if (half < std::max<Eigen::Index>(min_half, 1)) return 0.0;
  std::vector<double> values;
  for (int s = 0; s < kSplitHalfRepeats; ++s) {
    Rng rng = stream.child("split-half").child(static_cast<std::uint64_t>(s)).rng();
    const auto first = shuffled(n, rng);
    const auto second = shuffled(n, rng);
    values.push_back(half_value(first, second, half));
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (values.size() - 1)) / std::sqrt(2.0);
}

}  // namespace detail

/// sqrt((1/N) min_pi sum_i ||a_i - b_pi(i)||^2) from an exact assignment.
inline W2Estimate w2_assignment(const OutputSampleSet& a, const OutputSampleSet& b,
                                SeedStream stream = SeedStream(0),
                                Eigen::Index cap = kDefaultAssignmentCap) {
  W2Estimate estimate;
  estimate.method = W2Method::assignment;
  estimate.value = detail::assignment_value(a.rows, b.rows, cap);
  estimate.n_used = a.n_samples();
  estimate.standard_error = detail::split_half_stderr(
      a.n_samples(), 2, stream, [&](const auto& ia, const auto& ib, Eigen::Index half) {
        return detail::assignment_value(detail::take_rows(a.rows, ia, half),
                                        detail::take_rows(b.rows, ib, half), cap);
      });
  return estimate;
}

/// Exact one-dimensional W2 through the monotone (sorted) coupling.
inline W2Estimate w2_sorted_1d(const OutputSampleSet& a, const OutputSampleSet& b,
                               SeedStream stream = SeedStream(0)) {
  W2Estimate estimate;
  estimate.method = W2Method::sorted_1d;
  estimate.value = detail::sorted_1d_value(a.rows, b.rows);
  estimate.n_used = a.n_samples();
  estimate.standard_error = detail::split_half_stderr(
      a.n_samples(), 2, stream, [&](const auto& ia, const auto& ib, Eigen::Index half) {
        return detail::sorted_1d_value(detail::take_rows(a.rows, ia, half),
                                       detail::take_rows(b.rows, ib, half));
      });
  return estimate;
}

/// Bures distance between the sample covariance of `a` and Id_{n_L} (x) K.
///
/// Only second moments are compared; the mean is removed internally.
inline W2Estimate w2_gaussian_plugin(const OutputSampleSet& a, const KernelMatrix& kernel,
                                     int output_width, SeedStream stream = SeedStream(0)) {
  W2Estimate estimate;
  estimate.method = W2Method::gaussian_plugin;
  estimate.value = detail::plugin_value(a.rows, kernel, output_width);
  estimate.n_used = a.n_samples();
  estimate.standard_error = detail::split_half_stderr(
      a.n_samples(), a.dim() + 1, stream, [&](const auto& ia, const auto&, Eigen::Index half) {
        return detail::plugin_value(detail::take_rows(a.rows, ia, half), kernel, output_width);
      });
  return estimate;
}

/// Estimator value only (no resampling); b is ignored by the plug-in method.
inline double w2_value(W2Method method, const OutputSampleSet& a, const OutputSampleSet& b,
                       const KernelMatrix& kernel, int output_width,
                       Eigen::Index cap = kDefaultAssignmentCap) {
  switch (method) {
    case W2Method::assignment: return detail::assignment_value(a.rows, b.rows, cap);
    case W2Method::sorted_1d: return detail::sorted_1d_value(a.rows, b.rows);
    case W2Method::gaussian_plugin: return detail::plugin_value(a.rows, kernel, output_width);
  }
  return 0.0;
}

/// Full estimate (value and split-half stderr) of the chosen method.
inline W2Estimate w2_estimate(W2Method method, const OutputSampleSet& a, const OutputSampleSet& b,
                              const KernelMatrix& kernel, int output_width, SeedStream stream,
                              Eigen::Index cap = kDefaultAssignmentCap) {
  switch (method) {
    case W2Method::assignment: return w2_assignment(a, b, stream, cap);
    case W2Method::sorted_1d: return w2_sorted_1d(a, b, stream);
    case W2Method::gaussian_plugin: return w2_gaussian_plugin(a, kernel, output_width, stream);
  }
  return {};
}

/// Distribution of an estimator between two independent samples of the
/// same limit Gaussian.
struct NullCalibration {
  double mean = 0.0;
  double std = 0.0;
  int repeats = 0;
  bool std_available = false;  // false when repeats == 1; std is then the 0 sentinel
};

inline NullCalibration null_calibration(const KernelMatrix& kernel, int output_width, std::size_t n_samples,
                                        W2Method method, SeedStream stream, int repeats = 20,
                                        Eigen::Index cap = kDefaultAssignmentCap) {
  require(repeats >= 1, "null_calibration needs repeats >= 1");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    const SeedStream repeat = stream.child(static_cast<std::uint64_t>(r));
    const auto first = sample_limit_gaussian(kernel, output_width, n_samples, repeat.child("first"));
    OutputSampleSet second;
    if (method != W2Method::gaussian_plugin)
      second = sample_limit_gaussian(kernel, output_width, n_samples, repeat.child("second"));
    values.push_back(w2_value(method, first, second, kernel, output_width, cap));
  }
  NullCalibration out;
  out.repeats = repeats;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / repeats;
  if (repeats > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (repeats - 1));
    out.std_available = true;
  }
  return out;
}

}  // namespace nngpw
