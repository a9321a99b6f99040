#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "nngpw/errors.hpp"

namespace nngpw {

/// Nodes and weights of a one-dimensional Gauss rule.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule on [-1, 1] (weight 1), by Newton iteration on P_n.
inline GaussRule gauss_legendre(int order) {
  require(order >= 1, "quadrature order must be >= 1");
  const int n = order;
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      derivative = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / derivative;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double weight = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = weight;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = weight;
  }
  return rule;
}

/// Gauss-Laguerre rule on [0, inf) with weight exp(-t).
///
/// Golub-Welsch eigenvalues seed a Newton polish on L_n; weights come from
/// 1 / (t L_n'(t)^2).
inline GaussRule gauss_laguerre(int order) {
  require(order >= 1, "quadrature order must be >= 1");
  const int n = order;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    jacobi(i, i) = 2.0 * i + 1.0;
    if (i + 1 < n) jacobi(i, i + 1) = jacobi(i + 1, i) = i + 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
  GaussRule rule;
  for (int i = 0; i < n; ++i) {
    double t = solver.eigenvalues()(i);
    double derivative = 0.0;
    for (int iter = 0; iter < 20; ++iter) {
      double l0 = 1.0;
      double l1 = 1.0 - t;
      for (int j = 1; j < n; ++j) {
        const double l2 = ((2.0 * j + 1.0 - t) * l1 - j * l0) / (j + 1.0);
        l0 = l1;
        l1 = l2;
      }
      if (n == 1) l0 = 1.0;
      derivative = n * (l1 - l0) / t;
      const double step = l1 / derivative;
      t -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, t)) break;
    }
    rule.nodes.push_back(t);
    rule.weights.push_back(1.0 / (t * derivative * derivative));
  }
  return rule;
}

/// Product rule for E[g(Z)], Z standard normal in R^2, written in polar
/// coordinates: Gauss-Laguerre in t = r^2 / 2 and Gauss-Legendre on angular
/// arcs.
///
/// Callers pass the angles at which g has a kink along rays (e.g. where a
/// ReLU argument changes sign); the angular integral is split there so each
/// arc sees a smooth integrand.
class PolarGaussianRule {
 public:
  explicit PolarGaussianRule(int order)
      : order_(order), legendre_(gauss_legendre(order)), laguerre_(gauss_laguerre(order)) {}

  int order() const { return order_; }

  template <typename Integrand>
  double expectation(Integrand&& g, std::vector<double> breakpoints) const {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    for (double& angle : breakpoints) {
      angle = std::fmod(angle, kTwoPi);
      if (angle < 0.0) angle += kTwoPi;
    }
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end(),
                                  [](double a, double b) { return std::abs(a - b) < 1e-15; }),
                      breakpoints.end());
    if (breakpoints.empty()) breakpoints.push_back(0.0);

    std::vector<double> radii(laguerre_.size());
    for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = std::sqrt(2.0 * laguerre_.nodes[i]);

    double total = 0.0;
    for (std::size_t a = 0; a < breakpoints.size(); ++a) {
      const double lo = breakpoints[a];
      const double hi = a + 1 < breakpoints.size() ? breakpoints[a + 1] : breakpoints[0] + kTwoPi;
      const double half = 0.5 * (hi - lo);
      if (half <= 0.0) continue;
      const double mid = 0.5 * (hi + lo);
      double arc = 0.0;
      for (std::size_t i = 0; i < legendre_.size(); ++i) {
        const double angle = mid + half * legendre_.nodes[i];
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        double radial = 0.0;
        for (std::size_t j = 0; j < radii.size(); ++j)
          radial += laguerre_.weights[j] * g(radii[j] * c, radii[j] * s);
        arc += legendre_.weights[i] * radial;
      }
      total += half * arc;
    }
    return total / kTwoPi;
  }

 private:
  int order_;
  GaussRule legendre_;
  GaussRule laguerre_;
};

/// Shared, lazily built rule per order.
inline const PolarGaussianRule& polar_rule(int order) {
  static std::mutex mutex;
  static std::map<int, PolarGaussianRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, PolarGaussianRule(order)).first;
  return it->second;
}

}  // namespace nngpw
