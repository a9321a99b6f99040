#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nngpw/assignment.hpp"
#include "nngpw/bound.hpp"
#include "nngpw/experiment.hpp"
#include "nngpw/kernel.hpp"
#include "nngpw/psd.hpp"
#include "nngpw/transport.hpp"

namespace nngpw {

inline const std::vector<std::string>& verify_modules() {
  static const std::vector<std::string> modules = {"net_sim",   "nngp_kernel",  "psd_algebra",
                                                   "transport", "bound_engine", "experiment_harness"};
  return modules;
}

struct VerifyOptions {
  /// Closed form compared against quadrature in the backend-equivalence check.
  std::function<double(const BivariateMoment&)> relu_closed_form = relu_pair_closed_form;
};

struct CheckResult {
  std::string module;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

inline void to_json(nlohmann::json& j, const CheckResult& c) {
  j = nlohmann::json{{"module", c.module},     {"check", c.name},           {"passed", c.passed},
                     {"measured", c.measured}, {"threshold", c.threshold}, {"detail", c.detail}};
}

namespace detail {

struct Measured {
  double value;
  double threshold;
  bool passed;
  std::string detail;
};

inline Measured at_most(double value, double threshold, std::string detail = {}) {
  return {value, threshold, std::isfinite(value) && value <= threshold, std::move(detail)};
}

inline Matrix random_spd(Eigen::Index d, Rng& rng, double floor = 0.0) {
  Matrix g(d, d);
  rng.fill_normal(g);
  return symmetrize(g * g.transpose() / static_cast<double>(d)) + floor * Matrix::Identity(d, d);
}

inline Matrix random_cloud(Eigen::Index n, Eigen::Index dim, Rng& rng) {
  Matrix m(n, dim);
  rng.fill_normal(m);
  return m;
}

inline OutputSampleSet as_samples(Matrix rows) {
  OutputSampleSet s;
  s.rows = std::move(rows);
  return s;
}

using CheckFn = std::function<Measured(SeedStream)>;

inline std::vector<std::pair<std::string, CheckFn>> module_checks(const std::string& module,
                                                                  const VerifyOptions& options) {
  std::vector<std::pair<std::string, CheckFn>> checks;
  if (module == "net_sim") {
    checks.emplace_back("zero_bias", [](SeedStream s) {
      NetworkConfig c = NetworkConfig::uniform(3, 5, 3, 2, {1.0, 0.0}, Activation::relu());
      const ParamDraw p = sample_params(c, s);
      double worst = 0.0;
      for (const auto& b : p.biases) worst = std::max(worst, b.cwiseAbs().maxCoeff());
      return at_most(worst, 0.0);
    });
    checks.emplace_back("weight_variance", [](SeedStream s) {
      NetworkConfig c;
      c.widths = {1000, 2};
      c.variances = {{1.0, 0.0}};
      const Matrix w = sample_params(c, s).weights[0];
      const double mean = w.mean();
      const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
      return at_most(std::abs(var / 0.001 - 1.0), 0.15, "relative deviation of sample variance from c_w/n_0");
    });
    checks.emplace_back("determinism", [](SeedStream s) {
      NetworkConfig c = NetworkConfig::uniform(2, 6, 3, 2, {1.0, 0.5}, Activation::tanh());
      const InputSet x = InputSet::on_sphere(2, 3, s.child("inputs"));
      const auto a = sample_outputs(c, x, 50, s.child("samples"));
      const auto b = sample_outputs(c, x, 50, s.child("samples"));
      return at_most((a.rows - b.rows).cwiseAbs().maxCoeff(), 0.0);
    });
    checks.emplace_back("forward_example", [](SeedStream) {
      ParamDraw p;
      p.weights = {(Matrix(1, 1) << -1).finished(), (Matrix(1, 1) << 5).finished()};
      p.biases = {Vector::Zero(1), (Vector(1) << 7).finished()};
      const double out = forward(p, InputSet{(Matrix(1, 1) << 2).finished()}, Activation::relu()).final_layer()(0, 0);
      return at_most(std::abs(out - 7.0), 0.0);
    });
    checks.emplace_back("base_case_covariance", [](SeedStream s) {
      NetworkConfig c;
      c.widths = {3, 2};
      c.variances = {{1.5, 0.5}};
      const InputSet x = InputSet::on_sphere(3, 2, s.child("inputs"));
      constexpr int kN = 20000;
      const auto samples = sample_outputs(c, x, kN, s.child("samples"));
      const Matrix second = samples.rows.transpose() * samples.rows / kN;
      const Matrix expected = kron_identity(2, kernel_base(x, 1.5, 0.5).values);
      const double dim = static_cast<double>(samples.dim());
      return at_most((second - expected).norm(), 5.0 * dim / std::sqrt(kN), "Frobenius error of MC covariance");
    });
  } else if (module == "nngp_kernel") {
    checks.emplace_back("backend_equivalence", [relu = options.relu_closed_form](SeedStream s) {
      Rng rng = s.rng();
      double worst = 0.0;
      for (int i = 0; i < 1000; ++i) {
        const double xx = 10.0 * rng.uniform(), yy = 10.0 * rng.uniform();
        const double rho = 2.0 * rng.uniform() - 1.0;
        const BivariateMoment m{xx, rho * std::sqrt(xx * yy), yy};
        worst = std::max(worst, std::abs(relu(m) - gaussian_pair_expectation(m, Activation::relu(), Backend::quadrature)));
        worst = std::max(worst, std::abs(m.xy - gaussian_pair_expectation(m, Activation::identity(), Backend::quadrature)));
      }
      return at_most(worst, 1e-8, "max |closed form - quadrature| over 1000 moments");
    });
    checks.emplace_back("relu_examples", [](SeedStream) {
      const double a = std::abs(gaussian_pair_expectation({1, 1, 1}, Activation::relu(), Backend::closed_form) - 0.5);
      const double b = std::abs(gaussian_pair_expectation({1, -1, 1}, Activation::relu(), Backend::closed_form));
      const double c = std::abs(gaussian_pair_expectation({1, 0, 1}, Activation::relu(), Backend::closed_form) -
                                1.0 / (2.0 * std::numbers::pi));
      return at_most(std::max({a, b, c}), 1e-14);
    });
    checks.emplace_back("monte_carlo_consistency", [](SeedStream s) {
      const InputSet x = InputSet::on_sphere(3, 3, s.child("inputs"));
      const KernelMatrix k1 = kernel_base(x, 1.0, 0.3);
      const KernelMatrix k2 = kernel_step(k1, Activation::relu(), 1.5, 0.3, Backend::closed_form);
      const Matrix root = sqrt_psd(k1.values);
      constexpr std::size_t kDraws = 200000;
      Matrix sum = Matrix::Zero(3, 3), sum_sq = Matrix::Zero(3, 3);
      Vector z(3);
      for_each_draw(kDraws, s.child("draws"), [&](Rng& rng) {
        rng.fill_normal(z);
        const Vector a = (root * z).cwiseMax(0.0);
        const Matrix v = 1.5 * a * a.transpose() + 0.3 * Matrix::Ones(3, 3);
        sum += v;
        sum_sq += v.cwiseAbs2();
      });
      const Matrix mean = sum / kDraws;
      const Matrix se = ((sum_sq / kDraws - mean.cwiseAbs2()) / kDraws).cwiseSqrt();
      return at_most(((mean - k2.values).cwiseAbs().array() / se.array()).maxCoeff(), 5.0,
                     "max deviation in standard errors");
    });
    checks.emplace_back("chain_psd", [](SeedStream s) {
      const NetworkConfig c = NetworkConfig::uniform(3, 8, 20, 1, {1.2, 0.1}, Activation::tanh());
      const InputSet x = InputSet::on_sphere(3, 4, s);
      double worst = 0.0;
      for (const auto& k : kernel_chain(c, x, Backend::quadrature)) {
        const auto spectrum = decompose(k.values);
        worst = std::max(worst, -spectrum.smallest() / spectrum.largest());
      }
      return at_most(worst, kPsdTolerance, "worst relative negative eigenvalue");
    });
  } else if (module == "psd_algebra") {
    checks.emplace_back("sqrt_reconstruction", [](SeedStream s) {
      Rng rng = s.rng();
      double worst = 0.0;
      for (int t = 0; t < 200; ++t) {
        const Matrix m = random_spd(1 + static_cast<Eigen::Index>(rng.below(16)), rng);
        const Matrix r = sqrt_psd(m);
        worst = std::max(worst, (r * r - m).norm() / (1.0 + m.norm()));
      }
      return at_most(worst, 1e-8);
    });
    checks.emplace_back("perturbation_bound", [](SeedStream s) {
      Rng rng = s.rng();
      double worst = -std::numeric_limits<double>::infinity();
      for (int t = 0; t < 1000; ++t) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
        const auto b = sqrt_perturbation_bound(random_spd(d, rng, 0.1), random_spd(d, rng));
        worst = std::max(worst, b.lhs - b.rhs);
      }
      return at_most(worst, 0.0, "max(lhs - rhs)");
    });
    checks.emplace_back("bures_dominance", [](SeedStream s) {
      Rng rng = s.rng();
      double worst = -std::numeric_limits<double>::infinity();
      for (int t = 0; t < 1000; ++t) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
        const Matrix a = random_spd(d, rng), b = random_spd(d, rng);
        worst = std::max(worst, bures_w2(a, b) - (sqrt_psd(a) - sqrt_psd(b)).norm());
      }
      return at_most(worst, 1e-10, "max(bures - ||sqrt A - sqrt B||)");
    });
    checks.emplace_back("bures_metric", [](SeedStream s) {
      Rng rng = s.rng();
      double worst = 0.0;
      for (int t = 0; t < 200; ++t) {
        const Matrix a = random_spd(3, rng), b = random_spd(3, rng), c = random_spd(3, rng);
        const double ab = bures_w2(a, b);
        worst = std::max(worst, std::abs(ab - bures_w2(b, a)));
        worst = std::max(worst, ab - bures_w2(a, c) - bures_w2(c, b));
      }
      return at_most(worst, 1e-9);
    });
    checks.emplace_back("kron_sqrt", [](SeedStream s) {
      Rng rng = s.rng();
      const Matrix a = random_spd(4, rng);
      return at_most((sqrt_psd(kron_identity(3, a)) - kron_identity(3, sqrt_psd(a))).cwiseAbs().maxCoeff(), 1e-10);
    });
  } else if (module == "transport") {
    checks.emplace_back("assignment_brute_force", [](SeedStream s) {
      Rng rng = s.rng();
      double worst = 0.0;
      std::vector<int> perm(6);
      for (int t = 0; t < 100; ++t) {
        const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.below(4));
        const Matrix a = random_cloud(6, dim, rng), b = random_cloud(6, dim, rng);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
          double cost = 0.0;
          for (int i = 0; i < 6; ++i) cost += (a.row(i) - b.row(perm[static_cast<std::size_t>(i)])).squaredNorm();
          best = std::min(best, cost);
        } while (std::next_permutation(perm.begin(), perm.end()));
        worst = std::max(worst, std::abs(w2_assignment(as_samples(a), as_samples(b)).value - std::sqrt(best / 6.0)));
      }
      return at_most(worst, 1e-10);
    });
    checks.emplace_back("sorted_equals_assignment", [](SeedStream s) {
      Rng rng = s.rng();
      double worst = 0.0;
      for (int t = 0; t < 100; ++t) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(40));
        const auto a = as_samples(random_cloud(n, 1, rng)), b = as_samples(random_cloud(n, 1, rng));
        worst = std::max(worst, std::abs(w2_sorted_1d(a, b).value - w2_assignment(a, b).value));
      }
      return at_most(worst, 1e-10);
    });
    checks.emplace_back("metric_and_shift", [](SeedStream s) {
      Rng rng = s.rng();
      double worst = 0.0;
      for (int t = 0; t < 20; ++t) {
        const Matrix a = random_cloud(30, 2, rng), b = random_cloud(30, 2, rng), c = random_cloud(30, 2, rng);
        const double ab = w2_assignment(as_samples(a), as_samples(b)).value;
        worst = std::max(worst, std::abs(ab - w2_assignment(as_samples(b), as_samples(a)).value));
        worst = std::max(worst, ab - w2_assignment(as_samples(a), as_samples(c)).value -
                                    w2_assignment(as_samples(c), as_samples(b)).value);
        const Eigen::RowVector2d shift(1.5, -2.0);
        worst = std::max(worst, std::abs(ab - w2_assignment(as_samples(a.rowwise() + shift),
                                                            as_samples(b.rowwise() + shift)).value));
        worst = std::max(worst, ab - std::sqrt((a - b).rowwise().squaredNorm().mean()));
      }
      return at_most(worst, 1e-9);
    });
    checks.emplace_back("null_sorted_bias", [](SeedStream s) {
      const KernelMatrix k{1, Matrix::Identity(1, 1), true};
      return at_most(null_calibration(k, 1, 10000, W2Method::sorted_1d, s).mean, 0.05, "null mean at N = 10^4");
    });
  } else if (module == "bound_engine") {
    const KernelMatrix unit{1, Matrix::Identity(1, 1), true};
    checks.emplace_back("constant_identity", [unit](SeedStream s) {
      const auto c = estimate_constant(unit, Activation::identity(), 1.0, kDefaultMcSamples, s);
      return at_most(std::abs(c.value - std::sqrt(2.0)) / c.standard_error, 3.0, "deviation in standard errors");
    });
    checks.emplace_back("constant_relu", [unit](SeedStream s) {
      const auto c = estimate_constant(unit, Activation::relu(), 1.0, kDefaultMcSamples, s);
      return at_most(std::abs(c.value - std::sqrt(2.5)) / c.standard_error, 3.0, "deviation in standard errors");
    });
    checks.emplace_back("width_homogeneity", [](SeedStream s) {
      const InputSet x = InputSet::on_sphere(2, 2, s.child("inputs"));
      NetworkConfig c = NetworkConfig::uniform(2, 16, 4, 1, {1.0, 1.0}, Activation::relu());
      const double base = rhs_bound(c, x, 5000, s.child("bound")).total;
      for (std::size_t i = 1; i + 1 < c.widths.size(); ++i) c.widths[i] *= 2;
      const double doubled = rhs_bound(c, x, 5000, s.child("bound")).total;
      return at_most(std::abs(doubled * std::sqrt(2.0) / base - 1.0), 1e-12);
    });
    checks.emplace_back("lemma_gaussian", [](SeedStream s) {
      const auto c = lemma_sqrt_check(VectorSampler::gaussian(Matrix::Identity(2, 2)), 10, 2000, s);
      return Measured{c.lhs, c.rhs + 3.0 * c.lhs_error, c.margin_ok, "lhs vs rhs + 3 stderr"};
    });
    checks.emplace_back("wa_covariance", [](SeedStream s) {
      Rng rng = s.child("a").rng();
      const Matrix a = random_cloud(4, 2, rng);
      return at_most(wa_covariance_check(a, 1.3, 2, 200000, s.child("mc")), 5.0, "max deviation in standard errors");
    });
  } else if (module == "experiment_harness") {
    checks.emplace_back("sweep_determinism", [](SeedStream s) {
      ExperimentConfig c;
      c.depth = 2;
      c.input_dim = 2;
      c.k = 1;
      c.sweep_widths = {4, 8};
      c.n_network = c.n_gaussian = 200;
      c.mc_samples = 1000;
      c.null_repeats = 3;
      c.replicates = 2;
      c.seed = s.key();
      const auto first = run_width_sweep(c, false);
      const auto second = run_width_sweep(c, false);
      double mismatches = 0.0;
      for (std::size_t r = 0; r < first.rows.size(); ++r) {
        auto a = result_fields(first.rows[r]);
        auto b = result_fields(second.rows[r]);
        a.pop_back();
        b.pop_back();
        if (a != b) mismatches += 1.0;
      }
      return at_most(mismatches, 0.0, "rows differing between two identical runs");
    });
    checks.emplace_back("csv_round_trip", [](SeedStream) {
      std::stringstream buffer;
      const std::vector<std::string> header = {"a", "b,c", "d\"e"};
      const std::vector<std::string> row = {"1", "two\nlines", ""};
      write_csv_record(buffer, header);
      write_csv_record(buffer, row);
      const CsvTable t = read_csv(buffer);
      const bool ok = t.header == header && t.rows.size() == 1 && t.rows[0] == row;
      return Measured{ok ? 0.0 : 1.0, 0.0, ok, "RFC 4180 quoting"};
    });
  }
  return checks;
}

}  // namespace detail

/// Runs the invariant campaign of the selected modules. Failures are report
/// entries; exceptions inside a check are recorded as failures.
inline nlohmann::json verify_all(std::uint64_t seed, const std::vector<std::string>& modules,
                                 const VerifyOptions& options = {}) {
  for (const auto& m : modules) {
    const auto& known = verify_modules();
    require(std::find(known.begin(), known.end(), m) != known.end(), "unknown module '" + m + "'");
  }
  const SeedStream master(seed);
  std::vector<CheckResult> results;
  for (const auto& module : modules) {
    for (const auto& [name, fn] : detail::module_checks(module, options)) {
      CheckResult r;
      r.module = module;
      r.name = name;
      try {
        const detail::Measured m = fn(master.child(module).child(name));
        r.passed = m.passed;
        r.measured = m.value;
        r.threshold = m.threshold;
        r.detail = m.detail;
      } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
      }
      results.push_back(std::move(r));
    }
  }
  std::size_t failures = 0;
  for (const auto& r : results) failures += r.passed ? 0 : 1;
  return nlohmann::json{{"seed", seed},
                        {"modules", modules},
                        {"checks", results},
                        {"failures", failures},
                        {"passed", failures == 0}};
}

}  // namespace nngpw
