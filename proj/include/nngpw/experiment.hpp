#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nngpw/bound.hpp"
#include "nngpw/config.hpp"
#include "nngpw/csv.hpp"
#include "nngpw/kernel.hpp"
#include "nngpw/network.hpp"
#include "nngpw/transport.hpp"

namespace nngpw {

struct EstimatorResult {
  std::string selection;  // as configured: auto, sorted_1d, assignment, gaussian_plugin
  W2Method method = W2Method::assignment;
  W2Estimate estimate;
  NullCalibration null;
  double corrected = 0.0;  // max(raw - null mean, 0)
};

struct ResultRow {
  std::string config_hash;
  int depth = 0;
  int hidden_width = 0;
  std::vector<int> widths;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::vector<EstimatorResult> estimates;
  BoundBreakdown bound;
  double duration_seconds = 0.0;
};

struct RunResult {
  std::vector<ResultRow> rows;
  std::filesystem::path csv_path;  // empty when nothing was written
  bool truncated = false;
  std::string truncation_reason;
};

inline constexpr const char* kTruncationMarker = "# TRUNCATED: ";

/// auto: the exact sorted coupling for one-dimensional outputs, assignment otherwise.
inline W2Method resolve_estimator(const std::string& selection, Eigen::Index dim) {
  if (selection == "auto") return dim == 1 ? W2Method::sorted_1d : W2Method::assignment;
  return w2_method_from_string(selection);
}

inline std::vector<std::string> result_columns(const std::vector<std::string>& estimators) {
  std::vector<std::string> columns = {"config_hash", "depth", "hidden_width", "widths", "replicate", "master_seed"};
  for (const auto& e : estimators)
    for (const char* suffix : {"_method", "_raw", "_stderr", "_n", "_null_mean", "_null_std", "_null_repeats",
                               "_corrected"})
      columns.push_back(e + suffix);
  for (const char* c : {"bound_total", "bound_total_error", "bound_terms", "bound_constants", "mc_samples",
                        "duration_s"})
    columns.emplace_back(c);
  return columns;
}

namespace detail {

inline std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += format_double(values[i]);
  }
  return out;
}

inline std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> result_fields(const ResultRow& row) {
  std::vector<std::string> f = {row.config_hash,
                                std::to_string(row.depth),
                                std::to_string(row.hidden_width),
                                detail::join_ints(row.widths),
                                std::to_string(row.replicate),
                                std::to_string(row.seed)};
  for (const auto& e : row.estimates) {
    f.push_back(to_string(e.method));
    f.push_back(format_double(e.estimate.value));
    f.push_back(format_double(e.estimate.standard_error));
    f.push_back(std::to_string(e.estimate.n_used));
    f.push_back(format_double(e.null.mean));
    f.push_back(format_double(e.null.std));
    f.push_back(std::to_string(e.null.repeats));
    f.push_back(format_double(e.corrected));
  }
  f.push_back(format_double(row.bound.total));
  f.push_back(format_double(row.bound.total_error));
  f.push_back(detail::join_doubles(row.bound.terms));
  f.push_back(detail::join_doubles(row.bound.constants));
  f.push_back(std::to_string(row.bound.mc_samples));
  f.push_back(format_double(row.duration_seconds));
  return f;
}

/// Runs sweep cells in a fixed order and appends each finished row to the
/// CSV (flushed per row). Random streams:
///   network samples  master / "cell" / depth / width / replicate / "network"
///   Gaussian samples master / "cell" / depth / width / replicate / "gaussian"
///   split-half       master / "cell" / depth / width / replicate / "split"
///   null calibration master / "null" / depth / method
///   bound constants  master / "bound"
/// so replicates change samples only, never kernels or constants.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig config)
      : config_((config.validate(), std::move(config))), inputs_(config_.inputs()), master_(config_.seed) {
    inputs_.validate();
  }

  RunResult run(const std::vector<std::pair<int, int>>& cells, const std::filesystem::path& csv_path) {
    RunResult result;
    std::ofstream out;
    if (!csv_path.empty()) {
      if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
      out.open(csv_path, std::ios::binary | std::ios::trunc);
      require(out.good(), "cannot write " + csv_path.string());
      write_csv_record(out, result_columns(config_.estimators));
      out.flush();
      result.csv_path = csv_path;
    }
    int max_depth = 1;
    for (const auto& cell : cells) max_depth = std::max(max_depth, cell.first);
    prepare_constants(max_depth);
    try {
      for (const auto& [depth, width] : cells) {
        for (int r = 0; r < config_.replicates; ++r) {
          ResultRow row = run_cell(depth, width, r);
          if (out.is_open()) {
            write_csv_record(out, result_fields(row));
            out.flush();
          }
          result.rows.push_back(std::move(row));
        }
      }
    } catch (const ResourceLimitError& e) {
      result.truncated = true;
      result.truncation_reason = e.what();
      if (out.is_open()) {
        out << kTruncationMarker << e.what() << "\r\n";
        out.flush();
      }
    }
    return result;
  }

  ResultRow run_cell(int depth, int width, int replicate) {
    const auto start = std::chrono::steady_clock::now();
    const NetworkConfig network = config_.network(depth, width);
    ResultRow row;
    row.config_hash = config_hash(network, inputs_);
    row.depth = depth;
    row.hidden_width = width;
    row.widths = network.widths;
    row.replicate = replicate;
    row.seed = config_.seed;

    const KernelMatrix& kernel = kernel_at(depth);
    const SeedStream cell = master_.child("cell")
                                .child(static_cast<std::uint64_t>(depth))
                                .child(static_cast<std::uint64_t>(width))
                                .child(static_cast<std::uint64_t>(replicate));
    if (!config_.estimators.empty()) {
      const OutputSampleSet net = sample_outputs(network, inputs_, config_.n_network, cell.child("network"));
      OutputSampleSet gauss;
      bool have_gauss = false;
      for (const auto& selection : config_.estimators) {
        EstimatorResult e;
        e.selection = selection;
        e.method = resolve_estimator(selection, net.dim());
        if (e.method != W2Method::gaussian_plugin && !have_gauss) {
          gauss = sample_limit_gaussian(kernel, config_.output_width, config_.n_gaussian, cell.child("gaussian"));
          have_gauss = true;
        }
        e.estimate = w2_estimate(e.method, net, gauss, kernel, config_.output_width, cell.child("split"));
        e.null = null_at(depth, e.method);
        e.corrected = std::max(e.estimate.value - e.null.mean, 0.0);
        row.estimates.push_back(e);
      }
    }

    row.bound = detail::assemble_bound(network, depth, constants_);
    row.bound.mc_samples = config_.mc_samples;
    row.bound.seed = master_.child("bound").key();
    row.bound.config_hash = row.config_hash;
    row.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
  }

  const ExperimentConfig& config() const { return config_; }
  const InputSet& inputs() const { return inputs_; }

 private:
  void prepare_constants(int max_depth) {
    if (max_depth <= constants_depth_) return;
    const NetworkConfig deepest = config_.network(max_depth, config_.hidden_width);
    chain_ = kernel_chain(deepest, inputs_, detail::preferred_backend(deepest.activation));
    constants_ = detail::chain_constants(deepest, chain_, max_depth, config_.mc_samples, master_.child("bound"));
    constants_depth_ = max_depth;
  }

  const KernelMatrix& kernel_at(int depth) {
    prepare_constants(depth);
    return chain_[static_cast<std::size_t>(depth - 1)];
  }

  const NullCalibration& null_at(int depth, W2Method method) {
    const auto key = std::make_pair(depth, static_cast<int>(method));
    auto it = nulls_.find(key);
    if (it == nulls_.end()) {
      const std::size_t n = method == W2Method::gaussian_plugin ? config_.n_network : config_.n_gaussian;
      const SeedStream stream =
          master_.child("null").child(static_cast<std::uint64_t>(depth)).child(to_string(method));
      it = nulls_.emplace(key, null_calibration(kernel_at(depth), config_.output_width, n, method, stream,
                                                config_.null_repeats))
               .first;
    }
    return it->second;
  }

  ExperimentConfig config_;
  InputSet inputs_;
  SeedStream master_;
  std::vector<KernelMatrix> chain_;
  std::vector<ConstantEstimate> constants_;
  int constants_depth_ = 0;
  std::map<std::pair<int, int>, NullCalibration> nulls_;
};

/// One row per (width, replicate) at the configured depth.
inline RunResult run_width_sweep(const ExperimentConfig& config, bool write_csv = true) {
  require(!config.sweep_widths.empty(), "width sweep needs a non-empty sweep_widths list");
  std::vector<std::pair<int, int>> cells;
  for (const int w : config.sweep_widths) cells.emplace_back(config.depth, w);
  ExperimentRunner runner(config);
  return runner.run(cells, write_csv ? config.resolved_output_dir() / "width_sweep.csv" : std::filesystem::path());
}

/// One row per (depth, replicate) at hidden_width.
inline RunResult run_depth_profile(const ExperimentConfig& config, bool write_csv = true) {
  require(!config.sweep_depths.empty(), "depth profile needs a non-empty sweep_depths list");
  std::vector<std::pair<int, int>> cells;
  for (const int d : config.sweep_depths) cells.emplace_back(d, config.hidden_width);
  ExperimentRunner runner(config);
  return runner.run(cells, write_csv ? config.resolved_output_dir() / "depth_profile.csv" : std::filesystem::path());
}

/// CSV body with the duration column removed, for run-to-run comparison.
inline std::string csv_body_without_duration(std::istream& in) {
  const CsvTable table = read_csv(in);
  const auto duration = table.column("duration_s");
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& record) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < record.size(); ++i)
      if (!duration || i != *duration) kept.push_back(record[i]);
    write_csv_record(out, kept);
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  for (const auto& c : table.comments) out << '#' << c << "\r\n";
  return out.str();
}

}  // namespace nngpw
