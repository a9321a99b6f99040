#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nngpw/activation.hpp"
#include "nngpw/errors.hpp"
#include "nngpw/network.hpp"
#include "nngpw/transport.hpp"

namespace nngpw {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "NNGPW_OUTPUT_DIR";

/// Declarative experiment description, read from a flat JSON object.
///
/// The architecture is a constant-width template: n_0 = input_dim, every
/// hidden layer has `hidden_width` (or a swept width) and the last layer has
/// `output_width`.
struct ExperimentConfig {
  int schema_version = kSchemaVersion;

  int depth = 2;
  int input_dim = 1;
  int output_width = 1;
  int hidden_width = 16;
  double c_w = 1.0;
  double c_b = 1.0;
  std::string activation = "relu";

  int k = 1;
  std::uint64_t input_seed = 7;
  std::vector<std::vector<double>> input_points;  // inline inputs; empty means sphere draws

  std::vector<int> sweep_widths;
  std::vector<int> sweep_depths;

  std::vector<std::string> estimators = {"auto"};
  std::size_t n_network = 4096;
  std::size_t n_gaussian = 4096;
  std::size_t mc_samples = 100'000;
  int null_repeats = 20;
  int replicates = 5;

  std::uint64_t seed = 1;
  std::string output_dir = "results";

  void validate() const {
    require(schema_version == kSchemaVersion, "unsupported schema_version " + std::to_string(schema_version));
    require(depth >= 1, "depth must be >= 1");
    require(input_dim >= 1 && output_width >= 1 && hidden_width >= 1, "widths must be >= 1");
    require(c_w > 0.0 && c_b >= 0.0, "need c_w > 0 and c_b >= 0");
    Activation::from_name(activation);
    require(n_network >= 100 && n_gaussian >= 100 && mc_samples >= 100, "sample sizes must be >= 100");
    require(null_repeats >= 1 && replicates >= 1, "null_repeats and replicates must be >= 1");
    for (const int w : sweep_widths) require(w >= 1, "sweep widths must be >= 1");
    for (const int d : sweep_depths) require(d >= 1, "sweep depths must be >= 1");
    std::set<std::string> seen;
    for (const auto& e : estimators) {
      if (e != "auto") w2_method_from_string(e);
      require(seen.insert(e).second, "estimator '" + e + "' listed twice");
    }
    for (const auto& e : estimators)
      if (e != "gaussian_plugin")
        require(n_network == n_gaussian, "coupling estimators need n_network == n_gaussian");
    if (input_points.empty()) {
      require(k >= 1, "k must be >= 1");
    } else {
      for (const auto& p : input_points)
        require(static_cast<int>(p.size()) == input_dim, "every inline input point needs input_dim coordinates");
    }
  }

  Activation make_activation() const { return Activation::from_name(activation); }

  NetworkConfig network(int at_depth, int width) const {
    return NetworkConfig::uniform(input_dim, width, at_depth, output_width, {c_w, c_b}, make_activation());
  }

  InputSet inputs() const {
    if (input_points.empty()) return InputSet::on_sphere(input_dim, k, SeedStream(input_seed));
    InputSet set{Matrix(input_dim, static_cast<Eigen::Index>(input_points.size()))};
    for (std::size_t j = 0; j < input_points.size(); ++j)
      for (int i = 0; i < input_dim; ++i) set.points(i, static_cast<Eigen::Index>(j)) = input_points[j][static_cast<std::size_t>(i)];
    return set;
  }

  /// Output directory after the environment override.
  std::filesystem::path resolved_output_dir() const {
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
    return output_dir;
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"schema_version", c.schema_version},
                     {"depth", c.depth},
                     {"input_dim", c.input_dim},
                     {"output_width", c.output_width},
                     {"hidden_width", c.hidden_width},
                     {"c_w", c.c_w},
                     {"c_b", c.c_b},
                     {"activation", c.activation},
                     {"k", c.k},
                     {"input_seed", c.input_seed},
                     {"input_points", c.input_points},
                     {"sweep_widths", c.sweep_widths},
                     {"sweep_depths", c.sweep_depths},
                     {"estimators", c.estimators},
                     {"n_network", c.n_network},
                     {"n_gaussian", c.n_gaussian},
                     {"mc_samples", c.mc_samples},
                     {"null_repeats", c.null_repeats},
                     {"replicates", c.replicates},
                     {"seed", c.seed},
                     {"output_dir", c.output_dir}};
}

namespace detail {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Unknown keys are rejected; missing keys keep their defaults.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  require(j.is_object(), "config must be a JSON object");
  require(j.contains("schema_version"), "config must declare schema_version");
  static const std::set<std::string> known = {
      "schema_version", "depth", "input_dim", "output_width", "hidden_width", "c_w", "c_b",
      "activation", "k", "input_seed", "input_points", "sweep_widths", "sweep_depths", "estimators",
      "n_network", "n_gaussian", "mc_samples", "null_repeats", "replicates", "seed", "output_dir"};
  for (const auto& item : j.items())
    require(known.count(item.key()) == 1, "unknown config key '" + item.key() + "'");
  ExperimentConfig c;
  detail::read_key(j, "schema_version", c.schema_version);
  detail::read_key(j, "depth", c.depth);
  detail::read_key(j, "input_dim", c.input_dim);
  detail::read_key(j, "output_width", c.output_width);
  detail::read_key(j, "hidden_width", c.hidden_width);
  detail::read_key(j, "c_w", c.c_w);
  detail::read_key(j, "c_b", c.c_b);
  detail::read_key(j, "activation", c.activation);
  detail::read_key(j, "k", c.k);
  detail::read_key(j, "input_seed", c.input_seed);
  detail::read_key(j, "input_points", c.input_points);
  detail::read_key(j, "sweep_widths", c.sweep_widths);
  detail::read_key(j, "sweep_depths", c.sweep_depths);
  detail::read_key(j, "estimators", c.estimators);
  detail::read_key(j, "n_network", c.n_network);
  detail::read_key(j, "n_gaussian", c.n_gaussian);
  detail::read_key(j, "mc_samples", c.mc_samples);
  detail::read_key(j, "null_repeats", c.null_repeats);
  detail::read_key(j, "replicates", c.replicates);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "output_dir", c.output_dir);
  if (!c.input_points.empty()) c.k = static_cast<int>(c.input_points.size());
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace nngpw
