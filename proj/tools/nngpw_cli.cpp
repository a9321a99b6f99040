#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nngpw/nngpw.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;

std::vector<std::string> split_modules(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

nngpw::Backend backend_for(const std::string& name, const nngpw::Activation& activation) {
  if (name == "auto") return nngpw::detail::preferred_backend(activation);
  return nngpw::backend_from_string(name);
}

int report_run(const nngpw::RunResult& result) {
  std::cout << result.csv_path.string() << "\n";
  std::cerr << result.rows.size() << " rows written\n";
  if (result.truncated) {
    std::cerr << "run truncated: " << result.truncation_reason << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-width network vs NNGP limit: kernels, Wasserstein estimates and bounds"};
  app.require_subcommand(1);

  std::string config_path;
  int width = 0;
  int depth = 0;

  auto* kernel = app.add_subcommand("kernel", "print K^(1..L) as JSON");
  std::string backend = "auto";
  int order = nngpw::kDefaultQuadratureOrder;
  kernel->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  kernel->add_option("--depth", depth, "override depth");
  kernel->add_option("--backend", backend, "auto, closed_form or quadrature");
  kernel->add_option("--order", order, "quadrature order");

  auto* simulate = app.add_subcommand("simulate", "sample network (or limit Gaussian) outputs to CSV");
  std::size_t samples = 0;
  bool gaussian = false;
  std::string output;
  std::uint64_t seed_override = 0;
  simulate->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  simulate->add_option("-n,--samples", samples, "number of samples (default n_network)");
  simulate->add_option("--width", width, "hidden width (default hidden_width)");
  simulate->add_option("--depth", depth, "depth (default depth)");
  simulate->add_flag("--gaussian", gaussian, "draw from the limit Gaussian instead");
  simulate->add_option("--seed", seed_override, "seed (default: config seed)");
  simulate->add_option("-o,--output", output, "output file, '-' for stdout (default <output_dir>/samples.csv)");

  auto* bound = app.add_subcommand("bound", "print the bound breakdown as JSON");
  int layer = 0;
  bound->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  bound->add_option("--width", width, "hidden width (default hidden_width)");
  bound->add_option("--depth", depth, "depth (default depth)");
  bound->add_option("--layer", layer, "evaluate at an intermediate layer");

  auto* verify = app.add_subcommand("verify", "run the invariant campaign");
  std::uint64_t verify_seed = 1;
  std::string modules = "all";
  verify->add_option("--seed", verify_seed, "master seed");
  verify->add_option("--modules", modules, "comma-separated module list, 'all' or ''");

  auto* sweep = app.add_subcommand("sweep", "width sweep to <output_dir>/width_sweep.csv");
  sweep->add_option("-c,--config", config_path, "experiment config (JSON)")->required();

  auto* depth_cmd = app.add_subcommand("depth", "depth profile to <output_dir>/depth_profile.csv");
  depth_cmd->add_option("-c,--config", config_path, "experiment config (JSON)")->required();

  auto* plot = app.add_subcommand("plot", "SVG plots from a results CSV");
  std::string results;
  std::string plot_dir;
  plot->add_option("-r,--results", results, "results CSV")->required();
  plot->add_option("-o,--out", plot_dir, "output directory (default: next to the CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*kernel) {
      const auto cfg = nngpw::load_config(config_path);
      const auto net = cfg.network(depth > 0 ? depth : cfg.depth, cfg.hidden_width);
      const auto chain = nngpw::kernel_chain(net, cfg.inputs(), backend_for(backend, net.activation), order);
      std::cout << nlohmann::json(chain).dump(2) << "\n";
      return kExitOk;
    }
    if (*simulate) {
      auto cfg = nngpw::load_config(config_path);
      const int d = depth > 0 ? depth : cfg.depth;
      const auto net = cfg.network(d, width > 0 ? width : cfg.hidden_width);
      const auto inputs = cfg.inputs();
      const std::size_t n = samples > 0 ? samples : cfg.n_network;
      const nngpw::SeedStream stream(seed_override != 0 ? seed_override : cfg.seed);
      nngpw::OutputSampleSet set;
      if (gaussian) {
        const auto chain = nngpw::kernel_chain(net, inputs, nngpw::detail::preferred_backend(net.activation));
        set = nngpw::sample_limit_gaussian(chain.back(), cfg.output_width, n, stream.child("gaussian"));
      } else {
        set = nngpw::sample_outputs(net, inputs, n, stream.child("network"));
        set.source_id = nngpw::config_hash(net, inputs);
      }
      if (output == "-") {
        nngpw::write_samples_csv(std::cout, set);
        return kExitOk;
      }
      const std::filesystem::path path = output.empty() ? cfg.resolved_output_dir() / "samples.csv" : std::filesystem::path(output);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      std::ofstream out(path, std::ios::binary);
      nngpw::require(out.good(), "cannot write " + path.string());
      nngpw::write_samples_csv(out, set);
      std::cout << path.string() << "\n";
      return kExitOk;
    }
    if (*bound) {
      const auto cfg = nngpw::load_config(config_path);
      const auto net = cfg.network(depth > 0 ? depth : cfg.depth, width > 0 ? width : cfg.hidden_width);
      std::optional<int> at;
      if (layer > 0) at = layer;
      const auto breakdown =
          nngpw::rhs_bound(net, cfg.inputs(), cfg.mc_samples, nngpw::SeedStream(cfg.seed).child("bound"), at);
      std::cout << nlohmann::json(breakdown).dump(2) << "\n";
      return kExitOk;
    }
    if (*verify) {
      const auto selected = modules == "all" ? nngpw::verify_modules() : split_modules(modules);
      const auto report = nngpw::verify_all(verify_seed, selected);
      std::cout << report.dump(2) << "\n";
      return report.at("passed").get<bool>() ? kExitOk : kExitInvariant;
    }
    if (*sweep) return report_run(nngpw::run_width_sweep(nngpw::load_config(config_path)));
    if (*depth_cmd) return report_run(nngpw::run_depth_profile(nngpw::load_config(config_path)));
    if (*plot) {
      const std::filesystem::path csv = results;
      const std::filesystem::path dir = plot_dir.empty() ? csv.parent_path() : std::filesystem::path(plot_dir);
      const auto report = nngpw::emit_plots(csv, dir.empty() ? "." : dir);
      nlohmann::json j;
      j["axis"] = report.axis;
      j["warnings"] = report.warnings;
      j["files"] = nlohmann::json::array();
      for (const auto& f : report.files) j["files"].push_back(f.string());
      j["slopes"] = nlohmann::json::object();
      for (const auto& s : report.series)
        if (s.fitted) j["slopes"][s.name] = nngpw::format_slope(s.slope);
      std::cout << j.dump(2) << "\n";
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      return kExitOk;
    }
  } catch (const nngpw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}
