#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dpmc/config.hpp"
#include "dpmc/experiment.hpp"
#include "dpmc/report.hpp"
#include "dpmc/verify.hpp"

namespace fs = std::filesystem;
using namespace dpmc;

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad value \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("--values is empty");
  return out;
}

void print_rows(const std::vector<ResultRow>& rows) {
  for (const auto& r : rows) {
    std::printf("seed %-6llu %-13s T=%-4d K=%-2d nfe=%-5lld sliced_w2=%.4f residual=%.4f\n",
                static_cast<unsigned long long>(r.seed), r.method.c_str(), r.T, r.K, r.nfe, r.sliced_w2,
                r.residual_mean);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpmc_lab: diffusion posterior sampling experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis, values, suite;
  bool timing = false;

  auto* run = app.add_subcommand("run", "run every seed of a config and write results.csv");
  run->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");
  run->add_flag("--timing", timing, "fill runtime_ms (output is then not reproducible)");

  auto* ablate = app.add_subcommand("ablate", "sweep one sampler axis");
  ablate->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  ablate->add_option("--axis", axis)->required()->check(CLI::IsMember({"K", "T", "xi_exponent"}));
  ablate->add_option("--values", values, "comma-separated list")->required();
  ablate->add_option("--out", out_dir);

  auto* verify = app.add_subcommand("verify", "oracle, gradient and theory self-checks");
  verify->add_option("--suite", suite)->required()->check(CLI::IsMember({"oracle", "gradients", "theory", "all"}));

  auto* train = app.add_subcommand("train", "fit a denoiser from a config's train block");
  train->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      const auto checks = run_suite(suite);
      int failed = 0;
      for (const auto& c : checks) {
        std::printf("%s %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
        failed += c.pass ? 0 : 1;
      }
      std::printf("%zu checks, %d failed\n", checks.size(), failed);
      return failed == 0 ? 0 : 1;
    }

    ExperimentConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    RunOptions opts;
    opts.timing = timing;

    if (run->parsed()) {
      print_rows(run_command(cfg, cfg.output_dir, opts));
      std::printf("wrote %s\n", (fs::path(cfg.output_dir) / "results.csv").string().c_str());
    } else if (ablate->parsed()) {
      const Ablation a = run_ablation(cfg, axis, parse_values(values), opts);
      fs::create_directories(cfg.output_dir);
      const fs::path rows = fs::path(cfg.output_dir) / ("ablate_" + axis + ".csv");
      const fs::path trend = fs::path(cfg.output_dir) / ("ablate_" + axis + "_trend.csv");
      write_csv(rows, a.rows);
      write_trend_csv(trend, axis, a.trend);
      std::printf("%-12s %-16s %-14s n\n", axis.c_str(), "median_sliced_w2", "mad");
      for (const auto& p : a.trend) std::printf("%-12g %-16.5f %-14.5f %zu\n", p.value, p.median, p.mad, p.n);
      std::printf("trend non-increasing within 1 MAD: %s\n", non_increasing_within_mad(a.trend) ? "yes" : "no");
      std::printf("wrote %s and %s\n", rows.string().c_str(), trend.string().c_str());
    } else if (train->parsed()) {
      const TrainResult r = train_command(cfg, cfg.output_dir);
      std::printf("loss %.5f -> %.5f over %zu epochs\n", r.initial_loss, r.final_loss, r.epoch_loss.size());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config errors:\n" << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
