#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "ddcbf/config.hpp"
#include "ddcbf/io.hpp"
#include "ddcbf/sim.hpp"

namespace fs = std::filesystem;
using namespace ddcbf;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::int64_t seed_override = -1;
  double scale_override = -1.0;
};

AppConfig load(const CommonOpts& opts) {
  AppConfig cfg = load_config(opts.config_path);
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  if (opts.seed_override >= 0) {
    cfg.scenario.dataset.seed = static_cast<std::uint64_t>(opts.seed_override);
  }
  if (opts.scale_override > 0.0) cfg.scenario.bound_scale = opts.scale_override;
  return cfg;
}

int cmd_generate(const CommonOpts& opts) {
  const AppConfig cfg = load(opts);
  DatasetBuildInfo info;
  std::vector<DerivativeDataset> datasets =
      build_datasets(cfg.scenario, cfg.scenario.dataset, &info);
  const fs::path dir = fs::path(cfg.out_dir) / "datasets";
  for (auto& ds : datasets) {
    ds.config_hash = cfg.config_hash;
    io::write_dataset(dir, ds);
  }
  std::printf("wrote %zu datasets to %s\n", datasets.size(), dir.c_str());
  for (std::size_t i = 0; i < info.labels.size(); ++i) {
    std::printf("  %-22s raw %5d  feasible %5d  reduced %4d\n",
                info.labels[i].c_str(), info.raw_count[i],
                info.filtered_count[i], info.reduced_count[i]);
  }
  return 0;
}

int cmd_fit_bounds(const CommonOpts& opts, const std::string& data_dir) {
  const AppConfig cfg = load(opts);
  const fs::path in_dir =
      data_dir.empty() ? fs::path(cfg.out_dir) / "datasets" : fs::path(data_dir);
  const fs::path out_dir = fs::path(cfg.out_dir) / "bounds";
  for (const BarrierCandidate& c : cfg.scenario.make_candidates()) {
    const DerivativeDataset ds = io::read_dataset(in_dir, c.label());
    const JacobianBounds fitted = estimate(ds);
    const JacobianBounds scaled = scale(fitted, cfg.scenario.bound_scale);
    io::BoundsMeta meta;
    meta.dataset_hash = io::dataset_hash(ds);
    meta.kmeans_k = cfg.scenario.dataset.kmeans_k;
    meta.solver_tol = 1e-8;
    meta.scale_factor = cfg.scenario.bound_scale;
    io::write_bounds(out_dir, c, scaled, meta);
    const double width = (scaled.upper_x - scaled.lower_x).sum() +
                         (scaled.upper_u - scaled.lower_u).sum();
    std::printf("  %-22s samples %4zu  total interval width %.6f\n",
                c.label().c_str(), ds.size(), width);
  }
  std::printf("wrote bounds to %s\n", out_dir.c_str());
  return 0;
}

int cmd_simulate(const CommonOpts& opts, const std::string& data_dir,
                 bool no_filter) {
  const AppConfig cfg = load(opts);
  const fs::path base(cfg.out_dir);
  const fs::path in_dir =
      data_dir.empty() ? base / "datasets" : fs::path(data_dir);

  std::vector<DerivativeDataset> datasets;
  std::vector<JacobianBounds> bounds;
  if (!no_filter) {
    for (const BarrierCandidate& c : cfg.scenario.make_candidates()) {
      datasets.push_back(io::read_dataset(in_dir, c.label()));
      bounds.push_back(io::read_bounds(base / "bounds", c.label()));
    }
  }
  const RunResult res =
      run_closed_loop(cfg.scenario, datasets, bounds, !no_filter);
  const fs::path run_dir = base / (no_filter ? "run_nofilter" : "run");
  io::write_run_outputs(run_dir, res);

  double min_h = res.metrics.min_h_after_warmup;
  std::printf("run finished: cost %.4f  min h (t>=0.1s) %.4f  violations %d\n",
              res.metrics.control_cost, min_h, res.metrics.violation_count);
  std::printf("outputs in %s\n", run_dir.c_str());
  return res.metrics.violation_flag ? 1 : 0;
}

int cmd_study(const CommonOpts& opts) {
  const AppConfig cfg = load(opts);
  if (!cfg.study) {
    std::fprintf(stderr, "error: config has no study section\n");
    return 2;
  }
  const std::vector<StudyRow> rows = run_study(cfg.scenario, *cfg.study);
  const fs::path file = fs::path(cfg.out_dir) / "study.csv";
  fs::create_directories(file.parent_path());
  io::write_study_csv(file, rows);
  std::printf("%s", io::format_study_table(rows).c_str());
  std::printf("wrote %s\n", file.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Data-driven control barrier functions for connectivity maintenance "
      "in leader-follower multi-agent systems"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string data_dir;
  bool no_filter = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "scenario config file")
        ->required();
    sub->add_option("--out", opts.out_override, "output directory override");
    sub->add_option("--seed", opts.seed_override, "dataset seed override");
    sub->add_option("--scale", opts.scale_override, "bound scale override");
  };

  CLI::App* gen = app.add_subcommand("generate", "generate derivative datasets");
  add_common(gen);

  CLI::App* fit = app.add_subcommand("fit-bounds", "fit Jacobian interval bounds");
  add_common(fit);
  fit->add_option("--data", data_dir, "dataset directory");

  CLI::App* simc = app.add_subcommand("simulate", "run the closed loop");
  add_common(simc);
  simc->add_option("--data", data_dir, "dataset directory");
  simc->add_flag("--no-filter", no_filter, "apply the nominal input unfiltered");

  CLI::App* study = app.add_subcommand("study", "dataset-size / bound-scale study");
  add_common(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(opts);
    if (fit->parsed()) return cmd_fit_bounds(opts, data_dir);
    if (simc->parsed()) return cmd_simulate(opts, data_dir, no_filter);
    if (study->parsed()) return cmd_study(opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
