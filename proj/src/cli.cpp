#include "lpc/cli.hpp"

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lpc/fit.hpp"
#include "lpc/formats.hpp"
#include "lpc/sweep.hpp"

namespace lpc {

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;  // -1 keeps the config's seed
};

ExperimentConfig load_with_overrides(const CommonArgs& args) {
  ExperimentConfig cfg = load_config_file(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

int cmd_train(const CommonArgs& args, const std::string& resume) {
  ExperimentConfig cfg = load_with_overrides(args);
  Dataset data = load_dataset(cfg.dataset);
  FitResult res = fit(data, cfg, cfg.out_dir, resume);
  nlohmann::json summary;
  summary["name"] = cfg.name;
  summary["steps_done"] = res.steps_done;
  summary["diverged"] = res.diverged;
  summary["diverged_at_step"] = res.diverged_at_step;
  if (!res.evals.empty()) {
    summary["final_mmd"] = res.evals.back().mmd;
    summary["final_density"] = res.evals.back().density;
    summary["final_coverage"] = res.evals.back().coverage;
  }
  std::ofstream out(cfg.out_dir + "/summary.json");
  out << summary.dump(2) << "\n";
  std::cout << "trained " << res.steps_done << " steps; checkpoint at "
            << res.checkpoint_path << "\n";
  if (res.diverged) {
    std::cerr << "warning: run diverged at step " << res.diverged_at_step
              << "; training stopped early\n";
  }
  return 0;
}

int cmd_sample(const std::string& ckpt_path, std::int64_t count, bool means,
               const std::string& out_path, std::int64_t seed) {
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  GenerativeModel gen = generative_model_from_checkpoint(ckpt);
  Mat samples = ancestral_sample(
      gen, count,
      RngStream(static_cast<std::uint64_t>(seed)).derive(rng_tag::kAncestral),
      means);
  std::int64_t rows = static_cast<std::int64_t>(ckpt.get_scalar("meta.image_rows"));
  std::int64_t cols = static_cast<std::int64_t>(ckpt.get_scalar("meta.image_cols"));
  if (rows > 0 && cols > 0 && rows * cols == gen.obs_dim) {
    write_sample_grid_pgm(out_path, samples, rows, cols, 8);
  } else {
    std::vector<std::string> header;
    for (std::int64_t j = 0; j < samples.cols; ++j) {
      header.push_back("x" + std::to_string(j));
    }
    CsvWriter csv(out_path, header);
    for (std::int64_t i = 0; i < samples.rows; ++i) {
      std::vector<std::string> cells;
      for (std::int64_t j = 0; j < samples.cols; ++j) {
        cells.push_back(CsvWriter::num(samples.at(i, j)));
      }
      csv.row(cells);
    }
  }
  std::cout << "wrote " << samples.rows << " samples to " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const CommonArgs& args,
             std::int64_t sample_count) {
  ExperimentConfig cfg = load_with_overrides(args);
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  GenerativeModel gen = generative_model_from_checkpoint(ckpt);
  Dataset data = load_dataset(cfg.dataset);
  std::int64_t count = sample_count > 0 ? sample_count : cfg.eval.samples;
  Mat fake = ancestral_sample(
      gen, count, RngStream(cfg.seed).derive(rng_tag::kAncestral));
  MetricReport rep =
      compute_metric_report(data.x, fake, cfg.eval.knn_k,
                            cfg.eval.mmd_bandwidth);
  std::filesystem::create_directories(cfg.out_dir);
  write_metric_report_csv(cfg.out_dir + "/metrics_report.csv", rep);
  write_metric_report_json(cfg.out_dir + "/metrics_report.json", rep);
  std::cout << "density " << rep.density << " coverage " << rep.coverage
            << " mmd " << rep.mmd << "\n";
  return 0;
}

int cmd_trace(const std::string& ckpt_path, const CommonArgs& args,
              std::int64_t chains) {
  ExperimentConfig cfg = load_with_overrides(args);
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  GenerativeModel gen = generative_model_from_checkpoint(ckpt);
  WarmStartModel warm = warm_start_model_from_checkpoint(ckpt);
  Dataset data = load_dataset(cfg.dataset);
  std::int64_t n = std::min<std::int64_t>(chains, data.size());
  Mat x = data.slice(0, n);

  RngStream rng(cfg.seed);
  Mat eps(n, gen.latent_dim);
  rng.derive(rng_tag::kWarmStart).fill_normal(eps.a);
  Mat mu, sigma;
  warm.encode_values(x, mu, sigma);
  Mat z0(n, gen.latent_dim);
  for (std::size_t i = 0; i < z0.a.size(); ++i) {
    z0.a[i] = mu.a[i] + sigma.a[i] * eps.a[i];
  }
  ChainResult res =
      run_chain(gen, x, z0, cfg.train.sampler, rng.derive(rng_tag::kChain));
  std::filesystem::create_directories(cfg.out_dir);
  write_trace_csv(cfg.out_dir + "/trace.csv", res.trace);
  write_trace_summary_csv(cfg.out_dir + "/trace_summary.csv",
                          trace_summary({res.trace}));
  std::cout << "traced " << n << " chains for " << cfg.train.sampler.steps
            << " steps into " << cfg.out_dir << "\n";
  return 0;
}

int cmd_project(const std::string& ckpt_path, const CommonArgs& args,
                std::int64_t index, std::int64_t grid_res) {
  ExperimentConfig cfg = load_with_overrides(args);
  Checkpoint ckpt = Checkpoint::load(ckpt_path);
  GenerativeModel gen = generative_model_from_checkpoint(ckpt);
  WarmStartModel warm = warm_start_model_from_checkpoint(ckpt);
  Dataset data = load_dataset(cfg.dataset);
  if (index < 0 || index >= data.size()) {
    throw Error("project: observation index out of range");
  }
  Mat x = data.slice(index, index + 1);

  RngStream rng(cfg.seed);
  Mat eps(1, gen.latent_dim);
  rng.derive(rng_tag::kWarmStart).fill_normal(eps.a);
  Mat mu, sigma;
  warm.encode_values(x, mu, sigma);
  Mat z0(1, gen.latent_dim);
  for (std::size_t i = 0; i < z0.a.size(); ++i) {
    z0.a[i] = mu.a[i] + sigma.a[i] * eps.a[i];
  }
  ChainResult res =
      run_chain(gen, x, z0, cfg.train.sampler, rng.derive(rng_tag::kChain));
  Mat trajectory(static_cast<std::int64_t>(res.samples.size()),
                 gen.latent_dim);
  for (std::size_t t = 0; t < res.samples.size(); ++t) {
    for (std::int64_t j = 0; j < gen.latent_dim; ++j) {
      trajectory.at(static_cast<std::int64_t>(t), j) = res.samples[t].at(0, j);
    }
  }
  TrajectoryProjection proj =
      pca_trajectory_projection(trajectory, gen, x, grid_res);
  std::filesystem::create_directories(cfg.out_dir);
  write_projection_csv(cfg.out_dir + "/projection_grid.csv",
                       cfg.out_dir + "/projection_trajectory.csv", proj);
  write_projection_pgm(cfg.out_dir + "/projection_heatmap.pgm", proj);
  nlohmann::json j;
  j["explained_variance"] = proj.explained_variance;
  j["components"] = proj.components;
  std::ofstream out(cfg.out_dir + "/projection.json");
  out << j.dump(2) << "\n";
  std::cout << "projection written to " << cfg.out_dir << " (explained";
  for (double v : proj.explained_variance) std::cout << " " << v;
  std::cout << ")\n";
  return 0;
}

int cmd_compare(const CommonArgs& args, const std::string& sweep,
                int seeds, int threads) {
  ExperimentConfig base = load_with_overrides(args);
  std::string out_root = base.out_dir;
  std::filesystem::create_directories(out_root);
  std::vector<SweepCell> cells;
  if (sweep == "step-size") {
    cells = make_step_size_cells(base, out_root,
                                 {0.001, 0.01, 0.1, 0.5},
                                 {0.0, 0.25, 0.9, 0.99}, seeds);
  } else if (sweep == "objectives") {
    cells = make_objective_cells(base, out_root, seeds);
  } else {
    throw Error("compare: unknown sweep '" + sweep +
                "' (expected step-size or objectives)");
  }
  std::vector<CellOutcome> outcomes = run_cells(cells, threads);
  write_sweep_csv(out_root + "/sweep.csv", outcomes);
  std::cout << "ran " << outcomes.size() << " cells; results in " << out_root
            << "/sweep.csv\n";
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Langevin predictive coding trainer and evaluation tools"};
  app.require_subcommand(1);

  CommonArgs train_args;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "train a model from a config");
  train_cmd->add_option("--config", train_args.config_path)->required();
  train_cmd->add_option("--out", train_args.out_dir);
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_option("--resume", resume);

  std::string ckpt_path, sample_out;
  std::int64_t sample_count = 64;
  std::int64_t sample_seed = 1;
  bool sample_means = false;
  auto* sample_cmd =
      app.add_subcommand("sample", "ancestral samples from a checkpoint");
  sample_cmd->add_option("--checkpoint", ckpt_path)->required();
  sample_cmd->add_option("--count", sample_count);
  sample_cmd->add_option("--out", sample_out)->required();
  sample_cmd->add_option("--seed", sample_seed);
  sample_cmd->add_flag("--means", sample_means);

  CommonArgs eval_args;
  std::string eval_ckpt;
  std::int64_t eval_samples = 0;
  auto* eval_cmd = app.add_subcommand(
      "eval", "density/coverage/MMD of checkpoint samples against a dataset");
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--config", eval_args.config_path)->required();
  eval_cmd->add_option("--out", eval_args.out_dir);
  eval_cmd->add_option("--seed", eval_args.seed);
  eval_cmd->add_option("--samples", eval_samples);

  CommonArgs trace_args;
  std::string trace_ckpt;
  std::int64_t trace_chains = 16;
  auto* trace_cmd =
      app.add_subcommand("trace", "chain diagnostics from a checkpoint");
  trace_cmd->add_option("--checkpoint", trace_ckpt)->required();
  trace_cmd->add_option("--config", trace_args.config_path)->required();
  trace_cmd->add_option("--out", trace_args.out_dir);
  trace_cmd->add_option("--seed", trace_args.seed);
  trace_cmd->add_option("--chains", trace_chains);

  CommonArgs project_args;
  std::string project_ckpt;
  std::int64_t project_index = 0;
  std::int64_t project_grid = 50;
  auto* project_cmd = app.add_subcommand(
      "project", "2-D PCA projection of a sampling trajectory");
  project_cmd->add_option("--checkpoint", project_ckpt)->required();
  project_cmd->add_option("--config", project_args.config_path)->required();
  project_cmd->add_option("--out", project_args.out_dir);
  project_cmd->add_option("--seed", project_args.seed);
  project_cmd->add_option("--index", project_index);
  project_cmd->add_option("--grid-res", project_grid);

  CommonArgs compare_args;
  std::string sweep_kind = "step-size";
  int compare_seeds = 1;
  int compare_threads = 0;
  auto* compare_cmd = app.add_subcommand(
      "compare", "step-size or objective sweeps over full training runs");
  compare_cmd->add_option("--config", compare_args.config_path)->required();
  compare_cmd->add_option("--out", compare_args.out_dir);
  compare_cmd->add_option("--seed", compare_args.seed);
  compare_cmd->add_option("--sweep", sweep_kind);
  compare_cmd->add_option("--seeds", compare_seeds);
  compare_cmd->add_option("--threads", compare_threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args, resume);
    if (sample_cmd->parsed()) {
      return cmd_sample(ckpt_path, sample_count, sample_means, sample_out,
                        sample_seed);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_args, eval_samples);
    if (trace_cmd->parsed()) return cmd_trace(trace_ckpt, trace_args,
                                              trace_chains);
    if (project_cmd->parsed()) {
      return cmd_project(project_ckpt, project_args, project_index,
                         project_grid);
    }
    if (compare_cmd->parsed()) {
      return cmd_compare(compare_args, sweep_kind, compare_seeds,
                         compare_threads);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace lpc
