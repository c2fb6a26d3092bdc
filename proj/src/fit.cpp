#include "lpc/fit.hpp"

#include <cmath>
#include <filesystem>

#include "lpc/formats.hpp"
#include "lpc/trainer.hpp"

namespace lpc {

namespace {

std::vector<std::int64_t> hidden_from_entry(const CheckpointEntry& e) {
  std::vector<std::int64_t> out;
  for (double v : e.data) out.push_back(static_cast<std::int64_t>(v));
  return out;
}

void add_adam(Checkpoint& ckpt, const std::string& prefix,
              const AdamState& s) {
  ckpt.add_param_set(prefix + ".m", s.m);
  ckpt.add_param_set(prefix + ".v", s.v);
  ckpt.add_scalar(prefix + ".step", static_cast<double>(s.step));
}

void load_adam(const Checkpoint& ckpt, const std::string& prefix,
               AdamState& s) {
  ckpt.load_param_set(prefix + ".m", s.m);
  ckpt.load_param_set(prefix + ".v", s.v);
  s.step = static_cast<std::int64_t>(ckpt.get_scalar(prefix + ".step"));
}

}  // namespace

Checkpoint make_training_checkpoint(const GenerativeModel& gen,
                                    const WarmStartModel& warm,
                                    const AdamState& opt_theta,
                                    const AdamState& opt_phi,
                                    std::int64_t epochs_done,
                                    std::int64_t global_batch,
                                    std::int64_t image_rows,
                                    std::int64_t image_cols) {
  Checkpoint ckpt;
  ckpt.add_param_set("gen", gen.params);
  ckpt.add_param_set("warm", warm.params);
  add_adam(ckpt, "adam_theta", opt_theta);
  add_adam(ckpt, "adam_phi", opt_phi);
  ckpt.add_scalar("meta.epochs_done", static_cast<double>(epochs_done));
  ckpt.add_scalar("meta.global_batch", static_cast<double>(global_batch));
  ckpt.add_scalar("meta.obs_dim", static_cast<double>(gen.obs_dim));
  ckpt.add_scalar("meta.latent_dim", static_cast<double>(gen.latent_dim));
  ckpt.add_scalar("meta.likelihood",
                  gen.likelihood == Likelihood::kDiagonalGaussian ? 0.0 : 1.0);
  ckpt.add_scalar("meta.prior_variance", gen.prior_variance);
  ckpt.add_scalar("meta.scale_mode", static_cast<double>(gen.scale_mode));
  ckpt.add_scalar("meta.fixed_scale", gen.fixed_scale);
  ckpt.add_scalar("meta.image_rows", static_cast<double>(image_rows));
  ckpt.add_scalar("meta.image_cols", static_cast<double>(image_cols));
  std::vector<double> dec_hidden(gen.hidden.begin(), gen.hidden.end());
  ckpt.add("meta.dec_hidden",
           {static_cast<std::int64_t>(dec_hidden.size())}, dec_hidden);
  std::vector<double> enc_hidden(warm.hidden.begin(), warm.hidden.end());
  ckpt.add("meta.enc_hidden",
           {static_cast<std::int64_t>(enc_hidden.size())}, enc_hidden);
  return ckpt;
}

GenerativeModel generative_model_from_checkpoint(const Checkpoint& ckpt) {
  auto hidden = hidden_from_entry(ckpt.get("meta.dec_hidden"));
  GenerativeModel gen = GenerativeModel::make(
      static_cast<std::int64_t>(ckpt.get_scalar("meta.obs_dim")),
      static_cast<std::int64_t>(ckpt.get_scalar("meta.latent_dim")), hidden,
      ckpt.get_scalar("meta.likelihood") == 0.0
          ? Likelihood::kDiagonalGaussian
          : Likelihood::kDiscretizedGaussian,
      RngStream(0),
      static_cast<DecoderScaleMode>(
          static_cast<int>(ckpt.get_scalar("meta.scale_mode"))),
      ckpt.get_scalar("meta.fixed_scale"),
      ckpt.get_scalar("meta.prior_variance"));
  ckpt.load_param_set("gen", gen.params);
  return gen;
}

WarmStartModel warm_start_model_from_checkpoint(const Checkpoint& ckpt) {
  auto hidden = hidden_from_entry(ckpt.get("meta.enc_hidden"));
  WarmStartModel warm = WarmStartModel::make(
      static_cast<std::int64_t>(ckpt.get_scalar("meta.obs_dim")),
      static_cast<std::int64_t>(ckpt.get_scalar("meta.latent_dim")), hidden,
      RngStream(0));
  ckpt.load_param_set("warm", warm.params);
  return warm;
}

FitResult fit(const Dataset& data, const ExperimentConfig& cfg,
              const std::string& out_dir, const std::string& resume_from) {
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  train.validate();
  std::filesystem::create_directories(out_dir);

  const std::int64_t n = data.size();
  const std::int64_t held_out =
      static_cast<std::int64_t>(std::floor(cfg.eval.holdout *
                                           static_cast<double>(n)));
  const std::int64_t n_train = n - held_out;
  if (n_train < 1) throw Error("fit: no training rows after holdout split");
  const Mat eval_real = held_out > 0 ? data.slice(n_train, n) : data.x;

  FitResult res;
  res.gen = make_generative_model(cfg.model, data.obs_dim(), cfg.seed);
  res.warm = make_warm_start_model(cfg.model, data.obs_dim(), cfg.seed);
  AdamState opt_theta = AdamState::like(res.gen.params, train.adam_beta1,
                                        train.adam_beta2, train.adam_eps);
  AdamState opt_phi = AdamState::like(res.warm.params, train.adam_beta1,
                                      train.adam_beta2, train.adam_eps);

  std::int64_t start_epoch = 0;
  std::int64_t global_batch = 0;
  const bool resuming = !resume_from.empty();
  if (resuming) {
    Checkpoint ckpt = Checkpoint::load(resume_from);
    ckpt.load_param_set("gen", res.gen.params);
    ckpt.load_param_set("warm", res.warm.params);
    load_adam(ckpt, "adam_theta", opt_theta);
    load_adam(ckpt, "adam_phi", opt_phi);
    start_epoch = static_cast<std::int64_t>(ckpt.get_scalar("meta.epochs_done"));
    global_batch =
        static_cast<std::int64_t>(ckpt.get_scalar("meta.global_batch"));
  }

  save_config_file(cfg, out_dir + "/config.cfg");
  res.metrics_path = out_dir + "/metrics.csv";
  res.eval_path = out_dir + "/eval.csv";
  res.checkpoint_path = out_dir + "/final.ckpt";
  CsvWriter metrics(res.metrics_path,
                    {"step", "epoch", "elbo", "logp_mean", "grad_norm_theta",
                     "grad_norm_phi", "wall_ms"},
                    resuming);
  CsvWriter evals(res.eval_path,
                  {"epoch", "step", "mmd", "density", "coverage"}, resuming);

  auto save_state = [&](const std::string& path, std::int64_t epochs_done) {
    Checkpoint ckpt = make_training_checkpoint(
        res.gen, res.warm, opt_theta, opt_phi, epochs_done, global_batch,
        data.image_rows, data.image_cols);
    ckpt.save(path);
  };
  auto run_eval = [&](std::int64_t epoch) {
    Mat fake = ancestral_sample(
        res.gen, cfg.eval.samples,
        RngStream(cfg.seed).derive(rng_tag::kEval).derive(
            static_cast<std::uint64_t>(epoch)));
    MetricReport rep = compute_metric_report(eval_real, fake, cfg.eval.knn_k,
                                             cfg.eval.mmd_bandwidth);
    EvalRecord rec{epoch, global_batch, rep.mmd, rep.density, rep.coverage};
    res.evals.push_back(rec);
    evals.row({std::to_string(rec.epoch), std::to_string(rec.step),
               CsvWriter::num(rec.mmd), CsvWriter::num(rec.density),
               CsvWriter::num(rec.coverage)});
    evals.flush();
  };

  for (std::int64_t epoch = start_epoch; epoch < train.epochs; ++epoch) {
    auto batches = epoch_batches(
        n_train, train.batch_size,
        RngStream(cfg.seed).derive(rng_tag::kShuffle).derive(
            static_cast<std::uint64_t>(epoch)));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Mat x = data.rows(batches[b]);
      RngStream rng = RngStream(cfg.seed)
                          .derive(rng_tag::kEpoch)
                          .derive(static_cast<std::uint64_t>(epoch))
                          .derive(rng_tag::kBatch)
                          .derive(b);
      StepMetrics sm;
      try {
        if (train.algo == Algo::kVae) {
          sm = vae_train_step(res.gen, res.warm, x, train, opt_theta, opt_phi,
                              rng);
        } else {
          sm = lpc_train_step(res.gen, res.warm, x, train, opt_theta, opt_phi,
                              global_batch, rng);
        }
      } catch (const TrainStepDivergence& e) {
        // Training stops; the last consistent parameters are evaluated and
        // checkpointed so the run still yields comparable artifacts.
        res.diverged = true;
        res.diverged_at_step = global_batch;
        run_eval(epoch);
        metrics.flush();
        save_state(res.checkpoint_path, epoch);
        save_state(out_dir + "/last.ckpt", epoch);
        return res;
      }
      StepRecord rec;
      rec.elbo = sm.elbo;
      rec.logp_mean = sm.logp_mean;
      rec.grad_norm_theta = sm.grad_norm_theta;
      rec.grad_norm_phi = sm.grad_norm_phi;
      if (sm.trace.steps() > 0) {
        double s = 0.0;
        for (double g : sm.trace.grad_norm[0]) s += g;
        rec.z0_grad_norm = s / static_cast<double>(sm.trace.chains());
      }
      res.steps.push_back(rec);
      metrics.row({std::to_string(global_batch), std::to_string(epoch),
                   CsvWriter::num(sm.elbo), CsvWriter::num(sm.logp_mean),
                   CsvWriter::num(sm.grad_norm_theta),
                   CsvWriter::num(sm.grad_norm_phi),
                   CsvWriter::num(sm.wall_ms)});
      ++global_batch;
      ++res.steps_done;
    }
    bool periodic = cfg.eval.every > 0 && (epoch + 1) % cfg.eval.every == 0;
    if (periodic || epoch + 1 == train.epochs) run_eval(epoch);
    save_state(out_dir + "/last.ckpt", epoch + 1);
  }
  metrics.flush();
  save_state(res.checkpoint_path, train.epochs);
  if (train.epochs == 0) save_state(out_dir + "/last.ckpt", 0);
  return res;
}

}  // namespace lpc
