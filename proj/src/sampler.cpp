#include "lpc/sampler.hpp"

#include <cmath>

namespace lpc {

namespace {

constexpr double kMhatFloor = 1e-8;

int first_nonfinite_chain(const Mat& z) {
  for (std::int64_t i = 0; i < z.rows; ++i) {
    for (std::int64_t j = 0; j < z.cols; ++j) {
      if (!std::isfinite(z.at(i, j))) return static_cast<int>(i);
    }
  }
  return -1;
}

std::vector<double> row_norms(const Mat& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows));
  for (std::int64_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < m.cols; ++j) s += m.at(i, j) * m.at(i, j);
    out[static_cast<std::size_t>(i)] = std::sqrt(s);
  }
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  if (step_size <= 0.0) throw Error("sampler: step_size must be positive");
  if (steps < 1) throw Error("sampler: steps must be >= 1");
  if (precond_decay < 0.0 || precond_decay >= 1.0) {
    throw Error("sampler: precond_decay must lie in [0,1)");
  }
  if (noise_scale < 0.0) throw Error("sampler: noise_scale must be >= 0");
}

void StepTrace::append(const std::vector<double>& lp,
                       const std::vector<double>& gn) {
  std::vector<double> delta(lp.size(), 0.0);
  if (!logp.empty()) {
    const auto& prev = logp.back();
    for (std::size_t i = 0; i < lp.size(); ++i) delta[i] = lp[i] - prev[i];
  }
  logp.push_back(lp);
  delta_logp.push_back(std::move(delta));
  grad_norm.push_back(gn);
}

ChainState apply_langevin_update(const ChainState& state, const Mat& g,
                                 const SamplerConfig& cfg,
                                 const RngStream& rng) {
  if (g.rows != state.z.rows || g.cols != state.z.cols) {
    throw ShapeError("apply_langevin_update: gradient shape mismatch");
  }
  const double gamma = cfg.step_size;
  const std::int64_t d = state.z.cols;
  ChainState next;
  next.z = Mat(state.z.rows, d);
  next.m = state.m;
  next.t = state.t + 1;

  RngStream step_stream = rng.derive(static_cast<std::uint64_t>(state.t));
  std::vector<double> eta(static_cast<std::size_t>(d));

  const double beta = cfg.precond_decay;
  // 1 - beta^t computed for the 1-based step index.
  const double bias_corr =
      1.0 - std::pow(beta, static_cast<double>(state.t + 1));

  for (std::int64_t c = 0; c < state.z.rows; ++c) {
    RngStream chain_stream = step_stream.derive(static_cast<std::uint64_t>(c));
    chain_stream.fill_normal(eta);
    for (std::int64_t j = 0; j < d; ++j) {
      double gj = g.at(c, j);
      double drift;
      double noise_sd;
      if (cfg.precond_enabled) {
        double mj = beta * state.m.at(c, j) + (1.0 - beta) * gj * gj;
        next.m.at(c, j) = mj;
        double mhat = std::sqrt(mj / bias_corr);
        if (cfg.force_unit_mhat) {
          mhat = 1.0;
        } else if (mhat < kMhatFloor) {
          mhat = kMhatFloor;
          counters().mhat_floor_hits.fetch_add(1, std::memory_order_relaxed);
        }
        drift = gamma * gj / mhat;
        noise_sd = cfg.noise_cov == NoiseCovariance::kInverseMhat
                       ? std::sqrt(2.0 * gamma / mhat)
                       : std::sqrt(2.0 * gamma * mhat);
      } else {
        drift = gamma * gj;
        noise_sd = std::sqrt(2.0 * gamma);
      }
      next.z.at(c, j) = state.z.at(c, j) + drift +
                        cfg.noise_scale * noise_sd *
                            eta[static_cast<std::size_t>(j)];
    }
  }
  return next;
}

ChainState langevin_step(const GenerativeModel& model, const Mat& x,
                         const ChainState& state, const SamplerConfig& cfg,
                         const RngStream& rng) {
  cfg.validate();
  JointEval eval = eval_log_joint(model, x, state.z, false);
  ChainState next = apply_langevin_update(state, eval.z_grad, cfg, rng);
  int bad = first_nonfinite_chain(next.z);
  if (bad >= 0) {
    throw ChainDivergenceError(static_cast<int>(next.t), bad, StepTrace{});
  }
  return next;
}

ChainState ula_step(const GenerativeModel& model, const Mat& x,
                    const ChainState& state, double step_size,
                    const RngStream& rng) {
  SamplerConfig cfg;
  cfg.step_size = step_size;
  cfg.steps = 1;
  cfg.precond_enabled = false;
  return langevin_step(model, x, state, cfg, rng);
}

ChainState precond_ula_step(const GenerativeModel& model, const Mat& x,
                            const ChainState& state, double step_size,
                            double precond_decay, const RngStream& rng) {
  SamplerConfig cfg;
  cfg.step_size = step_size;
  cfg.steps = 1;
  cfg.precond_enabled = true;
  cfg.precond_decay = precond_decay;
  return langevin_step(model, x, state, cfg, rng);
}

ChainResult run_chain(const GenerativeModel& model, const Mat& x,
                      const Mat& z0, const SamplerConfig& cfg,
                      const RngStream& rng) {
  cfg.validate();
  if (first_nonfinite_chain(z0) >= 0) {
    throw Error("run_chain: initial state is not finite");
  }
  ChainResult result;
  result.samples.reserve(static_cast<std::size_t>(cfg.steps));
  ChainState state = ChainState::init(z0);
  for (std::int64_t t = 1; t <= cfg.steps; ++t) {
    JointEval eval = eval_log_joint(model, x, state.z, false);
    result.trace.append(eval.logp, row_norms(eval.z_grad));
    state = apply_langevin_update(state, eval.z_grad, cfg, rng);
    int bad = first_nonfinite_chain(state.z);
    if (bad >= 0) {
      throw ChainDivergenceError(static_cast<int>(t), bad,
                                 std::move(result.trace));
    }
    result.samples.push_back(state.z);
  }
  return result;
}

}  // namespace lpc
