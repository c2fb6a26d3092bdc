#include "lpc/sweep.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

#include "lpc/formats.hpp"

namespace lpc {

int resolve_thread_count(int requested, std::size_t cells) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("LPC_NUM_THREADS")) {
      n = std::atoi(env);
    }
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(cells, 1)));
}

std::vector<CellOutcome> run_cells(const std::vector<SweepCell>& cells,
                                   int threads) {
  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const SweepCell& cell = cells[i];
      CellOutcome& out = outcomes[i];
      out.label = cell.label;
      out.cfg = cell.cfg;
      Dataset data = load_dataset(cell.cfg.dataset);
      FitResult res = fit(data, cell.cfg, cell.cfg.out_dir);
      out.diverged = res.diverged;
      out.evals = res.evals;
      out.steps = res.steps;
      if (!res.evals.empty()) {
        out.final_mmd = res.evals.back().mmd;
        out.final_density = res.evals.back().density;
        out.final_coverage = res.evals.back().coverage;
      }
    }
  };
  int n_threads = resolve_thread_count(threads, cells.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

std::vector<SweepCell> make_step_size_cells(const ExperimentConfig& base,
                                            const std::string& out_root,
                                            const std::vector<double>& gammas,
                                            const std::vector<double>& betas,
                                            int seeds) {
  std::vector<SweepCell> cells;
  for (int s = 0; s < seeds; ++s) {
    for (double gamma : gammas) {
      // one unpreconditioned arm plus one per preconditioning decay
      for (std::size_t arm = 0; arm <= betas.size(); ++arm) {
        SweepCell cell;
        cell.cfg = base;
        cell.cfg.seed = base.seed + static_cast<std::uint64_t>(s);
        cell.cfg.train.sampler.step_size = gamma;
        if (arm == 0) {
          cell.cfg.train.sampler.precond_enabled = false;
        } else {
          cell.cfg.train.sampler.precond_enabled = true;
          cell.cfg.train.sampler.precond_decay = betas[arm - 1];
        }
        char label[96];
        std::snprintf(label, sizeof label, "gamma%g_%s%g_seed%d", gamma,
                      arm == 0 ? "off" : "beta",
                      arm == 0 ? 0.0 : betas[arm - 1], s);
        cell.label = label;
        cell.cfg.name = label;
        cell.cfg.out_dir = out_root + "/" + label;
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::vector<SweepCell> make_objective_cells(const ExperimentConfig& base,
                                            const std::string& out_root,
                                            int seeds) {
  std::vector<SweepCell> cells;
  for (int s = 0; s < seeds; ++s) {
    for (Objective obj : {Objective::kForward, Objective::kReverse,
                          Objective::kJeffreys, Objective::kNone}) {
      SweepCell cell;
      cell.cfg = base;
      cell.cfg.seed = base.seed + static_cast<std::uint64_t>(s);
      cell.cfg.train.objective = obj;
      std::string label = to_string(obj) + "_seed" + std::to_string(s);
      cell.label = label;
      cell.cfg.name = label;
      cell.cfg.out_dir = out_root + "/" + label;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_sweep_csv(const std::string& path,
                     const std::vector<CellOutcome>& outcomes) {
  CsvWriter csv(path, {"label", "objective", "gamma", "precond", "beta",
                       "seed", "epochs", "steps", "batch_size",
                       "learning_rate", "prior_init_batches", "final_mmd",
                       "final_density", "final_coverage", "diverged"});
  for (const auto& o : outcomes) {
    const TrainConfig& t = o.cfg.train;
    csv.row({o.label, to_string(t.objective),
             CsvWriter::num(t.sampler.step_size),
             t.sampler.precond_enabled ? "true" : "false",
             CsvWriter::num(t.sampler.precond_decay),
             std::to_string(o.cfg.seed), std::to_string(t.epochs),
             std::to_string(t.sampler.steps), std::to_string(t.batch_size),
             CsvWriter::num(t.learning_rate),
             std::to_string(t.prior_init_batches), CsvWriter::num(o.final_mmd),
             CsvWriter::num(o.final_density), CsvWriter::num(o.final_coverage),
             o.diverged ? "true" : "false"});
  }
}

}  // namespace lpc
