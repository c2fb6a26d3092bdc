#ifndef LPC_SWEEP_HPP
#define LPC_SWEEP_HPP

#include <string>
#include <vector>

#include "lpc/fit.hpp"

namespace lpc {

struct SweepCell {
  std::string label;
  ExperimentConfig cfg;  // out_dir must be unique per cell
};

struct CellOutcome {
  std::string label;
  ExperimentConfig cfg;
  bool diverged{false};
  double final_mmd{0.0};
  double final_density{0.0};
  double final_coverage{0.0};
  std::vector<EvalRecord> evals;
  std::vector<StepRecord> steps;
};

// Worker count: explicit argument if > 0, else LPC_NUM_THREADS, else the
// hardware concurrency, capped by the cell count.
int resolve_thread_count(int requested, std::size_t cells);

// Runs every cell (dataset generation + fit + final metrics), in parallel
// worker threads over a shared queue. Results come back in cell order
// regardless of scheduling.
std::vector<CellOutcome> run_cells(const std::vector<SweepCell>& cells,
                                   int threads = 0);

// Grids used by the `compare` command and the robustness/objective
// studies: the step-size sweep crosses gamma with no-preconditioning and a
// set of preconditioning decays; the objective sweep crosses warm-start
// objectives. Each grid is replicated over `seeds` consecutive seeds.
std::vector<SweepCell> make_step_size_cells(const ExperimentConfig& base,
                                            const std::string& out_root,
                                            const std::vector<double>& gammas,
                                            const std::vector<double>& betas,
                                            int seeds);
std::vector<SweepCell> make_objective_cells(const ExperimentConfig& base,
                                            const std::string& out_root,
                                            int seeds);

void write_sweep_csv(const std::string& path,
                     const std::vector<CellOutcome>& outcomes);

}  // namespace lpc

#endif  // LPC_SWEEP_HPP
