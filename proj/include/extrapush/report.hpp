#pragma once

// Executing configured runs, the run summary, and the text reports behind the
// graph-info and certify commands.

#include "extrapush/analysis.hpp"
#include "extrapush/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace extrapush {

struct RunOutcome {
  std::string name;
  Algorithm algorithm = Algorithm::extrapush;
  Engine engine = Engine::matrix;
  std::size_t iterations = 0;
  StopReason reason = StopReason::running;
  double final_err = 0.0;      ///< ||x^T - 1 x*^T||
  double relative_err = 0.0;   ///< final_err / ||x^0 - 1 x*^T||
  RateFit fit;                 ///< NaN rate when no usable window
  std::size_t messages = 0;
  double wall_seconds = 0.0;
  std::filesystem::path csv;
  std::string error;           ///< nonempty when the run threw
};

/// Fit of err_opt over [T/10, T], T the first round with relative error <= 1e-8
/// (or the last recorded round). rate is NaN with fewer than 10 usable rows.
RateFit decay_window_fit(const TrajectoryRecord& rec);

/// Rejects combinations that cannot run: Extra on a matrix that is not
/// symmetric doubly stochastic, shape mismatches, disconnected graphs.
void validate_experiment(const ExperimentConfig& cfg, const Network& net, const Problem& problem);

/// Runs one configured algorithm and writes <out>/<name>.csv atomically.
RunOutcome execute_run(const Network& net, const StationaryDistribution& s, const Problem& problem,
                       const RunSpec& run, Engine engine, const std::filesystem::path& out_dir);

/// All runs, in parallel across runs; outcomes are in config order.
std::vector<RunOutcome> execute_all(const ExperimentConfig& cfg, const Network& net,
                                    const StationaryDistribution& s, const Problem& problem);

/// CSV: name,algorithm,engine,iterations,stop_reason,final_err,relative_err,
/// fitted_rate,fit_r2,messages,wall_seconds,error
void write_summary(const std::vector<RunOutcome>& outcomes, const std::filesystem::path& path);

/// n, |E|, strong connectivity, phi, xi, rate of ||A^t - phi 1^T||, positive-definiteness margin.
std::string graph_info_report(const Network& net, std::size_t t_max = 200);

}  // namespace extrapush
