#include "extrapush/report.hpp"

#include "extrapush/netsim.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace extrapush {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v, int digits = 17) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

TrajectoryRecord agents_trajectory(const NetsimResult& res, const RunSpec& run, const Problem& problem) {
  TrajectoryRecord rec;
  rec.algorithm = run.cfg.algorithm;
  rec.reason = StopReason::max_iters;
  for (std::size_t t = 0; t < res.x_history.size(); ++t) {
    const Matrix& x = res.x_history[t];
    const bool last = t + 1 == res.x_history.size();
    if (!x.allFinite()) {
      rec.reason = StopReason::diverged;
    }
    if (t % run.cfg.record_every != 0 && !last && rec.reason != StopReason::diverged) continue;
    TrajectoryRow row;
    row.t = t;
    row.err_opt = problem.x_star ? (x.rowwise() - problem.x_star->transpose()).norm() : kNaN;
    const Eigen::RowVectorXd mean = x.colwise().mean();
    row.consensus = (x.rowwise() - mean).norm();
    row.r_null = row.r_grad = row.r_link = kNaN;
    row.alpha_t = t == 0 ? 0.0 : run.cfg.alpha;
    rec.rows.push_back(row);
    if (rec.reason == StopReason::diverged) break;
  }
  rec.final_state.t = rec.rows.empty() ? 0 : rec.rows.back().t;
  rec.final_state.x = res.x_history.at(rec.final_state.t);
  rec.final_state.z = res.z;
  rec.final_state.w = res.w;
  return rec;
}

}  // namespace

RateFit decay_window_fit(const TrajectoryRecord& rec) {
  RateFit none{kNaN, kNaN, 0};
  if (rec.rows.empty()) return none;
  const double e0 = rec.rows.front().err_opt;
  if (!(e0 > 0.0) || !std::isfinite(e0)) return none;
  std::size_t t_hit = rec.rows.back().t;
  for (const auto& r : rec.rows)
    if (r.err_opt / e0 <= 1e-8) {
      t_hit = r.t;
      break;
    }
  std::vector<double> t, v;
  for (const auto& r : rec.rows)
    if (r.t >= t_hit / 10 && r.t <= t_hit && r.err_opt > 0.0 && std::isfinite(r.err_opt)) {
      t.push_back(static_cast<double>(r.t));
      v.push_back(r.err_opt);
    }
  if (v.size() < 10) return none;
  return fit_linear_rate(t, v);
}

void validate_experiment(const ExperimentConfig& cfg, const Network& net, const Problem& problem) {
  require(problem.objective->agents() == net.mixing.size(),
          "problem has " + std::to_string(problem.objective->agents()) + " agents but the network has " +
              std::to_string(net.mixing.size()) + " nodes");
  require(is_strongly_connected(net.graph), "network '" + net.label + "' is not strongly connected");
  for (const auto& run : cfg.runs) {
    if (run.cfg.algorithm != Algorithm::extra) continue;
    const Matrix& w = net.mixing.a;
    const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
    const double rows = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
    require(asym <= Tolerances::doubly_stochastic && rows <= Tolerances::doubly_stochastic,
            "[algorithm:" + run.name + "] extra needs a symmetric doubly stochastic matrix; '" + net.label +
                "' is not");
  }
}

RunOutcome execute_run(const Network& net, const StationaryDistribution& s, const Problem& problem,
                       const RunSpec& run, Engine engine, const std::filesystem::path& out_dir) {
  RunOutcome out;
  out.name = run.name;
  out.algorithm = run.cfg.algorithm;
  const bool agents_ok = run.cfg.algorithm == Algorithm::extrapush ||
                         run.cfg.algorithm == Algorithm::normalized_extrapush;
  out.engine = engine == Engine::agents && agents_ok ? Engine::agents : Engine::matrix;
  out.csv = out_dir / (run.name + ".csv");
  const auto start = std::chrono::steady_clock::now();
  try {
    const Matrix z0 = initial_z(run.cfg.algorithm, problem.x0, s);
    TrajectoryRecord rec;
    if (out.engine == Engine::agents) {
      NetsimOptions opt;
      opt.algorithm = run.cfg.algorithm;
      opt.alpha = run.cfg.alpha;
      opt.rounds = run.cfg.max_iters;
      const auto res = simulate_extrapush(net.graph, net.mixing, &s, *problem.objective, opt, z0);
      out.messages = res.messages;
      rec = agents_trajectory(res, run, problem);
    } else {
      AlgorithmConfig cfg = run.cfg;
      cfg.track_auxiliary = is_fixed_step(cfg.algorithm);
      RunHooks hooks;
      hooks.x_star = problem.x_star;
      hooks.probe = make_residual_probe(net.mixing, s, cfg.alpha);
      rec = run_algorithm(net.mixing, s, *problem.objective, cfg, z0, hooks);
      out.messages = message_count(net.graph, rec.final_state.t);
    }
    out.iterations = rec.rows.empty() ? 0 : rec.rows.back().t;
    out.reason = rec.reason;
    if (!rec.rows.empty()) {
      out.final_err = rec.rows.back().err_opt;
      out.relative_err = out.final_err / rec.rows.front().err_opt;
    }
    out.fit = decay_window_fit(rec);
    write_trajectory_csv(rec, out.csv);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<RunOutcome> execute_all(const ExperimentConfig& cfg, const Network& net,
                                    const StationaryDistribution& s, const Problem& problem) {
  std::filesystem::create_directories(cfg.out);
  std::vector<RunOutcome> outcomes(cfg.runs.size());
  const auto count = static_cast<long>(cfg.runs.size());
  // execute_run catches everything, so nothing escapes the parallel region.
#pragma omp parallel for schedule(dynamic) if (count > 1)
  for (long k = 0; k < count; ++k)
    outcomes[static_cast<std::size_t>(k)] =
        execute_run(net, s, problem, cfg.runs[static_cast<std::size_t>(k)], cfg.engine, cfg.out);
  return outcomes;
}

void write_summary(const std::vector<RunOutcome>& outcomes, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(static_cast<bool>(out), "cannot write " + tmp);
    out << "name,algorithm,engine,iterations,stop_reason,final_err,relative_err,fitted_rate,fit_r2,messages,"
           "wall_seconds,error\n";
    for (const auto& o : outcomes) {
      std::string err = o.error;
      for (char& ch : err)
        if (ch == ',' || ch == '\n') ch = ';';
      out << o.name << ',' << to_string(o.algorithm) << ',' << to_string(o.engine) << ',' << o.iterations << ','
          << to_string(o.reason) << ',' << num(o.final_err) << ',' << num(o.relative_err) << ','
          << num(o.fit.rate) << ',' << num(o.fit.r2) << ',' << o.messages << ',' << num(o.wall_seconds, 6)
          << ',' << err << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string graph_info_report(const Network& net, std::size_t t_max) {
  std::ostringstream os;
  os << std::setprecision(12);
  const auto& g = net.graph;
  os << "graph = " << net.label << '\n' << "n = " << g.size() << '\n' << "edges = " << g.edge_count() << '\n';
  const auto violations = validate_column_stochastic(net.mixing.a);
  os << "column stochastic = " << (violations.empty() ? "yes" : "no") << '\n';
  for (const auto& v : violations) os << "  " << v.describe() << '\n';
  const bool sc = is_strongly_connected(g);
  os << "strongly connected = " << (sc ? "yes" : "no") << '\n';
  if (!sc) {
    os << "not strongly connected: phi omitted\n";
    return os.str();
  }
  const auto s = stationary_distribution(net.mixing);
  os << "phi =";
  for (Eigen::Index i = 0; i < s.phi.size(); ++i) os << ' ' << s.phi[i];
  os << '\n' << "power iterations = " << s.iterations << '\n';
  os << "||A phi - phi|| = " << (net.mixing.a * s.phi - s.phi).norm() << '\n';
  const double xi = xi_diagnostic(net.mixing, t_max);
  const double floor = std::pow(static_cast<double>(g.size()), -static_cast<double>(g.size()));
  os << "xi (min_i (A^t 1)_i, t <= " << t_max << ") = " << xi << "  (n^-n = " << floor << ")\n";

  const auto profile = power_convergence_profile(net.mixing, s, t_max);
  std::vector<double> t, v;
  for (const auto& pnt : profile)
    if (pnt.t >= 1 && pnt.deviation > 1e-13) {
      t.push_back(static_cast<double>(pnt.t));
      v.push_back(pnt.deviation);
    }
  if (v.size() >= 10) {
    const auto fit = fit_linear_rate(t, v);
    os << "||A^t - phi 1^T|| rate = " << fit.rate << "  (r2 = " << fit.r2 << ", " << fit.samples << " points)\n";
  } else {
    os << "||A^t - phi 1^T|| rate = n/a (below 1e-13 after " << v.size() << " steps)\n";
  }
  const auto a4 = check_assumption4(net.mixing, s);
  os << "positive definiteness margin lambda_min(D^-1 A_bar + A_bar^T D^-1) = " << a4.margin
     << (a4.holds ? "  (holds)" : "  (violated)") << '\n';
  os << "A_bar column diagonally dominant = " << (a4.diagonally_dominant ? "yes" : "no") << '\n';
  return os.str();
}

}  // namespace extrapush
