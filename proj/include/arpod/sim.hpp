#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "arpod/dynamics.hpp"
#include "arpod/ocp.hpp"
#include "arpod/rng.hpp"
#include "arpod/solver.hpp"

// Closed-loop execution of the shrinking-horizon controller: at each step k
// the current state seeds a fresh instance, the (possibly capped) solver
// returns an input sequence, the first input is applied, and the plant is
// propagated with the same RK4 map (plus additive state noise in perturbed
// runs). Docking is declared at the first k where the stacked input/state
// vector z(k) = [u(k); x(k)] is within the infinity-norm tolerance of the
// docking point.

namespace arpod {

/// Per-block standard deviations of the additive state disturbance.
struct NoiseScales {
  double position{1e-3};          // km
  double velocity{1e-6};          // km/s
  double quaternion{1e-8};        // quaternion components
  double angular_velocity{1e-6};  // rad/s

  void validate() const {
    if (position < 0 || velocity < 0 || quaternion < 0 || angular_velocity < 0) {
      throw std::invalid_argument("NoiseScales: scales must be nonnegative");
    }
  }
};

/// Block-scaled Gaussian disturbance generator with its own seeded stream.
struct PerturbationModel {
  NoiseScales scales{};
  Rng rng;

  explicit PerturbationModel(std::uint64_t seed, const NoiseScales& s = {})
      : scales(s), rng(seed) {}
};

/// One 13-vector disturbance draw: [pos(3), vel(3), quat(4), angvel(3)]
/// blocks of independent scaled standard normals.
inline State13 draw_perturbation(PerturbationModel& model) {
  State13 w;
  for (int i = 0; i < 3; ++i) w(i) = model.scales.position * model.rng.normal();
  for (int i = 3; i < 6; ++i) w(i) = model.scales.velocity * model.rng.normal();
  for (int i = 6; i < 10; ++i) w(i) = model.scales.quaternion * model.rng.normal();
  for (int i = 10; i < 13; ++i) w(i) = model.scales.angular_velocity * model.rng.normal();
  return w;
}

/// Everything one episode needs. Defaults reproduce the headline docking
/// scenario (chief/deputy parameters, initial condition, N = 1000, dt = 3 s,
/// j_max = 3, unperturbed, tolerance 1e-3).
struct ScenarioConfig {
  SpacecraftParams params{};
  RelativeState x_init = default_initial_state();
  int horizon{1000};
  double dt{3.0};
  CostWeights weights{};
  InputBounds bounds{};
  std::optional<int> j_max{3};
  bool perturbed{false};
  NoiseScales noise{};
  double docking_tol{1e-3};
  std::uint64_t rng_seed{0};
  int max_episode_steps{3000};
  bool record_wall_time{true};
  SolverConfig solver{};

  static RelativeState default_initial_state() {
    RelativeState s;
    s.position = Vec3(1.5, -1.77, 3.0);
    s.velocity = Vec3(0.001, 0.0034, 0.0);
    s.attitude = Quaternion(0.7715, Vec3(0.4629, 0.3086, 0.3086)).normalized();
    s.angular_velocity = Vec3(0.0, 0.0, -0.005);
    return s;
  }

  OcpConfig ocp() const { return OcpConfig{horizon, dt, weights, bounds, params}; }

  void validate() const {
    params.validate();
    weights.validate();
    bounds.validate();
    noise.validate();
    if (!(docking_tol > 0.0)) throw std::invalid_argument("ScenarioConfig: docking_tol must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("ScenarioConfig: dt must be > 0");
    if (horizon < 1) throw std::invalid_argument("ScenarioConfig: horizon must be >= 1");
    if (max_episode_steps < 1) {
      throw std::invalid_argument("ScenarioConfig: max_episode_steps must be >= 1");
    }
    if (j_max && *j_max < 1) throw std::invalid_argument("ScenarioConfig: j_max must be >= 1");
  }

  /// Fingerprint of every field except the iteration cap and timing mode;
  /// timing comparisons only make sense between runs that share it.
  std::string comparability_key() const {
    std::ostringstream os;
    os.precision(17);
    os << params.mean_motion << ' ' << params.mass << ' ' << params.inertia.transpose() << ' '
       << x_init.flatten().transpose() << ' ' << horizon << ' ' << dt << ' '
       << weights.q_diag.transpose() << ' ' << weights.r_diag.transpose() << ' '
       << bounds.u_min.transpose() << ' ' << bounds.u_max.transpose() << ' ' << perturbed << ' '
       << noise.position << ' ' << noise.velocity << ' ' << noise.quaternion << ' '
       << noise.angular_velocity << ' ' << docking_tol << ' ' << rng_seed << ' '
       << max_episode_steps;
    return os.str();
  }
};

struct StepRecord {
  int k{0};
  State13 x{State13::Zero()};
  Input6 u{Input6::Zero()};
  int iterations{0};
  Termination termination{Termination::AlreadyOptimal};
  double solve_time_s{0.0};
  double err_2norm{0.0};      // ||x(k) - x_d||_2
  double z_err_infnorm{0.0};  // ||z(k) - z_d||_inf
};

struct TrajectoryLog {
  std::vector<StepRecord> steps;
  std::optional<int> docking_step;
  double total_time_s{0.0};
  std::optional<int> j_max;
  bool perturbed{false};
  std::string scenario_key;

  bool docked() const { return docking_step.has_value(); }
};

/// Solver failure inside the control loop, with the partial episode attached.
struct EpisodeError : std::runtime_error {
  TrajectoryLog partial_log;
  EpisodeError(const std::string& what, TrajectoryLog log)
      : std::runtime_error(what), partial_log(std::move(log)) {}
};

inline double z_error_infnorm(const State13& x, const Input6& u, const DockingTarget& target) {
  return std::max((x - target.x_d).lpNorm<Eigen::Infinity>(),
                  (u - target.u_d).lpNorm<Eigen::Infinity>());
}

/// Run one closed-loop episode. Stops at docking, at the end of the fixed
/// horizon, or at the episode step budget, whichever comes first; only the
/// docking exit sets docking_step.
inline TrajectoryLog run_episode(const ScenarioConfig& cfg) {
  cfg.validate();
  const DockingTarget target;
  const OcpConfig ocp_cfg = cfg.ocp();
  SolverConfig solver_cfg = cfg.solver;
  solver_cfg.j_max = cfg.j_max;

  TrajectoryLog log;
  log.j_max = cfg.j_max;
  log.perturbed = cfg.perturbed;
  log.scenario_key = cfg.comparability_key();

  PerturbationModel noise(cfg.rng_seed, cfg.noise);
  RelativeState x = cfg.x_init;
  x.attitude = x.attitude.normalized();
  std::optional<SolveOutcome> prev;

  for (int k = 0; k < cfg.horizon && k < cfg.max_episode_steps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    SolveOutcome out;
    try {
      const OcpInstance inst = build_instance(x.flatten(), k, ocp_cfg);
      const DecisionVector init = warm_start_from(prev ? &*prev : nullptr, inst);
      out = solve(inst, init, solver_cfg, prev ? &*prev : nullptr);
    } catch (const std::exception& e) {
      throw EpisodeError("episode failed at step " + std::to_string(k) + ": " + e.what(),
                         std::move(log));
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const Input6 u = out.u_seq.front().flatten();
    StepRecord rec;
    rec.k = k;
    rec.x = x.flatten();
    rec.u = u;
    rec.iterations = out.iterations;
    rec.termination = out.termination;
    rec.solve_time_s = cfg.record_wall_time ? elapsed : 0.0;
    rec.err_2norm = (rec.x - target.x_d).norm();
    rec.z_err_infnorm = z_error_infnorm(rec.x, u, target);
    log.steps.push_back(rec);
    log.total_time_s += rec.solve_time_s;

    if (rec.z_err_infnorm <= cfg.docking_tol) {
      log.docking_step = k;
      break;
    }

    x = rk4_step(x, out.u_seq.front(), cfg.params, cfg.dt);
    if (cfg.perturbed) {
      State13 xv = x.flatten() + draw_perturbation(noise);
      x = RelativeState::from_vector(xv);  // renormalizes the quaternion block
    }
    prev = std::move(out);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Monte Carlo campaigns.
// ---------------------------------------------------------------------------

using InitSampler = std::function<RelativeState(std::uint64_t)>;

/// Documented initial-condition distribution: position uniform per axis in
/// +-2 km rejecting the 0.1 km ball at the origin, velocity uniform per axis
/// in +-5e-3 km/s, attitude uniform on the quaternion sphere, angular
/// velocity uniform per axis in +-1e-2 rad/s.
inline RelativeState default_init_sampler(std::uint64_t seed) {
  Rng rng(seed);
  RelativeState s;
  do {
    for (int i = 0; i < 3; ++i) s.position(i) = rng.uniform(-2.0, 2.0);
  } while (s.position.norm() < 0.1);
  for (int i = 0; i < 3; ++i) s.velocity(i) = rng.uniform(-5e-3, 5e-3);
  const double u1 = rng.uniform01();
  const double a = 2.0 * std::numbers::pi * rng.uniform01();
  const double b = 2.0 * std::numbers::pi * rng.uniform01();
  const double s1 = std::sqrt(1.0 - u1);
  const double s2 = std::sqrt(u1);
  s.attitude = Quaternion(s2 * std::cos(b), Vec3(s1 * std::sin(a), s1 * std::cos(a),
                                                 s2 * std::sin(b)))
                   .normalized();
  for (int i = 0; i < 3; ++i) s.angular_velocity(i) = rng.uniform(-1e-2, 1e-2);
  return s;
}

struct McRunResult {
  int run_index{0};
  std::uint64_t seed{0};
  bool failed{false};
  std::string error;
  bool docked{false};
  std::optional<int> docking_step;
  double terminal_err_2norm{0.0};
  int steps{0};
};

struct McSummary {
  std::vector<McRunResult> runs;
  int docked_count{0};
  double mean_terminal_error{0.0};  // mean over runs that completed
};

/// Run n episodes with per-run seeds `base.rng_seed + run_index` driving both
/// the initial-condition draw and the disturbance stream. Episodes execute in
/// parallel; the summary is ordered by run index regardless of scheduling.
inline McSummary monte_carlo(const ScenarioConfig& base, int n_runs,
                             const InitSampler& sampler = default_init_sampler) {
  if (n_runs < 1) throw std::invalid_argument("monte_carlo: n_runs must be >= 1");
  McSummary summary;
  summary.runs.resize(n_runs);

  std::atomic<int> next{0};
  const unsigned n_workers =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(n_runs));
  auto worker = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= n_runs) return;
      McRunResult& res = summary.runs[r];
      res.run_index = r;
      res.seed = base.rng_seed + static_cast<std::uint64_t>(r);
      try {
        ScenarioConfig cfg = base;
        cfg.rng_seed = res.seed;
        cfg.x_init = sampler(res.seed);
        const TrajectoryLog log = run_episode(cfg);
        res.docked = log.docked();
        res.docking_step = log.docking_step;
        res.steps = static_cast<int>(log.steps.size());
        res.terminal_err_2norm = log.steps.empty() ? 0.0 : log.steps.back().err_2norm;
      } catch (const std::exception& e) {
        res.failed = true;
        res.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int completed = 0;
  double err_sum = 0.0;
  for (const McRunResult& r : summary.runs) {
    if (r.failed) continue;
    ++completed;
    if (r.docked) ++summary.docked_count;
    err_sum += r.terminal_err_2norm;
  }
  summary.mean_terminal_error = completed > 0 ? err_sum / completed : 0.0;
  return summary;
}

// ---------------------------------------------------------------------------
// Timing structure (solver times and reductions).
// ---------------------------------------------------------------------------

struct TimingRow {
  std::optional<int> j_max;
  double avg_loop_s{0.0};
  double max_loop_s{0.0};
  double avg_reduction_s{0.0};
  double avg_reduction_pct{0.0};
  double max_reduction_s{0.0};
  double max_reduction_pct{0.0};
};

struct TimingTable {
  TimingRow baseline;
  std::vector<TimingRow> rows;
};

namespace detail {
inline std::pair<double, double> loop_time_stats(const TrajectoryLog& log) {
  double sum = 0.0;
  double mx = 0.0;
  for (const StepRecord& s : log.steps) {
    sum += s.solve_time_s;
    mx = std::max(mx, s.solve_time_s);
  }
  return {log.steps.empty() ? 0.0 : sum / static_cast<double>(log.steps.size()), mx};
}
}  // namespace detail

/// Average/max solve time per loop for each capped run and the four
/// reduction columns (absolute and percentage, average and maximum) against
/// the uncapped baseline from the same scenario.
inline TimingTable timing_report(const std::vector<const TrajectoryLog*>& capped,
                                 const TrajectoryLog& baseline) {
  if (baseline.j_max.has_value()) {
    throw std::invalid_argument("timing_report: baseline must be an uncapped run");
  }
  TimingTable table;
  const auto [base_avg, base_max] = detail::loop_time_stats(baseline);
  table.baseline.j_max = std::nullopt;
  table.baseline.avg_loop_s = base_avg;
  table.baseline.max_loop_s = base_max;

  for (const TrajectoryLog* log : capped) {
    if (log->scenario_key != baseline.scenario_key) {
      throw std::invalid_argument("timing_report: mismatched scenarios");
    }
    if (!log->j_max.has_value()) {
      throw std::invalid_argument("timing_report: capped runs must have a j_max");
    }
    TimingRow row;
    row.j_max = log->j_max;
    const auto [avg, mx] = detail::loop_time_stats(*log);
    row.avg_loop_s = avg;
    row.max_loop_s = mx;
    row.avg_reduction_s = base_avg - avg;
    row.avg_reduction_pct = base_avg > 0.0 ? 100.0 * row.avg_reduction_s / base_avg : 0.0;
    row.max_reduction_s = base_max - mx;
    row.max_reduction_pct = base_max > 0.0 ? 100.0 * row.max_reduction_s / base_max : 0.0;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace arpod
