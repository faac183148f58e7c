#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "arpod/ocp.hpp"
#include "arpod/qp.hpp"

// Iteration-capped SQP solver. Each iteration builds the exact quadratic cost
// model with freshly linearized dynamics, solves the stage-structured QP
// (Riccati + control clamping, terminal equality via augmented Lagrangian),
// and runs a backtracking line search on an l1 merit function. The solve
// terminates at the first of: (1) the cost change between consecutive
// iterations drops below tolerance with feasible constraints, or (2) the
// iteration cap j_max is reached. The incumbent iterate is returned either
// way; capped solves hand back a sub-optimal but bound-feasible sequence.

namespace arpod {

struct SolverConfig {
  std::optional<int> j_max{};        // empty = run to convergence
  double cost_change_tol{1e-8};
  double constraint_tol{1e-8};
  double merit_penalty{1.0};         // initial l1 penalty (raised from multipliers)
  double merit_penalty_growth{1.5};  // safety factor over the multiplier estimate
  double armijo_coeff{1e-4};         // sufficient-decrease coefficient
  double backtrack_factor{0.5};
  int max_backtracks{30};
  double qp_reg{0.0};                // initial Levenberg shift (raised on demand)
  int qp_max_sweeps{30};
  double terminal_penalty{1e8};      // initial augmented-Lagrangian weight
  double terminal_penalty_growth{10.0};
  double terminal_penalty_max{1e14};

  void validate() const {
    if (j_max && *j_max < 1) throw std::invalid_argument("SolverConfig: j_max must be >= 1");
    if (!(cost_change_tol > 0.0) || !(constraint_tol > 0.0)) {
      throw std::invalid_argument("SolverConfig: tolerances must be positive");
    }
    if (!(merit_penalty > 0.0)) {
      throw std::invalid_argument("SolverConfig: merit penalty must be positive");
    }
  }
};

enum class Termination {
  AlreadyOptimal,       // init already satisfied the stopping test
  CostChangeConverged,  // stopping condition (1)
  IterationCapped,      // stopping condition (2): j_k == j_max
  Stalled,              // line search could not progress on an infeasible iterate
  QpFailed,             // subproblem factorization failed after retries
};

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::AlreadyOptimal: return "already-optimal";
    case Termination::CostChangeConverged: return "cost-change-converged";
    case Termination::IterationCapped: return "iteration-capped";
    case Termination::Stalled: return "stalled";
    case Termination::QpFailed: return "qp-failed";
  }
  return "unknown";
}

/// Possibly sub-optimal input/state sequences plus solve diagnostics and the
/// carry-over state used to warm start the next shrinking-horizon solve.
struct SolveOutcome {
  std::vector<ControlInput> u_seq;   // u(k..N-1), bound-feasible
  std::vector<RelativeState> x_seq;  // x(k..N), quaternions renormalized
  int iterations{0};
  Termination termination{Termination::AlreadyOptimal};
  double final_cost{0.0};
  double max_constraint_violation{0.0};
  double wall_time{0.0};  // seconds

  // Warm-start carry.
  DecisionVector decision;
  State13 terminal_multiplier{State13::Zero()};
  double merit_penalty_carry{0.0};
  double terminal_penalty_carry{0.0};
  std::vector<ClampState> active_set;

  // Accepted-iterate merit decreases (one entry per accepted step, >= 0 when
  // the line search honored its contract). For tests and diagnostics.
  std::vector<double> merit_decreases;
};

namespace detail {

struct ConstraintNorms {
  double l1{0.0};
  double linf{0.0};
};

inline ConstraintNorms constraint_norms(const Eigen::VectorXd& c) {
  return {c.lpNorm<1>(), c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0};
}

}  // namespace detail

/// Solve one shrinking-horizon instance from `init`, at most cfg.j_max
/// iterations. `prev` (the previous step's outcome) carries multipliers,
/// penalties, and the clamping active set across MPC steps.
inline SolveOutcome solve(const OcpInstance& inst, const DecisionVector& init,
                          const SolverConfig& cfg, const SolveOutcome* prev = nullptr) {
  cfg.validate();
  check_dimensions(inst, init);
  if (!init.raw().allFinite()) throw std::invalid_argument("solve: non-finite initial iterate");

  const auto t_start = std::chrono::steady_clock::now();
  const int m = inst.stages();
  constexpr double kEps = std::numeric_limits<double>::epsilon();

  SolveOutcome out;
  out.decision = init;
  DecisionVector& z = out.decision;
  for (int i = 0; i < m; ++i) {  // project the initial controls onto the box
    z.control(i) = Input6(z.control(i)).cwiseMax(inst.bounds.u_min).cwiseMin(inst.bounds.u_max);
  }

  double nu = cfg.merit_penalty;
  double mu_T = cfg.terminal_penalty;
  State13 y_T = State13::Zero();
  std::vector<ClampState> active;
  if (prev != nullptr) {
    if (prev->merit_penalty_carry > 0.0) nu = prev->merit_penalty_carry;
    if (prev->terminal_penalty_carry > 0.0) mu_T = prev->terminal_penalty_carry;
    y_T = prev->terminal_multiplier;
    if (prev->active_set.size() == static_cast<std::size_t>(m + 1) * kInputDim) {
      active.assign(prev->active_set.begin() + kInputDim, prev->active_set.end());
    }
  }

  double J = eval_cost(inst, z);
  detail::ConstraintNorms viol = detail::constraint_norms(eval_constraints(inst, z));
  double last_terminal_inf = std::numeric_limits<double>::infinity();

  int j = 0;
  int consecutive_failures = 0;
  Termination term = Termination::CostChangeConverged;
  bool done = false;

  QpProblem qp;
  qp.hu = 2.0 * inst.weights.r_diag;
  qp.hx = 2.0 * inst.weights.q_diag;
  qp.gu.resize(m);
  qp.gx.resize(m);
  qp.lo.resize(m);
  qp.hi.resize(m);
  qp.reg = cfg.qp_reg;

  DecisionVector trial(m);

  while (!done) {
    if (cfg.j_max && j >= *cfg.j_max) {
      term = Termination::IterationCapped;
      break;
    }

    const StageLinearization lin = linearize_stages(inst, z);
    qp.A = &lin.A;
    qp.B = &lin.B;
    qp.defect = &lin.defect;
    for (int i = 0; i < m; ++i) {
      qp.gu[i] = 2.0 * inst.weights.r_diag.cwiseProduct(Input6(z.control(i)));
      qp.gx[i] = (i + 1 < m)
                     ? State13(2.0 * inst.weights.q_diag.cwiseProduct(
                           State13(z.state(i) - inst.target.x_d)))
                     : State13::Zero();
      qp.lo[i] = inst.bounds.u_min - Input6(z.control(i));
      qp.hi[i] = inst.bounds.u_max - Input6(z.control(i));
    }
    qp.terminal_residual = lin.terminal;
    qp.mu_T = mu_T;
    qp.terminal_gradient = y_T + mu_T * lin.terminal;

    QpSolution qps = solve_stage_qp(qp, active.empty() ? nullptr : &active, cfg.qp_max_sweeps);
    if (!qps.ok) {
      term = Termination::QpFailed;
      break;
    }
    active = qps.active;

    // Merit penalty tracks the multiplier estimates.
    const double lambda_max =
        std::max(qps.max_multiplier, qps.terminal_multiplier.lpNorm<Eigen::Infinity>());
    nu = std::max(nu, cfg.merit_penalty_growth * lambda_max);

    // Predicted merit decrease of the full step (cost part is exact: the
    // cost is quadratic, so eval at the stepped point, not a model).
    trial.raw() = z.raw() + qps.step;
    const double J_full = eval_cost(inst, trial);
    const double c_lin_after =
        (lin.terminal + qps.step.tail<kStateDim>()).lpNorm<1>();
    const double pred = (J - J_full) + nu * (viol.l1 - c_lin_after);

    const double progress_floor = std::max(cfg.cost_change_tol, 4.0 * kEps * (1.0 + std::abs(J)));
    const double step_inf = qps.step.lpNorm<Eigen::Infinity>();
    if (viol.linf <= cfg.constraint_tol && qps.objective_decrease <= progress_floor &&
        step_inf <= 1e-10 * (1.0 + z.raw().lpNorm<Eigen::Infinity>())) {
      term = (j == 0) ? Termination::AlreadyOptimal : Termination::CostChangeConverged;
      break;
    }

    const double phi0 = J + nu * viol.l1;
    bool accepted = false;
    double alpha = 1.0;
    double J_new = J;
    detail::ConstraintNorms viol_new = viol;
    if (pred > 0.0) {
      for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
        trial.raw() = z.raw() + alpha * qps.step;
        const double J_try = eval_cost(inst, trial);
        const detail::ConstraintNorms c_try =
            detail::constraint_norms(eval_constraints(inst, trial));
        const double phi_try = J_try + nu * c_try.l1;
        if (phi_try <= phi0 - cfg.armijo_coeff * alpha * pred) {
          accepted = true;
          J_new = J_try;
          viol_new = c_try;
          break;
        }
        alpha *= cfg.backtrack_factor;
      }
    }

    ++j;  // one full QP step + line search consumed

    if (!accepted) {
      ++consecutive_failures;
      if (viol.linf <= cfg.constraint_tol) {
        term = Termination::CostChangeConverged;
        break;
      }
      mu_T = std::min(mu_T * cfg.terminal_penalty_growth, cfg.terminal_penalty_max);
      nu *= 10.0;
      if (consecutive_failures >= 5) {
        term = Termination::Stalled;
        break;
      }
      continue;
    }
    consecutive_failures = 0;
    out.merit_decreases.push_back(phi0 - (J_new + nu * viol_new.l1));
    z.raw() = z.raw() + alpha * qps.step;

    // First-order multiplier update on the terminal equality; raise the
    // weight when the terminal residual is not contracting.
    const State13 c_T = State13(z.state(m - 1)) - inst.target.x_d;
    y_T += mu_T * c_T;
    const double cT_inf = c_T.lpNorm<Eigen::Infinity>();
    if (cT_inf > 0.5 * last_terminal_inf && cT_inf > cfg.constraint_tol) {
      mu_T = std::min(mu_T * cfg.terminal_penalty_growth, cfg.terminal_penalty_max);
    }
    last_terminal_inf = cT_inf;

    const double dJ = std::abs(J_new - J);
    J = J_new;
    viol = viol_new;
    if (viol.linf <= cfg.constraint_tol &&
        (dJ < cfg.cost_change_tol || dJ <= 4.0 * kEps * (1.0 + std::abs(J)))) {
      term = Termination::CostChangeConverged;
      break;
    }
  }

  out.iterations = j;
  out.termination = term;
  out.final_cost = J;
  out.max_constraint_violation = viol.linf;
  out.terminal_multiplier = y_T;
  out.merit_penalty_carry = nu;
  out.terminal_penalty_carry = mu_T;
  out.active_set = active;

  out.u_seq.reserve(m);
  out.x_seq.reserve(m + 1);
  out.x_seq.push_back(RelativeState::from_vector(inst.x0));
  for (int i = 0; i < m; ++i) {
    const Input6 u =
        Input6(z.control(i)).cwiseMax(inst.bounds.u_min).cwiseMin(inst.bounds.u_max);
    z.control(i) = u;
    out.u_seq.push_back(ControlInput::from_vector(u));
    out.x_seq.push_back(z.state_extracted(i));
  }

  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

/// Warm start from the previous step's outcome (drop its first stage); zero
/// controls + rollout when absent.
inline DecisionVector warm_start_from(const SolveOutcome* prev, const OcpInstance& inst) {
  return warm_start_from(prev ? &prev->decision : nullptr, inst);
}

}  // namespace arpod
