#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "arpod/ocp.hpp"

// Equality/box-constrained quadratic subproblem of one solver iteration,
// solved by a backward Riccati sweep over the stage structure. Linearized
// dynamics defects are hard equalities (always consistent: the state deltas
// absorb them), the terminal equality enters through an augmented-Lagrangian
// quadratic (multiplier y_T, weight mu_T), and control box bounds are
// enforced by an active-set-by-clamping iteration with bulk updates.

namespace arpod {

using Mat13 = Eigen::Matrix<double, 13, 13>;
using Mat13x6 = Eigen::Matrix<double, 13, 6>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat6x13 = Eigen::Matrix<double, 6, 13>;

enum class ClampState : unsigned char { Free, Lower, Upper };

/// Quadratic model of one solver iteration around the current iterate.
struct QpProblem {
  // Stage data, i = 0..m-1.
  const std::vector<Mat13>* A{nullptr};
  const std::vector<Mat13x6>* B{nullptr};
  const std::vector<State13>* defect{nullptr};
  std::vector<Input6> gu;   // cost gradient wrt u(k+i)
  std::vector<State13> gx;  // cost gradient wrt state block i (unused for the last block)
  std::vector<Input6> lo;   // step lower bounds u_min - u(k+i)
  std::vector<Input6> hi;   // step upper bounds u_max - u(k+i)
  Input6 hu;                // cost Hessian diagonal of u blocks (2R)
  State13 hx;               // cost Hessian diagonal of interior state blocks (2Q)
  State13 terminal_residual;
  State13 terminal_gradient;  // y_T + mu_T * terminal_residual
  double mu_T{0.0};
  double reg{0.0};  // Levenberg shift added to each Quu

  int stages() const { return static_cast<int>(A->size()); }
};

struct QpSolution {
  Eigen::VectorXd step;                 // decision-vector layout [du_i, dx_{i+1}]
  std::vector<State13> costate;         // defect multipliers lambda_{i+1}
  State13 terminal_multiplier;          // mu_T*(c_T + dx_m) + y_T
  double objective_decrease{0.0};       // -Phi(step), Phi the QP objective (Phi(0)=0)
  double max_multiplier{0.0};           // max-norm over multipliers (for merit penalty updates)
  int sweeps{0};
  bool hit_sweep_cap{false};
  bool ok{false};
  std::vector<ClampState> active;       // 6 per stage
};

namespace detail {

struct RiccatiStage {
  Mat6 Quu;
  Mat6x13 Qux;
  Input6 qu;
  Mat6x13 K;
  Input6 kff;
};

}  // namespace detail

/// Solve the stage-structured QP. `warm_active` (6*m entries) seeds the
/// clamping active set when provided.
inline QpSolution solve_stage_qp(const QpProblem& qp,
                                 const std::vector<ClampState>* warm_active = nullptr,
                                 int max_sweeps = 30) {
  const int m = qp.stages();
  QpSolution sol;
  sol.active.assign(static_cast<std::size_t>(m) * kInputDim, ClampState::Free);
  if (warm_active && warm_active->size() == sol.active.size()) sol.active = *warm_active;

  std::vector<detail::RiccatiStage> st(m);
  std::vector<Mat13> P(m + 1);    // value Hessians, index = state position
  std::vector<State13> p(m + 1);  // value gradients
  std::vector<Input6> du(m);
  std::vector<State13> dx(m + 1);  // dx[0] = 0 (initial state is not a variable)
  double reg = qp.reg;

  auto active_at = [&](int i, int a) -> ClampState& {
    return sol.active[static_cast<std::size_t>(i) * kInputDim + a];
  };
  auto clamp_value = [&](int i, int a) {
    return active_at(i, a) == ClampState::Lower ? qp.lo[i](a) : qp.hi[i](a);
  };

  for (int attempt = 0; attempt < 6; ++attempt) {  // Levenberg retries
    bool factorization_failed = false;
    bool add_only = false;
    sol.sweeps = 0;
    sol.hit_sweep_cap = false;
    while (true) {
      ++sol.sweeps;
      // Backward sweep.
      P[m] = qp.mu_T * Mat13::Identity();
      p[m] = qp.terminal_gradient;
      for (int i = m - 1; i >= 0; --i) {
        const Mat13& A = (*qp.A)[i];
        const Mat13x6& B = (*qp.B)[i];
        const State13 ptil = p[i + 1] - P[i + 1] * (*qp.defect)[i];
        const Mat13 PA = P[i + 1] * A;
        const Mat13x6 PB = P[i + 1] * B;
        detail::RiccatiStage& s = st[i];
        s.Quu = B.transpose() * PB;
        s.Quu.diagonal() += qp.hu;
        if (reg > 0.0) s.Quu.diagonal().array() += reg;
        s.Qux = B.transpose() * PA;
        s.qu = qp.gu[i] + B.transpose() * ptil;

        // Substitute clamped components, then factor the reduced system.
        Mat6 Quu_eff = s.Quu;
        Mat6x13 Qux_eff = s.Qux;
        Input6 qu_eff = s.qu;
        for (int a = 0; a < kInputDim; ++a) {
          if (active_at(i, a) == ClampState::Free) continue;
          qu_eff += s.Quu.col(a) * clamp_value(i, a);
        }
        for (int a = 0; a < kInputDim; ++a) {
          if (active_at(i, a) == ClampState::Free) continue;
          Quu_eff.row(a).setZero();
          Quu_eff.col(a).setZero();
          Quu_eff(a, a) = 1.0;
          Qux_eff.row(a).setZero();
          qu_eff(a) = -clamp_value(i, a);
        }
        Eigen::LLT<Mat6> llt(Quu_eff);
        if (llt.info() != Eigen::Success) {
          factorization_failed = true;
          break;
        }
        s.K = -llt.solve(Qux_eff);
        s.kff = -llt.solve(qu_eff);

        // Value update with the true (unmodified) stage quadratic.
        Mat13 Qxx = A.transpose() * PA;
        State13 qx = A.transpose() * ptil;
        if (i >= 1) {
          Qxx.diagonal() += qp.hx;
          qx += qp.gx[i - 1];
        }
        Mat13 Pi = Qxx + s.K.transpose() * (s.Quu * s.K) + s.K.transpose() * s.Qux +
                   s.Qux.transpose() * s.K;
        P[i] = 0.5 * (Pi + Pi.transpose());
        p[i] = qx + s.K.transpose() * (s.Quu * s.kff + s.qu) + s.Qux.transpose() * s.kff;
      }
      if (factorization_failed) break;

      // Forward rollout.
      dx[0].setZero();
      const bool project = sol.sweeps >= max_sweeps;
      for (int i = 0; i < m; ++i) {
        du[i] = st[i].kff + st[i].K * dx[i];
        if (project) du[i] = du[i].cwiseMax(qp.lo[i]).cwiseMin(qp.hi[i]);
        dx[i + 1] = (*qp.A)[i] * dx[i] + (*qp.B)[i] * du[i] - (*qp.defect)[i];
      }
      if (project) {
        sol.hit_sweep_cap = true;
        break;
      }

      // Active-set update (bulk, deterministic order).
      int changes = 0;
      for (int i = 0; i < m; ++i) {
        for (int a = 0; a < kInputDim; ++a) {
          ClampState& c = active_at(i, a);
          if (c == ClampState::Free) {
            if (du[i](a) < qp.lo[i](a)) {
              c = ClampState::Lower;
              ++changes;
            } else if (du[i](a) > qp.hi[i](a)) {
              c = ClampState::Upper;
              ++changes;
            }
          } else if (!add_only) {
            const double grad =
                st[i].Quu.row(a).dot(du[i]) + st[i].Qux.row(a).dot(dx[i]) + st[i].qu(a);
            // Unconstrained move off the bound; release if strictly interior.
            const double move = -grad / st[i].Quu(a, a);
            const double tol = 1e-12 * (1.0 + qp.hi[i](a) - qp.lo[i](a));
            if ((c == ClampState::Lower && move > tol) ||
                (c == ClampState::Upper && move < -tol)) {
              c = ClampState::Free;
              ++changes;
            }
          }
        }
      }
      if (changes == 0) break;
      // Guard against release/clamp cycling: past half the budget, only clamp.
      if (sol.sweeps > max_sweeps / 2) add_only = true;
    }

    if (!factorization_failed) {
      sol.ok = true;
      break;
    }
    reg = (reg == 0.0) ? 1e-8 : reg * 100.0;
  }
  if (!sol.ok) return sol;

  // Pack step, multipliers, and the model decrease.
  sol.step.resize(static_cast<Eigen::Index>(m) * DecisionVector::kStageDim);
  sol.costate.resize(m);
  double phi = 0.0;
  for (int i = 0; i < m; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * DecisionVector::kStageDim;
    sol.step.segment<kInputDim>(off) = du[i];
    sol.step.segment<kStateDim>(off + kInputDim) = dx[i + 1];
    sol.costate[i] = P[i + 1] * dx[i + 1] + p[i + 1];
    sol.max_multiplier =
        std::max(sol.max_multiplier, sol.costate[i].lpNorm<Eigen::Infinity>());
    phi += 0.5 * du[i].cwiseProduct(qp.hu).dot(du[i]) + qp.gu[i].dot(du[i]);
    if (i + 1 < m) {
      phi += 0.5 * dx[i + 1].cwiseProduct(qp.hx).dot(dx[i + 1]) + qp.gx[i].dot(dx[i + 1]);
    }
  }
  phi += 0.5 * qp.mu_T * dx[m].squaredNorm() + qp.terminal_gradient.dot(dx[m]);
  sol.objective_decrease = -phi;
  sol.terminal_multiplier = qp.terminal_gradient + qp.mu_T * dx[m];
  return sol;
}

}  // namespace arpod
