#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <vector>

#include "arpod/dynamics.hpp"

// Shrinking-horizon optimal control problem built at each control step:
// quadratic tracking cost toward the docking state, RK4 dynamics defects
// (multiple shooting), control box bounds, and a terminal equality on the
// final state. The cost sums stages i = k..N-1 toward a fixed final index N,
// so the instance at step k has m = N-k stages.

namespace arpod {

struct HorizonExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Diagonal state/input weights of the quadratic stage cost. Defaults are
/// the docking-study matrices Q = diag([10*1_3, 1e-4*1_3, 1e8*1_7]) and
/// R = diag([1e3*1_3, 1e10*1_3]).
struct CostWeights {
  State13 q_diag = default_q();
  Input6 r_diag = default_r();

  static State13 default_q() {
    State13 q;
    q << 10.0, 10.0, 10.0, 1e-4, 1e-4, 1e-4, 1e8, 1e8, 1e8, 1e8, 1e8, 1e8, 1e8;
    return q;
  }
  static Input6 default_r() {
    Input6 r;
    r << 1e3, 1e3, 1e3, 1e10, 1e10, 1e10;
    return r;
  }

  void validate() const {
    if (q_diag.minCoeff() < 0.0 || r_diag.minCoeff() < 0.0) {
      throw std::invalid_argument("CostWeights: diagonal entries must be nonnegative");
    }
  }
};

/// Componentwise control bounds (thrust in N, torque in N*m). Defaults are
/// the docking-study limits +-1e-3 N and +-1e-4 N*m.
struct InputBounds {
  Input6 u_min = -default_magnitudes();
  Input6 u_max = default_magnitudes();

  static Input6 default_magnitudes() {
    Input6 hi;
    hi << 1e-3, 1e-3, 1e-3, 1e-4, 1e-4, 1e-4;
    return hi;
  }

  static InputBounds symmetric(double thrust, double torque) {
    InputBounds b;
    b.u_max << thrust, thrust, thrust, torque, torque, torque;
    b.u_min = -b.u_max;
    return b;
  }

  void validate() const {
    if (((u_max - u_min).array() < 0.0).any()) {
      throw std::invalid_argument("InputBounds: u_min must be <= u_max componentwise");
    }
  }
};

/// Time grid, weights, bounds and plant parameters shared by every instance
/// of one closed-loop run.
struct OcpConfig {
  int horizon{1000};  // final step index N
  double dt{3.0};     // sampling time [s]
  CostWeights weights{};
  InputBounds bounds{};
  SpacecraftParams params{};
};

/// One shrinking-horizon instance: minimize
///   sum_{i=k}^{N-1} (x(i)-x_d)' Q (x(i)-x_d) + u(i)' R u(i)
/// subject to x(i+1) = g_d(x(i), u(i)), u_min <= u(i) <= u_max, x(N) = x_d,
/// with x(k) fixed to the measured state.
struct OcpInstance {
  State13 x0;
  int k{0};
  int N{1000};
  double dt{3.0};
  CostWeights weights{};
  InputBounds bounds{};
  DockingTarget target{};
  SpacecraftParams params{};

  int stages() const { return N - k; }
};

inline OcpInstance build_instance(const State13& x0, int k, const OcpConfig& cfg) {
  if (k >= cfg.horizon) {
    throw HorizonExhausted("build_instance: step index " + std::to_string(k) +
                           " has no remaining horizon (N = " + std::to_string(cfg.horizon) + ")");
  }
  if (k < 0) throw std::invalid_argument("build_instance: negative step index");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("build_instance: dt must be positive");
  cfg.weights.validate();
  cfg.bounds.validate();
  cfg.params.validate();
  OcpInstance inst;
  inst.x0 = x0;
  inst.k = k;
  inst.N = cfg.horizon;
  inst.dt = cfg.dt;
  inst.weights = cfg.weights;
  inst.bounds = cfg.bounds;
  inst.params = cfg.params;
  return inst;
}

/// Multiple-shooting decision variables: per stage i the control u(k+i) and
/// the successor state x(k+i+1), flattened stage-by-stage. Quaternion blocks
/// live unconstrained in the raw vector and are renormalized only on typed
/// extraction.
class DecisionVector {
 public:
  static constexpr int kStageDim = kInputDim + kStateDim;  // 19

  DecisionVector() = default;
  explicit DecisionVector(int stages) : stages_(stages) {
    if (stages < 1) throw std::invalid_argument("DecisionVector: need at least one stage");
    v_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(stages) * kStageDim);
  }

  int stages() const { return stages_; }
  Eigen::Index size() const { return v_.size(); }
  Eigen::VectorXd& raw() { return v_; }
  const Eigen::VectorXd& raw() const { return v_; }

  Eigen::Ref<Input6> control(int i) { return v_.segment<kInputDim>(offset(i)); }
  Eigen::Ref<const Input6> control(int i) const { return v_.segment<kInputDim>(offset(i)); }
  Eigen::Ref<State13> state(int i) { return v_.segment<kStateDim>(offset(i) + kInputDim); }
  Eigen::Ref<const State13> state(int i) const {
    return v_.segment<kStateDim>(offset(i) + kInputDim);
  }

  ControlInput control_extracted(int i) const { return ControlInput::from_vector(control(i)); }
  /// Typed state with the quaternion block renormalized.
  RelativeState state_extracted(int i) const { return RelativeState::from_vector(state(i)); }

 private:
  Eigen::Index offset(int i) const {
    if (i < 0 || i >= stages_) throw DimensionMismatch("DecisionVector: stage index out of range");
    return static_cast<Eigen::Index>(i) * kStageDim;
  }

  int stages_{0};
  Eigen::VectorXd v_;
};

inline void check_dimensions(const OcpInstance& inst, const DecisionVector& d) {
  if (d.stages() != inst.stages()) {
    throw DimensionMismatch("decision vector has " + std::to_string(d.stages()) +
                            " stages, instance needs " + std::to_string(inst.stages()));
  }
}

/// Stage cost sum with x(k) fixed to the instance's x0.
inline double eval_cost(const OcpInstance& inst, const DecisionVector& d) {
  check_dimensions(inst, d);
  const State13& xd = inst.target.x_d;
  const State13& q = inst.weights.q_diag;
  const Input6& r = inst.weights.r_diag;
  const int m = inst.stages();

  double cost = (inst.x0 - xd).cwiseProduct(q).dot(inst.x0 - xd);
  for (int i = 0; i < m; ++i) {
    const Input6 u = d.control(i);
    cost += u.cwiseProduct(r).dot(u);
    if (i + 1 < m) {  // states x(k+1)..x(N-1) carry stage cost; x(N) does not
      const State13 e = d.state(i) - xd;
      cost += e.cwiseProduct(q).dot(e);
    }
  }
  return cost;
}

/// Stacked dynamics defects x(i+1) - g_d(x(i), u(i)) for i = k..N-1 followed
/// by the terminal residual x(N) - x_d. Box bounds are not part of this
/// residual; they are box constraints on the decision vector itself.
inline Eigen::VectorXd eval_constraints(const OcpInstance& inst, const DecisionVector& d) {
  check_dimensions(inst, d);
  const int m = inst.stages();
  Eigen::VectorXd res(static_cast<Eigen::Index>(m + 1) * kStateDim);
  State13 prev = inst.x0;
  for (int i = 0; i < m; ++i) {
    const State13 pred = rk4_step_vec<double>(prev, d.control(i), inst.params, inst.dt);
    res.segment<kStateDim>(static_cast<Eigen::Index>(i) * kStateDim) = d.state(i) - pred;
    prev = d.state(i);
  }
  res.tail<kStateDim>() = d.state(m - 1) - inst.target.x_d;
  return res;
}

/// Exact gradient of eval_cost in the decision layout.
inline Eigen::VectorXd eval_cost_gradient(const OcpInstance& inst, const DecisionVector& d) {
  check_dimensions(inst, d);
  const int m = inst.stages();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d.size());
  for (int i = 0; i < m; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * DecisionVector::kStageDim;
    g.segment<kInputDim>(off) =
        2.0 * inst.weights.r_diag.cwiseProduct(Input6(d.control(i)));
    if (i + 1 < m) {
      g.segment<kStateDim>(off + kInputDim) =
          2.0 * inst.weights.q_diag.cwiseProduct(State13(d.state(i) - inst.target.x_d));
    }
  }
  return g;
}

/// Per-stage linearization of the discrete map along the current iterate.
struct StageLinearization {
  std::vector<Eigen::Matrix<double, 13, 13>> A;  // d g_d / d x(k+i)
  std::vector<Eigen::Matrix<double, 13, 6>> B;   // d g_d / d u(k+i)
  std::vector<State13> defect;                   // x(i+1) - g_d(x(i), u(i))
  State13 terminal;                              // x(N) - x_d
};

inline StageLinearization linearize_stages(const OcpInstance& inst, const DecisionVector& d) {
  check_dimensions(inst, d);
  const int m = inst.stages();
  StageLinearization lin;
  lin.A.resize(m);
  lin.B.resize(m);
  lin.defect.resize(m);
  State13 prev = inst.x0;
  for (int i = 0; i < m; ++i) {
    const StepWithJacobian sj = rk4_step_with_jacobian(prev, d.control(i), inst.params, inst.dt);
    lin.A[i] = sj.dx;
    lin.B[i] = sj.du;
    lin.defect[i] = d.state(i) - sj.value;
    prev = d.state(i);
  }
  lin.terminal = d.state(m - 1) - inst.target.x_d;
  return lin;
}

/// Sparse Jacobian of eval_constraints (block-banded multiple-shooting
/// pattern: +I on each defect's own state, -A on the previous state, -B on
/// the stage control, +I on the terminal rows).
inline Eigen::SparseMatrix<double> eval_constraint_jacobian(const OcpInstance& inst,
                                                            const DecisionVector& d) {
  const StageLinearization lin = linearize_stages(inst, d);
  const int m = inst.stages();
  const Eigen::Index rows = static_cast<Eigen::Index>(m + 1) * kStateDim;
  Eigen::SparseMatrix<double> jac(rows, d.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * kStateDim * (kStateDim + kInputDim + 2));

  auto col_u = [](int i) { return static_cast<Eigen::Index>(i) * DecisionVector::kStageDim; };
  auto col_x = [](int i) {
    return static_cast<Eigen::Index>(i) * DecisionVector::kStageDim + kInputDim;
  };

  for (int i = 0; i < m; ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i) * kStateDim;
    for (int r = 0; r < kStateDim; ++r) {
      trips.emplace_back(row + r, col_x(i) + r, 1.0);
      for (int c = 0; c < kInputDim; ++c) trips.emplace_back(row + r, col_u(i) + c, -lin.B[i](r, c));
      if (i > 0) {
        for (int c = 0; c < kStateDim; ++c) {
          trips.emplace_back(row + r, col_x(i - 1) + c, -lin.A[i](r, c));
        }
      }
    }
  }
  const Eigen::Index trow = static_cast<Eigen::Index>(m) * kStateDim;
  for (int r = 0; r < kStateDim; ++r) trips.emplace_back(trow + r, col_x(m - 1) + r, 1.0);

  jac.setFromTriplets(trips.begin(), trips.end());
  jac.makeCompressed();
  return jac;
}

/// Forward rollout of the given controls from x0 written into the state
/// blocks (zero defects by construction).
inline void rollout_states(const OcpInstance& inst, DecisionVector& d) {
  check_dimensions(inst, d);
  State13 prev = inst.x0;
  for (int i = 0; i < d.stages(); ++i) {
    prev = rk4_step_vec<double>(prev, d.control(i), inst.params, inst.dt);
    d.state(i) = prev;
  }
}

/// Warm start for the instance at step k: shift the previous step's solution
/// by one stage (the shrinking horizon makes lengths line up exactly), or
/// fall back to a zero-control rollout when there is no previous solution.
inline DecisionVector warm_start_from(const DecisionVector* prev, const OcpInstance& inst) {
  DecisionVector d(inst.stages());
  if (prev == nullptr) {
    rollout_states(inst, d);
    return d;
  }
  if (prev->stages() != inst.stages() + 1) {
    throw DimensionMismatch("warm_start_from: previous solution must have exactly one more stage");
  }
  for (int i = 0; i < inst.stages(); ++i) {
    d.control(i) = prev->control(i + 1);
    d.state(i) = prev->state(i + 1);
  }
  return d;
}

}  // namespace arpod
