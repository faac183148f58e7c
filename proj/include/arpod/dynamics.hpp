#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>

#include "arpod/dual.hpp"
#include "arpod/spatial.hpp"

// Continuous-time 6DOF relative dynamics of a controlled deputy spacecraft
// about an uncontrolled chief in a circular orbit, plus the fixed-step RK4
// discrete map used by the optimal control transcription.
//
// State x (13): [dr (km), dr_dot (km/s), eta, rho (3), dw (rad/s)] where
// (eta, rho) is the attitude error quaternion (deputy frame relative to the
// chief orbital frame) and dw the error angular velocity in chief-frame
// components. Control u (6): [F (body-frame thrust, N), tau (body-frame
// torque, N*m)].
//
// Units: positions km, velocities km/s. Thrust acceleration enters the
// translational equations as R(q)*F/m in km/s^2 (the unit system the
// docking scenario's bounds and weights are calibrated to).

namespace arpod {

template <typename Scalar> using StateVecT = Eigen::Matrix<Scalar, 13, 1>;
template <typename Scalar> using InputVecT = Eigen::Matrix<Scalar, 6, 1>;
using State13 = StateVecT<double>;
using Input6 = InputVecT<double>;

inline constexpr int kStateDim = 13;
inline constexpr int kInputDim = 6;

/// Chief orbit and deputy mass properties. The chief-frame angular velocity
/// is (0, 0, n) by construction.
struct SpacecraftParams {
  double mean_motion{-0.0011};                   // n [rad/s]
  double mass{12.0};                             // deputy mass [kg]
  Vec3 inertia{Vec3(0.2734, 0.2734, 0.3125)};    // principal inertias [kg m^2]

  Vec3 chief_angular_velocity() const { return Vec3(0.0, 0.0, mean_motion); }

  void validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("SpacecraftParams: mass must be positive");
    if (!(inertia.minCoeff() > 0.0)) {
      throw std::invalid_argument("SpacecraftParams: inertias must be positive");
    }
  }
};

/// Relative translational + attitudinal state of the deputy.
struct RelativeState {
  Vec3 position{Vec3::Zero()};          // dr [km]
  Vec3 velocity{Vec3::Zero()};          // dr_dot [km/s]
  Quaternion attitude{};                // error quaternion (unit norm)
  Vec3 angular_velocity{Vec3::Zero()};  // dw [rad/s]

  State13 flatten() const {
    State13 x;
    x << position, velocity, attitude.eta, attitude.rho, angular_velocity;
    return x;
  }

  /// Rebuild from a flat 13-vector; the quaternion block is renormalized.
  static RelativeState from_vector(const State13& x) {
    RelativeState s;
    s.position = x.segment<3>(0);
    s.velocity = x.segment<3>(3);
    s.attitude = Quaternion(x(6), Vec3(x.segment<3>(7))).normalized();
    s.angular_velocity = x.segment<3>(10);
    return s;
  }
};

/// Deputy body-frame thrust and torque.
struct ControlInput {
  Vec3 force{Vec3::Zero()};   // [N]
  Vec3 torque{Vec3::Zero()};  // [N m]

  Input6 flatten() const {
    Input6 u;
    u << force, torque;
    return u;
  }
  static ControlInput from_vector(const Input6& u) {
    return ControlInput{u.head<3>(), u.tail<3>()};
  }
};

/// The docking configuration: zero relative position/velocity/rate, aligned
/// attitude, zero input.
struct DockingTarget {
  State13 x_d;
  Input6 u_d;
  Eigen::Matrix<double, 19, 1> z_d;

  DockingTarget() {
    x_d.setZero();
    x_d(6) = 1.0;
    u_d.setZero();
    z_d << u_d, x_d;
  }
};

// ---------------------------------------------------------------------------
// Continuous-time rates (templated so dual numbers can flow through).
// ---------------------------------------------------------------------------

/// [dr_dot, dr_ddot]: Clohessy-Wiltshire relative translation with the
/// body-frame thrust rotated into the chief frame.
template <typename Scalar>
Eigen::Matrix<Scalar, 6, 1> translational_rates(const StateVecT<Scalar>& x,
                                                const InputVecT<Scalar>& u,
                                                const SpacecraftParams& p) {
  const double n = p.mean_motion;
  const Scalar eta = x(6);
  const Vec3T<Scalar> rho = x.template segment<3>(7);
  const Mat3T<Scalar> R = rotation_from_quat(eta, rho);  // deputy -> chief
  const Vec3T<Scalar> accel = (R * u.template head<3>()) / p.mass;

  Eigen::Matrix<Scalar, 6, 1> out;
  out.template head<3>() = x.template segment<3>(3);
  out(3) = 3.0 * n * n * x(0) + 2.0 * n * x(4) + accel(0);
  out(4) = -2.0 * n * x(3) + accel(1);
  out(5) = -n * n * x(2) + accel(2);
  return out;
}

/// [eta_dot, rho_dot, dw_dot]: error-quaternion kinematics and the error
/// angular acceleration computed via the deputy-frame route (Euler's law in
/// body axes, transported back to the chief frame).
template <typename Scalar>
Eigen::Matrix<Scalar, 7, 1> attitude_rates(const StateVecT<Scalar>& x,
                                           const InputVecT<Scalar>& u,
                                           const SpacecraftParams& p) {
  const Scalar eta = x(6);
  const Vec3T<Scalar> rho = x.template segment<3>(7);
  const Vec3T<Scalar> dw = x.template segment<3>(10);
  const Vec3T<Scalar> tau = u.template tail<3>();
  const Vec3T<Scalar> w_eo = p.chief_angular_velocity().cast<Scalar>();
  const Vec3& J = p.inertia;

  const Mat3T<Scalar> R = rotation_from_quat(eta, rho);  // deputy -> chief
  // Inertial rate of the deputy frame, resolved in body axes.
  const Vec3T<Scalar> w_body = R.transpose() * (dw + w_eo);
  Vec3T<Scalar> momentum;
  momentum << J(0) * w_body(0), J(1) * w_body(1), J(2) * w_body(2);
  const Vec3T<Scalar> gyro = w_body.cross(momentum);
  Vec3T<Scalar> wdot_body;
  wdot_body << (tau(0) - gyro(0)) / J(0), (tau(1) - gyro(1)) / J(1), (tau(2) - gyro(2)) / J(2);

  Eigen::Matrix<Scalar, 7, 1> out;
  out(0) = Scalar(0.5) * rho.dot(dw);
  out.template segment<3>(1) =
      Scalar(-0.5) * ((eta * Mat3T<Scalar>::Identity() + skew<Scalar>(rho)) * dw);
  out.template tail<3>() = R * wdot_body - w_eo.cross(dw);
  return out;
}

/// Full 13-dimensional state derivative (translational and attitude blocks
/// stacked in state order).
template <typename Scalar>
StateVecT<Scalar> state_derivative(const StateVecT<Scalar>& x, const InputVecT<Scalar>& u,
                                   const SpacecraftParams& p) {
  StateVecT<Scalar> dx;
  dx.template head<6>() = translational_rates(x, u, p);
  dx.template tail<7>() = attitude_rates(x, u, p);
  return dx;
}

namespace detail {
template <typename Scalar>
void renormalize_quat_block(StateVecT<Scalar>& x) {
  using std::sqrt;
  const Scalar s2 = x(6) * x(6) + x(7) * x(7) + x(8) * x(8) + x(9) * x(9);
  if (scalar_value(s2) > 1e-24) {
    const Scalar inv = Scalar(1) / sqrt(s2);
    x.template segment<4>(6) *= inv;
  }
}
}  // namespace detail

/// One classic RK4 step with zero-order-hold control; the discrete map of the
/// optimal control problem. The output quaternion block is renormalized.
template <typename Scalar>
StateVecT<Scalar> rk4_step_vec(const StateVecT<Scalar>& x, const InputVecT<Scalar>& u,
                               const SpacecraftParams& p, double dt) {
  const StateVecT<Scalar> k1 = state_derivative<Scalar>(x, u, p);
  const StateVecT<Scalar> k2 = state_derivative<Scalar>((x + (0.5 * dt) * k1).eval(), u, p);
  const StateVecT<Scalar> k3 = state_derivative<Scalar>((x + (0.5 * dt) * k2).eval(), u, p);
  const StateVecT<Scalar> k4 = state_derivative<Scalar>((x + dt * k3).eval(), u, p);
  StateVecT<Scalar> out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  detail::renormalize_quat_block(out);
  return out;
}

// ---------------------------------------------------------------------------
// Typed wrappers.
// ---------------------------------------------------------------------------

/// (dr_dot, dr_ddot) of the relative translation.
inline std::pair<Vec3, Vec3> translational_derivative(const RelativeState& s,
                                                      const ControlInput& u,
                                                      const SpacecraftParams& p) {
  const Eigen::Matrix<double, 6, 1> r = translational_rates<double>(s.flatten(), u.flatten(), p);
  return {r.head<3>(), r.tail<3>()};
}

/// (quaternion derivative, angular acceleration) of the attitude error.
inline std::pair<Vec4, Vec3> attitude_derivative(const RelativeState& s, const ControlInput& u,
                                                 const SpacecraftParams& p) {
  const Eigen::Matrix<double, 7, 1> r = attitude_rates<double>(s.flatten(), u.flatten(), p);
  return {r.head<4>(), r.tail<3>()};
}

inline State13 full_derivative(const RelativeState& s, const ControlInput& u,
                               const SpacecraftParams& p) {
  return state_derivative<double>(s.flatten(), u.flatten(), p);
}

inline RelativeState rk4_step(const RelativeState& s, const ControlInput& u,
                              const SpacecraftParams& p, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  return RelativeState::from_vector(rk4_step_vec<double>(s.flatten(), u.flatten(), p, dt));
}

// ---------------------------------------------------------------------------
// Discrete-map sensitivities.
// ---------------------------------------------------------------------------

/// RK4 step value together with its exact Jacobians wrt state and control,
/// obtained by a single forward-mode pass (19 seed lanes).
struct StepWithJacobian {
  State13 value;
  Eigen::Matrix<double, 13, 13> dx;
  Eigen::Matrix<double, 13, 6> du;
};

inline StepWithJacobian rk4_step_with_jacobian(const State13& x, const Input6& u,
                                               const SpacecraftParams& p, double dt) {
  using D = Dual<19>;
  StateVecT<D> xd;
  InputVecT<D> ud;
  for (int i = 0; i < kStateDim; ++i) xd(i) = D::seeded(x(i), i);
  for (int i = 0; i < kInputDim; ++i) ud(i) = D::seeded(u(i), kStateDim + i);
  const StateVecT<D> out = rk4_step_vec<D>(xd, ud, p, dt);

  StepWithJacobian j;
  for (int i = 0; i < kStateDim; ++i) {
    j.value(i) = out(i).v;
    j.dx.row(i) = out(i).d.head<13>().transpose();
    j.du.row(i) = out(i).d.tail<6>().transpose();
  }
  return j;
}

}  // namespace arpod
