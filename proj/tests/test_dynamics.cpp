#include <catch2/catch_amalgamated.hpp>

#include "arpod/dynamics.hpp"
#include "arpod/rng.hpp"
#include "oracles.hpp"

using namespace arpod;

namespace {

RelativeState table_initial_state() {
  RelativeState s;
  s.position = Vec3(1.5, -1.77, 3.0);
  s.velocity = Vec3(0.001, 0.0034, 0.0);
  s.attitude = Quaternion(0.7715, Vec3(0.4629, 0.3086, 0.3086)).normalized();
  s.angular_velocity = Vec3(0.0, 0.0, -0.005);
  return s;
}

RelativeState docking_state() { return RelativeState{}; }

}  // namespace

TEST_CASE("SpacecraftParams validation and chief rate") {
  SpacecraftParams p;
  CHECK(p.chief_angular_velocity() == Vec3(0.0, 0.0, p.mean_motion));
  p.mass = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.mass = 12.0;
  p.inertia(1) = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("RelativeState flattening order and renormalization") {
  const RelativeState s = table_initial_state();
  const State13 x = s.flatten();
  CHECK(x.segment<3>(0) == s.position);
  CHECK(x.segment<3>(3) == s.velocity);
  CHECK(x(6) == s.attitude.eta);
  CHECK(x.segment<3>(7) == s.attitude.rho);
  CHECK(x.segment<3>(10) == s.angular_velocity);

  State13 off = x;
  off.segment<4>(6) *= 1.01;  // denormalized quaternion block
  const RelativeState back = RelativeState::from_vector(off);
  CHECK(std::abs(back.attitude.norm() - 1.0) < 1e-15);
}

TEST_CASE("translational derivative: equilibrium and forced arithmetic") {
  const SpacecraftParams p;
  auto [v0, a0] = translational_derivative(docking_state(), ControlInput{}, p);
  CHECK(v0.isZero(0.0));
  CHECK(a0.isZero(0.0));

  RelativeState s;
  s.position = Vec3(1.5, -1.77, 3.0);
  s.velocity = Vec3(0.001, 0.0034, 0.0);
  auto [v, a] = translational_derivative(s, ControlInput{}, p);
  const double n = p.mean_motion;
  CHECK(v == s.velocity);
  CHECK(a(0) == Catch::Approx(3.0 * n * n * 1.5 + 2.0 * n * 0.0034).margin(1e-18));
  CHECK(a(1) == Catch::Approx(-2.0 * n * 0.001).margin(1e-18));
  CHECK(a(2) == Catch::Approx(-n * n * 3.0).margin(1e-18));
}

TEST_CASE("translational derivative: thrust direction and magnitude") {
  // Unit thrust along body x with aligned frames: acceleration 1/12 km/s^2
  // along the chief x axis (the unit system the scenario is calibrated in).
  const SpacecraftParams p;
  ControlInput u;
  u.force = Vec3(1.0, 0.0, 0.0);
  auto [v, a] = translational_derivative(docking_state(), u, p);
  CHECK(v.isZero(0.0));
  CHECK(a(0) == Catch::Approx(1.0 / 12.0).margin(1e-18));
  CHECK(a(1) == 0.0);
  CHECK(a(2) == 0.0);

  // Rotated case: the thrust must follow the attitude. With the sample
  // attitude the chief-frame direction is R(q) * e1.
  RelativeState s = docking_state();
  s.attitude = table_initial_state().attitude;
  auto [v2, a2] = translational_derivative(s, u, p);
  (void)v2;
  const Vec3 expected = quat_to_rotation(s.attitude) * Vec3(1.0, 0.0, 0.0) / p.mass;
  CHECK((a2 - expected).norm() < 1e-15);
}

TEST_CASE("attitude derivative: docking equilibrium") {
  const SpacecraftParams p;
  auto [dq, dw] = attitude_derivative(docking_state(), ControlInput{}, p);
  CHECK(dq.cwiseAbs().maxCoeff() < 1e-18);
  // At the docking state the body spins with the chief about a principal
  // axis, so the gyroscopic term vanishes.
  CHECK(dw.cwiseAbs().maxCoeff() < 1e-18);
}

TEST_CASE("attitude derivative: error kinematics at identity") {
  const SpacecraftParams p;
  RelativeState s = docking_state();
  s.angular_velocity = Vec3(0.0, 0.0, -0.005);
  auto [dq, dw] = attitude_derivative(s, ControlInput{}, p);
  (void)dw;
  CHECK(dq(0) == 0.0);
  CHECK(dq(1) == 0.0);
  CHECK(dq(2) == 0.0);
  CHECK(dq(3) == Catch::Approx(0.0025).margin(1e-18));
}

TEST_CASE("attitude route matches the chief-frame expansion") {
  const SpacecraftParams p;
  Rng rng(123);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    RelativeState s = docking_state();
    s.attitude = test::random_unit_quaternion(rng);
    s.angular_velocity = test::random_vec3(rng, 1e-2);
    ControlInput u;
    u.torque = test::random_vec3(rng, 1e-4);
    auto [dq, dw] = attitude_derivative(s, u, p);
    (void)dq;
    const Vec3 expected = test::attitude_accel_expanded(s.attitude, s.angular_velocity, u.torque, p);
    worst = std::max(worst, (dw - expected).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("full derivative stacks blocks and is control-affine") {
  const SpacecraftParams p;
  CHECK(full_derivative(docking_state(), ControlInput{}, p).isZero(0.0));

  Rng rng(321);
  for (int i = 0; i < 20; ++i) {
    const RelativeState s = RelativeState::from_vector(test::random_state(rng));
    const Input6 u1 = test::random_input(rng, InputBounds{});
    const Input6 u2 = test::random_input(rng, InputBounds{});
    const State13 f0 = full_derivative(s, ControlInput{}, p);
    const State13 f1 = full_derivative(s, ControlInput::from_vector(u1), p);
    const State13 f2 = full_derivative(s, ControlInput::from_vector(u2), p);
    const State13 f12 = full_derivative(s, ControlInput::from_vector(u1 + u2), p);
    CHECK(((f12 - f0) - ((f1 - f0) + (f2 - f0))).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("full derivative agrees with a short oracle integration slope") {
  const SpacecraftParams p;
  const RelativeState s = table_initial_state();
  const State13 x0 = s.flatten();
  const State13 f = full_derivative(s, ControlInput{}, p);
  const double t = 1e-3;
  const State13 xt = test::integrate_rk45(x0, Input6::Zero(), p, t);
  const State13 slope = (xt - x0) / t;
  // First-order slope; the residual is ~ t/2 * d2x/dt2.
  for (int i = 0; i < kStateDim; ++i) {
    CHECK(std::abs(slope(i) - f(i)) < 1e-6 * std::max(1.0, std::abs(f(i))));
  }
}

TEST_CASE("rk4_step: fixed point, oracle agreement, renormalization") {
  const SpacecraftParams p;
  const double dt = 3.0;

  const State13 fixed = rk4_step(docking_state(), ControlInput{}, p, dt).flatten();
  CHECK((fixed - docking_state().flatten()).cwiseAbs().maxCoeff() < 1e-12);

  const RelativeState s = table_initial_state();
  const State13 stepped = rk4_step(s, ControlInput{}, p, dt).flatten();
  const State13 oracle = test::integrate_rk45(s.flatten(), Input6::Zero(), p, dt);
  for (int i = 0; i < 6; ++i) {  // translational block: strict relative
    CHECK(std::abs(stepped(i) - oracle(i)) <= 1e-8 * std::abs(oracle(i)));
  }
  for (int i = 6; i < kStateDim; ++i) {
    CHECK(std::abs(stepped(i) - oracle(i)) <= 1e-8 * std::max(1.0, std::abs(oracle(i))));
  }

  State13 raw = s.flatten();
  raw.segment<4>(6) *= 1.001;
  const State13 out = rk4_step_vec<double>(raw, Input6::Zero(), p, dt);
  CHECK(std::abs(out.segment<4>(6).norm() - 1.0) <= 1e-9);
}

TEST_CASE("rk4_step is fourth order against the oracle") {
  const SpacecraftParams p;
  const RelativeState s0 = table_initial_state();
  Input6 u;
  u << 5e-4, -5e-4, 5e-4, 5e-5, -5e-5, 5e-5;  // constant, inside the bounds
  const double t_final = 240.0;

  auto endpoint_error = [&](double dt) {
    State13 x = s0.flatten();
    const int n = static_cast<int>(t_final / dt);
    for (int i = 0; i < n; ++i) x = rk4_step_vec<double>(x, u, p, dt);
    const State13 ref = test::integrate_rk45(s0.flatten(), u, p, t_final);
    return (x - ref).norm();
  };

  const double e1 = endpoint_error(24.0);
  const double e2 = endpoint_error(12.0);
  const double ratio = e1 / e2;
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("zero thrust decouples translation from attitude") {
  const SpacecraftParams p;
  State13 a = table_initial_state().flatten();
  State13 b = a;
  b.segment<7>(6) << 1, 0, 0, 0, 0, 0, 0;  // different attitude block
  for (int i = 0; i < 25; ++i) {
    a = rk4_step_vec<double>(a, Input6::Zero(), p, 3.0);
    b = rk4_step_vec<double>(b, Input6::Zero(), p, 3.0);
  }
  CHECK((a.head<6>() - b.head<6>()).cwiseAbs().maxCoeff() < 1e-15);
  // And an aligned, rate-matched attitude stays put while translation moves.
  Eigen::Matrix<double, 7, 1> aligned;
  aligned << 1, 0, 0, 0, 0, 0, 0;
  CHECK((b.segment<7>(6) - aligned).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rk4 jacobians match central finite differences") {
  const SpacecraftParams p;
  Rng rng(77);
  const double dt = 3.0;
  for (int trial = 0; trial < 10; ++trial) {
    const State13 x = test::random_state(rng);
    const Input6 u = test::random_input(rng, InputBounds{});
    const StepWithJacobian sj = rk4_step_with_jacobian(x, u, p, dt);
    CHECK((sj.value - rk4_step_vec<double>(x, u, p, dt)).cwiseAbs().maxCoeff() == 0.0);

    for (int c = 0; c < kStateDim; ++c) {
      State13 xp = x, xm = x;
      const double h = 1e-6 * (1.0 + std::abs(x(c)));
      xp(c) += h;
      xm(c) -= h;
      const State13 col =
          (rk4_step_vec<double>(xp, u, p, dt) - rk4_step_vec<double>(xm, u, p, dt)) / (2.0 * h);
      for (int r = 0; r < kStateDim; ++r) {
        CHECK(std::abs(sj.dx(r, c) - col(r)) < 1e-5 * std::max(1.0, std::abs(col(r))));
      }
    }
    for (int c = 0; c < kInputDim; ++c) {
      Input6 up = u, um = u;
      const double h = 1e-6 * (1.0 + std::abs(u(c)));
      up(c) += h;
      um(c) -= h;
      const State13 col =
          (rk4_step_vec<double>(x, up, p, dt) - rk4_step_vec<double>(x, um, p, dt)) / (2.0 * h);
      for (int r = 0; r < kStateDim; ++r) {
        CHECK(std::abs(sj.du(r, c) - col(r)) < 1e-5 * std::max(1.0, std::abs(col(r))));
      }
    }
  }
}
