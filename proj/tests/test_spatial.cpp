#include <catch2/catch_amalgamated.hpp>

#include "arpod/spatial.hpp"
#include "arpod/rng.hpp"
#include "oracles.hpp"

using namespace arpod;

namespace {
const Quaternion kSampleQuat = Quaternion(0.7715, Vec3(0.4629, 0.3086, 0.3086)).normalized();
}

TEST_CASE("skew matches the cross-product pattern") {
  CHECK(skew<double>(Vec3::Zero()).isZero(0.0));

  Mat3 expected;
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  CHECK(skew<double>(Vec3(1, 2, 3)).isApprox(expected, 0.0));

  const Vec3 v(0.3, -1.1, 2.0);
  CHECK((skew(v) * v).norm() == 0.0);

  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Vec3 a = test::random_vec3(rng, 2.0);
    const Vec3 b = test::random_vec3(rng, 2.0);
    CHECK((skew(a) * b + skew(b) * a).norm() < 1e-15);
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-15);
  }
}

TEST_CASE("quat_to_rotation basics") {
  CHECK(quat_to_rotation(Quaternion::identity()).isApprox(Mat3::Identity(), 0.0));

  const Mat3 r = quat_to_rotation(kSampleQuat);
  const Quaternion negated(-kSampleQuat.eta, Vec3(-kSampleQuat.rho));
  CHECK(r.isApprox(quat_to_rotation(negated), 1e-15));

  CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
}

TEST_CASE("quat_to_rotation rejects non-unit input") {
  CHECK_THROWS_AS(quat_to_rotation(Quaternion(1.001, Vec3::Zero())), std::invalid_argument);
  // Raw 4-digit rounding is off by ~2.5e-5, beyond the 1e-6 gate.
  CHECK_THROWS_AS(quat_to_rotation(Quaternion(0.7715, Vec3(0.4629, 0.3086, 0.3086))),
                  std::invalid_argument);
  CHECK_NOTHROW(quat_to_rotation(Quaternion(1.0 + 5e-7, Vec3::Zero())));
}

TEST_CASE("quat_to_rotation agrees with an axis-angle construction") {
  // Independent route: Rodrigues' formula for the active rotation by the
  // quaternion's (axis, angle); the passive-convention matrix is its
  // transpose.
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const Quaternion q = test::random_unit_quaternion(rng);
    const double angle = 2.0 * std::atan2(q.rho.norm(), q.eta);
    Mat3 expected = Mat3::Identity();
    if (q.rho.norm() > 1e-14) {
      const Vec3 axis = q.rho / q.rho.norm();
      const Mat3 s = skew(axis);
      const Mat3 rodrigues =
          Mat3::Identity() + std::sin(angle) * s + (1.0 - std::cos(angle)) * (s * s);
      expected = rodrigues.transpose();
    }
    CHECK((quat_to_rotation(q) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("quat_inverse") {
  const Quaternion qi = Quaternion::identity();
  CHECK(quat_inverse(qi).coeffs() == qi.coeffs());

  const Quaternion q(0.7715, Vec3(0.4629, 0.3086, 0.3086));
  const Quaternion inv = quat_inverse(q);
  CHECK(inv.eta == 0.7715);
  CHECK(inv.rho == Vec3(-0.4629, -0.3086, -0.3086));

  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const Quaternion r = test::random_unit_quaternion(rng);
    CHECK(quat_to_rotation(quat_inverse(r)).isApprox(quat_to_rotation(r).transpose(), 1e-12));
  }
}

TEST_CASE("quat_multiply identities") {
  Rng rng(41);
  const Quaternion q = test::random_unit_quaternion(rng);
  CHECK((quat_multiply(Quaternion::identity(), q).coeffs() - q.coeffs()).norm() < 1e-15);
  CHECK((quat_multiply(q, Quaternion::identity()).coeffs() - q.coeffs()).norm() < 1e-15);

  const Quaternion prod = quat_multiply(kSampleQuat, quat_inverse(kSampleQuat));
  CHECK((prod.coeffs() - Quaternion::identity().coeffs()).norm() < 1e-12);
}

TEST_CASE("quat_multiply rotation homomorphism (convention order)") {
  Rng rng(51);
  for (int i = 0; i < 100; ++i) {
    const Quaternion a = test::random_unit_quaternion(rng);
    const Quaternion b = test::random_unit_quaternion(rng);
    const Mat3 lhs = quat_to_rotation(quat_multiply(a, b));
    const Mat3 rhs = quat_to_rotation(b) * quat_to_rotation(a);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("quat_multiply associativity and norm maintenance") {
  Rng rng(61);
  for (int i = 0; i < 100; ++i) {
    const Quaternion a = test::random_unit_quaternion(rng);
    const Quaternion b = test::random_unit_quaternion(rng);
    const Quaternion c = test::random_unit_quaternion(rng);
    const Quaternion lhs = quat_multiply(quat_multiply(a, b), c);
    const Quaternion rhs = quat_multiply(a, quat_multiply(b, c));
    CHECK((lhs.coeffs() - rhs.coeffs()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(lhs.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("quat_kinematics") {
  Rng rng(71);
  const Quaternion q = test::random_unit_quaternion(rng);
  CHECK(quat_kinematics(q, Vec3(Vec3::Zero())).isZero(0.0));

  const Vec4 dq = quat_kinematics(Quaternion::identity(), Vec3(0.0, 0.0, -0.005));
  CHECK(dq(0) == 0.0);
  CHECK(dq(1) == 0.0);
  CHECK(dq(2) == 0.0);
  CHECK(dq(3) == Catch::Approx(0.0025).margin(1e-18));

  for (int i = 0; i < 100; ++i) {
    const Quaternion r = test::random_unit_quaternion(rng);
    const Vec3 w = test::random_vec3(rng, 0.5);
    // d/dt (q' q) = 2 q' qdot must vanish: rotation stays on the unit sphere.
    CHECK(std::abs(r.coeffs().dot(quat_kinematics(r, w))) < 1e-12);
  }
}

TEST_CASE("rotation matrix evolves consistently with the kinematics") {
  // First-order check that R(q + dt*qdot) == (I + dt*[w]x) R(q): the matrix
  // of the propagated quaternion moves like a frame driven by the
  // reference-frame rate w. Pins the direction of the map.
  Rng rng(81);
  const double dt = 1e-6;
  for (int i = 0; i < 20; ++i) {
    const Quaternion q = test::random_unit_quaternion(rng);
    const Vec3 w = test::random_vec3(rng, 0.5);
    const Vec4 dq = quat_kinematics(q, w);
    const Quaternion q2 =
        Quaternion(q.eta + dt * dq(0), Vec3(q.rho + dt * dq.tail<3>())).normalized();
    const Mat3 expected = (Mat3::Identity() + dt * skew(w)) * quat_to_rotation(q);
    CHECK((quat_to_rotation(q2) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}
