#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

// Quaternion / rotation-matrix / skew-operator primitives.
//
// Conventions used throughout:
//   - quaternions are scalar-first, q = (eta, rho1, rho2, rho3), unit norm;
//   - the rotation matrix of a quaternion is the passive (Kuipers) form
//       R(q) = I - 2*eta*[rho]x + 2*[rho]x*[rho]x,
//     so R(q) == R(-q) and R(q^-1) == R(q)^T;
//   - quaternion kinematics are driven by the angular velocity resolved in
//     the reference frame:  (eta_dot, rho_dot) = -1/2 * [-rho^T; eta*I + [rho]x] * w.

namespace arpod {

template <typename Scalar> using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Vec4T = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar> using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

using Vec3 = Vec3T<double>;
using Vec4 = Vec4T<double>;
using Mat3 = Mat3T<double>;

/// Skew-symmetric (cross-product) matrix: skew(v)*w == v x w.
template <typename Scalar>
Mat3T<Scalar> skew(const Vec3T<Scalar>& v) {
  Mat3T<Scalar> m;
  const Scalar zero(0);
  m << zero, -v(2), v(1),
       v(2), zero, -v(0),
       -v(1), v(0), zero;
  return m;
}

/// Rotation matrix from raw quaternion components (no unit-norm check).
/// Exact polynomial form, usable with non-unit inputs and generic scalars.
template <typename Scalar>
Mat3T<Scalar> rotation_from_quat(const Scalar& eta, const Vec3T<Scalar>& rho) {
  const Mat3T<Scalar> s = skew<Scalar>(rho);
  return Mat3T<Scalar>::Identity() - Scalar(2) * eta * s + Scalar(2) * (s * s).eval();
}

/// Unit quaternion, scalar part `eta` and vector part `rho`.
template <typename Scalar>
struct QuaternionT {
  Scalar eta{1};
  Vec3T<Scalar> rho{Vec3T<Scalar>::Zero()};

  QuaternionT() = default;
  QuaternionT(const Scalar& e, const Vec3T<Scalar>& r) : eta(e), rho(r) {}
  QuaternionT(const Scalar& e, const Scalar& r1, const Scalar& r2, const Scalar& r3)
      : eta(e), rho(r1, r2, r3) {}

  static QuaternionT identity() { return QuaternionT(); }

  Scalar squared_norm() const { return eta * eta + rho.squaredNorm(); }
  Scalar norm() const {
    using std::sqrt;
    return sqrt(squared_norm());
  }

  Vec4T<Scalar> coeffs() const {
    Vec4T<Scalar> c;
    c << eta, rho;
    return c;
  }

  /// Scaled copy with unit norm. Throws on (near-)zero input.
  QuaternionT normalized() const {
    const Scalar n = norm();
    if (!(n > Scalar(1e-12))) {
      throw std::invalid_argument("quaternion: cannot normalize near-zero norm");
    }
    return QuaternionT(eta / n, (rho / n).eval());
  }
};

using Quaternion = QuaternionT<double>;

namespace detail {
/// Renormalize only when drift exceeds 1e-12; keeps exact inputs bit-stable.
template <typename Scalar>
QuaternionT<Scalar> renormalize_if_drifted(const QuaternionT<Scalar>& q) {
  using std::abs;
  if (abs(q.norm() - Scalar(1)) > Scalar(1e-12)) return q.normalized();
  return q;
}
}  // namespace detail

/// Rotation matrix of a unit quaternion. Rejects inputs whose norm deviates
/// from 1 by more than 1e-6.
template <typename Scalar>
Mat3T<Scalar> quat_to_rotation(const QuaternionT<Scalar>& q) {
  using std::abs;
  if (abs(q.norm() - Scalar(1)) > Scalar(1e-6)) {
    throw std::invalid_argument("quat_to_rotation: non-unit quaternion");
  }
  return rotation_from_quat(q.eta, q.rho);
}

/// Inverse (conjugate) of a unit quaternion: (eta, -rho).
template <typename Scalar>
QuaternionT<Scalar> quat_inverse(const QuaternionT<Scalar>& q) {
  return QuaternionT<Scalar>(q.eta, (-q.rho).eval());
}

/// Hamilton product qa (x) qb:
///   (eta_a*eta_b - rho_a.rho_b, eta_a*rho_b + eta_b*rho_a + rho_a x rho_b).
/// With the passive matrix convention above, R(qa (x) qb) = R(qb)*R(qa).
template <typename Scalar>
QuaternionT<Scalar> quat_multiply(const QuaternionT<Scalar>& qa, const QuaternionT<Scalar>& qb) {
  QuaternionT<Scalar> out(qa.eta * qb.eta - qa.rho.dot(qb.rho),
                          (qa.eta * qb.rho + qb.eta * qa.rho + qa.rho.cross(qb.rho)).eval());
  return detail::renormalize_if_drifted(out);
}

/// Quaternion derivative under angular velocity `omega` (reference-frame
/// components): (eta_dot, rho_dot) = -1/2 * [-rho^T; eta*I + [rho]x] * omega.
template <typename Scalar>
Vec4T<Scalar> quat_kinematics(const QuaternionT<Scalar>& q, const Vec3T<Scalar>& omega) {
  Vec4T<Scalar> dq;
  dq(0) = Scalar(0.5) * q.rho.dot(omega);
  dq.template tail<3>() =
      Scalar(-0.5) * ((q.eta * Mat3T<Scalar>::Identity() + skew<Scalar>(q.rho)) * omega);
  return dq;
}

}  // namespace arpod
