#pragma once

#include <Eigen/Core>

#include <cmath>

// Forward-mode dual number with a fixed number of derivative lanes.
// Instantiating the templated dynamics with Dual<19> propagates exact
// state/control sensitivities through one integration step in a single pass.

namespace arpod {

template <int N>
struct Dual {
  using Lanes = Eigen::Matrix<double, N, 1>;

  double v{0.0};
  Lanes d{Lanes::Zero()};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  Dual(double value, const Lanes& deriv) : v(value), d(deriv) {}

  static Dual seeded(double value, int lane) {
    Dual out(value);
    out.d(lane) = 1.0;
    return out;
  }

  Dual operator-() const { return Dual(-v, (-d).eval()); }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = o.v * d + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    v *= inv;
    d = inv * d - v * inv * o.d;
    return *this;
  }
};

template <int N>
inline Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
  a += b;
  return a;
}
template <int N>
inline Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
  a -= b;
  return a;
}
template <int N>
inline Dual<N> operator*(Dual<N> a, const Dual<N>& b) {
  a *= b;
  return a;
}
template <int N>
inline Dual<N> operator/(Dual<N> a, const Dual<N>& b) {
  a /= b;
  return a;
}

template <int N>
inline Dual<N> operator+(Dual<N> a, double b) {
  a.v += b;
  return a;
}
template <int N>
inline Dual<N> operator+(double a, Dual<N> b) {
  b.v += a;
  return b;
}
template <int N>
inline Dual<N> operator-(Dual<N> a, double b) {
  a.v -= b;
  return a;
}
template <int N>
inline Dual<N> operator-(double a, const Dual<N>& b) {
  return Dual<N>(a - b.v, (-b.d).eval());
}
template <int N>
inline Dual<N> operator*(Dual<N> a, double b) {
  a.v *= b;
  a.d *= b;
  return a;
}
template <int N>
inline Dual<N> operator*(double a, Dual<N> b) {
  b.v *= a;
  b.d *= a;
  return b;
}
template <int N>
inline Dual<N> operator/(Dual<N> a, double b) {
  const double inv = 1.0 / b;
  a.v *= inv;
  a.d *= inv;
  return a;
}
template <int N>
inline Dual<N> operator/(double a, const Dual<N>& b) {
  return Dual<N>(a) / b;
}

template <int N>
inline bool operator<(const Dual<N>& a, const Dual<N>& b) {
  return a.v < b.v;
}
template <int N>
inline bool operator>(const Dual<N>& a, const Dual<N>& b) {
  return a.v > b.v;
}
template <int N>
inline bool operator<=(const Dual<N>& a, const Dual<N>& b) {
  return a.v <= b.v;
}
template <int N>
inline bool operator>=(const Dual<N>& a, const Dual<N>& b) {
  return a.v >= b.v;
}
template <int N>
inline bool operator==(const Dual<N>& a, const Dual<N>& b) {
  return a.v == b.v;
}
template <int N>
inline bool operator!=(const Dual<N>& a, const Dual<N>& b) {
  return a.v != b.v;
}

template <int N>
inline Dual<N> sqrt(const Dual<N>& a) {
  const double s = std::sqrt(a.v);
  return Dual<N>(s, (a.d * (0.5 / s)).eval());
}

template <int N>
inline Dual<N> abs(const Dual<N>& a) {
  return a.v < 0.0 ? -a : a;
}

/// Numeric value of a scalar (identity for double, value part for duals).
inline double scalar_value(double x) { return x; }
template <int N>
inline double scalar_value(const Dual<N>& x) {
  return x.v;
}

}  // namespace arpod

namespace Eigen {

template <int N>
struct NumTraits<arpod::Dual<N>> : NumTraits<double> {
  using Real = arpod::Dual<N>;
  using NonInteger = arpod::Dual<N>;
  using Nested = arpod::Dual<N>;
  using Literal = arpod::Dual<N>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1 + N,
    AddCost = 1 + N,
    MulCost = 1 + 2 * N,
  };
  static inline Real epsilon() { return Real(NumTraits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(NumTraits<double>::dummy_precision()); }
  static inline Real highest() { return Real(NumTraits<double>::highest()); }
  static inline Real lowest() { return Real(NumTraits<double>::lowest()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

}  // namespace Eigen
