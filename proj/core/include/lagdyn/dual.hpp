#pragma once

#include <cmath>
#include <ostream>
#include <type_traits>

namespace lagdyn {

using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;
using std::tanh;

/// Forward-mode dual number carrying a value and one tangent.
///
/// Nesting (`Dual<Dual<double>>`, ...) yields higher-order directional
/// derivatives; the inner scalar may also be a reverse-mode variable so
/// forward and reverse accumulation compose. A dual constructed from a
/// plain value has a zero tangent and reproduces plain arithmetic exactly.
template <class T>
struct Dual {
  T v{};
  T d{};

  constexpr Dual() = default;
  constexpr Dual(const T& value) : v(value), d{} {}
  constexpr Dual(const T& value, const T& deriv) : v(value), d(deriv) {}

  // Broadcast from plain arithmetic scalars through arbitrary nesting depth.
  template <class S>
    requires(std::is_arithmetic_v<S> && !std::is_same_v<S, T>)
  constexpr Dual(S s) : v(static_cast<double>(s)), d{} {}

  friend constexpr Dual operator+(const Dual& x) { return x; }
  friend constexpr Dual operator-(const Dual& x) { return {-x.v, -x.d}; }

  friend constexpr Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend constexpr Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend constexpr Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.v * b.d + a.d * b.v};
  }
  friend constexpr Dual operator/(const Dual& a, const Dual& b) {
    const T q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
  }

  friend constexpr Dual operator+(const Dual& a, double s) { return {a.v + s, a.d}; }
  friend constexpr Dual operator+(double s, const Dual& a) { return a + s; }
  friend constexpr Dual operator-(const Dual& a, double s) { return {a.v - s, a.d}; }
  friend constexpr Dual operator-(double s, const Dual& a) { return {s - a.v, -a.d}; }
  friend constexpr Dual operator*(const Dual& a, double s) { return {a.v * s, a.d * s}; }
  friend constexpr Dual operator*(double s, const Dual& a) { return a * s; }
  friend constexpr Dual operator/(const Dual& a, double s) { return {a.v / s, a.d / s}; }
  friend constexpr Dual operator/(double s, const Dual& a) {
    const T q = s / a.v;
    return {q, -q * a.d / a.v};
  }

  Dual& operator+=(const Dual& b) { return *this = *this + b; }
  Dual& operator-=(const Dual& b) { return *this = *this - b; }
  Dual& operator*=(const Dual& b) { return *this = *this * b; }
  Dual& operator/=(const Dual& b) { return *this = *this / b; }

  // Ordering compares primal values only.
  friend constexpr bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend constexpr bool operator>(const Dual& a, const Dual& b) { return b < a; }
  friend constexpr bool operator<=(const Dual& a, const Dual& b) { return !(b < a); }
  friend constexpr bool operator>=(const Dual& a, const Dual& b) { return !(a < b); }

  friend Dual sqrt(const Dual& x) {
    const T r = sqrt(x.v);
    return {r, x.d / (2.0 * r)};
  }
  friend Dual sin(const Dual& x) { return {sin(x.v), cos(x.v) * x.d}; }
  friend Dual cos(const Dual& x) { return {cos(x.v), -sin(x.v) * x.d}; }
  friend Dual exp(const Dual& x) {
    const T e = exp(x.v);
    return {e, e * x.d};
  }
  friend Dual log(const Dual& x) { return {log(x.v), x.d / x.v}; }
  friend Dual tanh(const Dual& x) {
    const T t = tanh(x.v);
    return {t, (1.0 - t * t) * x.d};
  }

  friend std::ostream& operator<<(std::ostream& os, const Dual& x) {
    return os << "(" << x.v << " + eps*" << x.d << ")";
  }
};

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;
using Dual3 = Dual<Dual<Dual<double>>>;

/// Primal value through arbitrary nesting depth.
inline constexpr double primal(double x) { return x; }
template <class T>
constexpr double primal(const Dual<T>& x) {
  return primal(x.v);
}

}  // namespace lagdyn
