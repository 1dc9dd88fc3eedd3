#pragma once

#include <array>
#include <cmath>

namespace crstokes {

/// Forward-mode dual number in two variables. Nesting Dual<Dual<double>>
/// yields second derivatives, Dual<Dual<Dual<double>>> third derivatives.
template <class T>
struct Dual {
  T v{};
  std::array<T, 2> d{};

  Dual() = default;
  Dual(double c) : v(c), d{T(0.0), T(0.0)} {}  // NOLINT: constants promote implicitly
  Dual(T value, T dx, T dy) : v(value), d{dx, dy} {}
};

template <class T> struct is_dual : std::false_type {};
template <class T> struct is_dual<Dual<T>> : std::true_type {};

/// Independent variable `index` (0 = x, 1 = y) seeded at every nesting level.
template <class T>
T variable(double value, int index) {
  if constexpr (is_dual<T>::value) {
    using Inner = decltype(T{}.v);
    return T(variable<Inner>(value, index), Inner(index == 0 ? 1.0 : 0.0),
             Inner(index == 1 ? 1.0 : 0.0));
  } else {
    return value;
  }
}

template <class T> Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.v + b.v, a.d[0] + b.d[0], a.d[1] + b.d[1]};
}
template <class T> Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.v - b.v, a.d[0] - b.d[0], a.d[1] - b.d[1]};
}
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d[0], -a.d[1]}; }
template <class T> Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1]};
}
template <class T> Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  const T inv = T(1.0) / b.v;
  const T q = a.v * inv;
  return {q, (a.d[0] - q * b.d[0]) * inv, (a.d[1] - q * b.d[1]) * inv};
}
template <class T> Dual<T> operator+(const Dual<T>& a, double c) { return a + Dual<T>(c); }
template <class T> Dual<T> operator+(double c, const Dual<T>& a) { return Dual<T>(c) + a; }
template <class T> Dual<T> operator-(const Dual<T>& a, double c) { return a - Dual<T>(c); }
template <class T> Dual<T> operator-(double c, const Dual<T>& a) { return Dual<T>(c) - a; }
template <class T> Dual<T> operator*(const Dual<T>& a, double c) { return {a.v * c, a.d[0] * c, a.d[1] * c}; }
template <class T> Dual<T> operator*(double c, const Dual<T>& a) { return a * c; }
template <class T> Dual<T> operator/(const Dual<T>& a, double c) { return a * (1.0 / c); }
template <class T> Dual<T> operator/(double c, const Dual<T>& a) { return Dual<T>(c) / a; }

template <class T> Dual<T> sin(const Dual<T>& a) {
  using std::cos, std::sin;
  const T c = cos(a.v);
  return {sin(a.v), c * a.d[0], c * a.d[1]};
}
template <class T> Dual<T> cos(const Dual<T>& a) {
  using std::cos, std::sin;
  const T s = -sin(a.v);
  return {cos(a.v), s * a.d[0], s * a.d[1]};
}
template <class T> Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return {e, e * a.d[0], e * a.d[1]};
}

/// Plain value of a (possibly nested) dual.
template <class T> double value_of(const T& x) {
  if constexpr (is_dual<T>::value) return value_of(x.v);
  else return x;
}

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual1>;
using Dual3 = Dual<Dual2>;

}  // namespace crstokes
