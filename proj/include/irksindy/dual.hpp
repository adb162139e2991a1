#pragma once

#include <cmath>

#include <Eigen/Core>

namespace irksindy::grad {

/// Forward-mode number v + d*eps with eps^2 = 0.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit from constants
  Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v /= o.v; return *this; }
};

}  // namespace irksindy::grad

namespace Eigen {

template <>
struct NumTraits<irksindy::grad::Dual> : NumTraits<double> {
  using Real = irksindy::grad::Dual;
  using NonInteger = irksindy::grad::Dual;
  using Nested = irksindy::grad::Dual;
  using Literal = irksindy::grad::Dual;
  enum { IsComplex = 0, IsInteger = 0, IsSigned = 1, RequireInitialization = 1, ReadCost = 2, AddCost = 2, MulCost = 4 };
};

}  // namespace Eigen

namespace irksindy::grad {

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.v != b.v; }
inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

inline Dual sin(const Dual& a) { return {std::sin(a.v), a.d * std::cos(a.v)}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -a.d * std::sin(a.v)}; }
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return {e, a.d * e};
}
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.v);
  return {t, a.d * (1.0 - t * t)};
}
inline Dual abs(const Dual& a) { return a.v < 0 ? -a : a; }
inline Dual sqrt(const Dual& a) {
  const double r = std::sqrt(a.v);
  return {r, a.d / (2.0 * r)};
}
inline bool isfinite(const Dual& a) { return std::isfinite(a.v) && std::isfinite(a.d); }

/// J v for a vector function g, evaluated with one forward sweep.
template <typename Func>
Eigen::VectorXd directional_derivative(const Func& g, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  Eigen::Matrix<Dual, Eigen::Dynamic, 1> xd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) xd(i) = Dual(x(i), v(i));
  const auto y = g(xd);
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = y(i).d;
  return out;
}

/// Dense Jacobian by d forward sweeps along the unit vectors.
template <typename Func>
Eigen::MatrixXd forward_jacobian(const Func& g, const Eigen::VectorXd& x) {
  Eigen::MatrixXd jac;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Eigen::VectorXd col = directional_derivative(g, x, Eigen::VectorXd::Unit(x.size(), i));
    if (i == 0) jac.resize(col.size(), x.size());
    jac.col(i) = col;
  }
  return jac;
}

}  // namespace irksindy::grad
