#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "irksindy/error.hpp"

namespace irksindy {

/// Largest stage count accepted by gauss_tableau. Lagrange-basis integration
/// in double precision loses accuracy beyond this.
inline constexpr int kMaxGaussStages = 64;

/// Runge-Kutta coefficient set (A, b, c).
template <typename Scalar = double>
struct ButcherTableau {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector c;
  Vector b;
  Matrix A;

  Eigen::Index stages() const { return b.size(); }

  /// True when A is strictly lower triangular, so stages can be computed in
  /// sequence without iteration.
  bool is_explicit() const {
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = i; j < A.cols(); ++j)
        if (A(i, j) != Scalar(0)) return false;
    return true;
  }
};

namespace detail {

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
template <typename Scalar>
void legendre_with_derivative(int n, Scalar x, Scalar& p, Scalar& dp) {
  Scalar p0 = 1;
  Scalar p1 = x;
  if (n == 0) {
    p = 1;
    dp = 0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const Scalar pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1);
}

}  // namespace detail

/// Gauss-Legendre collocation tableau with s stages (order 2s).
///
/// Nodes are the Legendre roots mapped to [0, 1], found by Newton iteration
/// from cosine estimates. A(i, j) integrates the j-th Lagrange basis
/// polynomial from 0 to c_i with the s-point Gauss rule, which is exact for
/// degree s - 1.
template <typename Scalar = double>
ButcherTableau<Scalar> gauss_tableau(int s) {
  if (s < 1 || s > kMaxGaussStages)
    throw Error(Errc::StageCountOutOfRange,
                "stage count " + std::to_string(s) + " outside [1, " +
                    std::to_string(kMaxGaussStages) + "]");

  using std::abs;
  using std::cos;
  constexpr double kRootTol = 1e-14;
  constexpr int kMaxNewton = 100;
  const Scalar pi = std::numbers::pi_v<double>;

  ButcherTableau<Scalar> tab;
  tab.c.resize(s);
  tab.b.resize(s);
  tab.A.resize(s, s);

  // Roots come out in decreasing order on [-1, 1]; storing at s-1-i sorts c.
  for (int i = 0; i < s; ++i) {
    Scalar x = cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(s) + Scalar(0.5)));
    Scalar p = 0;
    Scalar dp = 0;
    bool converged = false;
    for (int it = 0; it < kMaxNewton; ++it) {
      detail::legendre_with_derivative(s, x, p, dp);
      const Scalar dx = p / dp;
      x -= dx;
      if (abs(dx) <= Scalar(kRootTol)) {
        converged = true;
        break;
      }
    }
    // Newton converges quadratically, so a final update polishes to full precision.
    detail::legendre_with_derivative(s, x, p, dp);
    if (converged) x -= p / dp;
    detail::legendre_with_derivative(s, x, p, dp);
    tab.c(s - 1 - i) = (Scalar(1) + x) / 2;
    tab.b(s - 1 - i) = Scalar(1) / ((Scalar(1) - x * x) * dp * dp);  // 2/((1-x^2)P'^2) halved
  }

  // Symmetrize: the exact nodes satisfy c_i + c_{s-1-i} = 1.
  for (int i = 0; i < s / 2; ++i) {
    const Scalar lo = (tab.c(i) + (Scalar(1) - tab.c(s - 1 - i))) / 2;
    tab.c(i) = lo;
    tab.c(s - 1 - i) = Scalar(1) - lo;
    const Scalar w = (tab.b(i) + tab.b(s - 1 - i)) / 2;
    tab.b(i) = w;
    tab.b(s - 1 - i) = w;
  }
  if (s % 2 == 1) tab.c(s / 2) = Scalar(0.5);

  auto lagrange = [&](int j, Scalar tau) {
    Scalar v = 1;
    for (int m = 0; m < s; ++m)
      if (m != j) v *= (tau - tab.c(m)) / (tab.c(j) - tab.c(m));
    return v;
  };
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      Scalar acc = 0;
      for (int k = 0; k < s; ++k) acc += tab.b(k) * lagrange(j, tab.c(i) * tab.c(k));
      tab.A(i, j) = tab.c(i) * acc;
    }
  }
  return tab;
}

/// The classical explicit 4-stage, order-4 method.
template <typename Scalar = double>
ButcherTableau<Scalar> classical_rk4_tableau() {
  ButcherTableau<Scalar> tab;
  tab.c.resize(4);
  tab.b.resize(4);
  tab.A.setZero(4, 4);
  tab.c << 0, Scalar(0.5), Scalar(0.5), 1;
  tab.b << Scalar(1) / 6, Scalar(1) / 3, Scalar(1) / 3, Scalar(1) / 6;
  tab.A(1, 0) = Scalar(0.5);
  tab.A(2, 1) = Scalar(0.5);
  tab.A(3, 2) = 1;
  return tab;
}

/// Max residual of the simplifying conditions B(order) and C(s).
template <typename Scalar>
Scalar verify_order_conditions(const ButcherTableau<Scalar>& tab, int order) {
  using std::abs;
  using std::pow;
  const auto s = static_cast<int>(tab.stages());
  if (order < 1 || order > 2 * s)
    throw Error(Errc::OrderExceedsMethod,
                "order " + std::to_string(order) + " not in [1, " + std::to_string(2 * s) + "]");

  Scalar worst = 0;
  for (int q = 1; q <= order; ++q) {
    Scalar sum = 0;
    for (int i = 0; i < s; ++i) sum += tab.b(i) * pow(tab.c(i), q - 1);
    worst = std::max<Scalar>(worst, abs(sum - Scalar(1) / q));
  }
  for (int q = 1; q <= s; ++q) {
    for (int i = 0; i < s; ++i) {
      Scalar sum = 0;
      for (int j = 0; j < s; ++j) sum += tab.A(i, j) * pow(tab.c(j), q - 1);
      worst = std::max<Scalar>(worst, abs(sum - pow(tab.c(i), q) / q));
    }
  }
  return worst;
}

}  // namespace irksindy
