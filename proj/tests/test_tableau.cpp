#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "irksindy/tableau.hpp"

using irksindy::ButcherTableau;
using irksindy::gauss_tableau;
using irksindy::verify_order_conditions;

namespace {

// Golub-Welsch: Gauss-Legendre nodes and weights from the symmetric Jacobi
// matrix of the Legendre recurrence, mapped to [0, 1].
void golub_welsch(int s, Eigen::VectorXd& c, Eigen::VectorXd& b) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(s, s);
  for (int k = 1; k < s; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  c = (eig.eigenvalues().array() + 1.0) / 2.0;
  b = eig.eigenvectors().row(0).transpose().array().square();
}

// Collocation conditions sum_j A_ij c_j^(q-1) = c_i^q / q, q = 1..s, solved
// as a Vandermonde system per row.
Eigen::MatrixXd collocation_matrix(const Eigen::VectorXd& c) {
  const Eigen::Index s = c.size();
  Eigen::MatrixXd V(s, s);
  for (Eigen::Index q = 0; q < s; ++q)
    for (Eigen::Index j = 0; j < s; ++j) V(q, j) = std::pow(c(j), static_cast<double>(q));
  Eigen::MatrixXd rhs(s, s);
  for (Eigen::Index q = 0; q < s; ++q)
    for (Eigen::Index i = 0; i < s; ++i) rhs(q, i) = std::pow(c(i), static_cast<double>(q + 1)) / (q + 1);
  return V.fullPivLu().solve(rhs).transpose();
}

}  // namespace

TEST_CASE("one-stage Gauss is the implicit midpoint rule") {
  const auto tab = gauss_tableau(1);
  CHECK(tab.stages() == 1);
  CHECK(tab.c(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tab.b(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tab.A(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(verify_order_conditions(tab, 1) <= 1e-15);
}

TEST_CASE("two-stage Gauss matches the sqrt(3) closed forms") {
  const auto tab = gauss_tableau(2);
  const double r3 = std::sqrt(3.0);
  CHECK(std::abs(tab.c(0) - (3 - r3) / 6) <= 1e-14);
  CHECK(std::abs(tab.c(1) - (3 + r3) / 6) <= 1e-14);
  CHECK(std::abs(tab.b(0) - 0.5) <= 1e-14);
  CHECK(std::abs(tab.b(1) - 0.5) <= 1e-14);
  CHECK(std::abs(tab.A(0, 0) - 0.25) <= 1e-14);
  CHECK(std::abs(tab.A(0, 1) - (3 - 2 * r3) / 12) <= 1e-14);
  CHECK(std::abs(tab.A(1, 0) - (3 + 2 * r3) / 12) <= 1e-14);
  CHECK(std::abs(tab.A(1, 1) - 0.25) <= 1e-14);
  CHECK(verify_order_conditions(tab, 4) <= 1e-12);
}

TEST_CASE("three-stage nodes and weights") {
  const auto tab = gauss_tableau(3);
  const double r15 = std::sqrt(15.0);
  CHECK(std::abs(tab.c(0) - (5 - r15) / 10) <= 1e-14);
  CHECK(std::abs(tab.c(1) - 0.5) <= 1e-14);
  CHECK(std::abs(tab.c(2) - (5 + r15) / 10) <= 1e-14);
  CHECK(std::abs(tab.b(0) - 5.0 / 18) <= 1e-14);
  CHECK(std::abs(tab.b(1) - 4.0 / 9) <= 1e-14);
  CHECK(std::abs(tab.b(2) - 5.0 / 18) <= 1e-14);
}

TEST_CASE("nodes and weights agree with the Golub-Welsch eigenvalue oracle") {
  for (int s = 1; s <= 16; ++s) {
    CAPTURE(s);
    Eigen::VectorXd c, b;
    golub_welsch(s, c, b);
    const auto tab = gauss_tableau(s);
    CHECK((tab.c - c).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((tab.b - b).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("stage matrix agrees with the collocation-condition oracle") {
  for (int s = 1; s <= 8; ++s) {
    CAPTURE(s);
    const auto tab = gauss_tableau(s);
    CHECK((tab.A - collocation_matrix(tab.c)).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("order conditions up to 2s for s = 1..8") {
  for (int s = 1; s <= 8; ++s) {
    CAPTURE(s);
    CHECK(verify_order_conditions(gauss_tableau(s), 2 * s) <= 1e-10);
  }
}

TEST_CASE("tableau invariants for s = 1..16") {
  for (int s = 1; s <= 16; ++s) {
    CAPTURE(s);
    const auto tab = gauss_tableau(s);
    CHECK(std::abs(tab.b.sum() - 1.0) <= 1e-12);
    CHECK((tab.A.rowwise().sum() - tab.c).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < s; ++i) {
      CHECK(tab.c(i) > 0.0);
      CHECK(tab.c(i) < 1.0);
      if (i > 0) CHECK(tab.c(i) > tab.c(i - 1));
      CHECK(std::abs(tab.c(i) + tab.c(s - 1 - i) - 1.0) <= 1e-12);
      CHECK(std::abs(tab.b(i) - tab.b(s - 1 - i)) <= 1e-12);
    }
  }
}

TEST_CASE("largest supported stage count still satisfies the row sums") {
  const auto tab = gauss_tableau(irksindy::kMaxGaussStages);
  CHECK(std::abs(tab.b.sum() - 1.0) <= 1e-12);
  CHECK((tab.A.rowwise().sum() - tab.c).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("construction is deterministic") {
  const auto a = gauss_tableau(7);
  const auto b = gauss_tableau(7);
  CHECK(a.A == b.A);
  CHECK(a.b == b.b);
  CHECK(a.c == b.c);
}

TEST_CASE("long double tableau refines the double one") {
  const auto d = gauss_tableau<double>(5);
  const auto ld = gauss_tableau<long double>(5);
  CHECK((d.A - ld.A.cast<double>()).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(verify_order_conditions(ld, 10) <= 1e-16L);
}

TEST_CASE("stage count and order are range checked") {
  using irksindy::Errc;
  using irksindy::Error;
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("no error raised");
    return Errc::InvalidConfig;
  };
  CHECK(code_of([] { gauss_tableau(0); }) == Errc::StageCountOutOfRange);
  CHECK(code_of([] { gauss_tableau(irksindy::kMaxGaussStages + 1); }) == Errc::StageCountOutOfRange);
  CHECK(code_of([] { verify_order_conditions(gauss_tableau(2), 5); }) == Errc::OrderExceedsMethod);
}

TEST_CASE("classical RK4 is explicit and fourth order") {
  const auto rk4 = irksindy::classical_rk4_tableau();
  CHECK(rk4.is_explicit());
  CHECK_FALSE(gauss_tableau(2).is_explicit());
  CHECK(rk4.b.sum() == doctest::Approx(1.0));
  // B(4) only: C(4) does not hold for RK4.
  for (int q = 1; q <= 4; ++q) {
    double sum = 0;
    for (int i = 0; i < 4; ++i) sum += rk4.b(i) * std::pow(rk4.c(i), q - 1);
    CHECK(sum == doctest::Approx(1.0 / q).epsilon(1e-15));
  }
}
