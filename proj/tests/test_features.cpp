#include <doctest.h>

#include <random>
#include <set>

#include "irksindy/dual.hpp"
#include "irksindy/features.hpp"

using namespace irksindy;

namespace {

Library poly(int d, int degree, bool constant = true) {
  LibrarySpec spec;
  spec.dimension = d;
  spec.poly_degree = degree;
  spec.include_constant = constant;
  return build_library(spec);
}

long binomial(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Eigen::MatrixXd fd_jacobian(const Library& lib, const Eigen::VectorXd& x, double step) {
  Eigen::MatrixXd jac(lib.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd up = x, down = x;
    up(i) += step;
    down(i) -= step;
    jac.col(i) = ((lib.evaluate(up) - lib.evaluate(down)) / (2 * step)).transpose();
  }
  return jac;
}

}  // namespace

TEST_CASE("degree-2 library in two variables") {
  const Library lib = poly(2, 2);
  CHECK(lib.size() == 6);
  CHECK(lib.names() == std::vector<std::string>{"1", "x1", "x2", "x1^2", "x1*x2", "x2^2"});
  CHECK(lib.is_polynomial());
}

TEST_CASE("term counts follow the binomial formula") {
  CHECK(poly(1, 0).names() == std::vector<std::string>{"1"});
  CHECK(poly(3, 2).size() == 10);
  for (int d = 1; d <= 3; ++d)
    for (int deg = 0; deg <= 5; ++deg) {
      CAPTURE(d);
      CAPTURE(deg);
      LibrarySpec spec{d, deg, true, {}, {}};
      CHECK(build_library(spec).size() == binomial(d + deg, deg));
      CHECK(library_size(spec) == binomial(d + deg, deg));
    }
}

TEST_CASE("names are distinct and monomial blocks are graded") {
  const Library lib = poly(3, 4);
  std::set<std::string> unique(lib.names().begin(), lib.names().end());
  CHECK(unique.size() == static_cast<std::size_t>(lib.size()));
  int previous = 0;
  for (const Term& t : lib.terms()) {
    CHECK(t.degree() >= previous);
    previous = t.degree();
  }
  CHECK(lib.names()[4] == "x1^2");
  CHECK(lib.names()[9] == "x3^2");
  CHECK(lib.names()[10] == "x1^3");
}

TEST_CASE("evaluation examples") {
  const Library lib2 = poly(2, 2);
  Eigen::Vector2d x(2, 3);
  Eigen::RowVectorXd expected(6);
  expected << 1, 2, 3, 4, 6, 9;
  CHECK(lib2.evaluate(x) == expected);

  Eigen::VectorXd y(1);
  y << -2;
  Eigen::RowVectorXd cubic(4);
  cubic << 1, -2, 4, -8;
  CHECK(poly(1, 3).evaluate(y) == cubic);
}

TEST_CASE("trig and exponential blocks") {
  LibrarySpec spec{2, 1, true, {1.0, 2.0}, {-1.0}};
  const Library lib = build_library(spec);
  CHECK(lib.names() == std::vector<std::string>{"1", "x1", "x2", "sin(x1)", "sin(x2)", "sin(2*x1)", "sin(2*x2)",
                                                "cos(x1)", "cos(x2)", "cos(2*x1)", "cos(2*x2)", "exp(-x1)",
                                                "exp(-x2)"});
  CHECK_FALSE(lib.is_polynomial());
  const Eigen::RowVectorXd v = lib.evaluate(Eigen::Vector2d::Zero());
  for (int j = 3; j <= 6; ++j) CHECK(v(j) == 0.0);
  for (int j = 7; j <= 10; ++j) CHECK(v(j) == 1.0);
  CHECK(v(11) == 1.0);
}

TEST_CASE("term names round trip through the parser") {
  LibrarySpec spec{3, 3, true, {1.0, 0.5}, {-1.5, 2.0}};
  const Library lib = build_library(spec);
  for (const Term& t : lib.terms()) {
    CAPTURE(term_name(t));
    CHECK(parse_term(term_name(t), 3) == t);
  }
  CHECK_THROWS_AS(parse_term("x4", 3), Error);
  CHECK_THROWS_AS(parse_term("tan(x1)", 3), Error);
}

TEST_CASE("jacobian examples") {
  const Library lin = poly(1, 1);
  Eigen::VectorXd x(1);
  x << 0.37;
  Eigen::MatrixXd col(2, 1);
  col << 0, 1;
  CHECK(lin.jacobian(x) == col);

  const Library lib2 = poly(2, 2);
  const Eigen::MatrixXd j = lib2.jacobian(Eigen::Vector2d(2, 3));
  CHECK(j(4, 0) == 3.0);
  CHECK(j(4, 1) == 2.0);
}

TEST_CASE("jacobian matches central differences and forward-mode derivatives") {
  LibrarySpec spec{3, 4, true, {1.0, 2.0}, {-1.0, 0.5}};
  const Library lib = build_library(spec);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x(i) = u(rng);
    const Eigen::MatrixXd analytic = lib.jacobian(x);
    const Eigen::MatrixXd fd = fd_jacobian(lib, x, 1e-5);
    const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
    CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale < 1e-6);

    const Eigen::MatrixXd fwd = grad::forward_jacobian(
        [&](const auto& xd) { return lib.evaluate(xd).transpose().eval(); }, x);
    CHECK((analytic - fwd).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
}

TEST_CASE("invalid specifications and inputs") {
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidConfig;
  };
  CHECK(code_of([] { build_library({2, 0, false, {}, {}}); }) == Errc::EmptyLibrary);
  CHECK(code_of([] { build_library({2, kMaxPolyDegree + 1, true, {}, {}}); }) == Errc::InvalidLibrarySpec);
  CHECK(code_of([] { build_library({0, 1, true, {}, {}}); }) == Errc::InvalidLibrarySpec);
  CHECK(code_of([] { poly(2, 2).evaluate(Eigen::Vector3d::Zero()); }) == Errc::DimensionMismatch);
  CHECK(code_of([] { poly(2, 2).jacobian(Eigen::VectorXd::Zero(1)); }) == Errc::DimensionMismatch);
}

TEST_CASE("row-wise evaluation agrees with single evaluation") {
  const Library lib = poly(2, 3);
  Eigen::MatrixXd states(3, 2);
  states << 1, 2, -0.5, 0.25, 3, -1;
  const Eigen::MatrixXd rows = lib.evaluate_rows(states);
  for (int r = 0; r < 3; ++r) CHECK(rows.row(r) == lib.evaluate(states.row(r).transpose()));
}
