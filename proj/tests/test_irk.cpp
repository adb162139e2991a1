#include <doctest.h>

#include <cmath>
#include <complex>

#include "irksindy/dataset.hpp"
#include "irksindy/dual.hpp"
#include "irksindy/irk.hpp"
#include "test_support.hpp"

using namespace irksindy;
using testing::throws_code;

namespace {

VectorField<double> scalar_field(const Library& lib, double lambda) {
  Eigen::MatrixXd xi(1, 1);
  xi << lambda;
  return {lib, xi};
}

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

}  // namespace

TEST_CASE("one-stage stage value for x' = -x") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -1.0);
  for (const auto& settings : {SolverSettings::fixed_point(), SolverSettings::newton()}) {
    const auto st = solve_stages(f, scalar(1.0), 0.1, gauss_tableau(1), settings);
    CHECK(std::abs(st.chi(0, 0) - 1.0 / 1.05) <= 1e-12);
    CHECK(st.residual <= settings.tol);
  }
}

TEST_CASE("zero step leaves the stages at the state") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -3.0);
  for (const auto& settings : {SolverSettings::fixed_point(), SolverSettings::newton()}) {
    const auto st = solve_stages(f, scalar(0.7), 0.0, gauss_tableau(3), settings);
    CHECK(st.iterations_used <= 1);
    CHECK((st.chi.array() == 0.7).all());
    CHECK(step(f, scalar(0.7), 0.0, gauss_tableau(3), settings)(0) == 0.7);
  }
}

TEST_CASE("stiff scalar problem: fixed point diverges, Newton converges") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -100.0);
  CHECK(throws_code([&] { solve_stages(f, scalar(1.0), 0.1, gauss_tableau(1), SolverSettings::fixed_point()); },
                    Errc::NonConvergence));
  const auto st = solve_stages(f, scalar(1.0), 0.1, gauss_tableau(1), SolverSettings::newton());
  CHECK(std::abs(st.chi(0, 0) - 1.0 / 6.0) <= 1e-12);
}

TEST_CASE("step closed forms") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -1.0);
  const auto newton = SolverSettings::newton();
  CHECK(std::abs(step(f, scalar(1.0), 0.1, gauss_tableau(1), newton)(0) - (1.0 - 0.1 / 1.05)) <= 1e-12);
  const double z = -0.1;
  const double pade = (1 + z / 2 + z * z / 12) / (1 - z / 2 + z * z / 12);
  CHECK(std::abs(step(f, scalar(1.0), 0.1, gauss_tableau(2), newton)(0) - pade) <= 1e-12);
  CHECK(std::abs(pade - std::exp(-0.1)) <= 2e-8);
}

TEST_CASE("stability function of Gauss methods is the diagonal Pade approximant") {
  const auto lib = testing::scalar_linear_library();
  // (3,3) Pade of exp: numerator 1 + z/2 + z^2/10 + z^3/120.
  for (double z : {-0.5, -3.0, 0.8}) {
    const auto f = scalar_field(*lib, z);
    const double num = 1 + z / 2 + z * z / 10 + z * z * z / 120;
    const double den = 1 - z / 2 + z * z / 10 - z * z * z / 120;
    CHECK(step(f, scalar(1.0), 1.0, gauss_tableau(3), SolverSettings::newton())(0) ==
          doctest::Approx(num / den).epsilon(1e-12));
  }
}

TEST_CASE("stage predictors reproduce the state and the step") {
  const auto model = reference_model("lorenz");
  const auto f = model.field();
  const auto tab = gauss_tableau(3);
  const auto settings = SolverSettings::newton();
  const double h = 0.02;
  const Eigen::VectorXd x = model.default_x0;
  const auto st = solve_stages(f, x, h, tab, settings);
  const auto pred = stage_predictors(st.chi, f, h, tab);
  const Eigen::VectorXd next = step(f, x, h, tab, settings);
  const double scale = 10 * settings.tol * (1 + x.cwiseAbs().maxCoeff());
  for (int i = 0; i < 3; ++i) {
    CHECK((pred.left.row(i) - x.transpose()).cwiseAbs().maxCoeff() <= scale);
    CHECK((pred.right.row(i) - next.transpose()).cwiseAbs().maxCoeff() <= scale);
  }
  CHECK(throws_code([&] { stage_predictors(Eigen::MatrixXd(st.chi.topRows(2)), f, h, tab); },
                    Errc::DimensionMismatch));

  const auto lib = testing::scalar_linear_library();
  const auto g = scalar_field(*lib, -1.0);
  const auto st1 = solve_stages(g, scalar(1.0), 0.1, gauss_tableau(1), settings);
  CHECK(std::abs(stage_predictors(st1.chi, g, 0.1, gauss_tableau(1)).right(0, 0) - 0.9047619047619) <= 1e-10);
}

TEST_CASE("Newton and fixed point agree when both converge") {
  for (const auto& name : reference_model_names()) {
    CAPTURE(name);
    const auto model = reference_model(name);
    const auto f = model.field();
    const double h = name == "lorenz" ? 0.01 : 0.05;
    for (int s = 1; s <= 3; ++s) {
      const auto a = solve_stages(f, model.default_x0, h, gauss_tableau(s), SolverSettings::fixed_point());
      const auto b = solve_stages(f, model.default_x0, h, gauss_tableau(s), SolverSettings::newton());
      CHECK((a.chi - b.chi).cwiseAbs().maxCoeff() <= 10 * 1e-12 * (1 + a.chi.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("steps are reversible on every benchmark") {
  for (const auto& name : reference_model_names()) {
    CAPTURE(name);
    const auto model = reference_model(name);
    const auto f = model.field();
    for (int s = 1; s <= 3; ++s) {
      const auto tab = gauss_tableau(s);
      for (double h : {0.1, 0.05, 0.01}) {
        const Eigen::VectorXd fwd = step(f, model.default_x0, h, tab, SolverSettings::newton());
        const Eigen::VectorXd back = step(f, fwd, -h, tab, SolverSettings::newton());
        CHECK((back - model.default_x0).cwiseAbs().maxCoeff() <= 100 * 1e-12 * (1 + model.default_x0.norm()));
      }
    }
  }
}

TEST_CASE("field Jacobian matches forward-mode differentiation") {
  for (const auto& name : reference_model_names()) {
    CAPTURE(name);
    const auto model = reference_model(name);
    const auto f = model.field();
    const Eigen::VectorXd x = model.default_x0.array() + 0.3;
    const Eigen::MatrixXd fwd = grad::forward_jacobian(
        [&](const auto& xd) {
          using D = grad::Dual;
          const Eigen::Matrix<D, Eigen::Dynamic, Eigen::Dynamic> xi = model.xi.cast<D>();
          return (model.library->evaluate(xd) * xi).transpose().eval();
        },
        x);
    CHECK((f.jacobian(x) - fwd).cwiseAbs().maxCoeff() <= 1e-12 * (1 + fwd.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("observed convergence order on x' = -x") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -1.0);
  for (int s = 1; s <= 3; ++s) {
    CAPTURE(s);
    const auto tab = gauss_tableau(s);
    std::vector<double> errors;
    for (double h = 0.2; h >= 0.0125 - 1e-15; h /= 2) {
      Eigen::VectorXd x = scalar(1.0);
      const int n = static_cast<int>(std::lround(1.0 / h));
      for (int k = 0; k < n; ++k) x = step(f, x, h, tab, SolverSettings::newton());
      errors.push_back(std::abs(x(0) - std::exp(-1.0)));
    }
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
      if (errors[i + 1] < 1e-14) break;
      CHECK(std::log2(errors[i] / errors[i + 1]) >= 2 * s - 0.2);
    }
  }
}

TEST_CASE("A-stability: implicit midpoint damps, RK4 amplifies") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -1e6);
  const double ratio = step(f, scalar(1.0), 0.1, gauss_tableau(1), SolverSettings::newton())(0);
  CHECK(std::abs(ratio) < 1.0);
  CHECK(ratio == doctest::Approx((1 - 0.1 * 1e6 / 2) / (1 + 0.1 * 1e6 / 2)).epsilon(1e-9));
  const double z = -1e5;
  CHECK(std::abs(1 + z + z * z / 2 + z * z * z / 6 + z * z * z * z / 24) > 1.0);
}

TEST_CASE("explicit RK4 tableau steps like the classical method") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -1.0);
  const double z = -0.3;
  const double expected = 1 + z + z * z / 2 + z * z * z / 6 + z * z * z * z / 24;
  for (const auto& settings : {SolverSettings::fixed_point(), SolverSettings::newton()})
    CHECK(step(f, scalar(1.0), 0.3, classical_rk4_tableau(), settings)(0) ==
          doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("prediction matrices") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -1.0);
  Eigen::VectorXd t(2);
  t << 0.0, 0.1;
  Eigen::MatrixXd X(2, 1);
  X << 1.0, 0.904837;
  const Dataset ds(t, X);
  const auto pred = predict_matrices(f, ds, gauss_tableau(2), SolverSettings::newton());
  // Backward step multiplies by R(0.1) = 1 / R(-0.1).
  const double r = (1 - 0.05 + 0.01 / 12) / (1 + 0.05 + 0.01 / 12);
  CHECK(std::abs(pred.left(0, 0) - 0.904837 / r) <= 1e-12);
  CHECK(std::abs(pred.left(0, 0) - 1.0) <= 1e-6);
  CHECK(std::abs(pred.right(0, 0) - r) <= 1e-12);

  const auto zero = scalar_field(*lib, 0.0);
  const auto id = predict_matrices(zero, ds, gauss_tableau(2), SolverSettings::newton());
  CHECK(id.right(0, 0) == X(0, 0));
  CHECK(id.left(0, 0) == X(1, 0));
}

TEST_CASE("prediction matrices are self-consistent on generated data") {
  const auto model = reference_model("linear_osc");
  const Dataset ds = generate(model, model.default_x0, 0.0, 20.0, 800);
  const auto pred = predict_matrices(model.field(), ds, gauss_tableau(3), SolverSettings::newton());
  CHECK((pred.right - ds.right()).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((pred.left - ds.left()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("solver failures name the interval") {
  const auto lib = testing::scalar_linear_library();
  const auto f = scalar_field(*lib, -100.0);
  Eigen::VectorXd t(3);
  t << 0.0, 0.001, 0.101;
  Eigen::MatrixXd X(3, 1);
  X << 1.0, 0.9, 0.1;
  const Dataset ds(t, X);
  try {
    predict_matrices(f, ds, gauss_tableau(1), SolverSettings::fixed_point());
    FAIL("expected a solver failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonConvergence);
    CHECK(std::string(e.what()).find("interval 1") != std::string::npos);
  }
}
