#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "irksindy/dataset.hpp"
#include "test_support.hpp"

using namespace irksindy;
using testing::throws_code;

namespace {

double coefficient(const ReferenceModel& m, const std::string& term, int eq) {
  const auto& names = m.library->names();
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == term) return m.xi(static_cast<Eigen::Index>(j), eq);
  FAIL("missing term " << term);
  return 0;
}

double logistic_closed_form(double t, double r, double K, double T0) {
  return K / (1 + (K - T0) / T0 * std::exp(-r * t));
}

Dataset uniform(Eigen::Index n, double dt, const std::function<double(double)>& fn) {
  Eigen::VectorXd t(n);
  Eigen::MatrixXd X(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    t(i) = i * dt;
    X(i, 0) = fn(t(i));
  }
  return Dataset(t, X);
}

double rmse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("irksindy_test_" + name);
}

}  // namespace

TEST_CASE("reference models carry the published coefficients") {
  const auto lin = reference_model("linear_osc");
  CHECK(lin.library->names() == std::vector<std::string>{"x1", "x2"});
  CHECK(lin.xi(0, 0) == -0.1);
  CHECK(lin.xi(1, 0) == 2.0);
  CHECK(lin.xi(0, 1) == -2.0);
  CHECK(lin.xi(1, 1) == -0.1);

  const auto logi = reference_model("logistic");
  CHECK(coefficient(logi, "x1", 0) == doctest::Approx(0.31));
  CHECK(coefficient(logi, "x1^2", 0) == doctest::Approx(-0.155));

  const auto lv = reference_model("lotka_volterra");
  CHECK(coefficient(lv, "x1", 0) == doctest::Approx(2.0 / 3.0));
  CHECK(coefficient(lv, "x1*x2", 0) == doctest::Approx(-4.0 / 3.0));
  CHECK(coefficient(lv, "x2", 1) == -1.0);
  CHECK(coefficient(lv, "x1*x2", 1) == 1.0);

  const auto lorenz = reference_model("lorenz");
  CHECK(coefficient(lorenz, "x3", 2) == doctest::Approx(-8.0 / 3.0));
  CHECK(coefficient(lorenz, "x1*x3", 1) == -1.0);

  const auto fhn = reference_model("fhn");
  CHECK(coefficient(fhn, "x1^3", 0) == doctest::Approx(-1.0 / 3.0));
  CHECK(coefficient(fhn, "1", 1) == 0.032);
  CHECK(coefficient(fhn, "x2", 1) == -0.028);
}

TEST_CASE("model overrides and errors") {
  const auto m = reference_model("logistic", {{"r", 0.5}, {"K", 4.0}});
  CHECK(coefficient(m, "x1^2", 0) == doctest::Approx(-0.125));
  CHECK(throws_code([] { reference_model("pendulum"); }, Errc::UnknownModel));
  CHECK(throws_code([] { reference_model("lorenz", {{"gamma", 1.0}}); }, Errc::InvalidParameter));
}

TEST_CASE("logistic data follows the closed form") {
  const auto model = reference_model("logistic");
  const Dataset ds = generate(model, model.default_x0, 0.0, 50.0, 50);
  CHECK(ds.samples() == 51);
  CHECK(ds.X()(0, 0) == 0.1);
  CHECK(std::abs(ds.X()(10, 0) - 1.077625) <= 1e-5);
  for (Eigen::Index k = 0; k < ds.samples(); ++k)
    CHECK(std::abs(ds.X()(k, 0) - logistic_closed_form(ds.t()(k), 0.31, 2.0, 0.1)) <= 1e-10);
  CHECK(std::abs(ds.X()(50, 0) - 2.0 / (1 + 19 * std::exp(-15.5))) <= 1e-10);
}

TEST_CASE("linear oscillator decays radially as exp(-0.1 t)") {
  const auto model = reference_model("linear_osc");
  const Dataset ds = generate(model, model.default_x0, 0.0, 20.0, 400);
  CHECK(ds.X().row(0) == model.default_x0.transpose());
  for (Eigen::Index k = 0; k < ds.samples(); k += 40)
    CHECK(ds.X().row(k).norm() == doctest::Approx(2 * std::exp(-0.1 * ds.t()(k))).epsilon(1e-9));
  CHECK(std::abs(ds.X().row(400).norm() - 0.270671) <= 1e-4);
}

TEST_CASE("exponential decay matches exp(-t)") {
  const auto lib = testing::scalar_linear_library();
  Eigen::MatrixXd xi(1, 1);
  xi << -1.0;
  const auto model = custom_model(lib, xi);
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  const Dataset ds = generate(model, x0, 0.0, 5.0, 37);
  for (Eigen::Index k = 0; k < ds.samples(); ++k)
    CHECK(std::abs(ds.X()(k, 0) / std::exp(-ds.t()(k)) - 1.0) <= 1e-9);
}

TEST_CASE("blow-up is reported as an integration failure") {
  const auto lib = std::make_shared<const Library>(build_library({1, 2, false, {}, {}}));
  Eigen::MatrixXd xi(2, 1);
  xi << 0.0, 1.0;  // x' = x^2 blows up at t = 1 from x0 = 1
  const auto model = custom_model(lib, xi);
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  try {
    generate(model, x0, 0.0, 2.0, 20);
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IntegrationFailure);
    CHECK(std::string(e.what()).find("t = ") != std::string::npos);
  }
}

TEST_CASE("noise injection") {
  const auto model = reference_model("linear_osc");
  const Dataset clean = generate(model, model.default_x0, 0.0, 20.0, 200);
  const Dataset same = add_noise(clean, 0.0, 3);
  CHECK(same.X() == clean.X());

  const Dataset a = add_noise(clean, 0.04, 7);
  const Dataset b = add_noise(clean, 0.04, 7);
  CHECK(a.X() == b.X());
  CHECK(a.t() == clean.t());
  CHECK(a.X() != add_noise(clean, 0.04, 8).X());

  const Dataset flat = uniform(10001, 1.0, [](double) { return 0.0; });
  const Eigen::VectorXd diff = add_noise(flat, 0.1, 42).X().col(0);
  const double mean = diff.mean();
  const double sd = std::sqrt((diff.array() - mean).square().sum() / (diff.size() - 1));
  CHECK(sd >= 0.097);
  CHECK(sd <= 0.103);
  CHECK(throws_code([&] { add_noise(flat, -1.0, 0); }, Errc::InvalidParameter));
}

TEST_CASE("Savitzky-Golay reproduces low-order polynomials") {
  const Dataset quad = uniform(40, 0.1, [](double t) { return 1.5 - 2 * t + 0.7 * t * t; });
  CHECK((savgol_filter(quad, 5, 2).X() - quad.X()).cwiseAbs().maxCoeff() <= 1e-12);
  const Dataset line = uniform(40, 0.1, [](double t) { return 3 - t; });
  CHECK((savgol_filter(line, 7, 1).X() - line.X()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Savitzky-Golay window 5 order 2 uses the textbook weights") {
  // Interior weights (-3, 12, 17, 12, -3) / 35.
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(9, 0, 8);
  Eigen::MatrixXd X(9, 1);
  X << 0, 0, 0, 0, 1, 0, 0, 0, 0;
  const Dataset out = savgol_filter(Dataset(t, X), 5, 2);
  CHECK(out.X()(2, 0) == doctest::Approx(-3.0 / 35));
  CHECK(out.X()(3, 0) == doctest::Approx(12.0 / 35));
  CHECK(out.X()(4, 0) == doctest::Approx(17.0 / 35));
}

TEST_CASE("Savitzky-Golay reduces noise") {
  const Dataset clean = uniform(501, 0.02, [](double t) { return std::sin(t); });
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset noisy = add_noise(clean, 0.1, seed);
    const Dataset smooth = savgol_filter(noisy, 11, 3);
    CHECK(rmse(smooth.X(), clean.X()) < rmse(noisy.X(), clean.X()));
  }
  const auto model = reference_model("linear_osc");
  const Dataset osc = generate(model, model.default_x0, 0.0, 20.0, 550);
  for (double sigma : {0.01, 0.04})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Dataset noisy = add_noise(osc, sigma, seed);
      CHECK(rmse(savgol_filter(noisy, 15, 3).X(), osc.X()) < rmse(noisy.X(), osc.X()));
    }
}

TEST_CASE("Savitzky-Golay preconditions") {
  const Dataset small = uniform(5, 0.1, [](double t) { return t; });
  CHECK(throws_code([&] { savgol_filter(small, 7, 2); }, Errc::WindowTooLarge));
  CHECK(throws_code([&] { savgol_filter(small, 4, 2); }, Errc::InvalidParameter));
  Eigen::VectorXd t(5);
  t << 0, 0.1, 0.3, 0.4, 0.5;
  CHECK(throws_code([&] { savgol_filter(Dataset(t, Eigen::MatrixXd::Ones(5, 1)), 3, 1); }, Errc::NonUniformGrid));
}

TEST_CASE("standardization") {
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(4, 0, 3);
  Eigen::MatrixXd X(4, 2);
  X << 1, 10, 3, 14, 5, 10, 7, 14;  // column std 2 and 2
  const Dataset ds(t, X);
  const auto s = standardize(ds, ScalingMode::scale_only);
  CHECK(s.scaling.sigma(0) == doctest::Approx(std::sqrt(5.0)));
  CHECK(s.scaling.sigma(1) == doctest::Approx(2.0));
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd c = s.data.X().col(j);
    const double sd = std::sqrt((c.array() - c.mean()).square().mean());
    CHECK(std::abs(sd - 1.0) <= 1e-12);
    CHECK(c.mean() / sd == doctest::Approx(X.col(j).mean() / (j == 0 ? std::sqrt(5.0) : 2.0)));
  }
  CHECK(s.scaling.mu.isZero());

  const auto full = standardize(ds, ScalingMode::full_standardize);
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd c = full.data.X().col(j);
    CHECK(std::abs(c.mean()) <= 1e-12);
    CHECK(std::abs(std::sqrt(c.array().square().mean()) - 1.0) <= 1e-12);
  }
  Eigen::MatrixXd flat = X;
  flat.col(1).setConstant(3.0);
  CHECK(throws_code([&] { standardize(Dataset(t, flat), ScalingMode::scale_only); }, Errc::DegenerateCoordinate));
}

TEST_CASE("coefficient rescaling") {
  const auto logi = reference_model("logistic");
  ScalingInfo s{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.0), ScalingMode::scale_only};
  Eigen::MatrixXd scaled(2, 1);
  scaled << 0.31, 0.31;
  const Eigen::MatrixXd original = rescale_coefficients(scaled, s, *logi.library);
  CHECK(original(0, 0) == doctest::Approx(0.31));
  CHECK(original(1, 0) == doctest::Approx(0.155));

  const auto lin = reference_model("linear_osc");
  ScalingInfo ones{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), ScalingMode::scale_only};
  CHECK(rescale_coefficients(lin.xi, ones, *lin.library) == lin.xi);
  ScalingInfo diag{Eigen::VectorXd::Zero(2), Eigen::Vector2d(2.0, 5.0), ScalingMode::scale_only};
  const Eigen::MatrixXd mapped = rescale_coefficients(Eigen::MatrixXd::Ones(2, 2), diag, *lin.library);
  CHECK(mapped(0, 1) == doctest::Approx(5.0 / 2.0));  // term x1 in equation 2
  CHECK(mapped(1, 0) == doctest::Approx(2.0 / 5.0));  // term x2 in equation 1

  ScalingInfo full = diag;
  full.mode = ScalingMode::full_standardize;
  CHECK(throws_code([&] { rescale_coefficients(lin.xi, full, *lin.library); }, Errc::UnsupportedScalingMode));
  const Library trig = build_library({2, 1, false, {1.0}, {}});
  CHECK(throws_code([&] { rescale_coefficients(Eigen::MatrixXd::Ones(trig.size(), 2), diag, trig); },
                    Errc::NonPolynomialLibrary));
}

TEST_CASE("scaling round trip on Lorenz data") {
  const auto model = reference_model("lorenz");
  const Dataset ds = generate(model, model.default_x0, 0.0, 2.0, 200);
  const auto s = standardize(ds, ScalingMode::scale_only);
  const Library lib = build_library({3, 2, true, {}, {}});
  Eigen::MatrixXd xi = Eigen::MatrixXd::Random(lib.size(), 3);
  const Eigen::MatrixXd back = rescale_coefficients(scale_coefficients(xi, s.scaling, lib), s.scaling, lib);
  CHECK((back - xi).cwiseAbs().maxCoeff() <= 1e-12);

  // The scaled reference field reproduces the scaled derivative exactly.
  const Library& mlib = *model.library;
  const Eigen::MatrixXd scaled_xi = scale_coefficients(model.xi, s.scaling, mlib);
  const Eigen::VectorXd x = ds.X().row(50).transpose();
  const Eigen::VectorXd y = s.data.X().row(50).transpose();
  const Eigen::VectorXd fx = (mlib.evaluate(x) * model.xi).transpose();
  const Eigen::VectorXd fy = (mlib.evaluate(y) * scaled_xi).transpose();
  CHECK((fy - fx.cwiseQuotient(s.scaling.sigma)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("CSV round trip and format") {
  const auto model = reference_model("lorenz");
  const Dataset ds = add_noise(generate(model, model.default_x0, 0.0, 1.0, 20), 0.3, 5);
  const auto path = temp_file("roundtrip.csv");
  save_csv(ds, path);
  {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x1,x2,x3");
  }
  const Dataset back = load_csv(path);
  CHECK(back.t() == ds.t());
  CHECK(back.X() == ds.X());
  std::filesystem::remove(path);
}

TEST_CASE("malformed CSV files") {
  auto write = [](const std::string& name, const std::string& body) {
    const auto path = temp_file(name);
    std::ofstream(path) << body;
    return path;
  };
  CHECK(throws_code([&] { load_csv(write("nonmono.csv", "t,x1\n0,1\n0.2,2\n0.1,3\n")); }, Errc::MalformedFile));
  CHECK(throws_code([&] { load_csv(write("cols.csv", "t,x1,x2\n0,1\n")); }, Errc::MalformedFile));
  CHECK(throws_code([&] { load_csv(write("header.csv", "time,x1\n0,1\n")); }, Errc::MalformedFile));
  CHECK(throws_code([&] { load_csv(write("empty.csv", "")); }, Errc::MalformedFile));
  CHECK(throws_code([&] { load_csv(write("norows.csv", "t,x1\n")); }, Errc::MalformedFile));
  CHECK(throws_code([&] { load_csv(temp_file("does_not_exist.csv")); }, Errc::IoError));
}
