#include "irksindy/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace irksindy {

Dataset::Dataset(Eigen::VectorXd t, Eigen::MatrixXd X) : t_(std::move(t)), X_(std::move(X)) {
  if (t_.size() < 1) throw Error(Errc::InvalidParameter, "dataset needs at least one sample");
  if (X_.rows() != t_.size())
    throw Error(Errc::DimensionMismatch, "time vector and state matrix disagree on sample count");
  if (X_.cols() < 1) throw Error(Errc::DimensionMismatch, "state dimension must be at least 1");
  if (!t_.allFinite() || !X_.allFinite())
    throw Error(Errc::NonFiniteValue, "dataset contains non-finite values");
  h_ = t_.tail(t_.size() - 1) - t_.head(t_.size() - 1);
  for (Eigen::Index k = 0; k < h_.size(); ++k)
    if (!(h_(k) > 0.0))
      throw Error(Errc::InvalidParameter, "sample times must be strictly increasing (index " +
                                              std::to_string(k + 1) + ")");
}

// ---------------------------------------------------------------------------
// Reference models

namespace {

struct ModelRecipe {
  LibrarySpec spec;
  std::map<std::string, double> defaults;
  std::vector<double> x0;
  double t0;
  double t1;
};

ModelRecipe recipe(const std::string& name) {
  if (name == "linear_osc")
    return {{2, 1, false, {}, {}}, {{"damping", 0.1}, {"frequency", 2.0}}, {2.0, 0.0}, 0.0, 20.0};
  if (name == "cubic_osc")
    return {{2, 3, false, {}, {}}, {{"damping", 0.1}, {"frequency", 2.0}}, {2.0, 0.0}, 0.0, 20.0};
  if (name == "fhn")
    return {{2, 3, true, {}, {}},
            {{"current", 0.5}, {"a", 0.04}, {"b", 0.028}, {"c", 0.032}},
            {0.0, 0.0},
            0.0,
            200.0};
  if (name == "lorenz")
    return {{3, 2, false, {}, {}},
            {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}},
            {-8.0, 7.0, 27.0},
            0.0,
            10.0};
  if (name == "lotka_volterra")
    return {{2, 2, false, {}, {}},
            {{"alpha", 2.0 / 3.0}, {"beta", 4.0 / 3.0}, {"gamma", 1.0}, {"delta", 1.0}},
            {1.8, 1.8},
            0.0,
            10.0};
  if (name == "logistic") return {{1, 2, false, {}, {}}, {{"r", 0.31}, {"K", 2.0}}, {0.1}, 0.0, 50.0};
  throw Error(Errc::UnknownModel, "unknown reference model '" + name + "'");
}

Eigen::Index term_index(const Library& lib, const std::string& name) {
  const auto& names = lib.names();
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return static_cast<Eigen::Index>(j);
  throw Error(Errc::InvalidParameter, "library has no term '" + name + "'");
}

}  // namespace

std::vector<std::string> reference_model_names() {
  return {"linear_osc", "cubic_osc", "fhn", "lorenz", "lotka_volterra", "logistic"};
}

ReferenceModel reference_model(const std::string& name, const std::map<std::string, double>& overrides) {
  ModelRecipe r = recipe(name);
  for (const auto& [key, value] : overrides) {
    auto it = r.defaults.find(key);
    if (it == r.defaults.end())
      throw Error(Errc::InvalidParameter, "model '" + name + "' has no parameter '" + key + "'");
    if (!std::isfinite(value))
      throw Error(Errc::InvalidParameter, "parameter '" + key + "' must be finite");
    it->second = value;
  }
  const auto& p = r.defaults;

  ReferenceModel model;
  model.name = name;
  model.parameters = p;
  model.library = std::make_shared<const Library>(build_library(r.spec));
  model.default_x0 = Eigen::Map<const Eigen::VectorXd>(r.x0.data(), static_cast<Eigen::Index>(r.x0.size()));
  model.default_t0 = r.t0;
  model.default_t1 = r.t1;
  const Library& lib = *model.library;
  Eigen::MatrixXd& xi = model.xi;
  xi.setZero(lib.size(), lib.dimension());
  auto set = [&](const std::string& term, int eq, double v) { xi(term_index(lib, term), eq) = v; };

  if (name == "linear_osc" || name == "cubic_osc") {
    const std::string a = name == "linear_osc" ? "x1" : "x1^3";
    const std::string b = name == "linear_osc" ? "x2" : "x2^3";
    set(a, 0, -p.at("damping"));
    set(b, 0, p.at("frequency"));
    set(a, 1, -p.at("frequency"));
    set(b, 1, -p.at("damping"));
  } else if (name == "fhn") {
    set("1", 0, p.at("current"));
    set("x1", 0, 1.0);
    set("x2", 0, -1.0);
    set("x1^3", 0, -1.0 / 3.0);
    set("1", 1, p.at("c"));
    set("x1", 1, p.at("a"));
    set("x2", 1, -p.at("b"));
  } else if (name == "lorenz") {
    set("x1", 0, -p.at("sigma"));
    set("x2", 0, p.at("sigma"));
    set("x1", 1, p.at("rho"));
    set("x2", 1, -1.0);
    set("x1*x3", 1, -1.0);
    set("x1*x2", 2, 1.0);
    set("x3", 2, -p.at("beta"));
  } else if (name == "lotka_volterra") {
    set("x1", 0, p.at("alpha"));
    set("x1*x2", 0, -p.at("beta"));
    set("x2", 1, -p.at("gamma"));
    set("x1*x2", 1, p.at("delta"));
  } else if (name == "logistic") {
    if (p.at("K") == 0.0) throw Error(Errc::InvalidParameter, "carrying capacity K must be nonzero");
    set("x1", 0, p.at("r"));
    set("x1^2", 0, -p.at("r") / p.at("K"));
  }

  const Eigen::VectorXd f0 = model.field()(model.default_x0);
  if (!f0.allFinite()) throw Error(Errc::InvalidParameter, "right-hand side is not finite at x0");
  return model;
}

ReferenceModel custom_model(std::shared_ptr<const Library> library, Eigen::MatrixXd xi) {
  ReferenceModel model;
  model.name = "custom";
  model.library = std::move(library);
  model.xi = std::move(xi);
  model.default_x0 = Eigen::VectorXd::Zero(model.library->dimension());
  (void)model.field();  // shape check
  return model;
}

// ---------------------------------------------------------------------------
// Integration

namespace {

class SubstepIntegrator {
 public:
  SubstepIntegrator(const VectorField<double>& f, const IntegratorSettings& settings)
      : f_(f), settings_(settings), tab_(gauss_tableau(settings.stages)) {}

  // Advances x over [t, t + dt], halving on Newton failure.
  void advance(Eigen::VectorXd& x, double t, double dt) const {
    try {
      Eigen::VectorXd next = step(f_, x, dt, tab_, SolverSettings::newton());
      if (!next.allFinite() || next.cwiseAbs().maxCoeff() > settings_.blowup_threshold)
        throw Error(Errc::IntegrationFailure, "state blew up near t = " + format(t + dt));
      x = std::move(next);
    } catch (const Error& e) {
      if (e.code() == Errc::IntegrationFailure) throw;
      if (dt / 2 < settings_.min_substep)
        throw Error(Errc::IntegrationFailure, "stage solve failed near t = " + format(t) + " (" +
                                                  e.what() + ")");
      advance(x, t, dt / 2);
      advance(x, t + dt / 2, dt / 2);
    }
  }

 private:
  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

  const VectorField<double>& f_;
  IntegratorSettings settings_;
  ButcherTableau<double> tab_;
};

}  // namespace

Dataset integrate(const VectorField<double>& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                  const IntegratorSettings& settings) {
  if (x0.size() != f.dimension()) throw Error(Errc::DimensionMismatch, "x0 does not match the model");
  if (times.size() < 1) throw Error(Errc::InvalidParameter, "no sample times");
  SubstepIntegrator integrator(f, settings);
  Eigen::MatrixXd X(times.size(), x0.size());
  X.row(0) = x0.transpose();
  Eigen::VectorXd x = x0;
  for (Eigen::Index k = 0; k + 1 < times.size(); ++k) {
    const double span = times(k + 1) - times(k);
    if (!(span > 0)) throw Error(Errc::InvalidParameter, "sample times must be increasing");
    const auto n = static_cast<int>(std::ceil(span / settings.max_substep - 1e-9));
    const double dt = span / std::max(n, 1);
    for (int j = 0; j < std::max(n, 1); ++j) integrator.advance(x, times(k) + j * dt, dt);
    X.row(k + 1) = x.transpose();
  }
  return Dataset(times, std::move(X));
}

Dataset generate(const ReferenceModel& model, const Eigen::VectorXd& x0, double t0, double t_end,
                 Eigen::Index m, const IntegratorSettings& settings) {
  if (!(t_end > t0)) throw Error(Errc::InvalidParameter, "t_end must exceed t0");
  if (m < 1) throw Error(Errc::InvalidParameter, "m must be at least 1");
  Eigen::VectorXd times(m + 1);
  for (Eigen::Index k = 0; k <= m; ++k)
    times(k) = k == m ? t_end : t0 + (t_end - t0) * static_cast<double>(k) / static_cast<double>(m);
  return integrate(model.field(), x0, times, settings);
}

// ---------------------------------------------------------------------------
// Noise and smoothing

Dataset add_noise(const Dataset& ds, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw Error(Errc::InvalidParameter, "noise level must be nonnegative");
  if (sigma == 0) return ds;
  std::mt19937_64 rng(seed);
  // Uniform on [0, 1) from the top 53 bits.
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Eigen::MatrixXd X = ds.X();
  bool have_spare = false;
  double spare = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double z;
      if (have_spare) {
        z = spare;
        have_spare = false;
      } else {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        z = r * std::cos(angle);
        spare = r * std::sin(angle);
        have_spare = true;
      }
      X(i, j) += sigma * z;
    }
  }
  return Dataset(ds.t(), std::move(X));
}

Dataset savgol_filter(const Dataset& ds, int window, int poly_order) {
  if (window < 3 || window % 2 == 0)
    throw Error(Errc::InvalidParameter, "window must be odd and at least 3");
  if (poly_order < 0 || poly_order >= window)
    throw Error(Errc::InvalidParameter, "poly_order must be in [0, window)");
  const Eigen::Index n = ds.samples();
  if (window > n)
    throw Error(Errc::WindowTooLarge, "window " + std::to_string(window) + " exceeds " +
                                          std::to_string(n) + " samples");
  const Eigen::VectorXd& h = ds.h();
  if (h.size() > 0 && (h.array() - h(0)).abs().maxCoeff() > 1e-9 * std::abs(h(0)))
    throw Error(Errc::NonUniformGrid, "Savitzky-Golay needs uniformly spaced samples");

  const int half = window / 2;
  // Offsets scaled to [-1, 1] keep the Vandermonde matrix well conditioned.
  Eigen::MatrixXd V(window, poly_order + 1);
  for (int r = 0; r < window; ++r) {
    const double u = static_cast<double>(r - half) / half;
    double v = 1;
    for (int q = 0; q <= poly_order; ++q, v *= u) V(r, q) = v;
  }
  // Row r of `smoother` gives the fitted value at window position r.
  const Eigen::MatrixXd fit = V.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd smoother = V * fit;

  const Eigen::MatrixXd& X = ds.X();
  Eigen::MatrixXd Y(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index start;
    Eigen::Index pos;
    if (i < half) {
      start = 0;
      pos = i;
    } else if (i >= n - half) {
      start = n - window;
      pos = i - start;
    } else {
      start = i - half;
      pos = half;
    }
    Y.row(i) = smoother.row(pos) * X.middleRows(start, window);
  }
  return Dataset(ds.t(), std::move(Y));
}

// ---------------------------------------------------------------------------
// Scaling

Standardized standardize(const Dataset& ds, ScalingMode mode) {
  if (ds.intervals() < 1) throw Error(Errc::EmptyDataset, "standardize needs at least two samples");
  const Eigen::MatrixXd& X = ds.X();
  const Eigen::VectorXd mean = X.colwise().mean().transpose();
  Eigen::VectorXd sd(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    sd(j) = std::sqrt((X.col(j).array() - mean(j)).square().mean());
    if (!(sd(j) > 0))
      throw Error(Errc::DegenerateCoordinate, "coordinate " + std::to_string(j + 1) + " has zero variance");
  }
  ScalingInfo info{mode == ScalingMode::full_standardize ? mean : Eigen::VectorXd::Zero(X.cols()), sd, mode};
  return {Dataset(ds.t(), apply_scaling(X, info)), info};
}

Eigen::MatrixXd apply_scaling(const Eigen::MatrixXd& X, const ScalingInfo& scaling) {
  if (X.cols() != scaling.sigma.size()) throw Error(Errc::DimensionMismatch, "scaling dimension mismatch");
  Eigen::MatrixXd Y = X;
  Y.rowwise() -= scaling.mu.transpose();
  return Y.array().rowwise() / scaling.sigma.transpose().array();
}

namespace {

// Factor converting a scaled-coordinate coefficient of `term` in equation i
// to original coordinates: sigma_i / prod_j sigma_j^p_j.
Eigen::MatrixXd rescale_factors(const ScalingInfo& scaling, const Library& lib) {
  if (scaling.mode != ScalingMode::scale_only)
    throw Error(Errc::UnsupportedScalingMode, "only scale_only coefficients can be mapped back");
  if (!lib.is_polynomial())
    throw Error(Errc::NonPolynomialLibrary, "coefficient rescaling needs a polynomial library");
  if (scaling.sigma.size() != lib.dimension())
    throw Error(Errc::DimensionMismatch, "scaling dimension does not match library");
  Eigen::MatrixXd factors(lib.size(), lib.dimension());
  for (Eigen::Index p = 0; p < lib.size(); ++p) {
    const Term& t = lib.terms()[static_cast<std::size_t>(p)];
    double denom = 1;
    if (t.kind == TermKind::monomial)
      for (int j = 0; j < lib.dimension(); ++j)
        denom *= std::pow(scaling.sigma(j), t.powers[static_cast<std::size_t>(j)]);
    for (int i = 0; i < lib.dimension(); ++i) factors(p, i) = scaling.sigma(i) / denom;
  }
  return factors;
}

}  // namespace

Eigen::MatrixXd rescale_coefficients(const Eigen::MatrixXd& xi, const ScalingInfo& scaling, const Library& lib) {
  const Eigen::MatrixXd factors = rescale_factors(scaling, lib);
  if (xi.rows() != factors.rows() || xi.cols() != factors.cols())
    throw Error(Errc::DimensionMismatch, "coefficient matrix does not match library");
  return xi.cwiseProduct(factors);
}

Eigen::MatrixXd scale_coefficients(const Eigen::MatrixXd& xi, const ScalingInfo& scaling, const Library& lib) {
  const Eigen::MatrixXd factors = rescale_factors(scaling, lib);
  if (xi.rows() != factors.rows() || xi.cols() != factors.cols())
    throw Error(Errc::DimensionMismatch, "coefficient matrix does not match library");
  return xi.cwiseQuotient(factors);
}

// ---------------------------------------------------------------------------
// CSV

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  out << "t";
  for (int j = 0; j < ds.dimension(); ++j) out << ",x" << j + 1;
  out << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < ds.samples(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ds.t()(i));
    out << buf;
    for (int j = 0; j < ds.dimension(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.X()(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::MalformedFile, "'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "t")
    throw Error(Errc::MalformedFile, "header must be t,x1,...,xd");
  for (std::size_t j = 1; j < header.size(); ++j)
    if (header[j] != "x" + std::to_string(j))
      throw Error(Errc::MalformedFile, "unexpected column '" + header[j] + "'");
  const auto cols = header.size();

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(Errc::MalformedFile, "bad number '" + cell + "' on data row " + std::to_string(rows + 1));
      }
      ++count;
    }
    if (count != cols)
      throw Error(Errc::MalformedFile, "data row " + std::to_string(rows + 1) + " has " +
                                           std::to_string(count) + " columns, expected " +
                                           std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw Error(Errc::MalformedFile, "'" + path.string() + "' has no data rows");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> table(
      values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  try {
    return Dataset(table.col(0), table.rightCols(static_cast<Eigen::Index>(cols) - 1));
  } catch (const Error& e) {
    throw Error(Errc::MalformedFile, e.what());
  }
}

}  // namespace irksindy
