#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irksindy/features.hpp"
#include "irksindy/irk.hpp"
#include "irksindy/trajectory.hpp"

namespace irksindy {

/// Benchmark right-hand side expressed over the smallest polynomial library
/// that contains it.
struct ReferenceModel {
  std::string name;
  std::shared_ptr<const Library> library;
  Eigen::MatrixXd xi;
  std::map<std::string, double> parameters;
  Eigen::VectorXd default_x0;
  double default_t0 = 0.0;
  double default_t1 = 1.0;

  int dimension() const { return library->dimension(); }
  VectorField<double> field() const { return {*library, xi}; }
};

/// Names accepted by reference_model.
std::vector<std::string> reference_model_names();

/// Published benchmark: linear_osc, cubic_osc, fhn, lorenz, lotka_volterra or
/// logistic. Overrides may only touch that model's declared parameters.
ReferenceModel reference_model(const std::string& name,
                               const std::map<std::string, double>& overrides = {});

/// Wraps a user-supplied library and coefficient matrix.
ReferenceModel custom_model(std::shared_ptr<const Library> library, Eigen::MatrixXd xi);

/// Integrator behind data generation and model simulation.
struct IntegratorSettings {
  int stages = 5;
  double max_substep = 1e-2;
  double min_substep = 1e-9;
  /// States beyond this magnitude are reported as a blow-up.
  double blowup_threshold = 1e8;
};

/// Samples the flow of `f` at the given increasing times, starting at x0.
/// Throws IntegrationFailure (with the failure time) when the Newton solve
/// fails below the substep floor or the state blows up.
Dataset integrate(const VectorField<double>& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                  const IntegratorSettings& settings = {});

/// Uniform grid of m+1 points on [t0, t_end]; X[0] = x0 exactly.
Dataset generate(const ReferenceModel& model, const Eigen::VectorXd& x0, double t0, double t_end,
                 Eigen::Index m, const IntegratorSettings& settings = {});

/// Adds N(0, sigma^2) to every state entry (including the first sample).
/// Uses std::mt19937_64 and the Box-Muller transform, so the output is
/// reproducible across platforms for a given seed.
Dataset add_noise(const Dataset& ds, double sigma, std::uint64_t seed);

/// Savitzky-Golay smoothing on a uniform grid. The first and last full-window
/// fits are evaluated at the boundary offsets (no padding).
Dataset savgol_filter(const Dataset& ds, int window, int poly_order);

enum class ScalingMode { scale_only, full_standardize };

struct ScalingInfo {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  ScalingMode mode = ScalingMode::scale_only;
};

struct Standardized {
  Dataset data;
  ScalingInfo scaling;
};

/// Per-coordinate scaling by the population standard deviation; full
/// standardization also removes the mean.
Standardized standardize(const Dataset& ds, ScalingMode mode);

/// Applies an existing scaling to states (rows of X).
Eigen::MatrixXd apply_scaling(const Eigen::MatrixXd& X, const ScalingInfo& scaling);

/// Coefficients learned for y = x / sigma mapped back to x. Only scale_only
/// with a polynomial library is supported.
Eigen::MatrixXd rescale_coefficients(const Eigen::MatrixXd& xi, const ScalingInfo& scaling,
                                     const Library& lib);

/// Inverse of rescale_coefficients: original-coordinate coefficients
/// expressed for y = x / sigma.
Eigen::MatrixXd scale_coefficients(const Eigen::MatrixXd& xi, const ScalingInfo& scaling,
                                   const Library& lib);

/// CSV with header t,x1,...,xd and 17 significant digits.
void save_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

}  // namespace irksindy
