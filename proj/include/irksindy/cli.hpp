#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "irksindy/dataset.hpp"
#include "irksindy/error.hpp"
#include "irksindy/features.hpp"
#include "irksindy/net.hpp"
#include "irksindy/sindy.hpp"

namespace irksindy::cli {

enum class Method { irk_fixed_point, irk_newton, deep, rk4_baseline };

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_integration = 3, exit_training = 4 };

/// Flat key=value run configuration. Every key has a default; unknown keys
/// are rejected. Values stay as text until read through a typed accessor.
class RunConfig {
 public:
  RunConfig();

  /// Parses `key = value` lines; '#' starts a comment. `origin` names the
  /// source in error messages.
  static RunConfig parse(std::string_view text, const std::string& origin = "config");
  static RunConfig load(const std::filesystem::path& path);

  /// Applies lines of `text` on top of this configuration.
  void merge(std::string_view text, const std::string& origin = "config");
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  /// True when the key holds a non-empty value.
  bool has(const std::string& key) const;

  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  /// Throws InvalidConfig naming the first key without a value.
  void require(const std::vector<std::string>& keys) const;

  /// Replaces `seed` with IRKSINDY_SEED when that variable is set.
  void apply_environment();

  /// Sorted `key = value` lines.
  std::string echo() const;
  static std::vector<std::string> known_keys();

  Method method() const;
  SindyConfig sindy() const;
  Architecture architecture() const;
  LibrarySpec library_spec(int dimension) const;
  ButcherTableau<double> tableau() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string_view to_string(Method method);

/// Reference model trajectory per model, x0, t0, t1, m, sigma and seed.
Dataset generate_data(const RunConfig& config);

/// Training data: the `data` file when given, otherwise generate_data, then
/// the Savitzky-Golay filter when savgol_window > 0.
Dataset training_data(const RunConfig& config);

/// Runs the configured method on `ds`, standardizing first when `scaling`
/// asks for it.
DiscoveredModel discover(const RunConfig& config, const Dataset& ds, const EpochObserver& observer = {});

/// A library together with coefficients, as stored in a coefficient file.
struct CoefficientTable {
  std::shared_ptr<const Library> library;
  Eigen::MatrixXd xi;
};

/// Header `term,dx1,...,dxd`; one row per library term.
void write_coefficients(const std::filesystem::path& path, const Library& lib, const Eigen::MatrixXd& xi);
CoefficientTable read_coefficients(const std::filesystem::path& path);
void write_history(const std::filesystem::path& path, const std::vector<double>& history);
void write_summary(const std::filesystem::path& path, const RunConfig& config, const DiscoveredModel& model);

struct Metrics {
  double coefficient_max_error = 0.0;
  double support_precision = 0.0;
  double support_recall = 0.0;
  bool support_exact = false;
  double trajectory_rmse = 0.0;
};

/// Support and coefficient agreement, matching terms by name.
Metrics coefficient_metrics(const CoefficientTable& discovered, const CoefficientTable& reference);
void write_metrics(const std::filesystem::path& path, const Metrics& metrics);

/// Trajectory of Phi(x) xi on the grid t0 + k (t1 - t0) / m, integrated
/// with the three-stage Gauss method.
Dataset simulate(const CoefficientTable& model, const Eigen::VectorXd& x0, double t0, double t1, int m);

struct Comparison {
  Metrics metrics;
  std::vector<Dataset> reference;
  std::vector<Dataset> discovered;
};

/// Simulates both models from every initial condition over the horizon
/// (sim_* keys, falling back to x0, t0, t1, m) and fills all metrics.
Comparison compare(const RunConfig& config, const CoefficientTable& discovered);

/// Reads a preset file `<name>.cfg` from `dir`.
RunConfig load_preset(const std::string& name, const std::filesystem::path& dir);
std::filesystem::path default_preset_dir();

/// Command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace irksindy::cli
