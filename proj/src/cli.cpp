#include "irksindy/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#ifndef IRKSINDY_PRESET_DIR
#define IRKSINDY_PRESET_DIR "presets"
#endif

namespace irksindy::cli {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> table = {
      // data
      {"model", ""},
      {"x0", ""},
      {"t0", ""},
      {"t1", ""},
      {"m", "100"},
      {"sigma", "0"},
      {"seed", "0"},
      {"data", ""},
      {"savgol_window", "0"},
      {"savgol_order", "3"},
      {"scaling", "none"},
      // library
      {"dimension", ""},
      {"poly_degree", "3"},
      {"constant", "true"},
      {"trig_freqs", ""},
      {"exp_rates", ""},
      // method and solver
      {"method", "irk_newton"},
      {"stages", "2"},
      {"solver_tol", "1e-12"},
      {"solver_max_iterations", ""},
      {"grad_mode", "implicit"},
      // training
      {"alpha", "0.5"},
      {"lambda", "0.05"},
      {"reg", "none"},
      {"l1_weight", "0"},
      {"lr_xi", "0.01"},
      {"lr_theta", "0.001"},
      {"lr_decay", "0.8"},
      {"thresholding_iterations", "3"},
      {"epochs_first", "1000"},
      {"epochs_rest", "1000"},
      // network
      {"hidden_layers", "4"},
      {"width", "32"},
      {"activation", "tanh"},
      {"omega0", "30"},
      {"use_time", "true"},
      // simulation and outputs
      {"coefficients", ""},
      {"sim_x0", ""},
      {"sim_t0", ""},
      {"sim_t1", ""},
      {"sim_m", ""},
      {"out", ""},
      {"out_dir", "."},
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

Error config_error(const std::string& key, const std::string& what) {
  return Error(Errc::InvalidConfig, "key '" + key + "': " + what);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string read_config_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  save_csv(ds, path);
}

}  // namespace

// --- RunConfig ---------------------------------------------------------------

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::parse(std::string_view text, const std::string& origin) {
  RunConfig config;
  config.merge(text, origin);
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return parse(read_config_text(path), path.string()); }

void RunConfig::merge(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::InvalidConfig, origin + ":" + std::to_string(number) + ": expected key = value");
    set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::InvalidConfig, "unknown key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(Errc::InvalidConfig, "unknown key '" + key + "'");
  return it->second;
}

bool RunConfig::has(const std::string& key) const { return !get(key).empty(); }

double RunConfig::number(const std::string& key) const {
  const std::string& v = get(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw config_error(key, "expected a number, got '" + v + "'");
  return out;
}

int RunConfig::integer(const std::string& key) const {
  const std::string& v = get(key);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw config_error(key, "expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t RunConfig::unsigned_integer(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw config_error(key, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error(key, "expected true or false, got '" + v + "'");
}

std::vector<double> RunConfig::list(const std::string& key) const {
  std::vector<double> out;
  if (!has(key)) return out;
  for (const std::string& item : split(get(key), ',')) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw config_error(key, "bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void RunConfig::require(const std::vector<std::string>& keys) const {
  for (const auto& key : keys)
    if (!has(key)) throw config_error(key, "required but not set");
}

void RunConfig::apply_environment() {
  if (const char* seed = std::getenv("IRKSINDY_SEED"); seed && *seed) {
    set("seed", seed);
    unsigned_integer("seed");
  }
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> RunConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& kv : defaults()) keys.push_back(kv.first);
  return keys;
}

Method RunConfig::method() const {
  const std::string& v = get("method");
  if (v == "irk_newton") return Method::irk_newton;
  if (v == "irk_fixed_point") return Method::irk_fixed_point;
  if (v == "deep") return Method::deep;
  if (v == "rk4_baseline") return Method::rk4_baseline;
  throw config_error("method", "expected irk_fixed_point, irk_newton, deep or rk4_baseline");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::irk_fixed_point: return "irk_fixed_point";
    case Method::irk_newton: return "irk_newton";
    case Method::deep: return "deep";
    case Method::rk4_baseline: return "rk4_baseline";
  }
  return "?";
}

SindyConfig RunConfig::sindy() const {
  SindyConfig c;
  c.alpha = number("alpha");
  c.lambda = number("lambda");
  const std::string& reg = get("reg");
  if (reg == "none")
    c.reg = Regularization::none;
  else if (reg == "l1")
    c.reg = Regularization::l1;
  else
    throw config_error("reg", "expected none or l1");
  c.l1_weight = number("l1_weight");
  c.lr_xi = number("lr_xi");
  c.lr_theta = number("lr_theta");
  c.lr_decay = number("lr_decay");
  c.thresholding_iterations = integer("thresholding_iterations");
  c.epochs_first = integer("epochs_first");
  c.epochs_rest = integer("epochs_rest");
  c.solver = method() == Method::irk_fixed_point ? SolverSettings::fixed_point() : SolverSettings::newton();
  c.solver.tol = number("solver_tol");
  if (has("solver_max_iterations")) c.solver.max_iterations = integer("solver_max_iterations");
  const std::string& mode = get("grad_mode");
  if (mode == "implicit")
    c.grad_mode = GradMode::implicit;
  else if (mode == "unrolled")
    c.grad_mode = GradMode::unrolled;
  else
    throw config_error("grad_mode", "expected implicit or unrolled");
  c.stages = integer("stages");
  c.seed = unsigned_integer("seed");
  c.validate();
  return c;
}

Architecture RunConfig::architecture() const {
  Architecture a;
  a.hidden_layers = integer("hidden_layers");
  a.width = integer("width");
  const std::string& act = get("activation");
  if (act == "tanh")
    a.activation = Activation::tanh;
  else if (act == "siren")
    a.activation = Activation::siren;
  else
    throw config_error("activation", "expected tanh or siren");
  a.omega0 = number("omega0");
  a.seed = unsigned_integer("seed");
  a.use_time = flag("use_time");
  return a;
}

LibrarySpec RunConfig::library_spec(int dimension) const {
  LibrarySpec spec;
  spec.dimension = has("dimension") ? integer("dimension") : dimension;
  if (spec.dimension != dimension)
    throw config_error("dimension", "data has dimension " + std::to_string(dimension));
  spec.poly_degree = integer("poly_degree");
  spec.include_constant = flag("constant");
  spec.trig_frequencies = list("trig_freqs");
  spec.exp_rates = list("exp_rates");
  return spec;
}

ButcherTableau<double> RunConfig::tableau() const {
  if (method() == Method::rk4_baseline) return classical_rk4_tableau();
  return gauss_tableau(integer("stages"));
}

// --- pipeline ----------------------------------------------------------------

Dataset generate_data(const RunConfig& config) {
  config.require({"model"});
  const ReferenceModel model = reference_model(config.get("model"));
  const Eigen::VectorXd x0 = config.has("x0") ? to_vector(config.list("x0")) : model.default_x0;
  const double t0 = config.has("t0") ? config.number("t0") : model.default_t0;
  const double t1 = config.has("t1") ? config.number("t1") : model.default_t1;
  const Dataset clean = generate(model, x0, t0, t1, config.integer("m"));
  const double sigma = config.number("sigma");
  if (sigma == 0.0) return clean;
  return add_noise(clean, sigma, config.unsigned_integer("seed"));
}

Dataset training_data(const RunConfig& config) {
  Dataset ds = config.has("data") ? load_csv(config.get("data")) : generate_data(config);
  const int window = config.integer("savgol_window");
  if (window > 0) ds = savgol_filter(ds, window, config.integer("savgol_order"));
  return ds;
}

DiscoveredModel discover(const RunConfig& config, const Dataset& ds, const EpochObserver& observer) {
  auto lib = std::make_shared<const Library>(build_library(config.library_spec(ds.dimension())));
  const SindyConfig sc = config.sindy();
  const auto tab = config.tableau();
  const std::string& scaling = config.get("scaling");
  std::optional<ScalingInfo> info;
  Dataset train = ds;
  if (scaling == "scale_only" || scaling == "full_standardize") {
    Standardized st = standardize(ds, scaling == "scale_only" ? ScalingMode::scale_only : ScalingMode::full_standardize);
    train = std::move(st.data);
    info = st.scaling;
  } else if (scaling != "none") {
    throw config_error("scaling", "expected none, scale_only or full_standardize");
  }

  DiscoveredModel model = config.method() == Method::deep
                              ? discover_deep(train, lib, tab, sc, config.architecture(), observer)
                              : discover_irk(train, lib, tab, sc, observer);
  // Standardized coordinates cannot be mapped back through a shift, so
  // those coefficients are reported as fitted.
  if (info && info->mode == ScalingMode::scale_only) {
    model.scaling = info;
    refresh_report(model);
  }
  return model;
}

// --- files -------------------------------------------------------------------

void write_coefficients(const std::filesystem::path& path, const Library& lib, const Eigen::MatrixXd& xi) {
  if (xi.rows() != lib.size() || xi.cols() != lib.dimension())
    throw Error(Errc::DimensionMismatch, "coefficients do not match the library");
  std::ofstream out = open_output(path);
  out << "term";
  for (Eigen::Index j = 0; j < xi.cols(); ++j) out << ",dx" << j + 1;
  out << "\n";
  for (Eigen::Index i = 0; i < xi.rows(); ++i) {
    out << lib.names()[i];
    for (Eigen::Index j = 0; j < xi.cols(); ++j) out << "," << format(xi(i, j));
    out << "\n";
  }
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

CoefficientTable read_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::MalformedFile, "'" + path.string() + "' is empty");
  const auto header = split(line, ',');
  if (header.size() < 2 || header[0] != "term") throw Error(Errc::MalformedFile, "header must be term,dx1,...");
  const int d = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < d; ++j)
    if (header[j + 1] != "dx" + std::to_string(j + 1))
      throw Error(Errc::MalformedFile, "unexpected column '" + header[j + 1] + "'");

  std::vector<Term> terms;
  std::vector<std::vector<double>> rows;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) != d + 1)
      throw Error(Errc::MalformedFile, "line " + std::to_string(number) + ": expected " + std::to_string(d + 1) +
                                           " fields");
    terms.push_back(parse_term(cells[0], d));
    std::vector<double> row(d);
    for (int j = 0; j < d; ++j) {
      const auto& c = cells[j + 1];
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row[j]);
      if (ec != std::errc() || ptr != c.data() + c.size())
        throw Error(Errc::MalformedFile, "line " + std::to_string(number) + ": bad number '" + c + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::MalformedFile, "'" + path.string() + "' has no terms");
  CoefficientTable table;
  table.library = std::make_shared<const Library>(d, std::move(terms));
  table.xi.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < d; ++j) table.xi(static_cast<Eigen::Index>(i), j) = rows[i][j];
  return table;
}

void write_history(const std::filesystem::path& path, const std::vector<double>& history) {
  std::ofstream out = open_output(path);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) out << e << "," << format(history[e]) << "\n";
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

void write_summary(const std::filesystem::path& path, const RunConfig& config, const DiscoveredModel& model) {
  std::ofstream out = open_output(path);
  out << "method: " << config.get("method") << "\n";
  out << "epochs: " << model.training_history.size() << "\n";
  if (!model.training_history.empty()) out << "final_loss: " << format(model.training_history.back()) << "\n";
  out << "coordinates: " << (model.scaling ? "original (rescaled from scale_only)" : config.get("scaling") == "none"
                                                                                        ? "original"
                                                                                        : "standardized")
      << "\n";
  out << "all_terms_eliminated: " << (model.all_terms_eliminated ? "true" : "false") << "\n";
  for (std::size_t j = 0; j < model.term_report.size(); ++j) {
    out << "dx" << j + 1 << ":";
    if (model.term_report[j].empty()) out << " (none)";
    for (const auto& tc : model.term_report[j]) out << " " << tc.term << "=" << format(tc.value);
    out << "\n";
  }
  out << "\n[config]\n" << config.echo();
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

// --- comparison ----------------------------------------------------------------

Metrics coefficient_metrics(const CoefficientTable& discovered, const CoefficientTable& reference) {
  const Eigen::Index d = reference.xi.cols();
  if (discovered.xi.cols() != d) throw Error(Errc::DimensionMismatch, "models have different state dimensions");
  std::set<std::pair<std::string, Eigen::Index>> disc_support, ref_support;
  std::map<std::pair<std::string, Eigen::Index>, double> disc_value;
  for (Eigen::Index i = 0; i < discovered.xi.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto key = std::make_pair(discovered.library->names()[i], j);
      disc_value[key] = discovered.xi(i, j);
      if (discovered.xi(i, j) != 0.0) disc_support.insert(key);
    }
  Metrics m;
  for (Eigen::Index i = 0; i < reference.xi.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      if (reference.xi(i, j) == 0.0) continue;
      const auto key = std::make_pair(reference.library->names()[i], j);
      ref_support.insert(key);
      const auto it = disc_value.find(key);
      const double v = it == disc_value.end() ? 0.0 : it->second;
      m.coefficient_max_error = std::max(m.coefficient_max_error, std::abs(v - reference.xi(i, j)));
    }
  std::size_t common = 0;
  for (const auto& key : disc_support) common += ref_support.count(key);
  m.support_precision = disc_support.empty() ? 0.0 : static_cast<double>(common) / disc_support.size();
  m.support_recall = ref_support.empty() ? 1.0 : static_cast<double>(common) / ref_support.size();
  m.support_exact = disc_support == ref_support;
  return m;
}

void write_metrics(const std::filesystem::path& path, const Metrics& metrics) {
  std::ofstream out = open_output(path);
  out << "metric,value\n";
  out << "coefficient_max_error," << format(metrics.coefficient_max_error) << "\n";
  out << "support_precision," << format(metrics.support_precision) << "\n";
  out << "support_recall," << format(metrics.support_recall) << "\n";
  out << "support_exact," << (metrics.support_exact ? 1 : 0) << "\n";
  out << "trajectory_rmse," << format(metrics.trajectory_rmse) << "\n";
  if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
}

Dataset simulate(const CoefficientTable& model, const Eigen::VectorXd& x0, double t0, double t1, int m) {
  if (!(t1 > t0)) throw Error(Errc::InvalidParameter, "horizon end must exceed its start");
  if (m < 1) throw Error(Errc::InvalidParameter, "need at least one interval");
  const VectorField<double> f(*model.library, model.xi);
  IntegratorSettings settings;
  settings.stages = 3;
  return integrate(f, x0, Eigen::VectorXd::LinSpaced(m + 1, t0, t1), settings);
}

namespace {

struct Horizon {
  std::vector<Eigen::VectorXd> initial_conditions;
  double t0 = 0.0;
  double t1 = 1.0;
  int m = 1;
};

Horizon horizon(const RunConfig& config, const Eigen::VectorXd& default_x0, double default_t0, double default_t1) {
  Horizon hz;
  if (config.has("sim_x0")) {
    for (const std::string& ic : split(config.get("sim_x0"), ';')) {
      RunConfig tmp;
      tmp.set("x0", ic);
      hz.initial_conditions.push_back(to_vector(tmp.list("x0")));
    }
  } else {
    hz.initial_conditions.push_back(config.has("x0") ? to_vector(config.list("x0")) : default_x0);
  }
  hz.t0 = config.has("sim_t0") ? config.number("sim_t0") : config.has("t0") ? config.number("t0") : default_t0;
  hz.t1 = config.has("sim_t1") ? config.number("sim_t1") : config.has("t1") ? config.number("t1") : default_t1;
  hz.m = config.has("sim_m") ? config.integer("sim_m") : config.integer("m");
  return hz;
}

}  // namespace

Comparison compare(const RunConfig& config, const CoefficientTable& discovered) {
  config.require({"model"});
  const ReferenceModel model = reference_model(config.get("model"));
  const CoefficientTable reference{model.library, model.xi};
  const Horizon hz = horizon(config, model.default_x0, model.default_t0, model.default_t1);

  Comparison out;
  out.metrics = coefficient_metrics(discovered, reference);
  double sum_sq = 0.0;
  Eigen::Index count = 0;
  for (const auto& x0 : hz.initial_conditions) {
    out.reference.push_back(simulate(reference, x0, hz.t0, hz.t1, hz.m));
    out.discovered.push_back(simulate(discovered, x0, hz.t0, hz.t1, hz.m));
    sum_sq += (out.reference.back().X() - out.discovered.back().X()).squaredNorm();
    count += out.reference.back().X().size();
  }
  out.metrics.trajectory_rmse = std::sqrt(sum_sq / static_cast<double>(count));
  return out;
}

RunConfig load_preset(const std::string& name, const std::filesystem::path& dir) {
  if (name.empty() || name.find('/') != std::string::npos || name.find('.') != std::string::npos)
    throw Error(Errc::InvalidConfig, "bad preset name '" + name + "'");
  const auto path = dir / (name + ".cfg");
  if (!std::filesystem::exists(path)) throw Error(Errc::InvalidConfig, "no preset '" + name + "' in " + dir.string());
  return RunConfig::load(path);
}

std::filesystem::path default_preset_dir() {
  if (const char* dir = std::getenv("IRKSINDY_PRESET_DIR"); dir && *dir) return dir;
  return IRKSINDY_PRESET_DIR;
}

// --- command line --------------------------------------------------------------

namespace {

enum class Phase { setup, integration, training };

int exit_code(const Error& e, Phase phase) {
  switch (e.code()) {
    case Errc::IntegrationFailure:
      return exit_integration;
    case Errc::NonConvergence:
    case Errc::SingularJacobian:
    case Errc::NonFiniteValue:
      if (phase == Phase::training) return exit_training;
      if (phase == Phase::integration) return exit_integration;
      return exit_config;
    default:
      return exit_config;
  }
}

/// `--key value` and `--key=value` pairs left over after CLI11 parsing.
void apply_overrides(RunConfig& config, const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& arg = args[i];
    if (arg.rfind("--", 0) != 0) throw Error(Errc::InvalidConfig, "unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 >= args.size()) throw Error(Errc::InvalidConfig, "missing value for '" + arg + "'");
      value = args[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    config.set(key, value);
  }
}

void write_comparison(const std::filesystem::path& dir, const Comparison& cmp) {
  for (std::size_t i = 0; i < cmp.reference.size(); ++i) {
    save_dataset(cmp.reference[i], dir / ("reference_" + std::to_string(i) + ".csv"));
    save_dataset(cmp.discovered[i], dir / ("discovered_" + std::to_string(i) + ".csv"));
  }
  write_metrics(dir / "metrics.csv", cmp.metrics);
}

void print_metrics(std::ostream& out, const Metrics& m) {
  out << "support precision " << format(m.support_precision) << ", recall " << format(m.support_recall)
      << (m.support_exact ? " (exact)" : "") << "\n";
  out << "coefficient max error " << format(m.coefficient_max_error) << "\n";
  out << "trajectory rmse " << format(m.trajectory_rmse) << "\n";
}

CoefficientTable discovered_table(const DiscoveredModel& model, const RunConfig& config) {
  if (config.get("scaling") == "full_standardize")
    throw Error(Errc::UnsupportedScalingMode, "standardized coefficients cannot be simulated in original coordinates");
  return {model.library, model.coefficients()};
}

int cmd_tableau(const RunConfig& config, std::ostream& out) {
  const auto tab = config.tableau();
  std::ostringstream text;
  const int order = config.method() == Method::rk4_baseline ? 4 : 2 * static_cast<int>(tab.stages());
  text << "# stages " << tab.stages() << ", order " << order << ", order-condition residual "
       << format(verify_order_conditions(tab, order)) << "\n";
  text << "c,b";
  for (Eigen::Index j = 0; j < tab.stages(); ++j) text << ",a" << j + 1;
  text << "\n";
  for (Eigen::Index i = 0; i < tab.stages(); ++i) {
    text << format(tab.c(i)) << "," << format(tab.b(i));
    for (Eigen::Index j = 0; j < tab.stages(); ++j) text << "," << format(tab.A(i, j));
    text << "\n";
  }
  if (config.has("out")) {
    std::ofstream file = open_output(config.get("out"));
    file << text.str();
  } else {
    out << text.str();
  }
  return exit_ok;
}

int cmd_generate(const RunConfig& config, std::ostream& out, Phase& phase) {
  config.require({"model", "out"});
  reference_model(config.get("model"));
  phase = Phase::integration;
  const Dataset ds = generate_data(config);
  phase = Phase::setup;
  save_dataset(ds, config.get("out"));
  out << "wrote " << ds.samples() << " samples to " << config.get("out") << "\n";
  return exit_ok;
}

int run_discovery(const RunConfig& config, const Dataset& ds, std::ostream& out, Phase& phase,
                  DiscoveredModel& model) {
  const std::filesystem::path dir = config.get("out_dir");
  config.sindy();
  phase = Phase::training;
  model = discover(config, ds);
  phase = Phase::setup;
  const Eigen::MatrixXd coeffs = model.scaling ? model.coefficients() : model.xi_star.xi;
  write_coefficients(dir / "coefficients.csv", *model.library, coeffs);
  write_history(dir / "history.csv", model.training_history);
  write_summary(dir / "summary.txt", config, model);
  for (std::size_t j = 0; j < model.term_report.size(); ++j) {
    out << "dx" << j + 1 << " =";
    if (model.term_report[j].empty()) out << " 0";
    for (const auto& tc : model.term_report[j]) out << " " << (tc.value < 0 ? "- " : "+ ") << format(std::abs(tc.value)) << " " << tc.term;
    out << "\n";
  }
  if (model.all_terms_eliminated) out << "all terms eliminated\n";
  return exit_ok;
}

int cmd_discover(const RunConfig& config, std::ostream& out, Phase& phase) {
  config.require({"data"});
  const Dataset ds = training_data(config);
  if (ds.intervals() < 1) throw Error(Errc::EmptyDataset, "dataset needs at least two samples");
  DiscoveredModel model;
  return run_discovery(config, ds, out, phase, model);
}

int cmd_simulate(const RunConfig& config, std::ostream& out, Phase& phase) {
  config.require({"coefficients", "out"});
  const CoefficientTable table = read_coefficients(config.get("coefficients"));
  Eigen::VectorXd fallback = Eigen::VectorXd::Zero(table.library->dimension());
  double t0 = 0.0, t1 = 1.0;
  if (config.has("model")) {
    const ReferenceModel model = reference_model(config.get("model"));
    fallback = model.default_x0;
    t0 = model.default_t0;
    t1 = model.default_t1;
  }
  const Horizon hz = horizon(config, fallback, t0, t1);
  if (hz.initial_conditions.size() != 1) throw config_error("sim_x0", "simulate takes one initial condition");
  phase = Phase::integration;
  const Dataset ds = simulate(table, hz.initial_conditions.front(), hz.t0, hz.t1, hz.m);
  phase = Phase::setup;
  save_dataset(ds, config.get("out"));
  out << "wrote " << ds.samples() << " samples to " << config.get("out") << "\n";
  return exit_ok;
}

int cmd_compare(const RunConfig& config, std::ostream& out, Phase& phase) {
  config.require({"coefficients", "model"});
  const CoefficientTable table = read_coefficients(config.get("coefficients"));
  reference_model(config.get("model"));
  phase = Phase::integration;
  const Comparison cmp = compare(config, table);
  phase = Phase::setup;
  write_comparison(config.get("out_dir"), cmp);
  print_metrics(out, cmp.metrics);
  return exit_ok;
}

int cmd_preset(const RunConfig& config, std::ostream& out, Phase& phase) {
  const std::filesystem::path dir = config.get("out_dir");
  phase = Phase::integration;
  const Dataset ds = training_data(config);
  phase = Phase::setup;
  save_dataset(ds, dir / "data.csv");
  DiscoveredModel model;
  run_discovery(config, ds, out, phase, model);
  if (!config.has("model") || config.has("data")) return exit_ok;
  const CoefficientTable table = discovered_table(model, config);
  phase = Phase::integration;
  const Comparison cmp = compare(config, table);
  phase = Phase::setup;
  write_comparison(dir, cmp);
  print_metrics(out, cmp.metrics);
  return exit_ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discover ODEs from trajectories with implicit Runge-Kutta sparse regression"};
  app.require_subcommand(1);
  std::string config_path;
  std::string preset_name;
  std::string preset_dir = default_preset_dir().string();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"tableau", "Print the Butcher tableau for the configured stages"},
      {"generate", "Write a reference-model trajectory CSV"},
      {"discover", "Fit a sparse model to a trajectory CSV"},
      {"simulate", "Integrate a discovered model from a coefficient CSV"},
      {"compare", "Simulate discovered and reference models and write metrics"},
      {"preset", "Run a checked-in experiment end to end"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->footer("Any configuration key may be given as --key value.");
  }
  CLI::App* preset = app.get_subcommand("preset");
  preset->add_option("--name", preset_name, "preset name")->required();
  preset->add_option("--preset-dir", preset_dir, "directory holding <name>.cfg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  Phase phase = Phase::setup;
  try {
    RunConfig config;
    if (name == "preset") config = load_preset(preset_name, preset_dir);
    if (!config_path.empty()) config.merge(read_config_text(config_path), config_path);
    apply_overrides(config, sub->remaining());
    config.apply_environment();

    if (name == "tableau") return cmd_tableau(config, out);
    if (name == "generate") return cmd_generate(config, out, phase);
    if (name == "discover") return cmd_discover(config, out, phase);
    if (name == "simulate") return cmd_simulate(config, out, phase);
    if (name == "compare") return cmd_compare(config, out, phase);
    return cmd_preset(config, out, phase);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e, phase);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }
}

}  // namespace irksindy::cli
