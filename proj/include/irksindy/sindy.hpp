#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "irksindy/dataset.hpp"
#include "irksindy/features.hpp"
#include "irksindy/grad.hpp"
#include "irksindy/irk.hpp"
#include "irksindy/net.hpp"
#include "irksindy/tableau.hpp"
#include "irksindy/trajectory.hpp"

namespace irksindy {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Coefficients xi (p x d) with the set of terms still allowed to be nonzero.
struct CoefficientMatrix {
  Eigen::MatrixXd xi;
  Mask active;

  CoefficientMatrix() = default;
  /// Takes xi as given; every entry starts active.
  explicit CoefficientMatrix(Eigen::MatrixXd values);
  static CoefficientMatrix zeros(Eigen::Index p, Eigen::Index d);

  Eigen::Index terms() const { return xi.rows(); }
  Eigen::Index dimension() const { return xi.cols(); }
  Eigen::Index support_size() const { return active.count(); }
};

enum class Regularization { none, l1 };

/// How gradients pass through the stage solve.
enum class GradMode {
  implicit,  ///< implicit-function adjoint of the converged stage equations
  unrolled,  ///< reverse sweep through every recorded fixed-point iterate
};

struct SindyConfig {
  double alpha = 0.5;
  double lambda = 0.05;
  Regularization reg = Regularization::none;
  double l1_weight = 0.0;
  double lr_xi = 0.01;
  double lr_theta = 1e-3;
  double lr_decay = 0.8;
  int thresholding_iterations = 3;
  int epochs_first = 1000;
  int epochs_rest = 1000;
  SolverSettings solver = SolverSettings::newton();
  GradMode grad_mode = GradMode::implicit;
  int stages = 2;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig on out-of-range fields.
  void validate() const;
};

struct AdamState {
  Eigen::MatrixXd first_moment;
  Eigen::MatrixXd second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(Eigen::Index rows, Eigen::Index cols)
      : first_moment(Eigen::MatrixXd::Zero(rows, cols)), second_moment(Eigen::MatrixXd::Zero(rows, cols)) {}
};

/// One bias-corrected Adam update of `params` in place. Where `mask` is
/// false the parameter is left untouched and both moments are held at zero.
void adam_step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grads, AdamState& state, double lr,
               const Mask* mask = nullptr);

/// Zeroes and deactivates every entry with |xi| < lambda. Inactive entries
/// stay inactive.
CoefficientMatrix threshold(const CoefficientMatrix& xi, double lambda);

/// loss, plus l1_weight * sum |xi| over active entries when reg is l1.
double regularize(double loss, const CoefficientMatrix& xi, const SindyConfig& config);
grad::Var regularize(const grad::Var& loss, const grad::Var& xi, const Mask& active, const SindyConfig& config);

// --- tape operations -------------------------------------------------------

/// Feature rows Phi(states), n x p, differentiable in the states.
grad::Var library_rows(const grad::Var& states, const Library& lib);

/// Stacked one-step predictions [left; right] (2m x d) as functions of xi.
/// The backward pass follows `mode`; unrolled requires the fixed-point
/// solver and is only meaningful for implicit tableaus.
grad::Var irk_predictions(const grad::Var& xi, const Library& lib, const Dataset& ds,
                          const ButcherTableau<double>& tab, const SolverSettings& solver, GradMode mode);

// --- losses ----------------------------------------------------------------

/// alpha ||X_left - left||^2 + (1 - alpha) ||X_right - right||^2 over the
/// one-step predictions of the field Phi(x) xi.
double loss_irk(const Eigen::MatrixXd& xi, const Library& lib, const Dataset& ds, const ButcherTableau<double>& tab,
                const SindyConfig& config);
grad::GradientResult loss_irk_gradient(const Eigen::MatrixXd& xi, const Library& lib, const Dataset& ds,
                                       const ButcherTableau<double>& tab, const SindyConfig& config);

/// Stage-predictor loss with stages supplied by the network: every stage's
/// backward reconstruction is compared with X[k] and every forward
/// reconstruction with X[k+1].
double loss_deep(const Eigen::MatrixXd& xi, const MlpParams& theta, const Library& lib, const Dataset& ds,
                 const ButcherTableau<double>& tab, const SindyConfig& config);
/// Gradients ordered xi, then theta.tensors().
grad::GradientResult loss_deep_gradient(const Eigen::MatrixXd& xi, const MlpParams& theta, const Library& lib,
                                        const Dataset& ds, const ButcherTableau<double>& tab,
                                        const SindyConfig& config);

/// Records loss_deep on a tape. `theta` holds the network tensors as tape
/// variables laid out as MlpParams::tensors().
grad::Var record_loss_deep(grad::Tape& tape, const grad::Var& xi, std::span<const grad::Var> theta,
                           const MlpParams& net, const Library& lib, const Dataset& ds,
                           const ButcherTableau<double>& tab, double alpha);

// --- discovery -------------------------------------------------------------

struct TermCoefficient {
  std::string term;
  double value = 0.0;
};

struct DiscoveredModel {
  std::shared_ptr<const Library> library;
  CoefficientMatrix xi_star;
  std::optional<ScalingInfo> scaling;
  std::vector<double> training_history;
  /// Nonzero terms of each state equation, in library order.
  std::vector<std::vector<TermCoefficient>> term_report;
  bool all_terms_eliminated = false;
  std::optional<MlpParams> theta;

  /// Coefficients in original coordinates (undoes the scaling when set).
  Eigen::MatrixXd coefficients() const;
};

/// Rebuilds term_report and all_terms_eliminated from xi_star.
void refresh_report(DiscoveredModel& model);

/// Called once per epoch with the 0-based epoch index and the loss.
using EpochObserver = std::function<void(int epoch, double loss)>;

/// Optional starting point for the drivers; by default xi starts at zero
/// and the network is freshly initialized.
struct WarmStart {
  std::optional<Eigen::MatrixXd> xi;
  std::optional<MlpParams> theta;
};

/// Sequential thresholding over loss_irk.
DiscoveredModel discover_irk(const Dataset& ds, std::shared_ptr<const Library> lib,
                             const ButcherTableau<double>& tab, const SindyConfig& config,
                             const EpochObserver& observer = {}, const WarmStart& start = {});

/// Joint training of xi and the stage network; thresholding acts on xi only.
DiscoveredModel discover_deep(const Dataset& ds, std::shared_ptr<const Library> lib,
                              const ButcherTableau<double>& tab, const SindyConfig& config,
                              const Architecture& arch, const EpochObserver& observer = {},
                              const WarmStart& start = {});

/// Network whose input encoding spans the dataset's time range.
MlpParams init_stage_network(const Dataset& ds, const Architecture& arch, int stages);

/// Supervised fit of the network to given stage targets (m x s*d rows,
/// segment i = stage i) by Adam, then an exact least-squares solve for the
/// affine head. Returns the final mean squared error.
double fit_stage_network(MlpParams& net, const Dataset& ds, const Eigen::MatrixXd& targets, int epochs,
                         double lr);

/// Exact forward stages of the field over every interval, m x s*d.
Eigen::MatrixXd solved_stage_targets(const VectorField<double>& f, const Dataset& ds,
                                     const ButcherTableau<double>& tab, const SolverSettings& solver);

}  // namespace irksindy
