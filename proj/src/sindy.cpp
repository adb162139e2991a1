#include "irksindy/sindy.hpp"

#include <cmath>
#include <string>

namespace irksindy {

CoefficientMatrix::CoefficientMatrix(Eigen::MatrixXd values)
    : xi(std::move(values)), active(Mask::Constant(xi.rows(), xi.cols(), true)) {}

CoefficientMatrix CoefficientMatrix::zeros(Eigen::Index p, Eigen::Index d) {
  return CoefficientMatrix(Eigen::MatrixXd::Zero(p, d));
}

void SindyConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (!(alpha >= 0 && alpha <= 1)) fail("alpha must lie in [0, 1]");
  if (!(lambda >= 0 && lambda < 1)) fail("lambda must lie in [0, 1)");
  if (!(l1_weight >= 0)) fail("l1_weight must be non-negative");
  if (!(lr_xi > 0) || !(lr_theta > 0)) fail("learning rates must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) fail("lr_decay must lie in (0, 1]");
  if (thresholding_iterations < 1) fail("thresholding_iterations must be at least 1");
  if (epochs_first < 0 || epochs_rest < 0) fail("epoch budgets must be non-negative");
  if (stages < 1 || stages > kMaxGaussStages) fail("stages out of range");
  if (!(solver.tol > 0) || solver.max_iterations < 1) fail("solver tolerance and iteration limit must be positive");
  if (grad_mode == GradMode::unrolled && solver.method != StageMethod::fixed_point)
    fail("unrolled gradients need the fixed-point stage solver");
}

// --- optimizer and thresholding ----------------------------------------------

void adam_step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grads, AdamState& state, double lr, const Mask* mask) {
  if (grads.rows() != params.rows() || grads.cols() != params.cols() ||
      state.first_moment.rows() != params.rows() || state.first_moment.cols() != params.cols() ||
      state.second_moment.rows() != params.rows() || state.second_moment.cols() != params.cols())
    throw Error(Errc::ShapeMismatch, "Adam parameters, gradients and moments must share a shape");
  if (mask && (mask->rows() != params.rows() || mask->cols() != params.cols()))
    throw Error(Errc::ShapeMismatch, "Adam mask shape differs from parameters");
  ++state.step_count;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (Eigen::Index j = 0; j < params.cols(); ++j) {
    for (Eigen::Index i = 0; i < params.rows(); ++i) {
      if (mask && !(*mask)(i, j)) {
        state.first_moment(i, j) = 0.0;
        state.second_moment(i, j) = 0.0;
        continue;
      }
      const double g = grads(i, j);
      double& m = state.first_moment(i, j);
      double& v = state.second_moment(i, j);
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g * g;
      params(i, j) -= lr * (m / c1) / (std::sqrt(v / c2) + state.eps);
    }
  }
}

CoefficientMatrix threshold(const CoefficientMatrix& xi, double lambda) {
  if (!(lambda >= 0)) throw Error(Errc::InvalidParameter, "threshold must be non-negative");
  CoefficientMatrix out = xi;
  for (Eigen::Index j = 0; j < out.xi.cols(); ++j)
    for (Eigen::Index i = 0; i < out.xi.rows(); ++i)
      if (!out.active(i, j) || std::abs(out.xi(i, j)) < lambda) {
        out.active(i, j) = false;
        out.xi(i, j) = 0.0;
      }
  return out;
}

double regularize(double loss, const CoefficientMatrix& xi, const SindyConfig& config) {
  if (config.reg == Regularization::none) return loss;
  return loss + config.l1_weight * xi.active.select(xi.xi.cwiseAbs(), 0.0).sum();
}

grad::Var regularize(const grad::Var& loss, const grad::Var& xi, const Mask& active, const SindyConfig& config) {
  if (config.reg == Regularization::none) return loss;
  const Eigen::MatrixXd sign = active.select(xi.value().cwiseSign(), 0.0);
  return loss + config.l1_weight * grad::sum(grad::cwise_product(xi, xi.tape()->constant(sign)));
}

// --- tape operations ---------------------------------------------------------

grad::Var library_rows(const grad::Var& states, const Library& lib) {
  if (states.cols() != lib.dimension())
    throw Error(Errc::DimensionMismatch, "state columns do not match the library dimension");
  return states.tape()->record(lib.evaluate_rows(states.value()),
                               [states, &lib](grad::Tape& t, const Eigen::MatrixXd& g) {
                                 const Eigen::MatrixXd& x = states.value();
                                 Eigen::MatrixXd gx(x.rows(), x.cols());
                                 for (Eigen::Index r = 0; r < x.rows(); ++r)
                                   gx.row(r) = g.row(r) * lib.jacobian(x.row(r));
                                 t.accumulate(states, gx);
                               });
}

namespace {

// Adjoint of y = x + h b^T F(chi) with chi solving the stage equations,
// accumulated into xibar.
void step_adjoint_implicit(const Library& lib, const Eigen::MatrixXd& xi, const Eigen::MatrixXd& chi, double h,
                           const ButcherTableau<double>& tab, const Eigen::RowVectorXd& ybar,
                           Eigen::MatrixXd& xibar) {
  const Eigen::Index s = tab.stages();
  const Eigen::Index d = chi.cols();
  std::vector<Eigen::RowVectorXd> phi(s);
  std::vector<Eigen::MatrixXd> jf(s);
  for (Eigen::Index j = 0; j < s; ++j) {
    phi[j] = lib.evaluate(chi.row(j));
    jf[j] = xi.transpose() * lib.jacobian(chi.row(j));
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(s * d, s * d);
  Eigen::VectorXd u(s * d);
  for (Eigen::Index j = 0; j < s; ++j) {
    for (Eigen::Index i = 0; i < s; ++i) M.block(i * d, j * d, d, d) -= h * tab.A(i, j) * jf[j];
    u.segment(j * d, d) = h * tab.b(j) * jf[j].transpose() * ybar.transpose();
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M.transpose());
  const Eigen::VectorXd mu = lu.solve(u);
  if (!mu.allFinite()) throw Error(Errc::SingularJacobian, "stage adjoint system is singular");
  for (Eigen::Index j = 0; j < s; ++j) {
    Eigen::RowVectorXd w = h * tab.b(j) * ybar;
    for (Eigen::Index i = 0; i < s; ++i) w += h * tab.A(i, j) * mu.segment(i * d, d).transpose();
    xibar += phi[j].transpose() * w;
  }
}

// Reverse sweep through chi^{n+1} = 1 x + h A F(chi^n), chi^0 = 1 x.
void step_adjoint_unrolled(const Library& lib, const Eigen::MatrixXd& xi,
                           const std::vector<Eigen::MatrixXd>& iterates, double h,
                           const ButcherTableau<double>& tab, const Eigen::RowVectorXd& ybar,
                           Eigen::MatrixXd& xibar) {
  const Eigen::Index s = tab.stages();
  const Eigen::Index d = xi.cols();
  const std::size_t N = iterates.size() - 1;
  Eigen::MatrixXd chibar(s, d);
  {
    const Eigen::MatrixXd& chi = iterates[N];
    for (Eigen::Index j = 0; j < s; ++j) {
      const Eigen::RowVectorXd fbar = h * tab.b(j) * ybar;
      xibar += lib.evaluate(chi.row(j)).transpose() * fbar;
      chibar.row(j) = fbar * (xi.transpose() * lib.jacobian(chi.row(j)));
    }
  }
  for (std::size_t n = N; n-- > 0;) {
    const Eigen::MatrixXd fbar = h * tab.A.transpose() * chibar;
    const Eigen::MatrixXd& chi = iterates[n];
    if (n == 0) {
      for (Eigen::Index j = 0; j < s; ++j) xibar += lib.evaluate(chi.row(j)).transpose() * fbar.row(j);
      break;
    }
    for (Eigen::Index j = 0; j < s; ++j) {
      xibar += lib.evaluate(chi.row(j)).transpose() * fbar.row(j);
      chibar.row(j) = fbar.row(j) * (xi.transpose() * lib.jacobian(chi.row(j)));
    }
  }
}

struct SolvedSteps {
  // Entry k: stages of the backward step from X[k+1]; entry m + k: forward
  // step from X[k].
  std::vector<StageValues<double>> stages;
  std::vector<double> h;
};

}  // namespace

grad::Var irk_predictions(const grad::Var& xi, const Library& lib, const Dataset& ds,
                          const ButcherTableau<double>& tab, const SolverSettings& solver, GradMode mode) {
  const Eigen::Index m = ds.intervals();
  const Eigen::Index d = ds.dimension();
  if (m < 1) throw Error(Errc::EmptyDataset, "dataset needs at least two samples");
  if (d != lib.dimension()) throw Error(Errc::DimensionMismatch, "dataset and library dimensions differ");
  const bool unrolled = mode == GradMode::unrolled && !tab.is_explicit();
  if (unrolled && solver.method != StageMethod::fixed_point)
    throw Error(Errc::InvalidConfig, "unrolled gradients need the fixed-point stage solver");
  SolverSettings settings = solver;
  settings.record_iterates = unrolled;

  const VectorField<double> f(lib, xi.value());
  auto solved = std::make_shared<SolvedSteps>();
  solved->stages.resize(2 * m);
  solved->h.resize(2 * m);
  Eigen::MatrixXd out(2 * m, d);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::VectorXd xk = ds.X().row(k).transpose();
    const Eigen::VectorXd xk1 = ds.X().row(k + 1).transpose();
    const double hk = ds.h()(k);
    try {
      solved->stages[k] = solve_stages(f, xk1, -hk, tab, settings);
      solved->stages[m + k] = solve_stages(f, xk, hk, tab, settings);
    } catch (const Error& e) {
      throw Error(e.code(), "interval " + std::to_string(k) + ": " + e.what());
    }
    solved->h[k] = -hk;
    solved->h[m + k] = hk;
    out.row(k) = step_from_stages(f, xk1, -hk, tab, solved->stages[k].chi).transpose();
    out.row(m + k) = step_from_stages(f, xk, hk, tab, solved->stages[m + k].chi).transpose();
  }

  return xi.tape()->record(std::move(out), [xi, &lib, tab, solved, unrolled](grad::Tape& t,
                                                                              const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& coeffs = xi.value();
    Eigen::MatrixXd xibar = Eigen::MatrixXd::Zero(coeffs.rows(), coeffs.cols());
    for (std::size_t r = 0; r < solved->stages.size(); ++r) {
      const Eigen::RowVectorXd ybar = g.row(static_cast<Eigen::Index>(r));
      if (ybar.isZero(0.0)) continue;
      if (unrolled)
        step_adjoint_unrolled(lib, coeffs, solved->stages[r].iterates, solved->h[r], tab, ybar, xibar);
      else
        step_adjoint_implicit(lib, coeffs, solved->stages[r].chi, solved->h[r], tab, ybar, xibar);
    }
    t.accumulate(xi, xibar);
  });
}

// --- losses ------------------------------------------------------------------

namespace {

void check_inputs(const Eigen::MatrixXd& xi, const Library& lib, const Dataset& ds) {
  if (ds.intervals() < 1) throw Error(Errc::EmptyDataset, "dataset needs at least two samples");
  if (ds.dimension() != lib.dimension())
    throw Error(Errc::DimensionMismatch, "dataset has " + std::to_string(ds.dimension()) +
                                             " states, library expects " + std::to_string(lib.dimension()));
  if (xi.rows() != lib.size() || xi.cols() != lib.dimension())
    throw Error(Errc::DimensionMismatch, "coefficient matrix must be " + std::to_string(lib.size()) + "x" +
                                             std::to_string(lib.dimension()));
}

grad::Var record_loss_irk(grad::Tape& tape, const grad::Var& xi, const Library& lib, const Dataset& ds,
                          const ButcherTableau<double>& tab, const SindyConfig& config) {
  const Eigen::Index m = ds.intervals();
  const grad::Var pred = irk_predictions(xi, lib, ds, tab, config.solver, config.grad_mode);
  Eigen::MatrixXd target(2 * m, ds.dimension());
  target << ds.left(), ds.right();
  Eigen::VectorXd w(2 * m);
  w << Eigen::VectorXd::Constant(m, std::sqrt(config.alpha)), Eigen::VectorXd::Constant(m, std::sqrt(1.0 - config.alpha));
  return grad::squared_norm(grad::scale_rows(pred - tape.constant(std::move(target)), w));
}

}  // namespace

double loss_irk(const Eigen::MatrixXd& xi, const Library& lib, const Dataset& ds, const ButcherTableau<double>& tab,
                const SindyConfig& config) {
  check_inputs(xi, lib, ds);
  const PredictionMatrices pred = predict_matrices(VectorField<double>(lib, xi), ds, tab, config.solver);
  const double value = config.alpha * (ds.left() - pred.left).squaredNorm() +
                       (1.0 - config.alpha) * (ds.right() - pred.right).squaredNorm();
  if (!std::isfinite(value)) throw Error(Errc::NonFiniteValue, "loss is not finite");
  return value;
}

grad::GradientResult loss_irk_gradient(const Eigen::MatrixXd& xi, const Library& lib, const Dataset& ds,
                                       const ButcherTableau<double>& tab, const SindyConfig& config) {
  check_inputs(xi, lib, ds);
  const Eigen::MatrixXd params[] = {xi};
  return grad::gradient(
      [&](grad::Tape& tape, std::span<const grad::Var> v) { return record_loss_irk(tape, v[0], lib, ds, tab, config); },
      params);
}

grad::Var record_loss_deep(grad::Tape& tape, const grad::Var& xi, std::span<const grad::Var> theta,
                           const MlpParams& net, const Library& lib, const Dataset& ds,
                           const ButcherTableau<double>& tab, double alpha) {
  const Eigen::Index m = ds.intervals();
  const int d = ds.dimension();
  const Eigen::Index s = tab.stages();
  if (net.stages != s || net.state_dim != d)
    throw Error(Errc::InvalidArchitecture, "network predicts " + std::to_string(net.stages) + " stages of width " +
                                               std::to_string(net.state_dim) + ", need " + std::to_string(s) +
                                               " of width " + std::to_string(d));
  const Eigen::MatrixXd inputs = encode_inputs(net, ds.t().head(m), ds.left());
  const grad::Var out = record_forward(tape, net, theta, inputs);

  std::vector<grad::Var> chi(s);
  std::vector<grad::Var> slopes(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    chi[i] = grad::middle_cols(out, i * d, d);
    slopes[i] = library_rows(chi[i], lib) * xi;
  }
  const grad::Var left_target = tape.constant(ds.left());
  const grad::Var right_target = tape.constant(ds.right());
  const Eigen::VectorXd& h = ds.h();

  grad::Var left_sum;
  grad::Var right_sum;
  for (Eigen::Index i = 0; i < s; ++i) {
    grad::Var a_f = tab.A(i, 0) * slopes[0];
    grad::Var ba_f = (tab.b(0) - tab.A(i, 0)) * slopes[0];
    for (Eigen::Index j = 1; j < s; ++j) {
      a_f = a_f + tab.A(i, j) * slopes[j];
      ba_f = ba_f + (tab.b(j) - tab.A(i, j)) * slopes[j];
    }
    const grad::Var l = grad::squared_norm(chi[i] - grad::scale_rows(a_f, h) - left_target);
    const grad::Var r = grad::squared_norm(chi[i] + grad::scale_rows(ba_f, h) - right_target);
    left_sum = i == 0 ? l : left_sum + l;
    right_sum = i == 0 ? r : right_sum + r;
  }
  return alpha * left_sum + (1.0 - alpha) * right_sum;
}

namespace {

std::vector<Eigen::MatrixXd> deep_parameters(const Eigen::MatrixXd& xi, const MlpParams& theta) {
  std::vector<Eigen::MatrixXd> params{xi};
  for (auto& t : theta.tensors()) params.push_back(std::move(t));
  return params;
}

}  // namespace

double loss_deep(const Eigen::MatrixXd& xi, const MlpParams& theta, const Library& lib, const Dataset& ds,
                 const ButcherTableau<double>& tab, const SindyConfig& config) {
  check_inputs(xi, lib, ds);
  const auto params = deep_parameters(xi, theta);
  return grad::evaluate(
      [&](grad::Tape& tape, std::span<const grad::Var> v) {
        return record_loss_deep(tape, v[0], v.subspan(1), theta, lib, ds, tab, config.alpha);
      },
      params);
}

grad::GradientResult loss_deep_gradient(const Eigen::MatrixXd& xi, const MlpParams& theta, const Library& lib,
                                        const Dataset& ds, const ButcherTableau<double>& tab,
                                        const SindyConfig& config) {
  check_inputs(xi, lib, ds);
  const auto params = deep_parameters(xi, theta);
  return grad::gradient(
      [&](grad::Tape& tape, std::span<const grad::Var> v) {
        return record_loss_deep(tape, v[0], v.subspan(1), theta, lib, ds, tab, config.alpha);
      },
      params);
}

// --- discovery ---------------------------------------------------------------

Eigen::MatrixXd DiscoveredModel::coefficients() const {
  if (scaling) return rescale_coefficients(xi_star.xi, *scaling, *library);
  return xi_star.xi;
}

void refresh_report(DiscoveredModel& model) {
  const Eigen::MatrixXd coeffs = model.coefficients();
  const auto& names = model.library->names();
  model.term_report.assign(coeffs.cols(), {});
  for (Eigen::Index j = 0; j < coeffs.cols(); ++j)
    for (Eigen::Index i = 0; i < coeffs.rows(); ++i)
      if (model.xi_star.active(i, j) && model.xi_star.xi(i, j) != 0.0)
        model.term_report[j].push_back({names[i], coeffs(i, j)});
  model.all_terms_eliminated = !(model.xi_star.active && (model.xi_star.xi.array() != 0.0)).any();
}

namespace {

void check_discovery(const Dataset& ds, const std::shared_ptr<const Library>& lib, const SindyConfig& config) {
  config.validate();
  if (!lib) throw Error(Errc::EmptyLibrary, "no library given");
  if (ds.intervals() < 1) throw Error(Errc::EmptyDataset, "dataset needs at least two samples");
  if (ds.dimension() != lib->dimension())
    throw Error(Errc::DimensionMismatch, "dataset and library dimensions differ");
}

CoefficientMatrix initial_coefficients(const Library& lib, const WarmStart& start) {
  if (!start.xi) return CoefficientMatrix::zeros(lib.size(), lib.dimension());
  if (start.xi->rows() != lib.size() || start.xi->cols() != lib.dimension())
    throw Error(Errc::DimensionMismatch, "initial coefficients do not match the library");
  return CoefficientMatrix(*start.xi);
}

void mask_gradient(Eigen::MatrixXd& g, const Mask& active) { g = active.select(g, 0.0); }

constexpr int kMaxStepRejections = 30;

}  // namespace

DiscoveredModel discover_irk(const Dataset& ds, std::shared_ptr<const Library> lib, const ButcherTableau<double>& tab,
                             const SindyConfig& config, const EpochObserver& observer, const WarmStart& start) {
  check_discovery(ds, lib, config);
  DiscoveredModel model;
  model.library = lib;
  CoefficientMatrix cm = initial_coefficients(*lib, start);
  AdamState adam(cm.terms(), cm.dimension());
  double lr = config.lr_xi;
  int epoch = 0;

  auto evaluate = [&] {
    const Eigen::MatrixXd params[] = {cm.xi};
    return grad::gradient(
        [&](grad::Tape& tape, std::span<const grad::Var> v) {
          return regularize(record_loss_irk(tape, v[0], *lib, ds, tab, config), v[0], cm.active, config);
        },
        params);
  };

  // State before the most recent Adam update, for step rejection.
  Eigen::MatrixXd last_xi;
  Eigen::MatrixXd last_grad;
  AdamState last_adam;
  double last_lr = 0.0;

  for (int round = 0; round < config.thresholding_iterations; ++round) {
    const int epochs = round == 0 ? config.epochs_first : config.epochs_rest;
    for (int e = 0; e < epochs; ++e, ++epoch) {
      grad::GradientResult res;
      for (int retry = 0;; ++retry) {
        try {
          res = evaluate();
          break;
        } catch (const Error& err) {
          const bool solver_failure = err.code() == Errc::NonConvergence || err.code() == Errc::SingularJacobian;
          if (!solver_failure || epoch == 0 || retry >= kMaxStepRejections) throw;
          // The last update left the region where the stages are solvable;
          // redo it with half the step.
          cm.xi = last_xi;
          adam = last_adam;
          last_lr *= 0.5;
          adam_step(cm.xi, last_grad, adam, last_lr, &cm.active);
          cm.xi = cm.active.select(cm.xi, 0.0);
        }
      }
      model.training_history.push_back(res.value);
      if (observer) observer(epoch, res.value);
      mask_gradient(res.gradients[0], cm.active);
      last_xi = cm.xi;
      last_grad = res.gradients[0];
      last_adam = adam;
      last_lr = lr;
      adam_step(cm.xi, res.gradients[0], adam, lr, &cm.active);
    }
    cm = threshold(cm, config.lambda);
    lr *= config.lr_decay;
  }
  model.xi_star = std::move(cm);
  refresh_report(model);
  return model;
}

MlpParams init_stage_network(const Dataset& ds, const Architecture& arch, int stages) {
  InputEncoding enc;
  enc.use_time = arch.use_time;
  enc.t_lo = ds.t()(0);
  enc.t_hi = ds.t()(ds.samples() - 1);
  if (!(enc.t_hi > enc.t_lo)) {
    enc.t_lo = -1.0;
    enc.t_hi = 1.0;
  }
  return init_mlp(layer_sizes(arch, stages, ds.dimension()), arch.activation, arch.seed, stages, ds.dimension(),
                  arch.omega0, enc);
}

DiscoveredModel discover_deep(const Dataset& ds, std::shared_ptr<const Library> lib, const ButcherTableau<double>& tab,
                              const SindyConfig& config, const Architecture& arch, const EpochObserver& observer,
                              const WarmStart& start) {
  check_discovery(ds, lib, config);
  MlpParams net = start.theta ? *start.theta : init_stage_network(ds, arch, static_cast<int>(tab.stages()));
  if (net.stages != tab.stages() || net.state_dim != ds.dimension())
    throw Error(Errc::InvalidArchitecture, "network output width must be s*d");

  DiscoveredModel model;
  model.library = lib;
  CoefficientMatrix cm = initial_coefficients(*lib, start);
  AdamState adam_xi(cm.terms(), cm.dimension());
  std::vector<Eigen::MatrixXd> theta = net.tensors();
  std::vector<AdamState> adam_theta;
  for (const auto& t : theta) adam_theta.emplace_back(t.rows(), t.cols());
  double lr_xi = config.lr_xi;
  double lr_theta = config.lr_theta;
  int epoch = 0;

  for (int round = 0; round < config.thresholding_iterations; ++round) {
    const int epochs = round == 0 ? config.epochs_first : config.epochs_rest;
    for (int e = 0; e < epochs; ++e, ++epoch) {
      net.set_tensors(theta);
      const auto params = deep_parameters(cm.xi, net);
      grad::GradientResult res = grad::gradient(
          [&](grad::Tape& tape, std::span<const grad::Var> v) {
            const grad::Var loss = record_loss_deep(tape, v[0], v.subspan(1), net, *lib, ds, tab, config.alpha);
            return regularize(loss, v[0], cm.active, config);
          },
          params);
      model.training_history.push_back(res.value);
      if (observer) observer(epoch, res.value);
      mask_gradient(res.gradients[0], cm.active);
      adam_step(cm.xi, res.gradients[0], adam_xi, lr_xi, &cm.active);
      for (std::size_t k = 0; k < theta.size(); ++k) adam_step(theta[k], res.gradients[k + 1], adam_theta[k], lr_theta);
    }
    cm = threshold(cm, config.lambda);
    lr_xi *= config.lr_decay;
    lr_theta *= config.lr_decay;
  }
  net.set_tensors(theta);
  model.xi_star = std::move(cm);
  model.theta = std::move(net);
  refresh_report(model);
  return model;
}

Eigen::MatrixXd solved_stage_targets(const VectorField<double>& f, const Dataset& ds,
                                     const ButcherTableau<double>& tab, const SolverSettings& solver) {
  const Eigen::Index m = ds.intervals();
  const Eigen::Index s = tab.stages();
  const int d = ds.dimension();
  Eigen::MatrixXd targets(m, s * d);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::MatrixXd chi = solve_stages(f, Eigen::VectorXd(ds.X().row(k).transpose()), ds.h()(k), tab, solver).chi;
    for (Eigen::Index i = 0; i < s; ++i) targets.block(k, i * d, 1, d) = chi.row(i);
  }
  return targets;
}

double fit_stage_network(MlpParams& net, const Dataset& ds, const Eigen::MatrixXd& targets, int epochs, double lr) {
  const Eigen::Index m = ds.intervals();
  if (targets.rows() != m || targets.cols() != net.stages * net.state_dim)
    throw Error(Errc::ShapeMismatch, "stage targets must be m x s*d");
  const Eigen::MatrixXd inputs = encode_inputs(net, ds.t().head(m), ds.left());
  std::vector<Eigen::MatrixXd> theta = net.tensors();
  std::vector<AdamState> adam;
  for (const auto& t : theta) adam.emplace_back(t.rows(), t.cols());
  const double scale = 1.0 / static_cast<double>(targets.size());
  for (int e = 0; e < epochs; ++e) {
    const grad::GradientResult res = parameter_gradient(net, inputs, [&](grad::Tape& tape, const grad::Var& out) {
      return scale * grad::squared_norm(out - tape.constant(targets));
    });
    for (std::size_t k = 0; k < theta.size(); ++k) adam_step(theta[k], res.gradients[k], adam[k], lr);
    net.set_tensors(theta);
  }

  const Eigen::MatrixXd hidden = hidden_features(net, inputs);
  Eigen::MatrixXd design(m, hidden.cols() + 1);
  design << hidden, Eigen::VectorXd::Ones(m);
  const Eigen::MatrixXd head = design.completeOrthogonalDecomposition().solve(targets);
  net.weights.back() = head.topRows(hidden.cols());
  net.biases.back() = head.bottomRows(1);
  return (forward_batch(net, inputs) - targets).squaredNorm() * scale;
}

}  // namespace irksindy
