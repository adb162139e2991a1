#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "irksindy/error.hpp"
#include "irksindy/features.hpp"
#include "irksindy/tableau.hpp"

namespace irksindy {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Right-hand side f(x) = xi^T Phi(x)^T for a library and a p x d
/// coefficient matrix. Holds a non-owning reference to the library.
template <typename Scalar = double>
class VectorField {
 public:
  VectorField(const Library& lib, MatrixX<Scalar> xi) : lib_(&lib), xi_(std::move(xi)) {
    if (xi_.rows() != lib.size() || xi_.cols() != lib.dimension())
      throw Error(Errc::DimensionMismatch,
                  "coefficient matrix is " + std::to_string(xi_.rows()) + "x" +
                      std::to_string(xi_.cols()) + ", library needs " + std::to_string(lib.size()) +
                      "x" + std::to_string(lib.dimension()));
  }

  const Library& library() const { return *lib_; }
  const MatrixX<Scalar>& coefficients() const { return xi_; }
  int dimension() const { return lib_->dimension(); }

  template <typename Derived>
  VectorX<Scalar> operator()(const Eigen::MatrixBase<Derived>& x) const {
    return (lib_->evaluate(x) * xi_).transpose();
  }

  /// d x d Jacobian, xi^T composed with the analytic library Jacobian.
  template <typename Derived>
  MatrixX<Scalar> jacobian(const Eigen::MatrixBase<Derived>& x) const {
    return xi_.transpose() * lib_->jacobian(x);
  }

 private:
  const Library* lib_;
  MatrixX<Scalar> xi_;
};

enum class StageMethod { fixed_point, newton };

struct SolverSettings {
  StageMethod method = StageMethod::newton;
  double tol = 1e-12;
  int max_iterations = 25;
  /// Keep every iterate (needed to differentiate through fixed-point sweeps).
  bool record_iterates = false;

  static SolverSettings fixed_point() { return {StageMethod::fixed_point, 1e-12, 100, false}; }
  static SolverSettings newton() { return {StageMethod::newton, 1e-12, 25, false}; }
};

/// Stage states chi (s x d), one row per stage.
template <typename Scalar = double>
struct StageValues {
  MatrixX<Scalar> chi;
  int iterations_used = 0;
  Scalar residual = 0;
  /// Iterates chi^0 .. chi^N when SolverSettings::record_iterates is set.
  std::vector<MatrixX<Scalar>> iterates;
};

inline constexpr int kDivergenceWindow = 5;
/// Step halvings tried per damped Newton iteration.
inline constexpr int kMaxHalvings = 10;

namespace detail {

inline std::string format_defect(double r) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << r;
  return os.str();
}

// F(i, :) = f(chi_i)
template <typename Scalar>
MatrixX<Scalar> stage_slopes(const VectorField<Scalar>& f, const MatrixX<Scalar>& chi) {
  MatrixX<Scalar> slopes(chi.rows(), chi.cols());
  for (Eigen::Index i = 0; i < chi.rows(); ++i) slopes.row(i) = f(chi.row(i).transpose()).transpose();
  return slopes;
}

template <typename Scalar>
Scalar max_abs(const MatrixX<Scalar>& m) {
  return m.size() == 0 ? Scalar(0) : m.cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Stage defect chi - (1 x) - h A F(chi), s x d.
template <typename Scalar>
MatrixX<Scalar> stage_defect(const VectorField<Scalar>& f, const VectorX<Scalar>& x, Scalar h,
                             const ButcherTableau<Scalar>& tab, const MatrixX<Scalar>& chi) {
  MatrixX<Scalar> defect = chi - h * tab.A * detail::stage_slopes(f, chi);
  defect.rowwise() -= x.transpose();
  return defect;
}

namespace detail {

/// Damped Newton on the stage equations starting from out.chi.
template <typename Scalar>
void newton_iterate(const VectorField<Scalar>& f, const VectorX<Scalar>& x, Scalar h,
                    const ButcherTableau<Scalar>& tab, const SolverSettings& settings, StageValues<Scalar>& out) {
  const Eigen::Index s = tab.stages();
  const Eigen::Index d = x.size();
  MatrixX<Scalar> defect = stage_defect(f, x, h, tab, out.chi);
  Scalar residual = max_abs<Scalar>(defect);
  const Eigen::Index n = s * d;
  MatrixX<Scalar> jac(n, n);
  int it = 0;
  while (!(residual <= Scalar(settings.tol))) {
    if (it >= settings.max_iterations || !std::isfinite(static_cast<double>(residual)))
      throw Error(Errc::NonConvergence, "Newton iteration stalled at defect " +
                                            detail::format_defect(static_cast<double>(residual)));
    jac.setIdentity();
    for (Eigen::Index j = 0; j < s; ++j) {
      const MatrixX<Scalar> jf = f.jacobian(out.chi.row(j).transpose());
      for (Eigen::Index i = 0; i < s; ++i) jac.block(i * d, j * d, d, d) -= h * tab.A(i, j) * jf;
    }
    Eigen::PartialPivLU<MatrixX<Scalar>> lu(jac);
    // Row-major flattening puts stage i at [i*d, (i+1)*d).
    MatrixX<Scalar> rhs_mat = defect.transpose();
    VectorX<Scalar> rhs = Eigen::Map<VectorX<Scalar>>(rhs_mat.data(), n);
    VectorX<Scalar> delta = lu.solve(rhs);
    if (!delta.allFinite() || lu.rcond() < Scalar(std::numeric_limits<double>::epsilon()))
      throw Error(Errc::SingularJacobian, "stage Jacobian is singular");
    const MatrixX<Scalar> direction = Eigen::Map<MatrixX<Scalar>>(delta.data(), d, s).transpose();
    // Backtrack while the full step increases the defect.
    Scalar scale(1);
    MatrixX<Scalar> trial = out.chi - direction;
    MatrixX<Scalar> trial_defect = stage_defect(f, x, h, tab, trial);
    Scalar trial_residual = max_abs<Scalar>(trial_defect);
    for (int halving = 0; halving < kMaxHalvings && !(trial_residual < residual); ++halving) {
      scale /= Scalar(2);
      trial = out.chi - scale * direction;
      trial_defect = stage_defect(f, x, h, tab, trial);
      trial_residual = max_abs<Scalar>(trial_defect);
    }
    out.chi = std::move(trial);
    ++it;
    if (settings.record_iterates) out.iterates.push_back(out.chi);
    defect = std::move(trial_defect);
    residual = trial_residual;
  }
  out.iterations_used = it;
  out.residual = residual;
}

}  // namespace detail

/// Solve chi_i = x + h sum_j A_ij f(chi_j) starting from chi_i = x.
///
/// Explicit tableaus are evaluated stage by stage regardless of method.
template <typename Scalar>
StageValues<Scalar> solve_stages(const VectorField<Scalar>& f, const VectorX<Scalar>& x, Scalar h,
                                 const ButcherTableau<Scalar>& tab, const SolverSettings& settings) {
  using std::abs;
  const Eigen::Index s = tab.stages();
  const Eigen::Index d = x.size();
  if (d != f.dimension()) throw Error(Errc::DimensionMismatch, "state length does not match field");
  if (!(settings.tol > 0) || settings.max_iterations < 1)
    throw Error(Errc::InvalidConfig, "solver tolerance must be positive and iterations >= 1");

  StageValues<Scalar> out;
  out.chi = x.transpose().replicate(s, 1);
  if (settings.record_iterates) out.iterates.push_back(out.chi);

  if (tab.is_explicit()) {
    MatrixX<Scalar> slopes = MatrixX<Scalar>::Zero(s, d);
    for (Eigen::Index i = 0; i < s; ++i) {
      out.chi.row(i) = x.transpose() + h * (tab.A.row(i) * slopes);
      slopes.row(i) = f(out.chi.row(i).transpose()).transpose();
    }
    out.iterations_used = 1;
    out.residual = detail::max_abs<Scalar>(stage_defect(f, x, h, tab, out.chi));
    if (settings.record_iterates) out.iterates.push_back(out.chi);
    if (!out.chi.allFinite()) throw Error(Errc::NonConvergence, "explicit stages are not finite");
    return out;
  }

  MatrixX<Scalar> defect = stage_defect(f, x, h, tab, out.chi);
  Scalar residual = detail::max_abs<Scalar>(defect);

  if (settings.method == StageMethod::fixed_point) {
    Scalar previous = residual;
    int growth = 0;
    int it = 0;
    while (!(residual <= Scalar(settings.tol))) {
      if (it >= settings.max_iterations || !std::isfinite(static_cast<double>(residual)))
        throw Error(Errc::NonConvergence, "fixed-point iteration stalled at defect " +
                                              detail::format_defect(static_cast<double>(residual)));
      out.chi -= defect;  // chi <- x + h A F(chi)
      ++it;
      if (settings.record_iterates) out.iterates.push_back(out.chi);
      defect = stage_defect(f, x, h, tab, out.chi);
      residual = detail::max_abs<Scalar>(defect);
      growth = residual > previous ? growth + 1 : 0;
      previous = residual;
      if (growth >= kDivergenceWindow)
        throw Error(Errc::NonConvergence, "fixed-point iteration diverging (defect " +
                                              detail::format_defect(static_cast<double>(residual)) + ")");
    }
    out.iterations_used = it;
    out.residual = residual;
    return out;
  }

  try {
    detail::newton_iterate(f, x, h, tab, settings, out);
    return out;
  } catch (const Error& e) {
    if (e.code() != Errc::NonConvergence && e.code() != Errc::SingularJacobian) throw;
    // Continuation in h: follow the stage branch that starts at chi = x.
    for (int pieces : {4, 16, 64}) {
      StageValues<Scalar> path;
      path.chi = x.transpose().replicate(s, 1);
      try {
        int total = 0;
        for (int k = 1; k <= pieces; ++k) {
          detail::newton_iterate(f, x, h * Scalar(k) / Scalar(pieces), tab, settings, path);
          total += path.iterations_used;
        }
        path.iterations_used = total;
        if (settings.record_iterates) path.iterates.insert(path.iterates.begin(), out.iterates.front());
        return path;
      } catch (const Error& retry) {
        if (retry.code() != Errc::NonConvergence && retry.code() != Errc::SingularJacobian) throw;
      }
    }
    throw;
  }
}

/// x + h sum_j b_j f(chi_j) for already solved stages.
template <typename Scalar>
VectorX<Scalar> step_from_stages(const VectorField<Scalar>& f, const VectorX<Scalar>& x, Scalar h,
                                 const ButcherTableau<Scalar>& tab, const MatrixX<Scalar>& chi) {
  return x + h * (tab.b.transpose() * detail::stage_slopes(f, chi)).transpose();
}

/// One Runge-Kutta step; negative h steps backward in time.
template <typename Scalar>
VectorX<Scalar> step(const VectorField<Scalar>& f, const VectorX<Scalar>& x, Scalar h,
                     const ButcherTableau<Scalar>& tab, const SolverSettings& settings) {
  if (h == Scalar(0)) return x;
  const StageValues<Scalar> st = solve_stages(f, x, h, tab, settings);
  return step_from_stages(f, x, h, tab, st.chi);
}

/// Per-stage reconstructions of the interval endpoints: left(i) ~ x(t_k),
/// right(i) ~ x(t_k + h).
template <typename Scalar>
struct StagePredictors {
  MatrixX<Scalar> left;
  MatrixX<Scalar> right;
};

template <typename Scalar>
StagePredictors<Scalar> stage_predictors(const MatrixX<Scalar>& chi, const VectorField<Scalar>& f,
                                         Scalar h, const ButcherTableau<Scalar>& tab) {
  if (chi.rows() != tab.stages() || chi.cols() != f.dimension())
    throw Error(Errc::DimensionMismatch, "stage matrix must be s x d");
  const MatrixX<Scalar> slopes = detail::stage_slopes(f, chi);
  const MatrixX<Scalar> a_f = tab.A * slopes;
  const VectorX<Scalar> b_f = (tab.b.transpose() * slopes).transpose();
  StagePredictors<Scalar> out;
  out.left = chi - h * a_f;
  out.right = chi - h * a_f;
  out.right.rowwise() += h * b_f.transpose();
  return out;
}

}  // namespace irksindy

#include "irksindy/trajectory.hpp"

namespace irksindy {

/// Forward and backward one-step predictions over a dataset.
struct PredictionMatrices {
  Eigen::MatrixXd left;   ///< row k: step(X[k+1], -h_k), compared with X[k]
  Eigen::MatrixXd right;  ///< row k: step(X[k], +h_k), compared with X[k+1]
};

/// Solver failures are rethrown with the offending interval index.
inline PredictionMatrices predict_matrices(const VectorField<double>& f, const Dataset& ds,
                                           const ButcherTableau<double>& tab,
                                           const SolverSettings& settings) {
  const Eigen::Index m = ds.intervals();
  PredictionMatrices out{Eigen::MatrixXd(m, ds.dimension()), Eigen::MatrixXd(m, ds.dimension())};
  for (Eigen::Index k = 0; k < m; ++k) {
    try {
      const Eigen::VectorXd xk = ds.X().row(k).transpose();
      const Eigen::VectorXd xk1 = ds.X().row(k + 1).transpose();
      out.right.row(k) = step(f, xk, ds.h()(k), tab, settings).transpose();
      out.left.row(k) = step(f, xk1, -ds.h()(k), tab, settings).transpose();
    } catch (const Error& e) {
      throw Error(e.code(), "interval " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace irksindy
