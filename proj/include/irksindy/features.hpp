#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irksindy/error.hpp"

namespace irksindy {

/// Construction choices for a candidate-function library.
struct LibrarySpec {
  int dimension = 1;
  int poly_degree = 1;
  bool include_constant = true;
  std::vector<double> trig_frequencies;
  std::vector<double> exp_rates;
};

inline constexpr int kMaxPolyDegree = 10;

enum class TermKind { constant, monomial, sine, cosine, exponential };

/// One library column. Monomials carry per-coordinate powers; the sine,
/// cosine and exponential kinds act on a single coordinate with a
/// frequency/rate parameter.
struct Term {
  TermKind kind = TermKind::constant;
  std::vector<int> powers;
  int coord = 0;
  double param = 0.0;

  int degree() const;
  bool operator==(const Term&) const = default;
};

std::string term_name(const Term& term);

/// Inverse of term_name for a library of the given dimension.
Term parse_term(const std::string& name, int dimension);

/// Ordered, immutable candidate-function library.
class Library {
 public:
  /// Library with an explicit term list (e.g. read back from a coefficient file).
  Library(int dimension, std::vector<Term> terms);

  int dimension() const { return dim_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(terms_.size()); }
  const std::vector<Term>& terms() const { return terms_; }
  const std::vector<std::string>& names() const { return names_; }
  bool is_polynomial() const;

  /// Feature row Phi(x), length p.
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> evaluate(
      const Eigen::MatrixBase<Derived>& x) const;

  /// p x d matrix of partial derivatives dPhi_j/dx_i.
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> jacobian(
      const Eigen::MatrixBase<Derived>& x) const;

  /// Row-wise evaluation: n x d states to n x p features.
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& states) const;

 private:
  template <typename Derived>
  void check_dimension(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dim_)
      throw Error(Errc::DimensionMismatch, "state has length " + std::to_string(x.size()) +
                                               ", library expects " + std::to_string(dim_));
  }

  int dim_;
  std::vector<Term> terms_;
  std::vector<std::string> names_;
};

/// Library in canonical order: constant, monomials by graded lexicographic
/// order, then sine, cosine and exponential blocks sorted by (parameter,
/// coordinate).
Library build_library(const LibrarySpec& spec);

/// Number of terms the spec produces without building the library.
Eigen::Index library_size(const LibrarySpec& spec);

// ---------------------------------------------------------------------------

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> Library::evaluate(
    const Eigen::MatrixBase<Derived>& x) const {
  using Scalar = typename Derived::Scalar;
  using std::cos;
  using std::exp;
  using std::sin;
  check_dimension(x);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row(size());
  for (Eigen::Index j = 0; j < size(); ++j) {
    const Term& t = terms_[static_cast<std::size_t>(j)];
    switch (t.kind) {
      case TermKind::constant: row(j) = Scalar(1); break;
      case TermKind::monomial: {
        Scalar v(1);
        for (int i = 0; i < dim_; ++i)
          for (int k = 0; k < t.powers[static_cast<std::size_t>(i)]; ++k) v *= x(i);
        row(j) = v;
        break;
      }
      case TermKind::sine: row(j) = sin(Scalar(t.param) * x(t.coord)); break;
      case TermKind::cosine: row(j) = cos(Scalar(t.param) * x(t.coord)); break;
      case TermKind::exponential: row(j) = exp(Scalar(t.param) * x(t.coord)); break;
    }
  }
  return row;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> Library::jacobian(
    const Eigen::MatrixBase<Derived>& x) const {
  using Scalar = typename Derived::Scalar;
  using std::cos;
  using std::exp;
  using std::sin;
  check_dimension(x);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> jac =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(size(), dim_);
  for (Eigen::Index j = 0; j < size(); ++j) {
    const Term& t = terms_[static_cast<std::size_t>(j)];
    const Scalar w(t.param);
    switch (t.kind) {
      case TermKind::constant: break;
      case TermKind::monomial:
        for (int i = 0; i < dim_; ++i) {
          const int pi = t.powers[static_cast<std::size_t>(i)];
          if (pi == 0) continue;
          Scalar v(pi);
          for (int l = 0; l < dim_; ++l) {
            const int pl = t.powers[static_cast<std::size_t>(l)] - (l == i ? 1 : 0);
            for (int k = 0; k < pl; ++k) v *= x(l);
          }
          jac(j, i) = v;
        }
        break;
      case TermKind::sine: jac(j, t.coord) = w * cos(w * x(t.coord)); break;
      case TermKind::cosine: jac(j, t.coord) = -w * sin(w * x(t.coord)); break;
      case TermKind::exponential: jac(j, t.coord) = w * exp(w * x(t.coord)); break;
    }
  }
  return jac;
}

}  // namespace irksindy
