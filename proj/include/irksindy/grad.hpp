#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "irksindy/error.hpp"

namespace irksindy::grad {

class Tape;

/// Handle to a matrix-valued node on a Tape.
class Var {
 public:
  Var() = default;

  const Eigen::MatrixXd& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records matrix operations in evaluation order and propagates adjoints in
/// reverse. Each recorded node owns its value; the backward closure receives
/// the node's adjoint and adds contributions to its parents.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Eigen::MatrixXd& adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose adjoint is wanted.
  Var variable(Eigen::MatrixXd value);
  /// Leaf treated as data.
  Var constant(Eigen::MatrixXd value);
  /// Interior node; throws NonFiniteValue if the value is not finite.
  Var record(Eigen::MatrixXd value, Backward backward);

  const Eigen::MatrixXd& value(const Var& v) const { return nodes_[v.id()].value; }

  /// Adds `contribution` to the adjoint of `v`.
  void accumulate(const Var& v, const Eigen::MatrixXd& contribution);

  /// Reverse sweep from a 1x1 output seeded with 1. Nodes are visited once,
  /// newest first; nodes not reachable from the output are skipped.
  void backward(const Var& output);

  /// Adjoint after backward(); zero matrix of the right shape if unreached.
  Eigen::MatrixXd adjoint(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd adjoint;  // empty until first contribution
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Elementary operations. Shapes follow Eigen semantics; mismatches throw
// ShapeMismatch.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(double s, const Var& a);
/// Matrix product.
Var operator*(const Var& a, const Var& b);
Var cwise_product(const Var& a, const Var& b);
Var cwise_quotient(const Var& a, const Var& b);
Var pow(const Var& a, double exponent);
Var sin(const Var& a);
Var cos(const Var& a);
Var exp(const Var& a);
Var tanh(const Var& a);

/// a + 1 * row, for a 1 x n row vector added to every row of a.
Var add_row(const Var& a, const Var& row);
/// diag(scale) * a for a constant column of row weights.
Var scale_rows(const Var& a, const Eigen::VectorXd& scale);
/// Columns [start, start + count).
Var middle_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// Sum of all entries, 1 x 1.
Var sum(const Var& a);
/// Sum of squared entries, 1 x 1.
Var squared_norm(const Var& a);

struct GradientResult {
  double value = 0.0;
  std::vector<Eigen::MatrixXd> gradients;
};

using LossProgram = std::function<Var(Tape&, std::span<const Var>)>;
using LossFunction = std::function<double(std::span<const Eigen::MatrixXd>)>;

/// Reverse-mode gradient of the scalar the program records, with respect to
/// every parameter matrix.
GradientResult gradient(const LossProgram& program, std::span<const Eigen::MatrixXd> parameters);

/// Runs `program` for its value only.
double evaluate(const LossProgram& program, std::span<const Eigen::MatrixXd> parameters);

/// Central differences, one coordinate at a time.
std::vector<Eigen::MatrixXd> finite_difference(const LossFunction& loss,
                                               std::span<const Eigen::MatrixXd> parameters, double step);

/// Largest entry-wise difference of each tensor pair relative to that
/// pair's max-norm (never below `floor`).
double max_relative_error(std::span<const Eigen::MatrixXd> a, std::span<const Eigen::MatrixXd> b,
                          double floor = 1e-8);

}  // namespace irksindy::grad
