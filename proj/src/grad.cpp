#include "irksindy/grad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace irksindy::grad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape()) throw Error(Errc::ShapeMismatch, std::string(op) + ": operands on different tapes");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                         "x" + std::to_string(b.cols()));
}

}  // namespace

const Eigen::MatrixXd& Var::value() const { return tape_->value(*this); }

Var Tape::variable(Eigen::MatrixXd value) {
  if (!value.allFinite()) throw Error(Errc::NonFiniteValue, "parameter is not finite");
  nodes_.push_back({std::move(value), {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Eigen::MatrixXd value) {
  nodes_.push_back({std::move(value), {}, nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Eigen::MatrixXd value, Backward backward) {
  if (!value.allFinite())
    throw Error(Errc::NonFiniteValue, "non-finite value while recording node " + std::to_string(nodes_.size()));
  nodes_.push_back({std::move(value), {}, std::move(backward)});
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(const Var& v, const Eigen::MatrixXd& contribution) {
  Node& node = nodes_[v.id()];
  if (node.adjoint.size() == 0)
    node.adjoint = contribution;
  else
    node.adjoint += contribution;
}

void Tape::backward(const Var& output) {
  if (output.rows() != 1 || output.cols() != 1)
    throw Error(Errc::ShapeMismatch, "backward needs a scalar (1x1) output");
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
  nodes_[output.id()].adjoint = Eigen::MatrixXd::Ones(1, 1);
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.adjoint.size() == 0 || !n.backward) continue;
    // Copy: the closure may grow other adjoints but never this node's.
    const Eigen::MatrixXd adj = n.adjoint;
    n.backward(*this, adj);
  }
}

Eigen::MatrixXd Tape::adjoint(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.adjoint.size() == 0) return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

// ---------------------------------------------------------------------------

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "+");
  return a.tape()->record(a.value() + b.value(), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "-");
  return a.tape()->record(a.value() - b.value(), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var operator-(const Var& a) {
  return a.tape()->record(-a.value(), [a](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(a, -g); });
}

Var operator*(double s, const Var& a) {
  return a.tape()->record(s * a.value(), [a, s](Tape& t, const Eigen::MatrixXd& g) { t.accumulate(a, s * g); });
}

Var operator*(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw Error(Errc::ShapeMismatch, "matrix product: inner dimensions " + std::to_string(a.cols()) +
                                         " and " + std::to_string(b.rows()));
  return a.tape()->record(a.value() * b.value(), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g * b.value().transpose());
    t.accumulate(b, a.value().transpose() * g);
  });
}

Var cwise_product(const Var& a, const Var& b) {
  require_same_shape(a, b, "cwise_product");
  return a.tape()->record(a.value().cwiseProduct(b.value()), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var cwise_quotient(const Var& a, const Var& b) {
  require_same_shape(a, b, "cwise_quotient");
  return a.tape()->record(a.value().cwiseQuotient(b.value()), [a, b](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::ArrayXXd inv = b.value().array().inverse();
    t.accumulate(a, (g.array() * inv).matrix());
    t.accumulate(b, (-g.array() * a.value().array() * inv.square()).matrix());
  });
}

Var pow(const Var& a, double exponent) {
  return a.tape()->record(a.value().array().pow(exponent).matrix(),
                          [a, exponent](Tape& t, const Eigen::MatrixXd& g) {
                            t.accumulate(a, (g.array() * exponent *
                                             a.value().array().pow(exponent - 1.0))
                                                .matrix());
                          });
}

Var sin(const Var& a) {
  return a.tape()->record(a.value().array().sin().matrix(), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, (g.array() * a.value().array().cos()).matrix());
  });
}

Var cos(const Var& a) {
  return a.tape()->record(a.value().array().cos().matrix(), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, (-g.array() * a.value().array().sin()).matrix());
  });
}

Var exp(const Var& a) {
  return a.tape()->record(a.value().array().exp().matrix(), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, (g.array() * a.value().array().exp()).matrix());
  });
}

Var tanh(const Var& a) {
  return a.tape()->record(a.value().array().tanh().matrix(), [a](Tape& t, const Eigen::MatrixXd& g) {
    const Eigen::ArrayXXd th = a.value().array().tanh();
    t.accumulate(a, (g.array() * (1.0 - th.square())).matrix());
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw Error(Errc::ShapeMismatch, "add_row: row vector must be 1 x " + std::to_string(a.cols()));
  Eigen::MatrixXd v = a.value();
  v.rowwise() += row.value().row(0);
  return a.tape()->record(std::move(v), [a, row](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Var scale_rows(const Var& a, const Eigen::VectorXd& scale) {
  if (scale.size() != a.rows())
    throw Error(Errc::ShapeMismatch, "scale_rows: need " + std::to_string(a.rows()) + " weights");
  return a.tape()->record(scale.asDiagonal() * a.value(), [a, scale](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, scale.asDiagonal() * g);
  });
}

Var middle_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw Error(Errc::ShapeMismatch, "middle_cols: column range out of bounds");
  return a.tape()->record(a.value().middleCols(start, count),
                          [a, start, count](Tape& t, const Eigen::MatrixXd& g) {
                            Eigen::MatrixXd full = Eigen::MatrixXd::Zero(a.rows(), a.cols());
                            full.middleCols(start, count) = g;
                            t.accumulate(a, full);
                          });
}

Var sum(const Var& a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape()->record(std::move(v), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, Eigen::MatrixXd::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var squared_norm(const Var& a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().squaredNorm();
  return a.tape()->record(std::move(v), [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, 2.0 * g(0, 0) * a.value());
  });
}

// ---------------------------------------------------------------------------

GradientResult gradient(const LossProgram& program, std::span<const Eigen::MatrixXd> parameters) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(parameters.size());
  for (const auto& p : parameters) vars.push_back(tape.variable(p));
  const Var loss = program(tape, vars);
  if (loss.rows() != 1 || loss.cols() != 1) throw Error(Errc::ShapeMismatch, "loss must be 1x1");
  tape.backward(loss);
  GradientResult out;
  out.value = loss.value()(0, 0);
  out.gradients.reserve(vars.size());
  for (const Var& v : vars) out.gradients.push_back(tape.adjoint(v));
  return out;
}

double evaluate(const LossProgram& program, std::span<const Eigen::MatrixXd> parameters) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(parameters.size());
  for (const auto& p : parameters) vars.push_back(tape.constant(p));
  return program(tape, vars).value()(0, 0);
}

std::vector<Eigen::MatrixXd> finite_difference(const LossFunction& loss,
                                               std::span<const Eigen::MatrixXd> parameters, double step) {
  if (!(step > 0)) throw Error(Errc::InvalidParameter, "finite-difference step must be positive");
  std::vector<Eigen::MatrixXd> params(parameters.begin(), parameters.end());
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::MatrixXd g(params[k].rows(), params[k].cols());
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      const double saved = params[k].data()[i];
      params[k].data()[i] = saved + step;
      const double up = loss(params);
      params[k].data()[i] = saved - step;
      const double down = loss(params);
      params[k].data()[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw Error(Errc::NonFiniteValue, "loss is not finite near the evaluation point");
      g.data()[i] = (up - down) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(std::span<const Eigen::MatrixXd> a, std::span<const Eigen::MatrixXd> b, double floor) {
  if (a.size() != b.size()) throw Error(Errc::ShapeMismatch, "gradient lists differ in length");
  double worst = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols())
      throw Error(Errc::ShapeMismatch, "gradient shapes differ");
    if (a[k].size() == 0) continue;
    const double scale =
        std::max({a[k].cwiseAbs().maxCoeff(), b[k].cwiseAbs().maxCoeff(), floor});
    worst = std::max(worst, (a[k] - b[k]).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

}  // namespace irksindy::grad
