#pragma once

#include <Eigen/Dense>

namespace irksindy {

/// Sampled trajectory: times t (m+1), states X ((m+1) x d) and the m
/// stepsizes h[k] = t[k+1] - t[k].
class Dataset {
 public:
  Dataset() = default;
  /// Validates strictly increasing times and finite states.
  Dataset(Eigen::VectorXd t, Eigen::MatrixXd X);

  const Eigen::VectorXd& t() const { return t_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& h() const { return h_; }

  /// Number of intervals m.
  Eigen::Index intervals() const { return h_.size(); }
  Eigen::Index samples() const { return t_.size(); }
  int dimension() const { return static_cast<int>(X_.cols()); }

  /// Rows 0..m-1 (left endpoints) and 1..m (right endpoints).
  Eigen::MatrixXd left() const { return X_.topRows(intervals()); }
  Eigen::MatrixXd right() const { return X_.bottomRows(intervals()); }

 private:
  Eigen::VectorXd t_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd h_;
};

}  // namespace irksindy
