#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "irksindy/grad.hpp"

namespace irksindy {

enum class Activation { tanh, siren };

/// How (t, x) is presented to the network. Time is mapped affinely from
/// [t_lo, t_hi] onto [-1, 1]; `use_time = false` feeds the state only.
struct InputEncoding {
  bool use_time = true;
  double t_lo = -1.0;
  double t_hi = 1.0;
};

/// Fully connected stage predictor. Weights are stored fan_in x fan_out so a
/// batch of inputs (one per row) maps as H W + 1 b^T. The last layer is affine.
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::RowVectorXd> biases;
  Activation activation = Activation::tanh;
  double omega0 = 30.0;
  int stages = 1;
  int state_dim = 1;
  InputEncoding encoding;

  std::size_t layers() const { return weights.size(); }

  /// Flattened view for optimizers: W0, b0, W1, b1, ...
  std::vector<Eigen::MatrixXd> tensors() const;
  void set_tensors(std::span<const Eigen::MatrixXd> tensors);
};

struct Architecture {
  int hidden_layers = 4;
  int width = 32;
  Activation activation = Activation::tanh;
  double omega0 = 30.0;
  std::uint64_t seed = 0;
  bool use_time = true;
};

/// Layer widths input, hidden..., s*d.
std::vector<int> layer_sizes(const Architecture& arch, int stages, int state_dim);

/// tanh: Xavier-uniform weights; siren: first layer U(+-1/fan_in), later
/// layers U(+-sqrt(6/fan_in)/omega0). Biases start at zero.
MlpParams init_mlp(const std::vector<int>& layer_sizes, Activation activation, std::uint64_t seed,
                   int stages, int state_dim, double omega0 = 30.0, InputEncoding encoding = {});

/// Network inputs, one row per (t_k, x_k).
Eigen::MatrixXd encode_inputs(const MlpParams& params, const Eigen::VectorXd& t, const Eigen::MatrixXd& X);

/// Output of the last hidden layer (the inputs themselves without hidden
/// layers), n x width.
Eigen::MatrixXd hidden_features(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Raw network outputs for a batch of encoded inputs, n x (s*d).
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Stage prediction for one (t, x): s x d, row i is stage i.
Eigen::MatrixXd forward(const MlpParams& params, double t, const Eigen::VectorXd& x);

/// Records the batch forward pass; `tensors` are tape variables laid out as
/// MlpParams::tensors().
grad::Var record_forward(grad::Tape& tape, const MlpParams& params, std::span<const grad::Var> tensors,
                         const Eigen::MatrixXd& inputs);

/// Gradient of a loss built on top of the recorded network output with
/// respect to every tensor of the network.
using OutputLoss = std::function<grad::Var(grad::Tape&, const grad::Var& output)>;
grad::GradientResult parameter_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                                        const OutputLoss& loss);

}  // namespace irksindy
