#include "irksindy/net.hpp"

#include <cmath>
#include <random>

namespace irksindy {

std::vector<Eigen::MatrixXd> MlpParams::tensors() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(2 * weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

void MlpParams::set_tensors(std::span<const Eigen::MatrixXd> tensors) {
  if (tensors.size() != 2 * weights.size()) throw Error(Errc::ShapeMismatch, "wrong number of tensors");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = tensors[2 * l];
    const auto& b = tensors[2 * l + 1];
    if (w.rows() != weights[l].rows() || w.cols() != weights[l].cols() || b.rows() != 1 ||
        b.cols() != biases[l].cols())
      throw Error(Errc::ShapeMismatch, "tensor shape does not match layer " + std::to_string(l));
    weights[l] = w;
    biases[l] = b;
  }
}

std::vector<int> layer_sizes(const Architecture& arch, int stages, int state_dim) {
  if (arch.hidden_layers < 0 || arch.width < 1 || stages < 1 || state_dim < 1)
    throw Error(Errc::InvalidArchitecture, "hidden layers >= 0, width >= 1 and s, d >= 1 required");
  std::vector<int> sizes;
  sizes.push_back(state_dim + (arch.use_time ? 1 : 0));
  for (int i = 0; i < arch.hidden_layers; ++i) sizes.push_back(arch.width);
  sizes.push_back(stages * state_dim);
  return sizes;
}

MlpParams init_mlp(const std::vector<int>& sizes, Activation activation, std::uint64_t seed, int stages,
                   int state_dim, double omega0, InputEncoding encoding) {
  if (sizes.size() < 2) throw Error(Errc::InvalidArchitecture, "need at least input and output layers");
  for (int n : sizes)
    if (n < 1) throw Error(Errc::InvalidArchitecture, "layer widths must be positive");
  if (sizes.back() != stages * state_dim)
    throw Error(Errc::InvalidArchitecture, "output width must equal s*d = " + std::to_string(stages * state_dim));
  if (sizes.front() != state_dim + (encoding.use_time ? 1 : 0))
    throw Error(Errc::InvalidArchitecture, "input width must be d (+1 with time)");
  if (activation == Activation::siren && !(omega0 > 0))
    throw Error(Errc::InvalidArchitecture, "omega0 must be positive");
  if (encoding.use_time && !(encoding.t_hi > encoding.t_lo))
    throw Error(Errc::InvalidArchitecture, "time encoding range is empty");

  MlpParams params;
  params.layer_sizes = sizes;
  params.activation = activation;
  params.omega0 = omega0;
  params.stages = stages;
  params.state_dim = state_dim;
  params.encoding = encoding;

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double bound) {
    return bound * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
  };
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    double bound;
    if (activation == Activation::tanh)
      bound = std::sqrt(6.0 / (fan_in + fan_out));
    else if (l == 0)
      bound = 1.0 / fan_in;
    else
      bound = std::sqrt(6.0 / fan_in) / omega0;
    Eigen::MatrixXd w(fan_in, fan_out);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform(bound);
    params.weights.push_back(std::move(w));
    params.biases.push_back(Eigen::RowVectorXd::Zero(fan_out));
  }
  return params;
}

Eigen::MatrixXd encode_inputs(const MlpParams& params, const Eigen::VectorXd& t, const Eigen::MatrixXd& X) {
  if (X.cols() != params.state_dim || t.size() != X.rows())
    throw Error(Errc::DimensionMismatch, "inputs do not match the network's state dimension");
  const auto& enc = params.encoding;
  if (!enc.use_time) return X;
  Eigen::MatrixXd in(X.rows(), X.cols() + 1);
  in.col(0) = (2.0 * (t.array() - enc.t_lo) / (enc.t_hi - enc.t_lo) - 1.0).matrix();
  in.rightCols(X.cols()) = X;
  return in;
}

Eigen::MatrixXd hidden_features(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.layer_sizes.front())
    throw Error(Errc::DimensionMismatch, "network expects " + std::to_string(params.layer_sizes.front()) +
                                             " inputs, got " + std::to_string(inputs.cols()));
  Eigen::MatrixXd h = inputs;
  for (std::size_t l = 0; l + 1 < params.layers(); ++l) {
    Eigen::MatrixXd z = h * params.weights[l];
    z.rowwise() += params.biases[l];
    if (params.activation == Activation::tanh)
      h = z.array().tanh().matrix();
    else
      h = (params.omega0 * z.array()).sin().matrix();
  }
  return h;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd out = hidden_features(params, inputs) * params.weights.back();
  out.rowwise() += params.biases.back();
  return out;
}

Eigen::MatrixXd forward(const MlpParams& params, double t, const Eigen::VectorXd& x) {
  Eigen::VectorXd tv(1);
  tv(0) = t;
  const Eigen::MatrixXd out = forward_batch(params, encode_inputs(params, tv, x.transpose()));
  // Segment i of the output row holds stage i.
  Eigen::MatrixXd chi(params.stages, params.state_dim);
  for (int i = 0; i < params.stages; ++i)
    chi.row(i) = out.block(0, i * params.state_dim, 1, params.state_dim);
  return chi;
}

grad::Var record_forward(grad::Tape& tape, const MlpParams& params, std::span<const grad::Var> tensors,
                         const Eigen::MatrixXd& inputs) {
  if (tensors.size() != 2 * params.layers()) throw Error(Errc::ShapeMismatch, "wrong number of tensors");
  if (inputs.cols() != params.layer_sizes.front())
    throw Error(Errc::DimensionMismatch, "network input width mismatch");
  grad::Var h = tape.constant(inputs);
  const std::size_t n = params.layers();
  for (std::size_t l = 0; l < n; ++l) {
    grad::Var z = grad::add_row(h * tensors[2 * l], tensors[2 * l + 1]);
    if (l + 1 == n)
      h = z;
    else if (params.activation == Activation::tanh)
      h = grad::tanh(z);
    else
      h = grad::sin(params.omega0 * z);
  }
  return h;
}

grad::GradientResult parameter_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                                        const OutputLoss& loss) {
  const auto tensors = params.tensors();
  return grad::gradient(
      [&](grad::Tape& tape, std::span<const grad::Var> vars) {
        return loss(tape, record_forward(tape, params, vars, inputs));
      },
      tensors);
}

}  // namespace irksindy
