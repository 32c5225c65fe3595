#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "specalign/tape.hpp"
#include "specalign/tensor.hpp"

namespace specalign {

// Layers operate on batched activations: {features, batch} matrices, or
// {channels, height, width, batch} inside convolutional segments.

struct AffineLayer {
  Tensor weight;  // {out, in}
  Tensor bias;    // {out, 1}
};

struct Conv2dLayer {
  Tensor kernel;  // {cout, cin, kh, kw}
  Tensor bias;    // {cout, 1}
  int stride = 1;
  int pad = 0;
};

// y = max(0,x) + leak * min(0,x) + offset, scalar learned leak per layer.
struct PreluLayer {
  Tensor leak;  // {1, 1}
  double offset = 0.0;
};

// y = (tanh(x) + 1) / 2, maps into (0, 1).
struct SquashLayer {};

struct ReshapeLayer {
  std::vector<std::size_t> feature_dims;  // without the trailing batch extent
};

using Layer = std::variant<AffineLayer, Conv2dLayer, PreluLayer, SquashLayer, ReshapeLayer>;

struct ParamRef {
  Tensor* value;
  std::string name;
  bool clip01;  // PReLU leaks are clipped to [0,1] after updates
};
struct ParamView {
  const Tensor* value;
  std::string name;
  bool clip01;
};

/// Immutable description of a differentiable feedforward map from a latent
/// vector (and parameters) to an output vector.
struct Graph {
  std::vector<Layer> layers;
  std::size_t input_arity = 0;
  std::size_t output_arity = 0;

  std::vector<ParamRef> parameters();
  std::vector<ParamView> parameters() const;

  /// Propagates feature dims through the layer chain; throws
  /// ValidationError on an inconsistent chain.
  std::vector<std::size_t> infer_output_dims(std::vector<std::size_t> feature_dims) const;
  void validate() const;
};

/// One forward pass recorded on an arena, exposing the per-layer
/// intermediate values b_0 (input) through b_L (output). Reverse passes
/// append adjoint nodes; the recorded forward values never change.
struct EvalTape {
  std::shared_ptr<ad::Tape> arena;
  ad::Var input;
  ad::Var output;
  std::vector<ad::Var> boundaries;  // b_0 .. b_L

  const Tensor& boundary_value(std::size_t k) const { return arena->value(boundaries[k]); }
};

/// Records the graph's layers on an existing tape against explicit
/// parameter and input vars. Building block for composite losses.
ad::Var forward_layers(ad::Tape& tape, const Graph& g, std::span<const ad::Var> params,
                       ad::Var input, std::vector<ad::Var>* boundaries = nullptr);

/// Creates one leaf per parameter, ordered like g.parameters().
std::vector<ad::Var> lift_parameters(ad::Tape& tape, const Graph& g);

// The four Jacobian products. Vector arguments may be rank-1 {m} or
// batched {m, k}; batched calls evaluate the network once over k
// replicated columns and run each product columnwise in a single pass.
std::pair<Tensor, EvalTape> evaluate(const Graph& g, const Tensor& z);
Tensor vjp(const Graph& g, EvalTape& tape, const Tensor& w);   // J^T w
Tensor jvp(const Graph& g, const Tensor& z, const Tensor& v);  // J v, two reverse passes
Tensor mz_matvec(const Graph& g, const Tensor& z, const Tensor& v);   // J^T J v
Tensor jjt_matvec(const Graph& g, const Tensor& z, const Tensor& w);  // J J^T w

}  // namespace specalign
