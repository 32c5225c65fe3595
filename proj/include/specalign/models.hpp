#pragma once

#include <cstdint>
#include <vector>

#include "specalign/graph.hpp"

namespace specalign {

enum class NetKind { generator, discriminator, encoder };

/// Configurable toy architecture: MLPs by default, small full-resolution
/// (generator) or strided (discriminator/encoder) conv stacks when
/// conv_features > 0. Generators end in the (tanh(x)+1)/2 squash so pixels
/// land in [0,1]; discriminators emit a single logit.
struct NetSpec {
  NetKind kind = NetKind::generator;
  std::size_t latent = 4;
  std::size_t image_side = 16;
  std::size_t flat_dim = 0;  // overrides image_side^2 when nonzero (non-image data)
  std::vector<std::size_t> hidden = {64, 64};  // empty: single affine layer
  std::size_t conv_features = 0;
  double leak_init = 0.25;
  double prelu_offset = 0.0;
  bool squash_output = true;  // generators only
};

Graph build_net(const NetSpec& spec, std::uint64_t seed);

/// Encoder used to invert a trained generator: same family, twice the
/// generator's base feature count (hidden widths for MLPs).
NetSpec inversion_encoder_spec(const NetSpec& generator_spec);

enum class OptimizerKind { rmsprop, sgd_nesterov, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double learning_rate = 1e-4;
  double decay = 0.9;      // rmsprop accumulator decay
  double epsilon = 1e-6;   // rmsprop / adam denominator guard
  double momentum = 0.99;  // nesterov
  double beta1 = 0.5;      // adam
  double beta2 = 0.99;     // adam
};

// The three training rules used in this project.
OptimizerConfig rmsprop_defaults();       // 1e-4, decay 0.9, eps 1e-6
OptimizerConfig adam_defaults();          // 1e-4, betas (0.5, 0.99), eps 1e-8
OptimizerConfig sgd_nesterov_defaults();  // 1e-2, momentum 0.99

struct OptimizerState {
  OptimizerConfig config;
  std::vector<Tensor> acc1;  // rmsprop accumulator / momentum buffer / adam first moment
  std::vector<Tensor> acc2;  // adam second moment
  long step_count = 0;
};

OptimizerState make_optimizer(const OptimizerConfig& config,
                              const std::vector<ParamRef>& params);

/// Applies one update in place. Parameters flagged clip01 (PReLU leaks)
/// are clipped to [0,1] afterwards. Throws NumericError on non-finite
/// gradients, ValidationError on shape mismatch.
void optimizer_step(OptimizerState& state, const std::vector<ParamRef>& params,
                    const std::vector<Tensor>& grads);

}  // namespace specalign
