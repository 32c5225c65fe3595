#include "specalign/models.hpp"

#include <cmath>

#include "specalign/rng.hpp"

namespace specalign {

namespace {

Tensor uniform_fan_in(std::vector<std::size_t> dims, std::size_t fan_in, CounterRng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(dims));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = (2.0 * rng.uniform() - 1.0) * bound;
  return t;
}

void push_affine(Graph& g, std::size_t out, std::size_t in, CounterRng& rng) {
  g.layers.push_back(AffineLayer{uniform_fan_in({out, in}, in, rng), Tensor::zeros({out, 1})});
}

void push_conv(Graph& g, std::size_t cout, std::size_t cin, std::size_t k, int stride, int pad,
               CounterRng& rng) {
  g.layers.push_back(Conv2dLayer{uniform_fan_in({cout, cin, k, k}, cin * k * k, rng),
                                 Tensor::zeros({cout, 1}), stride, pad});
}

void push_prelu(Graph& g, const NetSpec& spec) {
  g.layers.push_back(PreluLayer{Tensor::from({1, 1}, {spec.leak_init}), spec.prelu_offset});
}

}  // namespace

Graph build_net(const NetSpec& spec, std::uint64_t seed) {
  if (spec.latent < 1) throw ValidationError("build_net: latent size must be >= 1");
  if (spec.leak_init < 0.0 || spec.leak_init > 1.0)
    throw ValidationError("build_net: leak outside [0,1]");
  CounterRng rng(seed);
  Graph g;
  std::size_t pixels = spec.flat_dim > 0 ? spec.flat_dim : spec.image_side * spec.image_side;

  if (spec.conv_features == 0) {
    const std::vector<std::size_t>& widths = spec.hidden;
    switch (spec.kind) {
      case NetKind::generator: {
        g.input_arity = spec.latent;
        g.output_arity = pixels;
        std::size_t prev = spec.latent;
        for (std::size_t w : widths) {
          push_affine(g, w, prev, rng);
          push_prelu(g, spec);
          prev = w;
        }
        push_affine(g, pixels, prev, rng);
        if (spec.squash_output) g.layers.push_back(SquashLayer{});
        break;
      }
      case NetKind::discriminator: {
        g.input_arity = pixels;
        g.output_arity = 1;
        std::size_t prev = pixels;
        for (std::size_t w : widths) {
          push_affine(g, w, prev, rng);
          push_prelu(g, spec);
          prev = w;
        }
        push_affine(g, 1, prev, rng);
        break;
      }
      case NetKind::encoder: {
        g.input_arity = pixels;
        g.output_arity = spec.latent;
        std::size_t prev = pixels;
        for (std::size_t w : widths) {
          push_affine(g, w, prev, rng);
          push_prelu(g, spec);
          prev = w;
        }
        push_affine(g, spec.latent, prev, rng);
        break;
      }
    }
  } else {
    // Small conv stacks. The generator works at full resolution (the layer
    // set has no transposed convolution); discriminator and encoder
    // downsample with stride 2.
    std::size_t f = spec.conv_features;
    std::size_t side = spec.image_side;
    switch (spec.kind) {
      case NetKind::generator: {
        g.input_arity = spec.latent;
        g.output_arity = pixels;
        push_affine(g, f * pixels, spec.latent, rng);
        g.layers.push_back(ReshapeLayer{{f, side, side}});
        push_prelu(g, spec);
        push_conv(g, f, f, 3, 1, 1, rng);
        push_prelu(g, spec);
        push_conv(g, 1, f, 3, 1, 1, rng);
        g.layers.push_back(SquashLayer{});
        break;
      }
      case NetKind::discriminator:
      case NetKind::encoder: {
        g.input_arity = pixels;
        g.output_arity = spec.kind == NetKind::encoder ? spec.latent : 1;
        g.layers.push_back(ReshapeLayer{{1, side, side}});
        push_conv(g, f, 1, 4, 2, 1, rng);
        push_prelu(g, spec);
        push_conv(g, 2 * f, f, 4, 2, 1, rng);
        push_prelu(g, spec);
        std::size_t flat = 2 * f * (side / 4) * (side / 4);
        g.layers.push_back(ReshapeLayer{{flat}});
        push_affine(g, g.output_arity, flat, rng);
        break;
      }
    }
  }

  g.validate();
  return g;
}

NetSpec inversion_encoder_spec(const NetSpec& generator_spec) {
  NetSpec enc = generator_spec;
  enc.kind = NetKind::encoder;
  for (std::size_t& w : enc.hidden) w *= 2;
  if (enc.conv_features > 0) enc.conv_features *= 2;
  return enc;
}

OptimizerConfig rmsprop_defaults() {
  OptimizerConfig c;
  c.kind = OptimizerKind::rmsprop;
  c.learning_rate = 1e-4;
  c.decay = 0.9;
  c.epsilon = 1e-6;
  return c;
}

OptimizerConfig adam_defaults() {
  OptimizerConfig c;
  c.kind = OptimizerKind::adam;
  c.learning_rate = 1e-4;
  c.beta1 = 0.5;
  c.beta2 = 0.99;
  c.epsilon = 1e-8;
  return c;
}

OptimizerConfig sgd_nesterov_defaults() {
  OptimizerConfig c;
  c.kind = OptimizerKind::sgd_nesterov;
  c.learning_rate = 1e-2;
  c.momentum = 0.99;
  return c;
}

OptimizerState make_optimizer(const OptimizerConfig& config,
                              const std::vector<ParamRef>& params) {
  OptimizerState s;
  s.config = config;
  for (const ParamRef& p : params) {
    s.acc1.push_back(Tensor::zeros(p.value->dims()));
    if (config.kind == OptimizerKind::adam) s.acc2.push_back(Tensor::zeros(p.value->dims()));
  }
  return s;
}

void optimizer_step(OptimizerState& state, const std::vector<ParamRef>& params,
                    const std::vector<Tensor>& grads) {
  if (params.size() != grads.size() || params.size() != state.acc1.size())
    throw ValidationError("optimizer_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].value->same_dims(grads[i]))
      throw ValidationError("optimizer_step: gradient shape mismatch");
    ensure_finite(grads[i], "optimizer_step");
  }
  state.step_count += 1;
  const OptimizerConfig& c = state.config;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].value;
    const Tensor& g = grads[i];
    switch (c.kind) {
      case OptimizerKind::rmsprop: {
        Tensor& acc = state.acc1[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
          acc[j] = c.decay * acc[j] + (1.0 - c.decay) * g[j] * g[j];
          p[j] -= c.learning_rate * g[j] / std::sqrt(acc[j] + c.epsilon);
        }
        break;
      }
      case OptimizerKind::sgd_nesterov: {
        Tensor& buf = state.acc1[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
          buf[j] = c.momentum * buf[j] + g[j];
          p[j] -= c.learning_rate * (g[j] + c.momentum * buf[j]);
        }
        break;
      }
      case OptimizerKind::adam: {
        Tensor& m = state.acc1[i];
        Tensor& v = state.acc2[i];
        double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
        double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
        for (std::size_t j = 0; j < p.numel(); ++j) {
          m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
          v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
          p[j] -= c.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.epsilon);
        }
        break;
      }
    }
    if (params[i].clip01)
      for (std::size_t j = 0; j < p.numel(); ++j) p[j] = std::min(std::max(p[j], 0.0), 1.0);
  }
}

}  // namespace specalign
