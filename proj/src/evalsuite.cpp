#include "specalign/evalsuite.hpp"

#include <cmath>
#include <string>

#include "specalign/numerics.hpp"
#include "specalign/rng.hpp"
#include "specalign/spectral.hpp"

namespace specalign {

Tensor heatmap_f(const Graph& g, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw ValidationError("heatmap: need at least one sample");
  std::size_t m = g.input_arity;
  Tensor f({m, m});
  CounterRng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    Tensor z({m});
    for (std::size_t i = 0; i < m; ++i) z[i] = rng.normal();
    EigResult eig = symmetric_eig_descending(evaluate_normal_jacobian(g, z));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        f.at(i, j) += eig.eigenvectors.at(i, j) * eig.eigenvectors.at(i, j);
  }
  return scale(f, 1.0 / static_cast<double>(samples));
}

double mean_top_diagonal(const Tensor& f, std::size_t count) {
  double s = 0;
  for (std::size_t i = 0; i < count; ++i) s += f.at(i, i);
  return s / static_cast<double>(count);
}

ShapeEncoder graph_encoder(const Graph& enc) {
  Graph net = enc;
  return [net](const RenderedShape& shape) {
    return evaluate(net, shape.image.reshaped({shape.image.numel()})).first;
  };
}

ShapeEncoder ground_truth_encoder() {
  return [](const RenderedShape& shape) {
    Tensor z({5});
    for (int i = 1; i <= 5; ++i)
      z[static_cast<std::size_t>(i - 1)] =
          static_cast<double>(factor_component(shape.factors, i)) /
          static_cast<double>(kFactorRanges[static_cast<std::size_t>(i - 1)]);
    return z;
  };
}

ShapeEncoder raw_pixel_encoder() {
  return [](const RenderedShape& shape) {
    return shape.image.reshaped({shape.image.numel()});
  };
}

ShapeEncoder constant_encoder(std::size_t m) {
  return [m](const RenderedShape&) { return Tensor::zeros({m}); };
}

MetricBatch make_metric_batch(std::size_t n_inst, std::size_t n_batch, const ShapeEncoder& enc,
                              std::uint64_t seed, std::size_t side) {
  if (n_inst < 1 || n_batch < 1)
    throw ValidationError("make_metric_batch: counts must be >= 1");
  CounterRng rng(seed);
  MetricBatch out;
  out.targets.reserve(n_batch);
  std::uint64_t pair_counter = 0;
  Tensor inputs;
  for (std::size_t b = 0; b < n_batch; ++b) {
    int fixed_index = rng.uniform_int(2, 5);
    int fixed_value = rng.uniform_int(1, kFactorRanges[static_cast<std::size_t>(fixed_index - 1)]);
    Tensor acc;
    for (std::size_t p = 0; p < n_inst; ++p) {
      std::uint64_t s0 = CounterRng::derive(seed, "metric-pair", pair_counter++);
      std::uint64_t s1 = CounterRng::derive(seed, "metric-pair", pair_counter++);
      Tensor z0 = enc(sample_shape(fixed_index, fixed_value, s0, side));
      Tensor z1 = enc(sample_shape(fixed_index, fixed_value, s1, side));
      if (!z0.same_dims(z1)) throw ValidationError("make_metric_batch: encoder output varies");
      if (acc.empty()) acc = Tensor::zeros(z0.dims());
      for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += std::abs(z0[i] - z1[i]);
    }
    if (inputs.empty()) inputs = Tensor::zeros({n_batch, acc.numel()});
    for (std::size_t i = 0; i < acc.numel(); ++i)
      inputs.at(b, i) = acc[i] / static_cast<double>(n_inst);
    out.targets.push_back(fixed_index);
  }
  out.inputs = std::move(inputs);
  return out;
}

InversionResult train_inversion_encoder(const Graph& generator, const NetSpec& generator_spec,
                                        int steps, const InversionOptions& opts) {
  if (steps < 0) throw ValidationError("inversion: negative step count");
  NetSpec enc_spec = inversion_encoder_spec(generator_spec);
  InversionResult result;
  result.encoder = build_net(enc_spec, CounterRng::derive(opts.seed, "encoder-init", 0));

  OptimizerConfig adam = adam_defaults();
  adam.learning_rate = opts.learning_rate;
  auto params = result.encoder.parameters();
  OptimizerState opt = make_optimizer(adam, params);

  std::size_t m = generator.input_arity;
  std::size_t n = generator.output_arity;
  for (int step = 0; step < steps; ++step) {
    CounterRng rng(CounterRng::derive(opts.seed, "inversion-batch", static_cast<std::uint64_t>(step)));
    Tensor zbatch({m, opts.batch});
    for (std::size_t i = 0; i < zbatch.numel(); ++i) zbatch[i] = rng.normal();

    ad::Tape tape;
    // The generator is frozen: its parameters enter as plain leaves and
    // no update is derived for them.
    auto gen_params = lift_parameters(tape, generator);
    auto enc_params = lift_parameters(tape, result.encoder);
    ad::Var zvar = tape.leaf(zbatch);
    ad::Var x = forward_layers(tape, generator, gen_params, zvar, nullptr);
    ad::Var zhat = forward_layers(tape, result.encoder, enc_params, tape.detach(x), nullptr);
    ad::Var xrec = forward_layers(tape, generator, gen_params, zhat, nullptr);
    ad::Var diff = tape.sub(xrec, tape.detach(x));
    ad::Var loss = tape.scale(tape.sum_all(tape.mul(diff, diff)),
                              1.0 / static_cast<double>(opts.batch * n));
    double loss_value = tape.value(loss)[0];
    if (!std::isfinite(loss_value))
      throw NumericError("inversion: loss non-finite at step " + std::to_string(step));
    if (opts.log_every > 0 && static_cast<std::size_t>(step) % opts.log_every == 0)
      result.loss_log.push_back(loss_value);

    auto grads = tape.gradients(loss, enc_params);
    std::vector<Tensor> grad_values;
    grad_values.reserve(grads.size());
    for (ad::Var gvar : grads) grad_values.push_back(tape.value(gvar));
    optimizer_step(opt, params, grad_values);
  }
  return result;
}

namespace {

// Linear softmax classifier over the four candidate fixed factors.
struct Classifier {
  Tensor w;  // {4, m}
  Tensor b;  // {4, 1}
};

std::vector<double> softmax4(const double* logits) {
  double mx = logits[0];
  for (int c = 1; c < 4; ++c) mx = std::max(mx, logits[c]);
  std::vector<double> p(4);
  double z = 0;
  for (int c = 0; c < 4; ++c) {
    p[static_cast<std::size_t>(c)] = std::exp(logits[c] - mx);
    z += p[static_cast<std::size_t>(c)];
  }
  for (double& x : p) x /= z;
  return p;
}

int predict(const Classifier& cls, const Tensor& inputs, std::size_t row) {
  int best = 0;
  double best_v = -1e300;
  for (int c = 0; c < 4; ++c) {
    double v = cls.b.at(static_cast<std::size_t>(c), 0);
    for (std::size_t i = 0; i < cls.w.cols(); ++i)
      v += cls.w.at(static_cast<std::size_t>(c), i) * inputs.at(row, i);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

}  // namespace

ScoreResult disentanglement_score(const ShapeEncoder& enc, const ScoreOptions& opts) {
  if (opts.train_steps < 0) throw ValidationError("score: negative training steps");

  // Probe the encoder once for its output arity.
  Tensor probe = enc(sample_shape_uniform(CounterRng::derive(opts.seed, "probe", 0), opts.side));
  std::size_t m = probe.numel();

  Classifier cls{Tensor::zeros({4, m}), Tensor::zeros({4, 1})};
  std::vector<ParamRef> params{{&cls.w, "w", false}, {&cls.b, "b", false}};
  OptimizerState opt = make_optimizer(sgd_nesterov_defaults(), params);

  for (int step = 0; step < opts.train_steps; ++step) {
    std::uint64_t batch_seed =
        CounterRng::derive(opts.seed, "train", static_cast<std::uint64_t>(step));
    MetricBatch batch = make_metric_batch(opts.n_inst, opts.n_batch, enc, batch_seed, opts.side);

    Tensor gw = Tensor::zeros({4, m});
    Tensor gb = Tensor::zeros({4, 1});
    double inv_b = 1.0 / static_cast<double>(opts.n_batch);
    for (std::size_t rix = 0; rix < opts.n_batch; ++rix) {
      double logits[4];
      for (int c = 0; c < 4; ++c) {
        logits[c] = cls.b.at(static_cast<std::size_t>(c), 0);
        for (std::size_t i = 0; i < m; ++i)
          logits[c] += cls.w.at(static_cast<std::size_t>(c), i) * batch.inputs.at(rix, i);
      }
      auto p = softmax4(logits);
      int target = batch.targets[rix] - 2;
      for (int c = 0; c < 4; ++c) {
        double delta = (p[static_cast<std::size_t>(c)] - (c == target ? 1.0 : 0.0)) * inv_b;
        gb.at(static_cast<std::size_t>(c), 0) += delta;
        for (std::size_t i = 0; i < m; ++i)
          gw.at(static_cast<std::size_t>(c), i) += delta * batch.inputs.at(rix, i);
      }
    }
    optimizer_step(opt, params, {gw, gb});
  }

  // Fresh instances from a seed stream disjoint from training.
  std::size_t correct = 0;
  std::size_t done = 0;
  std::uint64_t eval_root = CounterRng::derive(opts.seed, "eval", 0);
  while (done < opts.eval_instances) {
    std::size_t want = std::min(opts.eval_instances - done, static_cast<std::size_t>(64));
    MetricBatch batch = make_metric_batch(
        opts.n_inst, want, enc, CounterRng::derive(eval_root, "eval-batch", done), opts.side);
    for (std::size_t rix = 0; rix < want; ++rix)
      if (predict(cls, batch.inputs, rix) == batch.targets[rix] - 2) ++correct;
    done += want;
  }
  double acc = static_cast<double>(correct) / static_cast<double>(opts.eval_instances);
  ScoreResult out;
  out.score = 100.0 * acc;
  out.stderr_ = 100.0 * std::sqrt(acc * (1.0 - acc) / static_cast<double>(opts.eval_instances));
  return out;
}

}  // namespace specalign
