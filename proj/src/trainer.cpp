#include "specalign/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "specalign/imageio.hpp"
#include "specalign/rng.hpp"
#include "specalign/shapes.hpp"

namespace specalign {

namespace {

ad::Var sigmoid_clamped(ad::Tape& tape, ad::Var logits) {
  ad::Var p = tape.scale(tape.add_const(tape.tanh(tape.scale(logits, 0.5)), 1.0), 0.5);
  return tape.clamp(p, 1e-7, 1.0 - 1e-7);
}

ad::Var mean_all(ad::Tape& tape, ad::Var x) {
  return tape.scale(tape.sum_all(x), 1.0 / static_cast<double>(tape.value(x).numel()));
}

Tensor gaussian_like(std::size_t rows, std::size_t cols, double std_dev, std::uint64_t seed) {
  Tensor t({rows, cols});
  if (std_dev > 0.0) {
    CounterRng rng(seed);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = std_dev * rng.normal();
  }
  return t;
}

struct GanLossNodes {
  ad::Var loss_d;
  ad::Var loss_g;
};

// eta, eta', eta'': independent noise for the three discriminator inputs.
GanLossNodes build_gan_losses(ad::Tape& tape, const Graph& d, std::span<const ad::Var> d_params,
                              ad::Var real, ad::Var fake, double noise_std,
                              std::uint64_t noise_seed) {
  std::size_t n = tape.value(real).rows();
  std::size_t batch = tape.value(real).cols();
  ad::Var real_in = real;
  ad::Var fake_in = fake;
  ad::Var fake_in_g = fake;
  if (noise_std > 0.0) {
    real_in = tape.add(real, tape.constant(gaussian_like(
                                 n, batch, noise_std, CounterRng::derive(noise_seed, "eta-real", 0))));
    fake_in = tape.add(fake, tape.constant(gaussian_like(
                                 n, batch, noise_std, CounterRng::derive(noise_seed, "eta-fake", 0))));
    fake_in_g = tape.add(fake, tape.constant(gaussian_like(
                                   n, batch, noise_std, CounterRng::derive(noise_seed, "eta-gen", 0))));
  }
  ad::Var p_real = sigmoid_clamped(tape, forward_layers(tape, d, d_params, real_in, nullptr));
  ad::Var p_fake = sigmoid_clamped(tape, forward_layers(tape, d, d_params, fake_in, nullptr));
  ad::Var p_fake_g = sigmoid_clamped(tape, forward_layers(tape, d, d_params, fake_in_g, nullptr));

  GanLossNodes out;
  out.loss_d = tape.neg(tape.add(mean_all(tape, tape.log(p_real)),
                                 mean_all(tape, tape.log(tape.neg(tape.add_const(p_fake, -1.0))))));
  out.loss_g = tape.neg(mean_all(tape, tape.log(p_fake_g)));
  return out;
}

}  // namespace

LossPair gan_losses(const Graph& d, const Graph& g, const Tensor& real_batch,
                    const Tensor& z_batch, double noise_std, std::uint64_t noise_seed) {
  Tensor real = real_batch.rank() == 1 ? real_batch.reshaped({real_batch.numel(), 1}) : real_batch;
  Tensor z = z_batch.rank() == 1 ? z_batch.reshaped({z_batch.numel(), 1}) : z_batch;
  if (real.cols() != z.cols()) throw ValidationError("gan_losses: batch sizes differ");
  ensure_finite(real, "gan_losses");
  ensure_finite(z, "gan_losses");

  ad::Tape tape;
  auto d_params = lift_parameters(tape, d);
  auto g_params = lift_parameters(tape, g);
  ad::Var real_var = tape.leaf(real);
  ad::Var fake = forward_layers(tape, g, g_params, tape.leaf(z), nullptr);
  GanLossNodes nodes = build_gan_losses(tape, d, d_params, real_var, fake, noise_std, noise_seed);
  LossPair out{tape.value(nodes.loss_d)[0], tape.value(nodes.loss_g)[0]};
  if (!std::isfinite(out.loss_d) || !std::isfinite(out.loss_g))
    throw NumericError("gan_losses: non-finite loss");
  return out;
}

Tensor build_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetKind::shapes) {
    std::size_t n = spec.side * spec.side;
    Tensor pool({spec.count, n});
    for (std::size_t i = 0; i < spec.count; ++i) {
      RenderedShape s =
          sample_shape_uniform(CounterRng::derive(spec.seed, "dataset-shape", i), spec.side);
      for (std::size_t j = 0; j < n; ++j) pool.at(i, j) = s.image[j];
    }
    return pool;
  }
  // Linear factor model: x = W f, f ~ N(0, diag(sigma^2)), W with
  // orthonormal columns, sigma geometric so factors have distinct scales.
  std::size_t n = spec.linear_dim, r = spec.linear_factors;
  if (r > n) throw ValidationError("dataset: more factors than output dims");
  CounterRng rng(CounterRng::derive(spec.seed, "dataset-linear", 0));
  Tensor w({n, r});
  for (std::size_t j = 0; j < r; ++j) {
    // Gram-Schmidt against previous columns.
    std::vector<double> col(n);
    double norm = 0;
    do {
      for (std::size_t i = 0; i < n; ++i) col[i] = rng.normal();
      for (std::size_t prev = 0; prev < j; ++prev) {
        double proj = 0;
        for (std::size_t i = 0; i < n; ++i) proj += col[i] * w.at(i, prev);
        for (std::size_t i = 0; i < n; ++i) col[i] -= proj * w.at(i, prev);
      }
      norm = 0;
      for (double v : col) norm += v * v;
      norm = std::sqrt(norm);
    } while (norm < 1e-8);
    for (std::size_t i = 0; i < n; ++i) w.at(i, j) = col[i] / norm;
  }
  Tensor pool({spec.count, n});
  for (std::size_t s = 0; s < spec.count; ++s) {
    for (std::size_t j = 0; j < r; ++j) {
      double sigma = std::pow(0.6, static_cast<double>(j));
      double f = sigma * rng.normal();
      for (std::size_t i = 0; i < n; ++i) pool.at(s, i) += w.at(i, j) * f;
    }
  }
  return pool;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, long step, std::size_t pool,
                                       std::size_t batch) {
  CounterRng rng(CounterRng::derive(seed, "data-batch", static_cast<std::uint64_t>(step)));
  std::vector<std::size_t> out(batch);
  for (std::size_t i = 0; i < batch; ++i)
    out[i] = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool - 1)));
  return out;
}

void save_train_checkpoint(const std::string& path, const TrainResult& result, long step,
                           const OptimizerState& gen_opt, const OptimizerState& disc_opt) {
  Checkpoint ckpt;
  pack_scalar(ckpt, "meta/step", static_cast<double>(step));
  pack_net(ckpt, "generator", result.generator_spec, result.generator);
  pack_net(ckpt, "discriminator", result.discriminator_spec, result.discriminator);
  pack_optimizer(ckpt, "opt/generator", gen_opt);
  pack_optimizer(ckpt, "opt/discriminator", disc_opt);
  save_checkpoint(path, ckpt);
}

TrainResult train_gan(const TrainConfig& cfg) {
  if (cfg.lambda < 0) throw ValidationError("train: lambda must be >= 0");
  if (cfg.noise_std < 0) throw ValidationError("train: noise std must be >= 0");
  if (cfg.k < 1 || static_cast<std::size_t>(cfg.k) > cfg.generator.latent)
    throw ValidationError("train: need 1 <= k <= latent size");
  if (cfg.disc_steps < 1) throw ValidationError("train: need at least one discriminator step");

  TrainResult result;
  result.generator_spec = cfg.generator;
  result.discriminator_spec = cfg.discriminator;
  result.generator = build_net(cfg.generator, CounterRng::derive(cfg.seed, "gen-init", 0));
  result.discriminator = build_net(cfg.discriminator, CounterRng::derive(cfg.seed, "disc-init", 0));

  Tensor pool = build_dataset(cfg.dataset);
  std::size_t n = pool.cols();
  if (n != result.generator.output_arity || n != result.discriminator.input_arity)
    throw ValidationError("train: dataset dimension does not match the networks");
  std::size_t m = cfg.generator.latent;

  auto gen_params = result.generator.parameters();
  auto disc_params = result.discriminator.parameters();
  OptimizerState gen_opt = make_optimizer(cfg.gen_opt, gen_params);
  OptimizerState disc_opt = make_optimizer(cfg.disc_opt, disc_params);

  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    metrics.open(cfg.out_dir + "/metrics.csv", std::ios::trunc);
    if (!metrics) throw IoError("train: cannot open metrics log");
    metrics << "step,loss_d,loss_g,reg,ms_per_step\n";
  }

  AlignRegOptions reg_opts;
  reg_opts.k = cfg.k;
  reg_opts.iterations = cfg.power_iterations;

  auto write_checkpoint = [&](long step, const char* tag) {
    if (cfg.out_dir.empty()) return;
    std::string path = cfg.out_dir + "/checkpoint_" + tag + ".ckpt";
    save_train_checkpoint(path, result, step, gen_opt, disc_opt);
    result.checkpoint_path = path;
  };

  for (long step = 0; step < cfg.updates; ++step) {
    auto t0 = std::chrono::steady_clock::now();

    // All randomness is a function of (seed, step) only, so paired runs
    // with different lambda see identical data, noise, and Rademacher
    // draws.
    auto idx = batch_indices(cfg.seed, step, pool.rows(), cfg.batch);
    Tensor real({n, cfg.batch});
    for (std::size_t b = 0; b < cfg.batch; ++b)
      for (std::size_t i = 0; i < n; ++i) real.at(i, b) = pool.at(idx[b], i);
    CounterRng zrng(CounterRng::derive(cfg.seed, "latent", static_cast<std::uint64_t>(step)));
    Tensor zbatch({m, cfg.batch});
    for (std::size_t i = 0; i < zbatch.numel(); ++i) zbatch[i] = zrng.normal();
    std::uint64_t noise_seed = CounterRng::derive(cfg.seed, "noise", static_cast<std::uint64_t>(step));
    std::uint64_t rad_seed = CounterRng::derive(cfg.seed, "rademacher", static_cast<std::uint64_t>(step));

    double loss_d_value = 0, loss_g_value = 0, reg_value = 0;
    try {
      // Discriminator updates; extra substeps draw their own batches from
      // lambda-independent streams.
      for (int ds = 0; ds < cfg.disc_steps; ++ds) {
        Tensor d_real = real;
        Tensor d_z = zbatch;
        std::uint64_t d_noise = noise_seed;
        if (ds > 0) {
          std::uint64_t sub = CounterRng::derive(cfg.seed, "disc-substep",
                                                 static_cast<std::uint64_t>(ds));
          auto extra = batch_indices(sub, step, pool.rows(), cfg.batch);
          for (std::size_t b = 0; b < cfg.batch; ++b)
            for (std::size_t i = 0; i < n; ++i) d_real.at(i, b) = pool.at(extra[b], i);
          CounterRng ezrng(CounterRng::derive(sub, "latent", static_cast<std::uint64_t>(step)));
          for (std::size_t i = 0; i < d_z.numel(); ++i) d_z[i] = ezrng.normal();
          d_noise = CounterRng::derive(sub, "noise", static_cast<std::uint64_t>(step));
        }
        ad::Tape tape;
        auto dp = lift_parameters(tape, result.discriminator);
        auto gp = lift_parameters(tape, result.generator);
        ad::Var fake = forward_layers(tape, result.generator, gp, tape.leaf(d_z), nullptr);
        GanLossNodes nodes = build_gan_losses(tape, result.discriminator, dp,
                                              tape.leaf(d_real), tape.detach(fake),
                                              cfg.noise_std, d_noise);
        loss_d_value = tape.value(nodes.loss_d)[0];
        if (!std::isfinite(loss_d_value)) throw NumericError("train: discriminator loss non-finite");
        auto grads = tape.gradients(nodes.loss_d, dp);
        std::vector<Tensor> gv;
        gv.reserve(grads.size());
        for (ad::Var v : grads) gv.push_back(tape.value(v));
        optimizer_step(disc_opt, disc_params, gv);
      }

      // Generator update against the refreshed discriminator.
      {
        ad::Tape tape;
        auto dp = lift_parameters(tape, result.discriminator);
        auto gp = lift_parameters(tape, result.generator);
        ad::Var fake = forward_layers(tape, result.generator, gp, tape.leaf(zbatch), nullptr);
        GanLossNodes nodes = build_gan_losses(tape, result.discriminator, dp,
                                              tape.leaf(real), fake, cfg.noise_std, noise_seed);
        loss_g_value = tape.value(nodes.loss_g)[0];

        // The penalty reuses the generator-loss latent batch with a fresh
        // Rademacher draw; at lambda = 0 it is evaluated for the log but
        // never enters the loss.
        ad::Var reg_input = lift_penalty_input(tape, zbatch, cfg.k);
        ad::Var reg = alignment_penalty_node(tape, result.generator, gp, reg_input,
                                             rad_seed, reg_opts);
        reg_value = tape.value(reg)[0];
        if (!std::isfinite(loss_g_value) || !std::isfinite(reg_value))
          throw NumericError("train: generator loss non-finite");

        ad::Var total = cfg.lambda > 0
                            ? tape.add(nodes.loss_g, tape.scale(reg, cfg.lambda))
                            : nodes.loss_g;
        auto grads = tape.gradients(total, gp);
        std::vector<Tensor> gv;
        gv.reserve(grads.size());
        for (ad::Var v : grads) gv.push_back(tape.value(v));
        optimizer_step(gen_opt, gen_params, gv);
      }

      // Keep every written checkpoint finite.
      for (const ParamRef& p : gen_params) ensure_finite(*p.value, "train: generator params");
      for (const ParamRef& p : disc_params) ensure_finite(*p.value, "train: discriminator params");
    } catch (const NumericError&) {
      result.diverged = true;
      result.completed_updates = step;
      if (metrics) metrics.flush();
      // Parameters may already be poisoned; the last cadence checkpoint
      // stays on disk untouched.
      return result;
    }

    auto t1 = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (cfg.log_every > 0 && step % cfg.log_every == 0) {
      result.log.push_back({step, loss_d_value, loss_g_value, reg_value, ms});
      if (metrics)
        metrics << step << "," << format_full(loss_d_value) << "," << format_full(loss_g_value)
                << "," << format_full(reg_value) << "," << format_full(ms) << "\n";
    }
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0)
      write_checkpoint(step + 1, std::to_string(step + 1).c_str());
    result.completed_updates = step + 1;
  }

  write_checkpoint(cfg.updates, "final");
  if (metrics) metrics.flush();
  return result;
}

}  // namespace specalign
