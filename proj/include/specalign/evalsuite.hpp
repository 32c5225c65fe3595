#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "specalign/graph.hpp"
#include "specalign/models.hpp"
#include "specalign/shapes.hpp"

namespace specalign {

/// Monte-Carlo mean of the elementwise-squared eigenvector matrix of the
/// normal Jacobian, over latents drawn from the standard normal prior.
/// Columns sum to one; a near-one-hot column k says the k-th leading
/// eigenvector is pinned to one coordinate axis across latent space.
Tensor heatmap_f(const Graph& g, std::size_t samples, std::uint64_t seed);

/// Mean of the first `count` diagonal entries of a heatmap matrix.
double mean_top_diagonal(const Tensor& f, std::size_t count);

/// Maps a rendered sprite to a latent code. Real encoders read only
/// .image; the ground-truth baseline reads .factors, mirroring the
/// simulator-backed reference row of the metric.
using ShapeEncoder = std::function<Tensor(const RenderedShape&)>;

ShapeEncoder graph_encoder(const Graph& enc);
ShapeEncoder ground_truth_encoder();             // factors scaled into [0,1]
ShapeEncoder raw_pixel_encoder();                // flattened image
ShapeEncoder constant_encoder(std::size_t m);    // all zeros

struct MetricBatch {
  Tensor inputs;             // {n_batch, m}: mean |z0 - z1| per instance
  std::vector<int> targets;  // fixed-factor indices, each in [2, 5]
};

/// One classifier batch: each instance fixes one factor drawn from [2,5],
/// samples n_inst matched pairs, and averages the absolute encoded
/// differences. Deterministic given seed.
MetricBatch make_metric_batch(std::size_t n_inst, std::size_t n_batch, const ShapeEncoder& enc,
                              std::uint64_t seed, std::size_t side = 64);

struct InversionOptions {
  std::size_t batch = 32;
  double learning_rate = 1e-3;  // Adam with betas (0.5, 0.99), eps 1e-8
  std::uint64_t seed = 1;
  std::size_t log_every = 1;
};

struct InversionResult {
  Graph encoder;
  std::vector<double> loss_log;  // reconstruction loss per logged step
};

/// Trains an encoder to invert a frozen generator by the autoencoding
/// loss mean ||g(enc(x)) - x||^2 over x = g(z), z from the prior. The
/// encoder gets twice the generator's base feature count. Default step
/// counts: 30000 at full scale, 3000 is plenty at 16x16. Throws
/// NumericError with the step index if the loss stops being finite.
InversionResult train_inversion_encoder(const Graph& generator, const NetSpec& generator_spec,
                                        int steps, const InversionOptions& opts = {});

struct ScoreOptions {
  int train_steps = 10000;
  std::size_t eval_instances = 5000;
  std::size_t n_inst = 64;
  std::size_t n_batch = 32;
  std::size_t side = 64;
  std::uint64_t seed = 0;
};

struct ScoreResult {
  double score;      // accuracy in [0, 100]
  double stderr_;    // binomial standard error of the accuracy
};

/// Trains a linear softmax classifier (4 classes, factors 2-5) on
/// metric batches with Nesterov SGD (1e-2, 0.99), then reports accuracy
/// on fresh instances drawn from a disjoint seed stream.
ScoreResult disentanglement_score(const ShapeEncoder& enc, const ScoreOptions& opts);

}  // namespace specalign
