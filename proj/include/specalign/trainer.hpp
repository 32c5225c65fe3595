#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specalign/align_reg.hpp"
#include "specalign/checkpoint.hpp"
#include "specalign/graph.hpp"
#include "specalign/models.hpp"

namespace specalign {

enum class DatasetKind { shapes, linear };

/// Training data: pre-rendered procedural sprites, or a synthetic linear
/// factor model x = W f with anisotropic Gaussian factors (a sanity
/// setting whose optimal generator is an affine map).
struct DatasetSpec {
  DatasetKind kind = DatasetKind::shapes;
  std::size_t side = 16;          // sprite side
  std::size_t count = 4096;       // pre-rendered pool size
  std::size_t linear_dim = 16;    // output dim of the factor model
  std::size_t linear_factors = 4;
  std::uint64_t seed = 1234;
};

struct TrainConfig {
  NetSpec generator;
  NetSpec discriminator;
  int k = 2;                 // eigenvectors to align
  int power_iterations = 8;  // T
  double lambda = 0.1;       // penalty weight; 0 disables (still logged)
  std::size_t batch = 32;
  long updates = 1000;
  int disc_steps = 1;  // discriminator updates per generator update
  double noise_std = 0.6;  // discriminator input noise for binary-pixel data
  OptimizerConfig gen_opt = rmsprop_defaults();
  OptimizerConfig disc_opt = rmsprop_defaults();
  DatasetSpec dataset;
  std::uint64_t seed = 1;
  long checkpoint_every = 0;  // 0: only final
  long log_every = 1;
  std::string out_dir;  // empty: no files written
};

struct LossPair {
  double loss_d;
  double loss_g;
};

/// Non-saturating losses with Gaussian noise added independently to every
/// discriminator input; the discriminator's logit goes through a sigmoid
/// clamped to [1e-7, 1-1e-7] before the logs. Deterministic given
/// noise_seed (and trivially so for noise_std = 0).
LossPair gan_losses(const Graph& d, const Graph& g, const Tensor& real_batch,
                    const Tensor& z_batch, double noise_std, std::uint64_t noise_seed = 0);

struct TrainLogRow {
  long step;
  double loss_d;
  double loss_g;
  double reg;
  double ms_per_step;
};

struct TrainResult {
  Graph generator;
  Graph discriminator;
  NetSpec generator_spec;
  NetSpec discriminator_spec;
  std::vector<TrainLogRow> log;
  long completed_updates = 0;
  bool diverged = false;
  std::string checkpoint_path;  // last checkpoint written, if any
};

/// Alternating single-step GAN training with the alignment penalty folded
/// into the generator loss (weight lambda) on the same latent batch with a
/// fresh Rademacher draw per update. Data, noise, and Rademacher streams
/// depend only on (seed, step), so runs differing only in lambda consume
/// identical randomness. Divergence aborts and keeps the last finite
/// checkpoint.
TrainResult train_gan(const TrainConfig& cfg);

/// Pre-generates the training pool for a dataset spec; rows are flattened
/// samples. Exposed for tests and the data-stream pairing guarantees.
Tensor build_dataset(const DatasetSpec& spec);

/// Indices of the real batch drawn at `step`; depends only on (seed, step,
/// pool size, batch).
std::vector<std::size_t> batch_indices(std::uint64_t seed, long step, std::size_t pool,
                                       std::size_t batch);

void save_train_checkpoint(const std::string& path, const TrainResult& result, long step,
                           const OptimizerState& gen_opt, const OptimizerState& disc_opt);

}  // namespace specalign
