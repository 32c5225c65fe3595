#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "specalign/graph.hpp"
#include "specalign/spectral.hpp"

namespace specalign {

/// Sign mask and column weights for the alignment penalty. Column j carries
/// -1 in row j and +1 elsewhere, so summing the masked squared eigenvector
/// estimates rewards mass on coordinate j and penalizes the rest. Column i
/// is weighted (k-i+1) * 2/(k(k+1)); the weights sum to one, which keeps
/// the penalty inside [-1, 1] and prioritizes the leading columns.
struct RegMask {
  Tensor signs;                 // {m, k}, entries +-1
  std::vector<double> weights;  // k positive entries summing to 1
};

RegMask build_reg_mask(std::size_t m, std::size_t k);

struct AlignRegOptions {
  int k = 2;
  int iterations = 8;  // power iterations, fully unrolled for gradients
  bool stop_gradient = false;     // treat estimated eigenvectors as constants
  bool reweight_columns = true;   // false: every column weighted 1 (ablation)
};

/// Records the penalty on an existing tape: the mean over the columns of
/// zbatch of the masked-power-iteration alignment penalty, differentiable
/// with respect to `params` through every unrolled iteration. One batched
/// columnwise product per iteration covers all samples and columns.
ad::Var alignment_penalty_node(ad::Tape& tape, const Graph& g, std::span<const ad::Var> params,
                               ad::Var input_columns, std::uint64_t rademacher_seed,
                               const AlignRegOptions& opts);

/// Tiles each column of zbatch k times and lifts it to a leaf, the input
/// layout alignment_penalty_node expects.
ad::Var lift_penalty_input(ad::Tape& tape, const Tensor& zbatch, int k);

/// Penalty value at a single latent point (or the batch mean for {m,B}).
double evaluate_alignment_regularizer(const Graph& g, const Tensor& z, int k, int iterations,
                                      std::uint64_t seed);

struct RegGradient {
  double value;
  std::vector<Tensor> param_gradients;  // ordered like g.parameters()
};

/// Penalty plus its gradient with respect to every network parameter.
RegGradient alignment_regularizer_with_gradients(const Graph& g, const Tensor& zbatch,
                                                 std::uint64_t seed,
                                                 const AlignRegOptions& opts);

}  // namespace specalign
