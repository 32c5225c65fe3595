#pragma once

#include <cstdint>
#include <vector>

#include "specalign/graph.hpp"

namespace specalign {

// Step parameters reproducing the reference settings: small latent spaces
// (sprite-scale runs) and large generators respectively.
struct TraceParams {
  double step_size = 5e-3;  // alpha
  double decay = 0.99;      // rho in [0, 1)
  int steps = 2000;         // N
};
TraceParams sprite_trace_params();  // 5e-3, 0.99, 2000
TraceParams large_model_trace_params();  // 1.5e-2, 0.99, 2000

struct TrajectoryRecord {
  std::vector<Tensor> iterates;    // z_0 .. z_N
  std::vector<Tensor> directions;  // smoothed w_1 .. w_N
  std::vector<std::size_t> decoded_indices;
  std::vector<Tensor> decoded;     // generator outputs at decoded_indices
};

/// Repeatedly steps against the k-th eigenvector of the normal Jacobian:
/// each step rebuilds the dense matrix, takes the k-th eigenvector in
/// descending order, flips it when it points away from the previous
/// direction, blends with decay rho, and moves z by -step_size times the
/// blended direction. decode_stride > 0 also records generator outputs
/// every that many iterates (index 0 included). negate flips the first
/// direction, which walks the opposite ray (eigenvector signs are
/// arbitrary, so both rays are equally valid).
TrajectoryRecord trace_eigenpath(const Graph& g, const Tensor& z, int k, double step_size,
                                 double decay, int steps, std::size_t decode_stride = 0,
                                 bool negate = false);

/// Decodes a coefficient vector through precomputed eigenvector columns:
/// g(z0 + sum_i coeffs_i * v_i). Columns must be orthonormal within 1e-6.
Tensor local_decode(const Graph& g, const Tensor& z0, const Tensor& coeffs, const Tensor& v);

struct PerturbationGrid {
  std::vector<Tensor> random_row;  // g(z), then g(z + eps * d_i), d_i on the unit sphere
  std::vector<Tensor> eigen_row;   // g(z), then g(z + eps * v_i), leading eigenvectors
};

PerturbationGrid perturbation_grid(const Graph& g, const Tensor& z, double eps,
                                   std::size_t count, std::uint64_t seed);

}  // namespace specalign
