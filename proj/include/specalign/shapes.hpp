#pragma once

#include <array>
#include <cstdint>

#include "specalign/tensor.hpp"

namespace specalign {

/// Ground-truth attributes of one sprite, all 1-based:
/// symbol in [1,3] (square, ellipse, heart), scale in [1,6],
/// rotation in [1,40] over [0, 2pi), x/y position in [1,30].
struct FactorVector {
  int symbol = 1;
  int scale = 1;
  int rotation = 1;
  int x = 1;
  int y = 1;
};

inline constexpr std::array<int, 5> kFactorRanges{3, 6, 40, 30, 30};

int factor_component(const FactorVector& u, int index);            // 1-based
void set_factor_component(FactorVector& u, int index, int value);  // 1-based

/// Rasterizes a white shape on a black background: pixel centers inside
/// the transformed implicit shape become 1. Scale index maps linearly
/// onto [0.5, 1.0] of the base extent (a fifth of the image side);
/// rotation index maps onto [0, 2pi); position indices span a uniform
/// grid with a margin wide enough that every shape is fully contained.
/// side must be 16, 32 or 64. Throws ValidationError for out-of-range
/// factors.
Tensor render_shape(const FactorVector& u, std::size_t side);

struct RenderedShape {
  Tensor image;
  FactorVector factors;  // bookkeeping for ground-truth baselines
};

/// Draws the remaining factors uniformly with factor fixed_index pinned
/// to fixed_value. Deterministic given seed.
RenderedShape sample_shape(int fixed_index, int fixed_value, std::uint64_t seed,
                           std::size_t side = 64);

/// Uniform draw over all factors.
RenderedShape sample_shape_uniform(std::uint64_t seed, std::size_t side = 64);

}  // namespace specalign
