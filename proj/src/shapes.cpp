#include "specalign/shapes.hpp"

#include <cmath>
#include <string>

#include "specalign/rng.hpp"

namespace specalign {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Shapes are defined inside the unit disk in local coordinates.
bool inside_square(double x, double y) {
  constexpr double h = M_SQRT1_2;  // inscribed in the unit circle
  return std::abs(x) <= h && std::abs(y) <= h;
}

bool inside_ellipse(double x, double y) {
  // Semi-axes 1 and 0.5.
  return x * x + 4.0 * y * y <= 1.0;
}

bool inside_heart(double x, double y) {
  // (X^2 + Y^2 - 1)^3 <= X^2 Y^3, drawn at 2/3 size so its bounding
  // radius (~1.42) fits the unit disk.
  double hx = 1.5 * x, hy = 1.5 * y;
  double s = hx * hx + hy * hy - 1.0;
  return s * s * s - hx * hx * hy * hy * hy <= 0.0;
}

void check_factors(const FactorVector& u) {
  for (int i = 1; i <= 5; ++i) {
    int v = factor_component(u, i);
    if (v < 1 || v > kFactorRanges[static_cast<std::size_t>(i - 1)])
      throw ValidationError("render_shape: factor " + std::to_string(i) + " out of range");
  }
}

}  // namespace

int factor_component(const FactorVector& u, int index) {
  switch (index) {
    case 1: return u.symbol;
    case 2: return u.scale;
    case 3: return u.rotation;
    case 4: return u.x;
    case 5: return u.y;
    default: throw ValidationError("factor index out of range");
  }
}

void set_factor_component(FactorVector& u, int index, int value) {
  switch (index) {
    case 1: u.symbol = value; return;
    case 2: u.scale = value; return;
    case 3: u.rotation = value; return;
    case 4: u.x = value; return;
    case 5: u.y = value; return;
    default: throw ValidationError("factor index out of range");
  }
}

Tensor render_shape(const FactorVector& u, std::size_t side) {
  if (side != 16 && side != 32 && side != 64)
    throw ValidationError("render_shape: side must be 16, 32 or 64");
  check_factors(u);

  double base_extent = 0.2 * static_cast<double>(side);
  double scale_frac = 0.5 + 0.5 * static_cast<double>(u.scale - 1) / 5.0;
  double extent = base_extent * scale_frac;

  // Rotational symmetry makes some rotation indices equivalent; reducing
  // first keeps the equivalence exact in floating point.
  int rot_index = u.rotation - 1;
  if (u.symbol == 1) rot_index %= 10;  // square: pi/2 period
  if (u.symbol == 2) rot_index %= 20;  // ellipse: pi period
  double theta = static_cast<double>(rot_index) * (kTwoPi / 40.0);
  double c = std::cos(theta), s = std::sin(theta);

  double margin = base_extent + 1.0;
  double span = static_cast<double>(side) - 2.0 * margin;
  double cx = margin + span * static_cast<double>(u.x - 1) / 29.0;
  double cy = margin + span * static_cast<double>(u.y - 1) / 29.0;

  Tensor img({side, side});
  for (std::size_t row = 0; row < side; ++row) {
    for (std::size_t col = 0; col < side; ++col) {
      double px = static_cast<double>(col) + 0.5;
      double py = static_cast<double>(row) + 0.5;
      double dx = (px - cx) / extent;
      double dy = (cy - py) / extent;  // image rows grow downward
      double lx = c * dx + s * dy;
      double ly = -s * dx + c * dy;
      bool inside = u.symbol == 1   ? inside_square(lx, ly)
                    : u.symbol == 2 ? inside_ellipse(lx, ly)
                                    : inside_heart(lx, ly);
      if (inside) img.at(row, col) = 1.0;
    }
  }
  return img;
}

RenderedShape sample_shape(int fixed_index, int fixed_value, std::uint64_t seed,
                           std::size_t side) {
  if (fixed_index < 1 || fixed_index > 5)
    throw ValidationError("sample_shape: factor index out of range");
  if (fixed_value < 1 || fixed_value > kFactorRanges[static_cast<std::size_t>(fixed_index - 1)])
    throw ValidationError("sample_shape: fixed value out of range");
  CounterRng rng(seed);
  FactorVector u;
  for (int j = 1; j <= 5; ++j)
    set_factor_component(u, j, rng.uniform_int(1, kFactorRanges[static_cast<std::size_t>(j - 1)]));
  set_factor_component(u, fixed_index, fixed_value);
  return RenderedShape{render_shape(u, side), u};
}

RenderedShape sample_shape_uniform(std::uint64_t seed, std::size_t side) {
  CounterRng rng(seed);
  FactorVector u;
  for (int j = 1; j <= 5; ++j)
    set_factor_component(u, j, rng.uniform_int(1, kFactorRanges[static_cast<std::size_t>(j - 1)]));
  return RenderedShape{render_shape(u, side), u};
}

}  // namespace specalign
