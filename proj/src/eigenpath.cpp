#include "specalign/eigenpath.hpp"

#include <cmath>

#include "specalign/numerics.hpp"
#include "specalign/rng.hpp"
#include "specalign/spectral.hpp"

namespace specalign {

TraceParams sprite_trace_params() { return TraceParams{5e-3, 0.99, 2000}; }
TraceParams large_model_trace_params() { return TraceParams{1.5e-2, 0.99, 2000}; }

TrajectoryRecord trace_eigenpath(const Graph& g, const Tensor& z, int k, double step_size,
                                 double decay, int steps, std::size_t decode_stride,
                                 bool negate) {
  std::size_t m = g.input_arity;
  if (k < 1 || static_cast<std::size_t>(k) > m)
    throw ValidationError("trace_eigenpath: need 1 <= k <= latent size");
  if (step_size <= 0.0) throw ValidationError("trace_eigenpath: step size must be positive");
  if (decay < 0.0 || decay >= 1.0) throw ValidationError("trace_eigenpath: decay outside [0,1)");
  if (steps < 1) throw ValidationError("trace_eigenpath: need at least one step");

  Tensor zi = z.rank() == 1 ? z : z.reshaped({z.numel()});
  if (zi.numel() != m) throw ValidationError("trace_eigenpath: latent arity mismatch");

  TrajectoryRecord rec;
  rec.iterates.push_back(zi);
  auto maybe_decode = [&](std::size_t index, const Tensor& point) {
    if (decode_stride > 0 && index % decode_stride == 0) {
      rec.decoded_indices.push_back(index);
      rec.decoded.push_back(evaluate(g, point).first);
    }
  };
  maybe_decode(0, zi);

  Tensor prev;
  for (int i = 1; i <= steps; ++i) {
    Tensor mz = evaluate_normal_jacobian(g, zi);
    EigResult eig = symmetric_eig_descending(mz);
    Tensor w({m});
    for (std::size_t r = 0; r < m; ++r)
      w[r] = eig.eigenvectors.at(r, static_cast<std::size_t>(k - 1));
    if (i == 1 && negate) w = scale(w, -1.0);
    if (i >= 2) {
      if (dot(prev, w) < 0.0) w = scale(w, -1.0);
      w = add(scale(prev, decay), scale(w, 1.0 - decay));
    }
    zi = sub(zi, scale(w, step_size));
    ensure_finite(zi, "trace_eigenpath");
    rec.directions.push_back(w);
    rec.iterates.push_back(zi);
    prev = w;
    maybe_decode(static_cast<std::size_t>(i), zi);
  }
  return rec;
}

Tensor local_decode(const Graph& g, const Tensor& z0, const Tensor& coeffs, const Tensor& v) {
  std::size_t m = g.input_arity;
  std::size_t r = coeffs.numel();
  if (v.rank() != 2 || v.rows() != m || v.cols() < r)
    throw ValidationError("local_decode: eigenvector matrix shape mismatch");
  if (r > m) throw ValidationError("local_decode: more coefficients than latent dims");
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = a; b < r; ++b) {
      double d = 0;
      for (std::size_t i = 0; i < m; ++i) d += v.at(i, a) * v.at(i, b);
      if (std::abs(d - (a == b ? 1.0 : 0.0)) > 1e-6)
        throw ValidationError("local_decode: columns are not orthonormal");
    }
  Tensor z = z0.rank() == 1 ? z0 : z0.reshaped({z0.numel()});
  if (z.numel() != m) throw ValidationError("local_decode: latent arity mismatch");
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < m; ++i) z[i] += coeffs[j] * v.at(i, j);
  return evaluate(g, z).first;
}

PerturbationGrid perturbation_grid(const Graph& g, const Tensor& z, double eps,
                                   std::size_t count, std::uint64_t seed) {
  std::size_t m = g.input_arity;
  if (count > m) throw ValidationError("perturbation_grid: count exceeds latent size");
  Tensor zi = z.rank() == 1 ? z : z.reshaped({z.numel()});
  Tensor base = evaluate(g, zi).first;

  PerturbationGrid grid;
  grid.random_row.push_back(base);
  grid.eigen_row.push_back(base);

  CounterRng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Tensor d({m});
    double n = 0;
    do {
      for (std::size_t r = 0; r < m; ++r) d[r] = rng.normal();
      n = d.frobenius_norm();
    } while (n < 1e-12);
    grid.random_row.push_back(evaluate(g, add(zi, scale(d, eps / n))).first);
  }

  EigResult eig = symmetric_eig_descending(evaluate_normal_jacobian(g, zi));
  for (std::size_t i = 0; i < count; ++i) {
    Tensor v({m});
    for (std::size_t r = 0; r < m; ++r) v[r] = eig.eigenvectors.at(r, i);
    grid.eigen_row.push_back(evaluate(g, add(zi, scale(v, eps))).first);
  }
  return grid;
}

}  // namespace specalign
