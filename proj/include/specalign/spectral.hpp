#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "specalign/graph.hpp"
#include "specalign/numerics.hpp"
#include "specalign/tape.hpp"
#include "specalign/tensor.hpp"

namespace specalign {

// Division guard used when renormalizing power-iteration columns:
// columns are divided by (norm + eps), never by max(norm, eps).
inline constexpr double kPowerIterEps = 1e-8;

/// 0/1 mask whose column j zeroes coordinates 1..j-1, leaving the rest.
/// Multiplying an iterate by column j projects onto span(e_j, ..., e_m)
/// under the assumption that the leading j-1 eigenvectors are already
/// axis-aligned.
Tensor build_eigvec_mask(std::size_t m, std::size_t k);

struct EigEstimate {
  std::vector<double> lambdas;  // column-norm estimates, >= 0
  Tensor vectors;               // {m, k}; unit columns up to the eps guard
};

using MatVecFn = std::function<Tensor(const Tensor&)>;

/// Masked simultaneous power iteration: one batched matvec per iteration
/// drives all k columns at once. v0 is masked before the first iteration.
/// Degenerate (null) columns stay exactly zero with a zero estimate.
/// Throws NumericError naming the iteration index if values stop being
/// finite.
EigEstimate estimate_leading_eigenpairs(const MatVecFn& matvec, const Tensor& v0, int iterations);

/// Rademacher initializer for the iteration, deterministic given seed.
Tensor default_power_init(std::size_t m, std::size_t k, std::uint64_t seed);

/// Dense m x m normal-Jacobian matrix J^T J at z, built from one batched
/// columnwise product against the identity and symmetrized as
/// (M + M^T)/2.
Tensor evaluate_normal_jacobian(const Graph& g, const Tensor& z);

/// Seminorm sqrt(v^T J^T J v): the magnitude of the instantaneous output
/// change for a latent perturbation along v.
double nz_seminorm(const Graph& g, const Tensor& z, const Tensor& v);

namespace detail {

inline Tensor pi_apply_mask(const Tensor& mask, const Tensor& x) { return hadamard(mask, x); }
inline ad::Var pi_apply_mask(const Tensor& mask, ad::Var x) {
  return x.tape->mul(x.tape->constant(mask), x);
}

inline Tensor pi_column_norms(const Tensor& x) {
  auto norms = column_norms(x);
  Tensor out({1, norms.size()});
  for (std::size_t j = 0; j < norms.size(); ++j) out.at(0, j) = norms[j];
  return out;
}
inline ad::Var pi_column_norms(ad::Var x) {
  ad::Tape& t = *x.tape;
  return t.sqrt(t.sum_rows(t.mul(x, x)));
}

inline Tensor pi_renormalize(const Tensor& x, const Tensor& norms, double eps) {
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) /= norms.at(0, j) + eps;
  return out;
}
inline ad::Var pi_renormalize(ad::Var x, ad::Var norms, double eps) {
  ad::Tape& t = *x.tape;
  const Tensor& nv = t.value(norms);
  ad::Var recip = t.div(t.constant(Tensor::full(nv.dims(), 1.0)), t.add_const(norms, eps));
  return t.mul(x, t.tile_rows(recip, t.value(x).rows()));
}

inline void pi_check_finite(const Tensor& x, int iteration) {
  if (!x.all_finite())
    throw NumericError("power iteration: non-finite value at iteration " +
                       std::to_string(iteration));
}
inline void pi_check_finite(ad::Var x, int iteration) {
  pi_check_finite(x.tape->value(x), iteration);
}

// Shared core: M is Tensor for numeric estimates or ad::Var when the
// unrolled iteration must stay differentiable.
template <class M, class MatVec>
std::pair<M, M> masked_power_iteration(const Tensor& mask, MatVec&& matvec, M v0,
                                       int iterations) {
  if (iterations < 1) throw ValidationError("power iteration: iteration count must be >= 1");
  M v = pi_apply_mask(mask, v0);
  M lambdas{};
  for (int t = 1; t <= iterations; ++t) {
    v = pi_apply_mask(mask, matvec(v));
    pi_check_finite(v, t);
    lambdas = pi_column_norms(v);
    v = pi_renormalize(v, lambdas, kPowerIterEps);
  }
  return {std::move(lambdas), std::move(v)};
}

}  // namespace detail

}  // namespace specalign
