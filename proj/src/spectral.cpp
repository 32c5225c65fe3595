#include "specalign/spectral.hpp"

#include <cmath>

namespace specalign {

Tensor build_eigvec_mask(std::size_t m, std::size_t k) {
  if (k < 1 || k > m) throw ValidationError("eigvec mask: need 1 <= k <= m");
  Tensor mask({m, k});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) mask.at(i, j) = i >= j ? 1.0 : 0.0;
  return mask;
}

EigEstimate estimate_leading_eigenpairs(const MatVecFn& matvec, const Tensor& v0,
                                        int iterations) {
  if (v0.rank() != 2) throw ValidationError("estimate_leading_eigenpairs: v0 must be {m,k}");
  Tensor mask = build_eigvec_mask(v0.rows(), v0.cols());
  auto [lambdas, vectors] =
      detail::masked_power_iteration(mask, matvec, v0, iterations);
  EigEstimate out;
  out.lambdas.resize(lambdas.cols());
  for (std::size_t j = 0; j < lambdas.cols(); ++j) out.lambdas[j] = lambdas.at(0, j);
  out.vectors = std::move(vectors);
  return out;
}

Tensor default_power_init(std::size_t m, std::size_t k, std::uint64_t seed) {
  return rademacher_matrix(m, k, seed);
}

Tensor evaluate_normal_jacobian(const Graph& g, const Tensor& z) {
  std::size_t m = g.input_arity;
  if (m > 1024) throw ValidationError("evaluate_normal_jacobian: latent size exceeds 1024");
  Tensor mz = mz_matvec(g, z, Tensor::identity(m));
  // Symmetrize: the two reverse passes agree only up to rounding.
  Tensor out({m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) = 0.5 * (mz.at(i, j) + mz.at(j, i));
  return out;
}

double nz_seminorm(const Graph& g, const Tensor& z, const Tensor& v) {
  double quad = dot(v, mz_matvec(g, z, v));
  return std::sqrt(std::max(0.0, quad));
}

}  // namespace specalign
