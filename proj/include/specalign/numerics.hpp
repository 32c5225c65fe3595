#pragma once

#include <cstdint>
#include <vector>

#include "specalign/tensor.hpp"

namespace specalign {

struct EigResult {
  std::vector<double> eigenvalues;  // sorted descending
  Tensor eigenvectors;              // orthogonal, columns match eigenvalues
};

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi
/// rotations. Sweeps until the off-diagonal Frobenius norm drops below
/// 1e-12 * ||M||_F, at most 100 sweeps. Eigenvalues are returned in
/// descending order, and each eigenvector is sign-fixed so that its
/// first component with magnitude > 1e-12 is non-negative.
///
/// Throws ValidationError for non-square or asymmetric input (tolerance
/// 1e-9 * ||M||_max) or m > 1024, NumericError for non-finite entries.
EigResult symmetric_eig_descending(const Tensor& m);

/// Euclidean norm of each column of a p x q matrix.
std::vector<double> column_norms(const Tensor& a);

/// p x q matrix with independent +-1 entries, deterministic given seed.
Tensor rademacher_matrix(std::size_t p, std::size_t q, std::uint64_t seed);

}  // namespace specalign
