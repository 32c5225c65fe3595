#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "specalign/errors.hpp"

namespace specalign {

/// Dense row-major array of 64-bit floats. The universal value type for
/// data batches, network parameters, and Jacobian products.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);  // zero-filled

  static Tensor zeros(std::vector<std::size_t> dims);
  static Tensor full(std::vector<std::size_t> dims, double value);
  static Tensor from(std::vector<std::size_t> dims, std::vector<double> values);
  static Tensor identity(std::size_t m);
  static Tensor column(std::vector<double> values);  // shape {m, 1}

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // 2-D accessors; rank-1 tensors behave as single-column matrices.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;
  double max_abs() const;
  double frobenius_norm() const;

  Tensor reshaped(std::vector<std::size_t> dims) const;  // numel must match
  Tensor transposed() const;                             // rank <= 2

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

// Elementwise and matrix kernels. All validate shapes and throw
// ValidationError on mismatch.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);

// Throws NumericError mentioning `where` if any entry is NaN or Inf.
void ensure_finite(const Tensor& t, const char* where);

}  // namespace specalign
