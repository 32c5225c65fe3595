#include "specalign/tensor.hpp"

#include <cmath>
#include <string>

namespace specalign {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw ValidationError("tensor: zero extent");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), data_(product(dims_), 0.0) {}

Tensor Tensor::zeros(std::vector<std::size_t> dims) { return Tensor(std::move(dims)); }

Tensor Tensor::full(std::vector<std::size_t> dims, double value) {
  Tensor t(std::move(dims));
  for (double& x : t.data_) x = value;
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> dims, std::vector<double> values) {
  if (product(dims) != values.size())
    throw ValidationError("tensor: data length does not match dims");
  Tensor t;
  t.dims_ = std::move(dims);
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::identity(std::size_t m) {
  Tensor t({m, m});
  for (std::size_t i = 0; i < m; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::column(std::vector<double> values) {
  std::size_t m = values.size();
  return from({m, 1}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (dims_.empty()) return 0;
  return dims_[0];
}

std::size_t Tensor::cols() const {
  if (dims_.empty()) return 0;
  if (dims_.size() == 1) return 1;
  if (dims_.size() == 2) return dims_[1];
  throw ValidationError("tensor: cols() on rank > 2");
}

double& Tensor::at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
double Tensor::at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

double Tensor::frobenius_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
  if (product(dims) != numel()) throw ValidationError("tensor: reshape changes element count");
  Tensor t;
  t.dims_ = std::move(dims);
  t.data_ = data_;
  return t;
}

Tensor Tensor::transposed() const {
  if (rank() > 2) throw ValidationError("tensor: transpose on rank > 2");
  std::size_t r = rows(), c = cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = at(i, j);
  return out;
}

namespace {
void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_dims(b)) throw ValidationError(std::string(op) + ": shape mismatch");
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() > 2 || b.rank() > 2) throw ValidationError("matmul: rank > 2");
  std::size_t m = a.rows(), p = a.cols(), q = b.cols();
  if (b.rows() != p) throw ValidationError("matmul: inner dimensions differ");
  Tensor out({m, q});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < p; ++k) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < q; ++j) out.at(i, j) += aik * b.at(k, j);
    }
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Tensor& a) { return a.frobenius_norm(); }

void ensure_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) throw NumericError(std::string(where) + ": non-finite value");
}

}  // namespace specalign
