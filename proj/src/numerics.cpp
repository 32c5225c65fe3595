#include "specalign/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specalign/rng.hpp"

namespace specalign {

namespace {

double off_diagonal_frobenius(const Tensor& a) {
  std::size_t m = a.rows();
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) s += a.at(i, j) * a.at(i, j);
  return std::sqrt(s);
}

}  // namespace

EigResult symmetric_eig_descending(const Tensor& m_in) {
  if (m_in.rank() != 2 || m_in.rows() != m_in.cols())
    throw ValidationError("symmetric_eig: input is not a square matrix");
  std::size_t m = m_in.rows();
  if (m > 1024) throw ValidationError("symmetric_eig: dimension exceeds 1024");
  ensure_finite(m_in, "symmetric_eig");

  double max_entry = m_in.max_abs();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (std::abs(m_in.at(i, j) - m_in.at(j, i)) > 1e-9 * std::max(1e-300, max_entry))
        throw ValidationError("symmetric_eig: input is not symmetric");

  Tensor a = m_in;
  Tensor v = Tensor::identity(m);
  const double stop = 1e-12 * m_in.frobenius_norm();

  for (int sweep = 0; sweep < 100; ++sweep) {
    if (off_diagonal_frobenius(a) <= stop) break;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        double apq = a.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double tau = s / (1.0 + c);

        double app = a.at(p, p), aqq = a.at(q, q);
        a.at(p, p) = app - t * apq;
        a.at(q, q) = aqq + t * apq;
        a.at(p, q) = 0.0;
        a.at(q, p) = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          if (r != p && r != q) {
            double arp = a.at(r, p), arq = a.at(r, q);
            a.at(r, p) = a.at(p, r) = arp - s * (arq + tau * arp);
            a.at(r, q) = a.at(q, r) = arq + s * (arp - tau * arq);
          }
          double vrp = v.at(r, p), vrq = v.at(r, q);
          v.at(r, p) = vrp - s * (vrq + tau * vrp);
          v.at(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a.at(i, i) > a.at(j, j); });

  EigResult out;
  out.eigenvalues.resize(m);
  out.eigenvectors = Tensor({m, m});
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t src = order[col];
    out.eigenvalues[col] = a.at(src, src);
    double sign = 1.0;
    for (std::size_t r = 0; r < m; ++r) {
      if (std::abs(v.at(r, src)) > 1e-12) {
        sign = v.at(r, src) >= 0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t r = 0; r < m; ++r) out.eigenvectors.at(r, col) = sign * v.at(r, src);
  }
  return out;
}

std::vector<double> column_norms(const Tensor& a) {
  if (a.rank() > 2) throw ValidationError("column_norms: rank > 2");
  std::size_t p = a.rows(), q = a.cols();
  std::vector<double> norms(q, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) norms[j] += a.at(i, j) * a.at(i, j);
  for (double& n : norms) n = std::sqrt(n);
  return norms;
}

Tensor rademacher_matrix(std::size_t p, std::size_t q, std::uint64_t seed) {
  if (p < 1 || q < 1) throw ValidationError("rademacher_matrix: extents must be >= 1");
  CounterRng rng(seed);
  Tensor out({p, q});
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = rng.rademacher();
  return out;
}

}  // namespace specalign
