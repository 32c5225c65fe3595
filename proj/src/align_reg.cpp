#include "specalign/align_reg.hpp"

#include "specalign/numerics.hpp"

namespace specalign {

RegMask build_reg_mask(std::size_t m, std::size_t k) {
  if (k < 1 || k > m) throw ValidationError("reg mask: need 1 <= k <= m");
  RegMask out;
  out.signs = Tensor::full({m, k}, 1.0);
  for (std::size_t j = 0; j < k; ++j) out.signs.at(j, j) = -1.0;
  double alpha = 2.0 / (static_cast<double>(k) * static_cast<double>(k + 1));
  out.weights.resize(k);
  for (std::size_t j = 0; j < k; ++j)
    out.weights[j] = static_cast<double>(k - j) * alpha;
  return out;
}

ad::Var lift_penalty_input(ad::Tape& tape, const Tensor& zbatch, int k) {
  Tensor z = zbatch.rank() == 1 ? zbatch.reshaped({zbatch.numel(), 1}) : zbatch;
  if (z.rank() != 2) throw ValidationError("alignment penalty: z must be a vector or {m,B}");
  std::size_t m = z.rows(), batch = z.cols();
  Tensor tiled({m, batch * static_cast<std::size_t>(k)});
  for (std::size_t b = 0; b < batch; ++b)
    for (int j = 0; j < k; ++j)
      for (std::size_t i = 0; i < m; ++i)
        tiled.at(i, b * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)) = z.at(i, b);
  return tape.leaf(std::move(tiled));
}

ad::Var alignment_penalty_node(ad::Tape& tape, const Graph& g, std::span<const ad::Var> params,
                               ad::Var input_columns, std::uint64_t rademacher_seed,
                               const AlignRegOptions& opts) {
  std::size_t m = g.input_arity;
  std::size_t k = static_cast<std::size_t>(opts.k);
  if (opts.k < 1 || k > m) throw ValidationError("alignment penalty: need 1 <= k <= m");
  std::size_t total = tape.value(input_columns).cols();
  if (total % k != 0)
    throw ValidationError("alignment penalty: input columns not a multiple of k");
  std::size_t batch = total / k;

  ad::Var out = forward_layers(tape, g, params, input_columns, nullptr);

  // w -> J^T w recorded once; every iteration reuses it for both halves of
  // the normal product.
  ad::Var w = tape.leaf(Tensor::full({g.output_arity, total}, 1.0));
  ad::Var jt_w = tape.gradients(out, w, {&input_columns, 1})[0];
  auto matvec = [&](ad::Var v) {
    ad::Var jv = tape.gradients(jt_w, v, {&w, 1})[0];
    return tape.gradients(out, jv, {&input_columns, 1})[0];
  };

  // Per-sample masks repeat across the batch blocks.
  Tensor unit_mask = build_eigvec_mask(m, k);
  Tensor mask({m, total});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < m; ++i) mask.at(i, b * k + j) = unit_mask.at(i, j);

  ad::Var v0 = tape.constant(rademacher_matrix(m, total, rademacher_seed));
  auto [lambdas, vhat] = detail::masked_power_iteration(mask, matvec, v0, opts.iterations);
  (void)lambdas;
  if (opts.stop_gradient) vhat = tape.detach(vhat);

  RegMask reg = build_reg_mask(m, k);
  Tensor weighted({m, total});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < k; ++j) {
      double wj = opts.reweight_columns ? reg.weights[j] : 1.0;
      for (std::size_t i = 0; i < m; ++i)
        weighted.at(i, b * k + j) = reg.signs.at(i, j) * wj / static_cast<double>(batch);
    }
  return tape.sum_all(tape.mul(tape.constant(std::move(weighted)), tape.mul(vhat, vhat)));
}

double evaluate_alignment_regularizer(const Graph& g, const Tensor& z, int k, int iterations,
                                      std::uint64_t seed) {
  AlignRegOptions opts;
  opts.k = k;
  opts.iterations = iterations;
  ad::Tape tape;
  auto params = lift_parameters(tape, g);
  ad::Var input = lift_penalty_input(tape, z, k);
  ad::Var r = alignment_penalty_node(tape, g, params, input, seed, opts);
  return tape.value(r)[0];
}

RegGradient alignment_regularizer_with_gradients(const Graph& g, const Tensor& zbatch,
                                                 std::uint64_t seed,
                                                 const AlignRegOptions& opts) {
  ad::Tape tape;
  auto params = lift_parameters(tape, g);
  ad::Var input = lift_penalty_input(tape, zbatch, opts.k);
  ad::Var r = alignment_penalty_node(tape, g, params, input, seed, opts);
  auto grads = tape.gradients(r, params);
  RegGradient out;
  out.value = tape.value(r)[0];
  for (ad::Var gv : grads) out.param_gradients.push_back(tape.value(gv));
  return out;
}

}  // namespace specalign
