#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "specalign/tensor.hpp"

namespace specalign::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::int32_t idx = -1;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

/// Define-by-run reverse-mode tape. Every operation records a node and
/// computes its value eagerly. gradients() appends the adjoint computation
/// as ordinary recorded nodes, so gradients are themselves differentiable;
/// nesting gradients() gives higher-order derivatives. This is what makes
/// forward-mode products expressible as two reverse passes.
class Tape {
 public:
  Var leaf(Tensor value);
  Var constant(Tensor value) { return leaf(std::move(value)); }

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Elementwise.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var relu_pos(Var a);   // max(0, x)
  Var relu_neg(Var a);   // min(0, x)
  Var step_pos(Var a);   // 1[x > 0], zero derivative
  Var step_neg(Var a);   // 1[x < 0], zero derivative
  Var tanh(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var clamp(Var a, double lo, double hi);

  // Matrix / shape.
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var reshape(Var a, std::vector<std::size_t> dims);
  Var sum_all(Var a);                                        // -> {1,1}
  Var broadcast_all(Var scalar, std::vector<std::size_t> dims);
  Var sum_rows(Var a);                                       // {m,k} -> {1,k}
  Var tile_rows(Var a, std::size_t rows);                    // {1,k} -> {rows,k}
  Var sum_cols(Var a);                                       // {m,k} -> {m,1}
  Var tile_cols(Var a, std::size_t cols);                    // {m,1} -> {m,cols}
  Var scale_by(Var a, Var scalar);                           // scalar is {1,1}

  // 2-D convolution over {C,H,W,B} values with {Cout,Cin,kh,kw} kernels,
  // zero padding, stride 1 or 2.
  Var conv2d(Var x, Var kernel, int stride, int pad);

  // Identity value, no gradient flow.
  Var detach(Var a);

  /// Adjoint of y seeded with `seed` (same shape as y), with respect to
  /// each entry of `wrt`. Unreached inputs get zero-valued results.
  std::vector<Var> gradients(Var y, Var seed, std::span<const Var> wrt);

  /// Gradient of a {1,1} scalar with seed 1.
  std::vector<Var> gradients(Var y_scalar, std::span<const Var> wrt);

 private:
  enum class Op : std::uint8_t {
    kLeaf, kAdd, kSub, kMul, kDiv, kNeg, kScale, kAddConst,
    kReluPos, kReluNeg, kStepPos, kStepNeg, kTanh, kLog, kSqrt, kClamp,
    kMatmul, kTranspose, kReshape, kSumAll, kBroadcastAll,
    kSumRows, kTileRows, kSumCols, kTileCols, kScaleBy,
    kConv2d, kConv2dDx, kConv2dDk, kDetach,
  };

  struct Node {
    Tensor value;
    Op op = Op::kLeaf;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double c0 = 0.0;
    double c1 = 0.0;
    std::array<std::int32_t, 4> iattr{};  // conv: stride, pad, target H/W or kh/kw
  };

  Var record(Op op, std::int32_t a, std::int32_t b, Tensor value, double c0 = 0.0,
             double c1 = 0.0, std::array<std::int32_t, 4> iattr = {});
  Var conv2d_dx(Var gy, Var kernel, int stride, int pad, int h, int w);
  Var conv2d_dk(Var x, Var gy, int stride, int pad, int kh, int kw);
  void backward_into(std::int32_t i, Var g, std::vector<Var>& adj,
                     const std::vector<char>& useful);
  void accumulate(std::vector<Var>& adj, std::int32_t parent, Var contribution);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace specalign::ad
