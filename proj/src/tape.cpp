#include "specalign/tape.hpp"

#include <cmath>
#include <cstddef>

namespace specalign::ad {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw ValidationError(what);
}

// {C,H,W,B} index helper.
inline std::size_t idx4(std::size_t c, std::size_t h, std::size_t w, std::size_t b,
                        std::size_t H, std::size_t W, std::size_t B) {
  return ((c * H + h) * W + w) * B + b;
}

struct ConvDims {
  std::size_t cin, h, w, batch, cout, kh, kw, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& k, int stride, int pad) {
  require(x.rank() == 4 && k.rank() == 4, "conv2d: operands must be rank 4");
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
  require(pad >= 0, "conv2d: negative padding");
  ConvDims d;
  d.cin = x.dims()[0];
  d.h = x.dims()[1];
  d.w = x.dims()[2];
  d.batch = x.dims()[3];
  d.cout = k.dims()[0];
  require(k.dims()[1] == d.cin, "conv2d: channel mismatch");
  d.kh = k.dims()[2];
  d.kw = k.dims()[3];
  std::size_t hp = d.h + 2 * static_cast<std::size_t>(pad);
  std::size_t wp = d.w + 2 * static_cast<std::size_t>(pad);
  require(hp >= d.kh && wp >= d.kw, "conv2d: kernel larger than padded input");
  d.ho = (hp - d.kh) / static_cast<std::size_t>(stride) + 1;
  d.wo = (wp - d.kw) / static_cast<std::size_t>(stride) + 1;
  return d;
}

Tensor conv2d_value(const Tensor& x, const Tensor& k, int stride, int pad) {
  ConvDims d = conv_dims(x, k, stride, pad);
  Tensor y({d.cout, d.ho, d.wo, d.batch});
  for (std::size_t co = 0; co < d.cout; ++co)
    for (std::size_t ho = 0; ho < d.ho; ++ho)
      for (std::size_t wo = 0; wo < d.wo; ++wo)
        for (std::size_t ci = 0; ci < d.cin; ++ci)
          for (std::size_t i = 0; i < d.kh; ++i) {
            std::ptrdiff_t hin = static_cast<std::ptrdiff_t>(ho * stride + i) - pad;
            if (hin < 0 || hin >= static_cast<std::ptrdiff_t>(d.h)) continue;
            for (std::size_t j = 0; j < d.kw; ++j) {
              std::ptrdiff_t win = static_cast<std::ptrdiff_t>(wo * stride + j) - pad;
              if (win < 0 || win >= static_cast<std::ptrdiff_t>(d.w)) continue;
              double kv = k[idx4(co, ci, i, j, d.cin, d.kh, d.kw)];
              if (kv == 0.0) continue;
              for (std::size_t b = 0; b < d.batch; ++b)
                y[idx4(co, ho, wo, b, d.ho, d.wo, d.batch)] +=
                    kv * x[idx4(ci, static_cast<std::size_t>(hin),
                                static_cast<std::size_t>(win), b, d.h, d.w, d.batch)];
            }
          }
  return y;
}

// Adjoint of conv2d in x: scatter each output cotangent back through the kernel.
Tensor conv2d_dx_value(const Tensor& gy, const Tensor& k, int stride, int pad, int h, int w) {
  std::size_t cout = gy.dims()[0], ho = gy.dims()[1], wo = gy.dims()[2], batch = gy.dims()[3];
  std::size_t cin = k.dims()[1], kh = k.dims()[2], kw = k.dims()[3];
  require(k.dims()[0] == cout, "conv2d_dx: channel mismatch");
  Tensor gx({cin, static_cast<std::size_t>(h), static_cast<std::size_t>(w), batch});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oh = 0; oh < ho; ++oh)
      for (std::size_t ow = 0; ow < wo; ++ow)
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t i = 0; i < kh; ++i) {
            std::ptrdiff_t hin = static_cast<std::ptrdiff_t>(oh * stride + i) - pad;
            if (hin < 0 || hin >= h) continue;
            for (std::size_t j = 0; j < kw; ++j) {
              std::ptrdiff_t win = static_cast<std::ptrdiff_t>(ow * stride + j) - pad;
              if (win < 0 || win >= w) continue;
              double kv = k[idx4(co, ci, i, j, cin, kh, kw)];
              if (kv == 0.0) continue;
              for (std::size_t b = 0; b < batch; ++b)
                gx[idx4(ci, static_cast<std::size_t>(hin), static_cast<std::size_t>(win), b,
                        static_cast<std::size_t>(h), static_cast<std::size_t>(w), batch)] +=
                    kv * gy[idx4(co, oh, ow, b, ho, wo, batch)];
            }
          }
  return gx;
}

// Adjoint of conv2d in the kernel.
Tensor conv2d_dk_value(const Tensor& x, const Tensor& gy, int stride, int pad, int kh, int kw) {
  std::size_t cin = x.dims()[0], h = x.dims()[1], w = x.dims()[2], batch = x.dims()[3];
  std::size_t cout = gy.dims()[0], ho = gy.dims()[1], wo = gy.dims()[2];
  require(gy.dims()[3] == batch, "conv2d_dk: batch mismatch");
  Tensor gk({cout, cin, static_cast<std::size_t>(kh), static_cast<std::size_t>(kw)});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oh = 0; oh < ho; ++oh)
      for (std::size_t ow = 0; ow < wo; ++ow)
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t i = 0; i < static_cast<std::size_t>(kh); ++i) {
            std::ptrdiff_t hin = static_cast<std::ptrdiff_t>(oh * stride + i) - pad;
            if (hin < 0 || hin >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t j = 0; j < static_cast<std::size_t>(kw); ++j) {
              std::ptrdiff_t win = static_cast<std::ptrdiff_t>(ow * stride + j) - pad;
              if (win < 0 || win >= static_cast<std::ptrdiff_t>(w)) continue;
              double s = 0.0;
              for (std::size_t b = 0; b < batch; ++b)
                s += x[idx4(ci, static_cast<std::size_t>(hin), static_cast<std::size_t>(win), b,
                            h, w, batch)] *
                     gy[idx4(co, oh, ow, b, ho, wo, batch)];
              gk[idx4(co, ci, i, j, cin, static_cast<std::size_t>(kh),
                      static_cast<std::size_t>(kw))] += s;
            }
          }
  return gk;
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  require(v.tape == this && v.idx >= 0 && static_cast<std::size_t>(v.idx) < nodes_.size(),
          "tape: var does not belong to this tape");
  return nodes_[static_cast<std::size_t>(v.idx)];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Var Tape::record(Op op, std::int32_t a, std::int32_t b, Tensor value, double c0, double c1,
                 std::array<std::int32_t, 4> iattr) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.a = a;
  n.b = b;
  n.c0 = c0;
  n.c1 = c1;
  n.iattr = iattr;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor value) {
  require(value.numel() > 0, "tape: empty leaf");
  return record(Op::kLeaf, -1, -1, std::move(value));
}

namespace {
Tensor map_unary(const Tensor& x, double (*f)(double)) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(out[i]);
  return out;
}
}  // namespace

Var Tape::add(Var a, Var b) {
  return record(Op::kAdd, a.idx, b.idx, specalign::add(value(a), value(b)));
}
Var Tape::sub(Var a, Var b) {
  return record(Op::kSub, a.idx, b.idx, specalign::sub(value(a), value(b)));
}
Var Tape::mul(Var a, Var b) {
  return record(Op::kMul, a.idx, b.idx, hadamard(value(a), value(b)));
}

Var Tape::div(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require(x.same_dims(y), "div: shape mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= y[i];
  return record(Op::kDiv, a.idx, b.idx, std::move(out));
}

Var Tape::neg(Var a) { return record(Op::kNeg, a.idx, -1, specalign::scale(value(a), -1.0)); }
Var Tape::scale(Var a, double c) {
  return record(Op::kScale, a.idx, -1, specalign::scale(value(a), c), c);
}

Var Tape::add_const(Var a, double c) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c;
  return record(Op::kAddConst, a.idx, -1, std::move(out), c);
}

Var Tape::relu_pos(Var a) {
  return record(Op::kReluPos, a.idx, -1,
                map_unary(value(a), +[](double x) { return x > 0 ? x : 0.0; }));
}
Var Tape::relu_neg(Var a) {
  return record(Op::kReluNeg, a.idx, -1,
                map_unary(value(a), +[](double x) { return x < 0 ? x : 0.0; }));
}
Var Tape::step_pos(Var a) {
  return record(Op::kStepPos, a.idx, -1,
                map_unary(value(a), +[](double x) { return x > 0 ? 1.0 : 0.0; }));
}
Var Tape::step_neg(Var a) {
  return record(Op::kStepNeg, a.idx, -1,
                map_unary(value(a), +[](double x) { return x < 0 ? 1.0 : 0.0; }));
}
Var Tape::tanh(Var a) {
  return record(Op::kTanh, a.idx, -1, map_unary(value(a), +[](double x) { return std::tanh(x); }));
}
Var Tape::log(Var a) {
  return record(Op::kLog, a.idx, -1, map_unary(value(a), +[](double x) { return std::log(x); }));
}
Var Tape::sqrt(Var a) {
  return record(Op::kSqrt, a.idx, -1, map_unary(value(a), +[](double x) { return std::sqrt(x); }));
}

Var Tape::clamp(Var a, double lo, double hi) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::min(std::max(out[i], lo), hi);
  return record(Op::kClamp, a.idx, -1, std::move(out), lo, hi);
}

Var Tape::matmul(Var a, Var b) {
  return record(Op::kMatmul, a.idx, b.idx, specalign::matmul(value(a), value(b)));
}
Var Tape::transpose(Var a) {
  return record(Op::kTranspose, a.idx, -1, value(a).transposed());
}
Var Tape::reshape(Var a, std::vector<std::size_t> dims) {
  return record(Op::kReshape, a.idx, -1, value(a).reshaped(std::move(dims)));
}

Var Tape::sum_all(Var a) {
  double s = 0.0;
  for (double x : value(a).data()) s += x;
  return record(Op::kSumAll, a.idx, -1, Tensor::from({1, 1}, {s}));
}

Var Tape::broadcast_all(Var scalar, std::vector<std::size_t> dims) {
  require(value(scalar).numel() == 1, "broadcast_all: source is not a scalar");
  return record(Op::kBroadcastAll, scalar.idx, -1,
                Tensor::full(std::move(dims), value(scalar)[0]));
}

Var Tape::sum_rows(Var a) {
  const Tensor& x = value(a);
  require(x.rank() == 2, "sum_rows: rank != 2");
  Tensor out({1, x.cols()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(0, j) += x.at(i, j);
  return record(Op::kSumRows, a.idx, -1, std::move(out));
}

Var Tape::tile_rows(Var a, std::size_t rows) {
  const Tensor& x = value(a);
  require(x.rank() == 2 && x.rows() == 1, "tile_rows: source is not {1,k}");
  Tensor out({rows, x.cols()});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(0, j);
  return record(Op::kTileRows, a.idx, -1, std::move(out));
}

Var Tape::sum_cols(Var a) {
  const Tensor& x = value(a);
  require(x.rank() == 2, "sum_cols: rank != 2");
  Tensor out({x.rows(), 1});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, 0) += x.at(i, j);
  return record(Op::kSumCols, a.idx, -1, std::move(out));
}

Var Tape::tile_cols(Var a, std::size_t cols) {
  const Tensor& x = value(a);
  require(x.rank() == 2 && x.cols() == 1, "tile_cols: source is not {m,1}");
  Tensor out({x.rows(), cols});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = x.at(i, 0);
  return record(Op::kTileCols, a.idx, -1, std::move(out));
}

Var Tape::scale_by(Var a, Var scalar) {
  require(value(scalar).numel() == 1, "scale_by: multiplier is not a scalar");
  return record(Op::kScaleBy, a.idx, scalar.idx,
                specalign::scale(value(a), value(scalar)[0]));
}

Var Tape::conv2d(Var x, Var kernel, int stride, int pad) {
  return record(Op::kConv2d, x.idx, kernel.idx,
                conv2d_value(value(x), value(kernel), stride, pad), 0, 0,
                {stride, pad, 0, 0});
}

Var Tape::conv2d_dx(Var gy, Var kernel, int stride, int pad, int h, int w) {
  return record(Op::kConv2dDx, gy.idx, kernel.idx,
                conv2d_dx_value(value(gy), value(kernel), stride, pad, h, w), 0, 0,
                {stride, pad, h, w});
}

Var Tape::conv2d_dk(Var x, Var gy, int stride, int pad, int kh, int kw) {
  return record(Op::kConv2dDk, x.idx, gy.idx,
                conv2d_dk_value(value(x), value(gy), stride, pad, kh, kw), 0, 0,
                {stride, pad, kh, kw});
}

Var Tape::detach(Var a) { return record(Op::kDetach, a.idx, -1, value(a)); }

void Tape::accumulate(std::vector<Var>& adj, std::int32_t parent, Var contribution) {
  if (parent < 0 || static_cast<std::size_t>(parent) >= adj.size()) return;
  Var& slot = adj[static_cast<std::size_t>(parent)];
  slot = slot.valid() ? add(slot, contribution) : contribution;
}

void Tape::backward_into(std::int32_t i, Var g, std::vector<Var>& adj,
                         const std::vector<char>& useful) {
  // Builds this node's contribution to its parents' adjoints using
  // recorded primitives, so results stay differentiable. Contributions
  // toward nodes that cannot reach any requested target are skipped
  // before their (possibly large) tensors get built. Copy the node
  // fields first: recording reallocates nodes_.
  struct {
    Op op;
    std::int32_t a, b;
    double c0, c1;
    std::array<std::int32_t, 4> iattr;
  } n;
  {
    const Node& src = nodes_[static_cast<std::size_t>(i)];
    n.op = src.op;
    n.a = src.a;
    n.b = src.b;
    n.c0 = src.c0;
    n.c1 = src.c1;
    n.iattr = src.iattr;
  }
  Var self{this, i};
  Var pa{this, n.a};
  Var pb{this, n.b};
  auto use = [&](std::int32_t p) { return p >= 0 && useful[static_cast<std::size_t>(p)]; };
  switch (n.op) {
    case Op::kLeaf:
    case Op::kDetach:
    case Op::kStepPos:
    case Op::kStepNeg:
      break;
    case Op::kAdd:
      if (use(n.a)) accumulate(adj, n.a, g);
      if (use(n.b)) accumulate(adj, n.b, g);
      break;
    case Op::kSub:
      if (use(n.a)) accumulate(adj, n.a, g);
      if (use(n.b)) accumulate(adj, n.b, neg(g));
      break;
    case Op::kMul:
      if (use(n.a)) accumulate(adj, n.a, mul(g, pb));
      if (use(n.b)) accumulate(adj, n.b, mul(g, pa));
      break;
    case Op::kDiv:
      if (use(n.a)) accumulate(adj, n.a, div(g, pb));
      if (use(n.b)) accumulate(adj, n.b, neg(div(mul(g, self), pb)));
      break;
    case Op::kNeg:
      if (use(n.a)) accumulate(adj, n.a, neg(g));
      break;
    case Op::kScale:
      if (use(n.a)) accumulate(adj, n.a, scale(g, n.c0));
      break;
    case Op::kAddConst:
      if (use(n.a)) accumulate(adj, n.a, g);
      break;
    case Op::kReluPos:
      if (use(n.a)) accumulate(adj, n.a, mul(g, step_pos(pa)));
      break;
    case Op::kReluNeg:
      if (use(n.a)) accumulate(adj, n.a, mul(g, step_neg(pa)));
      break;
    case Op::kTanh:
      if (use(n.a)) accumulate(adj, n.a, mul(g, add_const(neg(mul(self, self)), 1.0)));
      break;
    case Op::kLog:
      if (use(n.a)) accumulate(adj, n.a, div(g, pa));
      break;
    case Op::kSqrt:
      if (use(n.a)) accumulate(adj, n.a, div(g, scale(self, 2.0)));
      break;
    case Op::kClamp: {
      // Pass-through inside (lo, hi), zero outside.
      if (use(n.a)) {
        Var inside = mul(step_pos(add_const(pa, -n.c0)), step_neg(add_const(pa, -n.c1)));
        accumulate(adj, n.a, mul(g, inside));
      }
      break;
    }
    case Op::kMatmul:
      if (use(n.a)) accumulate(adj, n.a, matmul(g, transpose(pb)));
      if (use(n.b)) accumulate(adj, n.b, matmul(transpose(pa), g));
      break;
    case Op::kTranspose:
      if (use(n.a)) accumulate(adj, n.a, transpose(g));
      break;
    case Op::kReshape:
      if (use(n.a)) accumulate(adj, n.a, reshape(g, value(pa).dims()));
      break;
    case Op::kSumAll:
      if (use(n.a)) accumulate(adj, n.a, broadcast_all(g, value(pa).dims()));
      break;
    case Op::kBroadcastAll:
      if (use(n.a)) accumulate(adj, n.a, sum_all(g));
      break;
    case Op::kSumRows:
      if (use(n.a)) accumulate(adj, n.a, tile_rows(g, value(pa).rows()));
      break;
    case Op::kTileRows:
      if (use(n.a)) accumulate(adj, n.a, sum_rows(g));
      break;
    case Op::kSumCols:
      if (use(n.a)) accumulate(adj, n.a, tile_cols(g, value(pa).cols()));
      break;
    case Op::kTileCols:
      if (use(n.a)) accumulate(adj, n.a, sum_cols(g));
      break;
    case Op::kScaleBy:
      if (use(n.a)) accumulate(adj, n.a, scale_by(g, pb));
      if (use(n.b)) accumulate(adj, n.b, sum_all(mul(g, pa)));
      break;
    case Op::kConv2d:
      if (use(n.a))
        accumulate(adj, n.a,
                   conv2d_dx(g, pb, n.iattr[0], n.iattr[1],
                             static_cast<int>(value(pa).dims()[1]),
                             static_cast<int>(value(pa).dims()[2])));
      if (use(n.b))
        accumulate(adj, n.b,
                   conv2d_dk(pa, g, n.iattr[0], n.iattr[1],
                             static_cast<int>(value(pb).dims()[2]),
                             static_cast<int>(value(pb).dims()[3])));
      break;
    case Op::kConv2dDx:
      // self = conv_dx(gy, k); bilinear in (gy, k).
      if (use(n.a)) accumulate(adj, n.a, conv2d(g, pb, n.iattr[0], n.iattr[1]));
      if (use(n.b))
        accumulate(adj, n.b,
                   conv2d_dk(g, pa, n.iattr[0], n.iattr[1],
                             static_cast<int>(value(pb).dims()[2]),
                             static_cast<int>(value(pb).dims()[3])));
      break;
    case Op::kConv2dDk:
      // self = conv_dk(x, gy); bilinear in (x, gy).
      if (use(n.a))
        accumulate(adj, n.a,
                   conv2d_dx(pb, g, n.iattr[0], n.iattr[1],
                             static_cast<int>(value(pa).dims()[1]),
                             static_cast<int>(value(pa).dims()[2])));
      if (use(n.b)) accumulate(adj, n.b, conv2d(pa, g, n.iattr[0], n.iattr[1]));
      break;
  }
}

std::vector<Var> Tape::gradients(Var y, Var seed, std::span<const Var> wrt) {
  require(y.tape == this && seed.tape == this, "gradients: foreign var");
  require(value(y).same_dims(value(seed)), "gradients: seed shape differs from output shape");

  // A node is useful when one of the requested targets is reachable from
  // it through parent edges; adjoints only propagate along useful nodes.
  std::vector<char> useful(static_cast<std::size_t>(y.idx) + 1, 0);
  for (Var x : wrt) {
    require(x.tape == this, "gradients: foreign wrt var");
    if (x.idx <= y.idx) useful[static_cast<std::size_t>(x.idx)] = 1;
  }
  for (std::int32_t i = 0; i <= y.idx; ++i) {
    if (useful[static_cast<std::size_t>(i)]) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if ((n.a >= 0 && useful[static_cast<std::size_t>(n.a)]) ||
        (n.b >= 0 && useful[static_cast<std::size_t>(n.b)]))
      useful[static_cast<std::size_t>(i)] = 1;
  }

  std::vector<Var> adj(static_cast<std::size_t>(y.idx) + 1);
  adj[static_cast<std::size_t>(y.idx)] = seed;
  if (useful[static_cast<std::size_t>(y.idx)]) {
    for (std::int32_t i = y.idx; i >= 0; --i) {
      Var g = adj[static_cast<std::size_t>(i)];
      if (!g.valid()) continue;
      backward_into(i, g, adj, useful);
    }
  }
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var x : wrt) {
    if (static_cast<std::size_t>(x.idx) < adj.size() && adj[static_cast<std::size_t>(x.idx)].valid())
      out.push_back(adj[static_cast<std::size_t>(x.idx)]);
    else
      out.push_back(constant(Tensor::zeros(value(x).dims())));
  }
  return out;
}

std::vector<Var> Tape::gradients(Var y_scalar, std::span<const Var> wrt) {
  require(value(y_scalar).numel() == 1, "gradients: output is not scalar");
  return gradients(y_scalar, constant(Tensor::full(value(y_scalar).dims(), 1.0)), wrt);
}

}  // namespace specalign::ad
