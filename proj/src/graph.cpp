#include "specalign/graph.hpp"

#include <numeric>

namespace specalign {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

// Canonicalizes a vector argument to {m, cols}; remembers rank-1 inputs
// so results can be returned in the caller's shape.
Tensor as_matrix(const Tensor& t, const char* what) {
  if (t.rank() == 1) return t.reshaped({t.dims()[0], 1});
  if (t.rank() == 2) return t;
  throw ValidationError(std::string(what) + ": expected a vector or matrix");
}

Tensor tile_to_cols(const Tensor& z, std::size_t cols) {
  Tensor out({z.numel(), cols});
  for (std::size_t i = 0; i < z.numel(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = z[i];
  return out;
}

Tensor restore_rank(const Tensor& t, bool rank1) {
  return rank1 ? t.reshaped({t.numel()}) : t;
}

}  // namespace

std::vector<ParamRef> Graph::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::string prefix = "layer" + std::to_string(i);
    if (auto* a = std::get_if<AffineLayer>(&layers[i])) {
      out.push_back({&a->weight, prefix + ".weight", false});
      out.push_back({&a->bias, prefix + ".bias", false});
    } else if (auto* c = std::get_if<Conv2dLayer>(&layers[i])) {
      out.push_back({&c->kernel, prefix + ".kernel", false});
      out.push_back({&c->bias, prefix + ".bias", false});
    } else if (auto* p = std::get_if<PreluLayer>(&layers[i])) {
      out.push_back({&p->leak, prefix + ".leak", true});
    }
  }
  return out;
}

std::vector<ParamView> Graph::parameters() const {
  std::vector<ParamView> out;
  for (const ParamRef& r : const_cast<Graph*>(this)->parameters())
    out.push_back({r.value, r.name, r.clip01});
  return out;
}

std::vector<std::size_t> Graph::infer_output_dims(std::vector<std::size_t> dims) const {
  for (const Layer& layer : layers) {
    if (const auto* a = std::get_if<AffineLayer>(&layer)) {
      if (dims.size() != 1 || dims[0] != a->weight.cols())
        throw ValidationError("graph: affine layer input arity mismatch");
      dims = {a->weight.rows()};
    } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      if (dims.size() != 3 || dims[0] != c->kernel.dims()[1])
        throw ValidationError("graph: conv layer expects {c,h,w} features");
      std::size_t hp = dims[1] + 2 * static_cast<std::size_t>(c->pad);
      std::size_t wp = dims[2] + 2 * static_cast<std::size_t>(c->pad);
      std::size_t kh = c->kernel.dims()[2], kw = c->kernel.dims()[3];
      if (hp < kh || wp < kw) throw ValidationError("graph: conv kernel exceeds padded input");
      dims = {c->kernel.dims()[0],
              (hp - kh) / static_cast<std::size_t>(c->stride) + 1,
              (wp - kw) / static_cast<std::size_t>(c->stride) + 1};
    } else if (const auto* r = std::get_if<ReshapeLayer>(&layer)) {
      if (product(dims) != product(r->feature_dims))
        throw ValidationError("graph: reshape changes feature count");
      dims = r->feature_dims;
    }
    // PReLU and squash preserve dims.
  }
  return dims;
}

void Graph::validate() const {
  auto out = infer_output_dims({input_arity});
  if (product(out) != output_arity)
    throw ValidationError("graph: output arity does not match layer chain");
}

std::vector<ad::Var> lift_parameters(ad::Tape& tape, const Graph& g) {
  std::vector<ad::Var> out;
  for (const ParamView& p : g.parameters()) out.push_back(tape.leaf(*p.value));
  return out;
}

ad::Var forward_layers(ad::Tape& tape, const Graph& g, std::span<const ad::Var> params,
                       ad::Var input, std::vector<ad::Var>* boundaries) {
  std::size_t batch = tape.value(input).cols();
  if (tape.value(input).rows() != g.input_arity)
    throw ValidationError("graph: input arity mismatch");
  ad::Var x = input;
  if (boundaries) {
    boundaries->clear();
    boundaries->push_back(x);
  }
  std::size_t pi = 0;
  for (const Layer& layer : g.layers) {
    if (std::holds_alternative<AffineLayer>(layer)) {
      ad::Var w = params[pi++];
      ad::Var b = params[pi++];
      x = tape.add(tape.matmul(w, x), tape.tile_cols(b, batch));
    } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      ad::Var kern = params[pi++];
      ad::Var b = params[pi++];
      x = tape.conv2d(x, kern, c->stride, c->pad);
      const auto& od = tape.value(x).dims();  // {cout, ho, wo, batch}
      std::size_t flat = od[1] * od[2] * od[3];
      x = tape.reshape(x, {od[0], flat});
      x = tape.add(x, tape.tile_cols(b, flat));
      x = tape.reshape(x, od);
    } else if (const auto* p = std::get_if<PreluLayer>(&layer)) {
      ad::Var leak = params[pi++];
      ad::Var y = tape.add(tape.relu_pos(x), tape.scale_by(tape.relu_neg(x), leak));
      x = p->offset != 0.0 ? tape.add_const(y, p->offset) : y;
    } else if (std::holds_alternative<SquashLayer>(layer)) {
      x = tape.scale(tape.add_const(tape.tanh(x), 1.0), 0.5);
    } else if (const auto* r = std::get_if<ReshapeLayer>(&layer)) {
      std::vector<std::size_t> target = r->feature_dims;
      target.push_back(batch);
      x = tape.reshape(x, target);
    }
    if (boundaries) boundaries->push_back(x);
  }
  // Outputs are reported as {n, batch} regardless of internal layout.
  if (tape.value(x).rank() != 2) {
    x = tape.reshape(x, {tape.value(x).numel() / batch, batch});
    if (boundaries) boundaries->back() = x;
  }
  if (tape.value(x).rows() != g.output_arity)
    throw ValidationError("graph: output arity mismatch");
  return x;
}

std::pair<Tensor, EvalTape> evaluate(const Graph& g, const Tensor& z) {
  bool rank1 = z.rank() == 1;
  Tensor zin = as_matrix(z, "evaluate");
  ensure_finite(zin, "evaluate");
  EvalTape tape;
  tape.arena = std::make_shared<ad::Tape>();
  auto params = lift_parameters(*tape.arena, g);
  tape.input = tape.arena->leaf(zin);
  tape.output = forward_layers(*tape.arena, g, params, tape.input, &tape.boundaries);
  Tensor out = tape.arena->value(tape.output);
  return {restore_rank(out, rank1 && out.cols() == 1), std::move(tape)};
}

Tensor vjp(const Graph& g, EvalTape& tape, const Tensor& w) {
  bool rank1 = w.rank() == 1;
  Tensor wm = as_matrix(w, "vjp");
  const Tensor& out = tape.arena->value(tape.output);
  if (out.rows() != g.output_arity ||
      tape.arena->value(tape.input).rows() != g.input_arity)
    throw ValidationError("vjp: tape does not belong to this graph");
  if (!wm.same_dims(out))
    throw ValidationError("vjp: cotangent shape does not match tape output");
  ad::Var seed = tape.arena->leaf(wm);
  ad::Var grad = tape.arena->gradients(tape.output, seed, {&tape.input, 1})[0];
  return restore_rank(tape.arena->value(grad), rank1);
}

namespace {

struct ProductSetup {
  ad::Tape tape;
  ad::Var input;
  ad::Var output;
};

// Forward pass over `cols` replicated copies of z, so columnwise products
// for several vectors cost one recorded pass.
void run_replicated(ProductSetup& s, const Graph& g, const Tensor& z, std::size_t cols) {
  Tensor zv = as_matrix(z, "jacobian product");
  if (zv.cols() != 1) throw ValidationError("jacobian product: z must be a single vector");
  ensure_finite(zv, "jacobian product");
  auto params = lift_parameters(s.tape, g);
  s.input = s.tape.leaf(tile_to_cols(zv, cols));
  s.output = forward_layers(s.tape, g, params, s.input, nullptr);
}

}  // namespace

Tensor jvp(const Graph& g, const Tensor& z, const Tensor& v) {
  bool rank1 = v.rank() == 1;
  Tensor vm = as_matrix(v, "jvp");
  if (vm.rows() != g.input_arity) throw ValidationError("jvp: tangent arity mismatch");
  ProductSetup s;
  run_replicated(s, g, z, vm.cols());
  // Reverse pass against a dummy cotangent gives w -> J^T w, linear in w;
  // reverse-differentiating that against v yields J v.
  ad::Var w = s.tape.leaf(Tensor::full({g.output_arity, vm.cols()}, 1.0));
  ad::Var jt_w = s.tape.gradients(s.output, w, {&s.input, 1})[0];
  ad::Var vvar = s.tape.leaf(vm);
  ad::Var jv = s.tape.gradients(jt_w, vvar, {&w, 1})[0];
  return restore_rank(s.tape.value(jv), rank1);
}

Tensor mz_matvec(const Graph& g, const Tensor& z, const Tensor& v) {
  bool rank1 = v.rank() == 1;
  Tensor vm = as_matrix(v, "mz_matvec");
  if (vm.rows() != g.input_arity) throw ValidationError("mz_matvec: tangent arity mismatch");
  ProductSetup s;
  run_replicated(s, g, z, vm.cols());
  ad::Var w = s.tape.leaf(Tensor::full({g.output_arity, vm.cols()}, 1.0));
  ad::Var jt_w = s.tape.gradients(s.output, w, {&s.input, 1})[0];
  ad::Var vvar = s.tape.leaf(vm);
  ad::Var jv = s.tape.gradients(jt_w, vvar, {&w, 1})[0];
  ad::Var back = s.tape.gradients(s.output, jv, {&s.input, 1})[0];
  return restore_rank(s.tape.value(back), rank1);
}

Tensor jjt_matvec(const Graph& g, const Tensor& z, const Tensor& w) {
  bool rank1 = w.rank() == 1;
  Tensor wm = as_matrix(w, "jjt_matvec");
  if (wm.rows() != g.output_arity) throw ValidationError("jjt_matvec: cotangent arity mismatch");
  ProductSetup s;
  run_replicated(s, g, z, wm.cols());
  ad::Var wvar = s.tape.leaf(wm);
  ad::Var jt_w = s.tape.gradients(s.output, wvar, {&s.input, 1})[0];
  // J applied to J^T w via the same double-reverse construction.
  ad::Var dummy = s.tape.leaf(Tensor::full({g.output_arity, wm.cols()}, 1.0));
  ad::Var jt_dummy = s.tape.gradients(s.output, dummy, {&s.input, 1})[0];
  ad::Var out = s.tape.gradients(jt_dummy, jt_w, {&dummy, 1})[0];
  return restore_rank(s.tape.value(out), rank1);
}

}  // namespace specalign
