#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "specalign/models.hpp"
#include "specalign/rng.hpp"

using namespace specalign;

TEST_CASE("build_net: shape contract and determinism") {
  NetSpec spec;
  spec.kind = NetKind::generator;
  spec.latent = 3;
  spec.image_side = 16;
  Graph g = build_net(spec, 5);
  CHECK(g.input_arity == 3);
  CHECK(g.output_arity == 256);

  Graph g2 = build_net(spec, 5);
  auto p1 = g.parameters();
  auto p2 = g2.parameters();
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i)
    for (std::size_t j = 0; j < p1[i].value->numel(); ++j)
      CHECK((*p1[i].value)[j] == (*p2[i].value)[j]);

  Graph g3 = build_net(spec, 6);
  bool any_diff = false;
  auto p3 = g3.parameters();
  for (std::size_t i = 0; i < p1.size() && !any_diff; ++i)
    for (std::size_t j = 0; j < p1[i].value->numel(); ++j)
      if ((*p1[i].value)[j] != (*p3[i].value)[j]) {
        any_diff = true;
        break;
      }
  CHECK(any_diff);
}

TEST_CASE("build_net: generator outputs stay in [0,1]") {
  NetSpec spec;
  spec.kind = NetKind::generator;
  spec.latent = 4;
  spec.image_side = 16;
  Graph g = build_net(spec, 11);
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor z({4});
    for (std::size_t i = 0; i < 4; ++i) z[i] = 50.0 * rng.normal();
    Tensor x = evaluate(g, z).first;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      CHECK(x[i] >= 0.0);
      CHECK(x[i] <= 1.0);
    }
  }
}

TEST_CASE("build_net: conv variants and inversion spec") {
  NetSpec spec;
  spec.kind = NetKind::generator;
  spec.latent = 3;
  spec.image_side = 32;
  spec.conv_features = 4;
  Graph g = build_net(spec, 2);
  CHECK(g.output_arity == 1024);
  Tensor x = evaluate(g, Tensor::from({3}, {0.1, -0.2, 0.3})).first;
  CHECK(x.numel() == 1024);

  NetSpec disc = spec;
  disc.kind = NetKind::discriminator;
  Graph d = build_net(disc, 3);
  CHECK(d.input_arity == 1024);
  CHECK(d.output_arity == 1);

  NetSpec enc = inversion_encoder_spec(spec);
  CHECK(enc.kind == NetKind::encoder);
  CHECK(enc.conv_features == 8);  // twice the generator's base feature count

  NetSpec mlp;
  mlp.hidden = {32, 16};
  NetSpec enc2 = inversion_encoder_spec(mlp);
  CHECK(enc2.hidden == std::vector<std::size_t>{64, 32});
}

TEST_CASE("rmsprop: hand-applied recurrence on a single weight") {
  Tensor p = Tensor::from({1}, {1.0});
  std::vector<ParamRef> params{{&p, "p", false}};
  OptimizerState st = make_optimizer(rmsprop_defaults(), params);
  optimizer_step(st, params, {Tensor::from({1}, {1.0})});
  // acc = 0.1; p = 1 - 1e-4 / sqrt(0.1 + 1e-6)
  double expected = 1.0 - 1e-4 / std::sqrt(0.1 + 1e-6);
  CHECK(st.acc1[0][0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.99968377).epsilon(1e-7));
}

TEST_CASE("optimizers: zero gradient leaves fresh parameters unchanged") {
  for (OptimizerConfig cfg : {rmsprop_defaults(), adam_defaults(), sgd_nesterov_defaults()}) {
    Tensor p = Tensor::from({2}, {0.5, -0.25});
    std::vector<ParamRef> params{{&p, "p", false}};
    OptimizerState st = make_optimizer(cfg, params);
    optimizer_step(st, params, {Tensor::zeros({2})});
    CHECK(p[0] == 0.5);
    CHECK(p[1] == -0.25);
  }
}

TEST_CASE("nesterov with zero momentum reduces to plain sgd") {
  OptimizerConfig cfg = sgd_nesterov_defaults();
  cfg.momentum = 0.0;
  Tensor p = Tensor::from({1}, {1.0});
  std::vector<ParamRef> params{{&p, "p", false}};
  OptimizerState st = make_optimizer(cfg, params);
  optimizer_step(st, params, {Tensor::from({1}, {0.5})});
  CHECK(p[0] == doctest::Approx(1.0 - 1e-2 * 0.5).epsilon(1e-15));
}

TEST_CASE("optimizer determinism and leak clipping") {
  auto run = [](double seed_shift) {
    Tensor w = Tensor::from({2}, {0.1, 0.2});
    Tensor leak = Tensor::from({1, 1}, {0.9});
    std::vector<ParamRef> params{{&w, "w", false}, {&leak, "leak", true}};
    OptimizerConfig cfg = sgd_nesterov_defaults();
    cfg.learning_rate = 0.5;
    OptimizerState st = make_optimizer(cfg, params);
    for (int i = 0; i < 20; ++i)
      optimizer_step(st, params, {Tensor::from({2}, {0.3 + seed_shift, -0.1}),
                                  Tensor::from({1, 1}, {-2.0})});
    return std::pair{w, leak};
  };
  auto [w1, l1] = run(0.0);
  auto [w2, l2] = run(0.0);
  CHECK(w1[0] == w2[0]);
  CHECK(w1[1] == w2[1]);
  // Pushed hard toward larger leaks, yet clipped into [0,1] every step.
  CHECK(l1[0] <= 1.0);
  CHECK(l1[0] >= 0.0);
}

TEST_CASE("optimizer_step rejects bad gradients") {
  Tensor p = Tensor::from({2}, {1.0, 2.0});
  std::vector<ParamRef> params{{&p, "p", false}};
  OptimizerState st = make_optimizer(rmsprop_defaults(), params);
  CHECK_THROWS_AS(optimizer_step(st, params, {Tensor::zeros({3})}), ValidationError);
  CHECK_THROWS_AS(optimizer_step(st, params, {Tensor::from({2}, {1.0, std::nan("")})}),
                  NumericError);
}

TEST_CASE("prelu leaks stay in [0,1] through training-like updates") {
  NetSpec spec;
  spec.latent = 2;
  spec.image_side = 16;
  spec.hidden = {8};
  Graph g = build_net(spec, 7);
  auto params = g.parameters();
  OptimizerConfig cfg = sgd_nesterov_defaults();
  cfg.learning_rate = 5.0;  // exaggerated to slam the leak against the bounds
  OptimizerState st = make_optimizer(cfg, params);
  CounterRng rng(9);
  for (int step = 0; step < 50; ++step) {
    std::vector<Tensor> grads;
    for (const ParamRef& p : params) {
      Tensor grad(p.value->dims());
      for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] = rng.normal();
      grads.push_back(std::move(grad));
    }
    optimizer_step(st, params, grads);
    for (const ParamRef& p : params)
      if (p.clip01)
        for (std::size_t i = 0; i < p.value->numel(); ++i) {
          CHECK((*p.value)[i] >= 0.0);
          CHECK((*p.value)[i] <= 1.0);
        }
  }
}
