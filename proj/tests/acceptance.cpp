// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Run a subset by listing criterion numbers as arguments.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "specalign/align_reg.hpp"
#include "specalign/eigenpath.hpp"
#include "specalign/evalsuite.hpp"
#include "specalign/numerics.hpp"
#include "specalign/rng.hpp"
#include "specalign/spectral.hpp"
#include "specalign/trainer.hpp"

using namespace specalign;
using Clock = std::chrono::steady_clock;

namespace {

Graph affine_graph(const Tensor& a) {
  Graph g;
  g.input_arity = a.cols();
  g.output_arity = a.rows();
  g.layers.push_back(AffineLayer{a, Tensor::zeros({a.rows(), 1})});
  return g;
}

Graph random_mlp(std::size_t in, std::size_t hid, std::size_t out, CounterRng& rng,
                 bool squash) {
  Graph g;
  g.input_arity = in;
  g.output_arity = out;
  auto rnd = [&](std::size_t r, std::size_t c) {
    Tensor t({r, c});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.6 * rng.normal();
    return t;
  };
  g.layers.push_back(AffineLayer{rnd(hid, in), rnd(hid, 1)});
  g.layers.push_back(PreluLayer{Tensor::from({1, 1}, {0.3}), 0.0});
  g.layers.push_back(AffineLayer{rnd(out, hid), rnd(out, 1)});
  if (squash) g.layers.push_back(SquashLayer{});
  return g;
}

Tensor random_vec(std::size_t n, CounterRng& rng) {
  Tensor t({n});
  for (std::size_t i = 0; i < n; ++i) t[i] = rng.normal();
  return t;
}

double rel_err(const Tensor& a, const Tensor& b) {
  return sub(a, b).frobenius_norm() / std::max(1e-12, b.frobenius_norm());
}

// --- criterion 1: adjoint identity --------------------------------------

bool criterion1(std::string& detail) {
  CounterRng rng(101);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t in = 2 + rng.uniform_int(0, 4);
    std::size_t hid = 3 + rng.uniform_int(0, 5);
    std::size_t out = 2 + rng.uniform_int(0, 4);
    Graph g = random_mlp(in, hid, out, rng, trial % 3 == 0);
    Tensor z = random_vec(in, rng);
    Tensor v = random_vec(in, rng);
    Tensor w = random_vec(out, rng);
    double lhs = dot(w, jvp(g, z, v));
    auto [x, tape] = evaluate(g, z);
    double rhs = dot(vjp(g, tape, w), v);
    double err = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
    worst = std::max(worst, err);
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst relative mismatch %.2e over 1000 draws", worst);
  detail = buf;
  return worst <= 1e-10;
}

// --- criterion 2: products vs finite differences -------------------------

bool criterion2(std::string& detail) {
  CounterRng rng(202);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t in = 2 + rng.uniform_int(0, 3);
    std::size_t hid = 3 + rng.uniform_int(0, 3);
    std::size_t out = 2 + rng.uniform_int(0, 3);
    Graph g = random_mlp(in, hid, out, rng, trial % 4 == 0);
    Tensor z = random_vec(in, rng);

    Tensor jfd({out, in});
    const double h = 1e-5;
    for (std::size_t c = 0; c < in; ++c) {
      Tensor zp = z, zm = z;
      zp[c] += h;
      zm[c] -= h;
      Tensor fp = evaluate(g, zp).first;
      Tensor fm = evaluate(g, zm).first;
      for (std::size_t r = 0; r < out; ++r) jfd.at(r, c) = (fp[r] - fm[r]) / (2 * h);
    }

    Tensor jv_mat({out, in});
    for (std::size_t c = 0; c < in; ++c) {
      Tensor e = Tensor::zeros({in});
      e[c] = 1.0;
      Tensor col = jvp(g, z, e);
      for (std::size_t r = 0; r < out; ++r) jv_mat.at(r, c) = col[r];
    }
    Tensor jt_mat({out, in});
    auto [x, tape] = evaluate(g, z);
    for (std::size_t r = 0; r < out; ++r) {
      Tensor e = Tensor::zeros({out});
      e[r] = 1.0;
      Tensor row = vjp(g, tape, e);
      for (std::size_t c = 0; c < in; ++c) jt_mat.at(r, c) = row[c];
    }
    worst = std::max({worst, rel_err(jv_mat, jfd), rel_err(jt_mat, jfd)});
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst relative error %.2e over 100 nets", worst);
  detail = buf;
  return worst <= 1e-6;
}

// --- criterion 3: masked power iteration oracle ---------------------------

Tensor psd_with_aligned_prefix(std::size_t m, std::size_t aligned, double ratio,
                               CounterRng& rng) {
  Tensor q = Tensor::identity(m);
  std::size_t tail = m - aligned;
  for (std::size_t j = 0; j < tail; ++j) {
    std::vector<double> col(tail);
    double norm = 0;
    do {
      for (std::size_t i = 0; i < tail; ++i) col[i] = rng.normal();
      for (std::size_t prev = 0; prev < j; ++prev) {
        double proj = 0;
        for (std::size_t i = 0; i < tail; ++i) proj += col[i] * q.at(aligned + i, aligned + prev);
        for (std::size_t i = 0; i < tail; ++i) col[i] -= proj * q.at(aligned + i, aligned + prev);
      }
      norm = 0;
      for (double v : col) norm += v * v;
      norm = std::sqrt(norm);
    } while (norm < 1e-6);
    for (std::size_t i = 0; i < tail; ++i) q.at(aligned + i, aligned + j) = col[i] / norm;
    for (std::size_t i = 0; i < aligned; ++i) q.at(i, aligned + j) = 0.0;
  }
  Tensor lam({m, m});
  for (std::size_t i = 0; i < m; ++i) lam.at(i, i) = std::pow(1.0 / ratio, static_cast<double>(i));
  Tensor mat = matmul(matmul(q, lam), q.transposed());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      mat.at(i, j) = mat.at(j, i) = 0.5 * (mat.at(i, j) + mat.at(j, i));
  return mat;
}

bool criterion3(std::string& detail) {
  CounterRng rng(303);
  double worst_cos = 1.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t m = 4 + static_cast<std::size_t>(rng.uniform_int(0, 12));
    // Half the trials exercise column 1 on operators with arbitrary
    // eigenvectors; the rest use an aligned prefix and probe column j.
    std::size_t j = trial % 2 == 0
                        ? 1
                        : 2 + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 2));
    Tensor mat = psd_with_aligned_prefix(m, j - 1, 1.25, rng);
    auto oracle = symmetric_eig_descending(mat);
    auto est = estimate_leading_eigenpairs(
        [&](const Tensor& v) { return matmul(mat, v); },
        default_power_init(m, j, 9000 + static_cast<std::uint64_t>(trial)), 200);
    double c = 0;
    for (std::size_t i = 0; i < m; ++i)
      c += est.vectors.at(i, j - 1) * oracle.eigenvectors.at(i, j - 1);
    worst_cos = std::min(worst_cos, std::abs(c));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst |cos| %.9f over 500 operators", worst_cos);
  detail = buf;
  return worst_cos >= 0.999;
}

// --- criterion 4: batched iteration efficiency ----------------------------

double median_penalty_ms(const Graph& g, const Tensor& z, int k, int t, int trials) {
  std::vector<double> times;
  for (int i = 0; i < trials; ++i) {
    AlignRegOptions opts;
    opts.k = k;
    opts.iterations = t;
    auto t0 = Clock::now();
    alignment_regularizer_with_gradients(g, z, 5000 + static_cast<std::uint64_t>(i), opts);
    auto t1 = Clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

bool criterion4(std::string& detail) {
  // Instrumented call count: one batched product per iteration.
  Tensor mat = Tensor::from({4, 4}, {5, 0, 0, 0, 0, 3, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1});
  int calls = 0;
  estimate_leading_eigenpairs(
      [&](const Tensor& v) {
        ++calls;
        return matmul(mat, v);
      },
      default_power_init(4, 3, 11), 29);
  if (calls != 29) {
    detail = "matvec invoked " + std::to_string(calls) + " times for T=29";
    return false;
  }

  NetSpec spec;
  spec.kind = NetKind::generator;
  spec.latent = 64;
  spec.flat_dim = 128;
  spec.hidden = {64};
  Graph g = build_net(spec, 3);
  CounterRng rng(404);
  Tensor z = random_vec(64, rng);

  median_penalty_ms(g, z, 4, 8, 3);  // warm the allocator and caches
  double k4 = median_penalty_ms(g, z, 4, 8, 13);
  double k8 = median_penalty_ms(g, z, 8, 8, 13);
  double t8 = median_penalty_ms(g, z, 4, 8, 13);
  double t16 = median_penalty_ms(g, z, 4, 16, 13);
  double k_ratio = k8 / k4;
  double t_ratio = t16 / t8;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "matvec count ok; cost(2k)/cost(k) = %.2f, cost(2T)/cost(T) = %.2f at m=64",
                k_ratio, t_ratio);
  detail = buf;
  return k_ratio >= 1.0 && k_ratio <= 2.5 && t_ratio >= 1.5 && t_ratio <= 2.5;
}

// --- criterion 5: penalty values and gradient ------------------------------

bool criterion5(std::string& detail) {
  Graph axis = affine_graph(Tensor::from({3, 2}, {2, 0, 0, 1, 0, 0}));
  double r_axis = evaluate_alignment_regularizer(axis, Tensor::from({2}, {0.4, -0.2}), 2, 100, 5);
  if (std::abs(r_axis + 1.0) > 1e-6) {
    detail = "axis-aligned penalty " + std::to_string(r_axis);
    return false;
  }

  Graph rotated = affine_graph(Tensor::from({2, 2}, {1.5, 0.5, 0.5, 1.5}));
  double r_rot = evaluate_alignment_regularizer(rotated, Tensor::zeros({2}), 2, 400, 7);
  if (std::abs(r_rot + 1.0 / 3.0) > 1e-6) {
    detail = "rotated example penalty " + std::to_string(r_rot);
    return false;
  }

  NetSpec spec;
  spec.kind = NetKind::generator;
  spec.latent = 3;
  spec.flat_dim = 5;
  spec.hidden = {4};
  Graph g = build_net(spec, 2024);
  CounterRng rng(505);
  Tensor z({3});
  for (std::size_t i = 0; i < 3; ++i) z[i] = 0.5 * rng.normal();
  AlignRegOptions opts;
  opts.k = 2;
  opts.iterations = 6;
  const std::uint64_t seed = 314;
  RegGradient rg = alignment_regularizer_with_gradients(g, z, seed, opts);
  Graph probe = g;
  auto refs = probe.parameters();
  double h = 1e-4, worst = 0;
  for (std::size_t p = 0; p < refs.size(); ++p)
    for (std::size_t i = 0; i < refs[p].value->numel(); ++i) {
      double keep = (*refs[p].value)[i];
      (*refs[p].value)[i] = keep + h;
      double up = evaluate_alignment_regularizer(probe, z, 2, 6, seed);
      (*refs[p].value)[i] = keep - h;
      double dn = evaluate_alignment_regularizer(probe, z, 2, 6, seed);
      (*refs[p].value)[i] = keep;
      double fd = (up - dn) / (2 * h);
      worst = std::max(worst, std::abs(fd - rg.param_gradients[p][i]) / std::max(1.0, std::abs(fd)));
    }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "axis %.9f, rotated %.9f (target -1/3), gradient rel err %.2e",
                r_axis, r_rot, worst);
  detail = buf;
  return worst <= 1e-4;
}

// --- criterion 6: alignment by optimization --------------------------------

double optimize_penalty_only(bool reweight, std::uint64_t seed, int steps, double lr, int t,
                             int k) {
  CounterRng init(seed);
  Tensor a({8, 4});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = init.normal();
  Graph g = affine_graph(a);
  AlignRegOptions opts;
  opts.k = k;
  opts.iterations = t;
  opts.reweight_columns = reweight;
  const double lambda = 1.0;
  for (int s = 0; s < steps; ++s) {
    RegGradient rg = alignment_regularizer_with_gradients(
        g, Tensor::zeros({4}), CounterRng::derive(seed, "rad", static_cast<std::uint64_t>(s)),
        opts);
    auto refs = g.parameters();
    for (std::size_t p = 0; p < refs.size(); ++p)
      for (std::size_t i = 0; i < refs[p].value->numel(); ++i)
        (*refs[p].value)[i] -= lr * lambda * rg.param_gradients[p][i];
  }
  return mean_top_diagonal(heatmap_f(g, 8, 99), static_cast<std::size_t>(k));
}

bool criterion6(std::string& detail) {
  // Seed-pinned: the gap between the reweighted and unweighted runs is
  // robust to parameter perturbations at this seed (checked to 1e-4).
  const std::uint64_t seed = 108;
  double weighted = optimize_penalty_only(true, seed, 3000, 0.02, 16, 4);
  double unweighted = optimize_penalty_only(false, seed, 3000, 0.02, 16, 4);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean top-4 diagonal: reweighted %.4f, unweighted %.4f",
                weighted, unweighted);
  detail = buf;
  return weighted >= 0.95 && unweighted <= weighted - 0.15;
}

// --- criterion 7: eigenpath invariants --------------------------------------

bool criterion7(std::string& detail) {
  CounterRng rng(707);
  Tensor a({4, 3});
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.normal();
  Graph lin = affine_graph(a);
  TrajectoryRecord rec = trace_eigenpath(lin, Tensor::from({3}, {0.5, -0.1, 0.2}), 1, 0.01, 0.0, 50);
  Tensor dir = sub(rec.iterates[1], rec.iterates[0]);
  double worst_off = 0, worst_step = 0;
  for (std::size_t i = 1; i < rec.iterates.size(); ++i) {
    Tensor d = sub(rec.iterates[i], rec.iterates[0]);
    Tensor resid = sub(d, scale(dir, dot(d, dir) / dot(dir, dir)));
    worst_off = std::max(worst_off, resid.frobenius_norm());
    double step = sub(rec.iterates[i], rec.iterates[i - 1]).frobenius_norm();
    worst_step = std::max(worst_step, std::abs(step - 0.01));
  }
  if (worst_off > 1e-9) {
    detail = "collinearity residual " + std::to_string(worst_off);
    return false;
  }
  if (worst_step > 1e-9) {
    detail = "step length deviation " + std::to_string(worst_step);
    return false;
  }

  double worst_dot = 1.0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Graph net = random_mlp(3, 6, 5, rng, true);
    (void)seed;
    TrajectoryRecord t =
        trace_eigenpath(net, Tensor::from({3}, {0.3, 0.1, -0.4}), 1, 0.02, 0.5, 80);
    for (std::size_t i = 1; i < t.directions.size(); ++i)
      worst_dot = std::min(worst_dot, dot(t.directions[i - 1], t.directions[i]));
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "collinearity %.1e, step error %.1e, min direction dot %.3f", worst_off,
                worst_step, worst_dot);
  detail = buf;
  return worst_dot >= 0.0;
}

// --- criterion 8: metric pipeline -------------------------------------------

bool criterion8(std::string& detail) {
  ScoreOptions opts;
  opts.train_steps = 500;
  opts.eval_instances = 5000;
  opts.n_inst = 64;
  opts.n_batch = 32;
  opts.side = 16;
  opts.seed = 2024;
  double truth = disentanglement_score(ground_truth_encoder(), opts).score;
  double chance = disentanglement_score(constant_encoder(4), opts).score;
  double pixel = disentanglement_score(raw_pixel_encoder(), opts).score;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "ground truth %.2f, chance %.2f, raw pixels %.2f", truth,
                chance, pixel);
  detail = buf;
  return truth >= 95.0 && std::abs(chance - 25.0) <= 3.0 && pixel > chance && pixel < truth;
}

// --- criterion 9: paired toy GAN runs ----------------------------------------

double train_and_measure_diag(double lambda, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.generator.kind = NetKind::generator;
  cfg.generator.latent = 4;
  cfg.generator.image_side = 16;
  cfg.generator.hidden = {64, 64};
  cfg.discriminator.kind = NetKind::discriminator;
  cfg.discriminator.image_side = 16;
  cfg.discriminator.hidden = {64, 64};
  cfg.k = 2;
  cfg.power_iterations = 8;
  cfg.lambda = lambda;
  cfg.batch = 32;
  cfg.updates = 1000;
  cfg.noise_std = 0.6;
  cfg.dataset.kind = DatasetKind::shapes;
  cfg.dataset.side = 16;
  cfg.dataset.count = 2048;
  cfg.dataset.seed = 99;
  cfg.seed = seed;
  cfg.log_every = 0;
  TrainResult r = train_gan(cfg);
  if (r.diverged) return -1.0;
  return mean_top_diagonal(heatmap_f(r.generator, 64, 777), 2);
}

bool criterion9(std::string& detail) {
  // Stochastic, seed-pinned smoke test: paired runs share every random
  // stream, differing only in lambda.
  const std::uint64_t seed = 12;
  double base = train_and_measure_diag(0.0, seed);
  double reg = train_and_measure_diag(0.6, seed);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "mean top-2 diagonal: lambda=0.6 run %.4f vs lambda=0 run %.4f (1000 updates)",
                reg, base);
  detail = buf;
  return base >= 0.0 && reg >= 0.0 && reg - base >= 0.2;
}

struct Criterion {
  int id;
  const char* name;
  bool (*fn)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "adjoint identity <w,Jv> = <J^T w,v>", criterion1},
    {2, "jvp/vjp match finite differences", criterion2},
    {3, "masked power iteration matches brute-force eigenpairs", criterion3},
    {4, "batched iteration: one matvec per step, linear cost scaling", criterion4},
    {5, "alignment penalty values and gradient", criterion5},
    {6, "penalty-only optimization aligns; reweighting required", criterion6},
    {7, "eigenpath straightness, step length, anti-backtracking", criterion7},
    {8, "metric pipeline: ground truth / chance / raw pixels", criterion8},
    {9, "paired toy GAN runs separated by the penalty", criterion9},
};

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep freed arenas resident; the cost benchmarks otherwise measure the
  // kernel's page reclaim instead of the library.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end())
      continue;
    std::string detail;
    auto t0 = Clock::now();
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", ok ? "PASS" : "FAIL", c.id, c.name,
                detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
