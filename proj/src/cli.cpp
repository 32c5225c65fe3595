#include "specalign/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "specalign/align_reg.hpp"
#include "specalign/checkpoint.hpp"
#include "specalign/eigenpath.hpp"
#include "specalign/errors.hpp"
#include "specalign/evalsuite.hpp"
#include "specalign/imageio.hpp"
#include "specalign/rng.hpp"
#include "specalign/shapes.hpp"
#include "specalign/spectral.hpp"
#include "specalign/trainer.hpp"

namespace specalign::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ValidationError("invalid number for " + key + ": " + text);
  }
}

long parse_long(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ValidationError("invalid integer for " + key + ": " + text);
  }
}

}  // namespace

void OptionSet::add(std::string key, std::string default_value, std::string description) {
  options_.push_back({std::move(key), std::move(default_value), std::move(description), false});
}

void OptionSet::add_flag(std::string key, std::string description) {
  options_.push_back({std::move(key), "false", std::move(description), true});
}

Option& OptionSet::find(const std::string& key) {
  for (Option& o : options_)
    if (o.key == key) return o;
  throw ValidationError("unknown key: " + key);
}

const Option& OptionSet::find(const std::string& key) const {
  for (const Option& o : options_)
    if (o.key == key) return o;
  throw ValidationError("unknown key: " + key);
}

void OptionSet::load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + " is not key=value");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    find(key).value = value;  // throws on unknown keys
  }
}

void OptionSet::apply_args(const std::vector<std::string>& args) {
  // A config file, when given, loads first so flags override it.
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) throw ValidationError("unknown flag: " + a);
    std::string body = a.substr(2);
    std::string key = body, value;
    bool has_value = false;
    std::size_t eq = body.find('=');
    if (eq != std::string::npos) {
      key = body.substr(0, eq);
      value = body.substr(eq + 1);
      has_value = true;
    }
    Option* opt = nullptr;
    for (Option& o : options_)
      if (o.key == key) opt = &o;
    if (!opt) throw ValidationError("unknown flag: --" + key);
    if (opt->is_flag && !has_value) {
      opt->value = "true";
      continue;
    }
    if (!has_value) {
      if (i + 1 >= args.size()) throw ValidationError("missing value for --" + key);
      value = args[++i];
    }
    opt->value = value;
  }
}

const std::string& OptionSet::get(const std::string& key) const { return find(key).value; }
double OptionSet::get_double(const std::string& key) const {
  return parse_double(key, get(key));
}
long OptionSet::get_long(const std::string& key) const { return parse_long(key, get(key)); }
std::uint64_t OptionSet::get_u64(const std::string& key) const {
  return static_cast<std::uint64_t>(parse_long(key, get(key)));
}
bool OptionSet::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("invalid boolean for " + key + ": " + v);
}

std::vector<double> OptionSet::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& part : split(get(key), ','))
    if (!trim(part).empty()) out.push_back(parse_double(key, trim(part)));
  return out;
}

std::vector<long> OptionSet::get_longs(const std::string& key) const {
  std::vector<long> out;
  for (const std::string& part : split(get(key), ','))
    if (!trim(part).empty()) out.push_back(parse_long(key, trim(part)));
  return out;
}

void OptionSet::write_resolved(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write resolved config: " + path);
  std::vector<Option> sorted = options_;
  std::sort(sorted.begin(), sorted.end(),
            [](const Option& a, const Option& b) { return a.key < b.key; });
  for (const Option& o : sorted) out << o.key << "=" << o.value << "\n";
  if (!out) throw IoError("cannot write resolved config: " + path);
}

std::string OptionSet::usage() const {
  std::string out;
  for (const Option& o : options_) {
    out += "  --" + o.key;
    if (!o.is_flag) out += " <" + (o.value.empty() ? std::string("value") : o.value) + ">";
    out += "  " + o.description + "\n";
  }
  return out;
}

namespace {

std::string make_run_dir(const std::string& base, std::uint64_t seed) {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  std::string dir = base + "/run_" + stamp + "_s" + std::to_string(seed);
  std::string candidate = dir;
  int suffix = 2;
  while (std::filesystem::exists(candidate)) candidate = dir + "-" + std::to_string(suffix++);
  std::error_code ec;
  std::filesystem::create_directories(candidate, ec);
  if (ec) throw IoError("cannot create output directory: " + candidate);
  return candidate;
}

void add_common(OptionSet& opts) {
  opts.add("config", "", "key=value config file; flags override it");
  opts.add("out", "runs", "base output directory");
  opts.add("seed", "1", "root seed; subsystems derive child seeds from it");
}

// Splits argv into (config pre-pass, remaining flags), loads the config
// first so later flags override file values, then creates the run dir
// and records the fully resolved configuration beside the outputs.
// Returns an empty string when --help was requested and printed.
std::string prepare_run(OptionSet& opts, const std::vector<std::string>& args) {
  for (const std::string& a : args) {
    if (a == "--help") {
      std::cout << opts.usage();
      return "";
    }
  }
  // Pre-scan for --config so the file loads before overrides apply.
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      opts.load_config_file(args[i + 1]);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      opts.load_config_file(args[i].substr(9));
      break;
    }
  }
  opts.apply_args(args);
  std::string dir = make_run_dir(opts.get("out"), opts.get_u64("seed"));
  opts.write_resolved(dir + "/resolved.cfg");
  return dir;
}

// Generator source shared by the analysis subcommands: a trained
// checkpoint, or a deterministic demo net for standalone runs.
struct LoadedGenerator {
  Graph graph;
  NetSpec spec;
};

void add_generator_options(OptionSet& opts) {
  opts.add("ckpt", "", "checkpoint holding the generator (empty: demo net)");
  opts.add("net", "mlp", "demo net when no checkpoint: mlp | linear");
  opts.add("m", "4", "demo latent size");
  opts.add("side", "16", "demo image side");
  opts.add("hidden", "32,32", "demo hidden widths");
  opts.add("net-seed", "7", "demo net initialization seed");
}

LoadedGenerator load_generator(const OptionSet& opts) {
  if (!opts.get("ckpt").empty()) {
    Checkpoint ckpt = load_checkpoint(opts.get("ckpt"));
    auto [spec, graph] = unpack_net(ckpt, "generator");
    return {std::move(graph), spec};
  }
  NetSpec spec;
  spec.kind = NetKind::generator;
  spec.latent = static_cast<std::size_t>(opts.get_long("m"));
  spec.image_side = static_cast<std::size_t>(opts.get_long("side"));
  if (opts.get("net") == "linear") {
    spec.hidden = {};
    spec.squash_output = false;
  } else if (opts.get("net") == "mlp") {
    spec.hidden.clear();
    for (long w : opts.get_longs("hidden")) spec.hidden.push_back(static_cast<std::size_t>(w));
  } else {
    throw ValidationError("unknown net kind: " + opts.get("net"));
  }
  return {build_net(spec, opts.get_u64("net-seed")), spec};
}

// Writes a flattened generator output as a PGM frame when it is square.
bool try_write_frame(const std::string& path, const Tensor& flat) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(flat.numel()))));
  if (side * side != flat.numel()) return false;
  write_pgm(path, flat.reshaped({side, side}));
  return true;
}

std::string frame_name(const char* stem, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06zu.pgm", stem, index);
  return buf;
}

int run_train(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  opts.add("m", "4", "latent size");
  opts.add("k", "2", "eigenvectors to align");
  opts.add("power-iterations", "8", "power iterations per penalty evaluation");
  opts.add("lambda", "0.1", "alignment penalty weight (0 disables)");
  opts.add("batch", "32", "batch size");
  opts.add("updates", "1000", "training updates");
  opts.add("d-steps", "1", "discriminator updates per generator update");
  opts.add("noise-std", "0.6", "discriminator input noise");
  opts.add("hidden", "64,64", "generator hidden widths");
  opts.add("d-hidden", "64,64", "discriminator hidden widths");
  opts.add("dataset", "shapes", "dataset: shapes | linear");
  opts.add("side", "16", "sprite side for the shapes dataset");
  opts.add("data-count", "4096", "pre-rendered pool size");
  opts.add("linear-dim", "16", "output dim for the linear dataset");
  opts.add("linear-factors", "4", "factor count for the linear dataset");
  opts.add("lr", "1e-4", "RMSProp step size for both nets");
  opts.add("checkpoint-every", "0", "checkpoint cadence (0: final only)");
  opts.add("log-every", "1", "metrics log cadence");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  TrainConfig cfg;
  cfg.generator.kind = NetKind::generator;
  cfg.generator.latent = static_cast<std::size_t>(opts.get_long("m"));
  cfg.discriminator.kind = NetKind::discriminator;
  cfg.generator.hidden.clear();
  for (long w : opts.get_longs("hidden"))
    cfg.generator.hidden.push_back(static_cast<std::size_t>(w));
  cfg.discriminator.hidden.clear();
  for (long w : opts.get_longs("d-hidden"))
    cfg.discriminator.hidden.push_back(static_cast<std::size_t>(w));
  cfg.k = static_cast<int>(opts.get_long("k"));
  cfg.power_iterations = static_cast<int>(opts.get_long("power-iterations"));
  cfg.lambda = opts.get_double("lambda");
  cfg.batch = static_cast<std::size_t>(opts.get_long("batch"));
  cfg.updates = opts.get_long("updates");
  cfg.disc_steps = static_cast<int>(opts.get_long("d-steps"));
  cfg.noise_std = opts.get_double("noise-std");
  cfg.gen_opt.learning_rate = opts.get_double("lr");
  cfg.disc_opt.learning_rate = opts.get_double("lr");
  cfg.seed = opts.get_u64("seed");
  cfg.checkpoint_every = opts.get_long("checkpoint-every");
  cfg.log_every = opts.get_long("log-every");
  cfg.out_dir = dir;

  if (opts.get("dataset") == "shapes") {
    cfg.dataset.kind = DatasetKind::shapes;
    cfg.dataset.side = static_cast<std::size_t>(opts.get_long("side"));
    cfg.generator.image_side = cfg.dataset.side;
    cfg.discriminator.image_side = cfg.dataset.side;
  } else if (opts.get("dataset") == "linear") {
    cfg.dataset.kind = DatasetKind::linear;
    cfg.dataset.linear_dim = static_cast<std::size_t>(opts.get_long("linear-dim"));
    cfg.dataset.linear_factors = static_cast<std::size_t>(opts.get_long("linear-factors"));
    cfg.generator.flat_dim = cfg.dataset.linear_dim;
    cfg.generator.squash_output = false;
    cfg.discriminator.flat_dim = cfg.dataset.linear_dim;
  } else {
    throw ValidationError("unknown dataset: " + opts.get("dataset"));
  }
  cfg.dataset.count = static_cast<std::size_t>(opts.get_long("data-count"));
  cfg.dataset.seed = CounterRng::derive(cfg.seed, "dataset", 0);

  TrainResult result = train_gan(cfg);
  std::cout << dir << "\n";
  if (result.diverged) {
    std::cerr << "error: training diverged at update " << result.completed_updates << "\n";
    return 2;
  }
  return 0;
}

int run_trace_path(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  add_generator_options(opts);
  opts.add("k", "1", "eigenvector ordinal to follow");
  opts.add("alpha", "5e-3", "step size");
  opts.add("rho", "0.99", "direction decay");
  opts.add("steps", "2000", "trajectory length");
  opts.add("decode-every", "100", "decode cadence for frames (0: none)");
  opts.add("z", "", "start latent, comma separated (empty: prior draw)");
  opts.add_flag("negate", "follow the opposite ray (negates alpha internally)");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  LoadedGenerator gen = load_generator(opts);
  std::size_t m = gen.graph.input_arity;
  Tensor z({m});
  std::vector<double> given = opts.get_doubles("z");
  if (!given.empty()) {
    if (given.size() != m) throw ValidationError("z has wrong arity");
    for (std::size_t i = 0; i < m; ++i) z[i] = given[i];
  } else {
    CounterRng rng(CounterRng::derive(opts.get_u64("seed"), "trace-z", 0));
    for (std::size_t i = 0; i < m; ++i) z[i] = rng.normal();
  }

  TrajectoryRecord rec = trace_eigenpath(
      gen.graph, z, static_cast<int>(opts.get_long("k")), opts.get_double("alpha"),
      opts.get_double("rho"), static_cast<int>(opts.get_long("steps")),
      static_cast<std::size_t>(opts.get_long("decode-every")), opts.get_bool("negate"));

  std::vector<std::vector<double>> rows;
  std::string header = "index";
  for (std::size_t i = 0; i < m; ++i) header += ",z" + std::to_string(i + 1);
  for (std::size_t i = 0; i < rec.iterates.size(); ++i) {
    std::vector<double> row{static_cast<double>(i)};
    for (std::size_t c = 0; c < m; ++c) row.push_back(rec.iterates[i][c]);
    rows.push_back(std::move(row));
  }
  write_csv(dir + "/trajectory.csv", header, rows);
  for (std::size_t f = 0; f < rec.decoded.size(); ++f)
    try_write_frame(dir + "/" + frame_name("frame", rec.decoded_indices[f]), rec.decoded[f]);
  std::cout << dir << "\n";
  return 0;
}

int run_heatmap(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  add_generator_options(opts);
  opts.add("samples", "64", "Monte-Carlo samples over the prior");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  LoadedGenerator gen = load_generator(opts);
  Tensor f = heatmap_f(gen.graph, static_cast<std::size_t>(opts.get_long("samples")),
                       CounterRng::derive(opts.get_u64("seed"), "heatmap", 0));
  std::size_t m = f.rows();
  std::vector<std::vector<double>> rows;
  std::string header;
  for (std::size_t j = 0; j < m; ++j) header += (j ? ",c" : "c") + std::to_string(j + 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(m);
    for (std::size_t j = 0; j < m; ++j) row[j] = f.at(i, j);
    rows.push_back(std::move(row));
  }
  write_csv(dir + "/heatmap.csv", header, rows);
  write_pgm(dir + "/heatmap.pgm", f, 0.0, f.max_abs());
  std::cout << dir << "\n";
  return 0;
}

int run_metric(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  add_generator_options(opts);
  opts.add("encoder", "inversion", "inversion | ground-truth | raw-pixel | constant");
  opts.add("train-steps", "10000", "classifier updates");
  opts.add("eval-instances", "5000", "fresh evaluation instances");
  opts.add("n-inst", "64", "matched pairs per instance");
  opts.add("n-batch", "32", "instances per classifier batch");
  opts.add("metric-side", "64", "sprite side for the metric pipeline");
  opts.add("inversion-steps", "3000", "encoder inversion updates");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  ScoreOptions sopts;
  sopts.train_steps = static_cast<int>(opts.get_long("train-steps"));
  sopts.eval_instances = static_cast<std::size_t>(opts.get_long("eval-instances"));
  sopts.n_inst = static_cast<std::size_t>(opts.get_long("n-inst"));
  sopts.n_batch = static_cast<std::size_t>(opts.get_long("n-batch"));
  sopts.side = static_cast<std::size_t>(opts.get_long("metric-side"));
  sopts.seed = CounterRng::derive(opts.get_u64("seed"), "metric", 0);

  ShapeEncoder enc;
  const std::string& kind = opts.get("encoder");
  if (kind == "ground-truth") {
    enc = ground_truth_encoder();
  } else if (kind == "raw-pixel") {
    enc = raw_pixel_encoder();
  } else if (kind == "constant") {
    enc = constant_encoder(4);
  } else if (kind == "inversion") {
    LoadedGenerator gen = load_generator(opts);
    if (gen.graph.output_arity != sopts.side * sopts.side)
      throw ValidationError("generator output does not match metric-side");
    InversionOptions iopts;
    iopts.seed = CounterRng::derive(opts.get_u64("seed"), "inversion", 0);
    InversionResult inv = train_inversion_encoder(
        gen.graph, gen.spec, static_cast<int>(opts.get_long("inversion-steps")), iopts);
    enc = graph_encoder(inv.encoder);
  } else {
    throw ValidationError("unknown encoder: " + kind);
  }

  ScoreResult score = disentanglement_score(enc, sopts);
  write_csv(dir + "/score.csv", "score,stderr,train_steps,eval_instances,seed",
            {{score.score, score.stderr_, static_cast<double>(sopts.train_steps),
              static_cast<double>(sopts.eval_instances), static_cast<double>(sopts.seed)}});
  std::cout << dir << "\n";
  std::cout << "score " << score.score << " +- " << score.stderr_ << "\n";
  return 0;
}

int run_render_shapes(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  opts.add("render-side", "64", "image side (16, 32 or 64)");
  opts.add("base", "1,3,1,15,15", "base factors: symbol,scale,rotation,x,y");
  opts.add("sweep", "2", "factor index to sweep (1..5)");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  std::vector<long> base = opts.get_longs("base");
  if (base.size() != 5) throw ValidationError("base must list five factors");
  FactorVector u;
  for (int i = 1; i <= 5; ++i)
    set_factor_component(u, i, static_cast<int>(base[static_cast<std::size_t>(i - 1)]));
  int sweep = static_cast<int>(opts.get_long("sweep"));
  if (sweep < 1 || sweep > 5) throw ValidationError("sweep index out of range");
  std::size_t side = static_cast<std::size_t>(opts.get_long("render-side"));
  for (int v = 1; v <= kFactorRanges[static_cast<std::size_t>(sweep - 1)]; ++v) {
    FactorVector probe = u;
    set_factor_component(probe, sweep, v);
    write_pgm(dir + "/" + frame_name("shape", static_cast<std::size_t>(v)),
              render_shape(probe, side));
  }
  std::cout << dir << "\n";
  return 0;
}

int run_perturb_grid(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  add_generator_options(opts);
  opts.add("eps", "0.4", "perturbation radius");
  opts.add("count", "4", "directions per row");
  opts.add("z", "", "base latent, comma separated (empty: prior draw)");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  LoadedGenerator gen = load_generator(opts);
  std::size_t m = gen.graph.input_arity;
  Tensor z({m});
  std::vector<double> given = opts.get_doubles("z");
  if (!given.empty()) {
    if (given.size() != m) throw ValidationError("z has wrong arity");
    for (std::size_t i = 0; i < m; ++i) z[i] = given[i];
  } else {
    CounterRng rng(CounterRng::derive(opts.get_u64("seed"), "grid-z", 0));
    for (std::size_t i = 0; i < m; ++i) z[i] = rng.normal();
  }
  PerturbationGrid grid = perturbation_grid(
      gen.graph, z, opts.get_double("eps"), static_cast<std::size_t>(opts.get_long("count")),
      CounterRng::derive(opts.get_u64("seed"), "grid-dirs", 0));
  for (std::size_t i = 0; i < grid.random_row.size(); ++i)
    try_write_frame(dir + "/" + frame_name("random", i), grid.random_row[i]);
  for (std::size_t i = 0; i < grid.eigen_row.size(); ++i)
    try_write_frame(dir + "/" + frame_name("eigen", i), grid.eigen_row[i]);
  std::cout << dir << "\n";
  return 0;
}

int run_align_bench(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  opts.add("m", "64", "latent size");
  opts.add("bench-out", "64", "generator output dim");
  opts.add("bench-hidden", "64", "generator hidden width");
  opts.add("k-list", "1,2,4,8", "k values to sweep");
  opts.add("t-list", "4,8,16,32", "power-iteration counts to sweep");
  opts.add("trials", "9", "timed repetitions per cell (median reported)");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  NetSpec spec;
  spec.kind = NetKind::generator;
  spec.latent = static_cast<std::size_t>(opts.get_long("m"));
  spec.flat_dim = static_cast<std::size_t>(opts.get_long("bench-out"));
  spec.hidden = {static_cast<std::size_t>(opts.get_long("bench-hidden"))};
  Graph g = build_net(spec, opts.get_u64("seed"));
  Tensor z({spec.latent});
  CounterRng rng(CounterRng::derive(opts.get_u64("seed"), "bench-z", 0));
  for (std::size_t i = 0; i < spec.latent; ++i) z[i] = rng.normal();

  std::vector<std::vector<double>> rows;
  for (long k : opts.get_longs("k-list")) {
    for (long t : opts.get_longs("t-list")) {
      AlignRegOptions ropts;
      ropts.k = static_cast<int>(k);
      ropts.iterations = static_cast<int>(t);
      std::vector<double> times;
      for (long trial = 0; trial < opts.get_long("trials"); ++trial) {
        auto t0 = std::chrono::steady_clock::now();
        alignment_regularizer_with_gradients(
            g, z, CounterRng::derive(opts.get_u64("seed"), "bench", static_cast<std::uint64_t>(trial)),
            ropts);
        auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
      std::sort(times.begin(), times.end());
      rows.push_back({static_cast<double>(k), static_cast<double>(t), times[times.size() / 2]});
    }
  }
  write_csv(dir + "/bench.csv", "k,T,median_ms", rows);
  std::cout << dir << "\n";
  return 0;
}

int run_invert(const std::vector<std::string>& args) {
  OptionSet opts;
  add_common(opts);
  opts.add("ckpt", "", "checkpoint holding the trained generator (required)");
  opts.add("steps", "3000", "inversion updates");
  std::string dir = prepare_run(opts, args);
  if (dir.empty()) return 0;

  if (opts.get("ckpt").empty()) throw ValidationError("invert requires --ckpt");
  Checkpoint ckpt = load_checkpoint(opts.get("ckpt"));
  auto [spec, generator] = unpack_net(ckpt, "generator");
  InversionOptions iopts;
  iopts.seed = CounterRng::derive(opts.get_u64("seed"), "inversion", 0);
  InversionResult inv =
      train_inversion_encoder(generator, spec, static_cast<int>(opts.get_long("steps")), iopts);

  Checkpoint out;
  pack_scalar(out, "meta/step", static_cast<double>(opts.get_long("steps")));
  pack_net(out, "encoder", inversion_encoder_spec(spec), inv.encoder);
  save_checkpoint(dir + "/encoder.ckpt", out);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < inv.loss_log.size(); ++i)
    rows.push_back({static_cast<double>(i), inv.loss_log[i]});
  write_csv(dir + "/inversion_loss.csv", "step,loss", rows);
  std::cout << dir << "\n";
  return 0;
}

const char* kUsage =
    "usage: specalign <subcommand> [--flags]\n"
    "subcommands:\n"
    "  train          GAN training with the alignment penalty\n"
    "  trace-path     follow the k-th eigenvector through latent space\n"
    "  heatmap        mean squared-eigenvector matrix over the prior\n"
    "  metric         disentanglement score pipeline\n"
    "  render-shapes  factor sweeps to PGM files\n"
    "  perturb-grid   random vs eigenvector perturbation rows\n"
    "  align-bench    penalty cost sweep over k and T\n"
    "  invert         train an inversion encoder for a checkpoint\n";

}  // namespace

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 2; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    if (argc < 2) {
      std::cerr << kUsage;
      return 1;
    }
    std::string cmd = argv[1];
    if (cmd == "--help" || cmd == "help") {
      std::cout << kUsage;
      return 0;
    }
    if (cmd == "train") return run_train(args);
    if (cmd == "trace-path") return run_trace_path(args);
    if (cmd == "heatmap") return run_heatmap(args);
    if (cmd == "metric") return run_metric(args);
    if (cmd == "render-shapes") return run_render_shapes(args);
    if (cmd == "perturb-grid") return run_perturb_grid(args);
    if (cmd == "align-bench") return run_align_bench(args);
    if (cmd == "invert") return run_invert(args);
    throw ValidationError("unknown subcommand: " + cmd);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace specalign::cli
