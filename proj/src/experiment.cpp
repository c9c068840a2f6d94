#include <wgal/experiment.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <wgal/loss.hpp>
#include <wgal/oracle.hpp>
#include <wgal/serialize.hpp>
#include <wgal/theory.hpp>

namespace wgal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string library_version() { return "1.0.0"; }

std::string to_string(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::penalty_study: return "penalty-study";
    case Command::convergence_study: return "convergence-study";
    case Command::theory_check: return "theory-check";
    case Command::approx_probe: return "approx-probe";
  }
  return "?";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

/// Strict view of a JSON object: every key must be consumed before `finish`.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    if (!has(key)) return required(key, def);
    const json& v = raw(key);
    if (!v.is_number()) fail(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }

  double positive(const std::string& key, std::optional<double> def = std::nullopt) {
    const double x = number(key, def);
    if (!(x > 0.0)) fail(key, "must be > 0");
    return x;
  }

  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(key, "is required");
      return *def;
    }
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      fail(key, "must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(key, "must be a boolean");
    return v.get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(key, "is required");
      return *def;
    }
    const json& v = raw(key);
    if (!v.is_string()) fail(key, "must be a string");
    return v.get<std::string>();
  }

  /// Expression given as text or as a number.
  std::string expr(const std::string& key, std::optional<std::string> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(key, "is required");
      return *def;
    }
    return expr_value(raw(key), key);
  }

  std::string expr_value(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return format_double(v.get<double>());
    fail(key, "must be an expression string or a number");
  }

  Reader child(const std::string& key) { return Reader(raw(key), sub(key)); }

  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(k, "is not a recognized key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string where = key.empty() ? (path_.empty() ? "config" : path_) : sub(key);
    throw ConfigError("config key '" + where + "' " + what);
  }

 private:
  double required(const std::string& key, std::optional<double> def) {
    if (!def) fail(key, "is required");
    return *def;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Command parse_command(const std::string& s) {
  if (s == "solve") return Command::solve;
  if (s == "penalty-study") return Command::penalty_study;
  if (s == "convergence-study") return Command::convergence_study;
  if (s == "theory-check") return Command::theory_check;
  if (s == "approx-probe") return Command::approx_probe;
  throw ConfigError("config key 'command' has unknown value '" + s + "'");
}

ProblemSpec parse_problem(Reader r) {
  ProblemSpec p;
  const auto d64 = r.count("dimension");
  if (d64 < 1 || d64 > 16) r.fail("dimension", "must be in 1..16");
  const int d = static_cast<int>(d64);
  p.dimension = d;

  if (r.has("domain")) {
    Reader dr = r.child("domain");
    const std::string type = dr.string("type", "hypercube");
    if (type == "ball") {
      p.domain.ball = true;
      const json& c = dr.raw("center");
      if (!c.is_array() || static_cast<int>(c.size()) != d) {
        dr.fail("center", "must be an array of length dimension");
      }
      for (const auto& v : c) {
        if (!v.is_number()) dr.fail("center", "must contain numbers");
        p.domain.center.push_back(v.get<double>());
      }
      p.domain.radius = dr.positive("radius");
    } else if (type != "hypercube") {
      dr.fail("type", "must be 'hypercube' or 'ball'");
    }
    dr.finish();
  }

  // a: d x d array, or a scalar meaning scalar * identity.
  if (r.has("a")) {
    const json& a = r.raw("a");
    if (a.is_array()) {
      if (static_cast<int>(a.size()) != d) r.fail("a", "must have dimension rows");
      for (const auto& row : a) {
        if (!row.is_array() || static_cast<int>(row.size()) != d) {
          r.fail("a", "rows must have dimension entries");
        }
        for (const auto& e : row) p.a.push_back(r.expr_value(e, "a"));
      }
    } else {
      const std::string s = r.expr_value(a, "a");
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) p.a.push_back(i == j ? s : "0");
      }
    }
  } else {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) p.a.push_back(i == j ? "1" : "0");
    }
  }
  if (r.has("b")) {
    const json& b = r.raw("b");
    if (b.is_array()) {
      if (static_cast<int>(b.size()) != d) r.fail("b", "must have dimension entries");
      for (const auto& e : b) p.b.push_back(r.expr_value(e, "b"));
    } else {
      p.b.assign(d, r.expr_value(b, "b"));
    }
  } else {
    p.b.assign(d, "0");
  }
  p.c = r.expr("c", "0");
  if (r.has("u_exact")) p.u_exact = r.expr("u_exact");
  if (r.has("f")) p.f = r.expr("f");
  if (r.has("g")) p.g = r.expr("g");
  if (p.u_exact && (p.f || p.g)) r.fail("u_exact", "cannot be combined with f or g");
  if (!p.u_exact && !p.f) r.fail("f", "is required when u_exact is absent");
  p.alpha = r.number("alpha", 1.0);
  p.beta = r.positive("beta", 1.0);
  try {
    p.bc_kind = boundary_kind_from_string(r.string("bc_kind", "robin"));
  } catch (const std::invalid_argument& e) {
    r.fail("bc_kind", "must be robin, neumann or dirichlet");
  }
  r.finish();
  return p;
}

ArchSpec parse_arch(Reader r) {
  ArchSpec s;
  if (r.has("recipe")) {
    Reader rr = r.child("recipe");
    s.eps = rr.positive("eps");
    s.mu = rr.number("mu", 0.5);
    if (!(s.mu > 0.0 && s.mu < 1.0)) rr.fail("mu", "must lie in (0, 1)");
    s.c_user = rr.positive("c_user", 1.0);
    s.limits.max_b_theta = rr.positive("max_b_theta", 1e6);
    s.limits.max_weights = rr.positive("max_weights", 1e7);
    try {
      s.limits.activation = Activation::from_name(rr.string("activation", "tanh"),
                                                  static_cast<int>(rr.count("relu_power", 1)));
    } catch (const std::invalid_argument& e) {
      rr.fail("activation", e.what());
    }
    rr.finish();
    r.finish();
    return s;
  }
  NetworkArch a;
  const json& w = r.raw("widths");
  if (!w.is_array() || w.size() < 2) r.fail("widths", "must be an array of at least two widths");
  for (const auto& v : w) {
    if (!v.is_number_integer() || v.get<int>() < 1) r.fail("widths", "must be positive integers");
    a.widths.push_back(v.get<int>());
  }
  try {
    a.activation = Activation::from_name(r.string("activation", "tanh"),
                                         static_cast<int>(r.count("relu_power", 1)));
  } catch (const std::invalid_argument& e) {
    r.fail("activation", e.what());
  }
  a.b_theta = r.number("b_theta", 10.0);
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    r.fail("", e.what());
  }
  s.explicit_arch = a;
  r.finish();
  return s;
}

InitOptions parse_init(Reader r) {
  InitOptions o;
  const std::string scheme = r.string("scheme", "glorot");
  if (scheme == "glorot") {
    o.scheme = InitScheme::glorot;
  } else if (scheme == "uniform") {
    o.scheme = InitScheme::uniform;
  } else {
    r.fail("scheme", "must be 'glorot' or 'uniform'");
  }
  o.scale = r.number("scale", 0.5);
  if (!(o.scale >= 0.0)) r.fail("scale", "must be >= 0");
  r.finish();
  return o;
}

void parse_train(Reader r, TrainConfig& t, bool& checkpoints) {
  t.n_interior = r.count("n_interior", t.n_interior);
  t.n_boundary = r.count("n_boundary", t.n_boundary);
  t.outer_steps = r.count("outer_steps", t.outer_steps);
  t.inner_steps = r.count("inner_steps", t.inner_steps);
  const std::string opt = r.string("optimizer", "adam");
  if (opt == "adam") {
    t.optimizer = OptimizerKind::adam;
  } else if (opt == "sgd") {
    t.optimizer = OptimizerKind::sgd;
  } else {
    r.fail("optimizer", "must be 'adam' or 'sgd'");
  }
  t.lr_u = r.positive("lr_u", t.lr_u);
  t.lr_v = r.positive("lr_v", t.lr_v);
  t.adam_beta1 = r.number("adam_beta1", t.adam_beta1);
  t.adam_beta2 = r.number("adam_beta2", t.adam_beta2);
  t.adam_eps = r.positive("adam_eps", t.adam_eps);
  t.resample_every = r.count("resample_every", t.resample_every);
  if (r.has("b_theta")) t.b_theta = r.number("b_theta");
  t.h1_ball_radius = r.positive("h1_ball_radius", t.h1_ball_radius);
  t.h1_quad_points = r.count("h1_quad_points", t.h1_quad_points);
  t.error_quad_points = r.count("error_quad_points", t.error_quad_points);
  t.seed = r.count("seed", t.seed);
  t.eval_every = r.count("eval_every", t.eval_every);
  t.normalize_v = r.boolean("normalize_v", t.normalize_v);
  t.boundary_alpha_half = r.boolean("boundary_alpha_half", t.boundary_alpha_half);
  t.v_restart = r.count("v_restart", t.v_restart);
  t.v_h1_penalty = r.number("v_h1_penalty", t.v_h1_penalty);
  t.u_average = r.number("u_average", t.u_average);
  t.grad_clip_norm = r.number("grad_clip_norm", t.grad_clip_norm);
  if (r.has("init")) t.init = parse_init(r.child("init"));
  t.record_timing = r.boolean("record_timing", t.record_timing);
  checkpoints = r.boolean("checkpoints", checkpoints);
  r.finish();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'train' invalid: ") + e.what());
  }
}

void parse_sweep(Reader r, SweepSpec& s) {
  if (r.has("betas")) {
    const json& b = r.raw("betas");
    if (!b.is_array() || b.empty()) r.fail("betas", "must be a nonempty array");
    s.betas.clear();
    for (const auto& v : b) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) r.fail("betas", "must be positive numbers");
      s.betas.push_back(v.get<double>());
    }
  }
  if (r.has("n_values")) {
    const json& b = r.raw("n_values");
    if (!b.is_array() || b.empty()) r.fail("n_values", "must be a nonempty array");
    s.n_values.clear();
    for (const auto& v : b) {
      if (!v.is_number_unsigned() || v.get<std::size_t>() < 1) {
        r.fail("n_values", "must be positive integers");
      }
      s.n_values.push_back(v.get<std::size_t>());
    }
  }
  if (r.has("seeds")) {
    const json& b = r.raw("seeds");
    if (!b.is_array() || b.empty()) r.fail("seeds", "must be a nonempty array");
    s.seeds.clear();
    for (const auto& v : b) {
      if (!v.is_number_unsigned()) r.fail("seeds", "must be nonnegative integers");
      s.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  s.grid_n = r.count("grid_n", s.grid_n);
  if (s.grid_n < 2) r.fail("grid_n", "must be >= 2");
  r.finish();
}

void parse_theory(Reader r, TheorySpec& t) {
  t.probes = r.count("probes", t.probes);
  t.trials = r.count("trials", t.trials);
  t.probe_budget = r.count("probe_budget", t.probe_budget);
  t.ascent_steps = r.count("ascent_steps", t.ascent_steps);
  t.big_factor = r.count("big_factor", t.big_factor);
  if (r.has("n_values")) {
    const json& b = r.raw("n_values");
    if (!b.is_array() || b.empty()) r.fail("n_values", "must be a nonempty array");
    t.n_values.clear();
    for (const auto& v : b) {
      if (!v.is_number_unsigned() || v.get<std::size_t>() < 1) {
        r.fail("n_values", "must be positive integers");
      }
      t.n_values.push_back(v.get<std::size_t>());
    }
  }
  t.c_user = r.positive("c_user", t.c_user);
  t.random_sets = r.count("random_sets", t.random_sets);
  t.seed = r.count("seed", t.seed);
  if (t.probes < 1 || t.trials < 1 || t.probe_budget < 1 || t.big_factor < 1) {
    r.fail("", "probes, trials, probe_budget and big_factor must be >= 1");
  }
  r.finish();
}

void parse_approx(Reader r, ApproxConfig& a) {
  a.steps = r.count("steps", a.steps);
  a.lr = r.positive("lr", a.lr);
  a.fit_points = r.count("fit_points", a.fit_points);
  a.eval_points = r.count("eval_points", a.eval_points);
  a.eval_every = r.count("eval_every", a.eval_every);
  a.seed = r.count("seed", a.seed);
  if (r.has("init")) a.init = parse_init(r.child("init"));
  if (a.fit_points < 1 || a.eval_points < 1 || a.eval_every < 1) {
    r.fail("", "fit_points, eval_points and eval_every must be >= 1");
  }
  r.finish();
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.raw = j;
  Reader r(j, "");
  cfg.command = parse_command(r.string("command"));
  cfg.output_dir = r.string("output_dir", "");
  cfg.problem = parse_problem(r.child("problem"));
  if (r.has("u_arch")) {
    cfg.u_arch = parse_arch(r.child("u_arch"));
  } else {
    cfg.u_arch.explicit_arch =
        NetworkArch{{cfg.problem.dimension, 20, 20, 1}, Activation::tanh(), 10.0};
  }
  if (r.has("v_arch")) {
    cfg.v_arch = parse_arch(r.child("v_arch"));
  } else {
    cfg.v_arch = cfg.u_arch;
  }
  if (r.has("train")) parse_train(r.child("train"), cfg.train, cfg.checkpoints);
  if (r.has("sweep")) parse_sweep(r.child("sweep"), cfg.sweep);
  if (r.has("theory")) parse_theory(r.child("theory"), cfg.theory);
  if (r.has("approx")) parse_approx(r.child("approx"), cfg.approx);
  r.finish();

  // Build once so expression and shape errors surface before any compute.
  try {
    const EllipticProblem p = build_problem(cfg.problem);
    (void)resolve_arch(cfg.u_arch, cfg.problem);
    (void)resolve_arch(cfg.v_arch, cfg.problem);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config key 'problem' invalid: ") + e.what());
  }
  const bool needs_exact = cfg.command == Command::convergence_study ||
                           cfg.command == Command::approx_probe;
  if (needs_exact && !cfg.problem.u_exact) {
    throw ConfigError("config key 'problem.u_exact' is required for " + to_string(cfg.command));
  }
  if (cfg.command == Command::penalty_study) {
    if (cfg.problem.dimension != 1) {
      throw ConfigError("config key 'problem.dimension' must be 1 for penalty-study");
    }
    if (cfg.sweep.betas.size() < 2) {
      throw ConfigError("config key 'sweep.betas' needs at least two values for penalty-study");
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

EllipticProblem build_problem(const ProblemSpec& s) {
  const int d = s.dimension;
  const Domain domain = s.domain.ball ? Domain::ball(s.domain.center, s.domain.radius)
                                      : Domain::hypercube(d);
  std::vector<Expr> a;
  for (const auto& e : s.a) a.push_back(parse_expr(e, d));
  std::vector<Expr> b;
  for (const auto& e : s.b) b.push_back(parse_expr(e, d));
  Expr c = parse_expr(s.c, d);
  if (s.u_exact) {
    return manufactured_problem(parse_expr(*s.u_exact, d), std::move(a), std::move(b),
                                std::move(c), s.alpha, s.beta, domain, s.bc_kind);
  }
  BoundaryData g = s.g ? BoundaryData::from_expr(parse_expr(*s.g, d)) : BoundaryData::zero(d);
  return make_problem(domain, std::move(a), std::move(b), std::move(c), parse_expr(*s.f, d),
                      std::move(g), s.alpha, s.beta, s.bc_kind);
}

NetworkArch resolve_arch(const ArchSpec& spec, const ProblemSpec& problem, json* report) {
  if (spec.explicit_arch) {
    if (spec.explicit_arch->input_dim() != problem.dimension) {
      throw ConfigError("architecture input width does not match problem.dimension");
    }
    return *spec.explicit_arch;
  }
  ArchRecipe r;
  try {
    r = arch_recipe(spec.eps, problem.dimension, spec.mu, problem.beta, spec.c_user, spec.limits);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("architecture recipe failed: ") + e.what());
  }
  if (report) {
    *report = {{"depth", r.depth},
               {"weight_budget", r.weight_budget},
               {"hidden_width", r.hidden_width},
               {"realized_weights", r.realized_weights},
               {"b_theta_formula", r.b_theta_formula},
               {"b_theta_capped", r.b_theta_capped}};
  }
  return r.arch;
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    const fs::path target = dir_ / name;
    fs::create_directories(target.parent_path());
    const fs::path tmp = fs::path(target.string() + ".partial");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << content;
      out.flush();
      if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
    std::lock_guard<std::mutex> lock(mu_);
    if (std::find(written_.begin(), written_.end(), name) == written_.end()) {
      written_.push_back(name);
    }
  }

  const std::vector<std::string>& written() const { return written_; }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  std::mutex mu_;
  std::vector<std::string> written_;
};

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("WG_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs fn(0..count-1) on a pool; results are indexed so order never depends
/// on scheduling. The first exception by index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = worker_count(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Logger {
  bool quiet;
  void operator()(const std::string& msg) const {
    if (!quiet) std::cerr << "[wgal] " << msg << '\n';
  }
};

json report_json(const BoundReport& r) {
  json j;
  j["lemma"] = r.lemma;
  j["config_hash"] = r.config_hash;
  if (r.theoretical.overflows()) {
    j["theoretical"] = r.theoretical.to_string();
  } else {
    j["theoretical"] = r.theoretical.value();
  }
  j["theoretical_log"] = r.theoretical.log();
  j["empirical"] = r.empirical;
  j["ratio"] = r.ratio;
  j["inputs"] = r.inputs;
  return j;
}

std::string theoretical_csv(const LogValue& v) {
  return v.overflows() ? v.to_string() : format_double(v.value());
}

std::string history_csv(const TrainHistory& h) {
  std::string out =
      "step,loss_total,loss_interior,loss_boundary,h1_u,h1_v,h1_error,grad_u_norm,grad_v_norm,"
      "seconds\n";
  for (const auto& r : h.rows) {
    out += std::to_string(r.step) + ',' + format_double(r.loss.total) + ',' +
           format_double(r.loss.interior) + ',' + format_double(r.loss.boundary) + ',' +
           format_double(r.h1_u) + ',' + format_double(r.h1_v) + ',' +
           format_double(r.h1_error) + ',' + format_double(r.grad_u_norm) + ',' +
           format_double(r.grad_v_norm) + ',' + format_double(r.seconds) + '\n';
  }
  return out;
}

struct FinalErrors {
  double h1 = 0.0;
  double l2 = 0.0;
  double rel_h1 = 0.0;
  double rel_l2 = 0.0;
};

FinalErrors final_errors(const NetworkParams& u, const EllipticProblem& p, std::size_t points,
                         std::uint64_t seed) {
  const FieldEvaluator ref = expr_field(*p.u_exact);
  const PointSet pts = sample_interior(p.domain, points, derive_seed(seed, 107));
  const double vol = p.domain.volume();
  const H1Estimate err = h1_distance(network_field(u), ref, pts, vol);
  const FieldEvaluator zero = [d = p.dim()](std::span<const double>) {
    return DualEval{0.0, std::vector<double>(d, 0.0)};
  };
  const H1Estimate norm = h1_distance(zero, ref, pts, vol);
  FinalErrors f;
  f.h1 = err.h1;
  f.l2 = err.l2;
  f.rel_h1 = norm.h1 > 0 ? err.h1 / norm.h1 : err.h1;
  f.rel_l2 = norm.l2 > 0 ? err.l2 / norm.l2 : err.l2;
  return f;
}

json coercivity_json(const CoercivityReport& r) {
  return {{"lambda_min", r.lambda_min}, {"lambda_max", r.lambda_max}, {"c_min", r.c_min},
          {"b_sup", r.b_sup},           {"condition", r.condition},   {"holds", r.holds},
          {"a_sup", r.a_sup},           {"c_sup", r.c_sup},           {"f_sup", r.f_sup},
          {"g_sup", r.g_sup},           {"probes", r.probes}};
}

json run_solve(const ExperimentConfig& cfg, OutputDir& out, const Logger& log, json& seeds) {
  const EllipticProblem p = build_problem(cfg.problem);
  json results;
  json recipe_u, recipe_v;
  const NetworkArch ua = resolve_arch(cfg.u_arch, cfg.problem, &recipe_u);
  const NetworkArch va = resolve_arch(cfg.v_arch, cfg.problem, &recipe_v);
  if (!recipe_u.is_null()) results["u_recipe"] = recipe_u;
  if (!recipe_v.is_null()) results["v_recipe"] = recipe_v;
  const CoercivityReport coer = check_coercivity(p, 1024, cfg.train.seed);
  results["coercivity"] = coercivity_json(coer);
  if (!coer.holds) log("warning: sampled coercivity condition does not hold");
  seeds["train"] = cfg.train.seed;

  std::optional<FieldEvaluator> ref;
  if (p.u_exact) ref = expr_field(*p.u_exact);
  CheckpointFn ck;
  if (cfg.checkpoints) {
    ck = [&](const HistoryRow& row, const NetworkParams& u, const NetworkParams& v) {
      const std::string step = std::to_string(row.step);
      out.write("checkpoints/u_step" + step + ".json", network_to_json(u).dump(1) + "\n");
      out.write("checkpoints/v_step" + step + ".json", network_to_json(v).dump(1) + "\n");
    };
  }
  log("solve: " + std::to_string(cfg.train.outer_steps) + " outer steps");
  const TrainResult tr = minimax_train(p, ua, va, cfg.train, ref ? &*ref : nullptr, ck);
  out.write("history.csv", history_csv(tr.history));
  out.write("u.json", network_to_json(tr.u).dump(1) + "\n");
  out.write("v.json", network_to_json(tr.v).dump(1) + "\n");
  results["grad_clip_events"] = tr.history.grad_clip_events;
  results["rescale_events"] = tr.history.rescale_events;
  if (!tr.history.rows.empty()) results["final_loss"] = tr.history.rows.back().loss.total;
  if (p.u_exact) {
    const FinalErrors fe = final_errors(tr.u, p, cfg.train.error_quad_points, cfg.train.seed);
    results["h1_error"] = fe.h1;
    results["l2_error"] = fe.l2;
    results["relative_h1_error"] = fe.rel_h1;
    results["relative_l2_error"] = fe.rel_l2;
    log("relative H1 error " + format_double(fe.rel_h1));
  }
  results["optimization_error"] = "not measured";
  return results;
}

json run_penalty(const ExperimentConfig& cfg, OutputDir& out, const Logger& log) {
  const EllipticProblem p = build_problem(cfg.problem);
  log("penalty-study over " + std::to_string(cfg.sweep.betas.size()) + " betas, grid n=" +
      std::to_string(cfg.sweep.grid_n));
  const PenaltyStudyResult r = penalty_study(p, cfg.sweep.betas, cfg.sweep.grid_n);
  std::string csv = "beta,h1_error\n";
  for (std::size_t k = 0; k < r.betas.size(); ++k) {
    csv += format_double(r.betas[k]) + ',' + format_double(r.errors[k]) + '\n';
  }
  out.write("penalty.csv", csv);
  return {{"fitted_slope", r.slope},
          {"c_fit", r.c_fit},
          {"monotone", r.monotone},
          {"within_sqrt_beta_rate", r.within_rate},
          {"grid_n", cfg.sweep.grid_n}};
}

json run_convergence(const ExperimentConfig& cfg, OutputDir& out, const Logger& log,
                     json& seeds) {
  const EllipticProblem p = build_problem(cfg.problem);
  const NetworkArch ua = resolve_arch(cfg.u_arch, cfg.problem);
  const NetworkArch va = resolve_arch(cfg.v_arch, cfg.problem);
  const auto& ns = cfg.sweep.n_values;
  const auto& ss = cfg.sweep.seeds;
  seeds["sweep"] = ss;
  std::vector<double> errors(ns.size() * ss.size());
  log("convergence-study: " + std::to_string(errors.size()) + " runs");
  parallel_for(errors.size(), [&](std::size_t idx) {
    TrainConfig t = cfg.train;
    t.n_interior = ns[idx / ss.size()];
    t.n_boundary = ns[idx / ss.size()];
    t.seed = ss[idx % ss.size()];
    const TrainResult tr = minimax_train(p, ua, va, t);
    errors[idx] = final_errors(tr.u, p, t.error_quad_points, t.seed).h1;
  });
  std::string csv = "n_samples,seed,h1_error\n";
  json medians = json::object();
  std::vector<double> med;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    std::vector<double> row;
    for (std::size_t s = 0; s < ss.size(); ++s) {
      const double e = errors[i * ss.size() + s];
      csv += std::to_string(ns[i]) + ',' + std::to_string(ss[s]) + ',' + format_double(e) + '\n';
      row.push_back(e);
    }
    med.push_back(median(row));
    medians[std::to_string(ns[i])] = med.back();
  }
  out.write("convergence.csv", csv);
  // Compare the smallest and the largest N of the ladder.
  const auto lo = std::min_element(ns.begin(), ns.end()) - ns.begin();
  const auto hi = std::max_element(ns.begin(), ns.end()) - ns.begin();
  return {{"median_h1_error", medians},
          {"monotone_improvement", med[hi] <= med[lo]},
          {"note", "only non-increase of the median error from the smallest to the largest N "
                   "is checked; the asymptotic sample-size rate is not resolved at this scale"}};
}

json run_theory(const ExperimentConfig& cfg, OutputDir& out, const Logger& log, json& seeds) {
  const EllipticProblem p = build_problem(cfg.problem);
  const NetworkArch ua = resolve_arch(cfg.u_arch, cfg.problem);
  const NetworkArch va = resolve_arch(cfg.v_arch, cfg.problem);
  if (!ua.activation.bounded()) {
    throw ConfigError("config key 'u_arch.activation' must be bounded for theory-check");
  }
  const TheorySpec& t = cfg.theory;
  seeds["theory"] = t.seed;
  std::vector<BoundReport> reports;
  json results;
  std::size_t violations = 0;

  log("theory-check: Lipschitz probes");
  const LipschitzReport lip = lipschitz_probe(ua, t.probes, derive_seed(t.seed, 1));
  reports.push_back(lip.value);
  reports.push_back(lip.derivative);
  reports.push_back(lip.gradient);
  violations += lip.violations;

  log("theory-check: integrand families");
  const CoercivityReport coer = check_coercivity(p, 4096, derive_seed(t.seed, 2));
  const CoefficientNorms norms = CoefficientNorms::from_report(coer);
  const FamilyProbe fam = class_family_probe(ua, p, norms, t.probes, derive_seed(t.seed, 3));
  for (const auto& r : fam.reports) reports.push_back(r);
  violations += fam.violations;

  log("theory-check: Rademacher enumeration");
  {
    Rng rng(derive_seed(t.seed, 4));
    BoundReport worst;
    worst.lemma = "massart_finite_class";
    double worst_ratio = -1.0;
    std::size_t massart_violations = 0;
    for (std::size_t s = 0; s < t.random_sets; ++s) {
      FiniteVectorSet set;
      set.n = 1 + rng.below(12);
      const std::size_t count = 1 + rng.below(16);
      for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> a(set.n);
        for (double& x : a) x = rng.uniform(-1.0, 1.0);
        set.vectors.push_back(std::move(a));
      }
      const double ex = exact_rademacher(set);
      const double mb = massart_bound(set);
      if (ex > mb * (1.0 + 1e-12) + 1e-15) ++massart_violations;
      const double ratio = mb > 0 ? ex / mb : 0.0;
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst.theoretical = LogValue::from_value(mb);
        worst.empirical = ex;
        worst.inputs = {{"N", static_cast<double>(set.n)}, {"size", static_cast<double>(count)}};
      }
    }
    worst.inputs["sets"] = static_cast<double>(t.random_sets);
    worst.finalize();
    if (t.random_sets > 0) reports.push_back(worst);
    violations += massart_violations;
    results["massart_violations"] = massart_violations;
  }
  results["covering_bound_ball_1_1_1"] = covering_bound_ball(1.0, 1, 1.0).value();

  log("theory-check: statistical error");
  StaErrorOptions so;
  so.trials = t.trials;
  so.probe_budget = t.probe_budget;
  so.ascent_steps = t.ascent_steps;
  so.big_factor = t.big_factor;
  so.c_user = t.c_user;
  so.seed = derive_seed(t.seed, 5);
  so.loss.boundary_alpha_half = cfg.train.boundary_alpha_half;
  std::vector<double> sta;
  for (std::size_t n : t.n_values) {
    BoundReport r = empirical_sta_error(ua, va, p, n, so);
    sta.push_back(r.empirical);
    reports.push_back(std::move(r));
  }
  bool decay = true;
  for (std::size_t k = 1; k < sta.size(); ++k) {
    if (t.n_values[k] > t.n_values[k - 1] && sta[k] > 1.1 * sta[k - 1]) decay = false;
  }
  results["sta_error_non_increasing"] = decay;

  json chaining = json::array();
  const ClassConstants kc = class_constants(ua, ua.param_count(), norms, p.alpha);
  for (std::size_t n : t.n_values) {
    json row = {{"N", n}};
    for (int i = 0; i < 6; ++i) {
      const std::string key = "F" + std::to_string(i + 1);
      try {
        row[key] = chaining_bound(kc.b[i], kc.l[i], static_cast<double>(ua.param_count()),
                                  ua.b_theta, static_cast<double>(n))
                       .to_string();
      } catch (const BoundNotApplicable&) {
        row[key] = "not applicable";
      }
    }
    chaining.push_back(row);
  }
  results["chaining_bounds"] = chaining;

  bool all_le_one = true;
  json arr = json::array();
  std::string csv = "lemma,config_hash,theoretical,empirical,ratio\n";
  for (const auto& r : reports) {
    if (!(r.ratio <= 1.0)) all_le_one = false;
    arr.push_back(report_json(r));
    csv += r.lemma + ',' + r.config_hash + ',' + theoretical_csv(r.theoretical) + ',' +
           format_double(r.empirical) + ',' + format_double(r.ratio) + '\n';
  }
  out.write("theory.json", arr.dump(1) + "\n");
  out.write("theory.csv", csv);
  results["violations"] = violations;
  results["all_ratios_le_1"] = all_le_one;
  return results;
}

json run_approx(const ExperimentConfig& cfg, OutputDir& out, const Logger& log, json& seeds) {
  const EllipticProblem p = build_problem(cfg.problem);
  const NetworkArch ua = resolve_arch(cfg.u_arch, cfg.problem);
  seeds["approx"] = cfg.approx.seed;
  log("approx-probe: " + std::to_string(cfg.approx.steps) + " steps");
  const ApproxResult r = approx_error_probe(expr_field(*p.u_exact), p.domain, ua, cfg.approx);
  out.write("approx.csv", "initial_distance,best_distance\n" + format_double(r.initial_distance) +
                              ',' + format_double(r.best_distance) + '\n');
  out.write("u_best.json", network_to_json(r.best).dump(1) + "\n");
  return {{"initial_distance", r.initial_distance}, {"best_distance", r.best_distance}};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& base, const RunOptions& opts) {
  ExperimentConfig cfg = base;
  if (opts.seed_override) {
    const std::uint64_t s = *opts.seed_override;
    cfg.train.seed = s;
    cfg.theory.seed = s;
    cfg.approx.seed = s;
    for (std::size_t k = 0; k < cfg.sweep.seeds.size(); ++k) cfg.sweep.seeds[k] = s + k;
  }
  const std::string dir = !opts.out_dir.empty() ? opts.out_dir : cfg.output_dir;
  if (dir.empty()) {
    return {2, "no output directory: set output_dir in the config or pass --out", {}};
  }
  const Logger log{opts.quiet};
  const auto t0 = std::chrono::steady_clock::now();
  json manifest;
  manifest["tool"] = "wgal";
  manifest["version"] = library_version();
  manifest["command"] = to_string(cfg.command);
  manifest["config_hash"] = fnv1a_hex(cfg.raw.dump());
  manifest["config"] = cfg.raw;
  manifest["started_at"] = utc_now();
  if (opts.seed_override) manifest["seed_override"] = *opts.seed_override;
  json seeds = json::object();

  RunResult rr;
  std::unique_ptr<OutputDir> out;
  try {
    out = std::make_unique<OutputDir>(dir);
  } catch (const std::exception& e) {
    return {1, std::string("cannot create output directory: ") + e.what(), {}};
  }
  try {
    json results;
    switch (cfg.command) {
      case Command::solve: results = run_solve(cfg, *out, log, seeds); break;
      case Command::penalty_study: results = run_penalty(cfg, *out, log); break;
      case Command::convergence_study: results = run_convergence(cfg, *out, log, seeds); break;
      case Command::theory_check: results = run_theory(cfg, *out, log, seeds); break;
      case Command::approx_probe: results = run_approx(cfg, *out, log, seeds); break;
    }
    manifest["status"] = "ok";
    manifest["results"] = results;
    rr.summary = results;
  } catch (const NumericalError& e) {
    manifest["status"] = "numerical_abort";
    manifest["error"] = {{"message", e.what()},
                         {"component", e.component()},
                         {"sample_index", e.sample_index()},
                         {"step", e.step()}};
    rr.exit_code = 3;
    rr.message = e.what();
  } catch (const ConfigError& e) {
    manifest["status"] = "config_error";
    manifest["error"] = {{"message", e.what()}};
    rr.exit_code = 2;
    rr.message = e.what();
  } catch (const std::exception& e) {
    manifest["status"] = "error";
    manifest["error"] = {{"message", e.what()}};
    rr.exit_code = 1;
    rr.message = e.what();
  }
  manifest["seeds"] = seeds;
  manifest["finished_at"] = utc_now();
  manifest["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["outputs"] = out->written();
  try {
    out->write("manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    if (rr.exit_code == 0) {
      rr.exit_code = 1;
      rr.message = e.what();
    }
  }
  if (rr.exit_code != 0) log("error: " + rr.message);
  return rr;
}

RunResult run_experiment_file(const std::string& path, const RunOptions& opts) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(path);
  } catch (const ConfigError& e) {
    if (!opts.quiet) std::cerr << "[wgal] config error: " << e.what() << '\n';
    return {2, e.what(), {}};
  } catch (const std::exception& e) {
    if (!opts.quiet) std::cerr << "[wgal] config error: " << e.what() << '\n';
    return {2, e.what(), {}};
  }
  return run_experiment(cfg, opts);
}

}  // namespace wgal
