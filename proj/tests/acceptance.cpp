// Acceptance run: one PASS/FAIL line per criterion. Pass criterion ids as arguments to run a
// subset. Exit status is 1 when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <wgal/experiment.hpp>
#include <wgal/loss.hpp>
#include <wgal/network.hpp>
#include <wgal/oracle.hpp>
#include <wgal/pde.hpp>
#include <wgal/theory.hpp>
#include <wgal/train.hpp>

using namespace wgal;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kDualFdTol = 1e-6;
constexpr double kParamFdTol = 1e-4;
constexpr double kPenaltyMinSlope = 0.35;
constexpr std::size_t kLipProbes = 10000;
constexpr std::size_t kFamilyProbes = 10000;
constexpr std::size_t kStaTrials = 20;
constexpr double kStaSlack = 1.10;
constexpr double kSolve1dMaxRelH1 = 0.15;
constexpr double kSolve2dMaxRelL2 = 0.15;

// Runtime budgets in seconds.
constexpr double kBudget[10] = {0, 60, 60, 120, 60, 120, 300, 900, 1800, 600};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::path(WGAL_TEST_TMP) / "acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double rel_gap(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// ---------------------------------------------------------------- 1: gradients

EllipticProblem gradient_problem(int d, Rng& rng) {
  std::vector<Expr> a, b;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double base = i == j ? 1.0 + rng.uniform(0.0, 1.0) : rng.uniform(-0.2, 0.2);
      a.push_back(Expr::constant(base, d) + Expr::constant(0.1, d) * Expr::variable(i + 1, d));
    }
    b.push_back(Expr::constant(rng.uniform(-0.5, 0.5), d));
  }
  Expr u = Expr::constant(1.0, d);
  for (int i = 1; i <= d; ++i) u = u * parse_expr("sin(1.3*x" + std::to_string(i) + "+0.2)", d);
  return manufactured_problem(u, a, b, Expr::constant(1.0 + rng.uniform(0.0, 1.0), d),
                              rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.0), Domain::hypercube(d));
}

Outcome criterion_gradients() {
  Rng rng(20240601);
  double worst_dual = 0.0, worst_param = 0.0, worst_loss = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + static_cast<int>(rng.below(3));
    std::vector<int> widths{d};
    const int depth = 1 + static_cast<int>(rng.below(3));
    for (int l = 1; l < depth; ++l) widths.push_back(2 + static_cast<int>(rng.below(5)));
    widths.push_back(1);
    const Activation act = t % 2 == 0 ? Activation::tanh() : Activation::logistic();
    const NetworkArch arch{widths, act, 2.0};
    NetworkParams net = init_network(arch, 100 + t, {InitScheme::uniform, 0.8});
    NetworkParams other = init_network(arch, 200 + t, {InitScheme::uniform, 0.8});

    std::vector<double> x(d);
    for (double& xi : x) xi = rng.uniform(0.0, 1.0);

    // Spatial gradient.
    const DualEval e = forward_dual(net, x);
    for (int p = 0; p < d; ++p) {
      const double h = 1e-5;
      std::vector<double> xp = x, xm = x;
      xp[p] += h;
      xm[p] -= h;
      const double fd = (forward_dual(net, xp).value - forward_dual(net, xm).value) / (2 * h);
      worst_dual = std::max(worst_dual, rel_gap(e.gradient[p], fd));
    }

    // Parameter gradient of seed_value * f + seed_grad . grad_x f.
    std::vector<double> sg(d);
    for (double& s : sg) s = rng.uniform(-1.0, 1.0);
    const double sv = rng.uniform(-1.0, 1.0);
    const auto objective = [&](const NetworkParams& n) {
      const DualEval r = forward_dual(n, x);
      double v = sv * r.value;
      for (int p = 0; p < d; ++p) v += sg[p] * r.gradient[p];
      return v;
    };
    const std::vector<double> bp = backprop_params(net, x, sv, sg);
    for (std::size_t k = 0; k < net.size(); ++k) {
      const double h = 1e-6;
      NetworkParams np = net, nm = net;
      np.values()[k] += h;
      nm.values()[k] -= h;
      const double fd = (objective(np) - objective(nm)) / (2 * h);
      worst_param = std::max(worst_param, rel_gap(bp[k], fd));
    }

    // Loss gradients in both networks.
    const EllipticProblem prob = gradient_problem(d, rng);
    const PreparedBatch batch =
        prepare_batch(prob, sample_batch(prob.domain, 12, 8, 300 + t));
    const LossGradients lg = loss_gradients(net, other, prob, batch);
    for (int which = 0; which < 2; ++which) {
      const NetworkParams& base = which == 0 ? net : other;
      const std::vector<double>& g = which == 0 ? lg.grad_u : lg.grad_v;
      for (std::size_t k = 0; k < base.size(); ++k) {
        const double h = 1e-6;
        NetworkParams pp = base, pm = base;
        pp.values()[k] += h;
        pm.values()[k] -= h;
        const double lp = which == 0 ? empirical_loss(pp, other, prob, batch).total
                                     : empirical_loss(net, pp, prob, batch).total;
        const double lm = which == 0 ? empirical_loss(pm, other, prob, batch).total
                                     : empirical_loss(net, pm, prob, batch).total;
        worst_loss = std::max(worst_loss, rel_gap(g[k], (lp - lm) / (2 * h)));
      }
    }
  }
  Outcome o;
  o.pass = worst_dual <= kDualFdTol && worst_param <= kParamFdTol && worst_loss <= kParamFdTol;
  o.detail = "20 nets: spatial " + fmt(worst_dual) + ", backprop " + fmt(worst_param) +
             ", loss " + fmt(worst_loss);
  return o;
}

// ---------------------------------------------------------------- 2: penalty rate

Outcome criterion_penalty() {
  const EllipticProblem p = manufactured_problem(
      parse_expr("sin(pi*x1)", 1), {Expr::constant(1, 1)}, {Expr::constant(0, 1)},
      Expr::constant(1, 1), 1.0, 1.0, Domain::hypercube(1), BoundaryKind::dirichlet_penalty);
  const PenaltyStudyResult r = penalty_study(p, {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}, 2048);
  Outcome o;
  o.pass = r.monotone && r.within_rate && r.slope >= kPenaltyMinSlope;
  o.detail = "slope " + fmt(r.slope) + ", C_fit " + fmt(r.c_fit) +
             (r.monotone ? ", monotone" : ", NOT monotone") +
             (r.within_rate ? ", within C_fit*sqrt(beta)" : ", rate bound violated");
  return o;
}

// ---------------------------------------------------------------- 3: Lipschitz lemmas

Outcome criterion_lipschitz() {
  const std::vector<NetworkArch> archs = {
      {{1, 8, 1}, Activation::tanh(), 2.0},
      {{2, 5, 5, 1}, Activation::tanh(), 1.5},
      {{3, 8, 4, 6, 1}, Activation::tanh(), 2.0},
      {{2, 3, 3, 3, 3, 1}, Activation::tanh(), 1.2},
  };
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < archs.size(); ++i) {
    const LipschitzReport r = lipschitz_probe(archs[i], kLipProbes, 500 + i);
    violations += r.violations;
    worst = std::max({worst, r.value.ratio, r.derivative.ratio, r.gradient.ratio});
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(archs.size()) + " archs x " + std::to_string(kLipProbes) +
             " probes: " + std::to_string(violations) + " violations, worst ratio " + fmt(worst);
  return o;
}

// ---------------------------------------------------------------- 4: Rademacher machinery

Outcome criterion_rademacher() {
  Rng rng(4242);
  std::size_t violations = 0;
  for (int t = 0; t < 500; ++t) {
    FiniteVectorSet s;
    s.n = 1 + rng.below(12);
    const std::size_t count = 1 + rng.below(20);
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<double> v(s.n);
      for (double& x : v) x = rng.uniform(-3.0, 3.0);
      s.vectors.push_back(std::move(v));
    }
    const double ex = exact_rademacher(s), mb = massart_bound(s);
    if (ex > mb * (1.0 + 1e-12) + 1e-15) {
      ++violations;
      std::printf("  massart violation: n=%zu size=%zu exact=%.17g bound=%.17g\n", s.n, count, ex, mb);
    }
  }
  const bool covering_exact = covering_bound_ball(1, 1, 1).value() == 2.0;

  // Ladder N = 2^k with network-sized constants; decreasing once applicable.
  bool decreasing = true, reached = false;
  double prev = INFINITY;
  std::size_t rungs = 0;
  for (double n = 2; n <= 1e12; n *= 2) {
    try {
      const double v = chaining_bound(12.0, 1366.0, 10, 2.0, n).value();
      reached = true;
      ++rungs;
      if (!(v < prev)) decreasing = false;
      prev = v;
    } catch (const BoundNotApplicable&) {
      if (reached) decreasing = false;  // must stay applicable
    }
  }
  Outcome o;
  o.pass = violations == 0 && covering_exact && decreasing && rungs > 10;
  o.detail = "500 sets: " + std::to_string(violations) + " Massart violations; covering(1,1,1) " +
             (covering_exact ? "= 2" : "!= 2") + "; chaining ladder " +
             std::to_string(rungs) + " rungs " + (decreasing ? "decreasing" : "NOT decreasing");
  return o;
}

// ---------------------------------------------------------------- 5: class constants

Outcome criterion_families() {
  struct Case {
    NetworkArch arch;
    EllipticProblem problem;
  };
  const auto one = [](double v, int d) { return Expr::constant(v, d); };
  std::vector<Case> cases;
  cases.push_back({{{1, 6, 6, 1}, Activation::tanh(), 2.0},
                   manufactured_problem(parse_expr("sin(pi*x1)", 1), {one(1, 1)}, {one(0, 1)},
                                        one(1, 1), 1.0, 1.0, Domain::hypercube(1))});
  cases.push_back({{{2, 5, 5, 1}, Activation::tanh(), 1.5},
                   manufactured_problem(parse_expr("x1*x2 + cos(x1)", 2),
                                        {parse_expr("1+0.5*x1", 2), one(0.1, 2), one(0.1, 2),
                                         parse_expr("2-x2", 2)},
                                        {one(0.3, 2), one(-0.2, 2)}, parse_expr("1+x1^2", 2), 0.7,
                                        0.5, Domain::hypercube(2))});
  cases.push_back({{{3, 4, 1}, Activation::logistic(), 2.0},
                   manufactured_problem(parse_expr("exp(-x1^2-x2^2-x3^2)", 3),
                                        {one(1, 3), one(0, 3), one(0, 3), one(0, 3), one(1, 3),
                                         one(0, 3), one(0, 3), one(0, 3), one(1, 3)},
                                        {one(0, 3), one(0, 3), one(0, 3)}, one(2, 3), 1.0, 1.0,
                                        Domain::ball({0.5, 0.5, 0.5}, 0.5))});
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const CoefficientNorms c =
        CoefficientNorms::from_report(check_coercivity(cases[i].problem, 4096, 600 + i));
    const FamilyProbe fp =
        class_family_probe(cases[i].arch, cases[i].problem, c, kFamilyProbes, 700 + i);
    violations += fp.violations;
    for (const BoundReport& r : fp.reports) worst = std::max(worst, r.ratio);
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(cases.size()) + " configs x 6 families x " +
             std::to_string(kFamilyProbes) + " probes: " + std::to_string(violations) +
             " violations, worst ratio " + fmt(worst);
  return o;
}

// ---------------------------------------------------------------- 6: statistical error

Outcome criterion_sta_error() {
  const EllipticProblem p = manufactured_problem(
      parse_expr("sin(pi*x1)", 1), {Expr::constant(1, 1)}, {Expr::constant(0, 1)},
      Expr::constant(1, 1), 1.0, 1.0, Domain::hypercube(1));
  const std::vector<NetworkArch> archs = {{{1, 3, 1}, Activation::tanh(), 1.0},
                                          {{1, 4, 4, 1}, Activation::tanh(), 1.5}};
  const std::vector<std::size_t> ns = {32, 64, 128};
  bool ok = true;
  std::string detail;
  double worst_ratio = 0.0;
  for (std::size_t a = 0; a < archs.size(); ++a) {
    StaErrorOptions o;
    o.trials = kStaTrials;
    o.probe_budget = 4;
    o.ascent_steps = 3;
    o.big_factor = 100;
    o.seed = 800 + a;
    std::vector<double> means;
    for (std::size_t n : ns) {
      const BoundReport r = empirical_sta_error(archs[a], archs[a], p, n, o);
      worst_ratio = std::max(worst_ratio, r.ratio);
      if (!(r.ratio <= 1.0)) ok = false;
      means.push_back(r.empirical);
    }
    detail += "; arch" + std::to_string(a) + " means";
    for (std::size_t k = 0; k < means.size(); ++k) {
      detail += " " + fmt(means[k]);
      if (k > 0 && means[k] > kStaSlack * means[k - 1]) ok = false;
    }
  }
  Outcome out;
  out.pass = ok;
  out.detail = "worst empirical/bound " + fmt(worst_ratio) + detail;
  return out;
}

// ---------------------------------------------------------------- 7: solver regression

// Relative L2 and H1 errors on fresh interior points.
std::pair<double, double> relative_errors(const NetworkParams& u, const Expr& exact,
                                          const Domain& domain, std::uint64_t seed) {
  const PointSet pts = sample_interior(domain, 8192, seed);
  const FieldEvaluator ref = expr_field(exact);
  const int d = domain.dim();
  const FieldEvaluator zero = [d](std::span<const double>) {
    return DualEval{0.0, std::vector<double>(d, 0.0)};
  };
  const H1Estimate err = h1_distance(network_field(u), ref, pts, domain.volume());
  const H1Estimate nrm = h1_distance(zero, ref, pts, domain.volume());
  return {err.l2 / nrm.l2, err.h1 / nrm.h1};
}

// Pinned configurations for the two regression runs.
TrainConfig solve_1d_config() {
  TrainConfig c;
  c.n_interior = 256;
  c.n_boundary = 256;
  c.outer_steps = 5000;
  c.inner_steps = 5;
  c.lr_u = 1e-3;
  c.lr_v = 3e-3;
  c.seed = 7;
  c.eval_every = 5000;
  c.h1_ball_radius = 10.0;
  c.v_h1_penalty = 3.0;
  c.u_average = 0.998;
  c.h1_quad_points = 512;
  c.error_quad_points = 512;
  return c;
}

TrainConfig solve_2d_config() {
  TrainConfig c = solve_1d_config();
  c.lr_u = 3e-3;
  c.v_h1_penalty = 1.0;
  return c;
}

Outcome criterion_solver() {
  const Expr u1 = parse_expr("sin(pi*x1)", 1);
  const EllipticProblem p1 = manufactured_problem(u1, {Expr::constant(1, 1)},
                                                  {Expr::constant(0, 1)}, Expr::constant(1, 1),
                                                  1.0, 1.0, Domain::hypercube(1));
  const NetworkArch a1{{1, 20, 20, 1}, Activation::tanh(), 1e6};
  const TrainResult r1 = minimax_train(p1, a1, a1, solve_1d_config());
  const double rel_h1 = relative_errors(r1.u, u1, p1.domain, 9001).second;

  const Expr u2 = parse_expr("sin(pi*x1)*sin(pi*x2)", 2);
  const auto k = [](double v) { return Expr::constant(v, 2); };
  const EllipticProblem p2 =
      manufactured_problem(u2, {k(1), k(0), k(0), k(1)}, {k(0), k(0)}, k(1), 1.0, 1e-2,
                           Domain::hypercube(2), BoundaryKind::dirichlet_penalty);
  const NetworkArch a2{{2, 20, 20, 1}, Activation::tanh(), 1e6};
  const TrainResult r2 = minimax_train(p2, a2, a2, solve_2d_config());
  const double rel_l2 = relative_errors(r2.u, u2, p2.domain, 9002).first;

  Outcome o;
  o.pass = rel_h1 <= kSolve1dMaxRelH1 && rel_l2 <= kSolve2dMaxRelL2;
  o.detail = "1D seed 7 relative H1 " + fmt(rel_h1) + " (<= " + fmt(kSolve1dMaxRelH1) +
             "); 2D penalty beta=1e-2 relative L2 " + fmt(rel_l2) + " (<= " +
             fmt(kSolve2dMaxRelL2) + ")";
  return o;
}

// ---------------------------------------------------------------- 8: convergence study

Outcome criterion_convergence() {
  const fs::path dir = work_dir("convergence");
  const std::string cfg = R"J({
    "command": "convergence-study",
    "problem": {"dimension": 1, "a": "1", "b": "0", "c": "1", "u_exact": "sin(pi*x1)",
                "alpha": 1.0, "beta": 1.0},
    "u_arch": {"widths": [1, 10, 10, 1], "activation": "tanh", "b_theta": 1000000},
    "train": {"outer_steps": 800, "inner_steps": 2, "lr_u": 3e-3, "lr_v": 3e-3,
              "h1_ball_radius": 10, "v_h1_penalty": 3, "u_average": 0.99, "eval_every": 800,
              "h1_quad_points": 256, "error_quad_points": 4096},
    "sweep": {"n_values": [64, 4096], "seeds": [1, 2, 3, 4, 5]}
  })J";
  const RunResult r = run_experiment(parse_experiment_config(cfg), {dir.string(), {}, true});
  Outcome o;
  if (r.exit_code != 0) {
    o.detail = "run failed: " + r.message;
    return o;
  }
  const double lo = r.summary["median_h1_error"]["64"].get<double>();
  const double hi = r.summary["median_h1_error"]["4096"].get<double>();
  o.pass = hi <= lo;
  o.detail = "median H1 error over 5 seeds: N=64 " + fmt(lo) + ", N=4096 " + fmt(hi);
  return o;
}

// ---------------------------------------------------------------- 9: determinism

int run_cli(const fs::path& config, const fs::path& out) {
  const std::string cmd = std::string("\"") + WGAL_CLI_PATH + "\" \"" + config.string() +
                          "\" --out \"" + out.string() + "\" --quiet";
  return std::system(cmd.c_str());
}

Outcome criterion_determinism() {
  const fs::path dir = work_dir("determinism");
  struct Run {
    std::string name, csv, config;
  };
  const std::vector<Run> runs = {
      {"solve", "history.csv", R"J({
        "command": "solve",
        "problem": {"dimension": 2, "a": "1", "c": "1", "u_exact": "sin(pi*x1)*sin(pi*x2)",
                    "beta": 0.01, "bc_kind": "dirichlet"},
        "u_arch": {"widths": [2, 8, 8, 1], "b_theta": 10},
        "train": {"n_interior": 64, "n_boundary": 32, "outer_steps": 60, "eval_every": 10,
                  "h1_quad_points": 128, "error_quad_points": 128, "seed": 11}})J"},
      {"penalty", "penalty.csv", R"J({
        "command": "penalty-study",
        "problem": {"dimension": 1, "a": "1", "c": "1", "u_exact": "sin(pi*x1)",
                    "bc_kind": "dirichlet"},
        "sweep": {"grid_n": 512}})J"},
      {"convergence", "convergence.csv", R"J({
        "command": "convergence-study",
        "problem": {"dimension": 1, "a": "1", "c": "1", "u_exact": "sin(pi*x1)"},
        "u_arch": {"widths": [1, 6, 1], "b_theta": 10},
        "train": {"outer_steps": 20, "eval_every": 10, "h1_quad_points": 64,
                  "error_quad_points": 128},
        "sweep": {"n_values": [16, 64], "seeds": [1, 2, 3]}})J"},
      {"theory", "theory.csv", R"J({
        "command": "theory-check",
        "problem": {"dimension": 1, "a": "1", "c": "1", "u_exact": "sin(pi*x1)"},
        "u_arch": {"widths": [1, 3, 1], "b_theta": 1.5},
        "theory": {"probes": 300, "trials": 2, "probe_budget": 1, "ascent_steps": 1,
                   "big_factor": 5, "n_values": [16, 32], "random_sets": 20, "seed": 3}})J"},
  };
  std::size_t identical = 0;
  std::string failed;
  for (const Run& r : runs) {
    const fs::path cfg = dir / (r.name + ".json");
    std::ofstream(cfg) << r.config;
    const fs::path a = dir / (r.name + "_a"), b = dir / (r.name + "_b");
    const int ca = run_cli(cfg, a), cb = run_cli(cfg, b);
    const std::string ta = slurp(a / r.csv), tb = slurp(b / r.csv);
    if (ca == 0 && cb == 0 && !ta.empty() && ta == tb) {
      ++identical;
    } else {
      failed += " " + r.name;
    }
  }
  Outcome o;
  o.pass = identical == runs.size();
  o.detail = std::to_string(identical) + "/" + std::to_string(runs.size()) +
             " commands produced byte-identical CSV on re-run via the CLI" +
             (failed.empty() ? "" : "; differing:" + failed);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", criterion_gradients},
      {"penalty rate", criterion_penalty},
      {"Lipschitz lemmas", criterion_lipschitz},
      {"Rademacher machinery", criterion_rademacher},
      {"class constants", criterion_families},
      {"statistical-error direction", criterion_sta_error},
      {"solver regression", criterion_solver},
      {"convergence-study property", criterion_convergence},
      {"determinism", criterion_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= kBudget[id];
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %d [%s]: %s (%s; %.1fs of %.0fs budget%s)\n", id, criteria[i].first,
                pass ? "PASS" : "FAIL", o.detail.c_str(), secs, kBudget[id],
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
