#include <wgal/theory.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace wgal {

void FiniteVectorSet::validate() const {
  if (n < 1) throw std::invalid_argument("vector length N must be >= 1");
  if (vectors.empty()) throw std::invalid_argument("finite set must be nonempty");
  for (const auto& a : vectors) {
    if (a.size() != n) throw std::invalid_argument("all vectors must have length N");
  }
}

double FiniteVectorSet::diameter() const {
  double d = 0.0;
  for (const auto& a : vectors) d = std::max(d, l2_norm(a));
  return d;
}

double exact_rademacher(const FiniteVectorSet& set) {
  set.validate();
  if (set.n > 20) throw std::invalid_argument("exact_rademacher enumerates 2^N; N must be <= 20");
  const std::size_t count = std::size_t{1} << set.n;
  std::vector<double> sups(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : set.vectors) {
      double s = 0.0;
      for (std::size_t k = 0; k < set.n; ++k) s += ((mask >> k) & 1U) ? a[k] : -a[k];
      best = std::max(best, s);
    }
    sups[mask] = best;
  }
  return pairwise_sum(sups) / static_cast<double>(count) / static_cast<double>(set.n);
}

double massart_bound(const FiniteVectorSet& set) {
  set.validate();
  return set.diameter() * std::sqrt(2.0 * std::log(static_cast<double>(set.vectors.size()))) /
         static_cast<double>(set.n);
}

LogValue covering_bound_ball(double radius, int d, double eps) {
  if (!(radius > 0.0) || !(eps > 0.0) || d < 1) {
    throw std::invalid_argument("covering_bound_ball needs B > 0, eps > 0, d >= 1");
  }
  const double log_base = std::log(2.0 * radius) + 0.5 * std::log(static_cast<double>(d)) -
                          std::log(eps);
  return LogValue::from_log(d * log_base);
}

LogValue chaining_bound(LogValue b_i, LogValue l_i, double n_nonzero, double b_theta,
                        double n) {
  if (!(n_nonzero > 0) || !(b_theta > 0) || !(n > 0)) {
    throw std::invalid_argument("chaining_bound inputs must be positive");
  }
  // A class that is identically zero, or a single fixed function, has zero complexity.
  if (b_i.is_zero() || l_i.is_zero()) return LogValue::from_value(0.0);
  const double log_sqrt_n = 0.5 * std::log(n);
  // 1/sqrt(N) < B_i / 2
  if (!(-log_sqrt_n < b_i.log() - std::log(2.0))) {
    throw BoundNotApplicable("chaining bound not applicable at this N: 1/sqrt(N) >= B_i/2");
  }
  const double log_arg = std::log(2.0) + l_i.log() + std::log(b_theta) +
                         0.5 * std::log(n_nonzero) + log_sqrt_n;
  if (!(log_arg > 0.0)) {
    throw BoundNotApplicable("chaining bound not applicable at this N: log argument <= 1");
  }
  const LogValue first = LogValue::from_log(std::log(4.0) - log_sqrt_n);
  const LogValue second = LogValue::from_log(std::log(6.0) + 0.5 * std::log(n_nonzero) +
                                             b_i.log() - log_sqrt_n + 0.5 * std::log(log_arg));
  return first + second;
}

LogValue chaining_bound(double b_i, double l_i, double n_nonzero, double b_theta, double n) {
  return chaining_bound(LogValue::from_value(b_i), LogValue::from_value(l_i), n_nonzero, b_theta,
                        n);
}

CoefficientNorms CoefficientNorms::from_report(const CoercivityReport& r) {
  return {r.a_sup, r.b_sup, r.c_sup, r.f_sup, r.g_sup};
}

ClassConstants class_constants(const NetworkArch& arch, std::size_t n_nonzero,
                               const CoefficientNorms& coeff, double alpha) {
  arch.validate();
  if (!arch.activation.bounded()) {
    throw std::invalid_argument("class constants need a bounded activation");
  }
  if (n_nonzero < 1) throw std::invalid_argument("class constants need n >= 1");
  const double depth = arch.depth();
  const double d = arch.input_dim();
  const double last = arch.widths[arch.depth() - 1] + 1.0;  // n_{D-1} + 1
  const LogValue b = LogValue::from_value(arch.b_theta);
  const LogValue p = LogValue::from_value(arch.hidden_width_product());
  const LogValue sn = LogValue::from_value(std::sqrt(static_cast<double>(n_nonzero)));
  const LogValue s2n = LogValue::from_value(std::sqrt(2.0 * static_cast<double>(n_nonzero)));
  const LogValue dd = LogValue::from_value(d);
  const LogValue dp1 = LogValue::from_value(depth + 1.0);
  const LogValue nl = LogValue::from_value(last);
  auto c = [](double v) { return LogValue::from_value(std::fabs(v)); };
  const LogValue ca = c(coeff.a_sup), cb = c(coeff.b_sup), cc = c(coeff.c_sup);
  const LogValue cf = c(coeff.f_sup), cg = c(coeff.g_sup), c5 = c(alpha / 2.0);

  ClassConstants k;
  k.b[0] = ca * dd.pow(2) * b.pow(2 * depth) * p.pow(2);
  k.b[1] = cb * dd * nl * b.pow(depth + 1) * p;
  k.b[2] = cc * nl.pow(2) * b.pow(2);
  k.b[3] = cf * nl * b;
  k.b[4] = c5 * nl.pow(2) * b.pow(2);
  k.b[5] = cg * nl * b;

  k.l[0] = ca * dd.pow(2) * s2n * dp1 * b.pow(3 * depth) * p.pow(3);
  k.l[1] = cb * dd * s2n * dp1 * nl * b.pow(2 * depth + 1) * p.pow(2);
  k.l[2] = cc * s2n * nl * b.pow(depth) * p;
  k.l[3] = cf * sn * b.pow(depth - 1) * p;
  k.l[4] = c5 * s2n * nl * b.pow(depth) * p;
  k.l[5] = cg * sn * b.pow(depth - 1) * p;
  return k;
}

LogValue statistical_error_bound(const NetworkArch& arch, std::size_t n_nonzero, int d, double n,
                                 double beta, double c_user) {
  arch.validate();
  if (n_nonzero < 1 || d < 1 || !(n > 0) || !(beta > 0) || !(c_user > 0)) {
    throw std::invalid_argument("statistical_error_bound inputs must be positive");
  }
  const double depth = arch.depth();
  const double log_v = std::log(c_user) - std::log(beta) + 3.0 * std::log(d) +
                       0.5 * std::log(depth) +
                       (3.5 * depth - 1.5) * std::log(static_cast<double>(n_nonzero)) +
                       (3.5 * depth + 0.5) * std::log(arch.b_theta) - 0.25 * std::log(n);
  return LogValue::from_log(log_v);
}

void BoundReport::finalize() {
  ratio = theoretical.overflows() || theoretical.is_zero() ? 0.0
                                                           : empirical / theoretical.value();
  if (theoretical.is_zero() && empirical > 0.0) ratio = std::numeric_limits<double>::infinity();
  std::string key = lemma;
  char buf[64];
  for (const auto& [k, v] : inputs) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    key += ";" + k + "=" + buf;
  }
  config_hash = fnv1a_hex(key);
}

namespace {

NetworkParams random_params(const NetworkArch& arch, std::uint64_t seed) {
  return init_network(arch, seed, InitOptions{InitScheme::uniform, arch.b_theta});
}

std::vector<double> random_point(Rng& rng, int d) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform_open();
  return x;
}

double distance(const NetworkParams& a, const NetworkParams& b) {
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a.values()[i] - b.values()[i];
  return l2_norm(diff);
}

}  // namespace

BoundReport empirical_sta_error(const NetworkArch& u_arch, const NetworkArch& v_arch,
                                const EllipticProblem& problem, std::size_t n,
                                const StaErrorOptions& o) {
  if (o.trials < 1 || o.probe_budget < 1 || o.big_factor < 1 || n < 1) {
    throw std::invalid_argument("empirical_sta_error needs trials, probes, N >= 1");
  }
  u_arch.validate();
  v_arch.validate();
  const auto& dom = problem.domain;
  std::vector<double> maxima(o.trials);
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::uint64_t ts = derive_seed(o.seed, t);
    const PreparedBatch small = prepare_batch(problem, sample_batch(dom, n, n, derive_seed(ts, 1)));
    const PreparedBatch big = prepare_batch(
        problem, sample_batch(dom, n * o.big_factor, n * o.big_factor, derive_seed(ts, 2)));
    double best = 0.0;
    for (std::size_t p = 0; p < o.probe_budget; ++p) {
      const std::uint64_t ps = derive_seed(derive_seed(ts, 3), p);
      NetworkParams u = random_params(u_arch, derive_seed(ps, 1));
      NetworkParams v = random_params(v_arch, derive_seed(ps, 2));
      double sign = 0.0;
      for (std::size_t s = 0; s <= o.ascent_steps; ++s) {
        const bool last = s == o.ascent_steps;
        if (last) {
          const double gap = empirical_loss(u, v, problem, small, o.loss).total -
                             empirical_loss(u, v, problem, big, o.loss).total;
          best = std::max(best, std::fabs(gap));
          break;
        }
        const LossGradients gs = loss_gradients(u, v, problem, small, o.loss);
        const LossGradients gb = loss_gradients(u, v, problem, big, o.loss);
        const double gap = gs.value.total - gb.value.total;
        best = std::max(best, std::fabs(gap));
        if (sign == 0.0) sign = gap >= 0.0 ? 1.0 : -1.0;
        // Normalized ascent step on sign * gap, clipped back into the class.
        std::vector<double> du(u.size()), dv(v.size());
        for (std::size_t i = 0; i < du.size(); ++i) du[i] = sign * (gs.grad_u[i] - gb.grad_u[i]);
        for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = sign * (gs.grad_v[i] - gb.grad_v[i]);
        const double norm = std::hypot(l2_norm(du), l2_norm(dv));
        if (!(norm > 0.0)) break;
        const double step = o.ascent_lr * u_arch.b_theta / norm;
        for (std::size_t i = 0; i < du.size(); ++i) u.values()[i] += step * du[i];
        for (std::size_t i = 0; i < dv.size(); ++i) v.values()[i] += step * dv[i];
        clip_weights_in_place(u);
        clip_weights_in_place(v);
      }
    }
    maxima[t] = best;
  }

  BoundReport r;
  r.lemma = "sta_error";
  r.empirical = 2.0 * pairwise_sum(maxima) / static_cast<double>(o.trials);
  const NetworkArch& big_arch = u_arch.param_count() >= v_arch.param_count() ? u_arch : v_arch;
  NetworkArch bound_arch = big_arch;
  bound_arch.b_theta = std::max(u_arch.b_theta, v_arch.b_theta);
  const std::size_t n_nonzero = std::max(u_arch.param_count(), v_arch.param_count());
  r.theoretical = statistical_error_bound(bound_arch, n_nonzero, problem.dim(),
                                          static_cast<double>(n), problem.beta, o.c_user);
  r.inputs = {{"N", static_cast<double>(n)},
              {"n_nonzero", static_cast<double>(n_nonzero)},
              {"depth", static_cast<double>(bound_arch.depth())},
              {"b_theta", bound_arch.b_theta},
              {"d", static_cast<double>(problem.dim())},
              {"beta", problem.beta},
              {"trials", static_cast<double>(o.trials)},
              {"probes", static_cast<double>(o.probe_budget)},
              {"c_user", o.c_user}};
  r.finalize();
  return r;
}

LipschitzReport lipschitz_probe(const NetworkArch& arch, std::size_t probes, std::uint64_t seed) {
  if (probes < 1) throw std::invalid_argument("lipschitz_probe needs probes >= 1");
  arch.validate();
  const std::size_t n_nonzero = arch.param_count();
  const NetworkBounds nb = network_bounds(arch, n_nonzero);
  Rng rng(derive_seed(seed, 1));
  const int d = arch.input_dim();
  DualWorkspace w1;
  DualWorkspace w2;
  double max_value = 0.0;
  double max_deriv = 0.0;
  double max_grad = 0.0;
  std::size_t violations = 0;
  const double tol = 1.0 + 1e-12;
  for (std::size_t k = 0; k < probes; ++k) {
    NetworkParams t1 = random_params(arch, rng.next_u64());
    NetworkParams t2;
    if (k % 2 == 0) {
      t2 = random_params(arch, rng.next_u64());
    } else {
      t2 = t1;
      const double eps = std::pow(10.0, rng.uniform(-6.0, -1.0)) * arch.b_theta;
      for (double& t : t2.values()) t += eps * rng.uniform(-1.0, 1.0);
      clip_weights_in_place(t2);
    }
    const auto x = random_point(rng, d);
    w1.forward(t1, x);
    w2.forward(t2, x);
    double deriv = 0.0;
    for (double g : w1.gradient()) deriv = std::max(deriv, std::fabs(g));
    max_deriv = std::max(max_deriv, deriv);
    if (deriv > nb.b_grad.value() * tol) ++violations;

    const double dist = distance(t1, t2);
    if (dist == 0.0) continue;
    const double rv = std::fabs(w1.value() - w2.value()) / dist;
    double dg = 0.0;
    for (int p = 0; p < d; ++p) dg = std::max(dg, std::fabs(w1.gradient()[p] - w2.gradient()[p]));
    const double rg = dg / dist;
    max_value = std::max(max_value, rv);
    max_grad = std::max(max_grad, rg);
    if (rv > nb.l_value.value() * tol) ++violations;
    if (rg > nb.l_grad.value() * tol) ++violations;
  }

  std::map<std::string, double> inputs = {{"depth", static_cast<double>(arch.depth())},
                                          {"width", static_cast<double>(arch.width())},
                                          {"d", static_cast<double>(d)},
                                          {"b_theta", arch.b_theta},
                                          {"n_nonzero", static_cast<double>(n_nonzero)},
                                          {"probes", static_cast<double>(probes)}};
  auto make = [&](const char* name, LogValue bound, double emp) {
    BoundReport r;
    r.lemma = name;
    r.theoretical = bound;
    r.empirical = emp;
    r.inputs = inputs;
    r.finalize();
    return r;
  };
  LipschitzReport out;
  out.value = make("f_lip", nb.l_value, max_value);
  out.derivative = make("f_derivative_bound", nb.b_grad, max_deriv);
  out.gradient = make("df_lip", nb.l_grad, max_grad);
  out.violations = violations;
  return out;
}

FamilyProbe class_family_probe(const NetworkArch& arch, const EllipticProblem& problem,
                               const CoefficientNorms& coeff, std::size_t probes,
                               std::uint64_t seed) {
  if (probes < 1) throw std::invalid_argument("class_family_probe needs probes >= 1");
  const int d = problem.dim();
  if (arch.input_dim() != d) throw std::invalid_argument("architecture dimension mismatch");
  const ClassConstants k = class_constants(arch, arch.param_count(), coeff, problem.alpha);
  const PointSet xs = sample_interior(problem.domain, probes, derive_seed(seed, 1));
  const BoundarySample ys = sample_boundary(problem.domain, probes, derive_seed(seed, 2));
  Rng rng(derive_seed(seed, 3));
  DualWorkspace wu;
  DualWorkspace wv;
  FamilyProbe out;
  for (std::size_t s = 0; s < probes; ++s) {
    const NetworkParams u = random_params(arch, rng.next_u64());
    const NetworkParams v = random_params(arch, rng.next_u64());
    const auto x = xs[s];
    wu.forward(u, x);
    wv.forward(v, x);
    double f1 = 0.0;
    double f2 = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        f1 += problem.a[i * d + j].eval(x) * wu.gradient()[i] * wv.gradient()[j];
      }
      f2 += problem.b[i].eval(x) * wu.gradient()[i] * wv.value();
    }
    const double f3 = problem.c.eval(x) * wu.value() * wv.value();
    const double f4 = problem.f.eval(x) * wv.value();
    const auto y = ys.points[s];
    wu.forward(u, y);
    wv.forward(v, y);
    const double f5 = 0.5 * problem.alpha * wu.value() * wv.value();
    const double f6 = problem.g.eval(y, ys.normals[s]) * wv.value();
    const std::array<double, 6> vals = {f1, f2, f3, f4, f5, f6};
    for (int i = 0; i < 6; ++i) out.empirical[i] = std::max(out.empirical[i], std::fabs(vals[i]));
  }
  for (int i = 0; i < 6; ++i) {
    BoundReport& r = out.reports[i];
    r.lemma = "family_F" + std::to_string(i + 1) + "_sup";
    r.theoretical = k.b[i];
    r.empirical = out.empirical[i];
    r.inputs = {{"depth", static_cast<double>(arch.depth())},
                {"width", static_cast<double>(arch.width())},
                {"b_theta", arch.b_theta},
                {"probes", static_cast<double>(probes)},
                {"alpha", problem.alpha}};
    r.finalize();
    if (!k.b[i].overflows() && out.empirical[i] > k.b[i].value() * (1.0 + 1e-12)) {
      ++out.violations;
    }
  }
  return out;
}

}  // namespace wgal
