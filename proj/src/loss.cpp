#include <wgal/loss.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace wgal {

namespace {

void require_dims(const NetworkParams& u, const NetworkParams& v, int d) {
  if (u.arch().input_dim() != d || v.arch().input_dim() != d) {
    throw std::invalid_argument("network input dimension does not match the problem");
  }
}

void require_finite(double x, const char* component, std::size_t k, const char* what) {
  if (!std::isfinite(x)) {
    throw NumericalError(component, static_cast<std::ptrdiff_t>(k),
                         std::string("non-finite ") + what + " at " + component + " sample " +
                             std::to_string(k));
  }
}

void require_finite(const DualWorkspace& ws, const char* net, const char* component,
                    std::size_t k) {
  require_finite(ws.value(), component, k, net);
  for (double g : ws.gradient()) require_finite(g, component, k, net);
}

double alpha_eff(const EllipticProblem& p, const LossOptions& o) {
  return o.boundary_alpha_half ? 0.5 * p.alpha : p.alpha;
}

/// Pairwise accumulation of per-block gradient vectors. Blocks are pushed in
/// sample order and merged like a binary counter, so the reduction tree is a
/// fixed function of the sample count.
class TreeAccumulator {
 public:
  explicit TreeAccumulator(std::size_t size) : size_(size), block_(size, 0.0) {}

  std::span<double> block() { return block_; }

  void flush() {
    std::vector<double> cur = std::move(block_);
    block_.assign(size_, 0.0);
    std::size_t level = 0;
    while (level < levels_.size() && !levels_[level].empty()) {
      for (std::size_t i = 0; i < size_; ++i) cur[i] += levels_[level][i];
      levels_[level].clear();
      ++level;
    }
    if (level == levels_.size()) levels_.emplace_back();
    levels_[level] = std::move(cur);
  }

  std::vector<double> finish() {
    flush();
    std::vector<double> out(size_, 0.0);
    bool first = true;
    for (auto& lv : levels_) {
      if (lv.empty()) continue;
      if (first) {
        out = std::move(lv);
        first = false;
      } else {
        for (std::size_t i = 0; i < size_; ++i) out[i] += lv[i];
      }
    }
    return out;
  }

 private:
  std::size_t size_;
  std::vector<double> block_;
  std::vector<std::vector<double>> levels_;
};

constexpr std::size_t kBlock = 32;

}  // namespace

PreparedBatch prepare_batch(const EllipticProblem& problem, EmpiricalBatch batch) {
  const int d = problem.dim();
  if (batch.interior.dim != d || batch.boundary.dim != d) {
    throw std::invalid_argument("batch dimension does not match the problem");
  }
  if (batch.interior.size() == 0 || batch.boundary.size() == 0) {
    throw std::invalid_argument("batch must contain interior and boundary points");
  }
  PreparedBatch pb;
  pb.dim = d;
  pb.volume = problem.domain.volume();
  pb.boundary_measure = problem.domain.boundary_measure();
  const std::size_t n = batch.interior.size();
  const std::size_t m = batch.boundary.size();
  pb.a.resize(n * d * d);
  pb.b.resize(n * d);
  pb.c.resize(n);
  pb.f.resize(n);
  pb.g.resize(m);
  std::size_t k = 0;
  try {
    for (; k < n; ++k) {
      const auto x = batch.interior[k];
      for (int ij = 0; ij < d * d; ++ij) pb.a[k * d * d + ij] = problem.a[ij].eval(x);
      for (int i = 0; i < d; ++i) pb.b[k * d + i] = problem.b[i].eval(x);
      pb.c[k] = problem.c.eval(x);
      pb.f[k] = problem.f.eval(x);
    }
  } catch (const EvalError& e) {
    throw NumericalError("interior", static_cast<std::ptrdiff_t>(k),
                         std::string("coefficient evaluation failed at interior sample ") +
                             std::to_string(k) + ": " + e.what());
  }
  for (k = 0; k < m; ++k) {
    try {
      pb.g[k] = problem.g.eval(batch.boundary[k], batch.normals[k]);
    } catch (const EvalError& e) {
      throw NumericalError("boundary", static_cast<std::ptrdiff_t>(k),
                           std::string("g evaluation failed at boundary sample ") +
                               std::to_string(k) + ": " + e.what());
    }
    require_finite(pb.g[k], "boundary", k, "g");
  }
  pb.batch = std::move(batch);
  return pb;
}

LossGradients loss_gradients(const NetworkParams& u, const NetworkParams& v,
                             const EllipticProblem& problem, const PreparedBatch& pb,
                             const LossOptions& opts, GradTarget target) {
  const int d = pb.dim;
  require_dims(u, v, d);
  const bool want_u = target != GradTarget::v_only;
  const bool want_v = target != GradTarget::u_only;
  const std::size_t n = pb.batch.interior.size();
  const std::size_t m = pb.batch.boundary.size();
  const double w_in = pb.volume / static_cast<double>(n);
  const double w_bd = pb.boundary_measure / (problem.beta * static_cast<double>(m));
  const double alpha = alpha_eff(problem, opts);

  DualWorkspace wu;
  DualWorkspace wv;
  TreeAccumulator acc_u(want_u ? u.size() : 0);
  TreeAccumulator acc_v(want_v ? v.size() : 0);
  std::vector<double> seed_u(d);
  std::vector<double> seed_v(d);
  std::vector<double> terms(n);

  for (std::size_t k = 0; k < n; ++k) {
    const auto x = pb.batch.interior[k];
    wu.forward(u, x);
    wv.forward(v, x);
    require_finite(wu, "u", "interior", k);
    require_finite(wv, "v", "interior", k);
    const double uu = wu.value();
    const double vv = wv.value();
    const auto du = wu.gradient();
    const auto dv = wv.gradient();
    const double* a = &pb.a[k * d * d];
    const double* b = &pb.b[k * d];
    const double c = pb.c[k];
    const double f = pb.f[k];

    double flux = 0.0;
    double drift = 0.0;
    for (int i = 0; i < d; ++i) {
      double adv = 0.0;
      for (int j = 0; j < d; ++j) adv += a[i * d + j] * dv[j];
      flux += du[i] * adv;
      drift += b[i] * du[i];
    }
    const double term = flux + drift * vv + c * uu * vv - f * vv;
    require_finite(term, "interior", k, "integrand");
    terms[k] = term;

    if (want_u) {
      for (int i = 0; i < d; ++i) {
        double s = b[i] * vv;
        for (int j = 0; j < d; ++j) s += a[i * d + j] * dv[j];
        seed_u[i] = w_in * s;
      }
      wu.backprop(u, w_in * c * vv, seed_u, acc_u.block());
    }
    if (want_v) {
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += a[i * d + j] * du[i];
        seed_v[j] = w_in * s;
      }
      wv.backprop(v, w_in * (drift + c * uu - f), seed_v, acc_v.block());
    }
    if ((k + 1) % kBlock == 0) {
      if (want_u) acc_u.flush();
      if (want_v) acc_v.flush();
    }
  }
  if (want_u) acc_u.flush();
  if (want_v) acc_v.flush();

  std::vector<double> bterms(m);
  std::fill(seed_u.begin(), seed_u.end(), 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const auto y = pb.batch.boundary[k];
    wu.forward(u, y);
    wv.forward(v, y);
    require_finite(wu.value(), "boundary", k, "u");
    require_finite(wv.value(), "boundary", k, "v");
    const double uu = wu.value();
    const double vv = wv.value();
    const double g = pb.g[k];
    bterms[k] = alpha * uu * vv - g * vv;
    require_finite(bterms[k], "boundary", k, "integrand");
    if (want_u) wu.backprop(u, w_bd * alpha * vv, seed_u, acc_u.block());
    if (want_v) wv.backprop(v, w_bd * (alpha * uu - g), seed_u, acc_v.block());
    if ((k + 1) % kBlock == 0) {
      if (want_u) acc_u.flush();
      if (want_v) acc_v.flush();
    }
  }

  LossGradients out;
  if (want_u) out.grad_u = acc_u.finish();
  if (want_v) out.grad_v = acc_v.finish();
  out.value.interior = w_in * pairwise_sum(terms);
  out.value.boundary = w_bd * pairwise_sum(bterms);
  out.value.total = out.value.interior + out.value.boundary;
  out.value.n = n;
  out.value.m = m;
  return out;
}

LossValue empirical_loss(const NetworkParams& u, const NetworkParams& v,
                         const EllipticProblem& problem, const PreparedBatch& pb,
                         const LossOptions& opts) {
  const int d = pb.dim;
  require_dims(u, v, d);
  const std::size_t n = pb.batch.interior.size();
  const std::size_t m = pb.batch.boundary.size();
  const double alpha = alpha_eff(problem, opts);
  DualWorkspace wu;
  DualWorkspace wv;
  std::vector<double> terms(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto x = pb.batch.interior[k];
    wu.forward(u, x);
    wv.forward(v, x);
    require_finite(wu, "u", "interior", k);
    require_finite(wv, "v", "interior", k);
    const auto du = wu.gradient();
    const auto dv = wv.gradient();
    const double* a = &pb.a[k * d * d];
    const double* b = &pb.b[k * d];
    double flux = 0.0;
    double drift = 0.0;
    for (int i = 0; i < d; ++i) {
      double adv = 0.0;
      for (int j = 0; j < d; ++j) adv += a[i * d + j] * dv[j];
      flux += du[i] * adv;
      drift += b[i] * du[i];
    }
    const double vv = wv.value();
    terms[k] = flux + drift * vv + pb.c[k] * wu.value() * vv - pb.f[k] * vv;
    require_finite(terms[k], "interior", k, "integrand");
  }
  std::vector<double> bterms(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto y = pb.batch.boundary[k];
    wu.forward(u, y);
    wv.forward(v, y);
    bterms[k] = alpha * wu.value() * wv.value() - pb.g[k] * wv.value();
    require_finite(bterms[k], "boundary", k, "integrand");
  }
  LossValue lv;
  lv.interior = pb.volume / static_cast<double>(n) * pairwise_sum(terms);
  lv.boundary =
      pb.boundary_measure / (problem.beta * static_cast<double>(m)) * pairwise_sum(bterms);
  lv.total = lv.interior + lv.boundary;
  lv.n = n;
  lv.m = m;
  return lv;
}

LossValue empirical_loss(const NetworkParams& u, const NetworkParams& v,
                         const EllipticProblem& problem, const EmpiricalBatch& batch,
                         const LossOptions& opts) {
  return empirical_loss(u, v, problem, prepare_batch(problem, batch), opts);
}

LossGradients loss_gradients(const NetworkParams& u, const NetworkParams& v,
                             const EllipticProblem& problem, const EmpiricalBatch& batch,
                             const LossOptions& opts, GradTarget target) {
  return loss_gradients(u, v, problem, prepare_batch(problem, batch), opts, target);
}

LossValue continuous_loss_estimate(const NetworkParams& u, const NetworkParams& v,
                                   const EllipticProblem& problem, std::size_t n_big,
                                   std::uint64_t seed, const LossOptions& opts) {
  if (n_big < 1) throw std::invalid_argument("continuous_loss_estimate needs N_big >= 1");
  return empirical_loss(u, v, problem, sample_batch(problem.domain, n_big, n_big, seed), opts);
}

namespace {

/// Mean and standard error of `w * x_k` from pairwise sums.
void mc_moments(const std::vector<double>& x, double w, double& mean, double& stderr_) {
  const double n = static_cast<double>(x.size());
  const double mu = pairwise_sum(x) / n;
  std::vector<double> dev(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) dev[k] = (x[k] - mu) * (x[k] - mu);
  const double var = x.size() > 1 ? pairwise_sum(dev) / (n - 1.0) : 0.0;
  mean = w * mu;
  stderr_ = w * std::sqrt(var / n);
}

H1Estimate finish_estimate(const std::vector<double>& l2, const std::vector<double>& semi,
                           double volume) {
  H1Estimate e;
  e.n = l2.size();
  mc_moments(l2, volume, e.l2_sq, e.l2_sq_stderr);
  mc_moments(semi, volume, e.semi_sq, e.semi_sq_stderr);
  e.l2 = std::sqrt(e.l2_sq);
  e.semi = std::sqrt(e.semi_sq);
  e.h1 = std::sqrt(e.l2_sq + e.semi_sq);
  return e;
}

}  // namespace

H1Estimate h1_distance(const FieldEvaluator& u, const FieldEvaluator& ref, const PointSet& points,
                       double volume) {
  if (points.size() == 0) throw std::invalid_argument("h1_distance needs at least one point");
  std::vector<double> l2(points.size());
  std::vector<double> semi(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const DualEval a = u(points[k]);
    const DualEval b = ref(points[k]);
    l2[k] = (a.value - b.value) * (a.value - b.value);
    double s = 0.0;
    for (std::size_t p = 0; p < a.gradient.size(); ++p) {
      const double dp = a.gradient[p] - b.gradient[p];
      s += dp * dp;
    }
    semi[k] = s;
  }
  return finish_estimate(l2, semi, volume);
}

H1Estimate h1_error(const NetworkParams& u, const FieldEvaluator& ref, const Domain& domain,
                    std::size_t n_quad, std::uint64_t seed) {
  if (n_quad < 1) throw std::invalid_argument("h1_error needs N_quad >= 1");
  const PointSet pts = sample_interior(domain, n_quad, seed);
  DualWorkspace ws;
  FieldEvaluator uf = [&](std::span<const double> x) {
    ws.forward(u, x);
    return DualEval{ws.value(), {ws.gradient().begin(), ws.gradient().end()}};
  };
  return h1_distance(uf, ref, pts, domain.volume());
}

H1Estimate h1_norm(const NetworkParams& u, const PointSet& points, double volume) {
  if (points.size() == 0) throw std::invalid_argument("h1_norm needs at least one point");
  DualWorkspace ws;
  std::vector<double> l2(points.size());
  std::vector<double> semi(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    ws.forward(u, points[k]);
    l2[k] = ws.value() * ws.value();
    double s = 0.0;
    for (double g : ws.gradient()) s += g * g;
    semi[k] = s;
  }
  return finish_estimate(l2, semi, volume);
}

NormGradient h1_norm_gradient(const NetworkParams& u, const PointSet& points, double volume) {
  NormGradient out;
  out.value = h1_norm(u, points, volume).h1;
  out.grad.assign(u.size(), 0.0);
  if (out.value == 0.0) return out;
  // d sqrt(S)/dtheta with S = w sum_k (u^2 + |grad u|^2).
  const double w = volume / static_cast<double>(points.size()) / out.value;
  DualWorkspace ws;
  TreeAccumulator acc(u.size());
  std::vector<double> seed(points.dim);
  for (std::size_t k = 0; k < points.size(); ++k) {
    ws.forward(u, points[k]);
    for (int p = 0; p < points.dim; ++p) seed[p] = w * ws.gradient()[p];
    ws.backprop(u, w * ws.value(), seed, acc.block());
    if ((k + 1) % kBlock == 0) acc.flush();
  }
  out.grad = acc.finish();
  return out;
}

}  // namespace wgal
