#include <wgal/train.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wgal {

void TrainConfig::validate() const {
  if (n_interior < 1 || n_boundary < 1) throw std::invalid_argument("N and M must be >= 1");
  if (inner_steps < 1) throw std::invalid_argument("inner_steps must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (h1_quad_points < 1 || error_quad_points < 1) {
    throw std::invalid_argument("quadrature point counts must be >= 1");
  }
  if (!(lr_u >= 0.0) || !(lr_v >= 0.0)) throw std::invalid_argument("learning rates must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam eps must be > 0");
  if (b_theta && !(*b_theta >= 1.0)) throw std::invalid_argument("b_theta must be >= 1");
  if (!(h1_ball_radius > 0.0)) throw std::invalid_argument("h1_ball_radius must be > 0");
  if (!(v_h1_penalty >= 0.0)) throw std::invalid_argument("v_h1_penalty must be >= 0");
  if (!(u_average >= 0.0 && u_average < 1.0)) {
    throw std::invalid_argument("u_average must lie in [0, 1)");
  }
  if (!(grad_clip_norm >= 0.0)) throw std::invalid_argument("grad_clip_norm must be >= 0");
}

Optimizer::Optimizer(OptimizerKind kind, std::size_t size, double beta1, double beta2,
                     double eps)
    : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (kind_ == OptimizerKind::adam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::reset() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  t_ = 0;
}

void Optimizer::apply(std::span<double> theta, std::span<const double> grad, double lr,
                      double direction) {
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += direction * lr * grad[i];
    return;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mh = m_[i] / c1;
    const double vh = v_[i] / c2;
    theta[i] += direction * lr * mh / (std::sqrt(vh) + eps_);
  }
}

double clip_gradient(std::span<double> grad, double max_norm, bool* clipped) {
  const double norm = l2_norm(grad);
  const bool do_clip = max_norm > 0.0 && norm > max_norm;
  if (do_clip) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  if (clipped) *clipped = do_clip;
  return norm;
}

namespace {

void require_finite_vector(const std::vector<double>& g, const char* component,
                           std::size_t step) {
  for (double x : g) {
    if (!std::isfinite(x)) {
      throw NumericalError(component, -1,
                           std::string("non-finite gradient for ") + component + " at step " +
                               std::to_string(step),
                           static_cast<std::ptrdiff_t>(step));
    }
  }
}

/// Rescales the final layer so the sampled H1 norm is at most `radius`.
/// Returns true when a rescale happened.
bool soft_h1_rescale(NetworkParams& u, const PointSet& pts, double volume, double radius) {
  const double h = h1_norm(u, pts, volume).h1;
  if (!(h > radius)) return false;
  const double s = radius / h;
  const int last = u.arch().depth();
  for (double& a : u.weights(last)) a *= s;
  for (double& b : u.bias(last)) b *= s;
  return true;
}

}  // namespace

NormGradient adversary_energy(const NetworkParams& v, const PreparedBatch& pb, double beta) {
  NormGradient out = h1_norm_gradient(v, pb.batch.interior, pb.volume);
  const double h = out.value;
  for (double& x : out.grad) x *= 2.0 * h;
  out.value = h * h;
  const PointSet& y = pb.batch.boundary;
  if (y.size() == 0) return out;
  const double w = pb.boundary_measure / (beta * static_cast<double>(y.size()));
  DualWorkspace ws;
  std::vector<double> acc(v.size(), 0.0);  // backprop accumulates
  const std::vector<double> zero(y.dim, 0.0);
  double sq = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    ws.forward(v, y[k]);
    sq += ws.value() * ws.value();
    ws.backprop(v, ws.value(), zero, acc);
  }
  out.value += w * sq;
  for (std::size_t i = 0; i < acc.size(); ++i) out.grad[i] += 2.0 * w * acc[i];
  return out;
}

TrainResult minimax_train(const EllipticProblem& problem, NetworkArch u_arch, NetworkArch v_arch,
                          const TrainConfig& cfg, const FieldEvaluator* u_ref,
                          const CheckpointFn& checkpoint) {
  cfg.validate();
  problem.validate();
  if (cfg.b_theta) {
    u_arch.b_theta = *cfg.b_theta;
    v_arch.b_theta = *cfg.b_theta;
  }
  u_arch.validate();
  v_arch.validate();
  const int d = problem.dim();
  if (u_arch.input_dim() != d || v_arch.input_dim() != d) {
    throw std::invalid_argument("architecture input dimension does not match the problem");
  }

  const std::uint64_t seed = cfg.seed;
  TrainResult res;
  res.u = init_network(u_arch, derive_seed(seed, 101), cfg.init);
  res.v = init_network(v_arch, derive_seed(seed, 102), cfg.init);
  if (cfg.outer_steps == 0) return res;

  const LossOptions lopts{cfg.boundary_alpha_half};
  const double volume = problem.domain.volume();
  const PointSet ball_pts = sample_interior(problem.domain, cfg.h1_quad_points, derive_seed(seed, 104));
  const PointSet err_pts =
      u_ref ? sample_interior(problem.domain, cfg.error_quad_points, derive_seed(seed, 105))
            : PointSet{d, {}};
  const std::uint64_t batch_stream = derive_seed(seed, 103);
  const std::uint64_t restart_stream = derive_seed(seed, 106);

  Optimizer opt_u(cfg.optimizer, res.u.size(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Optimizer opt_v(cfg.optimizer, res.v.size(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

  const auto t0 = std::chrono::steady_clock::now();
  PreparedBatch pb;
  std::size_t batch_index = 0;
  double last_gu = 0.0;
  double last_gv = 0.0;
  // Exponential average of the u iterates; GDA tends to orbit the saddle point.
  NetworkParams u_avg = res.u;
  const bool averaging = cfg.u_average > 0.0;

  for (std::size_t step = 1; step <= cfg.outer_steps; ++step) {
    const bool resample =
        step == 1 || (cfg.resample_every > 0 && (step - 1) % cfg.resample_every == 0);
    if (cfg.v_restart > 0 && step > 1 && (step - 1) % cfg.v_restart == 0) {
      res.v = init_network(res.v.arch(), derive_seed(restart_stream, step), cfg.init);
      opt_v.reset();
    }

    try {
      if (resample) {
        pb = prepare_batch(problem, sample_batch(problem.domain, cfg.n_interior, cfg.n_boundary,
                                                 derive_seed(batch_stream, batch_index++)));
      }
      for (std::size_t k = 0; k < cfg.inner_steps; ++k) {
        LossGradients lg = loss_gradients(res.u, res.v, problem, pb, lopts, GradTarget::v_only);
        std::vector<double>& g = lg.grad_v;
        if (cfg.normalize_v) {
          const NormGradient hn = h1_norm_gradient(res.v, pb.batch.interior, volume);
          if (hn.value > 1.0) {
            const double inv = 1.0 / hn.value;
            const double q = lg.value.total * inv * inv;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * inv - q * hn.grad[i];
          }
        }
        if (cfg.v_h1_penalty > 0.0) {
          const NormGradient e = adversary_energy(res.v, pb, problem.beta);
          const double s = 0.5 * cfg.v_h1_penalty;
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s * e.grad[i];
        }
        require_finite_vector(g, "v", step);
        bool clipped = false;
        last_gv = clip_gradient(g, cfg.grad_clip_norm, &clipped);
        res.history.grad_clip_events += clipped;
        opt_v.apply(res.v.values(), g, cfg.lr_v, +1.0);
        clip_weights_in_place(res.v);
      }

      LossGradients lg = loss_gradients(res.u, res.v, problem, pb, lopts, GradTarget::u_only);
      std::vector<double>& g = lg.grad_u;
      if (cfg.normalize_v) {
        const double hv = h1_norm(res.v, pb.batch.interior, volume).h1;
        if (hv > 1.0) {
          for (double& x : g) x /= hv;
        }
      }
      require_finite_vector(g, "u", step);
      bool clipped = false;
      last_gu = clip_gradient(g, cfg.grad_clip_norm, &clipped);
      res.history.grad_clip_events += clipped;
      opt_u.apply(res.u.values(), g, cfg.lr_u, -1.0);
      clip_weights_in_place(res.u);
      res.history.rescale_events += soft_h1_rescale(res.u, ball_pts, volume, cfg.h1_ball_radius);
      if (averaging) {
        const double w = cfg.u_average;
        auto avg = u_avg.values();
        const auto cur = res.u.values();
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = w * avg[i] + (1.0 - w) * cur[i];
      }
    } catch (const NumericalError& e) {
      if (e.step() >= 0) throw;
      throw NumericalError(e.component(), e.sample_index(),
                           std::string(e.what()) + " (outer step " + std::to_string(step) + ")",
                           static_cast<std::ptrdiff_t>(step));
    }

    if (step % cfg.eval_every == 0 || step == cfg.outer_steps) {
      const NetworkParams& shown = averaging ? u_avg : res.u;
      HistoryRow row;
      row.step = step;
      row.loss = empirical_loss(shown, res.v, problem, pb, lopts);
      row.h1_u = h1_norm(shown, ball_pts, volume).h1;
      row.h1_v = h1_norm(res.v, ball_pts, volume).h1;
      row.h1_error = std::numeric_limits<double>::quiet_NaN();
      if (u_ref) {
        row.h1_error = h1_distance(network_field(shown), *u_ref, err_pts, volume).h1;
      }
      row.grad_u_norm = last_gu;
      row.grad_v_norm = last_gv;
      if (cfg.record_timing) {
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      res.history.rows.push_back(row);
      if (checkpoint) checkpoint(row, shown, res.v);
    }
  }
  if (averaging) res.u = std::move(u_avg);
  return res;
}

ApproxResult approx_error_probe(const FieldEvaluator& target, const Domain& domain,
                                const NetworkArch& arch, const ApproxConfig& cfg) {
  arch.validate();
  if (cfg.fit_points < 1 || cfg.eval_points < 1 || cfg.eval_every < 1) {
    throw std::invalid_argument("approx_error_probe point counts must be >= 1");
  }
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("approx_error_probe lr must be > 0");
  const int d = domain.dim();
  const double volume = domain.volume();
  const PointSet fit = sample_interior(domain, cfg.fit_points, derive_seed(cfg.seed, 201));
  const PointSet eval = sample_interior(domain, cfg.eval_points, derive_seed(cfg.seed, 202));

  std::vector<DualEval> fit_targets(fit.size());
  for (std::size_t k = 0; k < fit.size(); ++k) fit_targets[k] = target(fit[k]);

  NetworkParams net;
  if (cfg.start) {
    net = *cfg.start;
    if (!(net.arch() == arch)) throw std::invalid_argument("start parameters do not match arch");
  } else {
    net = init_network(arch, derive_seed(cfg.seed, 203), cfg.init);
  }
  auto distance = [&](const NetworkParams& p) {
    return h1_distance(network_field(p), target, eval, volume).h1;
  };

  ApproxResult res;
  res.initial_distance = distance(net);
  res.best_distance = res.initial_distance;
  res.best = net;

  Optimizer opt(OptimizerKind::adam, net.size(), 0.9, 0.999, 1e-8);
  DualWorkspace ws;
  std::vector<double> grad(net.size());
  std::vector<double> seed_grad(d);
  const double w = 2.0 * volume / static_cast<double>(fit.size());
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = 0; k < fit.size(); ++k) {
      ws.forward(net, fit[k]);
      const DualEval& t = fit_targets[k];
      for (int p = 0; p < d; ++p) seed_grad[p] = w * (ws.gradient()[p] - t.gradient[p]);
      ws.backprop(net, w * (ws.value() - t.value), seed_grad, grad);
    }
    require_finite_vector(grad, "u", step);
    opt.apply(net.values(), grad, cfg.lr, -1.0);
    clip_weights_in_place(net);
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const double dist = distance(net);
      if (dist < res.best_distance) {
        res.best_distance = dist;
        res.best = net;
      }
    }
  }
  return res;
}

}  // namespace wgal
