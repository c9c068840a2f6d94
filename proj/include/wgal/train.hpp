#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <wgal/loss.hpp>
#include <wgal/network.hpp>
#include <wgal/pde.hpp>

namespace wgal {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  std::size_t n_interior = 256;
  std::size_t n_boundary = 256;
  std::size_t outer_steps = 1000;
  std::size_t inner_steps = 2;  // K_v
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr_u = 1e-3;
  double lr_v = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Outer steps per batch; 0 keeps the first batch for the whole run.
  std::size_t resample_every = 1;
  /// Replaces the b_theta of both architectures when set.
  std::optional<double> b_theta;
  double h1_ball_radius = 2.0;
  std::size_t h1_quad_points = 4096;
  std::size_t error_quad_points = 4096;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  /// Ascend on L(u,v) / max(1, H1(v)) instead of L(u,v).
  bool normalize_v = false;
  /// lambda >= 0: the ascent maximizes L(u,v) - (lambda/2) H1(v)^2, with the
  /// H1 norm sampled on the interior batch. A soft form of the unit H1 ball
  /// for the test function; 0 leaves v constrained by clipping alone.
  double v_h1_penalty = 0.0;
  double u_average = 0.0;  // EMA decay of the reported u; 0 reports the last iterate
  bool boundary_alpha_half = false;
  /// Re-initialize v every this many outer steps; 0 disables.
  std::size_t v_restart = 0;
  /// Global-norm gradient clipping threshold; 0 disables.
  double grad_clip_norm = 10.0;
  InitOptions init;
  /// Fill the `seconds` column with wall time. Off by default so repeated
  /// runs produce identical histories.
  bool record_timing = false;

  void validate() const;
};

struct HistoryRow {
  std::size_t step = 0;
  LossValue loss;
  double h1_u = 0.0;
  double h1_v = 0.0;
  double h1_error = 0.0;  // NaN without a reference
  double grad_u_norm = 0.0;
  double grad_v_norm = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::size_t grad_clip_events = 0;
  std::size_t rescale_events = 0;
};

struct TrainResult {
  NetworkParams u;
  NetworkParams v;
  TrainHistory history;
};

/// Called after each evaluation row with the current networks.
using CheckpointFn =
    std::function<void(const HistoryRow&, const NetworkParams& u, const NetworkParams& v)>;

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t size, double beta1, double beta2, double eps);
  /// theta += direction * lr * step(grad), direction = +1 ascent, -1 descent.
  void apply(std::span<double> theta, std::span<const double> grad, double lr, double direction);
  void reset();

 private:
  OptimizerKind kind_;
  double beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// The adversary penalty E(v) = H1hat(v)^2 + |dOmega|/(beta M) * sum_k v(y_k)^2 on a batch,
/// with its parameter gradient. The boundary part has the same weight as in the loss.
NormGradient adversary_energy(const NetworkParams& v, const PreparedBatch& pb, double beta);

/// Scales `grad` to norm `max_norm` if it is larger. Returns the original norm.
double clip_gradient(std::span<double> grad, double max_norm, bool* clipped = nullptr);

TrainResult minimax_train(const EllipticProblem& problem, NetworkArch u_arch, NetworkArch v_arch,
                          const TrainConfig& config, const FieldEvaluator* u_ref = nullptr,
                          const CheckpointFn& checkpoint = {});

struct ApproxConfig {
  std::size_t steps = 3000;
  double lr = 1e-3;
  std::size_t fit_points = 1024;
  std::size_t eval_points = 4096;
  std::size_t eval_every = 100;
  std::uint64_t seed = 0;
  InitOptions init;
  /// Start from these parameters instead of a random initialization.
  std::optional<NetworkParams> start;
};

struct ApproxResult {
  double best_distance = 0.0;
  double initial_distance = 0.0;
  NetworkParams best;
};

/// Supervised fit of `arch` to `target` in the Monte Carlo H1 distance. The
/// best distance on independent evaluation points upper-bounds the best
/// approximation error of the class.
ApproxResult approx_error_probe(const FieldEvaluator& target, const Domain& domain,
                                const NetworkArch& arch, const ApproxConfig& config);

}  // namespace wgal
