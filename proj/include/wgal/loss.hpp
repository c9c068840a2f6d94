#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <wgal/network.hpp>
#include <wgal/pde.hpp>

namespace wgal {

struct LossOptions {
  /// Use alpha/2 instead of alpha in the boundary term.
  bool boundary_alpha_half = false;
};

struct LossValue {
  double total = 0.0;
  double interior = 0.0;
  double boundary = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// A batch together with the coefficient and data values at its points.
/// Coefficients do not depend on the networks, so training evaluates them
/// once per resample instead of once per step.
struct PreparedBatch {
  EmpiricalBatch batch;
  int dim = 1;
  std::vector<double> a;  // N * d * d
  std::vector<double> b;  // N * d
  std::vector<double> c;  // N
  std::vector<double> f;  // N
  std::vector<double> g;  // M
  double volume = 1.0;
  double boundary_measure = 1.0;
};

PreparedBatch prepare_batch(const EllipticProblem& problem, EmpiricalBatch batch);

LossValue empirical_loss(const NetworkParams& u, const NetworkParams& v,
                         const EllipticProblem& problem, const PreparedBatch& batch,
                         const LossOptions& opts = {});
LossValue empirical_loss(const NetworkParams& u, const NetworkParams& v,
                         const EllipticProblem& problem, const EmpiricalBatch& batch,
                         const LossOptions& opts = {});

enum class GradTarget { both, u_only, v_only };

struct LossGradients {
  std::vector<double> grad_u;  // empty when not requested
  std::vector<double> grad_v;
  LossValue value;
};

LossGradients loss_gradients(const NetworkParams& u, const NetworkParams& v,
                             const EllipticProblem& problem, const PreparedBatch& batch,
                             const LossOptions& opts = {}, GradTarget target = GradTarget::both);
LossGradients loss_gradients(const NetworkParams& u, const NetworkParams& v,
                             const EllipticProblem& problem, const EmpiricalBatch& batch,
                             const LossOptions& opts = {}, GradTarget target = GradTarget::both);

/// Same formula on sample_batch(domain, n_big, n_big, seed).
LossValue continuous_loss_estimate(const NetworkParams& u, const NetworkParams& v,
                                   const EllipticProblem& problem, std::size_t n_big,
                                   std::uint64_t seed, const LossOptions& opts = {});

struct H1Estimate {
  double l2_sq = 0.0;
  double semi_sq = 0.0;
  double l2 = 0.0;
  double semi = 0.0;
  double h1 = 0.0;
  double l2_sq_stderr = 0.0;
  double semi_sq_stderr = 0.0;
  std::size_t n = 0;
};

/// Monte Carlo estimate of |Omega|/N sum_k (|u-ref|^2, |grad u - grad ref|^2).
H1Estimate h1_distance(const FieldEvaluator& u, const FieldEvaluator& ref,
                       const PointSet& points, double volume);
H1Estimate h1_error(const NetworkParams& u, const FieldEvaluator& ref, const Domain& domain,
                    std::size_t n_quad, std::uint64_t seed);
H1Estimate h1_norm(const NetworkParams& u, const PointSet& points, double volume);

/// Value of the Monte Carlo H1 norm on fixed points and its parameter gradient.
struct NormGradient {
  double value = 0.0;
  std::vector<double> grad;
};
NormGradient h1_norm_gradient(const NetworkParams& u, const PointSet& points, double volume);

}  // namespace wgal
