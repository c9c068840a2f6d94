#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <wgal/loss.hpp>
#include <wgal/network.hpp>
#include <wgal/numeric.hpp>
#include <wgal/pde.hpp>

namespace wgal {

/// Finite set A of vectors in R^N (function values at N fixed samples).
struct FiniteVectorSet {
  std::size_t n = 0;
  std::vector<std::vector<double>> vectors;

  void validate() const;
  /// max_a |a|_2
  double diameter() const;
};

/// E_sigma sup_a (1/N) sum_k sigma_k a_k by enumerating all 2^N sign vectors.
double exact_rademacher(const FiniteVectorSet& set);

/// D sqrt(2 ln|A|) / N.
double massart_bound(const FiniteVectorSet& set);

/// (2 B sqrt(d) / eps)^d.
LogValue covering_bound_ball(double radius, int d, double eps);

/// 4/sqrt(N) + (6 sqrt(n) B_i / sqrt(N)) sqrt(log(2 L_i B_theta sqrt(n) sqrt(N))).
/// Throws BoundNotApplicable when 1/sqrt(N) >= B_i/2 or the log argument is <= 1.
LogValue chaining_bound(LogValue b_i, LogValue l_i, double n_nonzero, double b_theta, double n);
LogValue chaining_bound(double b_i, double l_i, double n_nonzero, double b_theta, double n);

/// Sup-norms of the coefficient data, used as the C(coe) factors.
struct CoefficientNorms {
  double a_sup = 1.0;
  double b_sup = 1.0;
  double c_sup = 1.0;
  double f_sup = 1.0;
  double g_sup = 1.0;

  static CoefficientNorms from_report(const CoercivityReport& r);
};

/// Sup bounds B_1..B_6 and parameter-Lipschitz constants L_1..L_6 of the
/// integrand families
///   F1 = sum_ij a_ij d_i u d_j v, F2 = sum_i b_i d_i u v, F3 = c u v,
///   F4 = f v, F5 = (alpha/2) u v on the boundary, F6 = g v on the boundary,
/// for u, v drawn from the clipped class of `arch`.
struct ClassConstants {
  std::array<LogValue, 6> b;
  std::array<LogValue, 6> l;
};

ClassConstants class_constants(const NetworkArch& arch, std::size_t n_nonzero,
                               const CoefficientNorms& coeff, double alpha);

/// (C/beta) d^3 D^(1/2) n^(7D/2 - 3/2) B_theta^(7D/2 + 1/2) / N^(1/4).
LogValue statistical_error_bound(const NetworkArch& arch, std::size_t n_nonzero, int d, double n,
                                 double beta, double c_user);

struct BoundReport {
  std::string lemma;
  LogValue theoretical;
  double empirical = 0.0;
  double ratio = 0.0;  // empirical / theoretical, 0 when the bound overflows
  std::map<std::string, double> inputs;
  std::string config_hash;

  void finalize();  // fills ratio and config_hash from the other fields
};

struct StaErrorOptions {
  std::size_t trials = 20;
  std::size_t probe_budget = 8;
  std::size_t ascent_steps = 5;
  double ascent_lr = 1e-2;
  std::size_t big_factor = 100;
  double c_user = 1.0;
  std::uint64_t seed = 0;
  LossOptions loss;
};

/// Lower-bound estimate of the expected statistical error: per trial, draw
/// an N-batch and an independent (big_factor N)-batch, maximize
/// |L_N(u,v) - L_big(u,v)| over random parameter probes followed by a short
/// ascent, and report 2 * mean over trials of the maxima. Probe parameters
/// depend on the seed only, not on N.
BoundReport empirical_sta_error(const NetworkArch& u_arch, const NetworkArch& v_arch,
                                const EllipticProblem& problem, std::size_t n,
                                const StaErrorOptions& opts);

struct LipschitzReport {
  BoundReport value;       // |f(x;t) - f(x;t')| / |t - t'|
  BoundReport derivative;  // |d_p f(x;t)|
  BoundReport gradient;    // |d_p f(x;t) - d_p f(x;t')| / |t - t'|
  std::size_t violations = 0;
};

/// Half of the probes pair independent parameter draws, half pair a draw
/// with a small perturbation of itself. Parameters are uniform in
/// [-B_theta, B_theta], points uniform in [0,1]^d.
LipschitzReport lipschitz_probe(const NetworkArch& arch, std::size_t probes, std::uint64_t seed);

struct FamilyProbe {
  std::array<double, 6> empirical{};
  std::array<BoundReport, 6> reports;
  std::size_t violations = 0;
};

/// Empirical sup of each integrand family over random (theta_u, theta_v, x).
FamilyProbe class_family_probe(const NetworkArch& arch, const EllipticProblem& problem,
                               const CoefficientNorms& coeff, std::size_t probes,
                               std::uint64_t seed);

}  // namespace wgal
