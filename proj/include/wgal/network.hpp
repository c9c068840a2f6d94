#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <wgal/numeric.hpp>

namespace wgal {

enum class ActivationKind { tanh, logistic, relu_k };

/// Activation function with the constants the Lipschitz lemmas consume.
///
/// The `*_bound` / `*_lipschitz` accessors return the normalized values
/// (all <= 1) that the bound formulas assume; `exact_*` returns the tight
/// constants for reference. ReLU^k is unbounded and reports +inf.
struct Activation {
  ActivationKind kind = ActivationKind::tanh;
  int power = 1;  // k for relu_k

  static Activation tanh() { return {ActivationKind::tanh, 1}; }
  static Activation logistic() { return {ActivationKind::logistic, 1}; }
  static Activation relu(int k);

  double operator()(double z) const;
  double d1(double z) const;
  double d2(double z) const;
  /// rho, rho' and rho'' in one call.
  void eval_all(double z, double& h, double& s1, double& s2) const;

  bool bounded() const noexcept { return kind != ActivationKind::relu_k; }
  double sup_bound() const;         // B_rho
  double lipschitz() const;         // L_rho
  double deriv_sup_bound() const;   // B_rho'
  double deriv_lipschitz() const;   // L_rho'
  double exact_lipschitz() const;
  double exact_deriv_sup_bound() const;
  double exact_deriv_lipschitz() const;

  std::string name() const;
  static Activation from_name(const std::string& name, int power = 1);

  friend bool operator==(const Activation&, const Activation&) = default;
};

/// Layer widths n_0..n_D with n_0 = input dimension and n_D = 1.
struct NetworkArch {
  std::vector<int> widths;
  Activation activation = Activation::tanh();
  double b_theta = 1.0;

  int depth() const noexcept { return static_cast<int>(widths.size()) - 1; }
  int input_dim() const { return widths.front(); }
  /// max n_l over l >= 1.
  int width() const;
  std::size_t param_count() const;
  /// prod_{i=1}^{D-1} n_i (1 for D = 1).
  double hidden_width_product() const;
  void validate() const;

  friend bool operator==(const NetworkArch&, const NetworkArch&) = default;
};

/// Flat parameter vector. Layer l (1-based) stores A_l row-major
/// (n_l x n_{l-1}) followed by b_l.
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(NetworkArch arch);

  const NetworkArch& arch() const noexcept { return arch_; }
  std::span<double> values() noexcept { return theta_; }
  std::span<const double> values() const noexcept { return theta_; }
  std::size_t size() const noexcept { return theta_.size(); }

  std::span<double> weights(int layer);
  std::span<const double> weights(int layer) const;
  std::span<double> bias(int layer);
  std::span<const double> bias(int layer) const;
  std::size_t layer_offset(int layer) const { return offsets_.at(layer - 1); }

  double max_abs() const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.arch_ == b.arch_ && a.theta_ == b.theta_;
  }

 private:
  NetworkArch arch_;
  std::vector<double> theta_;
  std::vector<std::size_t> offsets_;
};

struct DualEval {
  double value = 0.0;
  std::vector<double> gradient;
};

enum class InitScheme { uniform, glorot };

struct InitOptions {
  InitScheme scheme = InitScheme::glorot;
  /// Half-width s of uniform(-s, s); ignored by glorot.
  double scale = 0.5;
};

NetworkParams init_network(const NetworkArch& arch, std::uint64_t seed, InitOptions opts = {});

/// Reusable buffers for one forward pass carrying the value and its spatial
/// gradient (forward mode in x), plus reverse-mode accumulation of
/// parameter gradients through both.
class DualWorkspace {
 public:
  void forward(const NetworkParams& net, std::span<const double> x);

  double value() const noexcept { return value_; }
  std::span<const double> gradient() const noexcept { return grad_; }

  /// grad_out += scale * d/dtheta [seed_value * f + sum_p seed_grad[p] * df/dx_p]
  /// using the tape of the last `forward` call on the same network.
  void backprop(const NetworkParams& net, double seed_value, std::span<const double> seed_grad,
                std::span<double> grad_out);

 private:
  struct Layer {
    std::vector<double> z, h, s1, s2, pre_jac, jac;  // pre_jac = A_l J_{l-1}
  };
  std::vector<double> x_;
  std::vector<Layer> layers_;
  std::vector<double> grad_;
  double value_ = 0.0;
  std::vector<double> hbar_, jbar_, hbar_next_, jbar_next_, zbar_, zjbar_;
};

DualEval forward_dual(const NetworkParams& net, std::span<const double> x);

std::vector<double> backprop_params(const NetworkParams& net, std::span<const double> x,
                                    double seed_value, std::span<const double> seed_grad);

NetworkParams clip_weights(NetworkParams net);
void clip_weights_in_place(NetworkParams& net);

std::size_t count_nonzero(const NetworkParams& net);

/// Architecture-dependent constants of the parameter-Lipschitz lemmas.
struct NetworkBounds {
  LogValue l_value;  // |f(x;t) - f(x;t')| <= l_value * |t - t'|
  LogValue b_grad;   // |df/dx_p| <= b_grad
  LogValue l_grad;   // |df/dx_p(x;t) - df/dx_p(x;t')| <= l_grad * |t - t'|
};

NetworkBounds network_bounds(const NetworkArch& arch, std::size_t nonzero);

struct RecipeLimits {
  double max_b_theta = 1e6;
  double max_weights = 1e7;
  Activation activation = Activation::tanh();
};

struct ArchRecipe {
  NetworkArch arch;
  std::size_t depth = 0;
  std::size_t weight_budget = 0;
  int hidden_width = 0;          // equal width of every hidden layer (0 if D = 1)
  std::size_t realized_weights = 0;
  double b_theta_formula = 0.0;  // before capping
  bool b_theta_capped = false;
};

/// Depth ceil(C log2(d+1)), weight budget ceil(C (beta^2 eps)^(-d/(1-mu))),
/// weight bound C (beta^2 eps)^(-(9d+8)/(2-2mu)).
ArchRecipe arch_recipe(double eps, int d, double mu, double beta, double c_user,
                       const RecipeLimits& limits = {});

}  // namespace wgal
