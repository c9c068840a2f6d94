#include <wgal/network.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace wgal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

Activation Activation::relu(int k) {
  if (k < 1) throw std::invalid_argument("relu_k needs k >= 1");
  return {ActivationKind::relu_k, k};
}

double Activation::operator()(double z) const {
  switch (kind) {
    case ActivationKind::tanh: return std::tanh(z);
    case ActivationKind::logistic: return sigmoid(z);
    case ActivationKind::relu_k: return z > 0 ? std::pow(z, power) : 0.0;
  }
  return 0.0;
}

double Activation::d1(double z) const {
  switch (kind) {
    case ActivationKind::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::logistic: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case ActivationKind::relu_k:
      if (z <= 0) return 0.0;
      return power == 1 ? 1.0 : power * std::pow(z, power - 1);
  }
  return 0.0;
}

double Activation::d2(double z) const {
  switch (kind) {
    case ActivationKind::tanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case ActivationKind::logistic: {
      const double s = sigmoid(z);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case ActivationKind::relu_k:
      if (z <= 0 || power == 1) return 0.0;
      return power == 2 ? 2.0 : power * (power - 1) * std::pow(z, power - 2);
  }
  return 0.0;
}

void Activation::eval_all(double z, double& h, double& s1, double& s2) const {
  switch (kind) {
    case ActivationKind::tanh: {
      const double t = std::tanh(z);
      h = t;
      s1 = 1.0 - t * t;
      s2 = -2.0 * t * s1;
      return;
    }
    case ActivationKind::logistic: {
      const double s = sigmoid(z);
      h = s;
      s1 = s * (1.0 - s);
      s2 = s1 * (1.0 - 2.0 * s);
      return;
    }
    case ActivationKind::relu_k:
      h = (*this)(z);
      s1 = d1(z);
      s2 = d2(z);
      return;
  }
}

double Activation::sup_bound() const { return bounded() ? 1.0 : kInf; }
double Activation::lipschitz() const {
  return bounded() || power == 1 ? 1.0 : kInf;
}
double Activation::deriv_sup_bound() const {
  return bounded() || power == 1 ? 1.0 : kInf;
}
double Activation::deriv_lipschitz() const { return bounded() ? 1.0 : kInf; }

double Activation::exact_lipschitz() const {
  return kind == ActivationKind::logistic ? 0.25 : lipschitz();
}
double Activation::exact_deriv_sup_bound() const {
  return kind == ActivationKind::logistic ? 0.25 : deriv_sup_bound();
}
double Activation::exact_deriv_lipschitz() const {
  switch (kind) {
    case ActivationKind::tanh: return 4.0 / (3.0 * std::sqrt(3.0));
    case ActivationKind::logistic: return std::sqrt(3.0) / 18.0;
    case ActivationKind::relu_k: return deriv_lipschitz();
  }
  return kInf;
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::logistic: return "logistic";
    case ActivationKind::relu_k: return "relu_k";
  }
  return "?";
}

Activation Activation::from_name(const std::string& name, int k) {
  if (name == "tanh") return tanh();
  if (name == "logistic") return logistic();
  if (name == "relu_k") return relu(k);
  throw std::invalid_argument("unknown activation '" + name + "'");
}

int NetworkArch::width() const {
  int w = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) w = std::max(w, widths[l]);
  return w;
}

std::size_t NetworkArch::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    n += static_cast<std::size_t>(widths[l]) * (widths[l - 1] + 1);
  }
  return n;
}

double NetworkArch::hidden_width_product() const {
  double p = 1.0;
  for (int l = 1; l < depth(); ++l) p *= widths[l];
  return p;
}

void NetworkArch::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("network needs depth >= 1");
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("network widths must be >= 1");
  }
  if (widths.back() != 1) throw std::invalid_argument("network output width must be 1");
  if (!(b_theta >= 1.0) || !std::isfinite(b_theta)) {
    throw std::invalid_argument("weight bound b_theta must be finite and >= 1");
  }
}

NetworkParams::NetworkParams(NetworkArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t off = 0;
  for (int l = 1; l <= arch_.depth(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(arch_.widths[l]) * (arch_.widths[l - 1] + 1);
  }
  theta_.assign(off, 0.0);
}

std::span<double> NetworkParams::weights(int l) {
  return std::span<double>(theta_).subspan(offsets_.at(l - 1),
                                           static_cast<std::size_t>(arch_.widths[l]) * arch_.widths[l - 1]);
}
std::span<const double> NetworkParams::weights(int l) const {
  return std::span<const double>(theta_).subspan(
      offsets_.at(l - 1), static_cast<std::size_t>(arch_.widths[l]) * arch_.widths[l - 1]);
}
std::span<double> NetworkParams::bias(int l) {
  return std::span<double>(theta_).subspan(
      offsets_.at(l - 1) + static_cast<std::size_t>(arch_.widths[l]) * arch_.widths[l - 1],
      arch_.widths[l]);
}
std::span<const double> NetworkParams::bias(int l) const {
  return std::span<const double>(theta_).subspan(
      offsets_.at(l - 1) + static_cast<std::size_t>(arch_.widths[l]) * arch_.widths[l - 1],
      arch_.widths[l]);
}

double NetworkParams::max_abs() const {
  double m = 0.0;
  for (double t : theta_) m = std::max(m, std::fabs(t));
  return m;
}

NetworkParams init_network(const NetworkArch& arch, std::uint64_t seed, InitOptions opts) {
  NetworkParams net(arch);
  Rng rng(seed);
  if (opts.scheme == InitScheme::uniform) {
    if (!(opts.scale >= 0.0)) throw std::invalid_argument("uniform init scale must be >= 0");
    for (double& t : net.values()) t = rng.uniform(-opts.scale, opts.scale);
  } else {
    for (int l = 1; l <= arch.depth(); ++l) {
      const double limit = std::sqrt(6.0 / (arch.widths[l - 1] + arch.widths[l]));
      for (double& a : net.weights(l)) a = rng.uniform(-limit, limit);
    }
  }
  clip_weights_in_place(net);
  return net;
}

void DualWorkspace::forward(const NetworkParams& net, std::span<const double> x) {
  const NetworkArch& arch = net.arch();
  const int depth = arch.depth();
  const int d = arch.input_dim();
  if (static_cast<int>(x.size()) != d) {
    throw std::invalid_argument("network input has wrong dimension");
  }
  x_.assign(x.begin(), x.end());
  layers_.resize(depth);  // index 0 unused, hidden layers 1..D-1

  // J_0 = identity is handled implicitly at layer 1.
  for (int l = 1; l < depth; ++l) {
    const int rows = arch.widths[l];
    const int cols = arch.widths[l - 1];
    const auto a = net.weights(l);
    const auto b = net.bias(l);
    Layer& L = layers_[l];
    L.z.resize(rows);
    L.h.resize(rows);
    L.s1.resize(rows);
    L.s2.resize(rows);
    L.pre_jac.resize(static_cast<std::size_t>(rows) * d);
    L.jac.resize(static_cast<std::size_t>(rows) * d);
    const std::vector<double>& h_prev = l == 1 ? x_ : layers_[l - 1].h;
    for (int q = 0; q < rows; ++q) {
      const double* arow = a.data() + static_cast<std::size_t>(q) * cols;
      double z = b[q];
      for (int j = 0; j < cols; ++j) z += arow[j] * h_prev[j];
      double* pj = L.pre_jac.data() + static_cast<std::size_t>(q) * d;
      if (l == 1) {
        for (int p = 0; p < d; ++p) pj[p] = arow[p];
      } else {
        const std::vector<double>& jp = layers_[l - 1].jac;
        for (int p = 0; p < d; ++p) pj[p] = 0.0;
        for (int j = 0; j < cols; ++j) {
          const double aj = arow[j];
          const double* jrow = jp.data() + static_cast<std::size_t>(j) * d;
          for (int p = 0; p < d; ++p) pj[p] += aj * jrow[p];
        }
      }
      L.z[q] = z;
      arch.activation.eval_all(z, L.h[q], L.s1[q], L.s2[q]);
      double* jr = L.jac.data() + static_cast<std::size_t>(q) * d;
      for (int p = 0; p < d; ++p) jr[p] = L.s1[q] * pj[p];
    }
  }

  const int cols = arch.widths[depth - 1];
  const auto a = net.weights(depth);
  const std::vector<double>& h_last = depth == 1 ? x_ : layers_[depth - 1].h;
  double v = net.bias(depth)[0];
  for (int j = 0; j < cols; ++j) v += a[j] * h_last[j];
  value_ = v;
  grad_.assign(d, 0.0);
  if (depth == 1) {
    for (int p = 0; p < d; ++p) grad_[p] = a[p];
  } else {
    const std::vector<double>& jl = layers_[depth - 1].jac;
    for (int j = 0; j < cols; ++j) {
      for (int p = 0; p < d; ++p) grad_[p] += a[j] * jl[static_cast<std::size_t>(j) * d + p];
    }
  }
}

void DualWorkspace::backprop(const NetworkParams& net, double seed_value,
                             std::span<const double> seed_grad, std::span<double> grad_out) {
  const NetworkArch& arch = net.arch();
  const int depth = arch.depth();
  const int d = arch.input_dim();
  if (static_cast<int>(seed_grad.size()) != d || grad_out.size() != net.size()) {
    throw std::invalid_argument("backprop buffer size mismatch");
  }

  // Output layer: f = A_D h + b_D, grad f = A_D J.
  {
    const int cols = arch.widths[depth - 1];
    const auto a = net.weights(depth);
    const std::size_t off = net.layer_offset(depth);
    const std::vector<double>& h_last = depth == 1 ? x_ : layers_[depth - 1].h;
    for (int j = 0; j < cols; ++j) {
      double g = seed_value * h_last[j];
      if (depth == 1) {
        g += seed_grad[j];
      } else {
        const double* jr = layers_[depth - 1].jac.data() + static_cast<std::size_t>(j) * d;
        for (int p = 0; p < d; ++p) g += seed_grad[p] * jr[p];
      }
      grad_out[off + j] += g;
    }
    grad_out[off + cols] += seed_value;
    if (depth == 1) return;
    hbar_.assign(cols, 0.0);
    jbar_.assign(static_cast<std::size_t>(cols) * d, 0.0);
    for (int j = 0; j < cols; ++j) {
      hbar_[j] = seed_value * a[j];
      for (int p = 0; p < d; ++p) jbar_[static_cast<std::size_t>(j) * d + p] = a[j] * seed_grad[p];
    }
  }

  for (int l = depth - 1; l >= 1; --l) {
    const int rows = arch.widths[l];
    const int cols = arch.widths[l - 1];
    const Layer& L = layers_[l];
    const auto a = net.weights(l);
    const std::size_t off = net.layer_offset(l);
    zbar_.assign(rows, 0.0);
    zjbar_.assign(static_cast<std::size_t>(rows) * d, 0.0);
    for (int q = 0; q < rows; ++q) {
      const double* jb = jbar_.data() + static_cast<std::size_t>(q) * d;
      const double* pj = L.pre_jac.data() + static_cast<std::size_t>(q) * d;
      double curv = 0.0;
      for (int p = 0; p < d; ++p) {
        curv += jb[p] * pj[p];
        zjbar_[static_cast<std::size_t>(q) * d + p] = L.s1[q] * jb[p];
      }
      zbar_[q] = hbar_[q] * L.s1[q] + L.s2[q] * curv;
    }

    const std::vector<double>& h_prev = l == 1 ? x_ : layers_[l - 1].h;
    for (int q = 0; q < rows; ++q) {
      double* ga = grad_out.data() + off + static_cast<std::size_t>(q) * cols;
      const double zb = zbar_[q];
      const double* zj = zjbar_.data() + static_cast<std::size_t>(q) * d;
      if (l == 1) {
        for (int j = 0; j < cols; ++j) ga[j] += zb * h_prev[j] + zj[j];
      } else {
        const std::vector<double>& jp = layers_[l - 1].jac;
        for (int j = 0; j < cols; ++j) {
          const double* jr = jp.data() + static_cast<std::size_t>(j) * d;
          double g = zb * h_prev[j];
          for (int p = 0; p < d; ++p) g += zj[p] * jr[p];
          ga[j] += g;
        }
      }
      grad_out[off + static_cast<std::size_t>(rows) * cols + q] += zb;
    }

    if (l > 1) {
      hbar_next_.assign(cols, 0.0);
      jbar_next_.assign(static_cast<std::size_t>(cols) * d, 0.0);
      for (int q = 0; q < rows; ++q) {
        const double* arow = a.data() + static_cast<std::size_t>(q) * cols;
        const double zb = zbar_[q];
        const double* zj = zjbar_.data() + static_cast<std::size_t>(q) * d;
        for (int j = 0; j < cols; ++j) {
          hbar_next_[j] += arow[j] * zb;
          double* jn = jbar_next_.data() + static_cast<std::size_t>(j) * d;
          for (int p = 0; p < d; ++p) jn[p] += arow[j] * zj[p];
        }
      }
      hbar_.swap(hbar_next_);
      jbar_.swap(jbar_next_);
    }
  }
}

DualEval forward_dual(const NetworkParams& net, std::span<const double> x) {
  DualWorkspace ws;
  ws.forward(net, x);
  return {ws.value(), std::vector<double>(ws.gradient().begin(), ws.gradient().end())};
}

std::vector<double> backprop_params(const NetworkParams& net, std::span<const double> x,
                                    double seed_value, std::span<const double> seed_grad) {
  DualWorkspace ws;
  ws.forward(net, x);
  std::vector<double> g(net.size(), 0.0);
  ws.backprop(net, seed_value, seed_grad, g);
  return g;
}

NetworkParams clip_weights(NetworkParams net) {
  clip_weights_in_place(net);
  return net;
}

void clip_weights_in_place(NetworkParams& net) {
  const double b = net.arch().b_theta;
  for (double& t : net.values()) t = std::clamp(t, -b, b);
}

std::size_t count_nonzero(const NetworkParams& net) {
  return static_cast<std::size_t>(
      std::count_if(net.values().begin(), net.values().end(), [](double t) { return t != 0.0; }));
}

NetworkBounds network_bounds(const NetworkArch& arch, std::size_t nonzero) {
  arch.validate();
  if (!arch.activation.bounded()) {
    throw std::invalid_argument("network_bounds needs a bounded activation (tanh or logistic)");
  }
  const double depth = arch.depth();
  double log_prod = 0.0;
  for (int l = 1; l < arch.depth(); ++l) log_prod += std::log(static_cast<double>(arch.widths[l]));
  const double log_n = nonzero == 0 ? -std::numeric_limits<double>::infinity()
                                    : std::log(static_cast<double>(nonzero));
  const double log_b = std::log(arch.b_theta);
  const double log_bd = std::log(arch.activation.deriv_sup_bound());

  NetworkBounds out;
  out.l_value = LogValue::from_log(0.5 * log_n + (depth - 1) * log_b + log_prod);
  out.b_grad = LogValue::from_log(log_prod + depth * log_b + (depth - 1) * log_bd);
  out.l_grad =
      LogValue::from_log(0.5 * log_n + std::log(depth + 1) + 2 * depth * log_b + 2 * log_prod);
  return out;
}

ArchRecipe arch_recipe(double eps, int d, double mu, double beta, double c_user,
                       const RecipeLimits& limits) {
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("arch_recipe: need 0 < eps < 1");
  if (!(mu > 0 && mu < 1)) throw std::invalid_argument("arch_recipe: need 0 < mu < 1");
  if (!(beta > 0)) throw std::invalid_argument("arch_recipe: need beta > 0");
  if (!(c_user >= 1)) throw std::invalid_argument("arch_recipe: need C >= 1");
  if (d < 1) throw std::invalid_argument("arch_recipe: need d >= 1");

  ArchRecipe r;
  r.depth = static_cast<std::size_t>(
      std::max(1.0, std::ceil(c_user * std::log2(static_cast<double>(d) + 1.0) - 1e-12)));

  const double base = beta * beta * eps;
  const double budget = c_user * std::pow(base, -static_cast<double>(d) / (1.0 - mu));
  if (!(budget <= limits.max_weights)) {
    throw std::invalid_argument("arch_recipe: weight budget " + std::to_string(budget) +
                                " exceeds the limit; use a larger eps");
  }
  r.weight_budget = static_cast<std::size_t>(std::max(1.0, std::ceil(budget * (1.0 - 1e-9))));

  const int depth = static_cast<int>(r.depth);
  auto total = [&](double w) {
    return (d + 1.0) * w + (depth - 2.0) * (w + 1.0) * w + (w + 1.0);
  };
  std::vector<int> widths{d};
  if (depth > 1) {
    int w = 1;
    while (total(w + 1) <= static_cast<double>(r.weight_budget)) ++w;
    r.hidden_width = w;
    for (int l = 1; l < depth; ++l) widths.push_back(w);
  }
  widths.push_back(1);

  r.b_theta_formula = c_user * std::pow(base, -(9.0 * d + 8.0) / (2.0 - 2.0 * mu));
  double bt = std::max(1.0, r.b_theta_formula);
  if (bt > limits.max_b_theta) {
    bt = limits.max_b_theta;
    r.b_theta_capped = true;
  }
  r.arch = NetworkArch{widths, limits.activation, bt};
  r.realized_weights = r.arch.param_count();
  return r;
}

}  // namespace wgal
