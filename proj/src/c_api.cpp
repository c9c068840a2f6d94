#include <wgal/wgal.h>

#include <cmath>
#include <cstring>
#include <exception>
#include <string>

#include <wgal/experiment.hpp>
#include <wgal/expr.hpp>
#include <wgal/network.hpp>
#include <wgal/serialize.hpp>
#include <wgal/theory.hpp>

struct wgal_expr {
  wgal::Expr e;
};

struct wgal_network {
  wgal::NetworkParams net;
};

namespace {

thread_local std::string g_last_error;

wgal_status fail(wgal_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

/// Maps exceptions from the C++ core onto status codes.
template <class Fn>
wgal_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const wgal::ParseError& e) {
    return fail(WGAL_ERR_PARSE, e.what());
  } catch (const wgal::EvalError& e) {
    return fail(WGAL_ERR_EVAL, e.what());
  } catch (const wgal::NumericalError& e) {
    return fail(WGAL_ERR_NUMERICAL, e.what());
  } catch (const wgal::ConfigError& e) {
    return fail(WGAL_ERR_CONFIG, e.what());
  } catch (const wgal::SolverError& e) {
    return fail(WGAL_ERR_SOLVER, e.what());
  } catch (const wgal::BoundNotApplicable& e) {
    return fail(WGAL_ERR_NOT_APPLICABLE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(WGAL_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(WGAL_ERR_INVALID_ARGUMENT, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(WGAL_ERR_PARSE, e.what());
  } catch (const std::exception& e) {
    return fail(WGAL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(WGAL_ERR_INTERNAL, "unknown exception");
  }
}

wgal_status copy_string(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || cap < s.size() + 1) {
    return fail(WGAL_ERR_BUFFER_TOO_SMALL, "buffer needs " + std::to_string(s.size() + 1) + " bytes");
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return WGAL_OK;
}

#define WGAL_REQUIRE(cond, msg) \
  do {                          \
    if (!(cond)) return fail(WGAL_ERR_INVALID_ARGUMENT, msg); \
  } while (0)

wgal::FiniteVectorSet make_set(const double* vectors, size_t count, size_t n) {
  wgal::FiniteVectorSet set;
  set.n = n;
  for (size_t k = 0; k < count; ++k) set.vectors.emplace_back(vectors + k * n, vectors + (k + 1) * n);
  return set;
}

wgal::NetworkArch make_arch(const int* widths, size_t count, double b_theta) {
  wgal::NetworkArch arch;
  arch.widths.assign(widths, widths + count);
  arch.b_theta = b_theta;
  return arch;
}

}  // namespace

extern "C" {

const char* wgal_version(void) {
  static const std::string v = wgal::library_version();
  return v.c_str();
}

const char* wgal_last_error(void) { return g_last_error.c_str(); }

const char* wgal_status_name(wgal_status s) {
  switch (s) {
    case WGAL_OK: return "ok";
    case WGAL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case WGAL_ERR_PARSE: return "parse error";
    case WGAL_ERR_EVAL: return "evaluation error";
    case WGAL_ERR_NUMERICAL: return "numerical error";
    case WGAL_ERR_CONFIG: return "configuration error";
    case WGAL_ERR_SOLVER: return "solver error";
    case WGAL_ERR_NOT_APPLICABLE: return "bound not applicable";
    case WGAL_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case WGAL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

wgal_status wgal_expr_parse(const char* text, int dim, wgal_expr** out) {
  WGAL_REQUIRE(text && out, "null argument");
  return guarded([&] {
    *out = new wgal_expr{wgal::parse_expr(text, dim)};
    return WGAL_OK;
  });
}

wgal_status wgal_expr_eval(const wgal_expr* e, const double* x, size_t n, double* out) {
  WGAL_REQUIRE(e && out && (x || n == 0), "null argument");
  return guarded([&] {
    *out = e->e.eval(std::span<const double>(x, n));
    return WGAL_OK;
  });
}

wgal_status wgal_expr_diff(const wgal_expr* e, int variable, wgal_expr** out) {
  WGAL_REQUIRE(e && out, "null argument");
  WGAL_REQUIRE(variable >= 1 && variable <= e->e.dimension(), "variable index out of range");
  return guarded([&] {
    *out = new wgal_expr{e->e.diff(variable)};
    return WGAL_OK;
  });
}

wgal_status wgal_expr_to_string(const wgal_expr* e, char* buf, size_t cap, size_t* needed) {
  WGAL_REQUIRE(e, "null argument");
  return guarded([&] { return copy_string(e->e.to_string(), buf, cap, needed); });
}

void wgal_expr_free(wgal_expr* e) { delete e; }

wgal_status wgal_network_create(const int* widths, size_t count, const char* activation,
                                int relu_power, double b_theta, uint64_t seed,
                                wgal_network** out) {
  WGAL_REQUIRE(widths && activation && out, "null argument");
  return guarded([&] {
    wgal::NetworkArch arch = make_arch(widths, count, b_theta);
    arch.activation = wgal::Activation::from_name(activation, relu_power);
    arch.validate();
    *out = new wgal_network{wgal::init_network(arch, seed)};
    return WGAL_OK;
  });
}

wgal_status wgal_network_from_json(const char* json, wgal_network** out) {
  WGAL_REQUIRE(json && out, "null argument");
  return guarded([&] {
    *out = new wgal_network{wgal::network_from_json(nlohmann::json::parse(json))};
    return WGAL_OK;
  });
}

wgal_status wgal_network_to_json(const wgal_network* net, char* buf, size_t cap,
                                 size_t* needed) {
  WGAL_REQUIRE(net, "null argument");
  return guarded([&] { return copy_string(wgal::network_to_json(net->net).dump(), buf, cap, needed); });
}

wgal_status wgal_network_param_count(const wgal_network* net, size_t* out) {
  WGAL_REQUIRE(net && out, "null argument");
  *out = net->net.size();
  return WGAL_OK;
}

wgal_status wgal_network_get_params(const wgal_network* net, double* out, size_t n) {
  WGAL_REQUIRE(net && out, "null argument");
  WGAL_REQUIRE(n == net->net.size(), "parameter count mismatch");
  const auto v = net->net.values();
  std::copy(v.begin(), v.end(), out);
  return WGAL_OK;
}

wgal_status wgal_network_set_params(wgal_network* net, const double* in, size_t n) {
  WGAL_REQUIRE(net && in, "null argument");
  WGAL_REQUIRE(n == net->net.size(), "parameter count mismatch");
  const double b = net->net.arch().b_theta;
  for (size_t i = 0; i < n; ++i) {
    WGAL_REQUIRE(std::fabs(in[i]) <= b, "parameter exceeds b_theta");
  }
  std::copy(in, in + n, net->net.values().begin());
  return WGAL_OK;
}

wgal_status wgal_network_forward(const wgal_network* net, const double* x, size_t d,
                                 double* value, double* grad) {
  WGAL_REQUIRE(net && x && value, "null argument");
  return guarded([&] {
    const wgal::DualEval r = wgal::forward_dual(net->net, std::span<const double>(x, d));
    *value = r.value;
    if (grad) std::copy(r.gradient.begin(), r.gradient.end(), grad);
    return WGAL_OK;
  });
}

wgal_status wgal_network_backprop(const wgal_network* net, const double* x, size_t d,
                                  double seed_value, const double* seed_grad, double* grad_out,
                                  size_t n) {
  WGAL_REQUIRE(net && x && seed_grad && grad_out, "null argument");
  WGAL_REQUIRE(n == net->net.size(), "parameter count mismatch");
  return guarded([&] {
    const auto g = wgal::backprop_params(net->net, std::span<const double>(x, d), seed_value,
                                         std::span<const double>(seed_grad, d));
    std::copy(g.begin(), g.end(), grad_out);
    return WGAL_OK;
  });
}

wgal_status wgal_network_bounds(const wgal_network* net, double* log_l_value, double* log_b_grad,
                                double* log_l_grad) {
  WGAL_REQUIRE(net && log_l_value && log_b_grad && log_l_grad, "null argument");
  return guarded([&] {
    const wgal::NetworkBounds b = wgal::network_bounds(net->net.arch(), net->net.size());
    *log_l_value = b.l_value.log();
    *log_b_grad = b.b_grad.log();
    *log_l_grad = b.l_grad.log();
    return WGAL_OK;
  });
}

void wgal_network_free(wgal_network* net) { delete net; }

wgal_status wgal_exact_rademacher(const double* vectors, size_t count, size_t n, double* out) {
  WGAL_REQUIRE(vectors && out, "null argument");
  return guarded([&] {
    *out = wgal::exact_rademacher(make_set(vectors, count, n));
    return WGAL_OK;
  });
}

wgal_status wgal_massart_bound(const double* vectors, size_t count, size_t n, double* out) {
  WGAL_REQUIRE(vectors && out, "null argument");
  return guarded([&] {
    *out = wgal::massart_bound(make_set(vectors, count, n));
    return WGAL_OK;
  });
}

wgal_status wgal_covering_bound_ball(double radius, int d, double eps, double* log_out) {
  WGAL_REQUIRE(log_out, "null argument");
  return guarded([&] {
    *log_out = wgal::covering_bound_ball(radius, d, eps).log();
    return WGAL_OK;
  });
}

wgal_status wgal_chaining_bound(double b_i, double l_i, double n_nonzero, double b_theta,
                                double n, double* log_out) {
  WGAL_REQUIRE(log_out, "null argument");
  return guarded([&] {
    *log_out = wgal::chaining_bound(b_i, l_i, n_nonzero, b_theta, n).log();
    return WGAL_OK;
  });
}

wgal_status wgal_statistical_error_bound(const int* widths, size_t count, double b_theta,
                                         size_t n_nonzero, int d, double n, double beta,
                                         double c_user, double* log_out) {
  WGAL_REQUIRE(widths && log_out, "null argument");
  return guarded([&] {
    *log_out = wgal::statistical_error_bound(make_arch(widths, count, b_theta), n_nonzero, d, n,
                                             beta, c_user)
                   .log();
    return WGAL_OK;
  });
}

wgal_status wgal_validate_config(const char* config_path) {
  WGAL_REQUIRE(config_path, "null argument");
  return guarded([&] {
    (void)wgal::load_experiment_config(config_path);
    return WGAL_OK;
  });
}

int wgal_run_experiment(const char* config_path, const char* out_dir,
                        const uint64_t* seed_override, int quiet) {
  if (!config_path) {
    fail(WGAL_ERR_INVALID_ARGUMENT, "null config path");
    return 2;
  }
  try {
    wgal::RunOptions opts;
    if (out_dir) opts.out_dir = out_dir;
    if (seed_override) opts.seed_override = *seed_override;
    opts.quiet = quiet != 0;
    const wgal::RunResult r = wgal::run_experiment_file(config_path, opts);
    g_last_error = r.message;
    return r.exit_code;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return 1;
  }
}

}  // extern "C"
