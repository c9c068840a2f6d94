/* C interface to the weak-form adversarial solver library.
 *
 * All functions return a wgal_status; on failure a thread-local message is
 * available from wgal_last_error(). Objects are opaque handles released with
 * the matching *_free function (passing NULL is allowed). String outputs use
 * the (buf, cap, needed) convention: *needed receives the length including
 * the terminating NUL, and WGAL_ERR_BUFFER_TOO_SMALL is returned when cap is
 * insufficient. */
#ifndef WGAL_WGAL_H
#define WGAL_WGAL_H

#include <stddef.h>
#include <stdint.h>

#if defined(WGAL_BUILDING_LIBRARY)
#define WGAL_API __attribute__((visibility("default")))
#else
#define WGAL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wgal_status {
  WGAL_OK = 0,
  WGAL_ERR_INVALID_ARGUMENT = 1,
  WGAL_ERR_PARSE = 2,
  WGAL_ERR_EVAL = 3,
  WGAL_ERR_NUMERICAL = 4,
  WGAL_ERR_CONFIG = 5,
  WGAL_ERR_SOLVER = 6,
  WGAL_ERR_NOT_APPLICABLE = 7,
  WGAL_ERR_BUFFER_TOO_SMALL = 8,
  WGAL_ERR_INTERNAL = 9
} wgal_status;

typedef struct wgal_expr wgal_expr;
typedef struct wgal_network wgal_network;

WGAL_API const char* wgal_version(void);
WGAL_API const char* wgal_last_error(void);
WGAL_API const char* wgal_status_name(wgal_status status);

/* Expressions over x1..x_dim. */
WGAL_API wgal_status wgal_expr_parse(const char* text, int dim, wgal_expr** out);
WGAL_API wgal_status wgal_expr_eval(const wgal_expr* e, const double* x, size_t n, double* out);
WGAL_API wgal_status wgal_expr_diff(const wgal_expr* e, int variable, wgal_expr** out);
WGAL_API wgal_status wgal_expr_to_string(const wgal_expr* e, char* buf, size_t cap,
                                         size_t* needed);
WGAL_API void wgal_expr_free(wgal_expr* e);

/* Networks. activation is "tanh", "logistic" or "relu_k" (relu_power = k). */
WGAL_API wgal_status wgal_network_create(const int* widths, size_t count, const char* activation,
                                         int relu_power, double b_theta, uint64_t seed,
                                         wgal_network** out);
WGAL_API wgal_status wgal_network_from_json(const char* json, wgal_network** out);
WGAL_API wgal_status wgal_network_to_json(const wgal_network* net, char* buf, size_t cap,
                                          size_t* needed);
WGAL_API wgal_status wgal_network_param_count(const wgal_network* net, size_t* out);
WGAL_API wgal_status wgal_network_get_params(const wgal_network* net, double* out, size_t n);
/* Rejects parameters with |theta| > b_theta. */
WGAL_API wgal_status wgal_network_set_params(wgal_network* net, const double* in, size_t n);
/* grad may be NULL; otherwise it receives d entries. */
WGAL_API wgal_status wgal_network_forward(const wgal_network* net, const double* x, size_t d,
                                          double* value, double* grad);
/* grad_out (n = parameter count) receives
 * d/dtheta [seed_value * f(x) + sum_p seed_grad[p] * df/dx_p(x)]. */
WGAL_API wgal_status wgal_network_backprop(const wgal_network* net, const double* x, size_t d,
                                           double seed_value, const double* seed_grad,
                                           double* grad_out, size_t n);
/* Natural logarithms of the value-Lipschitz, derivative-sup and
 * derivative-Lipschitz constants for the network's architecture. */
WGAL_API wgal_status wgal_network_bounds(const wgal_network* net, double* log_l_value,
                                         double* log_b_grad, double* log_l_grad);
WGAL_API void wgal_network_free(wgal_network* net);

/* Finite classes are passed as count vectors of length n, row-major. */
WGAL_API wgal_status wgal_exact_rademacher(const double* vectors, size_t count, size_t n,
                                           double* out);
WGAL_API wgal_status wgal_massart_bound(const double* vectors, size_t count, size_t n,
                                        double* out);
/* Bounds below are returned as natural logarithms. */
WGAL_API wgal_status wgal_covering_bound_ball(double radius, int d, double eps, double* log_out);
WGAL_API wgal_status wgal_chaining_bound(double b_i, double l_i, double n_nonzero,
                                         double b_theta, double n, double* log_out);
WGAL_API wgal_status wgal_statistical_error_bound(const int* widths, size_t count,
                                                  double b_theta, size_t n_nonzero, int d,
                                                  double n, double beta, double c_user,
                                                  double* log_out);

/* Experiments. wgal_run_experiment returns the process exit code:
 * 0 success, 1 other failure, 2 configuration error, 3 numerical abort.
 * out_dir and seed_override may be NULL. */
WGAL_API wgal_status wgal_validate_config(const char* config_path);
WGAL_API int wgal_run_experiment(const char* config_path, const char* out_dir,
                                 const uint64_t* seed_override, int quiet);

#ifdef __cplusplus
}
#endif

#endif /* WGAL_WGAL_H */
