#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wgal {

/// Positive quantity stored by its natural logarithm. Bound formulas in this
/// library grow like B^(7D/2), so they are assembled in log space and only
/// exponentiated on output.
class LogValue {
 public:
  constexpr LogValue() = default;

  static LogValue from_log(double log_value) { return LogValue(log_value); }
  static LogValue from_value(double value);
  static LogValue zero() { return LogValue(-std::numeric_limits<double>::infinity()); }

  double log() const noexcept { return log_; }
  /// exp(log), or +inf when that overflows.
  double value() const noexcept;
  bool overflows() const noexcept { return log_ > std::log(1e300); }

  /// Decimal form, or "exp(<log>)" above 1e300.
  std::string to_string() const;

  friend LogValue operator*(LogValue a, LogValue b) { return LogValue(a.log_ + b.log_); }
  friend LogValue operator/(LogValue a, LogValue b) { return LogValue(a.log_ - b.log_); }
  friend LogValue operator+(LogValue a, LogValue b);
  LogValue pow(double e) const { return is_zero() ? *this : LogValue(log_ * e); }
  bool is_zero() const noexcept { return log_ == -std::numeric_limits<double>::infinity(); }

  friend bool operator<(LogValue a, LogValue b) { return a.log_ < b.log_; }
  friend bool operator<=(LogValue a, LogValue b) { return a.log_ <= b.log_; }

 private:
  explicit constexpr LogValue(double l) : log_(l) {}
  double log_ = -std::numeric_limits<double>::infinity();
};

/// Child seed for stream `stream` of `seed` (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic generator wrapper. Uniform draws are built from the raw
/// 64-bit output so they do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }
  std::uint64_t below(std::uint64_t n);
  double normal();
  int sign() { return (engine_() >> 63) ? 1 : -1; }
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Pairwise (tree) summation with a fixed reduction order.
double pairwise_sum(std::span<const double> values);

double l2_norm(std::span<const double> v);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

}  // namespace wgal

namespace wgal {

/// 64-bit FNV-1a hash as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace wgal
