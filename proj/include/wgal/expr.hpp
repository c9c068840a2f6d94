#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <wgal/error.hpp>

namespace wgal {

enum class UnaryOp { neg, sin, cos, exp, tanh };
enum class BinaryOp { add, sub, mul, div };

/// Immutable scalar expression over x1..xd. Copies share structure.
///
/// Powers only take integer exponents, so `diff` never needs a logarithm.
/// Nodes are built through smart constructors that fold trivial zeros and
/// ones; no other simplification is attempted.
class Expr {
 public:
  enum class Kind { constant, variable, unary, binary, power };

  static Expr constant(double value, int dim);
  /// `index` is 1-based.
  static Expr variable(int index, int dim);
  static Expr unary(UnaryOp op, Expr arg);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);
  static Expr power(Expr base, int exponent);

  int dimension() const noexcept { return dim_; }
  Kind kind() const noexcept;
  double constant_value() const;
  int variable_index() const;
  UnaryOp unary_op() const;
  BinaryOp binary_op() const;
  int exponent() const;
  const Expr& child(std::size_t i) const;
  std::size_t child_count() const;

  bool is_constant(double v) const noexcept;
  bool depends_on_variables() const noexcept;

  /// Throws EvalError on division by zero, non-finite results, or a point of
  /// the wrong dimension.
  double eval(std::span<const double> x) const;

  /// Exact partial derivative with respect to x_i (1-based).
  Expr diff(int i) const;

  /// Fully parenthesized text that `parse_expr` reads back to an expression
  /// with bit-identical evaluations.
  std::string to_string() const;

  std::size_t node_count() const;

 private:
  struct Node;
  Expr(std::shared_ptr<const Node> node, int dim) : node_(std::move(node)), dim_(dim) {}
  std::shared_ptr<const Node> node_;
  int dim_ = 0;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

/// Grammar: decimal literals, `pi`, x1..xd, + - * / ^, sin cos exp tanh,
/// parentheses. Precedence ^ > unary minus > * / > + -, left-associative.
/// Exponents must be integer constants (an optional leading sign is allowed
/// directly after ^).
Expr parse_expr(std::string_view text, int dim);

/// Value and spatial gradient of an expression at one point.
struct ExprGradient {
  Expr value;
  std::vector<Expr> partials;

  explicit ExprGradient(const Expr& e);
};

}  // namespace wgal
