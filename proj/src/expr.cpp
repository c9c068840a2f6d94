#include <wgal/expr.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace wgal {

struct Expr::Node {
  Kind kind;
  double value = 0.0;
  int index = 0;  // variable index or exponent
  UnaryOp uop = UnaryOp::neg;
  BinaryOp bop = BinaryOp::add;
  std::vector<Expr> children;
};

namespace {

void check_dims(const Expr& a, const Expr& b) {
  if (a.dimension() != b.dimension()) {
    throw std::invalid_argument("expression dimensions differ");
  }
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw EvalError(EvalError::Kind::non_finite, std::string("non-finite value in ") + what);
  }
  return v;
}

}  // namespace

Expr Expr::constant(double value, int dim) {
  if (!std::isfinite(value)) throw std::invalid_argument("expression constant must be finite");
  auto n = std::make_shared<Node>();
  n->kind = Kind::constant;
  n->value = value;
  return Expr(std::move(n), dim);
}

Expr Expr::variable(int index, int dim) {
  if (index < 1 || index > dim) throw std::invalid_argument("variable index out of range");
  auto n = std::make_shared<Node>();
  n->kind = Kind::variable;
  n->index = index;
  return Expr(std::move(n), dim);
}

Expr Expr::unary(UnaryOp op, Expr arg) {
  if (op == UnaryOp::neg && arg.kind() == Kind::constant) {
    return constant(-arg.constant_value(), arg.dim_);
  }
  if (op == UnaryOp::neg && arg.kind() == Kind::unary && arg.unary_op() == UnaryOp::neg) {
    return arg.child(0);
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::unary;
  n->uop = op;
  const int dim = arg.dim_;
  n->children.push_back(std::move(arg));
  return Expr(std::move(n), dim);
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  check_dims(lhs, rhs);
  const int dim = lhs.dim_;
  switch (op) {
    case BinaryOp::add:
      if (lhs.is_constant(0.0)) return rhs;
      if (rhs.is_constant(0.0)) return lhs;
      break;
    case BinaryOp::sub:
      if (rhs.is_constant(0.0)) return lhs;
      if (lhs.is_constant(0.0)) return unary(UnaryOp::neg, std::move(rhs));
      break;
    case BinaryOp::mul:
      if (lhs.is_constant(0.0) || rhs.is_constant(0.0)) return constant(0.0, dim);
      if (lhs.is_constant(1.0)) return rhs;
      if (rhs.is_constant(1.0)) return lhs;
      break;
    case BinaryOp::div:
      if (rhs.is_constant(1.0)) return lhs;
      break;
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::binary;
  n->bop = op;
  n->children.push_back(std::move(lhs));
  n->children.push_back(std::move(rhs));
  return Expr(std::move(n), dim);
}

Expr Expr::power(Expr base, int exponent) {
  if (exponent == 0) return constant(1.0, base.dim_);
  if (exponent == 1) return base;
  auto n = std::make_shared<Node>();
  n->kind = Kind::power;
  n->index = exponent;
  const int dim = base.dim_;
  n->children.push_back(std::move(base));
  return Expr(std::move(n), dim);
}

Expr::Kind Expr::kind() const noexcept { return node_->kind; }

double Expr::constant_value() const {
  if (kind() != Kind::constant) throw std::logic_error("not a constant node");
  return node_->value;
}

int Expr::variable_index() const {
  if (kind() != Kind::variable) throw std::logic_error("not a variable node");
  return node_->index;
}

UnaryOp Expr::unary_op() const {
  if (kind() != Kind::unary) throw std::logic_error("not a unary node");
  return node_->uop;
}

BinaryOp Expr::binary_op() const {
  if (kind() != Kind::binary) throw std::logic_error("not a binary node");
  return node_->bop;
}

int Expr::exponent() const {
  if (kind() != Kind::power) throw std::logic_error("not a power node");
  return node_->index;
}

const Expr& Expr::child(std::size_t i) const { return node_->children.at(i); }
std::size_t Expr::child_count() const { return node_->children.size(); }

bool Expr::is_constant(double v) const noexcept {
  return node_->kind == Kind::constant && node_->value == v;
}

bool Expr::depends_on_variables() const noexcept {
  if (node_->kind == Kind::variable) return true;
  for (const auto& c : node_->children) {
    if (c.depends_on_variables()) return true;
  }
  return false;
}

std::size_t Expr::node_count() const {
  std::size_t n = 1;
  for (const auto& c : node_->children) n += c.node_count();
  return n;
}

double Expr::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw EvalError(EvalError::Kind::dimension_mismatch,
                    "point has dimension " + std::to_string(x.size()) + ", expression expects " +
                        std::to_string(dim_));
  }
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::constant:
      return n.value;
    case Kind::variable:
      return x[n.index - 1];
    case Kind::unary: {
      const double a = n.children[0].eval(x);
      switch (n.uop) {
        case UnaryOp::neg: return -a;
        case UnaryOp::sin: return std::sin(a);
        case UnaryOp::cos: return std::cos(a);
        case UnaryOp::exp: return checked(std::exp(a), "exp");
        case UnaryOp::tanh: return std::tanh(a);
      }
      break;
    }
    case Kind::binary: {
      const double a = n.children[0].eval(x);
      const double b = n.children[1].eval(x);
      switch (n.bop) {
        case BinaryOp::add: return checked(a + b, "addition");
        case BinaryOp::sub: return checked(a - b, "subtraction");
        case BinaryOp::mul: return checked(a * b, "multiplication");
        case BinaryOp::div:
          if (b == 0.0) throw EvalError(EvalError::Kind::division_by_zero, "division by zero");
          return checked(a / b, "division");
      }
      break;
    }
    case Kind::power: {
      const double a = n.children[0].eval(x);
      if (a == 0.0 && n.index < 0) {
        throw EvalError(EvalError::Kind::division_by_zero, "zero raised to a negative power");
      }
      return checked(std::pow(a, n.index), "power");
    }
  }
  throw std::logic_error("corrupt expression node");
}

Expr Expr::diff(int i) const {
  if (i < 1 || i > dim_) throw std::invalid_argument("diff variable index out of range");
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::constant:
      return constant(0.0, dim_);
    case Kind::variable:
      return constant(n.index == i ? 1.0 : 0.0, dim_);
    case Kind::unary: {
      const Expr& a = n.children[0];
      const Expr da = a.diff(i);
      if (da.is_constant(0.0)) return constant(0.0, dim_);
      switch (n.uop) {
        case UnaryOp::neg: return -da;
        case UnaryOp::sin: return unary(UnaryOp::cos, a) * da;
        case UnaryOp::cos: return -(unary(UnaryOp::sin, a) * da);
        case UnaryOp::exp: return *this * da;
        case UnaryOp::tanh: return (constant(1.0, dim_) - power(*this, 2)) * da;
      }
      break;
    }
    case Kind::binary: {
      const Expr& a = n.children[0];
      const Expr& b = n.children[1];
      const Expr da = a.diff(i);
      const Expr db = b.diff(i);
      switch (n.bop) {
        case BinaryOp::add: return da + db;
        case BinaryOp::sub: return da - db;
        case BinaryOp::mul: return da * b + a * db;
        case BinaryOp::div: return (da * b - a * db) / power(b, 2);
      }
      break;
    }
    case Kind::power: {
      const Expr& a = n.children[0];
      const Expr da = a.diff(i);
      return constant(static_cast<double>(n.index), dim_) * power(a, n.index - 1) * da;
    }
  }
  throw std::logic_error("corrupt expression node");
}

std::string Expr::to_string() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::constant: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      std::string s(buf);
      return (n.value < 0.0 || std::signbit(n.value)) ? "(" + s + ")" : s;
    }
    case Kind::variable:
      return "x" + std::to_string(n.index);
    case Kind::unary: {
      const std::string a = n.children[0].to_string();
      switch (n.uop) {
        case UnaryOp::neg: return "(-(" + a + "))";
        case UnaryOp::sin: return "sin(" + a + ")";
        case UnaryOp::cos: return "cos(" + a + ")";
        case UnaryOp::exp: return "exp(" + a + ")";
        case UnaryOp::tanh: return "tanh(" + a + ")";
      }
      break;
    }
    case Kind::binary: {
      static constexpr const char* ops[] = {" + ", " - ", " * ", " / "};
      return "(" + n.children[0].to_string() + ops[static_cast<int>(n.bop)] +
             n.children[1].to_string() + ")";
    }
    case Kind::power:
      return "((" + n.children[0].to_string() + ")^(" + std::to_string(n.index) + "))";
  }
  throw std::logic_error("corrupt expression node");
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::div, a, b); }
Expr operator-(const Expr& a) { return Expr::unary(UnaryOp::neg, a); }

ExprGradient::ExprGradient(const Expr& e) : value(e) {
  partials.reserve(e.dimension());
  for (int i = 1; i <= e.dimension(); ++i) partials.push_back(e.diff(i));
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg,
                         ParseError::Kind kind = ParseError::Kind::syntax) const {
    throw ParseError(kind, pos_, msg);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(BinaryOp::add, lhs, parse_product());
      } else if (accept('-')) {
        lhs = Expr::binary(BinaryOp::sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(BinaryOp::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expr::binary(BinaryOp::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    for (;;) {
      skip_ws();
      const std::size_t at = pos_;
      if (!accept('^')) return base;
      int sign = 1;
      if (accept('-')) {
        sign = -1;
      } else {
        accept('+');
      }
      const Expr e = parse_primary();
      if (e.depends_on_variables()) {
        pos_ = at;
        fail("exponent must be an integer constant");
      }
      const double v = sign * e.eval(std::vector<double>(dim_, 0.0));
      if (v != std::round(v) || std::fabs(v) > 1 << 30) {
        pos_ = at;
        fail("exponent must be an integer constant");
      }
      base = Expr::power(base, static_cast<int>(v));
    }
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      expect(')');
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto is_digit = [&](std::size_t p) {
      return p < text_.size() && text_[p] >= '0' && text_[p] <= '9';
    };
    std::size_t p = pos_;
    while (is_digit(p)) ++p;
    if (p < text_.size() && text_[p] == '.') {
      ++p;
      while (is_digit(p)) ++p;
    }
    if (p < text_.size() && (text_[p] == 'e' || text_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < text_.size() && (text_[q] == '+' || text_[q] == '-')) ++q;
      if (is_digit(q)) {
        p = q;
        while (is_digit(p)) ++p;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + p, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + p) fail("malformed number");
    pos_ = p;
    return Expr::constant(v, dim_);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view id = text_.substr(start, pos_ - start);
    if (id == "pi") return Expr::constant(std::numbers::pi, dim_);
    static constexpr std::pair<std::string_view, UnaryOp> functions[] = {
        {"sin", UnaryOp::sin}, {"cos", UnaryOp::cos}, {"exp", UnaryOp::exp}, {"tanh", UnaryOp::tanh}};
    for (const auto& [name, op] : functions) {
      if (id == name) {
        expect('(');
        Expr arg = parse_sum();
        expect(')');
        return Expr::unary(op, std::move(arg));
      }
    }
    if (id.size() >= 2 && id[0] == 'x') {
      bool digits = true;
      for (std::size_t k = 1; k < id.size(); ++k) digits = digits && std::isdigit(static_cast<unsigned char>(id[k]));
      if (digits) {
        int index = 0;
        std::from_chars(id.data() + 1, id.data() + id.size(), index);
        if (index < 1 || index > dim_) {
          pos_ = start;
          fail("variable '" + std::string(id) + "' outside x1..x" + std::to_string(dim_),
               ParseError::Kind::variable_out_of_range);
        }
        return Expr::variable(index, dim_);
      }
    }
    pos_ = start;
    fail("unknown identifier '" + std::string(id) + "'", ParseError::Kind::unknown_identifier);
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, int dim) {
  if (dim < 1) throw std::invalid_argument("expression dimension must be >= 1");
  return Parser(text, dim).parse();
}

}  // namespace wgal
