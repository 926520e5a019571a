#pragma once

// Scalar expression trees with exact symbolic differentiation.
//
// Expressions are immutable and share structure through shared_ptr, so
// copies are cheap and concurrent evaluation is safe. Variable indices are
// 0-based in the C++ API and printed 1-based ("x1", "s1", ...).

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace metriplectic {

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position_(position) {}

  /// 0-based character offset into the parsed text.
  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Op { Constant, Variable, Negate, Sin, Cos, Exp, Log, Sqrt, Add, Sub, Mul, Div, Pow };

class Expression {
public:
  /// The zero constant.
  Expression() : Expression(constant(0.0)) {}

  static Expression constant(double value) {
    auto n = std::make_shared<Node>();
    n->op = Op::Constant;
    n->value = value;
    return Expression(std::move(n));
  }

  static Expression variable(std::size_t index) {
    auto n = std::make_shared<Node>();
    n->op = Op::Variable;
    n->index = index;
    n->arity = index + 1;
    return Expression(std::move(n));
  }

  Op op() const noexcept { return node_->op; }

  /// Smallest input length this expression can be evaluated on.
  std::size_t arity() const noexcept { return node_->arity; }

  bool is_constant() const noexcept { return node_->op == Op::Constant; }
  std::optional<double> constant_value() const {
    if (is_constant()) return node_->value;
    return std::nullopt;
  }
  bool is_constant(double v) const noexcept { return is_constant() && node_->value == v; }

  /// Throws EvaluationError on division by zero, ln/sqrt outside their
  /// domain, a non-integer power of a negative base, or a non-finite result.
  double evaluate(std::span<const double> point) const {
    if (point.size() < node_->arity) {
      throw EvaluationError("point has " + std::to_string(point.size()) +
                            " components, expression needs " + std::to_string(node_->arity));
    }
    const double r = eval(*node_, point);
    if (!std::isfinite(r)) throw EvaluationError("non-finite result");
    return r;
  }

  /// Partial derivative with respect to variable `index`.
  Expression derivative(std::size_t index) const { return diff(*this, index); }

  /// Replaces variable i by replacements[i].
  Expression substitute(std::span<const Expression> replacements) const {
    if (replacements.size() < node_->arity) {
      throw std::invalid_argument("substitute: not enough replacement expressions");
    }
    return subst(*this, replacements);
  }

  /// Fully parenthesized form that parse() reads back to an equal-valued tree.
  std::string to_string(std::string_view prefix = "x") const {
    std::string out;
    print(*node_, prefix, out);
    return out;
  }

  friend Expression operator-(const Expression& a) {
    if (a.is_constant()) return constant(-a.node_->value);
    if (a.op() == Op::Negate) return Expression(a.node_->lhs);
    return unary(Op::Negate, a);
  }
  friend Expression operator+(const Expression& a, const Expression& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.node_->value + b.node_->value);
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return binary(Op::Add, a, b);
  }
  friend Expression operator-(const Expression& a, const Expression& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.node_->value - b.node_->value);
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return binary(Op::Sub, a, b);
  }
  friend Expression operator*(const Expression& a, const Expression& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.node_->value * b.node_->value);
    if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return -b;
    if (b.is_constant(-1.0)) return -a;
    return binary(Op::Mul, a, b);
  }
  friend Expression operator/(const Expression& a, const Expression& b) {
    if (a.is_constant() && b.is_constant() && b.node_->value != 0.0) {
      return constant(a.node_->value / b.node_->value);
    }
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(0.0) && !b.is_constant(0.0)) return constant(0.0);
    return binary(Op::Div, a, b);
  }

  friend Expression pow(const Expression& base, const Expression& exponent) {
    if (exponent.is_constant(1.0)) return base;
    if (exponent.is_constant(0.0)) return constant(1.0);
    if (base.is_constant() && exponent.is_constant()) {
      const double r = std::pow(base.node_->value, exponent.node_->value);
      if (std::isfinite(r)) return constant(r);
    }
    return binary(Op::Pow, base, exponent);
  }
  friend Expression sin(const Expression& a) { return fold_unary(Op::Sin, a); }
  friend Expression cos(const Expression& a) { return fold_unary(Op::Cos, a); }
  friend Expression exp(const Expression& a) { return fold_unary(Op::Exp, a); }
  friend Expression log(const Expression& a) { return fold_unary(Op::Log, a); }
  friend Expression sqrt(const Expression& a) { return fold_unary(Op::Sqrt, a); }

private:
  struct Node {
    Op op = Op::Constant;
    double value = 0.0;
    std::size_t index = 0;
    std::size_t arity = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static Expression unary(Op op, const Expression& a) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = a.node_;
    n->arity = a.node_->arity;
    return Expression(std::move(n));
  }

  static Expression binary(Op op, const Expression& a, const Expression& b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = a.node_;
    n->rhs = b.node_;
    n->arity = std::max(a.node_->arity, b.node_->arity);
    return Expression(std::move(n));
  }

  static Expression fold_unary(Op op, const Expression& a) {
    if (a.is_constant()) {
      const double v = a.node_->value;
      const bool in_domain = (op != Op::Log || v > 0.0) && (op != Op::Sqrt || v >= 0.0);
      if (in_domain) {
        const double r = apply_unary(op, v);
        if (std::isfinite(r)) return constant(r);
      }
    }
    return unary(op, a);
  }

  static double apply_unary(Op op, double v) {
    switch (op) {
      case Op::Negate: return -v;
      case Op::Sin: return std::sin(v);
      case Op::Cos: return std::cos(v);
      case Op::Exp: return std::exp(v);
      case Op::Log:
        if (!(v > 0.0)) throw EvaluationError("ln of non-positive argument");
        return std::log(v);
      case Op::Sqrt:
        if (v < 0.0) throw EvaluationError("sqrt of negative argument");
        return std::sqrt(v);
      default: break;
    }
    throw std::logic_error("apply_unary: not a unary op");
  }

  static double power(double base, double exponent) {
    const bool integral = std::nearbyint(exponent) == exponent;
    if (base == 0.0 && exponent < 0.0) throw EvaluationError("division by zero in power");
    if (!integral && base < 0.0) {
      throw EvaluationError("non-integer power of negative base");
    }
    return std::pow(base, exponent);
  }

  static double eval(const Node& n, std::span<const double> x) {
    switch (n.op) {
      case Op::Constant: return n.value;
      case Op::Variable: return x[n.index];
      case Op::Add: return eval(*n.lhs, x) + eval(*n.rhs, x);
      case Op::Sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
      case Op::Mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
      case Op::Div: {
        const double num = eval(*n.lhs, x);
        const double den = eval(*n.rhs, x);
        if (den == 0.0) throw EvaluationError("division by zero");
        return num / den;
      }
      case Op::Pow: return power(eval(*n.lhs, x), eval(*n.rhs, x));
      default: return apply_unary(n.op, eval(*n.lhs, x));
    }
  }

  static Expression diff(const Expression& e, std::size_t i) {
    const Node& n = *e.node_;
    if (n.arity <= i) return constant(0.0);
    const Expression a = n.lhs ? Expression(n.lhs) : Expression(constant(0.0));
    const Expression b = n.rhs ? Expression(n.rhs) : Expression(constant(0.0));
    switch (n.op) {
      case Op::Constant: return constant(0.0);
      case Op::Variable: return constant(n.index == i ? 1.0 : 0.0);
      case Op::Negate: return -diff(a, i);
      case Op::Sin: return cos(a) * diff(a, i);
      case Op::Cos: return -(sin(a) * diff(a, i));
      case Op::Exp: return e * diff(a, i);
      case Op::Log: return diff(a, i) / a;
      case Op::Sqrt: return diff(a, i) / (constant(2.0) * e);
      case Op::Add: return diff(a, i) + diff(b, i);
      case Op::Sub: return diff(a, i) - diff(b, i);
      case Op::Mul: return diff(a, i) * b + a * diff(b, i);
      case Op::Div: return (diff(a, i) * b - a * diff(b, i)) / (b * b);
      case Op::Pow:
        if (b.is_constant()) {
          const double c = b.node_->value;
          return constant(c) * pow(a, constant(c - 1.0)) * diff(a, i);
        }
        // general rule; requires a > 0 wherever it is evaluated
        return e * (diff(b, i) * log(a) + b * diff(a, i) / a);
    }
    throw std::logic_error("differentiate: unknown op");
  }

  static Expression subst(const Expression& e, std::span<const Expression> r) {
    const Node& n = *e.node_;
    switch (n.op) {
      case Op::Constant: return e;
      case Op::Variable: return r[n.index];
      case Op::Negate: return -subst(Expression(n.lhs), r);
      case Op::Sin:
      case Op::Cos:
      case Op::Exp:
      case Op::Log:
      case Op::Sqrt: return fold_unary(n.op, subst(Expression(n.lhs), r));
      default: break;
    }
    const Expression a = subst(Expression(n.lhs), r);
    const Expression b = subst(Expression(n.rhs), r);
    switch (n.op) {
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::Div: return a / b;
      default: return pow(a, b);
    }
  }

  static void print(const Node& n, std::string_view prefix, std::string& out) {
    switch (n.op) {
      case Op::Constant: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", std::fabs(n.value));
        if (std::signbit(n.value)) {
          out += "(-";
          out += buf;
          out += ')';
        } else {
          out += buf;
        }
        return;
      }
      case Op::Variable:
        out += prefix;
        out += std::to_string(n.index + 1);
        return;
      case Op::Negate:
        out += "(-";
        print(*n.lhs, prefix, out);
        out += ')';
        return;
      case Op::Sin:
      case Op::Cos:
      case Op::Exp:
      case Op::Log:
      case Op::Sqrt: {
        static constexpr const char* names[] = {"sin", "cos", "exp", "ln", "sqrt"};
        out += names[static_cast<int>(n.op) - static_cast<int>(Op::Sin)];
        out += '(';
        print(*n.lhs, prefix, out);
        out += ')';
        return;
      }
      default: break;
    }
    static constexpr char symbols[] = {'+', '-', '*', '/', '^'};
    out += '(';
    print(*n.lhs, prefix, out);
    out += ' ';
    out += symbols[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
    out += ' ';
    print(*n.rhs, prefix, out);
    out += ')';
  }

  std::shared_ptr<const Node> node_;
};

namespace detail {

// Recursive-descent parser. Precedence, loosest first:
//   sum     := product (('+'|'-') product)*
//   product := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | variable | func '(' sum ')' | '(' sum ')'
class Parser {
public:
  Parser(std::string_view text, std::size_t arity, std::string_view prefix)
      : text_(text), arity_(arity), prefix_(prefix) {}

  Expression run() {
    skip_space();
    if (pos_ == text_.size()) throw ParseError("empty expression", pos_);
    Expression e = sum();
    skip_space();
    if (pos_ != text_.size()) {
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    }
    return e;
  }

private:
  void skip_space() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ == text_.size()) {
        throw ParseError(std::string("expected '") + c + "' but reached end of input", pos_);
      }
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  Expression sum() {
    Expression lhs = product();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + product();
      } else if (accept('-')) {
        lhs = lhs - product();
      } else {
        return lhs;
      }
    }
  }

  Expression product() {
    Expression lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * unary();
      } else if (accept('/')) {
        lhs = lhs / unary();
      } else {
        return lhs;
      }
    }
  }

  Expression unary() {
    if (accept('-')) return -unary();
    return power();
  }

  Expression power() {
    Expression base = primary();
    if (accept('^')) return pow(base, unary());
    return base;
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

  Expression primary() {
    skip_space();
    if (pos_ == text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = sum();
      expect(')');
      return e;
    }
    if (is_digit(c) || c == '.') return number();
    if (is_alpha(c)) return identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expression number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (is_digit(text_[pos_]) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && is_digit(text_[p])) {
        while (p < text_.size() && is_digit(text_[p])) ++p;
        pos_ = p;
      }
    }
    double value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ParseError("malformed number", start);
    return Expression::constant(value);
  }

  Expression identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_alpha(text_[pos_])) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    const std::size_t digits_start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    const std::string_view digits = text_.substr(digits_start, pos_ - digits_start);

    if (digits.empty()) {
      static constexpr std::pair<std::string_view, Expression (*)(const Expression&)> funcs[] = {
          {"sin", [](const Expression& a) { return sin(a); }},
          {"cos", [](const Expression& a) { return cos(a); }},
          {"exp", [](const Expression& a) { return exp(a); }},
          {"ln", [](const Expression& a) { return log(a); }},
          {"sqrt", [](const Expression& a) { return sqrt(a); }},
      };
      for (const auto& [fname, make] : funcs) {
        if (name == fname) {
          expect('(');
          Expression arg = sum();
          expect(')');
          return make(arg);
        }
      }
      throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }
    if (name != prefix_) {
      throw ParseError("unknown identifier '" + std::string(text_.substr(start, pos_ - start)) + "'", start);
    }
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec != std::errc() || index == 0 || index > arity_) {
      throw ParseError("variable '" + std::string(text_.substr(start, pos_ - start)) +
                           "' out of range 1.." + std::to_string(arity_),
                       start);
    }
    return Expression::variable(index - 1);
  }

  std::string_view text_;
  std::size_t arity_;
  std::string_view prefix_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses `text` over variables prefix1..prefix<arity>. Throws ParseError.
inline Expression parse(std::string_view text, std::size_t arity, std::string_view prefix = "x") {
  if (prefix != "x" && prefix != "s") throw std::invalid_argument("variable prefix must be \"x\" or \"s\"");
  return detail::Parser(text, arity, prefix).run();
}

inline double evaluate(const Expression& e, std::span<const double> point) { return e.evaluate(point); }

inline Expression differentiate(const Expression& e, std::size_t index, std::size_t arity) {
  if (index >= arity) throw std::invalid_argument("differentiate: variable index out of range");
  return e.derivative(index);
}

}  // namespace metriplectic
