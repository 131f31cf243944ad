#include "nshift/cli/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace nshift::cli {

enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Sin, Cos, Sqrt };

struct Expression::Node {
  Op op;
  double value = 0.0;
  int index = -1;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr num(double value) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Const;
  n->value = value;
  return n;
}

NodePtr var(int index) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Var;
  n->index = index;
  return n;
}

bool is_const(const NodePtr& n, double value) { return n->op == Op::Const && n->value == value; }

// Builders with light constant folding so derivatives stay compact.
NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return num(a->value + b->value);
  return make(Op::Add, a, b);
}
NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return num(a->value - b->value);
  if (is_const(a, 0)) return make(Op::Neg, b);
  return make(Op::Sub, a, b);
}
NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0) || is_const(b, 0)) return num(0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return num(a->value * b->value);
  return make(Op::Mul, a, b);
}
NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return num(0);
  if (is_const(b, 1)) return a;
  return make(Op::Div, a, b);
}
NodePtr neg(NodePtr a) {
  if (a->op == Op::Const) return num(-a->value);
  return make(Op::Neg, a);
}

double evaluate(const Expression::Node& n, const std::vector<double>& x) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return x[static_cast<std::size_t>(n.index)];
    case Op::Neg: return -evaluate(*n.a, x);
    case Op::Add: return evaluate(*n.a, x) + evaluate(*n.b, x);
    case Op::Sub: return evaluate(*n.a, x) - evaluate(*n.b, x);
    case Op::Mul: return evaluate(*n.a, x) * evaluate(*n.b, x);
    case Op::Div: return evaluate(*n.a, x) / evaluate(*n.b, x);
    case Op::Pow: return std::pow(evaluate(*n.a, x), evaluate(*n.b, x));
    case Op::Exp: return std::exp(evaluate(*n.a, x));
    case Op::Log: return std::log(evaluate(*n.a, x));
    case Op::Sin: return std::sin(evaluate(*n.a, x));
    case Op::Cos: return std::cos(evaluate(*n.a, x));
    case Op::Sqrt: return std::sqrt(evaluate(*n.a, x));
  }
  return std::nan("");
}

bool uses(const Expression::Node& n, int index) {
  if (n.op == Op::Var) return n.index == index;
  return (n.a && uses(*n.a, index)) || (n.b && uses(*n.b, index));
}

NodePtr differentiate(const NodePtr& n, int k) {
  switch (n->op) {
    case Op::Const: return num(0);
    case Op::Var: return num(n->index == k ? 1.0 : 0.0);
    case Op::Neg: return neg(differentiate(n->a, k));
    case Op::Add: return add(differentiate(n->a, k), differentiate(n->b, k));
    case Op::Sub: return sub(differentiate(n->a, k), differentiate(n->b, k));
    case Op::Mul:
      return add(mul(differentiate(n->a, k), n->b), mul(n->a, differentiate(n->b, k)));
    case Op::Div: {
      // (a' b - a b') / b^2
      NodePtr top = sub(mul(differentiate(n->a, k), n->b), mul(n->a, differentiate(n->b, k)));
      return div(top, mul(n->b, n->b));
    }
    case Op::Pow: {
      const NodePtr da = differentiate(n->a, k);
      if (!uses(*n->b, k)) {
        // b a^(b-1) a'
        return mul(mul(n->b, make(Op::Pow, n->a, sub(n->b, num(1)))), da);
      }
      // a^b (b' log a + b a' / a)
      const NodePtr db = differentiate(n->b, k);
      return mul(n, add(mul(db, make(Op::Log, n->a)), div(mul(n->b, da), n->a)));
    }
    case Op::Exp: return mul(n, differentiate(n->a, k));
    case Op::Log: return div(differentiate(n->a, k), n->a);
    case Op::Sin: return mul(make(Op::Cos, n->a), differentiate(n->a, k));
    case Op::Cos: return neg(mul(make(Op::Sin, n->a), differentiate(n->a, k)));
    case Op::Sqrt: return div(differentiate(n->a, k), mul(num(2), n));
  }
  return num(0);
}

std::string render(const Expression::Node& n, int dim) {
  auto bin = [&](const char* op) {
    return "(" + render(*n.a, dim) + " " + op + " " + render(*n.b, dim) + ")";
  };
  auto fn = [&](const char* name) { return std::string(name) + "(" + render(*n.a, dim) + ")"; };
  switch (n.op) {
    case Op::Const: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      return buf;
    }
    case Op::Var:
      if (n.index < dim) return "x" + std::to_string(n.index + 1);
      return n.index == dim ? "v" : "w";
    case Op::Neg: return "(-" + render(*n.a, dim) + ")";
    case Op::Add: return bin("+");
    case Op::Sub: return bin("-");
    case Op::Mul: return bin("*");
    case Op::Div: return bin("/");
    case Op::Pow: return bin("^");
    case Op::Exp: return fn("exp");
    case Op::Log: return fn("log");
    case Op::Sin: return fn("sin");
    case Op::Cos: return fn("cos");
    case Op::Sqrt: return fn("sqrt");
  }
  return "?";
}

class Parser {
 public:
  Parser(std::string_view text, int dim, std::string_view allowed)
      : text_(text), dim_(dim), allowed_(allowed) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression \"" + std::string(text_) + "\": " + what + " at column " +
                      std::to_string(pos_ + 1));
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) n = make(Op::Add, n, term());
      else if (accept('-')) n = make(Op::Sub, n, term());
      else return n;
    }
  }

  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = make(Op::Mul, n, unary());
      else if (accept('/')) n = make(Op::Div, n, unary());
      else return n;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!accept(')')) fail("missing ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double value = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("bad number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return num(value);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name(text_.substr(start, pos_ - start));

    static const std::pair<const char*, Op> functions[] = {
        {"exp", Op::Exp}, {"log", Op::Log}, {"sin", Op::Sin}, {"cos", Op::Cos}, {"sqrt", Op::Sqrt}};
    for (const auto& [fname, op] : functions) {
      if (name == fname) {
        if (!accept('(')) fail("expected '(' after " + name);
        NodePtr arg = expr();
        if (!accept(')')) fail("missing ')'");
        return make(op, arg);
      }
    }
    if (name == "pi") return num(M_PI);
    if (name == "v" || name == "w") {
      if (allowed_.find(name[0]) == std::string_view::npos) fail("variable " + name + " not allowed here");
      return var(name == "v" ? dim_ : dim_ + 1);
    }
    if (name.size() > 1 && name[0] == 'x') {
      if (allowed_.find('x') == std::string_view::npos) fail("coordinates not allowed here");
      const std::string digits = name.substr(1);
      if (digits.find_first_not_of("0123456789") == std::string::npos) {
        const int k = std::stoi(digits);
        if (k < 1 || k > dim_) fail("coordinate " + name + " outside dimension " + std::to_string(dim_));
        return var(k - 1);
      }
    }
    fail("unknown identifier '" + name + "'");
  }

  std::string_view text_;
  int dim_;
  std::string_view allowed_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::shared_ptr<const Node> root, int dim, std::string text)
    : root_(std::move(root)), dim_(dim), text_(std::move(text)) {}

Expression Expression::parse(std::string_view text, int dim, std::string_view allowed) {
  if (dim < 1) throw ConfigError("expression dimension must be positive");
  Parser parser(text, dim, allowed);
  return Expression(parser.parse(), dim, std::string(text));
}

Expression Expression::constant(double value, int dim) {
  NodePtr n = num(value);
  return Expression(n, dim, render(*n, dim));
}

double Expression::eval(const std::vector<double>& values) const {
  if (!root_) throw ConfigError("evaluating an empty expression");
  if (values.size() < static_cast<std::size_t>(dim_ + 2)) {
    throw ConfigError("expression needs " + std::to_string(dim_ + 2) + " variable values");
  }
  return evaluate(*root_, values);
}

Expression Expression::derivative(int index) const {
  if (!root_) throw ConfigError("differentiating an empty expression");
  NodePtr d = differentiate(root_, index);
  return Expression(d, dim_, render(*d, dim_));
}

bool Expression::depends_on(int index) const { return root_ && uses(*root_, index); }

}  // namespace nshift::cli
