#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nshift::cli {

/// Raised for malformed or inconsistent scenario input. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arithmetic expression over the variables x1..xn, v and w.
///
/// Grammar: numbers, the constant `pi`, + - * / ^ (right associative), unary
/// minus, parentheses, and exp, log, sin, cos, sqrt. Evaluation takes a value
/// vector laid out as (x1, ..., xn, v, w).
class Expression {
 public:
  struct Node;

  Expression() = default;

  /// Parses `text` for a chart of dimension `dim`. `allowed` lists which of
  /// "x", "v", "w" may appear; anything else is a ConfigError.
  static Expression parse(std::string_view text, int dim, std::string_view allowed = "xvw");

  static Expression constant(double value, int dim);

  double eval(const std::vector<double>& values) const;

  /// Symbolic partial derivative with respect to variable `index`
  /// (0..dim-1 for x, dim for v, dim+1 for w).
  Expression derivative(int index) const;

  /// True if variable `index` occurs.
  bool depends_on(int index) const;

  const std::string& text() const noexcept { return text_; }
  int dim() const noexcept { return dim_; }
  int v_index() const noexcept { return dim_; }
  int w_index() const noexcept { return dim_ + 1; }
  bool empty() const noexcept { return !root_; }

 private:
  Expression(std::shared_ptr<const Node> root, int dim, std::string text);

  std::shared_ptr<const Node> root_;
  int dim_ = 0;
  std::string text_;
};

}  // namespace nshift::cli
