#pragma once

#include <memory>
#include <string>

#include "morsenet/morse.hpp"

namespace morsenet {

// Scalar formula in x1..xn (x is x1). Operators + - * / ^, unary minus,
// functions sin cos exp log tanh sqrt softplus sigmoid, constant pi.
class Expression {
 public:
  struct Node;

  // n = 0 infers the dimension from the largest variable index.
  static Expression parse(const std::string& text, int n = 0);

  int dim() const { return n_; }
  double eval(const Vec& x) const;
  Expression diff(int var) const;  // 0-based variable
  std::string str() const;

 private:
  Expression(std::shared_ptr<const Node> root, int n) : root_(std::move(root)), n_(n) {}
  std::shared_ptr<const Node> root_;
  int n_ = 0;
};

// Symbolic gradient and Hessian.
ScalarMap expression_map(const Expression& e);

}  // namespace morsenet
