#include "morsenet/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

namespace morsenet {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Log, Tanh, Sqrt, Softplus, Sigmoid };

struct Expression::Node {
  Op op;
  double value = 0.0;
  int var = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using P = std::shared_ptr<const Expression::Node>;

double eval_node(const Expression::Node& n, const Vec& x);

P cst(double v) { return std::make_shared<Expression::Node>(Expression::Node{Op::Const, v, 0, nullptr, nullptr}); }
P var(int i) { return std::make_shared<Expression::Node>(Expression::Node{Op::Var, 0, i, nullptr, nullptr}); }
bool is_c(const P& p, double v) { return p->op == Op::Const && p->value == v; }

P mk(Op op, P a, P b = nullptr) {
  if (a->op == Op::Const && (!b || b->op == Op::Const) && op != Op::Var) {
    auto n = std::make_shared<Expression::Node>(Expression::Node{op, 0, 0, a, b});
    Vec none;
    return cst(eval_node(*n, none));
  }
  switch (op) {
    case Op::Add:
      if (is_c(a, 0)) return b;
      if (is_c(b, 0)) return a;
      break;
    case Op::Sub:
      if (is_c(b, 0)) return a;
      if (is_c(a, 0)) return mk(Op::Neg, b);
      break;
    case Op::Mul:
      if (is_c(a, 0) || is_c(b, 0)) return cst(0);
      if (is_c(a, 1)) return b;
      if (is_c(b, 1)) return a;
      break;
    case Op::Div:
      if (is_c(a, 0)) return cst(0);
      if (is_c(b, 1)) return a;
      break;
    case Op::Pow:
      if (is_c(b, 1)) return a;
      if (is_c(b, 0)) return cst(1);
      break;
    case Op::Neg:
      if (a->op == Op::Neg) return a->a;
      break;
    default: break;
  }
  return std::make_shared<Expression::Node>(Expression::Node{op, 0, 0, std::move(a), std::move(b)});
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double eval_node(const Expression::Node& n, const Vec& x) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return x(n.var);
    case Op::Add: return eval_node(*n.a, x) + eval_node(*n.b, x);
    case Op::Sub: return eval_node(*n.a, x) - eval_node(*n.b, x);
    case Op::Mul: return eval_node(*n.a, x) * eval_node(*n.b, x);
    case Op::Div: return eval_node(*n.a, x) / eval_node(*n.b, x);
    case Op::Pow: return std::pow(eval_node(*n.a, x), eval_node(*n.b, x));
    case Op::Neg: return -eval_node(*n.a, x);
    case Op::Sin: return std::sin(eval_node(*n.a, x));
    case Op::Cos: return std::cos(eval_node(*n.a, x));
    case Op::Exp: return std::exp(eval_node(*n.a, x));
    case Op::Log: return std::log(eval_node(*n.a, x));
    case Op::Tanh: return std::tanh(eval_node(*n.a, x));
    case Op::Sqrt: return std::sqrt(eval_node(*n.a, x));
    case Op::Softplus: {
      double u = eval_node(*n.a, x);
      return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
    }
    case Op::Sigmoid: return sigmoid(eval_node(*n.a, x));
  }
  return NAN;
}

P diff_node(const P& n, int v) {
  const P& a = n->a;
  const P& b = n->b;
  switch (n->op) {
    case Op::Const: return cst(0);
    case Op::Var: return cst(n->var == v ? 1 : 0);
    case Op::Add: return mk(Op::Add, diff_node(a, v), diff_node(b, v));
    case Op::Sub: return mk(Op::Sub, diff_node(a, v), diff_node(b, v));
    case Op::Mul:
      return mk(Op::Add, mk(Op::Mul, diff_node(a, v), b), mk(Op::Mul, a, diff_node(b, v)));
    case Op::Div:
      return mk(Op::Div,
                mk(Op::Sub, mk(Op::Mul, diff_node(a, v), b), mk(Op::Mul, a, diff_node(b, v))),
                mk(Op::Mul, b, b));
    case Op::Pow: {
      P da = diff_node(a, v), db = diff_node(b, v);
      if (is_c(db, 0))
        return mk(Op::Mul, mk(Op::Mul, b, mk(Op::Pow, a, mk(Op::Sub, b, cst(1)))), da);
      return mk(Op::Mul, n,
                mk(Op::Add, mk(Op::Mul, db, mk(Op::Log, a)), mk(Op::Div, mk(Op::Mul, b, da), a)));
    }
    case Op::Neg: return mk(Op::Neg, diff_node(a, v));
    case Op::Sin: return mk(Op::Mul, mk(Op::Cos, a), diff_node(a, v));
    case Op::Cos: return mk(Op::Neg, mk(Op::Mul, mk(Op::Sin, a), diff_node(a, v)));
    case Op::Exp: return mk(Op::Mul, n, diff_node(a, v));
    case Op::Log: return mk(Op::Div, diff_node(a, v), a);
    case Op::Tanh:
      return mk(Op::Mul, mk(Op::Sub, cst(1), mk(Op::Mul, n, n)), diff_node(a, v));
    case Op::Sqrt: return mk(Op::Div, diff_node(a, v), mk(Op::Mul, cst(2), n));
    case Op::Softplus: return mk(Op::Mul, mk(Op::Sigmoid, a), diff_node(a, v));
    case Op::Sigmoid:
      return mk(Op::Mul, mk(Op::Mul, n, mk(Op::Sub, cst(1), n)), diff_node(a, v));
  }
  return cst(0);
}

std::string show(const P& n) {
  auto fn = [&](const char* f) { return std::string(f) + "(" + show(n->a) + ")"; };
  auto bin = [&](const char* o) { return "(" + show(n->a) + " " + o + " " + show(n->b) + ")"; };
  switch (n->op) {
    case Op::Const: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n->value);
      return buf;
    }
    case Op::Var: return "x" + std::to_string(n->var + 1);
    case Op::Add: return bin("+");
    case Op::Sub: return bin("-");
    case Op::Mul: return bin("*");
    case Op::Div: return bin("/");
    case Op::Pow: return bin("^");
    case Op::Neg: return "(-" + show(n->a) + ")";
    case Op::Sin: return fn("sin");
    case Op::Cos: return fn("cos");
    case Op::Exp: return fn("exp");
    case Op::Log: return fn("log");
    case Op::Tanh: return fn("tanh");
    case Op::Sqrt: return fn("sqrt");
    case Op::Softplus: return fn("softplus");
    case Op::Sigmoid: return fn("sigmoid");
  }
  return "?";
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  P parse_all() {
    P e = expr();
    skip();
    if (pos_ != s_.size()) error("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }
  int max_var = 0;

 private:
  const std::string& s_;
  size_t pos_ = 0;

  [[noreturn]] void error(const std::string& what) {
    throw Error(ErrorKind::Parse,
                "expression: " + what + " at column " + std::to_string(pos_ + 1));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  P expr() {
    P e = term();
    while (true) {
      if (eat('+')) e = mk(Op::Add, e, term());
      else if (eat('-')) e = mk(Op::Sub, e, term());
      else return e;
    }
  }
  P term() {
    P e = unary();
    while (true) {
      if (eat('*')) e = mk(Op::Mul, e, unary());
      else if (eat('/')) e = mk(Op::Div, e, unary());
      else return e;
    }
  }
  P unary() {
    if (eat('-')) return mk(Op::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }
  P power() {
    P base = primary();
    if (eat('^')) return mk(Op::Pow, base, unary());
    return base;
  }
  P primary() {
    skip();
    if (pos_ >= s_.size()) error("unexpected end of input");
    char c = s_[pos_];
    if (eat('(')) {
      P e = expr();
      if (!eat(')')) error("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* start = s_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(start, &end);
      if (end == start) error("bad number");
      pos_ += static_cast<size_t>(end - start);
      return cst(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t b = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::string id = s_.substr(b, pos_ - b);
      if (id == "pi") return cst(std::numbers::pi);
      if (id == "x") {
        max_var = std::max(max_var, 1);
        return var(0);
      }
      if (id.size() > 1 && id[0] == 'x' &&
          id.find_first_not_of("0123456789", 1) == std::string::npos) {
        int k = std::stoi(id.substr(1));
        if (k < 1) error("variable index must be >= 1");
        max_var = std::max(max_var, k);
        return var(k - 1);
      }
      static const std::pair<const char*, Op> funcs[] = {
          {"sin", Op::Sin},   {"cos", Op::Cos},   {"exp", Op::Exp},
          {"log", Op::Log},   {"tanh", Op::Tanh}, {"sqrt", Op::Sqrt},
          {"softplus", Op::Softplus}, {"sigmoid", Op::Sigmoid}};
      for (const auto& [name, op] : funcs)
        if (id == name) {
          if (!eat('(')) error("expected '(' after " + id);
          P arg = expr();
          if (!eat(')')) error("expected ')'");
          return mk(op, arg);
        }
      pos_ = b;
      error("unknown identifier '" + id + "'");
    }
    error("unexpected '" + std::string(1, c) + "'");
  }
};

}  // namespace

Expression Expression::parse(const std::string& text, int n) {
  Parser p(text);
  P root = p.parse_all();
  if (n == 0) n = std::max(1, p.max_var);
  if (p.max_var > n)
    throw Error(ErrorKind::Parse, "expression uses x" + std::to_string(p.max_var) +
                                      " but dimension is " + std::to_string(n));
  return Expression(root, n);
}

double Expression::eval(const Vec& x) const {
  if (x.size() != n_)
    throw Error(ErrorKind::InvalidInput, "expression: expected " +
                                             std::to_string(n_) + " inputs");
  return eval_node(*root_, x);
}

Expression Expression::diff(int v) const { return Expression(diff_node(root_, v), n_); }

std::string Expression::str() const { return show(root_); }

ScalarMap expression_map(const Expression& e) {
  const int n = e.dim();
  std::vector<Expression> g;
  std::vector<std::vector<Expression>> h(n);
  for (int i = 0; i < n; ++i) g.push_back(e.diff(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h[i].push_back(g[i].diff(j));
  return {n, [e](const Vec& x) { return e.eval(x); },
          [g](const Vec& x) {
            Vec r(g.size());
            for (size_t i = 0; i < g.size(); ++i) r(i) = g[i].eval(x);
            return r;
          },
          [h](const Vec& x) {
            Mat H(h.size(), h.size());
            for (size_t i = 0; i < h.size(); ++i)
              for (size_t j = 0; j < h.size(); ++j) H(i, j) = h[i][j].eval(x);
            return H;
          },
          nullptr};
}

}  // namespace morsenet
