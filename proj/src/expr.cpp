#include "cotlab/expr.hpp"

#include <cassert>
#include <charconv>
#include <utility>
#include <variant>

namespace cotlab {

char operator_symbol(Operator op) {
  switch (op) {
    case Operator::add: return '+';
    case Operator::sub: return '-';
    case Operator::mul: return '*';
    case Operator::div: return '/';
  }
  return '?';
}

int precedence(Operator op) {
  return (op == Operator::mul || op == Operator::div) ? 2 : 1;
}

Expr Expr::leaf(std::int64_t value) {
  auto impl = std::make_shared<Impl>();
  impl->value = value;
  return Expr(std::move(impl));
}

Expr Expr::node(Operator op, Expr left, Expr right) {
  auto impl = std::make_shared<Impl>();
  impl->op = op;
  impl->left = std::move(left.impl_);
  impl->right = std::move(right.impl_);
  return Expr(std::move(impl));
}

std::int64_t Expr::value() const {
  assert(is_leaf());
  return impl_->value;
}

Operator Expr::op() const {
  assert(!is_leaf());
  return impl_->op;
}

Expr Expr::left() const {
  assert(!is_leaf());
  return Expr(impl_->left);
}

Expr Expr::right() const {
  assert(!is_leaf());
  return Expr(impl_->right);
}

SyntaxError::SyntaxError(const std::string& message, std::size_t offset)
    : Error(message + " (at byte " + std::to_string(offset) + ")"),
      offset_(offset) {}

namespace {

std::string step_text(Operator op, std::int64_t a, std::int64_t b) {
  return std::to_string(a) + ' ' + operator_symbol(op) + ' ' + std::to_string(b);
}

std::int64_t checked_apply(Operator op, std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  switch (op) {
    case Operator::add:
      if (__builtin_add_overflow(a, b, &r))
        throw Overflow("integer overflow in " + step_text(op, a, b));
      return r;
    case Operator::sub:
      if (__builtin_sub_overflow(a, b, &r))
        throw Overflow("integer overflow in " + step_text(op, a, b));
      return r;
    case Operator::mul:
      if (__builtin_mul_overflow(a, b, &r))
        throw Overflow("integer overflow in " + step_text(op, a, b));
      return r;
    case Operator::div:
      if (b == 0) throw DivisionByZero("division by zero in " + step_text(op, a, b));
      if (a == INT64_MIN && b == -1)
        throw Overflow("integer overflow in " + step_text(op, a, b));
      if (a % b != 0)
        throw NonIntegerDivision("non-integer division in " + step_text(op, a, b));
      return a / b;
  }
  throw Error("unreachable operator");
}

}  // namespace

EvalTrace evaluate(const Expr& expr) {
  // Iterative post-order so deep left-leaning chains never exhaust the
  // call stack.
  struct Frame {
    Expr node;
    bool expanded;
  };
  EvalTrace trace;
  std::vector<Frame> frames;
  std::vector<std::int64_t> values;
  frames.push_back({expr, false});
  while (!frames.empty()) {
    Frame frame = std::move(frames.back());
    frames.pop_back();
    if (frame.node.is_leaf()) {
      values.push_back(frame.node.value());
      continue;
    }
    if (!frame.expanded) {
      frames.push_back({frame.node, true});
      frames.push_back({frame.node.right(), false});
      frames.push_back({frame.node.left(), false});
    } else {
      const std::int64_t rhs = values.back();
      values.pop_back();
      const std::int64_t lhs = values.back();
      values.pop_back();
      const std::int64_t result = checked_apply(frame.node.op(), lhs, rhs);
      trace.steps.push_back({frame.node.op(), lhs, rhs, result});
      values.push_back(result);
    }
  }
  trace.final_value = values.back();
  return trace;
}

namespace {

bool child_needs_parens(const Expr& child, Operator parent_op, bool is_right) {
  if (child.is_leaf()) return false;
  const int cp = precedence(child.op());
  const int pp = precedence(parent_op);
  if (cp < pp) return true;
  return is_right && cp == pp;
}

}  // namespace

std::string render(const Expr& expr) {
  // Emission stack: either a subtree still to render or a literal character.
  using Item = std::variant<Expr, char>;
  std::string out;
  std::vector<Item> stack;
  stack.emplace_back(expr);
  while (!stack.empty()) {
    Item item = std::move(stack.back());
    stack.pop_back();
    if (std::holds_alternative<char>(item)) {
      out.push_back(std::get<char>(item));
      continue;
    }
    const Expr node = std::get<Expr>(std::move(item));
    if (node.is_leaf()) {
      out += std::to_string(node.value());
      continue;
    }
    const Expr lhs = node.left();
    const Expr rhs = node.right();
    const bool lp = child_needs_parens(lhs, node.op(), false);
    const bool rp = child_needs_parens(rhs, node.op(), true);
    // Pushed in reverse of the output order: [ (L) op (R) ].
    if (rp) stack.emplace_back(')');
    stack.emplace_back(rhs);
    if (rp) stack.emplace_back('(');
    stack.emplace_back(operator_symbol(node.op()));
    if (lp) stack.emplace_back(')');
    stack.emplace_back(lhs);
    if (lp) stack.emplace_back('(');
  }
  return out;
}

namespace {

// Recursive-descent parser. Binary operators are consumed iteratively, so
// recursion depth equals parenthesis nesting (guarded).
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr run() {
    Expr result = parse_expr();
    skip_spaces();
    if (pos_ != text_.size()) throw SyntaxError("unexpected character", pos_);
    return result;
  }

 private:
  static constexpr int kMaxDepth = 10000;

  void skip_spaces() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  bool at_end() {
    skip_spaces();
    return pos_ >= text_.size();
  }

  char peek() { return text_[pos_]; }

  Expr parse_expr() {
    Expr lhs = parse_term();
    while (!at_end() && (peek() == '+' || peek() == '-')) {
      const Operator op = peek() == '+' ? Operator::add : Operator::sub;
      ++pos_;
      lhs = Expr::node(op, std::move(lhs), parse_term());
    }
    return lhs;
  }

  Expr parse_term() {
    Expr lhs = parse_factor();
    while (!at_end() && (peek() == '*' || peek() == '/')) {
      const Operator op = peek() == '*' ? Operator::mul : Operator::div;
      ++pos_;
      lhs = Expr::node(op, std::move(lhs), parse_factor());
    }
    return lhs;
  }

  Expr parse_factor() {
    if (at_end()) throw SyntaxError("unexpected end of input", text_.size());
    if (peek() == '(') {
      if (++depth_ > kMaxDepth)
        throw SyntaxError("parenthesis nesting too deep", pos_);
      ++pos_;
      Expr inner = parse_expr();
      if (at_end() || peek() != ')')
        throw SyntaxError("expected ')'", at_end() ? text_.size() : pos_);
      ++pos_;
      --depth_;
      return inner;
    }
    if (peek() >= '0' && peek() <= '9') return parse_number();
    throw SyntaxError("expected a number or '('", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    std::int64_t value = 0;
    while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
      const std::int64_t digit = text_[pos_] - '0';
      if (__builtin_mul_overflow(value, std::int64_t{10}, &value) ||
          __builtin_add_overflow(value, digit, &value))
        throw SyntaxError("integer literal out of range", start);
      ++pos_;
    }
    return Expr::leaf(value);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

int count_operations(const Expr& expr) {
  int count = 0;
  std::vector<Expr> stack{expr};
  while (!stack.empty()) {
    const Expr node = std::move(stack.back());
    stack.pop_back();
    if (node.is_leaf()) continue;
    ++count;
    stack.push_back(node.left());
    stack.push_back(node.right());
  }
  return count;
}

}  // namespace cotlab
