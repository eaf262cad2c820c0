#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cotlab/errors.hpp"

namespace cotlab {

// The four basic arithmetic operators. Closed enumeration.
enum class Operator { add, sub, mul, div };

char operator_symbol(Operator op);

// Mul/Div bind tighter than Add/Sub; all operators are left-associative.
int precedence(Operator op);

// Immutable binary expression tree over integer leaves. Cheap to copy
// (shared structure); all operations treat it as a value.
class Expr {
 public:
  static Expr leaf(std::int64_t value);
  static Expr node(Operator op, Expr left, Expr right);

  bool is_leaf() const { return impl_->left == nullptr; }
  std::int64_t value() const;   // leaf only
  Operator op() const;          // node only
  Expr left() const;            // node only
  Expr right() const;           // node only

 private:
  struct Impl {
    Operator op{};
    std::shared_ptr<const Impl> left;
    std::shared_ptr<const Impl> right;
    std::int64_t value = 0;
  };
  explicit Expr(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

struct EvalStep {
  Operator op;
  std::int64_t lhs;
  std::int64_t rhs;
  std::int64_t result;

  friend bool operator==(const EvalStep&, const EvalStep&) = default;
};

// Ordered per-operator-node step trace. One step per operator node,
// appended in evaluation order (left subtree fully, then right, then node).
struct EvalTrace {
  std::vector<EvalStep> steps;
  std::int64_t final_value = 0;
};

class DivisionByZero : public Error {
 public:
  using Error::Error;
};

// Division with a nonzero remainder. Signals an invalid instance; results
// are never silently truncated.
class NonIntegerDivision : public Error {
 public:
  using Error::Error;
};

// Checked 64-bit arithmetic overflowed. Never wraps.
class Overflow : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Exact evaluation with a full step trace. Throws DivisionByZero,
// NonIntegerDivision or Overflow.
EvalTrace evaluate(const Expr& expr);

// Infix text with minimal parentheses under standard precedence and left
// associativity; no whitespace. parse(render(t)) reproduces t exactly for
// any tree with nonnegative leaves.
std::string render(const Expr& expr);

// Parses digits, + - * / ( ) and optional spaces. Standard precedence,
// left-associative, no unary minus. Throws SyntaxError with a byte offset.
Expr parse(std::string_view text);

// Number of operator nodes.
int count_operations(const Expr& expr);

}  // namespace cotlab
