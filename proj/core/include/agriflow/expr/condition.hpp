#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include "agriflow/value.hpp"

namespace agriflow::expr {

enum class CompareOp { kGt, kGe, kLt, kLe, kEq, kNe };

const char* to_string(CompareOp op) noexcept;

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Literal {
  std::variant<bool, std::int64_t, double, std::string> value;
  friend bool operator==(const Literal&, const Literal&) = default;
};
struct VariableRef {
  std::string name;
  friend bool operator==(const VariableRef&, const VariableRef&) = default;
};
struct Comparison {
  CompareOp op;
  NodePtr lhs;
  NodePtr rhs;
};
struct Not {
  NodePtr operand;
};
struct And {
  NodePtr lhs;
  NodePtr rhs;
};
struct Or {
  NodePtr lhs;
  NodePtr rhs;
};

struct Node {
  std::variant<Literal, VariableRef, Comparison, Not, And, Or> kind;
};

/// Structural equality of two trees.
bool equal(const Node& a, const Node& b);

/// A parsed gateway condition. Immutable and cheap to copy.
class ConditionExpression {
 public:
  ConditionExpression(std::string source, NodePtr root)
      : source_(std::move(source)), root_(std::move(root)) {}

  const std::string& source_text() const noexcept { return source_; }
  const Node& root() const noexcept { return *root_; }
  const NodePtr& root_ptr() const noexcept { return root_; }

 private:
  std::string source_;
  NodePtr root_;
};

/// Precedence, highest first: not, comparisons, and, or. Comparisons do not
/// chain. Throws Error(kSyntax) with a 1-based column in the message.
ConditionExpression parse_expr(std::string_view text);

/// Canonical text with the minimum parentheses needed to re-parse to the same tree.
std::string print(const Node& node);

/// Evaluates to a boolean. Throws Error(kEvaluation) for unbound variables,
/// type mismatches and non-boolean results.
bool eval_expr(const ConditionExpression& expr, const VariableMap& vars);

/// Evaluates a sub-tree to a value (used by eval_expr and tests).
Value eval_node(const Node& node, const VariableMap& vars);

// Builders, mostly for tests and generators.
NodePtr make_literal(Literal lit);
NodePtr make_variable(std::string name);
NodePtr make_comparison(CompareOp op, NodePtr lhs, NodePtr rhs);
NodePtr make_not(NodePtr operand);
NodePtr make_and(NodePtr lhs, NodePtr rhs);
NodePtr make_or(NodePtr lhs, NodePtr rhs);

}  // namespace agriflow::expr
