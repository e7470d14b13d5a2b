#include "agriflow/expr/condition.hpp"

#include <cctype>
#include <charconv>
#include <vector>

#include "agriflow/error.hpp"

namespace agriflow::expr {

const char* to_string(CompareOp op) noexcept {
  switch (op) {
    case CompareOp::kGt: return ">";
    case CompareOp::kGe: return ">=";
    case CompareOp::kLt: return "<";
    case CompareOp::kLe: return "<=";
    case CompareOp::kEq: return "==";
    case CompareOp::kNe: return "!=";
  }
  return "?";
}

NodePtr make_literal(Literal lit) { return std::make_shared<const Node>(Node{std::move(lit)}); }
NodePtr make_variable(std::string name) {
  return std::make_shared<const Node>(Node{VariableRef{std::move(name)}});
}
NodePtr make_comparison(CompareOp op, NodePtr lhs, NodePtr rhs) {
  return std::make_shared<const Node>(Node{Comparison{op, std::move(lhs), std::move(rhs)}});
}
NodePtr make_not(NodePtr operand) { return std::make_shared<const Node>(Node{Not{std::move(operand)}}); }
NodePtr make_and(NodePtr lhs, NodePtr rhs) {
  return std::make_shared<const Node>(Node{And{std::move(lhs), std::move(rhs)}});
}
NodePtr make_or(NodePtr lhs, NodePtr rhs) {
  return std::make_shared<const Node>(Node{Or{std::move(lhs), std::move(rhs)}});
}

bool equal(const Node& a, const Node& b) {
  if (a.kind.index() != b.kind.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.kind);
        if constexpr (std::is_same_v<T, Literal> || std::is_same_v<T, VariableRef>) {
          return x == y;
        } else if constexpr (std::is_same_v<T, Comparison>) {
          return x.op == y.op && equal(*x.lhs, *y.lhs) && equal(*x.rhs, *y.rhs);
        } else if constexpr (std::is_same_v<T, Not>) {
          return equal(*x.operand, *y.operand);
        } else {
          return equal(*x.lhs, *y.lhs) && equal(*x.rhs, *y.rhs);
        }
      },
      a.kind);
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { kIdent, kInt, kDec, kString, kTrue, kFalse, kAnd, kOr, kNot, kLParen, kRParen, kCmp, kEnd };

struct Token {
  Tok type;
  std::size_t pos;  // 0-based offset
  std::string text;
  CompareOp op = CompareOp::kEq;
  std::int64_t int_value = 0;
  double dec_value = 0;
};

[[noreturn]] void syntax_error(std::size_t pos, const std::string& what) {
  throw Error(ErrorCode::kSyntax, "condition syntax error at column " + std::to_string(pos + 1) + ": " + what);
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (ident_start(c)) {
      while (i < s.size() && ident_char(s[i])) ++i;
      std::string word(s.substr(start, i - start));
      Tok t = Tok::kIdent;
      if (word == "and") t = Tok::kAnd;
      else if (word == "or") t = Tok::kOr;
      else if (word == "not") t = Tok::kNot;
      else if (word == "true") t = Tok::kTrue;
      else if (word == "false") t = Tok::kFalse;
      out.push_back({t, start, std::move(word)});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      ++i;
      bool decimal = false;
      while (i < s.size()) {
        const char d = s[i];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++i;
        } else if (d == '.' || d == 'e' || d == 'E') {
          decimal = true;
          ++i;
          if ((d == 'e' || d == 'E') && i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        } else {
          break;
        }
      }
      const std::string_view num = s.substr(start, i - start);
      Token tok{decimal ? Tok::kDec : Tok::kInt, start, std::string(num)};
      const char* first = num.data();
      const char* last = num.data() + num.size();
      std::from_chars_result r{};
      if (decimal) r = std::from_chars(first, last, tok.dec_value);
      else r = std::from_chars(first, last, tok.int_value);
      if (r.ec != std::errc{} || r.ptr != last) syntax_error(start, "malformed number '" + tok.text + "'");
      out.push_back(std::move(tok));
      continue;
    }
    if (c == '"' || c == '\'') {
      ++i;
      std::string text;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          text += s[i + 1];
          i += 2;
        } else if (s[i] == c) {
          closed = true;
          ++i;
          break;
        } else {
          text += s[i++];
        }
      }
      if (!closed) syntax_error(start, "unterminated string literal");
      out.push_back({Tok::kString, start, std::move(text)});
      continue;
    }
    auto two = s.substr(i, 2);
    auto push_cmp = [&](CompareOp op, std::size_t len) {
      Token t{Tok::kCmp, start, std::string(s.substr(i, len))};
      t.op = op;
      out.push_back(std::move(t));
      i += len;
    };
    if (two == ">=") { push_cmp(CompareOp::kGe, 2); continue; }
    if (two == "<=") { push_cmp(CompareOp::kLe, 2); continue; }
    if (two == "==") { push_cmp(CompareOp::kEq, 2); continue; }
    if (two == "!=") { push_cmp(CompareOp::kNe, 2); continue; }
    if (two == "&&") { out.push_back({Tok::kAnd, start, "&&"}); i += 2; continue; }
    if (two == "||") { out.push_back({Tok::kOr, start, "||"}); i += 2; continue; }
    if (c == '>') { push_cmp(CompareOp::kGt, 1); continue; }
    if (c == '<') { push_cmp(CompareOp::kLt, 1); continue; }
    if (c == '!') { out.push_back({Tok::kNot, start, "!"}); ++i; continue; }
    if (c == '(') { out.push_back({Tok::kLParen, start, "("}); ++i; continue; }
    if (c == ')') { out.push_back({Tok::kRParen, start, ")"}); ++i; continue; }
    syntax_error(start, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Tok::kEnd, s.size(), ""});
  return out;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  NodePtr parse() {
    NodePtr n = parse_or();
    if (peek().type != Tok::kEnd) syntax_error(peek().pos, "unexpected '" + peek().text + "'");
    return n;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }

  NodePtr parse_or() {
    NodePtr lhs = parse_and();
    while (peek().type == Tok::kOr) {
      take();
      lhs = make_or(std::move(lhs), parse_and());
    }
    return lhs;
  }

  NodePtr parse_and() {
    NodePtr lhs = parse_comparison();
    while (peek().type == Tok::kAnd) {
      take();
      lhs = make_and(std::move(lhs), parse_comparison());
    }
    return lhs;
  }

  NodePtr parse_comparison() {
    NodePtr lhs = parse_unary();
    if (peek().type != Tok::kCmp) return lhs;
    const CompareOp op = take().op;
    NodePtr rhs = parse_unary();
    if (peek().type == Tok::kCmp) syntax_error(peek().pos, "chained comparison is not allowed");
    return make_comparison(op, std::move(lhs), std::move(rhs));
  }

  NodePtr parse_unary() {
    if (peek().type == Tok::kNot) {
      take();
      return make_not(parse_unary());
    }
    return parse_primary();
  }

  NodePtr parse_primary() {
    const Token& t = take();
    switch (t.type) {
      case Tok::kIdent: return make_variable(t.text);
      case Tok::kInt: return make_literal(Literal{t.int_value});
      case Tok::kDec: return make_literal(Literal{t.dec_value});
      case Tok::kString: return make_literal(Literal{t.text});
      case Tok::kTrue: return make_literal(Literal{true});
      case Tok::kFalse: return make_literal(Literal{false});
      case Tok::kLParen: {
        NodePtr inner = parse_or();
        if (peek().type != Tok::kRParen) syntax_error(peek().pos, "expected ')'");
        take();
        return inner;
      }
      case Tok::kEnd: syntax_error(t.pos, "unexpected end of expression");
      default: syntax_error(t.pos, "unexpected '" + t.text + "'");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

int precedence(const Node& n) {
  return std::visit(
      [](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Or>) return 1;
        else if constexpr (std::is_same_v<T, And>) return 2;
        else if constexpr (std::is_same_v<T, Comparison>) return 3;
        else if constexpr (std::is_same_v<T, Not>) return 4;
        else return 5;
      },
      n.kind);
}

std::string print_literal(const Literal& lit) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_decimal(v);
        else {
          std::string out = "\"";
          for (char c : v) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
          }
          return out + "\"";
        }
      },
      lit.value);
}

std::string wrap(const Node& n, bool parens) { return parens ? "(" + print(n) + ")" : print(n); }

Value literal_value(const Literal& lit) {
  return std::visit([](const auto& v) -> Value { return v; }, lit.value);
}

const char* type_name(const Value& v) { return to_string(type_of(v)); }

bool as_bool(const Value& v, const char* where) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw Error(ErrorCode::kEvaluation, std::string("type mismatch: '") + where + "' expects boolean, got " + type_name(v));
}

template <typename T>
bool compare(CompareOp op, const T& a, const T& b) {
  switch (op) {
    case CompareOp::kGt: return a > b;
    case CompareOp::kGe: return a >= b;
    case CompareOp::kLt: return a < b;
    case CompareOp::kLe: return a <= b;
    case CompareOp::kEq: return a == b;
    case CompareOp::kNe: return a != b;
  }
  return false;
}

bool is_number(const Value& v) { return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v); }
double as_double(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

bool eval_comparison(CompareOp op, const Value& a, const Value& b) {
  if (is_number(a) && is_number(b)) {
    if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b)) {
      return compare(op, std::get<std::int64_t>(a), std::get<std::int64_t>(b));
    }
    return compare(op, as_double(a), as_double(b));
  }
  if (a.index() != b.index()) {
    throw Error(ErrorCode::kEvaluation, std::string("type mismatch: cannot compare ") + type_name(a) + " " +
                                            to_string(op) + " " + type_name(b));
  }
  if (op != CompareOp::kEq && op != CompareOp::kNe) {
    throw Error(ErrorCode::kEvaluation, std::string("type mismatch: ") + type_name(a) + " supports only == and !=");
  }
  const bool same = a == b;
  return op == CompareOp::kEq ? same : !same;
}

}  // namespace

ConditionExpression parse_expr(std::string_view text) {
  Parser parser(lex(text));
  return ConditionExpression(std::string(text), parser.parse());
}

std::string print(const Node& node) {
  return std::visit(
      [&](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return print_literal(x);
        } else if constexpr (std::is_same_v<T, VariableRef>) {
          return x.name;
        } else if constexpr (std::is_same_v<T, Comparison>) {
          return wrap(*x.lhs, precedence(*x.lhs) <= 3) + " " + to_string(x.op) + " " +
                 wrap(*x.rhs, precedence(*x.rhs) <= 3);
        } else if constexpr (std::is_same_v<T, Not>) {
          return "not " + wrap(*x.operand, precedence(*x.operand) < 4);
        } else if constexpr (std::is_same_v<T, And>) {
          return wrap(*x.lhs, precedence(*x.lhs) < 2) + " and " + wrap(*x.rhs, precedence(*x.rhs) <= 2);
        } else {
          return wrap(*x.lhs, precedence(*x.lhs) < 1) + " or " + wrap(*x.rhs, precedence(*x.rhs) <= 1);
        }
      },
      node.kind);
}

Value eval_node(const Node& node, const VariableMap& vars) {
  return std::visit(
      [&](const auto& x) -> Value {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return literal_value(x);
        } else if constexpr (std::is_same_v<T, VariableRef>) {
          auto it = vars.find(x.name);
          if (it == vars.end()) throw Error(ErrorCode::kEvaluation, "unbound variable '" + x.name + "'");
          return it->second;
        } else if constexpr (std::is_same_v<T, Comparison>) {
          return eval_comparison(x.op, eval_node(*x.lhs, vars), eval_node(*x.rhs, vars));
        } else if constexpr (std::is_same_v<T, Not>) {
          return !as_bool(eval_node(*x.operand, vars), "not");
        } else if constexpr (std::is_same_v<T, And>) {
          if (!as_bool(eval_node(*x.lhs, vars), "and")) return false;
          return as_bool(eval_node(*x.rhs, vars), "and");
        } else {
          if (as_bool(eval_node(*x.lhs, vars), "or")) return true;
          return as_bool(eval_node(*x.rhs, vars), "or");
        }
      },
      node.kind);
}

bool eval_expr(const ConditionExpression& expr, const VariableMap& vars) {
  const Value result = eval_node(expr.root(), vars);
  if (const bool* b = std::get_if<bool>(&result)) return *b;
  throw Error(ErrorCode::kEvaluation, "condition '" + expr.source_text() + "' evaluates to " +
                                          to_string(type_of(result)) + ", not boolean");
}

}  // namespace agriflow::expr
