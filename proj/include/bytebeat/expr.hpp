#pragma once

// Lexer, parser and canonical formatter for the bytebeat expression subset:
// integer/float literals, the variable t, `(int)` casts, and the C operators
//   ~ - (int)  * / %  + -  << >>  < <= > >=  == !=  &  ^  |  ?:
// No assignments, function calls or identifiers other than t.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace bytebeat {

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t pos, std::string expected, std::string found)
      : std::runtime_error("at " + std::to_string(pos) + ": expected " + expected +
                           ", found " + (found.empty() ? "end of input" : "'" + found + "'")),
        pos_(pos), expected_(std::move(expected)), found_(std::move(found)) {}

  std::size_t pos() const noexcept { return pos_; }
  const std::string& expected() const noexcept { return expected_; }
  /// Empty when the error is at end of input.
  const std::string& found() const noexcept { return found_; }

private:
  std::size_t pos_;
  std::string expected_;
  std::string found_;
};

enum class TokenKind { IntLiteral, FloatLiteral, VarT, Operator, Punct, CastInt, End };

struct Token {
  TokenKind kind;
  std::string_view text;
  std::size_t pos;
};

enum class UnaryOp { BitNot, Negate, CastInt };

enum class BinaryOp {
  Mul, Div, Mod,
  Add, Sub,
  Shl, Shr,
  Lt, Le, Gt, Ge,
  Eq, Ne,
  BitAnd,
  BitXor,
  BitOr,
};

struct Node;

/// Immutable expression tree handle. Copies share structure.
class Expr {
public:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  const Node& node() const noexcept { return *node_; }
  const Node* operator->() const noexcept { return node_.get(); }
  const Node* get() const noexcept { return node_.get(); }

private:
  std::shared_ptr<const Node> node_;
};

struct IntConst {
  std::uint64_t value;
  /// Literal did not fit in 64 bits; value is saturated.
  bool overflow = false;
  std::string spelling;
};

struct DblConst {
  double value;
  std::string spelling;
};

struct VarT {};

struct Unary {
  UnaryOp op;
  Expr operand;
};

struct Binary {
  BinaryOp op;
  Expr lhs;
  Expr rhs;
};

struct Ternary {
  Expr cond;
  Expr then_branch;
  Expr else_branch;
};

struct Node {
  std::variant<IntConst, DblConst, VarT, Unary, Binary, Ternary> data;
  std::size_t pos = 0;
};

// ---------------------------------------------------------------------------
// Construction helpers (mostly for tests and the constant folder)

inline Expr make_int(std::uint64_t v, std::size_t pos = 0) {
  return Expr(std::make_shared<const Node>(Node{IntConst{v, false, {}}, pos}));
}
inline Expr make_dbl(double v, std::size_t pos = 0) {
  return Expr(std::make_shared<const Node>(Node{DblConst{v, {}}, pos}));
}
inline Expr make_t(std::size_t pos = 0) {
  return Expr(std::make_shared<const Node>(Node{VarT{}, pos}));
}
inline Expr make_unary(UnaryOp op, Expr operand, std::size_t pos = 0) {
  return Expr(std::make_shared<const Node>(Node{Unary{op, std::move(operand)}, pos}));
}
inline Expr make_binary(BinaryOp op, Expr lhs, Expr rhs, std::size_t pos = 0) {
  return Expr(
      std::make_shared<const Node>(Node{Binary{op, std::move(lhs), std::move(rhs)}, pos}));
}
inline Expr make_ternary(Expr c, Expr a, Expr b, std::size_t pos = 0) {
  return Expr(std::make_shared<const Node>(
      Node{Ternary{std::move(c), std::move(a), std::move(b)}, pos}));
}

// ---------------------------------------------------------------------------
// Operator tables

inline std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Shl: return "<<";
    case BinaryOp::Shr: return ">>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::BitAnd: return "&";
    case BinaryOp::BitXor: return "^";
    case BinaryOp::BitOr: return "|";
  }
  return "?";
}

inline std::string_view to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::BitNot: return "~";
    case UnaryOp::Negate: return "-";
    case UnaryOp::CastInt: return "(int)";
  }
  return "?";
}

namespace precedence {
inline constexpr int kTernary = 1;
inline constexpr int kUnary = 10;
inline constexpr int kPrimary = 11;
}  // namespace precedence

/// Binding strength of a binary operator; larger binds tighter.
inline int precedence_of(BinaryOp op) {
  switch (op) {
    case BinaryOp::BitOr: return 2;
    case BinaryOp::BitXor: return 3;
    case BinaryOp::BitAnd: return 4;
    case BinaryOp::Eq:
    case BinaryOp::Ne: return 5;
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return 6;
    case BinaryOp::Shl:
    case BinaryOp::Shr: return 7;
    case BinaryOp::Add:
    case BinaryOp::Sub: return 8;
    case BinaryOp::Mul:
    case BinaryOp::Div:
    case BinaryOp::Mod: return 9;
  }
  return 0;
}

inline int precedence_of(const Expr& e) {
  struct Visitor {
    int operator()(const IntConst&) const { return precedence::kPrimary; }
    int operator()(const DblConst&) const { return precedence::kPrimary; }
    int operator()(const VarT&) const { return precedence::kPrimary; }
    int operator()(const Unary&) const { return precedence::kUnary; }
    int operator()(const Binary& b) const { return precedence_of(b.op); }
    int operator()(const Ternary&) const { return precedence::kTernary; }
  };
  return std::visit(Visitor{}, e->data);
}

// ---------------------------------------------------------------------------
// Structural equality (source positions and literal spellings are ignored)

inline bool structurally_equal(const Expr& a, const Expr& b);

namespace detail {
struct EqualVisitor {
  const Node& other;

  bool operator()(const IntConst& x) const {
    auto* y = std::get_if<IntConst>(&other.data);
    return y && x.value == y->value && x.overflow == y->overflow;
  }
  bool operator()(const DblConst& x) const {
    auto* y = std::get_if<DblConst>(&other.data);
    return y && x.value == y->value;
  }
  bool operator()(const VarT&) const { return std::holds_alternative<VarT>(other.data); }
  bool operator()(const Unary& x) const {
    auto* y = std::get_if<Unary>(&other.data);
    return y && x.op == y->op && structurally_equal(x.operand, y->operand);
  }
  bool operator()(const Binary& x) const {
    auto* y = std::get_if<Binary>(&other.data);
    return y && x.op == y->op && structurally_equal(x.lhs, y->lhs) &&
           structurally_equal(x.rhs, y->rhs);
  }
  bool operator()(const Ternary& x) const {
    auto* y = std::get_if<Ternary>(&other.data);
    return y && structurally_equal(x.cond, y->cond) &&
           structurally_equal(x.then_branch, y->then_branch) &&
           structurally_equal(x.else_branch, y->else_branch);
  }
};
}  // namespace detail

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.get() == b.get()) return true;
  return std::visit(detail::EqualVisitor{b.node()}, a->data);
}

// ---------------------------------------------------------------------------
// Lexer

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_hex_digit(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}
inline bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c) || c == '_';
}
inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

// Matches "(" ws "int" ws ")" at i; returns one past the closing paren or 0.
inline std::size_t match_cast(std::string_view s, std::size_t i) {
  std::size_t j = skip_space(s, i + 1);
  if (s.substr(j, 3) != "int") return 0;
  j += 3;
  if (j < s.size() && is_ident_char(s[j])) return 0;
  j = skip_space(s, j);
  if (j < s.size() && s[j] == ')') return j + 1;
  return 0;
}

inline std::size_t scan_number(std::string_view s, std::size_t i, bool& is_float) {
  is_float = false;
  const std::size_t start = i;
  if (s[i] == '0' && i + 1 < s.size() && (s[i + 1] == 'x' || s[i + 1] == 'X')) {
    std::size_t j = i + 2;
    while (j < s.size() && is_hex_digit(s[j])) ++j;
    if (j == i + 2) throw ParseError(j, "hexadecimal digit", std::string(s.substr(j, 1)));
    return j;
  }
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i < s.size() && s[i] == '.') {
    is_float = true;
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i;
  }
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    if (j >= s.size() || !is_digit(s[j]))
      throw ParseError(j, "exponent digits", std::string(s.substr(j, 1)));
    while (j < s.size() && is_digit(s[j])) ++j;
    is_float = true;
    i = j;
  }
  if (i == start + 1 && s[start] == '.')
    throw ParseError(start, "expression", ".");
  return i;
}

}  // namespace detail

/// Splits `source` into tokens. The returned views point into `source`; the
/// last token is always an End token positioned at source.size().
inline std::vector<Token> tokenize(std::string_view source) {
  std::vector<Token> out;
  std::size_t i = 0;
  const auto n = source.size();
  auto push = [&](TokenKind k, std::size_t len) {
    out.push_back(Token{k, source.substr(i, len), i});
    i += len;
  };
  while (true) {
    i = detail::skip_space(source, i);
    if (i >= n) break;
    const char c = source[i];
    const char next = i + 1 < n ? source[i + 1] : '\0';

    if (detail::is_digit(c) || (c == '.' && detail::is_digit(next))) {
      bool is_float = false;
      std::size_t end = detail::scan_number(source, i, is_float);
      if (end < n && detail::is_ident_char(source[end])) {
        std::size_t j = end;
        while (j < n && detail::is_ident_char(source[j])) ++j;
        throw ParseError(end, "operator", std::string(source.substr(end, j - end)));
      }
      push(is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral, end - i);
      continue;
    }
    if (detail::is_ident_char(c)) {
      std::size_t j = i;
      while (j < n && detail::is_ident_char(source[j])) ++j;
      if (j - i == 1 && c == 't') {
        push(TokenKind::VarT, 1);
        continue;
      }
      throw ParseError(i, "t, a number, or an operator", std::string(source.substr(i, j - i)));
    }
    switch (c) {
      case '(':
        if (std::size_t end = detail::match_cast(source, i)) {
          push(TokenKind::CastInt, end - i);
        } else {
          push(TokenKind::Punct, 1);
        }
        continue;
      case ')':
      case '?':
      case ':':
        push(TokenKind::Punct, 1);
        continue;
      case '&':
      case '|':
        if (next == c) throw ParseError(i + 1, "operand", std::string(1, c));
        push(TokenKind::Operator, 1);
        continue;
      case '<':
      case '>':
        if (next == c) {
          push(TokenKind::Operator, 2);
        } else if (next == '=') {
          push(TokenKind::Operator, 2);
        } else {
          push(TokenKind::Operator, 1);
        }
        continue;
      case '=':
        if (next != '=') throw ParseError(i, "operator", "=");
        push(TokenKind::Operator, 2);
        continue;
      case '!':
        if (next != '=') throw ParseError(i, "operator", "!");
        push(TokenKind::Operator, 2);
        continue;
      case '~':
      case '*':
      case '/':
      case '%':
      case '+':
      case '-':
      case '^':
        push(TokenKind::Operator, 1);
        continue;
      default:
        break;
    }
    // Report the whole UTF-8 sequence rather than a lone lead byte.
    std::size_t len = 1;
    const auto lead = static_cast<unsigned char>(c);
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    throw ParseError(i, "t, a number, or an operator", std::string(source.substr(i, len)));
  }
  out.push_back(Token{TokenKind::End, source.substr(n, 0), n});
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

inline bool binary_op_from(std::string_view text, BinaryOp& op) {
  static constexpr std::pair<std::string_view, BinaryOp> table[] = {
      {"*", BinaryOp::Mul},  {"/", BinaryOp::Div},     {"%", BinaryOp::Mod},
      {"+", BinaryOp::Add},  {"-", BinaryOp::Sub},     {"<<", BinaryOp::Shl},
      {">>", BinaryOp::Shr}, {"<", BinaryOp::Lt},      {"<=", BinaryOp::Le},
      {">", BinaryOp::Gt},   {">=", BinaryOp::Ge},     {"==", BinaryOp::Eq},
      {"!=", BinaryOp::Ne},  {"&", BinaryOp::BitAnd},  {"^", BinaryOp::BitXor},
      {"|", BinaryOp::BitOr},
  };
  for (const auto& [s, o] : table) {
    if (s == text) {
      op = o;
      return true;
    }
  }
  return false;
}

class Parser {
public:
  explicit Parser(std::string_view source) : tokens_(tokenize(source)) {}

  Expr parse_all() {
    Expr e = parse_ternary();
    if (peek().kind != TokenKind::End) fail("operator or end of input");
    return e;
  }

private:
  const Token& peek() const { return tokens_[index_]; }
  const Token& advance() { return tokens_[index_++]; }

  bool at_punct(char c) const {
    return peek().kind == TokenKind::Punct && peek().text.size() == 1 && peek().text[0] == c;
  }

  [[noreturn]] void fail(std::string expected) const {
    throw ParseError(peek().pos, std::move(expected), std::string(peek().text));
  }

  void expect_punct(char c) {
    if (!at_punct(c)) fail(std::string("'") + c + "'");
    ++index_;
  }

  Expr parse_ternary() {
    Expr cond = parse_binary(2);
    if (!at_punct('?')) return cond;
    const std::size_t pos = advance().pos;
    Expr then_branch = parse_ternary();
    expect_punct(':');
    Expr else_branch = parse_ternary();
    return make_ternary(std::move(cond), std::move(then_branch), std::move(else_branch), pos);
  }

  // Precedence climbing over the left-associative binary levels 2..9.
  Expr parse_binary(int min_prec) {
    if (min_prec > 9) return parse_unary();
    Expr lhs = parse_binary(min_prec + 1);
    while (true) {
      const Token& tok = peek();
      BinaryOp op;
      if (tok.kind != TokenKind::Operator || !binary_op_from(tok.text, op) ||
          precedence_of(op) != min_prec)
        return lhs;
      ++index_;
      Expr rhs = parse_binary(min_prec + 1);
      lhs = make_binary(op, std::move(lhs), std::move(rhs), tok.pos);
    }
  }

  Expr parse_unary() {
    const Token& tok = peek();
    if (tok.kind == TokenKind::Operator && (tok.text == "~" || tok.text == "-")) {
      ++index_;
      return make_unary(tok.text == "~" ? UnaryOp::BitNot : UnaryOp::Negate, parse_unary(),
                        tok.pos);
    }
    if (tok.kind == TokenKind::CastInt) {
      ++index_;
      return make_unary(UnaryOp::CastInt, parse_unary(), tok.pos);
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token& tok = peek();
    switch (tok.kind) {
      case TokenKind::VarT:
        ++index_;
        return make_t(tok.pos);
      case TokenKind::IntLiteral: {
        ++index_;
        return int_literal(tok);
      }
      case TokenKind::FloatLiteral: {
        ++index_;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
        // from_chars reports out_of_range for 1e999; strtod semantics give inf.
        if (ec == std::errc::result_out_of_range) v = std::strtod(std::string(tok.text).c_str(), nullptr);
        return Expr(std::make_shared<const Node>(
            Node{DblConst{v, std::string(tok.text)}, tok.pos}));
      }
      case TokenKind::Punct:
        if (at_punct('(')) {
          ++index_;
          Expr inner = parse_ternary();
          expect_punct(')');
          return inner;
        }
        break;
      default:
        break;
    }
    fail("expression");
  }

  static Expr int_literal(const Token& tok) {
    std::string_view digits = tok.text;
    int base = 10;
    if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
      digits.remove_prefix(2);
      base = 16;
    }
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
    IntConst c{v, false, std::string(tok.text)};
    if (ec == std::errc::result_out_of_range) {
      c.value = UINT64_MAX;
      c.overflow = true;
    }
    return Expr(std::make_shared<const Node>(Node{std::move(c), tok.pos}));
  }

  std::vector<Token> tokens_;
  std::size_t index_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view source) { return detail::Parser(source).parse_all(); }

// ---------------------------------------------------------------------------
// Formatter

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s == "inf") return "1e999";
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

// Keeps "a- -b" from collapsing into "a--b".
inline void append(std::string& out, std::string_view piece) {
  if (!out.empty() && !piece.empty() && out.back() == '-' && piece.front() == '-')
    out += ' ';
  out += piece;
}

inline void format_into(const Expr& e, std::string& out);

inline void format_child(const Expr& child, bool parens, std::string& out) {
  if (parens) {
    append(out, "(");
    format_into(child, out);
    append(out, ")");
  } else {
    format_into(child, out);
  }
}

struct FormatVisitor {
  std::string& out;

  void operator()(const IntConst& c) const {
    append(out, c.spelling.empty() ? std::to_string(c.value) : c.spelling);
  }
  void operator()(const DblConst& c) const {
    append(out, c.spelling.empty() ? format_double(c.value) : c.spelling);
  }
  void operator()(const VarT&) const { append(out, "t"); }
  void operator()(const Unary& u) const {
    append(out, to_string(u.op));
    format_child(u.operand, precedence_of(u.operand) < precedence::kUnary, out);
  }
  void operator()(const Binary& b) const {
    const int p = precedence_of(b.op);
    format_child(b.lhs, precedence_of(b.lhs) < p, out);
    append(out, to_string(b.op));
    format_child(b.rhs, precedence_of(b.rhs) <= p, out);
  }
  void operator()(const Ternary& t) const {
    format_child(t.cond, precedence_of(t.cond) <= precedence::kTernary, out);
    append(out, "?");
    format_into(t.then_branch, out);
    append(out, ":");
    format_into(t.else_branch, out);
  }
};

inline void format_into(const Expr& e, std::string& out) {
  std::visit(FormatVisitor{out}, e->data);
}

}  // namespace detail

/// Canonical text with the minimum parentheses needed to reparse to the same tree.
inline std::string format(const Expr& e) {
  std::string out;
  detail::format_into(e, out);
  return out;
}

}  // namespace bytebeat
