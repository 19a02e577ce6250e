#pragma once

// Numeric semantics for bytebeat expressions.
//
// Three evaluation modes are supported:
//   C32  two's-complement 32-bit ints, doubles only from float literals
//   C64  the same with 64-bit ints
//   JS   every value is a double; bitwise operators go through ToInt32
//
// Every operation is total. Integer division and modulus by zero yield 0,
// INT_MIN / -1 wraps to INT_MIN, shift counts are masked to width-1 and
// right shifts are arithmetic. Expressions are evaluated either by the
// tree-walking oracle (eval_ast) or by compiling to a stack program and
// running it on the VM (eval_sample, render_range); both must agree
// byte-for-byte.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bytebeat/expr.hpp"
#include "bytebeat/sample_chunk.hpp"

namespace bytebeat {

enum class Mode { C32, C64, JS };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::C32: return "c32";
    case Mode::C64: return "c64";
    case Mode::JS: return "js";
  }
  return "?";
}

inline std::optional<Mode> mode_from_string(std::string_view s) {
  if (s == "c32") return Mode::C32;
  if (s == "c64") return Mode::C64;
  if (s == "js") return Mode::JS;
  return std::nullopt;
}

inline constexpr std::array<Mode, 3> kAllModes = {Mode::C32, Mode::C64, Mode::JS};

/// Integer width used by a mode's integer kernels. JS bitwise ops work on int32.
inline constexpr int int_width(Mode m) { return m == Mode::C64 ? 64 : 32; }

enum class ValueKind { Int, Dbl };

class Value {
public:
  static Value integer(std::int64_t v) { return Value(ValueKind::Int, v, 0.0); }
  static Value dbl(double v) { return Value(ValueKind::Dbl, 0, v); }

  ValueKind kind() const noexcept { return kind_; }
  bool is_int() const noexcept { return kind_ == ValueKind::Int; }
  std::int64_t as_int() const noexcept { return i_; }
  double as_double() const noexcept { return is_int() ? static_cast<double>(i_) : d_; }

  /// Bitwise identity for doubles, so NaN == NaN here.
  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return false;
    if (a.is_int()) return a.i_ == b.i_;
    return std::bit_cast<std::uint64_t>(a.d_) == std::bit_cast<std::uint64_t>(b.d_);
  }

private:
  Value(ValueKind k, std::int64_t i, double d) : kind_(k), i_(i), d_(d) {}
  ValueKind kind_;
  std::int64_t i_;
  double d_;
};

class TypeError : public std::runtime_error {
public:
  TypeError(std::size_t pos, const std::string& msg)
      : std::runtime_error(msg), pos_(pos) {}
  std::size_t pos() const noexcept { return pos_; }

private:
  std::size_t pos_;
};

// ---------------------------------------------------------------------------
// Coercions

/// ECMAScript ToInt32: NaN and infinities map to 0, everything else is
/// truncated toward zero and reduced modulo 2^32 into the signed range.
inline std::int32_t to_int32(double x) {
  if (!std::isfinite(x)) return 0;
  double r = std::fmod(std::trunc(x), 4294967296.0);
  if (r < 0) r += 4294967296.0;
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(r));
}

/// The 64-bit analogue of to_int32, used by `(int)` in C64 mode.
inline std::int64_t to_int64_wrap(double x) {
  if (!std::isfinite(x)) return 0;
  const double tx = std::trunc(x);
  if (tx >= -9223372036854775808.0 && tx < 9223372036854775808.0)
    return static_cast<std::int64_t>(tx);
  double r = std::fmod(tx, 18446744073709551616.0);
  if (r < 0) r += 18446744073709551616.0;
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(r));
}

/// Reduces an integer to the mode's width, sign-extended into int64.
inline std::int64_t wrap_to_width(std::uint64_t v, int width) {
  if (width == 32) return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
  return static_cast<std::int64_t>(v);
}

inline bool truthy(const Value& v) {
  if (v.is_int()) return v.as_int() != 0;
  const double d = v.as_double();
  return d != 0.0 && !std::isnan(d);
}

/// Low eight bits of a result, as written to the PCM stream.
inline std::uint8_t quantize(const Value& v) {
  if (v.is_int()) return static_cast<std::uint8_t>(v.as_int());
  return static_cast<std::uint8_t>(to_int32(v.as_double()));
}

// ---------------------------------------------------------------------------
// Scalar kernels. Operands of C-mode arithmetic undergo the usual arithmetic
// conversion (an int meeting a double becomes a double) before dispatch.

namespace detail {

inline Value int_binary(BinaryOp op, std::int64_t a, std::int64_t b, int width) {
  const auto ua = static_cast<std::uint64_t>(a);
  const auto ub = static_cast<std::uint64_t>(b);
  const std::int64_t int_min = width == 32 ? std::numeric_limits<std::int32_t>::min()
                                           : std::numeric_limits<std::int64_t>::min();
  const unsigned count = static_cast<unsigned>(ub & static_cast<std::uint64_t>(width - 1));
  switch (op) {
    case BinaryOp::Add: return Value::integer(wrap_to_width(ua + ub, width));
    case BinaryOp::Sub: return Value::integer(wrap_to_width(ua - ub, width));
    case BinaryOp::Mul: return Value::integer(wrap_to_width(ua * ub, width));
    case BinaryOp::Div:
      if (b == 0) return Value::integer(0);
      if (a == int_min && b == -1) return Value::integer(int_min);
      return Value::integer(a / b);
    case BinaryOp::Mod:
      if (b == 0) return Value::integer(0);
      if (a == int_min && b == -1) return Value::integer(0);
      return Value::integer(a % b);
    case BinaryOp::Shl: return Value::integer(wrap_to_width(ua << count, width));
    case BinaryOp::Shr: return Value::integer(a >> count);
    case BinaryOp::Lt: return Value::integer(a < b);
    case BinaryOp::Le: return Value::integer(a <= b);
    case BinaryOp::Gt: return Value::integer(a > b);
    case BinaryOp::Ge: return Value::integer(a >= b);
    case BinaryOp::Eq: return Value::integer(a == b);
    case BinaryOp::Ne: return Value::integer(a != b);
    case BinaryOp::BitAnd: return Value::integer(a & b);
    case BinaryOp::BitXor: return Value::integer(a ^ b);
    case BinaryOp::BitOr: return Value::integer(a | b);
  }
  return Value::integer(0);
}

inline bool is_bitwise(BinaryOp op) {
  return op == BinaryOp::Shl || op == BinaryOp::Shr || op == BinaryOp::BitAnd ||
         op == BinaryOp::BitXor || op == BinaryOp::BitOr;
}

inline bool is_comparison(BinaryOp op) {
  return op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Gt ||
         op == BinaryOp::Ge || op == BinaryOp::Eq || op == BinaryOp::Ne;
}

inline Value dbl_binary(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::Add: return Value::dbl(a + b);
    case BinaryOp::Sub: return Value::dbl(a - b);
    case BinaryOp::Mul: return Value::dbl(a * b);
    case BinaryOp::Div: return Value::dbl(a / b);
    case BinaryOp::Mod: return Value::dbl(std::fmod(a, b));
    case BinaryOp::Lt: return Value::integer(a < b);
    case BinaryOp::Le: return Value::integer(a <= b);
    case BinaryOp::Gt: return Value::integer(a > b);
    case BinaryOp::Ge: return Value::integer(a >= b);
    case BinaryOp::Eq: return Value::integer(a == b);
    case BinaryOp::Ne: return Value::integer(a != b);
    default: break;
  }
  // Bitwise ops on doubles never typecheck in C modes.
  return Value::integer(0);
}

}  // namespace detail

inline Value scalar_kernel(BinaryOp op, const Value& a, const Value& b, Mode mode) {
  if (mode == Mode::JS) {
    const double x = a.as_double();
    const double y = b.as_double();
    if (detail::is_bitwise(op)) {
      return Value::dbl(static_cast<double>(
          detail::int_binary(op, to_int32(x), to_int32(y), 32).as_int()));
    }
    Value r = detail::dbl_binary(op, x, y);
    return r.is_int() ? Value::dbl(static_cast<double>(r.as_int())) : r;
  }
  if (a.is_int() && b.is_int()) return detail::int_binary(op, a.as_int(), b.as_int(), int_width(mode));
  return detail::dbl_binary(op, a.as_double(), b.as_double());
}

inline Value unary_kernel(UnaryOp op, const Value& a, Mode mode) {
  if (mode == Mode::JS) {
    switch (op) {
      case UnaryOp::BitNot: return Value::dbl(static_cast<double>(~to_int32(a.as_double())));
      case UnaryOp::Negate: return Value::dbl(-a.as_double());
      case UnaryOp::CastInt: return Value::dbl(static_cast<double>(to_int32(a.as_double())));
    }
  }
  const int width = int_width(mode);
  switch (op) {
    case UnaryOp::BitNot: return Value::integer(~a.as_int());
    case UnaryOp::Negate:
      if (!a.is_int()) return Value::dbl(-a.as_double());
      return Value::integer(wrap_to_width(0 - static_cast<std::uint64_t>(a.as_int()), width));
    case UnaryOp::CastInt:
      if (a.is_int()) return a;
      return Value::integer(width == 32 ? to_int32(a.as_double()) : to_int64_wrap(a.as_double()));
  }
  return a;
}

/// The counter t as seen by an expression in the given mode.
inline Value load_t(std::uint64_t t, Mode mode) {
  if (mode == Mode::JS) return Value::dbl(static_cast<double>(t));
  return Value::integer(wrap_to_width(t, int_width(mode)));
}

// ---------------------------------------------------------------------------
// Typechecking

/// An expression that passed typecheck for a specific mode.
class TypedExpr {
public:
  const Expr& expr() const noexcept { return expr_; }
  Mode mode() const noexcept { return mode_; }
  ValueKind result_kind() const noexcept { return kind_; }

private:
  TypedExpr(Expr e, Mode m, ValueKind k) : expr_(std::move(e)), mode_(m), kind_(k) {}
  friend TypedExpr typecheck(const Expr&, Mode);
  Expr expr_;
  Mode mode_;
  ValueKind kind_;
};

namespace detail {

inline Value literal_value(const IntConst& c, Mode mode) {
  if (mode == Mode::JS) {
    if (c.overflow && !c.spelling.empty())
      return Value::dbl(std::strtod(c.spelling.c_str(), nullptr));
    return Value::dbl(static_cast<double>(c.value));
  }
  return Value::integer(wrap_to_width(c.value, int_width(mode)));
}

struct TypeVisitor {
  Mode mode;
  std::size_t pos;

  ValueKind check(const Expr& e) const { return std::visit(TypeVisitor{mode, e->pos}, e->data); }

  ValueKind operator()(const IntConst& c) const {
    if (mode == Mode::JS) return ValueKind::Dbl;
    if (c.overflow || (mode == Mode::C32 && c.value > 0xFFFFFFFFull))
      throw TypeError(pos, "integer literal out of range for " + std::string(to_string(mode)));
    return ValueKind::Int;
  }
  ValueKind operator()(const DblConst&) const { return ValueKind::Dbl; }
  ValueKind operator()(const VarT&) const {
    return mode == Mode::JS ? ValueKind::Dbl : ValueKind::Int;
  }
  ValueKind operator()(const Unary& u) const {
    const ValueKind k = check(u.operand);
    if (mode == Mode::JS) return ValueKind::Dbl;
    switch (u.op) {
      case UnaryOp::BitNot:
        if (k == ValueKind::Dbl) throw TypeError(pos, "~ on double");
        return ValueKind::Int;
      case UnaryOp::Negate: return k;
      case UnaryOp::CastInt: return ValueKind::Int;
    }
    return k;
  }
  ValueKind operator()(const Binary& b) const {
    const ValueKind l = check(b.lhs);
    const ValueKind r = check(b.rhs);
    if (mode == Mode::JS) return ValueKind::Dbl;
    const bool any_dbl = l == ValueKind::Dbl || r == ValueKind::Dbl;
    if (b.op == BinaryOp::Mod && any_dbl) throw TypeError(pos, "% on double");
    if (is_bitwise(b.op) && any_dbl)
      throw TypeError(pos, std::string(bytebeat::to_string(b.op)) + " on double");
    if (is_comparison(b.op)) return ValueKind::Int;
    return any_dbl ? ValueKind::Dbl : ValueKind::Int;
  }
  ValueKind operator()(const Ternary& t) const {
    check(t.cond);
    const ValueKind a = check(t.then_branch);
    const ValueKind b = check(t.else_branch);
    if (mode == Mode::JS) return ValueKind::Dbl;
    return a == ValueKind::Dbl || b == ValueKind::Dbl ? ValueKind::Dbl : ValueKind::Int;
  }
};

inline ValueKind kind_of(const Expr& e, Mode mode) {
  return std::visit(TypeVisitor{mode, e->pos}, e->data);
}

}  // namespace detail

/// Checks mode-specific legality: in C modes `%`, `~`, shifts and bitwise
/// operators reject double operands and literals must fit the int width.
/// Every expression typechecks in JS mode.
inline TypedExpr typecheck(const Expr& e, Mode mode) {
  return TypedExpr(e, mode, detail::kind_of(e, mode));
}

// ---------------------------------------------------------------------------
// Tree-walking oracle

namespace detail {

struct EvalVisitor {
  Mode mode;
  std::uint64_t t;

  Value eval(const Expr& e) const { return std::visit(*this, e->data); }

  Value operator()(const IntConst& c) const { return literal_value(c, mode); }
  Value operator()(const DblConst& c) const { return Value::dbl(c.value); }
  Value operator()(const VarT&) const { return load_t(t, mode); }
  Value operator()(const Unary& u) const { return unary_kernel(u.op, eval(u.operand), mode); }
  Value operator()(const Binary& b) const {
    return scalar_kernel(b.op, eval(b.lhs), eval(b.rhs), mode);
  }
  Value operator()(const Ternary& n) const {
    // C's ?: converts both arms to a common type.
    const bool cond = truthy(eval(n.cond));
    Value v = eval(cond ? n.then_branch : n.else_branch);
    if (mode != Mode::JS && v.is_int() &&
        (kind_of(n.then_branch, mode) == ValueKind::Dbl ||
         kind_of(n.else_branch, mode) == ValueKind::Dbl))
      return Value::dbl(static_cast<double>(v.as_int()));
    return v;
  }
};

}  // namespace detail

/// Evaluates the expression at counter value t, before byte quantization.
inline Value eval_ast(const TypedExpr& e, std::uint64_t t) {
  return detail::EvalVisitor{e.mode(), t}.eval(e.expr());
}

// ---------------------------------------------------------------------------
// Stack programs

enum class OpCode : std::uint8_t {
  PushI, PushD,
  LoadTI,   // t reduced to the int width
  LoadTD,   // t as an exact double
  IntToDbl, DblToInt,
  NegI, NotI, NegD,
  AddI, SubI, MulI, DivI, ModI, ShlI, ShrI, AndI, OrI, XorI,
  AddD, SubD, MulD, DivD, ModD,
  LtI, LeI, GtI, GeI, EqI, NeI,
  LtD, LeD, GtD, GeD, EqD, NeD,
  SelectI,  // [cond:int, a, b] -> cond ? a : b
  SelectD,  // [cond:dbl, a, b] -> cond ? a : b
};

/// Net stack effect of an instruction.
inline int stack_effect(OpCode op) {
  switch (op) {
    case OpCode::PushI:
    case OpCode::PushD:
    case OpCode::LoadTI:
    case OpCode::LoadTD: return 1;
    case OpCode::IntToDbl:
    case OpCode::DblToInt:
    case OpCode::NegI:
    case OpCode::NotI:
    case OpCode::NegD: return 0;
    case OpCode::SelectI:
    case OpCode::SelectD: return -2;
    default: return -1;
  }
}

/// Number of operands an instruction pops.
inline int stack_inputs(OpCode op) {
  switch (op) {
    case OpCode::PushI:
    case OpCode::PushD:
    case OpCode::LoadTI:
    case OpCode::LoadTD: return 0;
    case OpCode::IntToDbl:
    case OpCode::DblToInt:
    case OpCode::NegI:
    case OpCode::NotI:
    case OpCode::NegD: return 1;
    case OpCode::SelectI:
    case OpCode::SelectD: return 3;
    default: return 2;
  }
}

struct Instr {
  OpCode op;
  std::int64_t imm_i = 0;
  double imm_d = 0.0;

  friend bool operator==(const Instr& a, const Instr& b) {
    return a.op == b.op && a.imm_i == b.imm_i &&
           std::bit_cast<std::uint64_t>(a.imm_d) == std::bit_cast<std::uint64_t>(b.imm_d);
  }
};

/// Compiled, immutable postfix form of a typed expression.
class Program {
public:
  Mode mode() const noexcept { return mode_; }
  std::span<const Instr> code() const noexcept { return code_; }
  std::size_t max_stack() const noexcept { return max_stack_; }
  ValueKind result_kind() const noexcept { return result_kind_; }

private:
  friend class ProgramBuilder;
  Mode mode_ = Mode::C32;
  std::vector<Instr> code_;
  std::size_t max_stack_ = 0;
  ValueKind result_kind_ = ValueKind::Int;
};

struct CompileOptions {
  bool fold_constants = true;
};

class ProgramBuilder {
public:
  ProgramBuilder(Mode mode, CompileOptions opts) : mode_(mode), opts_(opts) {}

  Program build(const TypedExpr& e) {
    Program p;
    p.mode_ = mode_;
    p.result_kind_ = emit(e.expr());
    p.code_ = std::move(code_);
    p.max_stack_ = max_depth_;
    return p;
  }

private:
  void push(Instr in) {
    // In JS mode int32 -> double -> int32 is the identity.
    if (mode_ == Mode::JS && in.op == OpCode::DblToInt && !code_.empty()) {
      Instr& last = code_.back();
      if (last.op == OpCode::IntToDbl) {
        code_.pop_back();
        return;
      }
      if (last.op == OpCode::PushD) {
        last = Instr{OpCode::PushI, to_int32(last.imm_d)};
        return;
      }
    }
    code_.push_back(in);
    depth_ += stack_effect(in.op);
    if (depth_ > max_depth_) max_depth_ = depth_;
  }

  void emit_op(OpCode op) { push(Instr{op}); }

  void convert(ValueKind from, ValueKind to) {
    if (from == to) return;
    emit_op(to == ValueKind::Dbl ? OpCode::IntToDbl : OpCode::DblToInt);
  }

  static bool is_leaf(const Expr& e) {
    return std::holds_alternative<IntConst>(e->data) || std::holds_alternative<DblConst>(e->data) ||
           std::holds_alternative<VarT>(e->data);
  }

  static bool depends_on_t(const Expr& e) {
    struct V {
      bool operator()(const IntConst&) const { return false; }
      bool operator()(const DblConst&) const { return false; }
      bool operator()(const VarT&) const { return true; }
      bool operator()(const Unary& u) const { return depends_on_t(u.operand); }
      bool operator()(const Binary& b) const { return depends_on_t(b.lhs) || depends_on_t(b.rhs); }
      bool operator()(const Ternary& n) const {
        return depends_on_t(n.cond) || depends_on_t(n.then_branch) ||
               depends_on_t(n.else_branch);
      }
    };
    return std::visit(V{}, e->data);
  }

  void push_value(const Value& v) {
    if (v.is_int()) push(Instr{OpCode::PushI, v.as_int()});
    else push(Instr{OpCode::PushD, 0, v.as_double()});
  }

  ValueKind emit(const Expr& e) {
    if (opts_.fold_constants && !is_leaf(e) && !depends_on_t(e)) {
      const Value v = detail::EvalVisitor{mode_, 0}.eval(e);
      push_value(v);
      return v.kind();
    }
    return std::visit([&](const auto& n) { return emit_node(n); }, e->data);
  }

  ValueKind emit_node(const IntConst& c) {
    const Value v = detail::literal_value(c, mode_);
    push_value(v);
    return v.kind();
  }
  ValueKind emit_node(const DblConst& c) {
    push(Instr{OpCode::PushD, 0, c.value});
    return ValueKind::Dbl;
  }
  ValueKind emit_node(const VarT&) {
    if (mode_ == Mode::JS) {
      emit_op(OpCode::LoadTD);
      return ValueKind::Dbl;
    }
    emit_op(OpCode::LoadTI);
    return ValueKind::Int;
  }

  ValueKind emit_node(const Unary& u) {
    const ValueKind k = emit(u.operand);
    if (mode_ == Mode::JS) {
      switch (u.op) {
        case UnaryOp::Negate: emit_op(OpCode::NegD); break;
        case UnaryOp::BitNot:
          emit_op(OpCode::DblToInt);
          emit_op(OpCode::NotI);
          emit_op(OpCode::IntToDbl);
          break;
        case UnaryOp::CastInt:
          emit_op(OpCode::DblToInt);
          emit_op(OpCode::IntToDbl);
          break;
      }
      return ValueKind::Dbl;
    }
    switch (u.op) {
      case UnaryOp::Negate:
        emit_op(k == ValueKind::Int ? OpCode::NegI : OpCode::NegD);
        return k;
      case UnaryOp::BitNot: emit_op(OpCode::NotI); return ValueKind::Int;
      case UnaryOp::CastInt: convert(k, ValueKind::Int); return ValueKind::Int;
    }
    return k;
  }

  static OpCode int_opcode(BinaryOp op) {
    switch (op) {
      case BinaryOp::Mul: return OpCode::MulI;
      case BinaryOp::Div: return OpCode::DivI;
      case BinaryOp::Mod: return OpCode::ModI;
      case BinaryOp::Add: return OpCode::AddI;
      case BinaryOp::Sub: return OpCode::SubI;
      case BinaryOp::Shl: return OpCode::ShlI;
      case BinaryOp::Shr: return OpCode::ShrI;
      case BinaryOp::Lt: return OpCode::LtI;
      case BinaryOp::Le: return OpCode::LeI;
      case BinaryOp::Gt: return OpCode::GtI;
      case BinaryOp::Ge: return OpCode::GeI;
      case BinaryOp::Eq: return OpCode::EqI;
      case BinaryOp::Ne: return OpCode::NeI;
      case BinaryOp::BitAnd: return OpCode::AndI;
      case BinaryOp::BitXor: return OpCode::XorI;
      case BinaryOp::BitOr: return OpCode::OrI;
    }
    return OpCode::AddI;
  }

  static OpCode dbl_opcode(BinaryOp op) {
    switch (op) {
      case BinaryOp::Mul: return OpCode::MulD;
      case BinaryOp::Div: return OpCode::DivD;
      case BinaryOp::Mod: return OpCode::ModD;
      case BinaryOp::Add: return OpCode::AddD;
      case BinaryOp::Sub: return OpCode::SubD;
      case BinaryOp::Lt: return OpCode::LtD;
      case BinaryOp::Le: return OpCode::LeD;
      case BinaryOp::Gt: return OpCode::GtD;
      case BinaryOp::Ge: return OpCode::GeD;
      case BinaryOp::Eq: return OpCode::EqD;
      case BinaryOp::Ne: return OpCode::NeD;
      default: break;
    }
    return OpCode::AddD;
  }

  ValueKind emit_node(const Binary& b) {
    if (mode_ == Mode::JS) {
      if (detail::is_bitwise(b.op)) {
        emit(b.lhs);
        emit_op(OpCode::DblToInt);
        emit(b.rhs);
        emit_op(OpCode::DblToInt);
        emit_op(int_opcode(b.op));
        emit_op(OpCode::IntToDbl);
        return ValueKind::Dbl;
      }
      emit(b.lhs);
      emit(b.rhs);
      emit_op(dbl_opcode(b.op));
      if (detail::is_comparison(b.op)) emit_op(OpCode::IntToDbl);
      return ValueKind::Dbl;
    }
    const ValueKind lk = detail::kind_of(b.lhs, mode_);
    const ValueKind rk = detail::kind_of(b.rhs, mode_);
    const ValueKind operand_kind =
        lk == ValueKind::Dbl || rk == ValueKind::Dbl ? ValueKind::Dbl : ValueKind::Int;
    convert(emit(b.lhs), operand_kind);
    convert(emit(b.rhs), operand_kind);
    if (operand_kind == ValueKind::Int) {
      emit_op(int_opcode(b.op));
      return ValueKind::Int;
    }
    emit_op(dbl_opcode(b.op));
    return detail::is_comparison(b.op) ? ValueKind::Int : ValueKind::Dbl;
  }

  ValueKind emit_node(const Ternary& n) {
    const ValueKind ck = emit(n.cond);
    ValueKind result = ValueKind::Dbl;
    if (mode_ != Mode::JS) {
      const bool any_dbl = detail::kind_of(n.then_branch, mode_) == ValueKind::Dbl ||
                           detail::kind_of(n.else_branch, mode_) == ValueKind::Dbl;
      result = any_dbl ? ValueKind::Dbl : ValueKind::Int;
    }
    convert(emit(n.then_branch), result);
    convert(emit(n.else_branch), result);
    emit_op(ck == ValueKind::Int ? OpCode::SelectI : OpCode::SelectD);
    return result;
  }

  Mode mode_;
  CompileOptions opts_;
  std::vector<Instr> code_;
  std::size_t depth_ = 0;
  std::size_t max_depth_ = 0;
};

inline Program compile(const TypedExpr& e, CompileOptions opts = {}) {
  return ProgramBuilder(e.mode(), opts).build(e);
}

/// Parses, typechecks and compiles in one step.
inline Program compile(std::string_view source, Mode mode, CompileOptions opts = {}) {
  return compile(typecheck(parse(source), mode), opts);
}

// ---------------------------------------------------------------------------
// VM

namespace detail {

union Slot {
  std::int64_t i;
  double d;
};

template <int Width>
inline std::int64_t wrap(std::uint64_t v) {
  if constexpr (Width == 32) return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
  else return static_cast<std::int64_t>(v);
}

/// Evaluates the program for `len` consecutive samples at once. The stack is
/// column-major: stack depth d occupies slots [d * stride, d * stride + len).
template <int Width>
inline void run_block(std::span<const Instr> code, ValueKind result, std::uint64_t t0,
                      std::size_t len, std::uint8_t* out, Slot* stack, std::size_t stride) {
  constexpr std::uint64_t kMask = Width - 1;
  std::size_t depth = 0;
  const auto row = [stack, stride](std::size_t d) { return stack + d * stride; };

#define BB_LANES(BODY) \
  for (std::size_t k = 0; k < len; ++k) { BODY; }
#define BB_PUSH(BODY)            \
  {                              \
    Slot* r = row(depth++);      \
    BB_LANES(BODY)               \
    break;                       \
  }
#define BB_UNARY(BODY)           \
  {                              \
    Slot* r = row(depth - 1);    \
    BB_LANES(BODY)               \
    break;                       \
  }
#define BB_BINARY(BODY)                \
  {                                    \
    Slot* x = row(depth - 2);          \
    const Slot* y = row(depth - 1);    \
    BB_LANES(BODY)                     \
    --depth;                           \
    break;                             \
  }

  for (const Instr& ins : code) {
    switch (ins.op) {
      case OpCode::PushI: BB_PUSH(r[k].i = ins.imm_i)
      case OpCode::PushD: BB_PUSH(r[k].d = ins.imm_d)
      case OpCode::LoadTI: BB_PUSH(r[k].i = wrap<Width>(t0 + k))
      case OpCode::LoadTD: BB_PUSH(r[k].d = static_cast<double>(t0 + k))
      case OpCode::IntToDbl: BB_UNARY(r[k].d = static_cast<double>(r[k].i))
      case OpCode::DblToInt:
        if constexpr (Width == 32) BB_UNARY(r[k].i = to_int32(r[k].d))
        else BB_UNARY(r[k].i = to_int64_wrap(r[k].d))
      case OpCode::NegI: BB_UNARY(r[k].i = wrap<Width>(0 - static_cast<std::uint64_t>(r[k].i)))
      case OpCode::NotI: BB_UNARY(r[k].i = ~r[k].i)
      case OpCode::NegD: BB_UNARY(r[k].d = -r[k].d)

#define BB_WRAPPED(OP, EXPR)                                     \
  case OpCode::OP:                                               \
    BB_BINARY(const auto a = static_cast<std::uint64_t>(x[k].i); \
              const auto b = static_cast<std::uint64_t>(y[k].i); \
              x[k].i = wrap<Width>(EXPR))
      BB_WRAPPED(AddI, a + b)
      BB_WRAPPED(SubI, a - b)
      BB_WRAPPED(MulI, a * b)
      BB_WRAPPED(ShlI, a << (b & kMask))
#undef BB_WRAPPED

      case OpCode::DivI:
        BB_BINARY(const std::int64_t a = x[k].i; const std::int64_t b = y[k].i;
                  x[k].i = b == 0    ? 0
                           : b == -1 ? wrap<Width>(0 - static_cast<std::uint64_t>(a))
                                     : a / b)
      case OpCode::ModI:
        BB_BINARY(const std::int64_t a = x[k].i; const std::int64_t b = y[k].i;
                  x[k].i = (b == 0 || b == -1) ? 0 : a % b)
      case OpCode::ShrI:
        BB_BINARY(x[k].i = x[k].i >> (static_cast<std::uint64_t>(y[k].i) & kMask))
      case OpCode::AndI: BB_BINARY(x[k].i = x[k].i & y[k].i)
      case OpCode::OrI: BB_BINARY(x[k].i = x[k].i | y[k].i)
      case OpCode::XorI: BB_BINARY(x[k].i = x[k].i ^ y[k].i)
      case OpCode::AddD: BB_BINARY(x[k].d = x[k].d + y[k].d)
      case OpCode::SubD: BB_BINARY(x[k].d = x[k].d - y[k].d)
      case OpCode::MulD: BB_BINARY(x[k].d = x[k].d * y[k].d)
      case OpCode::DivD: BB_BINARY(x[k].d = x[k].d / y[k].d)
      case OpCode::ModD: BB_BINARY(x[k].d = std::fmod(x[k].d, y[k].d))

#define BB_COMPARE(OP, FIELD, CMP) \
  case OpCode::OP: BB_BINARY(x[k].i = static_cast<std::int64_t>(x[k].FIELD CMP y[k].FIELD))
      BB_COMPARE(LtI, i, <)
      BB_COMPARE(LeI, i, <=)
      BB_COMPARE(GtI, i, >)
      BB_COMPARE(GeI, i, >=)
      BB_COMPARE(EqI, i, ==)
      BB_COMPARE(NeI, i, !=)
      BB_COMPARE(LtD, d, <)
      BB_COMPARE(LeD, d, <=)
      BB_COMPARE(GtD, d, >)
      BB_COMPARE(GeD, d, >=)
      BB_COMPARE(EqD, d, ==)
      BB_COMPARE(NeD, d, !=)
#undef BB_COMPARE

      case OpCode::SelectI: {
        Slot* c = row(depth - 3);
        const Slot* a = row(depth - 2);
        const Slot* b = row(depth - 1);
        BB_LANES(c[k] = c[k].i != 0 ? a[k] : b[k])
        depth -= 2;
        break;
      }
      case OpCode::SelectD: {
        Slot* c = row(depth - 3);
        const Slot* a = row(depth - 2);
        const Slot* b = row(depth - 1);
        BB_LANES(const double v = c[k].d; c[k] = (v != 0.0 && v == v) ? a[k] : b[k])
        depth -= 2;
        break;
      }
    }
  }
#undef BB_LANES
#undef BB_PUSH
#undef BB_UNARY
#undef BB_BINARY

  const Slot* top = row(0);
  if (result == ValueKind::Int) {
    for (std::size_t k = 0; k < len; ++k) out[k] = static_cast<std::uint8_t>(top[k].i);
  } else {
    for (std::size_t k = 0; k < len; ++k) out[k] = static_cast<std::uint8_t>(to_int32(top[k].d));
  }
}

/// Renders n samples in blocks of `stride`; `stack` holds max_stack * stride slots.
inline void run(const Program& p, std::uint64_t t0, std::size_t n, std::uint8_t* out, Slot* stack,
                std::size_t stride) {
  for (std::size_t done = 0; done < n; done += stride) {
    const std::size_t len = std::min(stride, n - done);
    if (int_width(p.mode()) == 64)
      run_block<64>(p.code(), p.result_kind(), t0 + done, len, out + done, stack, stride);
    else
      run_block<32>(p.code(), p.result_kind(), t0 + done, len, out + done, stack, stride);
  }
}

inline constexpr std::size_t kBlockSamples = 256;

}  // namespace detail

/// One output byte: the program's result reduced to its low eight bits.
inline std::uint8_t eval_sample(const Program& p, std::uint64_t t) {
  std::uint8_t out = 0;
  if (p.max_stack() <= 32) {
    std::array<detail::Slot, 32> stack;
    detail::run(p, t, 1, &out, stack.data(), 1);
  } else {
    std::vector<detail::Slot> stack(p.max_stack());
    detail::run(p, t, 1, &out, stack.data(), 1);
  }
  return out;
}

/// Renders samples t0 .. t0+n-1 into `out`, which must hold n bytes.
inline void render_into(const Program& p, std::uint64_t t0, std::span<std::uint8_t> out) {
  if (out.empty()) return;
  const std::size_t stride = std::min(out.size(), detail::kBlockSamples);
  std::vector<detail::Slot> stack(std::max<std::size_t>(p.max_stack(), 1) * stride);
  detail::run(p, t0, out.size(), out.data(), stack.data(), stride);
}

inline SampleChunk render_range(const Program& p, std::uint64_t t0, std::size_t n,
                                std::uint32_t rate = kDefaultRate) {
  SampleChunk chunk{t0, rate, std::vector<std::uint8_t>(n)};
  render_into(p, t0, chunk.data);
  return chunk;
}

// ---------------------------------------------------------------------------
// Cross-mode divergence localization

enum class DivergenceCause {
  ZeroDivisor,            // integer /0 or %0 totalized in C, IEEE in JS
  FractionalIntermediate, // C truncates a quotient that JS keeps fractional
  OutOfWidth,             // a value wraps differently at 32, 53 or 64 bits
  Unexplained,
};

inline std::string_view to_string(DivergenceCause c) {
  switch (c) {
    case DivergenceCause::ZeroDivisor: return "zero-divisor";
    case DivergenceCause::FractionalIntermediate: return "fractional-intermediate";
    case DivergenceCause::OutOfWidth: return "out-of-width";
    case DivergenceCause::Unexplained: return "unexplained";
  }
  return "?";
}

struct Divergence {
  std::size_t pos;  // source offset of the innermost diverging node
  DivergenceCause cause;
};

namespace detail {

inline bool same_number(const Value& a, const Value& b) {
  if (a.is_int() && b.is_int()) return a.as_int() == b.as_int();
  const double x = a.as_double();
  const double y = b.as_double();
  return x == y || (std::isnan(x) && std::isnan(y));
}

class DivergenceFinder {
public:
  DivergenceFinder(Mode a, Mode b, std::uint64_t t) : a_(a), b_(b), t_(t) {}

  std::optional<Divergence> find(const Expr& e) const {
    if (auto d = std::visit([&](const auto& n) { return children(n); }, e->data)) return d;
    const Value va = EvalVisitor{a_, t_}.eval(e);
    const Value vb = EvalVisitor{b_, t_}.eval(e);
    if (same_number(va, vb)) return std::nullopt;
    return Divergence{e->pos, classify(e, vb)};
  }

private:
  std::optional<Divergence> children(const IntConst&) const { return std::nullopt; }
  std::optional<Divergence> children(const DblConst&) const { return std::nullopt; }
  std::optional<Divergence> children(const VarT&) const { return std::nullopt; }
  std::optional<Divergence> children(const Unary& u) const { return find(u.operand); }
  std::optional<Divergence> children(const Binary& b) const {
    if (auto d = find(b.lhs)) return d;
    return find(b.rhs);
  }
  std::optional<Divergence> children(const Ternary& n) const {
    if (auto d = find(n.cond)) return d;
    const bool ca = truthy(EvalVisitor{a_, t_}.eval(n.cond));
    const bool cb = truthy(EvalVisitor{b_, t_}.eval(n.cond));
    if (ca != cb) return std::nullopt;
    return find(ca ? n.then_branch : n.else_branch);
  }

  DivergenceCause classify(const Expr& e, const Value& vb) const {
    if (std::holds_alternative<VarT>(e->data) || std::holds_alternative<IntConst>(e->data))
      return DivergenceCause::OutOfWidth;
    if (std::holds_alternative<Unary>(e->data)) return DivergenceCause::OutOfWidth;
    if (const auto* b = std::get_if<Binary>(&e->data)) {
      if (b->op == BinaryOp::Div || b->op == BinaryOp::Mod) {
        const Value ra = EvalVisitor{a_, t_}.eval(b->rhs);
        const Value rb = EvalVisitor{b_, t_}.eval(b->rhs);
        if (ra.as_double() == 0.0 || rb.as_double() == 0.0) return DivergenceCause::ZeroDivisor;
        if (b->op == BinaryOp::Div) {
          const Value va = EvalVisitor{a_, t_}.eval(e);
          auto fractional = [](const Value& v) {
            return !v.is_int() && std::isfinite(v.as_double()) &&
                   v.as_double() != std::trunc(v.as_double());
          };
          if (fractional(va) || fractional(vb)) return DivergenceCause::FractionalIntermediate;
        }
        return DivergenceCause::OutOfWidth;
      }
      if (is_comparison(b->op)) return DivergenceCause::Unexplained;
      return DivergenceCause::OutOfWidth;
    }
    return DivergenceCause::Unexplained;
  }

  Mode a_;
  Mode b_;
  std::uint64_t t_;
};

}  // namespace detail

/// Finds the innermost subexpression whose value differs between two modes
/// at counter t, or nullopt when every node agrees numerically.
inline std::optional<Divergence> localize_divergence(const Expr& e, std::uint64_t t, Mode a,
                                                     Mode b) {
  return detail::DivergenceFinder(a, b, t).find(e);
}

}  // namespace bytebeat
