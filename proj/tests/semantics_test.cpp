#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "bytebeat/corpus.hpp"
#include "bytebeat/semantics.hpp"
#include "random_expr.hpp"

namespace bytebeat {
namespace {

Value eval_text(std::string_view src, std::uint64_t t, Mode mode) {
  return eval_ast(typecheck(parse(src), mode), t);
}

std::uint8_t sample(std::string_view src, std::uint64_t t, Mode mode = Mode::C32) {
  return eval_sample(compile(src, mode), t);
}

// Independent wide-integer reference for ToInt32 on integral doubles.
std::int32_t to_int32_reference(long double integral) {
  const long double two32 = 4294967296.0L;
  long double r = std::fmod(integral, two32);
  if (r < 0) r += two32;
  auto u = static_cast<std::uint64_t>(r);
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(u));
}

TEST(ToInt32, Examples) {
  EXPECT_EQ(to_int32(2147483648.0), std::numeric_limits<std::int32_t>::min());
  EXPECT_EQ(to_int32(-1.5), -1);
  // 10^10 mod 2^32 by exact integer arithmetic.
  const std::uint64_t expected = 10'000'000'000ull % (1ull << 32);
  EXPECT_EQ(expected, 1410065408u);
  EXPECT_EQ(to_int32(1e10), static_cast<std::int32_t>(expected));
  EXPECT_EQ(to_int32(std::nan("")), 0);
  EXPECT_EQ(to_int32(INFINITY), 0);
  EXPECT_EQ(to_int32(-INFINITY), 0);
  EXPECT_EQ(to_int32(-0.0), 0);
  EXPECT_EQ(to_int32(4294967295.0), -1);
}

TEST(ToInt32, MatchesWideIntegerReference) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100000; ++i) {
    const int exp = static_cast<int>(rng() % 70);
    double x = std::ldexp(static_cast<double>(rng() % (1ull << 53)), exp - 30);
    if (rng() & 1) x = -x;
    EXPECT_EQ(to_int32(x), to_int32_reference(std::trunc(static_cast<long double>(x)))) << x;
  }
}

TEST(Typecheck, ModOnDoubleRejectedInC) {
  EXPECT_THROW(typecheck(parse("t%1e7"), Mode::C32), TypeError);
  EXPECT_THROW(typecheck(parse("t%1e7"), Mode::C64), TypeError);
  EXPECT_NO_THROW(typecheck(parse("t%1e7"), Mode::JS));
  try {
    typecheck(parse("t%1e7"), Mode::C32);
  } catch (const TypeError& e) {
    EXPECT_EQ(e.pos(), 1u);
  }
}

TEST(Typecheck, BitwiseOnDoubleRejectedInC) {
  EXPECT_THROW(typecheck(parse("t&1.5"), Mode::C32), TypeError);
  EXPECT_THROW(typecheck(parse("t<<0.5"), Mode::C32), TypeError);
  EXPECT_THROW(typecheck(parse("~1.5"), Mode::C32), TypeError);
  EXPECT_NO_THROW(typecheck(parse("t&(int)1.5"), Mode::C32));
  EXPECT_NO_THROW(typecheck(parse("(int)(t/1e7*t*t+t)"), Mode::C32));
  EXPECT_EQ(typecheck(parse("t/1e7"), Mode::C32).result_kind(), ValueKind::Dbl);
  EXPECT_EQ(typecheck(parse("t<1.5"), Mode::C32).result_kind(), ValueKind::Int);
}

TEST(Typecheck, LiteralWidth) {
  EXPECT_NO_THROW(typecheck(parse("4294967295"), Mode::C32));
  EXPECT_THROW(typecheck(parse("4294967296"), Mode::C32), TypeError);
  EXPECT_NO_THROW(typecheck(parse("4294967296"), Mode::C64));
  EXPECT_THROW(typecheck(parse("18446744073709551616"), Mode::C64), TypeError);
  EXPECT_NO_THROW(typecheck(parse("18446744073709551616"), Mode::JS));
  EXPECT_DOUBLE_EQ(eval_text("18446744073709551616", 0, Mode::JS).as_double(), 18446744073709551616.0);
}

TEST(EvalAst, Examples) {
  EXPECT_EQ(eval_text("t&t>>8", 511, Mode::C32), Value::integer(1));
  EXPECT_EQ(eval_text("t>>6&1?t>>5:-t>>4", 16, Mode::C32), Value::integer(-1));
  const double reference = 1000.0 / 1e7 * 1000.0 * 1000.0 + 1000.0;
  EXPECT_EQ(std::trunc(reference), 1100.0);
  EXPECT_EQ(eval_text("(int)(t/1e7*t*t+t)", 1000, Mode::JS), Value::dbl(1100.0));
  EXPECT_EQ(eval_text("(int)(t/1e7*t*t+t)", 1000, Mode::C32), Value::integer(1100));
}

TEST(EvalAst, CounterReduction) {
  EXPECT_EQ(eval_text("t", (1ull << 32) + 5, Mode::C32), Value::integer(5));
  EXPECT_EQ(eval_text("t", 0x80000000ull, Mode::C32), Value::integer(std::numeric_limits<std::int32_t>::min()));
  EXPECT_EQ(eval_text("t", (1ull << 32) + 5, Mode::C64), Value::integer((1ll << 32) + 5));
  EXPECT_EQ(eval_text("t", (1ull << 32) + 5, Mode::JS), Value::dbl(4294967301.0));
}

TEST(ScalarKernels, CDivisionAndModulus) {
  const auto I = Value::integer;
  EXPECT_EQ(scalar_kernel(BinaryOp::Div, I(-7), I(2), Mode::C32), I(-3));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mod, I(-7), I(2), Mode::C32), I(-1));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mod, I(7), I(-2), Mode::C32), I(1));
  EXPECT_EQ(scalar_kernel(BinaryOp::Div, I(5), I(0), Mode::C32), I(0));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mod, I(5), I(0), Mode::C32), I(0));
  const auto min32 = std::numeric_limits<std::int32_t>::min();
  EXPECT_EQ(scalar_kernel(BinaryOp::Div, I(min32), I(-1), Mode::C32), I(min32));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mod, I(min32), I(-1), Mode::C32), I(0));
  const auto min64 = std::numeric_limits<std::int64_t>::min();
  EXPECT_EQ(scalar_kernel(BinaryOp::Div, I(min64), I(-1), Mode::C64), I(min64));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mod, I(min64), I(-1), Mode::C64), I(0));
}

TEST(ScalarKernels, Shifts) {
  const auto I = Value::integer;
  EXPECT_EQ(scalar_kernel(BinaryOp::Shl, I(1), I(33), Mode::C32), I(2));
  EXPECT_EQ(scalar_kernel(BinaryOp::Shl, I(1), I(31), Mode::C32), I(std::numeric_limits<std::int32_t>::min()));
  EXPECT_EQ(scalar_kernel(BinaryOp::Shl, I(1), I(33), Mode::C64), I(1ll << 33));
  EXPECT_EQ(scalar_kernel(BinaryOp::Shr, I(-16), I(4), Mode::C32), I(-1));
  EXPECT_EQ(scalar_kernel(BinaryOp::Shr, I(256), I(-1), Mode::C32), I(0));  // count 31
  EXPECT_EQ(scalar_kernel(BinaryOp::Shl, Value::dbl(1), Value::dbl(33), Mode::JS), Value::dbl(2));
  EXPECT_EQ(scalar_kernel(BinaryOp::Shl, Value::dbl(1), Value::dbl(-1), Mode::JS),
            Value::dbl(-2147483648.0));
}

TEST(ScalarKernels, Wrapping) {
  const auto I = Value::integer;
  EXPECT_EQ(scalar_kernel(BinaryOp::Add, I(0x7FFFFFFF), I(1), Mode::C32), I(std::numeric_limits<std::int32_t>::min()));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mul, I(0x10000), I(0x10000), Mode::C32), I(0));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mul, I(0x10000), I(0x10000), Mode::C64), I(1ll << 32));
  EXPECT_EQ(unary_kernel(UnaryOp::Negate, I(std::numeric_limits<std::int32_t>::min()), Mode::C32),
            I(std::numeric_limits<std::int32_t>::min()));
}

TEST(ScalarKernels, JsSemantics) {
  const auto D = Value::dbl;
  EXPECT_EQ(scalar_kernel(BinaryOp::BitAnd, D(std::nan("")), D(255), Mode::JS), D(0));
  EXPECT_EQ(scalar_kernel(BinaryOp::Div, D(5), D(0), Mode::JS), D(INFINITY));
  EXPECT_TRUE(std::isnan(scalar_kernel(BinaryOp::Div, D(0), D(0), Mode::JS).as_double()));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mod, D(-7), D(2), Mode::JS), D(-1));
  EXPECT_EQ(scalar_kernel(BinaryOp::Mod, D(5.5), D(2), Mode::JS), D(1.5));
  EXPECT_TRUE(std::isnan(scalar_kernel(BinaryOp::Mod, D(1), D(0), Mode::JS).as_double()));
  EXPECT_EQ(scalar_kernel(BinaryOp::Lt, D(std::nan("")), D(1), Mode::JS), D(0));
  EXPECT_EQ(scalar_kernel(BinaryOp::Ne, D(std::nan("")), D(1), Mode::JS), D(1));
  EXPECT_EQ(scalar_kernel(BinaryOp::BitOr, D(4294967296.0 + 3), D(0), Mode::JS), D(3));
}

TEST(ScalarKernels, MixedCArithmeticPromotes) {
  EXPECT_EQ(scalar_kernel(BinaryOp::Div, Value::integer(1), Value::dbl(4), Mode::C32), Value::dbl(0.25));
  EXPECT_EQ(scalar_kernel(BinaryOp::Lt, Value::integer(1), Value::dbl(1.5), Mode::C32), Value::integer(1));
}

TEST(Truthiness, NanIsFalse) {
  EXPECT_FALSE(truthy(Value::dbl(std::nan(""))));
  EXPECT_FALSE(truthy(Value::dbl(0.0)));
  EXPECT_TRUE(truthy(Value::dbl(-0.5)));
  EXPECT_EQ(sample("0.0/0.0?7:9", 0, Mode::C32), 9);
  EXPECT_EQ(sample("t/0.0?7:9", 1, Mode::JS), 7);
}

TEST(Compile, Examples) {
  const auto ops = [](const Program& p) {
    std::vector<OpCode> out;
    for (const auto& in : p.code()) out.push_back(in.op);
    return out;
  };
  EXPECT_EQ(ops(compile("t", Mode::C32)), std::vector<OpCode>{OpCode::LoadTI});
  EXPECT_EQ(ops(compile("t&t>>8", Mode::C32)),
            (std::vector<OpCode>{OpCode::LoadTI, OpCode::LoadTI, OpCode::PushI, OpCode::ShrI, OpCode::AndI}));
  const Program folded = compile("2*3&t", Mode::C32);
  ASSERT_EQ(folded.code().size(), 3u);
  EXPECT_EQ(folded.code()[0], (Instr{OpCode::PushI, 6}));
  EXPECT_EQ(folded.code()[1].op, OpCode::LoadTI);
  EXPECT_EQ(folded.code()[2].op, OpCode::AndI);
  EXPECT_EQ(compile("2*3&t", Mode::C32, {.fold_constants = false}).code().size(), 5u);
}

// Independent stack-depth simulation.
void expect_valid(const Program& p) {
  long depth = 0, max_depth = 0;
  for (const auto& in : p.code()) {
    ASSERT_GE(depth, stack_inputs(in.op));
    depth += stack_effect(in.op);
    max_depth = std::max(max_depth, depth);
  }
  EXPECT_EQ(depth, 1);
  EXPECT_EQ(static_cast<std::size_t>(max_depth), p.max_stack());
}

TEST(Compile, ProgramsAreValidPostfix) {
  testing::RandomExpr gen(5);
  for (int i = 0; i < 500; ++i) {
    const Expr e = gen.any(1 + i % 7);
    for (Mode m : kAllModes) {
      expect_valid(compile(typecheck(e, m)));
      expect_valid(compile(typecheck(e, m), {.fold_constants = false}));
    }
  }
}

TEST(EvalSample, Examples) {
  EXPECT_EQ(sample("t", 300), 44);
  EXPECT_EQ(sample("t*(42&t>>10)", 2048), 0);
  EXPECT_EQ(eval_text("t*(42&t>>10)", 2048, Mode::C32), Value::integer(4096));
  EXPECT_EQ(sample("(t*9&t>>4|t*5&t>>7|t*3&t>>10)-1", 0), 255);
}

TEST(RenderRange, Examples) {
  EXPECT_EQ(render_range(compile("t", Mode::C32), 254, 3).data, (std::vector<std::uint8_t>{254, 255, 0}));
  EXPECT_EQ(render_range(compile("t&t>>8", Mode::C32), 256, 2).data, (std::vector<std::uint8_t>{0, 1}));
  const SampleChunk empty = render_range(compile("t", Mode::C32), 77, 0);
  EXPECT_TRUE(empty.data.empty());
  EXPECT_EQ(empty.t0, 77u);
  EXPECT_EQ(empty.rate, 8000u);
}

std::vector<std::uint64_t> boundary_ts() {
  std::vector<std::uint64_t> ts;
  for (std::uint64_t base : {0ull, 0x7FFFFFFFull, 0x80000000ull, 0xFFFFFFFFull, 1ull << 53,
                             0xFFFFFFFFFFFFFFFFull - 8})
    for (std::uint64_t d = 0; d < 8; ++d) ts.push_back(base + d);
  return ts;
}

TEST(VmProperty, MatchesOracleOnRandomExpressions) {
  testing::RandomExpr gen(2024);
  const auto edges = boundary_ts();
  for (int i = 0; i < 400; ++i) {
    const Expr e = gen.any(1 + i % 7);
    for (Mode m : kAllModes) {
      const TypedExpr typed = typecheck(e, m);
      const Program folded = compile(typed);
      const Program plain = compile(typed, {.fold_constants = false});
      auto check = [&](std::uint64_t t) {
        const std::uint8_t want = quantize(eval_ast(typed, t));
        ASSERT_EQ(eval_sample(folded, t), want) << format(e) << " t=" << t << " " << to_string(m);
        ASSERT_EQ(eval_sample(plain, t), want) << format(e) << " t=" << t << " " << to_string(m);
      };
      for (std::uint64_t t = 0; t < 4096; t += 7) check(t);
      for (std::uint64_t t : edges) check(t);
    }
  }
}

TEST(VmProperty, TotalOverWideRange) {
  testing::RandomExpr gen(77);
  for (int i = 0; i < 40; ++i) {
    const Expr e = gen.pure_integer(5);
    const Program p = compile(typecheck(e, Mode::C32));
    std::vector<std::uint8_t> buf(1 << 16);
    render_into(p, 0, buf);
    for (std::uint64_t t : {0x7FFFFFFFull, 0x80000000ull, 0xFFFFFFFFull})
      static_cast<void>(eval_sample(p, t));
  }
}

TEST(VmProperty, FoldingPreservesSemantics) {
  testing::RandomExpr gen(31337);
  for (int i = 0; i < 60; ++i) {
    const Expr e = gen.any(6);
    for (Mode m : kAllModes) {
      const TypedExpr typed = typecheck(e, m);
      const SampleChunk a = render_range(compile(typed), 0, 1 << 16);
      const SampleChunk b = render_range(compile(typed, {.fold_constants = false}), 0, 1 << 16);
      ASSERT_EQ(a.data, b.data) << format(e) << " " << to_string(m);
    }
  }
}

TEST(SemanticsProperty, C32CounterWrap) {
  const Program p = compile("t*9", Mode::C32);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t t = rng() >> 20;
    EXPECT_EQ(eval_sample(p, t), eval_sample(p, t + (1ull << 32)));
  }
}

TEST(SemanticsProperty, SierpinskiAgreesAcrossModes) {
  const SampleChunk c32 = render_range(compile("t&t>>8", Mode::C32), 0, 1 << 20);
  EXPECT_EQ(render_range(compile("t&t>>8", Mode::C64), 0, 1 << 20).data, c32.data);
  EXPECT_EQ(render_range(compile("t&t>>8", Mode::JS), 0, 1 << 20).data, c32.data);
}

TEST(SemanticsProperty, ConcurrentEvaluationOfSharedProgram) {
  const Program p = compile("t*(0xCA98>>(t>>9&14)&15)|t>>8", Mode::C32);
  const SampleChunk want = render_range(p, 0, 1 << 16);
  std::vector<std::thread> threads;
  std::vector<int> ok(8, 0);
  for (int k = 0; k < 8; ++k)
    threads.emplace_back([&, k] { ok[k] = render_range(p, 0, 1 << 16).data == want.data; });
  for (auto& th : threads) th.join();
  for (int v : ok) EXPECT_EQ(v, 1);
}

TEST(Divergence, IntegralDivisionIsFractionalInJs) {
  const Expr e = parse("t/3&255");
  const auto d = localize_divergence(e, 10, Mode::C32, Mode::JS);
  // Outputs agree (ToInt32(3.33) == 3) but the quotient itself differs.
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->cause, DivergenceCause::FractionalIntermediate);
  EXPECT_EQ(d->pos, 1u);
  const Expr e2 = parse("t/3*3");
  const auto d2 = localize_divergence(e2, 10, Mode::C32, Mode::JS);
  ASSERT_TRUE(d2.has_value());
  EXPECT_EQ(d2->cause, DivergenceCause::FractionalIntermediate);
  EXPECT_EQ(d2->pos, 1u);
}

TEST(Divergence, ZeroDivisorAndWidth) {
  const auto z = localize_divergence(parse("t/(t-t)+1"), 5, Mode::C32, Mode::JS);
  ASSERT_TRUE(z.has_value());
  EXPECT_EQ(z->cause, DivergenceCause::ZeroDivisor);
  const auto w = localize_divergence(parse("t*t"), 100000, Mode::C32, Mode::JS);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(w->cause, DivergenceCause::OutOfWidth);
  const auto c = localize_divergence(parse("t&1"), 1ull << 32, Mode::C64, Mode::JS);
  EXPECT_FALSE(c.has_value());
  EXPECT_FALSE(localize_divergence(parse("t&t>>8"), 1234, Mode::C32, Mode::JS).has_value());
}

}  // namespace
}  // namespace bytebeat
