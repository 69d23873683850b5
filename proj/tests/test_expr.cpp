#include "saddlebvp/expr.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace saddlebvp;
namespace a = saddlebvp::ast;

namespace {

Expr X() { return a::variable(Var::x); }
Expr Y() { return a::variable(Var::y); }
Expr U() { return a::variable(Var::u); }

double central(const Expr& e, Env env, Var v) {
    double& slot = v == Var::x ? env.x : env.y;
    const double s0 = slot, h = 1e-6 * (1.0 + std::abs(s0));
    slot = s0 + h;
    const double p = eval(e, env);
    slot = s0 - h;
    const double m = eval(e, env);
    return (p - m) / (2.0 * h);
}

}  // namespace

TEST(Parse, SumOfProductAndVariable) {
    EXPECT_TRUE(structurally_equal(parse("x*y + u"), a::add(a::mul(X(), Y()), U())));
}

TEST(Parse, DifferenceOfPowers) {
    EXPECT_TRUE(structurally_equal(parse("x^2 - y^2"), a::sub(a::pow(X(), a::number(2)), a::pow(Y(), a::number(2)))));
}

TEST(Parse, PowerIsRightAssociativeAndBindsTighterThanNegation) {
    EXPECT_TRUE(structurally_equal(parse("x^y^2"), a::pow(X(), a::pow(Y(), a::number(2)))));
    EXPECT_TRUE(structurally_equal(parse("-x^2"), a::neg(a::pow(X(), a::number(2)))));
    EXPECT_TRUE(structurally_equal(parse("-x*y"), a::mul(a::neg(X()), Y())));
}

TEST(Parse, WhitespaceAndParentheses) {
    EXPECT_TRUE(structurally_equal(parse("  ( x +y)*  2 "), a::mul(a::add(X(), Y()), a::number(2))));
}

TEST(Parse, IncompleteInputReportsOffset) {
    try {
        parse("sin(k*x) /");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 9u);
    }
}

TEST(Parse, UnknownIdentifierAndArity) {
    EXPECT_THROW(parse("z + 1"), ParseError);
    EXPECT_THROW(parse("foo(x)"), ParseError);
    EXPECT_THROW(parse("sin(x, y)"), ParseError);
    EXPECT_THROW(parse("sin()"), ParseError);
    EXPECT_THROW(parse("x +* y"), ParseError);
    EXPECT_THROW(parse(""), ParseError);
}

TEST(Parse, NegativeConstantBaseNeedsIntegerExponent) {
    EXPECT_NO_THROW(parse("(-2)^3"));
    EXPECT_THROW(parse("(-2)^0.5"), ParseError);
    EXPECT_NO_THROW(parse("x^0.5"));
}

TEST(Eval, Examples) {
    EXPECT_EQ(eval(parse("x*y + u"), Env{1, 2, 3, -1}), 5.0);
    EXPECT_EQ(eval(parse("exp(0)"), Env{}), 1.0);
    EXPECT_NEAR(eval(parse("sin(3.14159265358979*k/6)*x"), Env{3, 2, 0, 0}), 2.0, 1e-12);
}

TEST(Eval, DomainErrorsCarrySubexpression) {
    try {
        eval(parse("1 + log(x)"), Env{1, -1, 0, 0});
        FAIL() << "expected a domain error";
    } catch (const EvalError& e) {
        EXPECT_EQ(e.subexpression(), "log(x)");
    }
    EXPECT_THROW(eval(parse("sqrt(y)"), Env{1, 0, -1, 0}), EvalError);
    EXPECT_THROW(eval(parse("1/x"), Env{1, 0, 0, 0}), EvalError);
    EXPECT_THROW(eval(parse("x^0.5"), Env{1, -4, 0, 0}), EvalError);
}

TEST(Eval, Deterministic) {
    const Expr e = parse("exp(sin(x*y)) / (1 + tanh(u)^2) + sqrt(abs(k - x))");
    const Env env{3, 0.3, -1.7, 0.25};
    EXPECT_EQ(eval(e, env), eval(e, env));
}

TEST(Differentiate, Examples) {
    EXPECT_TRUE(structurally_equal(differentiate(parse("x^2"), Var::x), parse("2*x")));
    EXPECT_TRUE(structurally_equal(differentiate(parse("x*y + u"), Var::x), parse("y")));
    EXPECT_TRUE(structurally_equal(differentiate(parse("u*k"), Var::y), parse("0")));
}

TEST(Differentiate, OnlyXAndY) {
    EXPECT_THROW(differentiate(parse("u*x"), Var::u), std::invalid_argument);
    EXPECT_THROW(differentiate(parse("u*x"), Var::k), std::invalid_argument);
}

TEST(Differentiate, AbsRejectedOnlyWhenItInvolvesTheVariable) {
    EXPECT_THROW(differentiate(parse("abs(x)*y"), Var::x), DiffError);
    EXPECT_NO_THROW(differentiate(parse("abs(x)*y"), Var::y));
    EXPECT_NO_THROW(differentiate(parse("abs(u)*x"), Var::x));
    EXPECT_THROW(ScalarField::parse("abs(x) + y"), DiffError);
}

TEST(Differentiate, SinOfProductAgainstFiniteDifferences) {
    const Expr f = parse("sin(x*y)");
    const Expr d = differentiate(f, Var::y);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> s(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        const Env env{1, s(rng), s(rng), s(rng)};
        const double ref = central(f, env, Var::y);
        EXPECT_LE(std::abs(eval(d, env) - ref), 1e-6 * (1.0 + std::abs(ref)));
    }
}

TEST(Differentiate, EveryFunctionAgainstFiniteDifferences) {
    const char* fields[] = {"sin(x*y)", "cos(x+2*y)", "exp(x-y)", "log(2+x^2+y)", "sqrt(4+x+y^2)", "tanh(x*y)",
                            "x/(1+y^2)", "(2+x^2)^y", "abs(u)*x^3", "-x^4 + 3*x*y - y/(3+x^2)"};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> s(-1.0, 1.0);
    for (const char* text : fields) {
        const Expr f = parse(text);
        for (Var v : {Var::x, Var::y}) {
            const Expr d = differentiate(f, v);
            for (int i = 0; i < 100; ++i) {
                const Env env{2, s(rng), s(rng), s(rng)};
                const double ref = central(f, env, v);
                EXPECT_LE(std::abs(eval(d, env) - ref), 1e-6 * (1.0 + std::abs(ref))) << text;
            }
        }
    }
}

TEST(Differentiate, ResultIsRedifferentiable) {
    const Expr f = parse("exp(x*y) * sin(y)");
    const Expr dxy = differentiate(differentiate(f, Var::x), Var::y);
    const Expr dyx = differentiate(differentiate(f, Var::y), Var::x);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> s(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Env env{1, s(rng), s(rng), 0};
        const double r = eval(dxy, env);
        EXPECT_LE(std::abs(r - eval(dyx, env)), 1e-9 * (1.0 + std::abs(r)));
    }
}

TEST(Differentiate, FoldsIdentities) {
    EXPECT_EQ(print(differentiate(parse("3*x + y"), Var::x)), "3");
    EXPECT_EQ(print(differentiate(parse("x*y"), Var::x)), "y");
    EXPECT_EQ(print(differentiate(parse("y^2 + u"), Var::x)), "0");
}

TEST(Print, RoundTripsTrickyForms) {
    for (const char* text : {"x - (y - u)", "x / (y * u)", "(x^y)^2", "x^(y^2)", "-(x + y)", "(-3)*x", "-x^2", "2^-x",
                             "(-2)^3", "x - -y", "1e-300*x", "0.1 + 0.2", "-(-x)"}) {
        const Expr e = parse(text);
        EXPECT_TRUE(structurally_equal(parse(print(e)), e)) << text << " printed as " << print(e);
    }
}

TEST(Print, NumbersRoundTripExactly) {
    const Expr e = a::number(0.1 + 0.2);
    EXPECT_EQ(parse(print(e))->value, 0.1 + 0.2);
}

TEST(ScalarField, PartialsMatchDifferentiate) {
    const ScalarField f = ScalarField::parse("x^2*y + sin(y)*u");
    EXPECT_TRUE(structurally_equal(f.fx(), differentiate(f.f(), Var::x)));
    EXPECT_TRUE(structurally_equal(f.fy(), differentiate(f.f(), Var::y)));
    EXPECT_TRUE(structurally_equal(f.fxx(), differentiate(f.fx(), Var::x)));
    EXPECT_TRUE(structurally_equal(f.fxy(), differentiate(f.fx(), Var::y)));
    EXPECT_TRUE(structurally_equal(f.fyy(), differentiate(f.fy(), Var::y)));
}

TEST(ScalarField, FirstOrderOnly) {
    const ScalarField f = ScalarField::parse("x*y", false);
    EXPECT_FALSE(f.has_second_partials());
    EXPECT_THROW(f.fxx(), std::logic_error);
}
