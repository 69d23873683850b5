#pragma once

// A small expression language for integrands F(k, x, y, u): parsing,
// printing, evaluation, and symbolic differentiation with respect to x and y.
//
//   expr    := term   { ("+" | "-") term }
//   term    := unary  { ("*" | "/") unary }
//   unary   := "-" unary | power
//   power   := primary [ "^" exponent ]
//   exponent:= "-" exponent | power
//   primary := number | variable | function "(" expr ")" | "(" expr ")"
//
// Variables are k, x, y, u; functions are sin cos exp log sqrt abs tanh.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace saddlebvp {

enum class Var : std::uint8_t { k, x, y, u };
enum class Func : std::uint8_t { sin, cos, exp, log, sqrt, abs, tanh };
enum class NodeKind : std::uint8_t { number, variable, neg, add, sub, mul, div, pow, call };

struct Node;
using Expr = std::shared_ptr<const Node>;

/// Immutable AST node. `lhs` is the operand of neg and call.
struct Node {
    NodeKind kind;
    double value = 0.0;
    Var var = Var::x;
    Func func = Func::sin;
    Expr lhs;
    Expr rhs;
};

/// Syntax error, unknown identifier or arity error at a byte offset.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : std::runtime_error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Evaluation outside a function's domain; carries the offending subexpression.
class EvalError : public std::domain_error {
public:
    EvalError(const std::string& what, std::string subexpr)
        : std::domain_error(what + " in '" + subexpr + "'"), subexpr_(std::move(subexpr)) {}
    const std::string& subexpression() const { return subexpr_; }

private:
    std::string subexpr_;
};

class DiffError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Env {
    double k = 0.0;
    double x = 0.0;
    double y = 0.0;
    double u = 0.0;
};

inline std::string_view name(Var v) {
    switch (v) {
        case Var::k: return "k";
        case Var::x: return "x";
        case Var::y: return "y";
        case Var::u: return "u";
    }
    return "?";
}

inline std::string_view name(Func f) {
    switch (f) {
        case Func::sin: return "sin";
        case Func::cos: return "cos";
        case Func::exp: return "exp";
        case Func::log: return "log";
        case Func::sqrt: return "sqrt";
        case Func::abs: return "abs";
        case Func::tanh: return "tanh";
    }
    return "?";
}

// Raw constructors. The only rewrite they perform is neg(number c) -> number(-c),
// which keeps number literals canonical so that printing round-trips.
namespace ast {

inline Expr number(double v) { return std::make_shared<const Node>(Node{NodeKind::number, v, Var::x, Func::sin, nullptr, nullptr}); }
inline Expr variable(Var v) { return std::make_shared<const Node>(Node{NodeKind::variable, 0.0, v, Func::sin, nullptr, nullptr}); }
inline Expr neg(Expr a) {
    if (a->kind == NodeKind::number) return number(-a->value);
    return std::make_shared<const Node>(Node{NodeKind::neg, 0.0, Var::x, Func::sin, std::move(a), nullptr});
}
inline Expr binary(NodeKind kind, Expr a, Expr b) {
    return std::make_shared<const Node>(Node{kind, 0.0, Var::x, Func::sin, std::move(a), std::move(b)});
}
inline Expr add(Expr a, Expr b) { return binary(NodeKind::add, std::move(a), std::move(b)); }
inline Expr sub(Expr a, Expr b) { return binary(NodeKind::sub, std::move(a), std::move(b)); }
inline Expr mul(Expr a, Expr b) { return binary(NodeKind::mul, std::move(a), std::move(b)); }
inline Expr div(Expr a, Expr b) { return binary(NodeKind::div, std::move(a), std::move(b)); }
inline Expr pow(Expr a, Expr b) { return binary(NodeKind::pow, std::move(a), std::move(b)); }
inline Expr call(Func f, Expr a) {
    return std::make_shared<const Node>(Node{NodeKind::call, 0.0, Var::x, f, std::move(a), nullptr});
}

}  // namespace ast

inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
        case NodeKind::number: return a->value == b->value;
        case NodeKind::variable: return a->var == b->var;
        case NodeKind::neg: return structurally_equal(a->lhs, b->lhs);
        case NodeKind::call: return a->func == b->func && structurally_equal(a->lhs, b->lhs);
        default: return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
    }
}

inline bool depends_on(const Expr& e, Var v) {
    switch (e->kind) {
        case NodeKind::number: return false;
        case NodeKind::variable: return e->var == v;
        case NodeKind::neg:
        case NodeKind::call: return depends_on(e->lhs, v);
        default: return depends_on(e->lhs, v) || depends_on(e->rhs, v);
    }
}

// ---------------------------------------------------------------- printing

namespace detail {

inline int precedence(const Node& n) {
    switch (n.kind) {
        case NodeKind::add:
        case NodeKind::sub: return 1;
        case NodeKind::mul:
        case NodeKind::div: return 2;
        case NodeKind::neg: return 3;
        case NodeKind::pow: return 4;
        case NodeKind::number: return n.value < 0 || std::signbit(n.value) ? 0 : 5;
        default: return 5;
    }
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void print_to(const Node& n, std::string& out);

inline void print_child(const Node& child, int min_prec, std::string& out) {
    if (precedence(child) < min_prec) {
        out += '(';
        print_to(child, out);
        out += ')';
    } else {
        print_to(child, out);
    }
}

inline void print_to(const Node& n, std::string& out) {
    switch (n.kind) {
        case NodeKind::number: out += format_number(n.value); return;
        case NodeKind::variable: out += name(n.var); return;
        case NodeKind::neg:
            out += '-';
            print_child(*n.lhs, 3, out);
            return;
        case NodeKind::call:
            out += name(n.func);
            out += '(';
            print_to(*n.lhs, out);
            out += ')';
            return;
        case NodeKind::pow:
            print_child(*n.lhs, 5, out);
            out += '^';
            print_child(*n.rhs, 3, out);
            return;
        default: {
            const int p = precedence(n);
            print_child(*n.lhs, p, out);
            switch (n.kind) {
                case NodeKind::add: out += " + "; break;
                case NodeKind::sub: out += " - "; break;
                case NodeKind::mul: out += '*'; break;
                default: out += '/'; break;
            }
            print_child(*n.rhs, p + 1, out);
        }
    }
}

}  // namespace detail

/// Text with the minimal parentheses needed for `parse` to rebuild the same tree.
inline std::string print(const Expr& e) {
    std::string out;
    detail::print_to(*e, out);
    return out;
}

// ----------------------------------------------------------------- parsing

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr parse() {
        skip_ws();
        if (pos_ == text_.size()) throw ParseError(0, "empty expression");
        Expr e = expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError(pos_, std::string("unexpected '") + text_[pos_] + "'");
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            last_ = pos_;
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail_operand() {
        if (pos_ >= text_.size()) {
            throw ParseError(last_, "unexpected end of input after '" + std::string(1, text_[last_]) + "'");
        }
        throw ParseError(pos_, std::string("expected operand, found '") + text_[pos_] + "'");
    }

    Expr expr() {
        Expr e = term();
        for (;;) {
            if (accept('+')) {
                e = ast::add(e, term());
            } else if (accept('-')) {
                e = ast::sub(e, term());
            } else {
                return e;
            }
        }
    }

    Expr term() {
        Expr e = unary();
        for (;;) {
            if (accept('*')) {
                e = ast::mul(e, unary());
            } else if (accept('/')) {
                e = ast::div(e, unary());
            } else {
                return e;
            }
        }
    }

    Expr unary() {
        if (accept('-')) return ast::neg(unary());
        return power();
    }

    Expr exponent() {
        if (accept('-')) return ast::neg(exponent());
        return power();
    }

    Expr power() {
        Expr base = primary();
        const std::size_t at = pos_;
        if (accept('^')) {
            Expr ex = exponent();
            // A parenthesised negative literal parses as neg(number).
            const bool negative_base = (base->kind == NodeKind::number && base->value < 0) ||
                                       (base->kind == NodeKind::neg && base->lhs->kind == NodeKind::number && base->lhs->value > 0);
            if (negative_base && ex->kind == NodeKind::number && ex->value != std::floor(ex->value)) {
                throw ParseError(at, "negative base with non-integer constant exponent");
            }
            return ast::pow(base, ex);
        }
        return base;
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail_operand();
        const char c = text_[pos_];
        if (c == '(') {
            accept('(');
            Expr e = expr();
            if (!accept(')')) {
                if (pos_ >= text_.size()) throw ParseError(last_, "missing ')'");
                throw ParseError(pos_, "expected ')'");
            }
            return e;
        }
        if ((c >= '0' && c <= '9') || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail_operand();
    }

    Expr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') ++pos_, ++n;
            return n;
        };
        std::size_t n = digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) throw ParseError(start, "malformed number");
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (digits() == 0) throw ParseError(start, "malformed exponent in number");
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (ec != std::errc() || ptr != text_.data() + pos_) throw ParseError(start, "malformed number");
        last_ = start;
        return ast::number(v);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
        const std::string_view id = text_.substr(start, pos_ - start);
        last_ = start;

        static constexpr std::pair<std::string_view, Var> vars[] = {{"k", Var::k}, {"x", Var::x}, {"y", Var::y}, {"u", Var::u}};
        for (auto [n, v] : vars) {
            if (id == n) return ast::variable(v);
        }
        static constexpr std::pair<std::string_view, Func> funcs[] = {
            {"sin", Func::sin}, {"cos", Func::cos},   {"exp", Func::exp},  {"log", Func::log},
            {"sqrt", Func::sqrt}, {"abs", Func::abs}, {"tanh", Func::tanh}};
        for (auto [n, f] : funcs) {
            if (id != n) continue;
            if (!accept('(')) throw ParseError(pos_ < text_.size() ? pos_ : start, "expected '(' after '" + std::string(id) + "'");
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == ')') throw ParseError(pos_, "'" + std::string(id) + "' takes exactly 1 argument, got 0");
            Expr arg = expr();
            if (accept(',')) throw ParseError(last_, "'" + std::string(id) + "' takes exactly 1 argument");
            if (!accept(')')) {
                if (pos_ >= text_.size()) throw ParseError(last_, "missing ')'");
                throw ParseError(pos_, "expected ')'");
            }
            return ast::call(f, std::move(arg));
        }
        throw ParseError(start, "unknown identifier '" + std::string(id) + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t last_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse(); }

// -------------------------------------------------------------- evaluation

namespace detail {

inline double eval_node(const Node& n, const Env& env) {
    switch (n.kind) {
        case NodeKind::number: return n.value;
        case NodeKind::variable:
            switch (n.var) {
                case Var::k: return env.k;
                case Var::x: return env.x;
                case Var::y: return env.y;
                case Var::u: return env.u;
            }
            return 0.0;
        case NodeKind::neg: return -eval_node(*n.lhs, env);
        case NodeKind::add: return eval_node(*n.lhs, env) + eval_node(*n.rhs, env);
        case NodeKind::sub: return eval_node(*n.lhs, env) - eval_node(*n.rhs, env);
        case NodeKind::mul: return eval_node(*n.lhs, env) * eval_node(*n.rhs, env);
        case NodeKind::div: {
            const double a = eval_node(*n.lhs, env);
            const double b = eval_node(*n.rhs, env);
            if (b == 0.0) {
                std::string s;
                print_to(n, s);
                throw EvalError("division by zero", s);
            }
            return a / b;
        }
        case NodeKind::pow: {
            const double a = eval_node(*n.lhs, env);
            const double b = eval_node(*n.rhs, env);
            if ((a < 0.0 && b != std::floor(b)) || (a == 0.0 && b < 0.0)) {
                std::string s;
                print_to(n, s);
                throw EvalError(a < 0.0 ? "negative base with non-integer exponent" : "zero to a negative power", s);
            }
            if (b == 2.0) return a * a;
            return std::pow(a, b);
        }
        case NodeKind::call: {
            const double a = eval_node(*n.lhs, env);
            switch (n.func) {
                case Func::sin: return std::sin(a);
                case Func::cos: return std::cos(a);
                case Func::exp: return std::exp(a);
                case Func::tanh: return std::tanh(a);
                case Func::abs: return std::abs(a);
                case Func::log:
                    if (a <= 0.0) {
                        std::string s;
                        print_to(n, s);
                        throw EvalError("log of nonpositive value", s);
                    }
                    return std::log(a);
                case Func::sqrt:
                    if (a < 0.0) {
                        std::string s;
                        print_to(n, s);
                        throw EvalError("sqrt of negative value", s);
                    }
                    return std::sqrt(a);
            }
        }
    }
    return 0.0;
}

}  // namespace detail

inline double eval(const Expr& e, const Env& env) { return detail::eval_node(*e, env); }

// ---------------------------------------------------------- differentiation

// Folding constructors used to build derivatives: identity and annihilator
// rules plus arithmetic on two literals.
namespace fold {

inline bool is_number(const Expr& e, double v) { return e->kind == NodeKind::number && e->value == v; }
inline bool is_literal(const Expr& e) { return e->kind == NodeKind::number; }

inline Expr neg(const Expr& a) {
    if (a->kind == NodeKind::neg) return a->lhs;
    return ast::neg(a);
}
inline Expr add(const Expr& a, const Expr& b) {
    if (is_number(a, 0.0)) return b;
    if (is_number(b, 0.0)) return a;
    if (is_literal(a) && is_literal(b)) return ast::number(a->value + b->value);
    return ast::add(a, b);
}
inline Expr sub(const Expr& a, const Expr& b) {
    if (is_number(b, 0.0)) return a;
    if (is_number(a, 0.0)) return neg(b);
    if (is_literal(a) && is_literal(b)) return ast::number(a->value - b->value);
    return ast::sub(a, b);
}
inline Expr mul(const Expr& a, const Expr& b) {
    if (is_number(a, 0.0) || is_number(b, 0.0)) return ast::number(0.0);
    if (is_number(a, 1.0)) return b;
    if (is_number(b, 1.0)) return a;
    if (is_number(a, -1.0)) return neg(b);
    if (is_number(b, -1.0)) return neg(a);
    if (is_literal(a) && is_literal(b)) return ast::number(a->value * b->value);
    return ast::mul(a, b);
}
inline Expr div(const Expr& a, const Expr& b) {
    if (is_number(a, 0.0)) return a;
    if (is_number(b, 1.0)) return a;
    if (is_literal(a) && is_literal(b) && b->value != 0.0) return ast::number(a->value / b->value);
    return ast::div(a, b);
}
inline Expr pow(const Expr& a, const Expr& b) {
    if (is_number(b, 0.0)) return ast::number(1.0);
    if (is_number(b, 1.0)) return a;
    return ast::pow(a, b);
}

}  // namespace fold

/// Symbolic derivative with respect to x or y. Throws DiffError when the
/// variable appears inside abs, which is not differentiable at 0.
inline Expr differentiate(const Expr& e, Var v) {
    if (v != Var::x && v != Var::y) throw DiffError("differentiation is defined only with respect to x and y");
    if (!depends_on(e, v)) return ast::number(0.0);

    const Expr& a = e->lhs;
    const Expr& b = e->rhs;
    switch (e->kind) {
        case NodeKind::number: return ast::number(0.0);
        case NodeKind::variable: return ast::number(1.0);
        case NodeKind::neg: return fold::neg(differentiate(a, v));
        case NodeKind::add: return fold::add(differentiate(a, v), differentiate(b, v));
        case NodeKind::sub: return fold::sub(differentiate(a, v), differentiate(b, v));
        case NodeKind::mul:
            return fold::add(fold::mul(differentiate(a, v), b), fold::mul(a, differentiate(b, v)));
        case NodeKind::div: {
            const Expr da = differentiate(a, v);
            const Expr db = differentiate(b, v);
            if (fold::is_number(db, 0.0)) return fold::div(da, b);
            return fold::div(fold::sub(fold::mul(da, b), fold::mul(a, db)), fold::pow(b, ast::number(2.0)));
        }
        case NodeKind::pow: {
            const Expr da = differentiate(a, v);
            if (!depends_on(b, v)) {
                const Expr reduced = fold::is_literal(b) ? ast::number(b->value - 1.0) : fold::sub(b, ast::number(1.0));
                return fold::mul(fold::mul(b, fold::pow(a, reduced)), da);
            }
            // d(a^b) = a^b (b' log a + b a'/a)
            const Expr db = differentiate(b, v);
            return fold::mul(e, fold::add(fold::mul(db, ast::call(Func::log, a)), fold::div(fold::mul(b, da), a)));
        }
        case NodeKind::call: {
            const Expr da = differentiate(a, v);
            switch (e->func) {
                case Func::sin: return fold::mul(ast::call(Func::cos, a), da);
                case Func::cos: return fold::mul(fold::neg(ast::call(Func::sin, a)), da);
                case Func::exp: return fold::mul(e, da);
                case Func::log: return fold::div(da, a);
                case Func::sqrt: return fold::div(da, fold::mul(ast::number(2.0), e));
                case Func::tanh:
                    return fold::mul(fold::sub(ast::number(1.0), fold::pow(e, ast::number(2.0))), da);
                case Func::abs:
                    throw DiffError("abs(" + print(a) + ") is not differentiable with respect to " + std::string(name(v)));
            }
        }
    }
    throw DiffError("unsupported node");
}

/// The integrand F(k, x, y, u) with its symbolic partials.
///
/// First partials are always present; the second partials F_xx, F_xy, F_yy
/// are built unless `second_order` is false.
class ScalarField {
public:
    explicit ScalarField(Expr f, bool second_order = true)
        : f_(std::move(f)), fx_(differentiate(f_, Var::x)), fy_(differentiate(f_, Var::y)) {
        if (second_order) {
            second_ = Second{differentiate(fx_, Var::x), differentiate(fx_, Var::y), differentiate(fy_, Var::y)};
        }
    }

    static ScalarField parse(std::string_view text, bool second_order = true) {
        return ScalarField(saddlebvp::parse(text), second_order);
    }

    const Expr& f() const { return f_; }
    const Expr& fx() const { return fx_; }
    const Expr& fy() const { return fy_; }
    bool has_second_partials() const { return second_.has_value(); }
    const Expr& fxx() const { return second().xx; }
    const Expr& fxy() const { return second().xy; }
    const Expr& fyy() const { return second().yy; }

private:
    struct Second {
        Expr xx, xy, yy;
    };
    const Second& second() const {
        if (!second_) throw std::logic_error("scalar field was built without second partials");
        return *second_;
    }

    Expr f_, fx_, fy_;
    std::optional<Second> second_;
};

}  // namespace saddlebvp
