// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes.

#include "../support/instances.hpp"
#include "../support/oracles.hpp"

#include "saddlebvp/saddlebvp.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace saddlebvp;
using testing_support::build;
using testing_support::stacked;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

SolverConfig config(Method m) {
    SolverConfig cfg;
    cfg.method = m;
    cfg.tol_grad = cfg.tol_res = 1e-11;
    return cfg;
}

// 1. c_2 against the closed form and a Rayleigh-quotient maximization.
Outcome embedding() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> values;
    for (std::size_t T = 1; T <= 200; ++T) values.push_back(embedding_constant(2.0, T).value);
    const double elapsed = seconds_since(t0);
    double worst_closed = 0.0, worst_rayleigh = 0.0;
    for (std::size_t T = 1; T <= 200; ++T) {
        worst_closed = std::max(worst_closed, std::abs(values[T - 1] - oracle::c2_closed_form(T)));
        worst_rayleigh = std::max(worst_rayleigh, std::abs(values[T - 1] - oracle::rayleigh_max(T)));
    }
    o.require(worst_closed <= 1e-10, "closed-form error " + num(worst_closed));
    o.require(worst_rayleigh <= 1e-7, "Rayleigh error " + num(worst_rayleigh));
    o.require(elapsed < 5.0, "runtime " + num(elapsed) + " s");
    if (o.pass) o.detail = "max |c2 - closed form| = " + num(worst_closed) + ", vs Rayleigh " + num(worst_rayleigh) + ", " + num(elapsed) + " s";
    return o;
}

// 2. Gradient against central differences of the action.
Outcome gradient() {
    Outcome o;
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> dimT(1, 20);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto in = oracle::random_instance(rng, dimT(rng), i % 2 == 0);
        const auto b = build(in);
        const auto n = static_cast<Eigen::Index>(in.T);
        Vector x(n), y(n);
        for (auto& c : x) c = normal(rng);
        for (auto& c : y) c = normal(rng);
        const Gradient g = grad(b.spec, b.u, x, y);
        const Vector fx = oracle::fd_gradient([&](const Vector& v) { return oracle::action(b.spec.field().f(), in.u, v, y); }, x);
        const Vector fy = oracle::fd_gradient([&](const Vector& v) { return oracle::action(b.spec.field().f(), in.u, x, v); }, y);
        const double scale = 1.0 + std::max(fx.lpNorm<Eigen::Infinity>(), fy.lpNorm<Eigen::Infinity>());
        worst = std::max(worst, std::max(max_abs_diff(g.gx, fx), max_abs_diff(g.gy, fy)) / scale);
    }
    o.require(worst <= 1e-6, "relative error " + num(worst));
    if (o.pass) o.detail = "100 instances, worst relative error " + num(worst);
    return o;
}

// 3. Verified saddles solve the system; tiny residual implies tiny gradient.
Outcome critical_points() {
    Outcome o;
    std::mt19937_64 rng(3);
    int verified = 0, tight = 0;
    for (int i = 0; i < 20; ++i) {
        const auto in = oracle::random_instance(rng, 1 + static_cast<std::size_t>(i % 12), i % 3 == 0);
        const auto b = build(in);
        SolverConfig cfg = config(Method::newton);
        cfg.tol_res = 1e-13;
        cfg.radii = ball_radii(b.cert, in.T);
        const SaddleCandidate c = solve(b.spec, b.u, GridFunction(in.T), GridFunction(in.T), cfg);
        VerifyOptions vo;
        vo.radii = cfg.radii;
        const SaddleReport rep = verify_saddle(b.spec, b.u, c, vo);
        const double bound = 1e-8 * (1.0 + b.spec.lap().inf_norm());
        if (rep.passed()) {
            ++verified;
            o.require(c.residual_norm <= bound, "verified candidate with residual " + num(c.residual_norm));
        }
        if (c.residual_norm <= 1e-12) {
            ++tight;
            o.require(c.grad_norm <= 1e-10, "residual " + num(c.residual_norm) + " but gradient " + num(c.grad_norm));
        }
    }
    o.require(verified == 20, std::to_string(verified) + "/20 candidates verified");
    o.require(tight > 0, "no candidate reached residual 1e-12");
    if (o.pass) o.detail = std::to_string(verified) + " verified, " + std::to_string(tight) + " with residual <= 1e-12";
    return o;
}

// 4. Closed-form T = 1 instance.
Outcome closed_form() {
    Outcome o;
    const ProblemSpec spec(1, 2.0, ScalarField::parse("x*y + u*(x - y)"));
    const auto u = ParameterFunction::constant(1, 1.0, 2.0);
    const GridFunction x0 = GridFunction::from_interior(Vector::Constant(1, 0.7));
    const GridFunction y0 = GridFunction::from_interior(Vector::Constant(1, -1.3));
    std::vector<SaddleCandidate> cands;
    cands.push_back(extragradient(spec, u, x0, y0, config(Method::extragradient)));
    cands.push_back(newton(spec, u, x0, y0, config(Method::newton)));
    cands.push_back(nested_minimax(spec, u, y0, config(Method::nested)));
    cands.push_back(nested_minmax(spec, u, x0, config(Method::nested)));
    double worst_point = 0.0, worst_value = 0.0;
    for (const auto& c : cands) {
        worst_point = std::max({worst_point, std::abs(c.x[1] + 0.2), std::abs(c.y[1] + 0.6)});
        worst_value = std::max(worst_value, std::abs(c.value - 0.2));
        o.require(c.converged(), std::string(name(c.method)) + " did not converge");
    }
    o.require(worst_point <= 1e-8, "point error " + num(worst_point));
    o.require(worst_value <= 1e-10, "value error " + num(worst_value));
    if (o.pass) o.detail = "point error " + num(worst_point) + ", value error " + num(worst_value);
    return o;
}

// 5. Linear-quadratic instances against the direct 2T x 2T solve.
Outcome linear_quadratic() {
    Outcome o;
    std::mt19937_64 rng(5);
    double worst_newton = 0.0, worst_other = 0.0;
    for (int i = 0; i < 20; ++i) {
        const auto in = oracle::random_instance(rng, 1 + static_cast<std::size_t>(i % 10), true);
        const auto b = build(in);
        const Vector direct = in.direct_solution();
        std::uniform_real_distribution<double> sym(-2.0, 2.0);
        Vector s0(2 * static_cast<Eigen::Index>(in.T));
        for (auto& c : s0) c = sym(rng);
        const auto T = static_cast<Eigen::Index>(in.T);
        const GridFunction x0 = GridFunction::from_interior(Vector(s0.head(T)));
        const GridFunction y0 = GridFunction::from_interior(Vector(s0.tail(T)));
        const SaddleCandidate cn = newton(b.spec, b.u, x0, y0, config(Method::newton));
        const SaddleCandidate ce = extragradient(b.spec, b.u, x0, y0, config(Method::extragradient));
        const SaddleCandidate cm = nested_minimax(b.spec, b.u, y0, config(Method::nested));
        o.require(cn.iterations <= 1, "Newton took " + std::to_string(cn.iterations) + " steps");
        worst_newton = std::max(worst_newton, max_abs_diff(stacked(cn), direct));
        worst_other = std::max({worst_other, max_abs_diff(stacked(ce), direct), max_abs_diff(stacked(cm), direct)});
    }
    o.require(worst_newton <= 1e-8, "Newton vs direct " + num(worst_newton));
    o.require(worst_other <= 1e-6, "extragradient/nested vs direct " + num(worst_other));
    if (o.pass) o.detail = "Newton error " + num(worst_newton) + ", extragradient/nested error " + num(worst_other);
    return o;
}

// 6. min_x max_y = max_y min_x at computed saddles.
Outcome fan_equality() {
    Outcome o;
    std::mt19937_64 rng(6);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const auto in = oracle::random_instance(rng, 1 + static_cast<std::size_t>(i % 8), i % 2 == 1);
        const auto b = build(in);
        const SaddleCandidate lo = nested_minimax(b.spec, b.u, GridFunction(in.T), config(Method::nested));
        const SaddleCandidate hi = nested_minmax(b.spec, b.u, GridFunction(in.T), config(Method::nested));
        o.require(lo.converged() && hi.converged(), "nested solve did not converge");
        worst = std::max(worst, std::abs(lo.value - hi.value));
    }
    o.require(worst <= 1e-8, "gap " + num(worst));
    if (o.pass) o.detail = "10 instances, worst |minmax - maxmin| = " + num(worst);
    return o;
}

// 7. Computed saddles lie in the balls B_1 x B_2.
Outcome containment() {
    Outcome o;
    std::mt19937_64 rng(7);
    double worst = -std::numeric_limits<double>::infinity();
    int checked = 0;
    for (int i = 0; i < 20; ++i) {
        const auto in = oracle::random_instance(rng, 1 + static_cast<std::size_t>(i % 10), i % 2 == 0);
        const auto b = build(in);
        const GrowthReport g = verify_growth(b.spec, b.cert);
        o.require(g.passed(), "analytic certificate rejected: " + g.message);
        const BallRadii r = ball_radii(b.cert, in.T);
        SolverConfig cfg = config(Method::newton);
        cfg.radii = r;
        cfg.multistart = 4;
        const SaddleSet set = saddle_set(b.spec, b.u, cfg);
        VerifyOptions vo;
        vo.radii = r;
        for (const auto& c : set.points) {
            if (!verify_saddle(b.spec, b.u, c, vo).passed()) continue;
            ++checked;
            worst = std::max({worst, h_norm(c.x) / r.r1 - 1.0, h_norm(c.y) / r.r2 - 1.0});
        }
    }
    o.require(checked >= 20, "only " + std::to_string(checked) + " verified saddles");
    o.require(worst <= 1e-6, "escape by " + num(worst) + " relative");
    if (o.pass) o.detail = std::to_string(checked) + " saddles, max (norm/radius - 1) = " + num(worst);
    return o;
}

// 8. Continuous dependence on u.
Outcome dependence() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    {
        const ProblemSpec spec(1, 2.0, ScalarField::parse("x*y + u*(x - y)"));
        const auto u0 = ParameterFunction::constant(1, 1.0, 2.0);
        const auto seq = ParameterSequence::rule(u0, {1.0}, 100);
        DependenceConfig cfg;
        cfg.solver = config(Method::newton);
        cfg.solver.multistart = 4;
        GrowthCertificate cert = GrowthCertificate::zero(1);
        cert.alpha1 = cert.alpha2 = 0.25;
        cert.gamma1 = {-4.0};
        cert.gamma2 = {4.0};
        cfg.radii = ball_radii(cert, 1);
        cfg.solver.radii = cfg.radii;
        const DependenceReport rep = run_sequence(spec, seq, cfg);
        const double tol = cfg.solver.tol_res;
        double worst_dist = 0.0, worst_value = 0.0;
        for (const auto& r : rep.rows) {
            const double n = r.n;
            worst_dist = std::max(worst_dist, std::abs(r.dist_n - std::sqrt(0.8) / n));
            worst_value = std::max(worst_value, std::abs(std::abs(r.a_n - rep.a0) - (2.0 / n + 1.0 / (n * n)) / 5.0));
        }
        o.require(rep.nonempty() && rep.rows.size() == 8, "closed-form sweep incomplete");
        o.require(worst_dist <= 1e-6 + tol, "dist_n error " + num(worst_dist));
        o.require(worst_value <= 1e-8, "a_n error " + num(worst_value));
        const UpperLimitReport ul = upper_limit_check(spec, rep, 1e-4, cfg.solver);
        o.require(ul.passed, "upper limit: " + ul.message);
        o.detail = "closed form: dist error " + num(worst_dist) + ", value error " + num(worst_value);
    }
    std::mt19937_64 rng(8);
    double worst_final = 0.0, worst_excess = -1e300;
    for (int i = 0; i < 5; ++i) {
        auto in = oracle::random_instance(rng, 4 + static_cast<std::size_t>(i), false);
        for (auto& v : in.u) v *= 0.5;  // keep u0 + v/n inside the box
        const auto b = build(in);
        std::uniform_real_distribution<double> sym(-1.0, 1.0);
        std::vector<double> v(in.T);
        for (auto& c : v) c = 0.005 * sym(rng);
        const auto seq = ParameterSequence::rule(b.u, v, 64);
        DependenceConfig cfg;
        cfg.solver = config(Method::newton);
        cfg.solver.multistart = 4;
        cfg.radii = ball_radii(b.cert, in.T);
        cfg.solver.radii = cfg.radii;
        const DependenceReport rep = run_sequence(b.spec, seq, cfg);
        const double tol = cfg.solver.tol_res;
        o.require(rep.nonempty(), "empty saddle set");
        worst_final = std::max(worst_final, rep.final_distance());
        for (const auto& r : rep.rows) {
            worst_excess = std::max(worst_excess, std::abs(r.a_n - rep.a0) - (r.gap_n + 2.0 * tol));
        }
        // Cauchy: consecutive values move by less as n grows, ending within tol_dep.
        for (std::size_t j = 2; j < rep.rows.size(); ++j) {
            const double step = std::abs(rep.rows[j].a_n - rep.rows[j - 1].a_n);
            const double before = std::abs(rep.rows[j - 1].a_n - rep.rows[j - 2].a_n);
            o.require(step <= before + 2.0 * tol, "a_n not Cauchy at n = " + std::to_string(rep.rows[j].n));
        }
        o.require(rep.value_gap() <= cfg.tol_dep, "value gap " + num(rep.value_gap()));
    }
    const double elapsed = seconds_since(t0);
    o.require(worst_final <= 1e-4, "random instances: dist_64 = " + num(worst_final));
    o.require(worst_excess <= 0.0, "|a_n - a_0| exceeds uniform gap + 2 tol by " + num(worst_excess));
    o.require(elapsed < 60.0, "runtime " + num(elapsed) + " s");
    if (o.pass) o.detail += "; random: max dist_64 = " + num(worst_final) + "; " + num(elapsed) + " s";
    return o;
}

// 9. Expression DSL: derivatives against differences, parse/print round trip.
saddlebvp::Expr random_ast(std::mt19937_64& rng, int depth) {
    using namespace saddlebvp;
    std::uniform_int_distribution<int> pick(0, 9);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    const int choice = depth <= 0 ? pick(rng) % 2 : pick(rng);
    switch (choice) {
        case 0: {
            const double v = std::round(val(rng) * 8.0) / 8.0;
            return ast::number(pick(rng) < 3 ? v * 1e-7 + 1.0 / 3.0 : v);
        }
        case 1: return ast::variable(static_cast<Var>(pick(rng) % 4));
        case 2: return ast::neg(random_ast(rng, depth - 1));
        case 3: return ast::add(random_ast(rng, depth - 1), random_ast(rng, depth - 1));
        case 4: return ast::sub(random_ast(rng, depth - 1), random_ast(rng, depth - 1));
        case 5: return ast::mul(random_ast(rng, depth - 1), random_ast(rng, depth - 1));
        case 6: return ast::div(random_ast(rng, depth - 1), random_ast(rng, depth - 1));
        case 7: {
            Expr base = random_ast(rng, depth - 1);
            Expr ex = random_ast(rng, depth - 1);
            // Negative constant bases need integer constant exponents.
            if (base->kind == NodeKind::number && base->value < 0 && ex->kind == NodeKind::number) {
                ex = ast::number(std::round(ex->value));
            }
            return ast::pow(std::move(base), std::move(ex));
        }
        default: return ast::call(static_cast<Func>(pick(rng) % 7), random_ast(rng, depth - 1));
    }
}

Outcome expression_dsl() {
    Outcome o;
    // Every function, composed so that arguments stay in the domain.
    const std::vector<std::string> fields = {
        "sin(x*y) + cos(x - y)", "exp(0.3*x*y) - tanh(y)", "log(1 + x^2 + y^2)", "sqrt(2 + x^2) * y", "x^3*y^2 / (1 + y^2)",
        "abs(u)*x*y + abs(k)*y^2", "tanh(x + y)^2", "(1 + x^2)^(1.5) - y^4", "-x*y + u*(x - y)", "exp(sin(x)) * cos(y)^2"};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> sym(-1.5, 1.5);
    double worst = 0.0, worst_sym = 0.0;
    for (const auto& text : fields) {
        const ScalarField f = ScalarField::parse(text);
        for (int i = 0; i < 100; ++i) {
            Env env{1.0 + std::floor(4.0 * (sym(rng) + 1.5)), sym(rng), sym(rng), sym(rng)};
            auto fd = [&](const Expr& e, Var v) {
                double& slot = v == Var::x ? env.x : env.y;
                const double s0 = slot, h = 1e-6 * (1.0 + std::abs(s0));
                slot = s0 + h;
                const double p = eval(e, env);
                slot = s0 - h;
                const double m = eval(e, env);
                slot = s0;
                return (p - m) / (2.0 * h);
            };
            const std::pair<const Expr*, std::pair<const Expr*, Var>> checks[] = {
                {&f.fx(), {&f.f(), Var::x}},   {&f.fy(), {&f.f(), Var::y}},   {&f.fxx(), {&f.fx(), Var::x}},
                {&f.fxy(), {&f.fx(), Var::y}}, {&f.fyy(), {&f.fy(), Var::y}},
            };
            for (const auto& [d, src] : checks) {
                const double ref = fd(*src.first, src.second);
                worst = std::max(worst, std::abs(eval(*d, env) - ref) / (1.0 + std::abs(ref)));
            }
            const double yx = eval(differentiate(f.fy(), Var::x), env);
            worst_sym = std::max(worst_sym, std::abs(eval(f.fxy(), env) - yx) / (1.0 + std::abs(yx)));
        }
    }
    o.require(worst <= 1e-6, "derivative error " + num(worst));
    o.require(worst_sym <= 1e-9, "mixed partial asymmetry " + num(worst_sym));

    int round_trips = 0;
    for (int i = 0; i < 1000; ++i) {
        const Expr e = random_ast(rng, 1 + i % 6);
        const std::string text = print(e);
        try {
            if (structurally_equal(parse(text), e)) ++round_trips;
            else o.require(false, "round trip changed '" + text + "'");
        } catch (const ParseError& err) {
            o.require(false, "printed form '" + text + "' does not parse: " + err.what());
        }
    }
    o.require(round_trips == 1000, std::to_string(round_trips) + "/1000 round trips");
    if (o.pass) o.detail = "derivative error " + num(worst) + ", 1000/1000 round trips";
    return o;
}

// 10. Byte-identical CLI outputs for identical seeds.
std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    Outcome o;
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "saddlebvp-acceptance";
    fs::create_directories(dir);
    const std::string cli = SADDLEBVP_CLI;
    const std::string data = SADDLEBVP_DATA;
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + cli + "\" " + args + " 2>/dev/null";
        return std::system(cmd.c_str());
    };
    for (int r = 0; r < 2; ++r) {
        const std::string tag = std::to_string(r);
        const int a = run("solve \"" + data + "/nonlinear.json\" --method extragradient --multistart 3 --seed 42 --out \"" +
                          (dir / ("solve" + tag + ".json")).string() + "\" --trace \"" + (dir / ("trace" + tag + ".csv")).string() + "\"");
        const int b = run("sweep \"" + data + "/bilinear.json\" --seed 42 --out \"" + (dir / ("sweep" + tag + ".json")).string() +
                          "\" --csv \"" + (dir / ("sweep" + tag + ".csv")).string() + "\"");
        o.require(a == 0 && b == 0, "CLI exit codes " + std::to_string(a) + ", " + std::to_string(b));
    }
    for (const char* f : {"solve", "trace", "sweep"}) {
        const std::string ext = std::string(f) == "trace" ? ".csv" : ".json";
        const std::string x = slurp(dir / (std::string(f) + "0" + ext));
        const std::string y = slurp(dir / (std::string(f) + "1" + ext));
        o.require(!x.empty() && x == y, std::string(f) + ext + " differs between runs");
    }
    const std::string x = slurp(dir / "sweep0.csv"), y = slurp(dir / "sweep1.csv");
    o.require(!x.empty() && x == y, "sweep CSV differs between runs");
    if (o.pass) o.detail = "solve JSON, trace CSV, sweep JSON and CSV identical";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"embedding constant c_2", embedding},
        {"gradient vs finite differences", gradient},
        {"critical point <=> solution", critical_points},
        {"closed-form T=1 instance", closed_form},
        {"linear-quadratic oracle", linear_quadratic},
        {"Fan equality at solutions", fan_equality},
        {"ball containment", containment},
        {"continuous dependence", dependence},
        {"expression DSL", expression_dsl},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += o.pass ? 0 : 1;
        std::cout << "criterion " << (i + 1) << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail
                  << ")" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
