// saddlebvp command-line tool: solve | check | sweep | constants.
//
// Exit codes: 0 success (verified saddle / certificate holds / upper limit
// check passes), 2 the check ran but failed, 1 input or runtime error.

#include "saddlebvp/saddlebvp.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace saddlebvp;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_failed = 2;

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct Common {
    std::string problem;
    std::string certificate;
    std::string out;
    std::uint64_t seed = 1;
    bool timestamp = false;
};

RunManifest manifest(const Common& c, const std::string& sub, json config) {
    RunManifest m;
    m.problem = c.problem;
    m.subcommand = sub;
    m.config = std::move(config);
    m.seed = c.seed;
    if (c.timestamp) m.wall_time = utc_now();
    return m;
}

/// Certificate from --certificate, else the problem's "certificate" key.
std::optional<GrowthCertificate> given_certificate(const ProblemFile& p, const std::string& path) {
    if (!path.empty()) return load_certificate(read_json_file(path), p.spec.T(), path);
    if (p.document.contains("certificate")) return load_certificate(p.document.at("certificate"), p.spec.T(), p.path + ".certificate");
    return std::nullopt;
}

/// Growth certificate used to bound the search region: the given one, or a
/// fitted one when none is supplied. Radii are set only if it verifies.
struct Region {
    GrowthCertificate cert;
    std::string source;
    GrowthReport growth;
    std::optional<BallRadii> radii;

    json to_json() const {
        json j{{"source", source}, {"certificate", saddlebvp::to_json(cert)}, {"growth", saddlebvp::to_json(growth)}};
        j["radii"] = radii ? saddlebvp::to_json(*radii) : json(nullptr);
        return j;
    }
};

Region region(const ProblemFile& p, const std::string& cert_path) {
    Region r;
    int density = 401;
    if (auto c = given_certificate(p, cert_path)) {
        r.cert = std::move(*c);
        r.source = "certificate";
    } else {
        FitOptions fo;
        density = fo.density;
        r.cert = fit_certificate(p.spec, fo).cert;
        r.source = "fitted";
    }
    r.growth = verify_growth(p.spec, r.cert, density);
    if (r.growth.passed()) r.radii = ball_radii(r.cert, p.spec.T());
    return r;
}

void add_common(CLI::App* sub, Common& c, bool problem_required = true) {
    auto* opt = sub->add_option("problem", c.problem, "problem JSON file");
    if (problem_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "seed for every random choice")->capture_default_str();
    sub->add_option("--out", c.out, "JSON output file (default: stdout)");
    sub->add_flag("--timestamp", c.timestamp, "record wall time in the manifest");
}

// ------------------------------------------------------------ solve

struct SolveArgs {
    Common common;
    std::string method;
    double tol = 1e-10;
    int max_iter = 200000;
    int multistart = 8;
    double step = 0.0;
    std::string trace;
    int probes = 64;
};

int cmd_solve(const SolveArgs& a) {
    const ProblemFile p = load_problem_file(a.common.problem);
    SolverConfig cfg;
    cfg.method = a.method.empty() ? (p.spec.field().has_second_partials() ? Method::newton : Method::extragradient)
                                  : parse_method(a.method);
    if (cfg.method == Method::newton && !p.spec.field().has_second_partials()) {
        throw InputError("method newton needs second partials of F; use extragradient or nested");
    }
    cfg.tol_grad = cfg.tol_res = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.multistart = a.multistart;
    cfg.seed = a.common.seed;
    cfg.step = a.step;
    cfg.validate();

    const Region reg = region(p, a.common.certificate);
    cfg.radii = reg.radii;
    std::vector<std::vector<double>> trace_rows;
    if (!a.trace.empty()) {
        cfg.trace = [&](const TraceRow& r) {
            trace_rows.push_back({double(r.start), double(r.iter), r.grad_norm, r.residual, r.value});
        };
    }
    const SaddleSet set = saddle_set(p.spec, p.u, cfg);

    VerifyOptions vo;
    vo.probes = a.probes;
    vo.seed = a.common.seed;
    vo.radii = reg.radii;
    bool all_verified = !set.empty();
    json points = json::array();
    for (const auto& c : set.points) {
        const SaddleReport rep = verify_saddle(p.spec, p.u, c, vo);
        all_verified = all_verified && rep.passed();
        json jc = to_json(c);
        jc["verification"] = to_json(rep);
        points.push_back(std::move(jc));
    }

    json config = to_json(cfg);
    config["probes"] = a.probes;
    const RunManifest m = manifest(a.common, "solve", config);
    json doc{{"manifest", m.to_json()},
             {"problem", {{"T", p.spec.T()}, {"D", p.spec.D()}, {"F", p.F}, {"u", to_json(p.u)}}},
             {"region", reg.to_json()},
             {"saddle_set",
              {{"cluster_radius", set.cluster_radius}, {"starts", set.starts}, {"converged", set.converged}, {"points", points}}},
             {"verified", all_verified}};
    write_text(a.common.out, doc.dump(2) + "\n");
    if (!a.trace.empty()) write_text(a.trace, csv_document(m, "start,iter,grad_norm,residual,value", trace_rows));

    if (set.empty()) {
        std::cerr << "solve: no start converged (" << set.starts << " starts)\n";
    } else if (!all_verified) {
        std::cerr << "solve: " << set.points.size() << " candidate(s), not all verified as saddle points\n";
    }
    return all_verified ? exit_ok : exit_failed;
}

// ------------------------------------------------------------ check

std::string describe(const ConvexityCounterexample& c, const char* extreme) {
    if (c.kind == ConvexityCounterexample::Kind::hessian) {
        return std::string(extreme) + " Hessian eigenvalue " + format_double(c.violation);
    }
    return "midpoint inequality fails by " + format_double(c.violation);
}

struct CheckArgs {
    Common common;
    int density = 401;
    int samples = 200;
    int fixed_points = 4;
};

int cmd_check(const CheckArgs& a) {
    const ProblemFile p = load_problem_file(a.common.problem);
    const std::size_t T = p.spec.T();
    std::optional<GrowthCertificate> given = given_certificate(p, a.common.certificate);
    FitOptions fo;
    fo.density = a.density;
    GrowthCertificate cert = given ? *given : fit_certificate(p.spec, fo).cert;

    const GrowthReport growth = verify_growth(p.spec, cert, a.density);
    json doc;
    doc["certificate_source"] = given ? "certificate" : "fitted";
    doc["certificate"] = to_json(cert);
    doc["growth"] = to_json(growth);
    bool ok = growth.passed();
    std::vector<std::string> messages;
    if (!growth.passed()) messages.push_back(growth.message);
    if (growth.alpha_ok) {
        const BallRadii r = ball_radii(cert, T);
        doc["radii"] = to_json(r);
    }

    // H4 at anchor_y and H5 at anchor_x, then at seeded random fixed arguments.
    ConvexityOptions co;
    co.box_radius = cert.box_radius;
    co.samples = a.samples;
    co.seed = a.common.seed;
    std::mt19937_64 rng(a.common.seed);
    std::uniform_real_distribution<double> unif(-cert.box_radius, cert.box_radius);
    json cx = json::array(), cy = json::array();
    for (int i = 0; i <= a.fixed_points; ++i) {
        GridFunction fy = cert.anchor_y, fx = cert.anchor_x;
        if (i > 0) {
            Vector vy(static_cast<Eigen::Index>(T)), vx(static_cast<Eigen::Index>(T));
            for (auto& c : vy) c = unif(rng);
            for (auto& c : vx) c = unif(rng);
            fy = GridFunction::from_interior(vy);
            fx = GridFunction::from_interior(vx);
        }
        const ConvexityReport rx = check_convexity_x(p.spec, p.u, fy, co);
        const ConvexityReport ry = check_concavity_y(p.spec, p.u, fx, co);
        cx.push_back(to_json(rx));
        cy.push_back(to_json(ry));
        if (!rx.passed()) messages.push_back("convexity in x violated: " + describe(*rx.counterexample, "smallest"));
        if (!ry.passed()) messages.push_back("concavity in y violated: " + describe(*ry.counterexample, "largest"));
        ok = ok && rx.passed() && ry.passed();
        if (!ok) break;
    }
    doc["convexity_x"] = cx;
    doc["concavity_y"] = cy;
    doc["passed"] = ok;
    doc["messages"] = messages;

    const RunManifest m = manifest(a.common, "check", json{{"density", a.density}, {"samples", a.samples}, {"fixed_points", a.fixed_points}});
    json full{{"manifest", m.to_json()}};
    full.update(doc);
    write_text(a.common.out, full.dump(2) + "\n");
    for (const auto& s : messages) std::cerr << "check: " << s << "\n";
    return ok ? exit_ok : exit_failed;
}

// ------------------------------------------------------------ sweep

struct SweepArgs {
    Common common;
    std::string sequence;
    std::string csv;
    std::string method;
    int multistart = 4;
    double tol = 1e-4;
    double tol_dep = 1e-2;
    double solver_tol = 1e-10;
};

int cmd_sweep(const SweepArgs& a) {
    const ProblemFile p = load_problem_file(a.common.problem);
    json jseq;
    std::string where;
    if (!a.sequence.empty()) {
        jseq = read_json_file(a.sequence);
        where = a.sequence;
    } else if (p.document.contains("sequence")) {
        jseq = p.document.at("sequence");
        where = p.path + ".sequence";
    } else {
        throw InputError("no sequence: pass --sequence or add a \"sequence\" key to the problem file");
    }
    const ParameterSequence seq = load_sequence(jseq, p, where);

    DependenceConfig cfg;
    cfg.solver.method = a.method.empty() ? (p.spec.field().has_second_partials() ? Method::newton : Method::extragradient)
                                         : parse_method(a.method);
    cfg.solver.multistart = a.multistart;
    cfg.solver.seed = a.common.seed;
    cfg.solver.tol_grad = cfg.solver.tol_res = a.solver_tol;
    cfg.solver.validate();
    cfg.tol_dep = a.tol_dep;
    const Region reg = region(p, a.common.certificate);
    cfg.solver.radii = reg.radii;
    if (reg.radii) cfg.radii = *reg.radii;

    const DependenceReport rep = run_sequence(p.spec, seq, cfg);
    VerifyOptions vo;
    vo.seed = a.common.seed;
    vo.radii = reg.radii;
    const UpperLimitReport ul = upper_limit_check(p.spec, rep, a.tol, cfg.solver, vo);

    json config = to_json(cfg.solver);
    config["tol"] = a.tol;
    config["tol_dep"] = a.tol_dep;
    config["gap_samples"] = cfg.gap_samples;
    const RunManifest m = manifest(a.common, "sweep", config);

    std::vector<std::vector<double>> rows;
    json jrows = json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({double(r.n), r.a_n, r.dist_n, r.gap_n});
        jrows.push_back({{"n", r.n},
                         {"a_n", r.a_n},
                         {"dist_n", r.dist_n},
                         {"gap_n", r.gap_n},
                         {"u_distance", r.u_distance},
                         {"projected", r.projected},
                         {"candidates", r.candidates.size()}});
    }
    json limits = json::array();
    for (const auto& l : ul.limits) {
        limits.push_back({{"x", to_json(l.polished.x)},
                          {"y", to_json(l.polished.y)},
                          {"extrapolation_error", l.extrapolation_error},
                          {"distance_to_v0", l.distance_to_v0},
                          {"verified", l.verified}});
    }
    json v0 = json::array();
    for (const auto& c : rep.v0.points) v0.push_back(to_json(c));
    json doc{{"manifest", m.to_json()},
             {"N", seq.N()},
             {"u0", to_json(seq.u0())},
             {"a0", rep.a0},
             {"v0", v0},
             {"rows", jrows},
             {"final_distance", rep.final_distance()},
             {"value_gap", rep.value_gap()},
             {"nonempty", rep.nonempty()},
             {"sequence_passed", rep.passed()},
             {"upper_limit", {{"passed", ul.passed}, {"tol", ul.tol}, {"tail_rows", ul.tail_rows}, {"message", ul.message}, {"limits", limits}}},
             {"passed", ul.passed}};
    if (!rep.failure.empty()) doc["failure"] = rep.failure;
    if (!a.csv.empty()) write_text(a.csv, csv_document(m, "n,a_n,dist_n,gap_n", rows));
    write_text(a.common.out, doc.dump(2) + "\n");
    if (!ul.passed) std::cerr << "sweep: " << ul.message << "\n";
    return ul.passed ? exit_ok : exit_failed;
}

// ------------------------------------------------------------ constants

struct ConstantsArgs {
    Common common;
    std::vector<double> m{2.0};
    std::vector<std::size_t> T;
    double safety = 1.05;
};

int cmd_constants(const ConstantsArgs& a) {
    std::vector<std::size_t> Ts = a.T;
    if (!a.common.problem.empty()) Ts.push_back(load_problem_file(a.common.problem).spec.T());
    if (Ts.empty()) Ts = {1, 2, 5, 10, 20};
    EmbeddingOptions eo;
    eo.seed = a.common.seed;
    json rows = json::array();
    std::ostringstream table;
    table << "m,T,c_m,kind,safe_upper\n";
    for (double m : a.m) {
        for (std::size_t T : Ts) {
            const EmbeddingConstant c = embedding_constant(m, T, eo);
            const double upper = c.exact ? c.value : c.safe_upper(a.safety);
            const char* kind = c.exact ? "exact" : "lower_estimate";
            table << format_double(m) << "," << T << "," << format_double(c.value) << "," << kind << "," << format_double(upper) << "\n";
            rows.push_back({{"m", m}, {"T", T}, {"value", c.value}, {"kind", kind}, {"safe_upper", upper}, {"maximizer", to_json(c.maximizer)}});
        }
    }
    if (a.common.out.empty()) {
        std::cout << table.str();
    } else {
        const RunManifest mf = manifest(a.common, "constants", json{{"safety", a.safety}});
        write_text(a.common.out, json{{"manifest", mf.to_json()}, {"constants", rows}}.dump(2) + "\n");
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Saddle points of discrete Dirichlet boundary value systems"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "compute and verify the saddle set");
    add_common(solve, solve_args.common);
    solve->add_option("--certificate", solve_args.common.certificate, "growth certificate JSON (bounds the start region)");
    solve->add_option("--method", solve_args.method, "extragradient | newton | nested (default: newton when F is C²)");
    solve->add_option("--tol", solve_args.tol, "gradient and residual tolerance")->capture_default_str();
    solve->add_option("--max-iter", solve_args.max_iter, "iteration cap per start")->capture_default_str();
    solve->add_option("--multistart", solve_args.multistart, "number of seeded starts")->capture_default_str();
    solve->add_option("--step", solve_args.step, "extragradient step (default: 0.9 / Lipschitz estimate)");
    solve->add_option("--probes", solve_args.probes, "random probes for the saddle inequalities")->capture_default_str();
    solve->add_option("--trace", solve_args.trace, "per-iteration convergence CSV");

    CheckArgs check_args;
    auto* check = app.add_subcommand("check", "verify a growth certificate and convexity/concavity");
    add_common(check, check_args.common);
    check->add_option("--certificate", check_args.common.certificate, "growth certificate JSON (default: embedded or fitted)");
    check->add_option("--density", check_args.density, "grid points per axis for the growth check")->capture_default_str();
    check->add_option("--samples", check_args.samples, "random pairs per convexity check")->capture_default_str();
    check->add_option("--fixed-points", check_args.fixed_points, "random fixed arguments beyond the anchors")->capture_default_str();

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "continuous dependence along a parameter sequence");
    add_common(sweep, sweep_args.common);
    sweep->add_option("--sequence", sweep_args.sequence, "sequence JSON (default: the problem's \"sequence\" key)");
    sweep->add_option("--certificate", sweep_args.common.certificate, "growth certificate JSON");
    sweep->add_option("--csv", sweep_args.csv, "CSV output: n,a_n,dist_n,gap_n");
    sweep->add_option("--method", sweep_args.method, "solver method");
    sweep->add_option("--multistart", sweep_args.multistart, "starts per parameter")->capture_default_str();
    sweep->add_option("--tol", sweep_args.tol, "upper-limit tolerance")->capture_default_str();
    sweep->add_option("--tol-dep", sweep_args.tol_dep, "tolerance on dist_N and |a_N - a_0|")->capture_default_str();
    sweep->add_option("--solver-tol", sweep_args.solver_tol, "solver tolerance")->capture_default_str();

    ConstantsArgs const_args;
    auto* constants = app.add_subcommand("constants", "table of embedding constants c_m");
    add_common(constants, const_args.common, false);
    constants->add_option("--m", const_args.m, "exponents m >= 2")->delimiter(',');
    constants->add_option("--T", const_args.T, "dimensions T >= 1")->delimiter(',');
    constants->add_option("--safety", const_args.safety, "factor for safe upper bounds when m > 2")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_error;
    }

    try {
        if (*solve) return cmd_solve(solve_args);
        if (*check) return cmd_check(check_args);
        if (*sweep) return cmd_sweep(sweep_args);
        if (*constants) return cmd_constants(const_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}
