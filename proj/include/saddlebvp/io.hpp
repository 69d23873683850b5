#pragma once

// JSON problem, certificate and sequence files; JSON/CSV result emission.
//
// Doubles are written so that they read back bit-identically: JSON uses the
// shortest round-trip representation, CSV uses %.17g.

#include "saddlebvp/dependence.hpp"
#include "saddlebvp/hypotheses.hpp"
#include "saddlebvp/problem.hpp"
#include "saddlebvp/solvers.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace saddlebvp {

using json = nlohmann::json;

inline constexpr const char* tool_version = "0.1.0";

/// Input error with the JSON path that caused it.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": invalid JSON: " + e.what());
    }
}

namespace detail {

inline const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing key '" + key + "'");
    return j.at(key);
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw InputError(where + ": expected a number");
    return j.get<double>();
}

/// Either an expression in k sampled at k = 1..T, or an array of T numbers.
/// Expression errors cite the byte offset within the string.
inline std::vector<double> node_values(const json& j, std::size_t T, const std::string& where) {
    if (j.is_number()) return std::vector<double>(T, j.get<double>());
    if (j.is_string()) {
        const std::string text = j.get<std::string>();
        Expr e;
        try {
            e = parse(text);
        } catch (const ParseError& err) {
            throw InputError(where + ": \"" + text + "\": parse error at byte " + err.what());
        }
        for (Var v : {Var::x, Var::y, Var::u}) {
            if (depends_on(e, v)) throw InputError(where + ": expression may only use k");
        }
        std::vector<double> vals(T);
        for (std::size_t k = 1; k <= T; ++k) vals[k - 1] = eval(e, Env{static_cast<double>(k)});
        return vals;
    }
    if (j.is_array()) {
        if (j.size() != T) {
            throw InputError(where + ": expected " + std::to_string(T) + " values, got " + std::to_string(j.size()));
        }
        std::vector<double> vals;
        for (std::size_t i = 0; i < T; ++i) vals.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
        return vals;
    }
    throw InputError(where + ": expected a number, an expression in k, or an array");
}

/// A GridFunction: T+2 values with zero ends, or T interior values.
inline GridFunction grid_function(const json& j, std::size_t T, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], where));
    try {
        if (v.size() == T + 2) return GridFunction::from_values(v);
        if (v.size() == T) return GridFunction::from_interior(std::span<const double>(v));
    } catch (const std::invalid_argument& e) {
        throw InputError(where + ": " + e.what());
    }
    throw InputError(where + ": expected " + std::to_string(T + 2) + " values (or " + std::to_string(T) + " interior values)");
}

}  // namespace detail

/// Problem file: {"T": int, "D": number, "F": "expr", "u": "expr in k" | [T numbers]}.
/// Optional keys "certificate" and "sequence" hold embedded documents.
struct ProblemFile {
    std::string path;
    json document;
    ProblemSpec spec;
    ParameterFunction u;
    std::string F;
};

inline ProblemFile load_problem(const json& j, const std::string& where = "problem") {
    if (!j.is_object()) throw InputError(where + ": expected a JSON object");
    const json& jt = detail::require(j, "T", where);
    if (!jt.is_number_integer() || jt.get<long long>() < 1) throw InputError(where + ".T: expected an integer >= 1");
    const auto T = static_cast<std::size_t>(jt.get<long long>());
    const double D = detail::number(detail::require(j, "D", where), where + ".D");
    if (!(D > 0.0)) throw InputError(where + ".D: must be positive");
    const json& jf = detail::require(j, "F", where);
    if (!jf.is_string()) throw InputError(where + ".F: expected an expression string");
    const std::string F = jf.get<std::string>();

    ScalarField field = [&] {
        try {
            return ScalarField::parse(F, true);
        } catch (const ParseError& e) {
            throw InputError(where + ".F: \"" + F + "\": parse error at byte " + e.what());
        } catch (const DiffError&) {
            // Not twice differentiable: first partials only (extragradient and nested still apply).
        }
        try {
            return ScalarField::parse(F, false);
        } catch (const DiffError& e) {
            throw InputError(where + ".F: " + e.what());
        }
    }();

    std::vector<double> uv = j.contains("u") ? detail::node_values(j.at("u"), T, where + ".u") : std::vector<double>(T, 0.0);
    try {
        ParameterFunction u(std::move(uv), D);
        return ProblemFile{"", j, ProblemSpec(T, D, std::move(field)), std::move(u), F};
    } catch (const std::invalid_argument& e) {
        throw InputError(where + ".u: " + e.what());
    }
}

inline ProblemFile load_problem_file(const std::string& path) {
    ProblemFile p = load_problem(read_json_file(path), path);
    p.path = path;
    return p;
}

/// Certificate: {"alpha1", "beta1", "gamma1", "alpha2", "beta2", "gamma2",
/// "box_radius"?, "anchor_x"?, "anchor_y"?}; gamma_i may be a number, an
/// expression in k, or an array; anchors default to zero.
inline GrowthCertificate load_certificate(const json& j, std::size_t T, const std::string& where = "certificate") {
    if (!j.is_object()) throw InputError(where + ": expected a JSON object");
    GrowthCertificate c = GrowthCertificate::zero(T);
    c.alpha1 = detail::number(detail::require(j, "alpha1", where), where + ".alpha1");
    c.beta1 = j.contains("beta1") ? detail::number(j.at("beta1"), where + ".beta1") : 0.0;
    c.gamma1 = detail::node_values(detail::require(j, "gamma1", where), T, where + ".gamma1");
    c.alpha2 = detail::number(detail::require(j, "alpha2", where), where + ".alpha2");
    c.beta2 = j.contains("beta2") ? detail::number(j.at("beta2"), where + ".beta2") : 0.0;
    c.gamma2 = detail::node_values(detail::require(j, "gamma2", where), T, where + ".gamma2");
    if (j.contains("box_radius")) c.box_radius = detail::number(j.at("box_radius"), where + ".box_radius");
    if (!(c.box_radius > 0.0)) throw InputError(where + ".box_radius: must be positive");
    if (j.contains("anchor_x")) c.anchor_x = detail::grid_function(j.at("anchor_x"), T, where + ".anchor_x");
    if (j.contains("anchor_y")) c.anchor_y = detail::grid_function(j.at("anchor_y"), T, where + ".anchor_y");
    return c;
}

/// Sequence: {"u0"?: values, "N": int, "direction"?: values} for the rule
/// u_n = u0 + direction/n (direction 0 when omitted), or {"u0"?, "terms": [values...]}.
/// u0 defaults to the problem's u.
inline ParameterSequence load_sequence(const json& j, const ProblemFile& p, const std::string& where = "sequence") {
    if (!j.is_object()) throw InputError(where + ": expected a JSON object");
    const std::size_t T = p.spec.T();
    const double D = p.spec.D();
    auto param = [&](const json& v, const std::string& w) {
        try {
            return ParameterFunction(detail::node_values(v, T, w), D);
        } catch (const std::invalid_argument& e) {
            throw InputError(w + ": " + e.what());
        }
    };
    ParameterFunction u0 = j.contains("u0") ? param(j.at("u0"), where + ".u0") : p.u;
    if (j.contains("terms")) {
        const json& t = j.at("terms");
        if (!t.is_array() || t.empty()) throw InputError(where + ".terms: expected a nonempty array");
        std::vector<ParameterFunction> terms;
        for (std::size_t i = 0; i < t.size(); ++i) terms.push_back(param(t[i], where + ".terms[" + std::to_string(i) + "]"));
        return ParameterSequence::list(std::move(u0), std::move(terms));
    }
    const json& jn = detail::require(j, "N", where);
    if (!jn.is_number_integer() || jn.get<long long>() < 1) throw InputError(where + ".N: expected an integer >= 1");
    const int N = static_cast<int>(jn.get<long long>());
    std::vector<double> dir = j.contains("direction") ? detail::node_values(j.at("direction"), T, where + ".direction")
                                                      : std::vector<double>(T, 0.0);
    return ParameterSequence::rule(std::move(u0), std::move(dir), N);
}

// ------------------------------------------------------------ emission

inline json to_json(const GridFunction& g) { return json(g.values()); }

inline json to_json(const ParameterFunction& u) { return json(u.values()); }

inline json to_json(const BallRadii& b) {
    return json{{"r1", b.r1},
                {"r2", b.r2},
                {"beta_tilde1", b.beta_tilde1},
                {"gamma_tilde1", b.gamma_tilde1},
                {"beta_tilde2", b.beta_tilde2},
                {"gamma_tilde2", b.gamma_tilde2},
                {"lower_value", b.lower_value},
                {"upper_value", b.upper_value}};
}

inline json to_json(const GrowthCertificate& c) {
    return json{{"alpha1", c.alpha1}, {"beta1", c.beta1}, {"gamma1", c.gamma1},  {"alpha2", c.alpha2},
                {"beta2", c.beta2},   {"gamma2", c.gamma2}, {"box_radius", c.box_radius},
                {"anchor_x", to_json(c.anchor_x)}, {"anchor_y", to_json(c.anchor_y)}};
}

inline json to_json(const SaddleCandidate& c) {
    json j{{"x", to_json(c.x)},
           {"y", to_json(c.y)},
           {"value", c.value},
           {"grad_norm", c.grad_norm},
           {"residual_norm", c.residual_norm},
           {"method", std::string(name(c.method))},
           {"iterations", c.iterations},
           {"status", std::string(name(c.status))}};
    if (c.condition_estimate > 0.0) j["condition_estimate"] = c.condition_estimate;
    return j;
}

inline json to_json(const SaddleReport& r) {
    return json{{"passed", r.passed()},
                {"residual", r.residual},
                {"tol_res", r.tol_res},
                {"residual_ok", r.residual_ok},
                {"worst_upper", r.worst_upper},
                {"worst_lower", r.worst_lower},
                {"inequalities_ok", r.inequalities_ok},
                {"min_x_value", r.min_x_value},
                {"max_y_value", r.max_y_value},
                {"minimax_ok", r.minimax_ok},
                {"eps", r.eps},
                {"probes", r.probes}};
}

inline json to_json(const GrowthReport& r) {
    json j{{"passed", r.passed()},
           {"alpha_ok", r.alpha_ok},
           {"alpha_limit", r.alpha_limit},
           {"worst_lower_margin", r.worst_lower_margin},
           {"worst_upper_margin", r.worst_upper_margin},
           {"samples", r.samples},
           {"message", r.message}};
    if (r.counterexample) {
        const auto& c = *r.counterexample;
        j["counterexample"] = json{{"bound", c.bound == GrowthViolation::Bound::lower ? "lower" : "upper"},
                                   {"k", c.k},
                                   {"s", c.s},
                                   {"u", c.u},
                                   {"margin", c.margin}};
    }
    return j;
}

inline json to_json(const ConvexityReport& r) {
    json j{{"passed", r.passed()}, {"exact", r.exact}, {"samples", r.samples}, {"box_radius", r.box_radius}};
    if (std::isfinite(r.worst_midpoint_gap)) j["worst_midpoint_gap"] = r.worst_midpoint_gap;
    if (std::isfinite(r.extreme_eigenvalue)) j["extreme_eigenvalue"] = r.extreme_eigenvalue;
    if (r.counterexample) {
        const auto& c = *r.counterexample;
        j["counterexample"] = json{{"kind", c.kind == ConvexityCounterexample::Kind::midpoint ? "midpoint" : "hessian"},
                                   {"first", to_json(c.first)},
                                   {"second", to_json(c.second)},
                                   {"fixed", to_json(c.fixed)},
                                   {"violation", c.violation}};
    }
    return j;
}

inline json to_json(const SolverConfig& c) {
    json j{{"method", std::string(name(c.method))},
           {"tol_grad", c.tol_grad},
           {"tol_res", c.tol_res},
           {"max_iter", c.max_iter},
           {"multistart", c.multistart},
           {"seed", c.seed},
           {"cluster_radius", c.cluster_radius}};
    if (c.step > 0.0) j["step"] = c.step;
    return j;
}

/// Provenance block embedded in every output file. Wall time is included only
/// on request so that default outputs are byte-identical across runs.
struct RunManifest {
    std::string problem;
    std::string subcommand;
    json config = json::object();
    std::uint64_t seed = 0;
    std::optional<std::string> wall_time;

    json to_json() const {
        json j{{"tool", "saddlebvp"},
               {"version", tool_version},
               {"subcommand", subcommand},
               {"problem", problem},
               {"seed", seed},
               {"config", config}};
        if (wall_time) j["wall_time"] = *wall_time;
        return j;
    }
};

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes `text` to `path`, or to stdout when path is empty or "-".
inline void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
    if (!out) throw InputError("write failed for '" + path + "'");
}

/// CSV with a leading "# manifest: {...}" comment line.
inline std::string csv_document(const RunManifest& m, const std::string& header, const std::vector<std::vector<double>>& rows) {
    std::ostringstream s;
    s << "# manifest: " << m.to_json().dump() << "\n" << header << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s << (i ? "," : "") << format_double(r[i]);
        s << "\n";
    }
    return s.str();
}

}  // namespace saddlebvp
