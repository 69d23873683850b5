#pragma once

// Continuous dependence of the saddle set on the parameter u: parameter
// sequences u_n → u_0, the sampled uniform gap sup |J_{u_n} - J_{u_0}| on
// B_1 × B_2, the sweep over n, and the upper-limit check limsup V̂_n ⊂ V̂_0.

#include "saddlebvp/grid.hpp"
#include "saddlebvp/hypotheses.hpp"
#include "saddlebvp/problem.hpp"
#include "saddlebvp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace saddlebvp {

/// u_n for n = 1..N, either listed explicitly or given by the rule
/// u_n = u_0 + v/n, projected pointwise onto [-D, D] when it leaves the box.
class ParameterSequence {
public:
    struct Term {
        int n;
        ParameterFunction u;
        bool projected;
    };

    static ParameterSequence rule(ParameterFunction u0, std::vector<double> direction, int N) {
        if (direction.size() != u0.T()) throw std::invalid_argument("sequence direction must have T entries");
        for (double d : direction) {
            if (!std::isfinite(d)) throw std::invalid_argument("sequence direction must be finite");
        }
        ParameterSequence s(std::move(u0), N);
        s.direction_ = std::move(direction);
        return s;
    }

    static ParameterSequence constant(ParameterFunction u0, int N) {
        const std::size_t T = u0.T();
        return rule(std::move(u0), std::vector<double>(T, 0.0), N);
    }

    static ParameterSequence list(ParameterFunction u0, std::vector<ParameterFunction> terms) {
        const int N = static_cast<int>(terms.size());
        ParameterSequence s(std::move(u0), N);
        for (const auto& t : terms) {
            if (t.T() != s.u0_.T() || t.bound() != s.u0_.bound()) {
                throw std::invalid_argument("sequence terms must share T and D with u0");
            }
        }
        s.terms_ = std::move(terms);
        return s;
    }

    const ParameterFunction& u0() const { return u0_; }
    int N() const { return N_; }
    bool rule_based() const { return terms_.empty(); }
    const std::vector<double>& direction() const { return direction_; }

    Term term(int n) const {
        if (n < 1 || n > N_) throw std::out_of_range("sequence index " + std::to_string(n) + " outside 1.." + std::to_string(N_));
        if (!rule_based()) return {n, terms_[static_cast<std::size_t>(n - 1)], false};
        const double D = u0_.bound();
        std::vector<double> vals(u0_.T());
        bool projected = false;
        for (std::size_t k = 1; k <= u0_.T(); ++k) {
            const double raw = u0_(k) + direction_[k - 1] / n;
            vals[k - 1] = std::clamp(raw, -D, D);
            projected = projected || vals[k - 1] != raw;
        }
        return {n, ParameterFunction(std::move(vals), D), projected};
    }

    /// n ∈ {1, 2, 4, ..., N}, always ending with N.
    std::vector<int> geometric_schedule() const {
        std::vector<int> s;
        for (int n = 1; n < N_; n *= 2) s.push_back(n);
        s.push_back(N_);
        return s;
    }

private:
    ParameterSequence(ParameterFunction u0, int N) : u0_(std::move(u0)), N_(N) {
        if (N_ < 1) throw std::invalid_argument("sequence length N must be >= 1");
    }

    ParameterFunction u0_;
    int N_;
    std::vector<double> direction_;
    std::vector<ParameterFunction> terms_;
};

// ------------------------------------------------------------ uniform gap

/// Sample points of B_1 × B_2 shared by every gap evaluation with the same
/// (T, radii, seed): even indices on the spheres (where linear terms peak),
/// odd indices inside the balls. Prefixes are stable, so the estimate is
/// monotone in the sample count.
inline std::vector<std::pair<Vector, Vector>> gap_samples(std::size_t T, const BallRadii& radii, int samples,
                                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<Vector, Vector>> pts;
    pts.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        if (i % 2 == 0) {
            Vector x = sample_h_sphere(T, radii.r1, rng);
            Vector y = sample_h_sphere(T, radii.r2, rng);
            pts.emplace_back(std::move(x), std::move(y));
        } else {
            Vector x = sample_h_ball(T, radii.r1, rng);
            Vector y = sample_h_ball(T, radii.r2, rng);
            pts.emplace_back(std::move(x), std::move(y));
        }
    }
    return pts;
}

/// max over the samples of |J_{u_a}(x, y) - J_{u_b}(x, y)|. The quadratic
/// parts cancel, so only Σ_k F(k, x, y, u_a) - F(k, x, y, u_b) is evaluated.
inline double uniform_gap(const ProblemSpec& spec, const ParameterFunction& ua, const ParameterFunction& ub,
                          const std::vector<std::pair<Vector, Vector>>& samples) {
    detail::check_dims(spec, ua, static_cast<Eigen::Index>(spec.T()), static_cast<Eigen::Index>(ub.T()));
    double gap = 0.0;
    for (const auto& [x, y] : samples) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            s += eval(spec.field().f(), detail::env_at(ua, x, y, i)) - eval(spec.field().f(), detail::env_at(ub, x, y, i));
        }
        gap = std::max(gap, std::abs(s));
    }
    return gap;
}

inline double uniform_gap(const ProblemSpec& spec, const ParameterFunction& ua, const ParameterFunction& ub,
                          const BallRadii& radii, int samples = 256, std::uint64_t seed = 11) {
    return uniform_gap(spec, ua, ub, gap_samples(spec.T(), radii, samples, seed));
}

/// Sampled Lipschitz constant of F in u over nodes k, |s| <= √c₂·r1,
/// |t| <= √c₂·r2 (the pointwise bounds implied by the balls) and u ∈ [-D, D].
inline double lipschitz_in_u(const ProblemSpec& spec, const BallRadii& radii, int samples = 2000,
                             std::uint64_t seed = 13) {
    const double sc = std::sqrt(embedding_constant(2.0, spec.T()).value);
    const double D = spec.D();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> sx(-sc * radii.r1, sc * radii.r1), sy(-sc * radii.r2, sc * radii.r2),
        su(-D, D);
    std::uniform_int_distribution<std::size_t> sk(1, spec.T());
    double lip = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double k = static_cast<double>(sk(rng));
        const double s = sx(rng), t = sy(rng);
        const double u1 = su(rng), u2 = su(rng);
        if (u1 == u2) continue;
        try {
            const double d = eval(spec.field().f(), Env{k, s, t, u1}) - eval(spec.field().f(), Env{k, s, t, u2});
            lip = std::max(lip, std::abs(d) / std::abs(u1 - u2));
        } catch (const EvalError&) {
        }
    }
    return lip;
}

// ------------------------------------------------------------ sweep

struct DependenceConfig {
    SolverConfig solver;
    BallRadii radii{1.0, 1.0};  // sampling region for the uniform gap
    double tol_dep = 1e-2;
    int gap_samples = 256;
    std::vector<int> schedule;  // empty selects the geometric schedule
};

struct DependenceRow {
    int n = 0;
    double a_n = 0.0;
    double dist_n = 0.0;
    double gap_n = 0.0;
    double u_distance = 0.0;  // ‖u_n - u_0‖_C
    bool projected = false;
    std::vector<SaddleCandidate> candidates;
};

struct DependenceReport {
    explicit DependenceReport(ParameterFunction u) : u0(std::move(u)) {}

    ParameterFunction u0;
    SaddleSet v0;
    double a0 = 0.0;
    std::vector<DependenceRow> rows;
    bool rule_based = true;
    double tol_dep = 1e-2;
    std::string failure;  // set when a solve failed and the report is partial

    bool nonempty() const {
        if (v0.empty()) return false;
        return std::all_of(rows.begin(), rows.end(), [](const DependenceRow& r) { return !r.candidates.empty(); });
    }
    double final_distance() const { return rows.empty() ? 0.0 : rows.back().dist_n; }
    double value_gap() const { return rows.empty() ? 0.0 : std::abs(rows.back().a_n - a0); }
    /// |a_n - a_0| nonincreasing along the schedule up to `slack`.
    bool values_decreasing(double slack) const {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (std::abs(rows[i].a_n - a0) > std::abs(rows[i - 1].a_n - a0) + slack) return false;
        }
        return true;
    }
    bool passed() const {
        return failure.empty() && nonempty() && final_distance() <= tol_dep && value_gap() <= tol_dep;
    }
};

/// max over a in `from` of the distance to the nearest point of `to`.
inline double set_excess(const std::vector<SaddleCandidate>& from, const std::vector<SaddleCandidate>& to) {
    double d = 0.0;
    for (const auto& c : from) d = std::max(d, distance_to_set(c.x, c.y, to));
    return d;
}

/// Solves for V̂_0 and V̂_n along the schedule, recording a_n, dist_n and the
/// uniform gap to u_0. A failed solve stops the sweep with a partial report.
inline DependenceReport run_sequence(const ProblemSpec& spec, const ParameterSequence& seq, const DependenceConfig& cfg) {
    if (seq.u0().T() != spec.T()) throw std::invalid_argument("sequence T differs from problem T");
    DependenceReport rep(seq.u0());
    rep.rule_based = seq.rule_based();
    rep.tol_dep = cfg.tol_dep;
    rep.v0 = saddle_set(spec, seq.u0(), cfg.solver);
    if (rep.v0.empty()) {
        rep.failure = "no saddle found for u0";
        return rep;
    }
    rep.a0 = rep.v0.points.front().value;

    const auto samples = gap_samples(spec.T(), cfg.radii, cfg.gap_samples, cfg.solver.seed ^ 0x5bd1e995ULL);
    const std::vector<int> schedule = cfg.schedule.empty() ? seq.geometric_schedule() : cfg.schedule;
    for (int n : schedule) {
        const auto term = seq.term(n);
        DependenceRow row;
        row.n = n;
        row.projected = term.projected;
        row.u_distance = max_distance(term.u, seq.u0());
        row.gap_n = uniform_gap(spec, term.u, seq.u0(), samples);
        SaddleSet vn = saddle_set(spec, term.u, cfg.solver);
        if (vn.empty()) {
            rep.failure = "no saddle found for n = " + std::to_string(n);
            rep.rows.push_back(std::move(row));
            return rep;
        }
        row.a_n = vn.points.front().value;
        row.dist_n = set_excess(vn.points, rep.v0.points);
        row.candidates = std::move(vn.points);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

// ------------------------------------------------------------ upper limit

struct LimitPoint {
    SaddleCandidate estimate;   // tail extrapolation (rule) or last tail candidate
    SaddleCandidate polished;   // re-solved for u_0 from the estimate
    double extrapolation_error = 0.0;  // distance estimate → polished
    double distance_to_v0 = 0.0;       // distance polished → V̂_0
    bool verified = false;             // verify_saddle at u_0
};

struct UpperLimitReport {
    std::vector<LimitPoint> limits;
    int tail_rows = 0;
    double tol = 0.0;
    bool passed = false;
    std::string message;
};

/// Checks limsup V̂_n ⊂ V̂_0 on the tail n >= N/2: every tail cluster is pushed
/// to its limit (Richardson extrapolation in 1/n over the last two tail rows
/// for rule-based sequences), re-solved for u_0, verified as a saddle of
/// J_{u_0}, and compared with V̂_0 at `tol`. With two or more tail rows the
/// extrapolated point must also lie within tol_dep of its re-solved limit.
inline UpperLimitReport upper_limit_check(const ProblemSpec& spec, const DependenceReport& report, double tol,
                                          const SolverConfig& solver, const VerifyOptions& vopt = {}) {
    UpperLimitReport out;
    out.tol = tol;
    if (!report.failure.empty() || report.rows.empty() || report.v0.empty()) {
        out.message = report.failure.empty() ? "empty report" : report.failure;
        return out;
    }
    const int N = report.rows.back().n;
    std::vector<const DependenceRow*> tail;
    for (const auto& r : report.rows) {
        if (2 * r.n >= N) tail.push_back(&r);
    }
    out.tail_rows = static_cast<int>(tail.size());
    const DependenceRow& last = *tail.back();
    const DependenceRow* prev = tail.size() >= 2 ? tail[tail.size() - 2] : nullptr;

    SolverConfig polish = solver;
    polish.method = spec.field().has_second_partials() ? Method::newton : Method::extragradient;
    polish.trace = nullptr;

    out.passed = true;
    for (const auto& c : last.candidates) {
        LimitPoint lp{c, c};
        if (prev && report.rule_based) {
            // z(n) ≈ z_0 + w/n  ⇒  z_0 ≈ (n₂z₂ - n₁z₁)/(n₂ - n₁)
            double best = std::numeric_limits<double>::infinity();
            const SaddleCandidate* match = nullptr;
            for (const auto& p : prev->candidates) {
                const double d = product_distance(c, p);
                if (d < best) {
                    best = d;
                    match = &p;
                }
            }
            const double n1 = prev->n, n2 = last.n;
            const Vector x = (n2 * c.x.interior_vector() - n1 * match->x.interior_vector()) / (n2 - n1);
            const Vector y = (n2 * c.y.interior_vector() - n1 * match->y.interior_vector()) / (n2 - n1);
            lp.estimate = make_candidate(spec, report.u0, x, y, c.method, 0, SolveStatus::converged);
        } else if (prev) {
            lp.estimate = c;
        }
        lp.estimate = make_candidate(spec, report.u0, lp.estimate.x.interior_vector(), lp.estimate.y.interior_vector(),
                                     c.method, 0, SolveStatus::converged);
        lp.polished = solve(spec, report.u0, lp.estimate.x, lp.estimate.y, polish);
        lp.extrapolation_error = product_distance(lp.estimate, lp.polished);
        lp.distance_to_v0 = distance_to_set(lp.polished.x, lp.polished.y, report.v0.points);
        lp.verified = lp.polished.converged() && verify_saddle(spec, report.u0, lp.polished, vopt).passed();

        bool ok = lp.verified && lp.distance_to_v0 <= tol;
        if (prev) ok = ok && lp.extrapolation_error <= report.tol_dep;
        if (!ok && out.passed) {
            out.message = !lp.verified ? "tail limit does not verify as a saddle for u0"
                          : lp.distance_to_v0 > tol
                              ? "tail limit lies " + std::to_string(lp.distance_to_v0) + " from the saddle set for u0"
                              : "tail does not settle: extrapolation error " + std::to_string(lp.extrapolation_error);
        }
        out.passed = out.passed && ok;
        out.limits.push_back(std::move(lp));
    }
    if (out.passed) out.message = "limsup of the tail is contained in the saddle set for u0";
    return out;
}

}  // namespace saddlebvp
