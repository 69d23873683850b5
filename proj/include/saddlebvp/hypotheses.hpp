#pragma once

// Numerical certification of the growth bounds (H2/H3) and the
// convexity/concavity hypotheses (H4/H5) on sampling boxes, and the a priori
// radii of the balls that contain every saddle point.
//
// Sampled checks cannot prove a global property. Reports therefore carry the
// box and the number of samples; fields whose relevant second partial does not
// depend on the sampled variable are decided exactly from the Hessian.

#include "saddlebvp/grid.hpp"
#include "saddlebvp/problem.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace saddlebvp {

/// Constants witnessing
///   F(k, s, anchor_y(k), u) >= -alpha1 s² + beta1 s + gamma1(k)   (H2)
///   F(k, anchor_x(k), s, u) <=  alpha2 s² + beta2 s + gamma2(k)   (H3)
/// for all s, all |u| <= D and k = 1..T, with alpha_i < 1/(2 c_2).
struct GrowthCertificate {
    double alpha1 = 0.0;
    double beta1 = 0.0;
    std::vector<double> gamma1;
    double alpha2 = 0.0;
    double beta2 = 0.0;
    std::vector<double> gamma2;
    double box_radius = 10.0;  // s is sampled in [-box_radius, box_radius]
    GridFunction anchor_x{1};
    GridFunction anchor_y{1};

    /// Zero constants and zero anchors for dimension T.
    static GrowthCertificate zero(std::size_t T, double box_radius = 10.0) {
        GrowthCertificate c;
        c.gamma1.assign(T, 0.0);
        c.gamma2.assign(T, 0.0);
        c.box_radius = box_radius;
        c.anchor_x = GridFunction(T);
        c.anchor_y = GridFunction(T);
        return c;
    }

    void validate(std::size_t T) const {
        if (gamma1.size() != T || gamma2.size() != T || anchor_x.T() != T || anchor_y.T() != T) {
            throw std::invalid_argument("certificate dimensions do not match T = " + std::to_string(T));
        }
        if (!(box_radius > 0.0)) throw std::invalid_argument("certificate box radius must be positive");
    }
};

/// Strict upper limit 1/(2 c_2) for alpha1 and alpha2.
inline double alpha_limit(std::size_t T) { return 1.0 / (2.0 * embedding_constant(2.0, T).value); }

struct GrowthViolation {
    enum class Bound { lower, upper } bound;  // lower: H2, upper: H3
    std::size_t k;
    double s;
    double u;
    double margin;
};

struct GrowthReport {
    bool alpha_ok = true;
    double alpha_limit = 0.0;
    double worst_lower_margin = std::numeric_limits<double>::infinity();
    double worst_upper_margin = std::numeric_limits<double>::infinity();
    std::optional<GrowthViolation> counterexample;
    std::size_t samples = 0;
    std::string message;

    bool passed() const { return alpha_ok && !counterexample; }
};

/// Dense check of the certificate on s ∈ [-R, R] (`density` points),
/// u ∈ [-D, D] and k = 1..T. Reports the worst margins and the worst violating
/// node, if any.
inline GrowthReport verify_growth(const ProblemSpec& spec, const GrowthCertificate& cert, int density = 401,
                                  double tol = 1e-9) {
    cert.validate(spec.T());
    GrowthReport rep;
    rep.alpha_limit = alpha_limit(spec.T());
    if (!(cert.alpha1 < rep.alpha_limit) || !(cert.alpha2 < rep.alpha_limit)) {
        rep.alpha_ok = false;
        rep.message = "margin violated: alpha must be < 1/(2 c_2) = " + std::to_string(rep.alpha_limit);
        return rep;
    }
    density = std::max(density, 2);
    const int u_points = std::clamp(density / 10 + 1, 3, 41);
    const double R = cert.box_radius;
    const double D = spec.D();
    const Expr& f = spec.field().f();

    auto consider = [&](GrowthViolation::Bound b, std::size_t k, double s, double u, double margin) {
        double& worst = b == GrowthViolation::Bound::lower ? rep.worst_lower_margin : rep.worst_upper_margin;
        worst = std::min(worst, margin);
        if (margin < -tol && (!rep.counterexample || margin < rep.counterexample->margin)) {
            rep.counterexample = GrowthViolation{b, k, s, u, margin};
        }
    };

    for (std::size_t k = 1; k <= spec.T(); ++k) {
        const double kd = static_cast<double>(k);
        for (int j = 0; j < u_points; ++j) {
            const double u = -D + 2.0 * D * j / (u_points - 1);
            for (int i = 0; i < density; ++i) {
                const double s = -R + 2.0 * R * i / (density - 1);
                const double lower = -cert.alpha1 * s * s + cert.beta1 * s + cert.gamma1[k - 1];
                consider(GrowthViolation::Bound::lower, k, s, u, eval(f, Env{kd, s, cert.anchor_y[k], u}) - lower);
                const double upper = cert.alpha2 * s * s + cert.beta2 * s + cert.gamma2[k - 1];
                consider(GrowthViolation::Bound::upper, k, s, u, upper - eval(f, Env{kd, cert.anchor_x[k], s, u}));
                rep.samples += 2;
            }
        }
    }
    if (rep.counterexample) {
        const auto& c = *rep.counterexample;
        rep.message = std::string(c.bound == GrowthViolation::Bound::lower ? "lower (H2)" : "upper (H3)") +
                      " growth bound violated at k=" + std::to_string(c.k) + ", s=" + std::to_string(c.s) +
                      ", u=" + std::to_string(c.u) + " by " + std::to_string(-c.margin);
    }
    return rep;
}

/// Radii of B_1 = {‖x‖ <= r1} and B_2 = {‖y‖ <= r2}, with the constants of
/// the coercive minorant and the anti-coercive majorant they derive from:
///   J(x, anchor_y) >= a1 ‖x‖² - beta_tilde1 ‖x‖ + gamma_tilde1
///   J(anchor_x, y) <= -a2 ‖y‖² + beta_tilde2 ‖y‖ + gamma_tilde2
struct BallRadii {
    double r1 = 0.0;
    double r2 = 0.0;
    double beta_tilde1 = 0.0;
    double gamma_tilde1 = 0.0;
    double beta_tilde2 = 0.0;
    double gamma_tilde2 = 0.0;
    double lower_value = 0.0;  // every saddle value is >= this
    double upper_value = 0.0;  // every saddle value is <= this
};

/// Largest root of a r² - beta r - gap = 0 (a > 0): beyond it the quadratic
/// a r² - beta r stays above `gap`.
inline double coercive_radius(double a, double beta, double gap) {
    if (!(a > 0.0)) throw std::domain_error("hypothesis margin violated: quadratic coefficient must be positive");
    const double disc = std::max(beta * beta + 4.0 * a * gap, 0.0);
    return std::max((beta + std::sqrt(disc)) / (2.0 * a), 0.0);
}

inline BallRadii ball_radii(const GrowthCertificate& cert, double c2, std::size_t T) {
    cert.validate(T);
    // alpha <= 0 gives no usable curvature from the Poincaré bound.
    const double a1 = 0.5 - c2 * std::max(cert.alpha1, 0.0);
    const double a2 = 0.5 - c2 * std::max(cert.alpha2, 0.0);
    if (!(a1 > 0.0) || !(a2 > 0.0)) throw std::domain_error("hypothesis margin violated: alpha >= 1/(2 c_2)");

    const double norm_equiv = std::sqrt(static_cast<double>(T) * c2);  // Σ|x(k)| <= √(T c_2) ‖x‖
    const double ax = h_norm(cert.anchor_x);
    const double ay = h_norm(cert.anchor_y);

    BallRadii b;
    b.beta_tilde1 = std::abs(cert.beta1) * norm_equiv;
    b.beta_tilde2 = std::abs(cert.beta2) * norm_equiv;
    double g1 = 0.0, g2 = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
        g1 += std::min(cert.gamma1[k], 0.0);
        g2 += std::max(cert.gamma2[k], 0.0);
    }
    b.gamma_tilde1 = g1 - 0.5 * ay * ay;
    b.gamma_tilde2 = g2 + 0.5 * ax * ax;

    // max_y min_x J >= min_x J(x, anchor_y) >= min_r (a1 r² - β̃1 r) + γ̃1.
    b.lower_value = b.gamma_tilde1 - b.beta_tilde1 * b.beta_tilde1 / (4.0 * a1);
    // min_x max_y J <= max_y J(anchor_x, y) <= max_r (-a2 r² + β̃2 r) + γ̃2.
    b.upper_value = b.gamma_tilde2 + b.beta_tilde2 * b.beta_tilde2 / (4.0 * a2);

    b.r2 = coercive_radius(a2, b.beta_tilde2, b.gamma_tilde2 - b.lower_value);
    b.r1 = coercive_radius(a1, b.beta_tilde1, b.upper_value - b.gamma_tilde1);
    return b;
}

inline BallRadii ball_radii(const GrowthCertificate& cert, std::size_t T) {
    return ball_radii(cert, embedding_constant(2.0, T).value, T);
}

// ------------------------------------------------------------ convexity

struct ConvexityCounterexample {
    enum class Kind { midpoint, hessian } kind;
    GridFunction first;   // x1 (midpoint) or the point where the Hessian fails
    GridFunction second;  // x2 (midpoint); zero for hessian violations
    GridFunction fixed;   // the other argument, held fixed
    double violation;     // midpoint gap or offending eigenvalue
};

struct ConvexityReport {
    bool exact = false;  // decided from a Hessian that does not vary with the sampled variable
    double worst_midpoint_gap = -std::numeric_limits<double>::infinity();
    double extreme_eigenvalue = std::numeric_limits<double>::infinity();
    std::optional<ConvexityCounterexample> counterexample;
    int samples = 0;
    double box_radius = 0.0;

    bool passed() const { return !counterexample; }
};

struct ConvexityOptions {
    double box_radius = 10.0;  // node values sampled in [-R, R]
    int samples = 200;
    std::uint64_t seed = 1;
    double tol = 1e-9;
};

namespace detail {

// Shared driver. sign = +1 checks convexity in x (y fixed); sign = -1 checks
// concavity in y (x fixed) through the convexity of -J.
inline ConvexityReport check_curvature(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& fixed,
                                       const ConvexityOptions& opt, bool in_x) {
    const std::size_t T = spec.T();
    if (fixed.T() != T) throw std::invalid_argument("fixed argument has wrong dimension");
    if (opt.samples < 1) throw std::invalid_argument("need at least one sample");
    const double sign = in_x ? 1.0 : -1.0;
    const ScalarField& field = spec.field();
    const Vector fv = fixed.interior_vector();

    auto J = [&](const Vector& v) { return sign * (in_x ? action(spec, u, v, fv) : action(spec, u, fv, v)); };
    auto min_eig = [&](const Vector& v) {
        const SecondPartials d = in_x ? second_partials(spec, u, v, fv) : second_partials(spec, u, fv, v);
        SymmetricTridiagonal h = spec.lap().tridiagonal();
        h.diag += sign * (in_x ? d.xx : d.yy);
        return h.min_eigenvalue();
    };

    ConvexityReport rep;
    rep.box_radius = opt.box_radius;
    const bool hessian = field.has_second_partials();
    const Var var = in_x ? Var::x : Var::y;
    rep.exact = hessian && !depends_on(in_x ? field.fxx() : field.fyy(), var);

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(-opt.box_radius, opt.box_radius);
    auto draw = [&] {
        Vector v(static_cast<Eigen::Index>(T));
        for (auto& c : v) c = unif(rng);
        return v;
    };

    if (rep.exact) {
        const Vector v = Vector::Zero(static_cast<Eigen::Index>(T));
        rep.extreme_eigenvalue = min_eig(v);
        rep.samples = 1;
        if (rep.extreme_eigenvalue < -opt.tol) {
            rep.counterexample = ConvexityCounterexample{ConvexityCounterexample::Kind::hessian, GridFunction::from_interior(v),
                                                         GridFunction(T), fixed, sign * rep.extreme_eigenvalue};
        }
        return rep;
    }

    for (int s = 0; s < opt.samples; ++s) {
        const Vector a = draw();
        const Vector b = draw();
        const double gap = J(0.5 * (a + b)) - 0.5 * (J(a) + J(b));
        rep.worst_midpoint_gap = std::max(rep.worst_midpoint_gap, gap);
        ++rep.samples;
        if (gap > opt.tol * (1.0 + std::abs(J(a)) + std::abs(J(b)))) {
            rep.counterexample = ConvexityCounterexample{ConvexityCounterexample::Kind::midpoint, GridFunction::from_interior(a),
                                                         GridFunction::from_interior(b), fixed, gap};
            return rep;
        }
        if (hessian) {
            const double ev = min_eig(a);
            rep.extreme_eigenvalue = std::min(rep.extreme_eigenvalue, ev);
            if (ev < -opt.tol) {
                rep.counterexample = ConvexityCounterexample{ConvexityCounterexample::Kind::hessian, GridFunction::from_interior(a),
                                                             GridFunction(T), fixed, sign * ev};
                return rep;
            }
        }
    }
    return rep;
}

}  // namespace detail

/// Convexity of x ↦ J_u(x, y) for the given y (H4): midpoint inequality on
/// random pairs, plus λ_min(L + diag F_xx) >= -tol when second partials exist.
inline ConvexityReport check_convexity_x(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& y,
                                         const ConvexityOptions& opt = {}) {
    return detail::check_curvature(spec, u, y, opt, true);
}

/// Concavity of y ↦ J_u(x, y) for the given x (H5). For Hessian violations the
/// reported value is λ_max(-L + diag F_yy).
inline ConvexityReport check_concavity_y(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x,
                                         const ConvexityOptions& opt = {}) {
    ConvexityReport r = detail::check_curvature(spec, u, x, opt, false);
    if (r.extreme_eigenvalue != std::numeric_limits<double>::infinity()) r.extreme_eigenvalue = -r.extreme_eigenvalue;
    return r;
}

// ------------------------------------------------------------ fitting

struct FitOptions {
    double alpha_fraction = 0.5;  // alpha_i = fraction / (2 c_2)
    double box_radius = 10.0;
    int density = 201;
    double slack = 1e-6;
};

struct FittedCertificate {
    GrowthCertificate cert;
    bool boundary_extremum = false;  // an extremum sat on the box edge: the bound may fail outside the box
};

/// Heuristic certificate with zero anchors, beta = 0, alpha a fixed fraction of
/// the admissible limit, and gamma fitted by dense sampling. Only valid on the
/// sampled box; run verify_growth on the result before relying on it.
inline FittedCertificate fit_certificate(const ProblemSpec& spec, const FitOptions& opt = {}) {
    const std::size_t T = spec.T();
    FittedCertificate out{GrowthCertificate::zero(T, opt.box_radius)};
    GrowthCertificate& c = out.cert;
    c.alpha1 = c.alpha2 = opt.alpha_fraction * alpha_limit(T);
    const int n = std::max(opt.density, 3);
    const int nu = std::clamp(n / 10 + 1, 3, 41);
    const double R = opt.box_radius;
    const double D = spec.D();
    const Expr& f = spec.field().f();
    for (std::size_t k = 1; k <= T; ++k) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        double s_lo = 0.0, s_hi = 0.0;
        for (int j = 0; j < nu; ++j) {
            const double u = -D + 2.0 * D * j / (nu - 1);
            for (int i = 0; i < n; ++i) {
                const double s = -R + 2.0 * R * i / (n - 1);
                const double kd = static_cast<double>(k);
                const double l = eval(f, Env{kd, s, 0.0, u}) + c.alpha1 * s * s;
                const double h = eval(f, Env{kd, 0.0, s, u}) - c.alpha2 * s * s;
                if (l < lo) lo = l, s_lo = s;
                if (h > hi) hi = h, s_hi = s;
            }
        }
        c.gamma1[k - 1] = lo - opt.slack * (1.0 + std::abs(lo));
        c.gamma2[k - 1] = hi + opt.slack * (1.0 + std::abs(hi));
        if (std::abs(s_lo) == R || std::abs(s_hi) == R) out.boundary_extremum = true;
    }
    return out;
}

}  // namespace saddlebvp
