#pragma once

// Saddle-point solvers for J_u and a posteriori verification.
//
// All three methods work on the interior values z = (x, y) ∈ R^{2T} and the
// monotone operator
//
//   G(z) = (∂J/∂x, -∂J/∂y) = (Lx + F_x, Ly - F_y),
//
// whose zeros are exactly the solutions of the boundary value system (and,
// under convexity/concavity, the saddle points of J_u).

#include "saddlebvp/grid.hpp"
#include "saddlebvp/hypotheses.hpp"
#include "saddlebvp/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace saddlebvp {

struct TraceRow {
    int start = 0;
    int iter = 0;
    double grad_norm = 0.0;
    double residual = 0.0;
    double value = 0.0;
};

using TraceSink = std::function<void(const TraceRow&)>;

struct SolverConfig {
    Method method = Method::newton;
    double step = 0.0;  // extragradient step; 0 selects 0.9 / (Lipschitz estimate)
    double tol_grad = 1e-10;
    double tol_res = 1e-10;
    int max_iter = 200000;
    int multistart = 8;
    std::uint64_t seed = 1;
    double cluster_radius = 1e-4;
    int max_step_halvings = 4;          // extragradient restarts after divergence
    std::optional<BallRadii> radii;     // start region and Lipschitz sampling region
    TraceSink trace;

    void validate() const {
        if (!(tol_grad > 0.0) || !(tol_res > 0.0)) throw std::invalid_argument("solver tolerances must be positive");
        if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
        if (multistart < 1) throw std::invalid_argument("multistart must be >= 1");
        if (step < 0.0) throw std::invalid_argument("step must be positive (or 0 for automatic)");
        if (!(cluster_radius > 0.0)) throw std::invalid_argument("cluster radius must be positive");
    }
};

// ------------------------------------------------------------ operator

namespace detail {

inline Eigen::Index dim(const ProblemSpec& spec) { return static_cast<Eigen::Index>(spec.T()); }

inline Vector stack(const Vector& x, const Vector& y) {
    Vector z(x.size() + y.size());
    z << x, y;
    return z;
}

}  // namespace detail

/// G(z) = (Lx + F_x, Ly - F_y) for stacked interior values z = (x, y).
inline Vector monotone_operator(const ProblemSpec& spec, const ParameterFunction& u, const Vector& z) {
    const Eigen::Index T = detail::dim(spec);
    const Gradient g = grad(spec, u, Vector(z.head(T)), Vector(z.tail(T)));
    return detail::stack(g.gx, -g.gy);
}

/// Jacobian of G: [[L + diag F_xx, diag F_xy], [-diag F_xy, L - diag F_yy]].
inline Matrix operator_jacobian(const ProblemSpec& spec, const ParameterFunction& u, const Vector& z) {
    const Eigen::Index T = detail::dim(spec);
    Matrix J = Matrix::Zero(2 * T, 2 * T);
    if (spec.field().has_second_partials()) {
        const SecondPartials d = second_partials(spec, u, Vector(z.head(T)), Vector(z.tail(T)));
        const Matrix L = spec.lap().matrix();
        J.topLeftCorner(T, T) = L;
        J.bottomRightCorner(T, T) = L;
        for (Eigen::Index i = 0; i < T; ++i) {
            J(i, i) += d.xx[i];
            J(i, T + i) = d.xy[i];
            J(T + i, i) = -d.xy[i];
            J(T + i, T + i) -= d.yy[i];
        }
        return J;
    }
    // Central differences when only first partials are available.
    for (Eigen::Index j = 0; j < 2 * T; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(z[j]));
        Vector zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        J.col(j) = (monotone_operator(spec, u, zp) - monotone_operator(spec, u, zm)) / (2.0 * h);
    }
    return J;
}

/// Spectral norm of a square matrix. Exact (dense symmetric eigensolve of MᵀM)
/// up to 512 columns; beyond that, power iteration from a pseudo-random start
/// until the estimate settles. A start of all ones misses the oscillating
/// modes that carry the norm of tridiagonal blocks.
inline double spectral_norm_estimate(const Matrix& M, int max_iterations = 2000) {
    if (M.cols() == 0) return 0.0;
    const Matrix MtM = M.transpose() * M;
    if (M.cols() <= 512) {
        const Eigen::SelfAdjointEigenSolver<Matrix> es(MtM, Eigen::EigenvaluesOnly);
        return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
    }
    std::mt19937_64 rng(0x2545f4914f6cdd1dULL);
    std::normal_distribution<double> n01;
    Vector v(M.cols());
    for (auto& c : v) c = n01(rng);
    v.normalize();
    double s = 0.0;
    for (int i = 0; i < max_iterations; ++i) {
        Vector w = MtM * v;
        const double n = w.norm();
        if (n == 0.0) return 0.0;
        const double next = std::sqrt(n);
        v = w / n;
        if (std::abs(next - s) <= 1e-12 * next) return next;
        s = next;
    }
    return s;
}

/// Lipschitz constant estimate of G: the largest Jacobian spectral norm over
/// z0 and `samples` random points of B_1 × B_2 (or of a unit box around z0
/// when no radii are known).
inline double lipschitz_estimate(const ProblemSpec& spec, const ParameterFunction& u, const Vector& z0,
                                 const std::optional<BallRadii>& radii, int samples, std::uint64_t seed) {
    const std::size_t T = spec.T();
    double L = spectral_norm_estimate(operator_jacobian(spec, u, z0));
    std::mt19937_64 rng(seed);
    for (int s = 0; s < samples; ++s) {
        Vector z;
        if (radii) {
            z = detail::stack(sample_h_ball(T, radii->r1, rng), sample_h_ball(T, radii->r2, rng));
        } else {
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            z = z0;
            for (auto& c : z) c += unif(rng);
        }
        try {
            L = std::max(L, spectral_norm_estimate(operator_jacobian(spec, u, z)));
        } catch (const EvalError&) {
            // Points outside the field's domain do not constrain the step.
        }
    }
    return L;
}

// ------------------------------------------------------------ extragradient

namespace detail {

struct RunResult {
    Vector z;
    int iterations = 0;
    SolveStatus status = SolveStatus::max_iterations;
};

inline void emit_trace(const ProblemSpec& spec, const ParameterFunction& u, const TraceSink& sink, int iter,
                       const Vector& z, const Vector& g) {
    if (!sink) return;
    const Eigen::Index T = dim(spec);
    sink(TraceRow{0, iter, g.norm(), g.lpNorm<Eigen::Infinity>(), action(spec, u, Vector(z.head(T)), Vector(z.tail(T)))});
}

inline RunResult extragradient_run(const ProblemSpec& spec, const ParameterFunction& u, const Vector& z0, double step,
                                   const SolverConfig& cfg, int iter_offset) {
    RunResult r{z0};
    Vector g = monotone_operator(spec, u, r.z);
    Vector best = r.z;
    double best_norm = g.norm();
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(std::min(cfg.max_iter, 1 << 16)) + 1);
    emit_trace(spec, u, cfg.trace, iter_offset, r.z, g);
    for (int it = 0;; ++it) {
        const double gn = g.norm();
        history.push_back(gn);
        if (gn <= cfg.tol_grad) {
            r.status = SolveStatus::converged;
            r.iterations = it;
            return r;
        }
        if (it >= 50 && gn > 10.0 * history[static_cast<std::size_t>(it - 50)]) {
            r.status = SolveStatus::diverged;
            r.iterations = it;
            r.z = best;
            return r;
        }
        if (it == cfg.max_iter) {
            r.status = SolveStatus::max_iterations;
            r.iterations = it;
            r.z = best;
            return r;
        }
        const Vector half = r.z - step * g;
        r.z -= step * monotone_operator(spec, u, half);
        g = monotone_operator(spec, u, r.z);
        if (!g.allFinite()) {
            r.status = SolveStatus::diverged;
            r.iterations = it + 1;
            r.z = best;
            return r;
        }
        if (g.norm() < best_norm) {
            best_norm = g.norm();
            best = r.z;
        }
        emit_trace(spec, u, cfg.trace, iter_offset + it + 1, r.z, g);
    }
}

}  // namespace detail

/// Extragradient (Korpelevich) iteration for the monotone operator G:
///   z_half = z - γ G(z),  z⁺ = z - γ G(z_half),
/// stopped when ‖G(z)‖ <= tol_grad. After a divergence (‖G‖ growing 10× over
/// 50 iterations) the step is halved and the run restarts from the best
/// iterate, up to `max_step_halvings` times.
inline SaddleCandidate extragradient(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x0,
                                     const GridFunction& y0, const SolverConfig& cfg) {
    cfg.validate();
    Vector z = detail::stack(x0.interior_vector(), y0.interior_vector());
    double step = cfg.step;
    if (step == 0.0) {
        const double lip = lipschitz_estimate(spec, u, z, cfg.radii, 8, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        step = 0.9 / std::max(lip, 1e-12);
    }
    int total = 0;
    detail::RunResult r;
    for (int attempt = 0;; ++attempt) {
        r = detail::extragradient_run(spec, u, z, step, cfg, total);
        total += r.iterations;
        if (r.status != SolveStatus::diverged || attempt >= cfg.max_step_halvings) break;
        z = r.z;
        step *= 0.5;
    }
    const Eigen::Index T = detail::dim(spec);
    return make_candidate(spec, u, r.z.head(T), r.z.tail(T), Method::extragradient, total, r.status);
}

// ------------------------------------------------------------ Newton

/// Damped Newton on G(z) = 0 with Armijo backtracking on ‖G‖, stopped when the
/// residual (‖G‖∞) is <= tol_res. Requires second partials.
inline SaddleCandidate newton(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x0,
                              const GridFunction& y0, const SolverConfig& cfg) {
    cfg.validate();
    if (!spec.field().has_second_partials()) throw std::logic_error("Newton solver needs second partials of F");
    const Eigen::Index T = detail::dim(spec);
    Vector z = detail::stack(x0.interior_vector(), y0.interior_vector());
    Vector g = monotone_operator(spec, u, z);
    detail::emit_trace(spec, u, cfg.trace, 0, z, g);
    SolveStatus status = SolveStatus::max_iterations;
    double cond = 0.0;
    int it = 0;
    for (;; ++it) {
        if (g.lpNorm<Eigen::Infinity>() <= cfg.tol_res) {
            status = SolveStatus::converged;
            break;
        }
        if (it == cfg.max_iter) break;
        const Eigen::PartialPivLU<Matrix> lu(operator_jacobian(spec, u, z));
        const double rcond = lu.rcond();
        cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
        if (!(rcond > 1e-14)) {
            status = SolveStatus::singular_jacobian;
            break;
        }
        const Vector d = -lu.solve(g);
        const double g0 = g.norm();
        double t = 1.0;
        bool accepted = false;
        while (t >= 1e-12) {
            Vector trial = z + t * d;
            Vector gt;
            try {
                gt = monotone_operator(spec, u, trial);
            } catch (const EvalError&) {
                t *= 0.5;
                continue;
            }
            if (gt.allFinite() && gt.norm() <= (1.0 - 1e-4 * t) * g0) {
                z = std::move(trial);
                g = std::move(gt);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            status = SolveStatus::stalled;
            break;
        }
        detail::emit_trace(spec, u, cfg.trace, it + 1, z, g);
    }
    SaddleCandidate c = make_candidate(spec, u, z.head(T), z.tail(T), Method::newton, it, status);
    c.condition_estimate = cond;
    return c;
}

// ------------------------------------------------------------ nested

namespace detail {

/// Positive definite tridiagonal solve via LDLᵀ; empty if a pivot is <= 0.
inline std::optional<Vector> spd_tridiagonal_solve(const SymmetricTridiagonal& h, const Vector& rhs) {
    const Eigen::Index n = h.size();
    Vector piv(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double l = i > 0 ? h.off[i - 1] / piv[i - 1] : 0.0;
        piv[i] = h.diag[i] - (i > 0 ? l * h.off[i - 1] : 0.0);
        if (!(piv[i] > 0.0)) return std::nullopt;
        w[i] = rhs[i] - (i > 0 ? l * w[i - 1] : 0.0);
    }
    Vector x(n);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        x[i] = w[i] / piv[i] - (i + 1 < n ? h.off[i] / piv[i] * x[i + 1] : 0.0);
    }
    return x;
}

/// J_u seen from one player: Φ(a, b) = J(x = a, y = b) when `swapped` is false
/// (minimize over a = x, maximize over b = y), and Φ(a, b) = -J(x = b, y = a)
/// when true (min over y of -J, i.e. max over y of J; then min over x of the
/// result). In both orientations Φ is convex in a and concave in b.
class Oriented {
public:
    Oriented(const ProblemSpec& spec, const ParameterFunction& u, bool swapped) : spec_(spec), u_(u), swapped_(swapped) {}

    double phi(const Vector& a, const Vector& b) const {
        return swapped_ ? -action(spec_, u_, b, a) : action(spec_, u_, a, b);
    }

    /// (∂Φ/∂a, ∂Φ/∂b)
    std::pair<Vector, Vector> gradients(const Vector& a, const Vector& b) const {
        if (!swapped_) {
            Gradient g = grad(spec_, u_, a, b);
            return {std::move(g.gx), std::move(g.gy)};
        }
        Gradient g = grad(spec_, u_, b, a);
        return {-g.gy, -g.gx};
    }

    struct Curvature {
        Vector inner;  // ∇²_a Φ = L + diag(inner)
        Vector outer;  // ∇²_b Φ = -L + diag(outer)
        Vector cross;  // ∇_a∇_b Φ = diag(cross)
    };

    Curvature curvature(const Vector& a, const Vector& b) const {
        if (!swapped_) {
            SecondPartials d = second_partials(spec_, u_, a, b);
            return {std::move(d.xx), std::move(d.yy), std::move(d.xy)};
        }
        SecondPartials d = second_partials(spec_, u_, b, a);
        return {-d.yy, -d.xx, -d.xy};
    }

    bool has_curvature() const { return spec_.field().has_second_partials(); }
    const ProblemSpec& spec() const { return spec_; }

private:
    const ProblemSpec& spec_;
    const ParameterFunction& u_;
    bool swapped_;
};

struct InnerSolve {
    Vector arg;
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// min_a Φ(a, b) by damped Newton (gradient steps when the Hessian is not
/// positive definite or unavailable), stopped at ‖∇_a Φ‖∞ <= tol.
inline InnerSolve inner_minimize(const Oriented& o, Vector a, const Vector& b, double tol, int max_iter) {
    InnerSolve r;
    const SymmetricTridiagonal lap = o.spec().lap().tridiagonal();
    double phi = o.phi(a, b);
    for (int it = 0; it < max_iter; ++it) {
        const Vector g = o.gradients(a, b).first;
        const double gi = g.lpNorm<Eigen::Infinity>();
        if (gi <= tol) {
            r.converged = true;
            r.iterations = it;
            break;
        }
        Vector d;
        double scale = 4.0;
        if (o.has_curvature()) {
            SymmetricTridiagonal h = lap;
            const Vector extra = o.curvature(a, b).inner;
            h.diag += extra;
            scale += extra.cwiseAbs().maxCoeff();
            if (auto s = spd_tridiagonal_solve(h, g)) d = -*s;
        }
        if (d.size() == 0 || !(d.dot(g) < 0.0)) d = -g / scale;
        double t = 1.0;
        bool accepted = false;
        while (t >= 1e-14) {
            const Vector trial = a + t * d;
            double pt;
            try {
                pt = o.phi(trial, b);
            } catch (const EvalError&) {
                t *= 0.5;
                continue;
            }
            const bool armijo = pt <= phi + 1e-4 * t * g.dot(d);
            // Near the minimum, function values stall at rounding level; accept
            // steps that halve the gradient without increasing Φ beyond that.
            const bool gradient_drop = pt <= phi + 1e-12 * (1.0 + std::abs(phi)) &&
                                       o.gradients(trial, b).first.lpNorm<Eigen::Infinity>() <= 0.5 * gi;
            if (std::isfinite(pt) && (armijo || gradient_drop)) {
                a = trial;
                phi = pt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        r.iterations = it + 1;
        if (!accepted) break;
    }
    r.arg = std::move(a);
    r.value = phi;
    return r;
}

struct NestedResult {
    Vector inner;
    Vector outer;
    int iterations = 0;
    SolveStatus status = SolveStatus::max_iterations;
};

/// max_b min_a Φ(a, b): the outer concave function Φ⁻(b) = min_a Φ(a, b) is
/// ascended along its supergradient ∂Φ/∂b at (a*(b), b), scaled by the inverse
/// of the negated Schur complement when second partials exist.
inline NestedResult nested_solve(const Oriented& o, Vector a, Vector b, const SolverConfig& cfg) {
    const double tol_outer = cfg.tol_res;
    const double tol_inner = 1e-2 * tol_outer;
    const int inner_iter = 500;
    const SymmetricTridiagonal lap = o.spec().lap().tridiagonal();
    const Matrix Ld = o.spec().lap().matrix();

    NestedResult r;
    InnerSolve in = inner_minimize(o, a, b, tol_inner, inner_iter);
    if (!in.converged) {
        r.inner = in.arg;
        r.outer = b;
        r.status = SolveStatus::inner_failure;
        return r;
    }
    a = in.arg;
    double phi = in.value;
    for (int it = 0;; ++it) {
        const Vector g = o.gradients(a, b).second;
        const double gi = g.lpNorm<Eigen::Infinity>();
        r.iterations = it;
        if (gi <= tol_outer) {
            r.status = SolveStatus::converged;
            break;
        }
        if (it == cfg.max_iter) break;

        Vector d;
        double scale = 4.0;
        if (o.has_curvature()) {
            const auto c = o.curvature(a, b);
            scale += c.outer.cwiseAbs().maxCoeff() + c.cross.cwiseAbs().maxCoeff();
            SymmetricTridiagonal h = lap;
            h.diag += c.inner;
            // -∇²Φ⁻ = L - diag(outer) + diag(cross) H_aa⁻¹ diag(cross)
            Matrix S = Ld;
            S.diagonal() -= c.outer;
            bool ok = true;
            for (Eigen::Index j = 0; j < S.cols() && ok; ++j) {
                if (c.cross[j] == 0.0) continue;
                Vector e = Vector::Zero(S.rows());
                e[j] = c.cross[j];
                if (auto col = spd_tridiagonal_solve(h, e)) {
                    S.col(j) += c.cross.cwiseProduct(*col);
                } else {
                    ok = false;
                }
            }
            if (ok) {
                const Eigen::LLT<Matrix> llt(0.5 * (S + S.transpose()));
                if (llt.info() == Eigen::Success) d = llt.solve(g);
            }
        }
        if (d.size() == 0 || !(d.dot(g) > 0.0)) d = g / scale;

        double t = 1.0;
        bool accepted = false;
        while (t >= 1e-14) {
            const Vector bt = b + t * d;
            InnerSolve trial;
            try {
                trial = inner_minimize(o, a, bt, tol_inner, inner_iter);
            } catch (const EvalError&) {
                t *= 0.5;
                continue;
            }
            if (!trial.converged) {
                t *= 0.5;
                continue;
            }
            const bool armijo = trial.value >= phi + 1e-4 * t * g.dot(d);
            const bool gradient_drop = trial.value >= phi - 1e-12 * (1.0 + std::abs(phi)) &&
                                       o.gradients(trial.arg, bt).second.lpNorm<Eigen::Infinity>() <= 0.5 * gi;
            if (armijo || gradient_drop) {
                a = trial.arg;
                b = bt;
                phi = trial.value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            r.status = SolveStatus::stalled;
            break;
        }
    }
    r.inner = std::move(a);
    r.outer = std::move(b);
    return r;
}

}  // namespace detail

/// Result of a one-sided solve: argmin_x J(x, y) or argmax_y J(x, y).
struct PartialSolve {
    GridFunction arg;
    double value;
    bool converged;
};

/// min_x J_u(x, y) for fixed y, started from x0.
inline PartialSolve minimize_x(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& y,
                               const GridFunction& x0, double tol = 1e-12, int max_iter = 500) {
    const detail::Oriented o(spec, u, false);
    auto r = detail::inner_minimize(o, x0.interior_vector(), y.interior_vector(), tol, max_iter);
    return {GridFunction::from_interior(r.arg), r.value, r.converged};
}

/// max_y J_u(x, y) for fixed x, started from y0.
inline PartialSolve maximize_y(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x,
                               const GridFunction& y0, double tol = 1e-12, int max_iter = 500) {
    const detail::Oriented o(spec, u, true);
    auto r = detail::inner_minimize(o, y0.interior_vector(), x.interior_vector(), tol, max_iter);
    return {GridFunction::from_interior(r.arg), -r.value, r.converged};
}

/// max_y min_x J_u(x, y): the inner convex minimization over x is solved to
/// 1e-2 · tol_res, and the concave J⁻(y) = min_x J(x, y) is ascended from y0.
/// Returns (x*(y*), y*).
inline SaddleCandidate nested_minimax(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& y0,
                                      const SolverConfig& cfg, const std::optional<GridFunction>& x_warm = std::nullopt) {
    cfg.validate();
    const detail::Oriented o(spec, u, false);
    const Vector a0 = x_warm ? x_warm->interior_vector() : Vector::Zero(detail::dim(spec));
    const detail::NestedResult r = detail::nested_solve(o, a0, y0.interior_vector(), cfg);
    return make_candidate(spec, u, r.inner, r.outer, Method::nested, r.iterations, r.status);
}

/// min_x max_y J_u(x, y), computed independently of nested_minimax with the
/// roles of the players exchanged. Returns (x*, y*(x*)).
inline SaddleCandidate nested_minmax(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x0,
                                     const SolverConfig& cfg, const std::optional<GridFunction>& y_warm = std::nullopt) {
    cfg.validate();
    const detail::Oriented o(spec, u, true);
    const Vector a0 = y_warm ? y_warm->interior_vector() : Vector::Zero(detail::dim(spec));
    const detail::NestedResult r = detail::nested_solve(o, a0, x0.interior_vector(), cfg);
    return make_candidate(spec, u, r.outer, r.inner, Method::nested, r.iterations, r.status);
}

/// Runs the configured method from (x0, y0).
inline SaddleCandidate solve(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x0,
                             const GridFunction& y0, const SolverConfig& cfg) {
    try {
        switch (cfg.method) {
            case Method::extragradient: return extragradient(spec, u, x0, y0, cfg);
            case Method::newton: return newton(spec, u, x0, y0, cfg);
            case Method::nested: return nested_minimax(spec, u, y0, cfg, x0);
        }
    } catch (const EvalError&) {
        SaddleCandidate c{x0, y0};
        c.method = cfg.method;
        c.status = SolveStatus::domain_error;
        c.value = c.grad_norm = c.residual_norm = std::numeric_limits<double>::quiet_NaN();
        return c;
    }
    throw std::logic_error("unknown method");
}

// ------------------------------------------------------------ verification

struct VerifyOptions {
    int probes = 64;
    double eps = 1e-9;     // scaled by (1 + |J*|)
    double tol_res = 0.0;  // 0 selects 1e-8 (1 + ‖L‖∞)
    std::uint64_t seed = 7;
    std::optional<BallRadii> radii;
};

struct SaddleReport {
    double residual = 0.0;
    double tol_res = 0.0;
    bool residual_ok = false;

    double worst_upper = -std::numeric_limits<double>::infinity();  // max_probe J(x*, y) - J*
    double worst_lower = -std::numeric_limits<double>::infinity();  // max_probe J* - J(x, y*)
    bool inequalities_ok = false;

    double min_x_value = 0.0;  // min_x J(x, y*)
    double max_y_value = 0.0;  // max_y J(x*, y)
    bool minimax_ok = false;

    double eps = 0.0;
    int probes = 0;

    bool passed() const { return residual_ok && inequalities_ok && minimax_ok; }
};

/// A posteriori check that `cand` is a saddle point solving the system:
/// (a) residual, (b) sampled saddle inequalities on B_1 × B_2 plus local
/// probes, (c) min_x J(x, y*) and max_y J(x*, y) both equal J(x*, y*).
inline SaddleReport verify_saddle(const ProblemSpec& spec, const ParameterFunction& u, const SaddleCandidate& cand,
                                  const VerifyOptions& opt = {}) {
    SaddleReport rep;
    const std::size_t T = spec.T();
    const Vector xs = cand.x.interior_vector();
    const Vector ys = cand.y.interior_vector();
    if (!xs.allFinite() || !ys.allFinite()) return rep;

    const double J = action(spec, u, xs, ys);
    rep.eps = opt.eps * (1.0 + std::abs(J));
    rep.residual = residual(spec, u, xs, ys);
    rep.tol_res = opt.tol_res > 0.0 ? opt.tol_res : 1e-8 * (1.0 + spec.lap().inf_norm());
    rep.residual_ok = rep.residual <= rep.tol_res;

    const double hx = h_norm(xs), hy = h_norm(ys);
    const double r1 = opt.radii ? opt.radii->r1 : 2.0 * std::max({hx, hy, 1.0});
    const double r2 = opt.radii ? opt.radii->r2 : 2.0 * std::max({hx, hy, 1.0});
    std::mt19937_64 rng(opt.seed);
    for (int p = 0; p < opt.probes; ++p) {
        Vector px, py;
        if (p % 2 == 0) {
            px = sample_h_ball(T, r1, rng);
            py = sample_h_ball(T, r2, rng);
        } else {
            px = xs + sample_h_ball(T, 0.1 * (1.0 + hx), rng);
            py = ys + sample_h_ball(T, 0.1 * (1.0 + hy), rng);
        }
        try {
            rep.worst_upper = std::max(rep.worst_upper, action(spec, u, xs, py) - J);
            rep.worst_lower = std::max(rep.worst_lower, J - action(spec, u, px, ys));
        } catch (const EvalError&) {
            // Probes outside the field's domain say nothing about the saddle.
        }
        ++rep.probes;
    }
    rep.inequalities_ok = rep.worst_upper <= rep.eps && rep.worst_lower <= rep.eps;

    const PartialSolve mx = minimize_x(spec, u, cand.y, cand.x);
    const PartialSolve my = maximize_y(spec, u, cand.x, cand.y);
    rep.min_x_value = mx.value;
    rep.max_y_value = my.value;
    rep.minimax_ok = mx.converged && my.converged && std::abs(mx.value - J) <= rep.eps && std::abs(my.value - J) <= rep.eps;
    return rep;
}

// ------------------------------------------------------------ saddle sets

/// Cluster representatives of the saddle points found by multistart.
struct SaddleSet {
    std::vector<SaddleCandidate> points;
    double cluster_radius = 1e-4;
    int starts = 0;
    int converged = 0;

    bool empty() const { return points.empty(); }
};

/// Worker threads for independent solves: SADDLEBVP_THREADS if set, else the
/// hardware concurrency.
inline int thread_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SADDLEBVP_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = n > 0 ? std::min(n, cap) : cap;
    }
    return std::max(n, 1);
}

/// Runs fn(i) for i in [0, count) on up to thread_count() threads. Results
/// must be written to per-index storage by fn.
template <class Fn>
void parallel_for(int count, Fn&& fn) {
    const int workers = std::min(thread_count(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < count; i += workers) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Orders candidates by value, then lexicographically by x.
inline bool candidate_less(const SaddleCandidate& a, const SaddleCandidate& b) {
    if (a.value != b.value) return a.value < b.value;
    const auto xa = a.x.values(), xb = b.x.values();
    return std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(), xb.end());
}

/// Greedy clustering at `radius` (product H-norm) of candidates in canonical order.
inline std::vector<SaddleCandidate> cluster(std::vector<SaddleCandidate> cands, double radius) {
    std::sort(cands.begin(), cands.end(), candidate_less);
    std::vector<SaddleCandidate> reps;
    for (auto& c : cands) {
        bool joined = false;
        for (auto& r : reps) {
            if (product_distance(c, r) <= radius) {
                if (c.residual_norm < r.residual_norm) r = c;
                joined = true;
                break;
            }
        }
        if (!joined) reps.push_back(std::move(c));
    }
    std::sort(reps.begin(), reps.end(), candidate_less);
    return reps;
}

/// Seed for start i, independent of thread scheduling.
inline std::uint64_t start_seed(std::uint64_t seed, int i) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Multistart saddle search: cfg.multistart solves from seeded uniform starts
/// in B_1 × B_2 (unit balls when cfg.radii is unset), clustered at
/// cfg.cluster_radius.
inline SaddleSet saddle_set(const ProblemSpec& spec, const ParameterFunction& u, const SolverConfig& cfg) {
    cfg.validate();
    const std::size_t T = spec.T();
    const double r1 = cfg.radii ? cfg.radii->r1 : 1.0;
    const double r2 = cfg.radii ? cfg.radii->r2 : 1.0;
    const int n = cfg.multistart;

    std::vector<SaddleCandidate> results(static_cast<std::size_t>(n), SaddleCandidate{GridFunction(T), GridFunction(T)});
    std::vector<std::vector<TraceRow>> traces(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) {
        std::mt19937_64 rng(start_seed(cfg.seed, i));
        const GridFunction x0 = GridFunction::from_interior(sample_h_ball(T, r1, rng));
        const GridFunction y0 = GridFunction::from_interior(sample_h_ball(T, r2, rng));
        SolverConfig local = cfg;
        local.seed = start_seed(cfg.seed, i);
        if (cfg.trace) {
            auto& sink = traces[static_cast<std::size_t>(i)];
            local.trace = [&sink, i](const TraceRow& row) {
                TraceRow r = row;
                r.start = i;
                sink.push_back(r);
            };
        }
        results[static_cast<std::size_t>(i)] = solve(spec, u, x0, y0, local);
    });
    if (cfg.trace) {
        for (const auto& t : traces) {
            for (const auto& row : t) cfg.trace(row);
        }
    }

    SaddleSet set;
    set.cluster_radius = cfg.cluster_radius;
    set.starts = n;
    std::vector<SaddleCandidate> ok;
    for (auto& c : results) {
        if (c.converged()) ok.push_back(std::move(c));
    }
    set.converged = static_cast<int>(ok.size());
    set.points = cluster(std::move(ok), cfg.cluster_radius);
    return set;
}

/// Distance from a candidate to the nearest representative of a set.
inline double distance_to_set(const GridFunction& x, const GridFunction& y, const std::vector<SaddleCandidate>& set) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : set) d = std::min(d, product_distance(x, y, p.x, p.y));
    return d;
}

}  // namespace saddlebvp
