#pragma once

// Problem assembly: the parameter box L_D, the action functional
//
//   J_u(x, y) = Σ_{k=1}^{T+1} (|Δx(k-1)|² - |Δy(k-1)|²)/2 + Σ_{k=1}^{T} F(k, x(k), y(k), u(k)),
//
// its gradient and Hessian blocks, and the residual of the boundary value
// system Δ²x = F_x, Δ²y = -F_y with zero boundary values.

#include "saddlebvp/expr.hpp"
#include "saddlebvp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace saddlebvp {

/// u ∈ L_D: values at nodes 1..T with max |u(k)| <= D.
class ParameterFunction {
public:
    ParameterFunction(std::vector<double> values, double bound) : values_(std::move(values)), bound_(bound) {
        if (!(bound_ > 0.0)) throw std::invalid_argument("parameter bound D must be positive");
        if (values_.empty()) throw std::invalid_argument("parameter function needs T >= 1 values");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]) || std::abs(values_[i]) > bound_) {
                throw std::invalid_argument("parameter u(" + std::to_string(i + 1) + ") = " + std::to_string(values_[i]) +
                                            " outside [-D, D] with D = " + std::to_string(bound_));
            }
        }
    }

    /// Samples an expression in k at k = 1..T.
    static ParameterFunction from_expression(std::string_view text, std::size_t T, double bound) {
        const Expr e = parse(text);
        for (Var v : {Var::x, Var::y, Var::u}) {
            if (depends_on(e, v)) throw std::invalid_argument("parameter expression may only use k");
        }
        std::vector<double> vals(T);
        for (std::size_t k = 1; k <= T; ++k) vals[k - 1] = eval(e, Env{static_cast<double>(k)});
        return ParameterFunction(std::move(vals), bound);
    }

    static ParameterFunction constant(std::size_t T, double value, double bound) {
        return ParameterFunction(std::vector<double>(T, value), bound);
    }

    std::size_t T() const { return values_.size(); }
    double bound() const { return bound_; }
    /// u(k), k in 1..T.
    double operator()(std::size_t k) const { return values_[k - 1]; }
    const std::vector<double>& values() const { return values_; }

    double max_norm() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    friend bool operator==(const ParameterFunction&, const ParameterFunction&) = default;

private:
    std::vector<double> values_;
    double bound_;
};

/// ‖a - b‖_C.
inline double max_distance(const ParameterFunction& a, const ParameterFunction& b) {
    double m = 0.0;
    for (std::size_t k = 1; k <= a.T(); ++k) m = std::max(m, std::abs(a(k) - b(k)));
    return m;
}

/// (T, D, F) together with the Laplacian of dimension T.
class ProblemSpec {
public:
    ProblemSpec(std::size_t T, double D, ScalarField field) : T_(T), D_(D), field_(std::move(field)), lap_(T) {
        if (!(D_ > 0.0)) throw std::invalid_argument("parameter bound D must be positive");
    }

    std::size_t T() const { return T_; }
    double D() const { return D_; }
    const ScalarField& field() const { return field_; }
    const DirichletLaplacian& lap() const { return lap_; }

private:
    std::size_t T_;
    double D_;
    ScalarField field_;
    DirichletLaplacian lap_;
};

namespace detail {

inline void check_dims(const ProblemSpec& spec, const ParameterFunction& u, Eigen::Index xs, Eigen::Index ys) {
    const auto T = static_cast<Eigen::Index>(spec.T());
    if (static_cast<Eigen::Index>(u.T()) != T || xs != T || ys != T) {
        throw std::invalid_argument("dimension mismatch: problem has T = " + std::to_string(spec.T()));
    }
}

inline Env env_at(const ParameterFunction& u, const Vector& x, const Vector& y, Eigen::Index i) {
    return Env{static_cast<double>(i + 1), x[i], y[i], u(static_cast<std::size_t>(i + 1))};
}

}  // namespace detail

// ---- interior-vector forms; x and y hold the values at nodes 1..T

inline double action(const ProblemSpec& spec, const ParameterFunction& u, const Vector& x, const Vector& y) {
    detail::check_dims(spec, u, x.size(), y.size());
    const double hx = h_norm(x);
    const double hy = h_norm(y);
    double s = 0.5 * (hx * hx - hy * hy);
    for (Eigen::Index i = 0; i < x.size(); ++i) s += eval(spec.field().f(), detail::env_at(u, x, y, i));
    return s;
}

struct Gradient {
    Vector gx;  // ∂J/∂x = Lx + F_x
    Vector gy;  // ∂J/∂y = -Ly + F_y
};

inline Gradient grad(const ProblemSpec& spec, const ParameterFunction& u, const Vector& x, const Vector& y) {
    detail::check_dims(spec, u, x.size(), y.size());
    Gradient g{spec.lap().apply(x), -spec.lap().apply(y)};
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const Env env = detail::env_at(u, x, y, i);
        g.gx[i] += eval(spec.field().fx(), env);
        g.gy[i] += eval(spec.field().fy(), env);
    }
    return g;
}

/// max_k max(|Δ²x(k-1) - F_x|, |Δ²y(k-1) + F_y|).
inline double residual(const ProblemSpec& spec, const ParameterFunction& u, const Vector& x, const Vector& y) {
    const Gradient g = grad(spec, u, x, y);
    // Δ²x = -Lx and Δ²y = -Ly, so the two components are |gx| and |gy|.
    return std::max(g.gx.lpNorm<Eigen::Infinity>(), g.gy.lpNorm<Eigen::Infinity>());
}

struct HessianBlocks {
    Matrix xx;  // L + diag(F_xx)
    Matrix xy;  // diag(F_xy)
    Matrix yy;  // -L + diag(F_yy)
};

/// Diagonals F_xx, F_xy, F_yy at each node.
struct SecondPartials {
    Vector xx, xy, yy;
};

inline SecondPartials second_partials(const ProblemSpec& spec, const ParameterFunction& u, const Vector& x, const Vector& y) {
    detail::check_dims(spec, u, x.size(), y.size());
    const ScalarField& f = spec.field();
    if (!f.has_second_partials()) throw std::logic_error("Hessian requested but the field has no second partials");
    const Eigen::Index T = x.size();
    SecondPartials d{Vector(T), Vector(T), Vector(T)};
    for (Eigen::Index i = 0; i < T; ++i) {
        const Env env = detail::env_at(u, x, y, i);
        d.xx[i] = eval(f.fxx(), env);
        d.xy[i] = eval(f.fxy(), env);
        d.yy[i] = eval(f.fyy(), env);
    }
    return d;
}

inline HessianBlocks hessian_blocks(const ProblemSpec& spec, const ParameterFunction& u, const Vector& x, const Vector& y) {
    const SecondPartials d = second_partials(spec, u, x, y);
    const Matrix L = spec.lap().matrix();
    return {L + Matrix(d.xx.asDiagonal()), Matrix(d.xy.asDiagonal()), -L + Matrix(d.yy.asDiagonal())};
}

// ---- GridFunction forms

inline double action(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x, const GridFunction& y) {
    return action(spec, u, x.interior_vector(), y.interior_vector());
}
inline Gradient grad(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x, const GridFunction& y) {
    return grad(spec, u, x.interior_vector(), y.interior_vector());
}
inline double residual(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x, const GridFunction& y) {
    return residual(spec, u, x.interior_vector(), y.interior_vector());
}
inline HessianBlocks hessian_blocks(const ProblemSpec& spec, const ParameterFunction& u, const GridFunction& x,
                                    const GridFunction& y) {
    return hessian_blocks(spec, u, x.interior_vector(), y.interior_vector());
}

// ---- candidates

enum class Method { extragradient, newton, nested };

enum class SolveStatus { converged, max_iterations, diverged, singular_jacobian, inner_failure, stalled, domain_error };

inline std::string_view name(Method m) {
    switch (m) {
        case Method::extragradient: return "extragradient";
        case Method::newton: return "newton";
        case Method::nested: return "nested";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "extragradient") return Method::extragradient;
    if (s == "newton") return Method::newton;
    if (s == "nested") return Method::nested;
    throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected extragradient, newton or nested)");
}

inline std::string_view name(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iterations: return "max_iterations";
        case SolveStatus::diverged: return "diverged";
        case SolveStatus::singular_jacobian: return "singular_jacobian";
        case SolveStatus::inner_failure: return "inner_failure";
        case SolveStatus::stalled: return "stalled";
        case SolveStatus::domain_error: return "domain_error";
    }
    return "?";
}

/// A computed approximation of a saddle point with its diagnostics.
struct SaddleCandidate {
    GridFunction x;
    GridFunction y;
    double value = 0.0;          // J_u(x, y)
    double grad_norm = 0.0;      // Euclidean norm of (∂J/∂x, ∂J/∂y)
    double residual_norm = 0.0;  // residual of the boundary value system
    Method method = Method::newton;
    int iterations = 0;
    SolveStatus status = SolveStatus::converged;
    double condition_estimate = 0.0;  // Newton only; 0 when not computed

    bool converged() const { return status == SolveStatus::converged; }
};

inline SaddleCandidate make_candidate(const ProblemSpec& spec, const ParameterFunction& u, const Vector& x,
                                      const Vector& y, Method method, int iterations, SolveStatus status) {
    const Gradient g = grad(spec, u, x, y);
    SaddleCandidate c{GridFunction::from_interior(x), GridFunction::from_interior(y)};
    c.value = action(spec, u, x, y);
    c.grad_norm = std::sqrt(g.gx.squaredNorm() + g.gy.squaredNorm());
    c.residual_norm = std::max(g.gx.lpNorm<Eigen::Infinity>(), g.gy.lpNorm<Eigen::Infinity>());
    c.method = method;
    c.iterations = iterations;
    c.status = status;
    return c;
}

/// √(‖x - x'‖² + ‖y - y'‖²) in the H-norm.
inline double product_distance(const GridFunction& x1, const GridFunction& y1, const GridFunction& x2,
                               const GridFunction& y2) {
    const double dx = h_norm(x1 - x2);
    const double dy = h_norm(y1 - y2);
    return std::sqrt(dx * dx + dy * dy);
}

inline double product_distance(const SaddleCandidate& a, const SaddleCandidate& b) {
    return product_distance(a.x, a.y, b.x, b.y);
}

}  // namespace saddlebvp
