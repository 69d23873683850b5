#pragma once

// Test-side oracles. Nothing here calls the library's numerical routines
// (Laplacian, solvers, embedding constants); expression evaluation is the only
// shared primitive.

#include "saddlebvp/expr.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double c2_closed_form(std::size_t T) {
    const double s = std::sin(std::numbers::pi / (2.0 * static_cast<double>(T + 1)));
    return 1.0 / (4.0 * s * s);
}

inline Mat dense_laplacian(std::size_t T) {
    const auto n = static_cast<Eigen::Index>(T);
    Mat L = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        L(i, i) = 2.0;
        if (i + 1 < n) L(i, i + 1) = L(i + 1, i) = -1.0;
    }
    return L;
}

/// Σ_{k=1}^{T+1} |x(k) - x(k-1)|² from interior values with zero ends.
inline double sum_sq_diff(const Vec& x) {
    double s = 0.0, prev = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        s += (x[i] - prev) * (x[i] - prev);
        prev = x[i];
    }
    return s + prev * prev;
}

/// max of xᵀx / xᵀLx by locally optimal block steepest descent (span of the
/// iterate, its residual and the previous iterate, Rayleigh–Ritz each step).
inline double rayleigh_max(std::size_t T, int max_iter = 20000) {
    const Mat L = dense_laplacian(T);
    const auto n = static_cast<Eigen::Index>(T);
    if (n == 1) return 0.5;
    Vec x = Vec::Ones(n).normalized();
    Vec prev = Vec::Zero(n);
    double lam = x.dot(L * x);
    for (int it = 0; it < max_iter; ++it) {
        const Vec r = L * x - lam * x;
        if (r.norm() < 1e-15) break;
        Mat S(n, prev.norm() > 0 ? 3 : 2);
        S.col(0) = x;
        S.col(1) = r;
        if (S.cols() == 3) S.col(2) = prev;
        const Eigen::HouseholderQR<Mat> qr(S);
        const Mat Q = qr.householderQ() * Mat::Identity(n, S.cols());
        const Eigen::SelfAdjointEigenSolver<Mat> es(Q.transpose() * L * Q);
        const Vec xn = (Q * es.eigenvectors().col(0)).normalized();
        const double ln = xn.dot(L * xn);
        prev = xn - x * (x.dot(xn));
        x = xn;
        if (std::abs(ln - lam) <= 1e-17 * lam && it > 10) {
            lam = ln;
            break;
        }
        lam = ln;
    }
    return 1.0 / lam;
}

/// J_u(x, y) straight from its definition.
inline double action(const saddlebvp::Expr& F, const std::vector<double>& u, const Vec& x, const Vec& y) {
    double s = 0.5 * (sum_sq_diff(x) - sum_sq_diff(y));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        s += saddlebvp::eval(F, saddlebvp::Env{double(i + 1), x[i], y[i], u[static_cast<std::size_t>(i)]});
    }
    return s;
}

/// Central differences of a scalar function of a vector, step 1e-6 (1 + |v_i|).
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& v) {
    Vec g(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(v[i]));
        Vec p = v, m = v;
        p[i] += h;
        m[i] -= h;
        g[i] = (f(p) - f(m)) / (2.0 * h);
    }
    return g;
}

inline std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

/// A random instance of the certified family
///   F = p x² + w1 √(1+x²) - q y² - w2 √(1+y²) + c x y + u (d x - e y) + r cos(k) x + h u² y
/// with p, q, w1, w2 >= 0 (so x ↦ J is convex and y ↦ J concave) and the
/// analytic certificate with anchors 0, beta = 0, alpha = 1/(4 c_2):
///   gamma1(k) = w1 - w2 - (|d| D + |r cos k|)² / (4 alpha)
///   gamma2(k) = w1 - w2 + (|e| D + |h| D²)² / (4 alpha)
struct Instance {
    std::size_t T;
    double D;
    double p, w1, q, w2, c, d, e, r, h;
    std::vector<double> u;

    std::string F() const {
        std::ostringstream s;
        s << fmt(p) << "*x^2 + " << fmt(w1) << "*sqrt(1 + x^2) - " << fmt(q) << "*y^2 - " << fmt(w2) << "*sqrt(1 + y^2) + "
          << fmt(c) << "*x*y + u*(" << fmt(d) << "*x - " << fmt(e) << "*y) + " << fmt(r) << "*cos(k)*x + " << fmt(h) << "*u^2*y";
        return s.str();
    }

    bool quadratic() const { return w1 == 0.0 && w2 == 0.0 && h == 0.0; }

    double alpha() const { return 1.0 / (4.0 * c2_closed_form(T)); }

    std::vector<double> gamma1() const {
        std::vector<double> g(T);
        for (std::size_t k = 1; k <= T; ++k) {
            const double b = std::abs(d) * D + std::abs(r * std::cos(double(k)));
            g[k - 1] = w1 - w2 - b * b / (4.0 * alpha());
        }
        return g;
    }

    std::vector<double> gamma2() const {
        const double b = std::abs(e) * D + std::abs(h) * D * D;
        return std::vector<double>(T, w1 - w2 + b * b / (4.0 * alpha()));
    }

    /// For quadratic instances G(z) = M z + b; the saddle is -M⁻¹ b.
    Vec direct_solution() const {
        const auto n = static_cast<Eigen::Index>(T);
        const Mat L = dense_laplacian(T);
        Mat M = Mat::Zero(2 * n, 2 * n);
        Vec b(2 * n);
        M.topLeftCorner(n, n) = L + 2.0 * p * Mat::Identity(n, n);
        M.topRightCorner(n, n) = c * Mat::Identity(n, n);
        M.bottomLeftCorner(n, n) = -c * Mat::Identity(n, n);
        M.bottomRightCorner(n, n) = L + 2.0 * q * Mat::Identity(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double uk = u[static_cast<std::size_t>(i)];
            b[i] = uk * d + r * std::cos(double(i + 1));
            b[n + i] = uk * e;
        }
        return M.fullPivLu().solve(-b);
    }
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t T, bool quadratic) {
    std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);
    Instance in{};
    in.T = T;
    in.D = 1.0 + unit(rng);
    in.p = 0.5 * unit(rng);
    in.q = 0.5 * unit(rng);
    in.c = 2.0 * sym(rng);
    in.d = sym(rng);
    in.e = sym(rng);
    in.r = 0.5 * sym(rng);
    in.w1 = quadratic ? 0.0 : unit(rng);
    in.w2 = quadratic ? 0.0 : unit(rng);
    in.h = quadratic ? 0.0 : 0.3 * sym(rng);
    in.u.resize(T);
    for (auto& v : in.u) v = in.D * sym(rng);
    return in;
}

}  // namespace oracle
