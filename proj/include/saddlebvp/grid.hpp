#pragma once

// The space H of grid functions on {0, ..., T+1} vanishing at both ends,
// its difference operators and norm, the Dirichlet Laplacian, and the
// discrete embedding constants c_m.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saddlebvp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Element of H: values at nodes 0..T+1 with zero boundary values.
///
/// The boundary zeros are stored explicitly so that node k of the
/// difference formulas is simply `x[k]`.
class GridFunction {
public:
    /// Zero function on T interior nodes.
    explicit GridFunction(std::size_t T) : values_(checked_T(T) + 2, 0.0) {}

    static GridFunction from_interior(std::span<const double> interior) {
        GridFunction g(interior.size());
        std::copy(interior.begin(), interior.end(), g.values_.begin() + 1);
        return g;
    }

    static GridFunction from_interior(const Vector& interior) {
        return from_interior(std::span<const double>(interior.data(), static_cast<std::size_t>(interior.size())));
    }

    /// From all T+2 node values; the two boundary entries must be exactly 0.
    static GridFunction from_values(std::span<const double> values) {
        if (values.size() < 3) {
            throw std::invalid_argument("grid function needs at least 3 node values (T >= 1)");
        }
        if (values.front() != 0.0 || values.back() != 0.0) {
            throw std::invalid_argument("grid function must vanish at nodes 0 and T+1");
        }
        GridFunction g(values.size() - 2);
        std::copy(values.begin(), values.end(), g.values_.begin());
        return g;
    }

    std::size_t T() const { return values_.size() - 2; }

    /// Node value, k in 0..T+1.
    double operator[](std::size_t k) const { return values_[k]; }
    double at(std::size_t k) const {
        if (k >= values_.size()) {
            throw std::out_of_range("grid node " + std::to_string(k) + " outside 0.." + std::to_string(T() + 1));
        }
        return values_[k];
    }

    std::span<const double> values() const { return values_; }
    std::span<const double> interior() const { return {values_.data() + 1, T()}; }
    Vector interior_vector() const { return Eigen::Map<const Vector>(values_.data() + 1, static_cast<Eigen::Index>(T())); }

    friend GridFunction operator+(const GridFunction& a, const GridFunction& b) { return combine(a, b, 1.0); }
    friend GridFunction operator-(const GridFunction& a, const GridFunction& b) { return combine(a, b, -1.0); }
    friend GridFunction operator*(double s, const GridFunction& a) {
        GridFunction r(a.T());
        for (std::size_t k = 1; k <= a.T(); ++k) r.values_[k] = s * a.values_[k];
        return r;
    }
    friend bool operator==(const GridFunction&, const GridFunction&) = default;

private:
    static std::size_t checked_T(std::size_t T) {
        if (T < 1) throw std::invalid_argument("grid needs T >= 1 interior nodes");
        return T;
    }

    static GridFunction combine(const GridFunction& a, const GridFunction& b, double sign) {
        if (a.T() != b.T()) throw std::invalid_argument("grid functions of different length");
        GridFunction r(a.T());
        for (std::size_t k = 1; k <= a.T(); ++k) r.values_[k] = a.values_[k] + sign * b.values_[k];
        return r;
    }

    std::vector<double> values_;
};

/// Forward differences Δx(k-1) = x(k) - x(k-1) for k = 1..T+1.
inline std::vector<double> delta(const GridFunction& x) {
    std::vector<double> d(x.T() + 1);
    for (std::size_t k = 1; k <= x.T() + 1; ++k) d[k - 1] = x[k] - x[k - 1];
    return d;
}

/// Δ²x(k-1) = x(k+1) - 2x(k) + x(k-1), for 1 <= k <= T.
inline double second_difference(const GridFunction& x, std::size_t k) {
    if (k < 1 || k > x.T()) {
        throw std::out_of_range("second difference index " + std::to_string(k) + " outside 1.." + std::to_string(x.T()));
    }
    return x[k + 1] - 2.0 * x[k] + x[k - 1];
}

/// ‖x‖ = (Σ |Δx(k-1)|²)^{1/2}.
inline double h_norm(const GridFunction& x) {
    double s = 0.0;
    for (double d : delta(x)) s += d * d;
    return std::sqrt(s);
}

/// H-norm of a function given by its interior values.
inline double h_norm(const Vector& interior) {
    const Eigen::Index T = interior.size();
    double s = 0.0, prev = 0.0;
    for (Eigen::Index k = 0; k < T; ++k) {
        s += (interior[k] - prev) * (interior[k] - prev);
        prev = interior[k];
    }
    return std::sqrt(s + prev * prev);
}

/// Symmetric tridiagonal matrix stored by its diagonal and off-diagonal.
struct SymmetricTridiagonal {
    Vector diag;
    Vector off;  // size n-1

    Eigen::Index size() const { return diag.size(); }

    Vector apply(const Vector& v) const {
        Vector r = diag.cwiseProduct(v);
        for (Eigen::Index i = 0; i + 1 < size(); ++i) {
            r[i] += off[i] * v[i + 1];
            r[i + 1] += off[i] * v[i];
        }
        return r;
    }

    /// Number of eigenvalues strictly less than `shift` (Sturm sequence count
    /// via the LDLᵀ pivots of A - shift·I).
    int count_below(double shift) const {
        int count = 0;
        double q = diag[0] - shift;
        const double tiny = std::numeric_limits<double>::min();
        for (Eigen::Index i = 0;; ++i) {
            if (q == 0.0) q = -tiny;
            if (q < 0.0) ++count;
            if (i + 1 == size()) break;
            q = diag[i + 1] - shift - off[i] * off[i] / q;
        }
        return count;
    }

    /// Gerschgorin enclosure of the spectrum.
    std::pair<double, double> gerschgorin() const {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (Eigen::Index i = 0; i < size(); ++i) {
            double r = 0.0;
            if (i > 0) r += std::abs(off[i - 1]);
            if (i + 1 < size()) r += std::abs(off[i]);
            lo = std::min(lo, diag[i] - r);
            hi = std::max(hi, diag[i] + r);
        }
        return {lo, hi};
    }

    /// Smallest eigenvalue by bisection on the Sturm count. Accurate to an
    /// absolute error of about `tol` plus rounding at the scale of ‖A‖.
    double min_eigenvalue(double tol = 0.0) const {
        auto [lo, hi] = gerschgorin();
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi || hi - lo <= tol) break;
            if (count_below(mid) >= 1) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return 0.5 * (lo + hi);
    }

    /// Thomas algorithm; requires the elimination to be pivot-free stable
    /// (e.g. diagonally dominant or positive definite).
    Vector solve(const Vector& rhs) const {
        const Eigen::Index n = size();
        Vector c(n), d(n);
        double denom = diag[0];
        c[0] = n > 1 ? off[0] / denom : 0.0;
        d[0] = rhs[0] / denom;
        for (Eigen::Index i = 1; i < n; ++i) {
            denom = diag[i] - off[i - 1] * c[i - 1];
            c[i] = i + 1 < n ? off[i] / denom : 0.0;
            d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
        }
        Vector x(n);
        x[n - 1] = d[n - 1];
        for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
        return x;
    }

    Matrix dense() const {
        Matrix m = diag.asDiagonal();
        for (Eigen::Index i = 0; i + 1 < size(); ++i) m(i, i + 1) = m(i + 1, i) = off[i];
        return m;
    }
};

/// L = tridiag(-1, 2, -1) acting on the interior nodes 1..T.
///
/// ½ xᵀLx equals Σ |Δx(k-1)|² / 2 for x ∈ H, so L realizes the quadratic
/// part of the action functional and Lx = -Δ²x.
class DirichletLaplacian {
public:
    explicit DirichletLaplacian(std::size_t T) : T_(T) {
        if (T < 1) throw std::invalid_argument("Laplacian needs T >= 1");
    }

    std::size_t T() const { return T_; }

    SymmetricTridiagonal tridiagonal() const {
        const auto n = static_cast<Eigen::Index>(T_);
        return {Vector::Constant(n, 2.0), Vector::Constant(n - 1, -1.0)};
    }

    Matrix matrix() const { return tridiagonal().dense(); }

    Vector apply(const Vector& v) const {
        const Eigen::Index n = v.size();
        Vector r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            r[i] = 2.0 * v[i] - (i > 0 ? v[i - 1] : 0.0) - (i + 1 < n ? v[i + 1] : 0.0);
        }
        return r;
    }

    Vector solve(const Vector& rhs) const { return tridiagonal().solve(rhs); }

    /// Closed-form spectrum 4 sin²(jπ / (2(T+1))), j = 1..T, ascending.
    Vector eigenvalues() const {
        Vector ev(static_cast<Eigen::Index>(T_));
        for (std::size_t j = 1; j <= T_; ++j) {
            const double s = std::sin(static_cast<double>(j) * std::numbers::pi / (2.0 * static_cast<double>(T_ + 1)));
            ev[static_cast<Eigen::Index>(j - 1)] = 4.0 * s * s;
        }
        return ev;
    }

    /// Induced ∞-norm (maximum absolute row sum).
    double inf_norm() const { return T_ == 1 ? 2.0 : (T_ == 2 ? 3.0 : 4.0); }

private:
    std::size_t T_;
};

inline DirichletLaplacian laplacian(std::size_t T) { return DirichletLaplacian(T); }

/// c_m together with the function attaining (or approaching) the supremum.
struct EmbeddingConstant {
    double m;
    std::size_t T;
    double value;
    bool exact;  // false: numerically certified lower estimate
    GridFunction maximizer;

    /// Upper bound for callers that need one when the value is only a lower
    /// estimate.
    double safe_upper(double factor = 1.05) const { return exact ? value : factor * value; }
};

struct EmbeddingOptions {
    int starts = 16;
    int max_iter = 4000;
    std::uint64_t seed = 0x5eed;
};

/// Σ|x(k)|^m / Σ|Δx(k-1)|^m for interior values x (not all zero).
inline double embedding_ratio(const Vector& x, double m) {
    const Eigen::Index T = x.size();
    double num = 0.0, den = 0.0, prev = 0.0;
    for (Eigen::Index k = 0; k < T; ++k) {
        num += std::pow(std::abs(x[k]), m);
        den += std::pow(std::abs(x[k] - prev), m);
        prev = x[k];
    }
    den += std::pow(std::abs(prev), m);
    return num / den;
}

namespace detail {

/// Largest eigenvalue of L⁻¹ by power iteration. The iterates stay
/// positive and every sum is over positive terms, so the result carries
/// relative (not merely absolute) accuracy even when λ_min(L) is tiny.
inline std::pair<double, Vector> inverse_laplacian_dominant(std::size_t T) {
    const DirichletLaplacian lap(T);
    const auto n = static_cast<Eigen::Index>(T);
    Vector v = Vector::Ones(n);
    v /= v.norm();
    double rq = 0.0;
    for (int it = 0; it < 500; ++it) {
        Vector w = lap.solve(v);
        const double next = v.dot(w);
        v = w / w.norm();
        if (it > 2 && std::abs(next - rq) <= 1e-17 * next) {
            rq = next;
            break;
        }
        rq = next;
    }
    // Final Rayleigh quotient on the converged vector.
    return {v.dot(lap.solve(v)) / v.squaredNorm(), v};
}

/// Gradient of log(Σ|x|^m) - log(Σ|Δx|^m).
inline Vector log_ratio_gradient(const Vector& x, double m) {
    const Eigen::Index T = x.size();
    auto dpow = [m](double t) { return m * std::pow(std::abs(t), m - 1.0) * (t > 0 ? 1.0 : (t < 0 ? -1.0 : 0.0)); };
    double num = 0.0, den = 0.0;
    Vector gnum(T), gden = Vector::Zero(T);
    for (Eigen::Index k = 0; k < T; ++k) {
        num += std::pow(std::abs(x[k]), m);
        gnum[k] = dpow(x[k]);
    }
    for (Eigen::Index j = 0; j <= T; ++j) {
        const double right = j < T ? x[j] : 0.0;
        const double left = j > 0 ? x[j - 1] : 0.0;
        const double d = right - left;
        den += std::pow(std::abs(d), m);
        if (j < T) gden[j] += dpow(d);
        if (j > 0) gden[j - 1] -= dpow(d);
    }
    return gnum / num - gden / den;
}

inline std::pair<double, Vector> maximize_ratio(Vector x, double m, int max_iter) {
    x /= x.norm();
    double best = embedding_ratio(x, m);
    double step = 0.1;
    for (int it = 0; it < max_iter; ++it) {
        const Vector g = log_ratio_gradient(x, m);
        const double gn = g.norm();
        if (gn < 1e-14) break;
        bool improved = false;
        while (step > 1e-16) {
            Vector trial = x + step * g / gn;
            trial /= trial.norm();
            const double r = embedding_ratio(trial, m);
            if (r > best) {
                x = trial;
                best = r;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    return {best, x};
}

}  // namespace detail

/// Smallest c_m with Σ_{k=1}^T |x(k)|^m <= c_m Σ_{k=1}^{T+1} |Δx(k-1)|^m on H.
///
/// For m = 2 this is 1/λ_min(L), computed to full relative precision. For
/// m > 2 the supremum of the ratio is searched by multistart ascent over the
/// unit sphere; the result is a lower estimate (`exact == false`) with the
/// best maximizer attached.
inline EmbeddingConstant embedding_constant(double m, std::size_t T, const EmbeddingOptions& opts = {}) {
    if (!(m >= 2.0)) throw std::invalid_argument("embedding constant needs m >= 2");
    if (T < 1) throw std::invalid_argument("embedding constant needs T >= 1");

    auto [mu, v] = detail::inverse_laplacian_dominant(T);
    if (m == 2.0) {
        return {m, T, mu, true, GridFunction::from_interior(v)};
    }

    const auto n = static_cast<Eigen::Index>(T);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    std::vector<Vector> starts{v, Vector::Ones(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector e = Vector::Zero(n);
        e[i] = 1.0;
        if (static_cast<int>(starts.size()) < opts.starts / 2 + 2) starts.push_back(e);
    }
    while (static_cast<int>(starts.size()) < std::max(opts.starts, 2)) {
        Vector r(n);
        for (auto& c : r) c = normal(rng);
        starts.push_back(r);
    }

    double best = -1.0;
    Vector arg;
    for (const auto& s : starts) {
        auto [val, x] = detail::maximize_ratio(s, m, opts.max_iter);
        if (val > best) {
            best = val;
            arg = x;
        }
    }
    return {m, T, best, false, GridFunction::from_interior(arg)};
}

/// Draw x uniformly from the H-ball {‖x‖ <= radius}.
template <class Rng>
Vector sample_h_ball(std::size_t T, double radius, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(T);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector w(n);
    for (auto& c : w) c = normal(rng);
    const double wn = w.norm();
    if (wn == 0.0 || radius == 0.0) return Vector::Zero(n);
    const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(T));
    // xᵀLx = ‖Rx‖² with L = RᵀR; x = R⁻¹v maps the Euclidean ball onto the H-ball.
    const Eigen::LLT<Matrix> llt(laplacian(T).matrix());
    return llt.matrixU().solve(Vector((r / wn) * w));
}

/// Draw x uniformly from the H-sphere {‖x‖ = radius}.
template <class Rng>
Vector sample_h_sphere(std::size_t T, double radius, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(T);
    std::normal_distribution<double> normal;
    Vector w(n);
    for (auto& c : w) c = normal(rng);
    const double wn = w.norm();
    if (wn == 0.0 || radius == 0.0) return Vector::Zero(n);
    const Eigen::LLT<Matrix> llt(laplacian(T).matrix());
    return llt.matrixU().solve(Vector((radius / wn) * w));
}

}  // namespace saddlebvp
