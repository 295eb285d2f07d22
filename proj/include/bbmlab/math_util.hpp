#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bbmlab {

inline constexpr double kSqrt2 = 1.4142135623730951;

// Front centering m(t) = sqrt(2) t - 3/(2 sqrt(2)) log_+(t).
inline double m_of_t(double t) {
    double logp = t > 1.0 ? std::log(t) : 0.0;
    return kSqrt2 * t - 3.0 / (2.0 * kSqrt2) * logp;
}

// Upper tail of the standard normal, accurate far into the tail.
inline double normal_tail(double x) {
    return 0.5 * std::erfc(x / kSqrt2);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / kSqrt2);
}

// Composite Simpson on a uniform grid; n_cells is rounded up to even.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t n_cells) {
    if (b <= a) return 0.0;
    if (n_cells % 2 != 0) ++n_cells;
    if (n_cells < 2) n_cells = 2;
    const double h = (b - a) / static_cast<double>(n_cells);
    double acc = f(a) + f(b);
    for (std::size_t i = 1; i < n_cells; ++i) {
        acc += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

// Simpson over sampled values on a uniform grid (odd count preferred; falls
// back to a trapezoid for the final cell when the count is even).
inline double simpson_samples(const std::vector<double>& v, double h) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    std::size_t last = (n % 2 == 1) ? n - 1 : n - 2;
    double acc = v[0] + v[last];
    for (std::size_t i = 1; i < last; ++i) acc += v[i] * (i % 2 ? 4.0 : 2.0);
    double result = acc * h / 3.0;
    if (n % 2 == 0) result += 0.5 * h * (v[n - 2] + v[n - 1]);
    return result;
}

// Solves a tridiagonal system in place (Thomas algorithm).
// lower[0] and upper[n-1] are ignored. Overwrites rhs with the solution.
inline void solve_tridiagonal(const std::vector<double>& lower,
                              std::vector<double> diag,
                              const std::vector<double>& upper,
                              std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return;
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

// Linear interpolation of tabulated values on a uniform grid.
inline double lerp_uniform(const std::vector<double>& values, double x0, double h,
                           double x) {
    if (values.empty()) throw std::invalid_argument("lerp_uniform: empty table");
    const double pos = (x - x0) / h;
    if (pos <= 0.0) return values.front();
    const auto last = static_cast<double>(values.size() - 1);
    if (pos >= last) return values.back();
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

inline bool nearly_equal(double a, double b, double tol = 1e-12) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace bbmlab
