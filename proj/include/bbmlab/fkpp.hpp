#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bbmlab/math_util.hpp"
#include "bbmlab/point_config.hpp"

namespace bbmlab {

// FKPP equation d_t u = 1/2 d_xx u + u - u^2, solved in the traveling frame
// y = x - sqrt(2) t where it reads d_t u = 1/2 d_yy u + sqrt(2) d_y u + u - u^2.
// Scheme: backward Euler on the linear part (diffusion + advection, banded
// solve), explicit reaction. Central advection keeps the implicit matrix an
// M-matrix for h < 1/sqrt(2), so the discrete comparison principle holds and
// 0 <= u <= 1 is preserved up to roundoff.

struct FkppGrid {
    double y_min = -60.0;
    double y_max = 60.0;
    double h = 0.02;
    double dt = 0.01;
};

struct FkppInitial {
    // step_indicator: phi(x) = amp * 1_{x <= 0}; amp = 1 is the u_M case
    // P(M_t >= x). from_step_function: phi(x) = 1 - exp(-f(-x)) for a step
    // function f. constant: phi = amp everywhere (equilibria checks).
    enum class Kind { step_indicator, from_step_function, constant };
    Kind kind = Kind::step_indicator;
    StepFunction f;
    double amp = 1.0;

    static FkppInitial step() { return {Kind::step_indicator, {}, 1.0}; }
    static FkppInitial scaled_step(double amp) { return {Kind::step_indicator, {}, amp}; }
    static FkppInitial constant(double amp) { return {Kind::constant, {}, amp}; }
    static FkppInitial from_f(StepFunction f) {
        return {Kind::from_step_function, std::move(f), 1.0};
    }

    double phi(double x) const {
        switch (kind) {
            case Kind::step_indicator: return x <= 0.0 ? amp : 0.0;
            case Kind::constant: return amp;
            case Kind::from_step_function: return 1.0 - std::exp(-f(-x));
        }
        return 0.0;
    }
};

struct FkppDiagnosticsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class FkppField {
  public:
    FkppField(FkppGrid grid, FkppInitial initial, std::vector<double> times,
              std::vector<std::vector<double>> values)
        : grid_(grid), initial_(std::move(initial)), times_(std::move(times)),
          values_(std::move(values)) {}

    const FkppGrid& grid() const { return grid_; }
    const FkppInitial& initial() const { return initial_; }
    const std::vector<double>& times() const { return times_; }

    const std::vector<double>& at_time(double t) const {
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (nearly_equal(times_[i], t, 1e-9)) return values_[i];
        }
        throw std::invalid_argument("FkppField: time " + std::to_string(t) +
                                    " is not a stored checkpoint");
    }

    // u at a stored checkpoint, linearly interpolated in the frame coordinate.
    double value(double t, double y) const {
        const auto& row = at_time(t);
        if (y < grid_.y_min || y > grid_.y_max) {
            throw std::invalid_argument("FkppField: query outside the grid");
        }
        return lerp_uniform(row, grid_.y_min, grid_.h, y);
    }

    // u_phi(t, x) in lab coordinates.
    double value_lab(double t, double x) const { return value(t, x - kSqrt2 * t); }

  private:
    FkppGrid grid_;
    FkppInitial initial_;
    std::vector<double> times_;
    std::vector<std::vector<double>> values_;
};

inline FkppField solve_fkpp(const FkppInitial& initial, std::vector<double> checkpoints,
                            const FkppGrid& grid) {
    if (checkpoints.empty()) throw std::invalid_argument("solve_fkpp: no checkpoints");
    std::sort(checkpoints.begin(), checkpoints.end());
    if (checkpoints.front() < 0.0) throw std::invalid_argument("solve_fkpp: negative time");
    if (!(grid.h > 0.0) || !(grid.dt > 0.0) || !(grid.y_min < grid.y_max)) {
        throw std::invalid_argument("solve_fkpp: malformed grid");
    }
    if (grid.h >= 1.0 / kSqrt2) {
        throw std::invalid_argument("solve_fkpp: h too coarse for a monotone scheme");
    }

    const auto n = static_cast<std::size_t>(std::llround((grid.y_max - grid.y_min) / grid.h)) + 1;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = initial.phi(grid.y_min + grid.h * static_cast<double>(i));
    }
    const double left_bc = u.front();
    const double right_bc = u.back();
    const double left_ref = u[5];
    const double right_ref = u[n - 6];

    std::vector<std::vector<double>> snapshots;
    std::vector<double> lower(n), diag(n), upper(n), rhs(n);

    auto step_to = [&](double from, double to) {
        const double span = to - from;
        if (span <= 0.0) return;
        const auto n_steps = static_cast<std::size_t>(std::ceil(span / grid.dt - 1e-12));
        const double dt = span / static_cast<double>(n_steps);
        const double a = dt * 0.5 / (grid.h * grid.h);       // diffusion weight
        const double b = dt * kSqrt2 / (2.0 * grid.h);       // advection weight
        for (std::size_t s = 0; s < n_steps; ++s) {
            rhs[0] = left_bc;
            diag[0] = 1.0;
            upper[0] = 0.0;
            for (std::size_t i = 1; i + 1 < n; ++i) {
                lower[i] = -(a - b);
                diag[i] = 1.0 + 2.0 * a;
                upper[i] = -(a + b);
                const double ui = u[i];
                rhs[i] = ui + dt * (ui - ui * ui);
            }
            rhs[n - 1] = right_bc;
            diag[n - 1] = 1.0;
            lower[n - 1] = 0.0;
            solve_tridiagonal(lower, diag, upper, rhs);
            u.swap(rhs);
            u.front() = left_bc;
            u.back() = right_bc;
            for (std::size_t i = 0; i < n; ++i) {
                if (u[i] < -1e-12 || u[i] > 1.0 + 1e-12) {
                    throw FkppDiagnosticsError("solve_fkpp: range invariant violated");
                }
                u[i] = std::clamp(u[i], 0.0, 1.0);
            }
        }
    };

    double t_cur = 0.0;
    for (double t_next : checkpoints) {
        step_to(t_cur, t_next);
        t_cur = t_next;
        // boundary influence guard: the front must stay away from both walls
        if (std::fabs(u[n - 6] - right_ref) > 1e-3 || std::fabs(u[5] - left_ref) > 1e-3) {
            throw FkppDiagnosticsError("solve_fkpp: wave reached a grid boundary");
        }
        snapshots.push_back(u);
    }
    return FkppField(grid, initial, std::move(checkpoints), std::move(snapshots));
}

// P(M_t >= x) via the step-indicator field.
inline double u_max_tail(const FkppField& field_uM, double t, double x) {
    return field_uM.value_lab(t, x);
}

struct WaveEstimate {
    std::vector<double> profile;  // omega on the x grid below
    double x_min = -10.0;
    double x_max = 15.0;
    double h = 0.02;
    double recentering = 0.0;  // shift that would move the half level to x = 0
    double residual_norm = 0.0;

    double at(double x) const { return lerp_uniform(profile, x_min, h, x); }
};

// Residual of the traveling-wave ODE 1/2 w'' + sqrt2 w' + w - w^2 over the
// interior of the profile grid, sup norm, centered differences.
inline double wave_ode_residual(const std::vector<double>& w, double h) {
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < w.size(); ++i) {
        const double d1 = (w[i + 1] - w[i - 1]) / (2.0 * h);
        const double d2 = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h);
        worst = std::max(worst, std::fabs(0.5 * d2 + kSqrt2 * d1 + w[i] - w[i] * w[i]));
    }
    return worst;
}

// x -> u(t, m(t) + x): the front profile in Bramson's centering. In frame
// coordinates m(t) + x corresponds to y = x - 3/(2 sqrt2) log t.
inline WaveEstimate wave_profile(const FkppField& field, double t) {
    if (!(t >= 8.0)) throw std::invalid_argument("wave_profile: requires t >= 8");
    WaveEstimate est;
    est.h = field.grid().h;
    const double y_off = m_of_t(t) - kSqrt2 * t;
    const auto n = static_cast<std::size_t>(std::llround((est.x_max - est.x_min) / est.h)) + 1;
    est.profile.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = est.x_min + est.h * static_cast<double>(i);
        est.profile[i] = field.value(t, x + y_off);
    }
    est.residual_norm = wave_ode_residual(est.profile, est.h);
    // locate the half level for the recentering record
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (est.profile[i] >= 0.5 && est.profile[i + 1] < 0.5) {
            const double frac = (est.profile[i] - 0.5) / (est.profile[i] - est.profile[i + 1]);
            est.recentering = est.x_min + est.h * (static_cast<double>(i) + frac);
            break;
        }
    }
    return est;
}

struct CfEstimate {
    double value = 0.0;
    std::vector<std::pair<double, double>> per_r;  // (r, plain integral value)
    bool converged = true;
    double tail_report = 0.0;  // integrand magnitude at the quadrature cutoff
};

// C(f) = lim_r sqrt(2/pi) int_0^inf u_phi(r, y + sqrt2 r) y e^{sqrt2 y} dy,
// with phi(x) = 1 - e^{-f(-x)}; Richardson extrapolation in 1/sqrt(r) from
// the last two entries of the schedule.
inline CfEstimate estimate_Cf_from_field(const FkppField& field,
                                         const std::vector<double>& r_schedule) {
    if (r_schedule.size() < 2) throw std::invalid_argument("estimate_Cf: need >= 2 values of r");
    CfEstimate est;
    const auto& g = field.grid();
    for (double r : r_schedule) {
        const auto& row = field.at_time(r);
        // u_phi(r, y + sqrt2 r) is the frame value at coordinate y
        const auto i0 = static_cast<std::size_t>(std::llround(-g.y_min / g.h));
        std::vector<double> integrand;
        integrand.reserve(row.size() - i0);
        for (std::size_t i = i0; i < row.size(); ++i) {
            const double y = g.y_min + g.h * static_cast<double>(i);
            integrand.push_back(row[i] * y * std::exp(kSqrt2 * y));
        }
        const double val = std::sqrt(2.0 / 3.14159265358979323846) *
                           simpson_samples(integrand, g.h);
        est.per_r.emplace_back(r, val);
        est.tail_report = std::max(est.tail_report, integrand.back());
    }
    const auto [r1, v1] = est.per_r[est.per_r.size() - 2];
    const auto [r2, v2] = est.per_r[est.per_r.size() - 1];
    const double s1 = 1.0 / std::sqrt(r1), s2 = 1.0 / std::sqrt(r2);
    est.value = v2 + (v2 - v1) * s2 / (s1 - s2);
    if (std::fabs(v2 - v1) > 0.05 * std::max(std::fabs(v2), 1e-12)) est.converged = false;
    return est;
}

struct CmEstimate {
    double value = 0.0;
    double flatness = 0.0;  // max/min of the plateau over the fit window
    double t_used = 0.0;
    double fit_lo = 5.0;
    double fit_hi = 10.0;
};

// C_M from the tail law omega_M(x) ~ C_M x e^{-sqrt2 x}: plateau of
// omega(x) / (x e^{-sqrt2 x}) over the fit window.
inline CmEstimate estimate_CM_from_profile(const WaveEstimate& wave, double t,
                                           double fit_lo = 5.0, double fit_hi = 10.0) {
    CmEstimate est;
    est.t_used = t;
    est.fit_lo = fit_lo;
    est.fit_hi = fit_hi;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < wave.profile.size(); ++i) {
        const double x = wave.x_min + wave.h * static_cast<double>(i);
        if (x < fit_lo || x > fit_hi) continue;
        const double ratio = wave.profile[i] / (x * std::exp(-kSqrt2 * x));
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        sum += ratio;
        ++cnt;
    }
    if (cnt == 0) throw std::invalid_argument("estimate_CM: fit window not covered");
    est.value = sum / static_cast<double>(cnt);
    est.flatness = hi / lo;
    return est;
}

// Bramson's psi surrogate: quadrature of
//   e^{-sqrt2 X}/sqrt(2 pi (t-r)) int_0^inf u_phi(r, y+sqrt2 r) e^{sqrt2 y}
//     e^{-(y-X)^2/(2(t-r))} (1 - e^{-2y (X + 3/(2 sqrt2) log t)/(t-r)}) dy.
// The proposition's stated validity region is t >= 8r and
// X >= 8r - 3/(2 sqrt2) log t; enforcement can be relaxed for exploratory use.
inline double psi_bramson(const FkppField& field, double r, double t, double X,
                          bool enforce_validity = true) {
    if (!(t > r) || !(r > 0.0)) throw std::invalid_argument("psi: need t > r > 0");
    const double x_bound = 8.0 * r - 3.0 / (2.0 * kSqrt2) * std::log(t);
    if (enforce_validity && (t < 8.0 * r || X < x_bound)) {
        throw std::invalid_argument("psi: parameters outside the validity region");
    }
    const auto& g = field.grid();
    const auto& row = field.at_time(r);
    const double log_t = std::log(t);
    const double tr = t - r;
    const auto i0 = static_cast<std::size_t>(std::llround(-g.y_min / g.h));
    std::vector<double> integrand;
    integrand.reserve(row.size() - i0);
    for (std::size_t i = i0; i < row.size(); ++i) {
        const double y = g.y_min + g.h * static_cast<double>(i);
        const double gauss = std::exp(-(y - X) * (y - X) / (2.0 * tr));
        const double cutoff = 1.0 - std::exp(-2.0 * y * (X + 3.0 / (2.0 * kSqrt2) * log_t) / tr);
        integrand.push_back(row[i] * std::exp(kSqrt2 * y) * gauss * cutoff);
    }
    const double integral = simpson_samples(integrand, g.h);
    return std::exp(-kSqrt2 * X) / std::sqrt(2.0 * 3.14159265358979323846 * tr) * integral;
}

struct TailBandRow {
    double X = 0.0;
    double ratio = 0.0;  // u_M(t, sqrt2 t + X) t^{3/2} e^{sqrt2 X + X^2/2t} / (X + log t)
};

struct TailBandReport {
    double t = 0.0;
    std::vector<TailBandRow> rows;
    double ratio_min = 0.0;
    double ratio_max = 0.0;
    bool pass = false;  // max/min <= 10 with positive finite bounds
};

inline TailBandReport tail_bound_check(const FkppField& field_uM, double t,
                                       const std::vector<double>& X_grid) {
    TailBandReport rep;
    rep.t = t;
    const double log_t = std::log(t);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double X : X_grid) {
        if (X < -0.5 * log_t || X > std::sqrt(t)) {
            throw std::invalid_argument("tail_bound_check: X outside the lemma's range");
        }
        const double u = field_uM.value(t, X);
        const double ratio = u * std::pow(t, 1.5) *
                             std::exp(kSqrt2 * X + X * X / (2.0 * t)) / (X + log_t);
        rep.rows.push_back({X, ratio});
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    rep.ratio_min = lo;
    rep.ratio_max = hi;
    rep.pass = std::isfinite(hi) && lo > 0.0 && hi / lo <= 10.0;
    return rep;
}

}  // namespace bbmlab
