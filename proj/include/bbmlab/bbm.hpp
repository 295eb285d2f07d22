#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bbmlab/math_util.hpp"
#include "bbmlab/point_config.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

struct HorizonError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Event-driven binary BBM: per-particle exponential branch clocks at rate 1,
// exact Gaussian increments between events (no time discretization), global
// synchronization only at pruning sweeps and at the final time. Positions are
// kept in the drift-adjusted frame (chi - sqrt(2) t) when drift_on is set.
struct BbmParams {
    double t = 1.0;
    bool drift_on = true;
    double barrier_depth = 10.0;  // prune below (running max - barrier_depth)
    double sweep_dt = 0.25;
    double horizon_cap = 16.0;
    bool allow_long = false;  // explicit override of the horizon cap
};

struct BbmSummary {
    double max_shifted = 0.0;        // M_t - sqrt(2) t with drift on, M_t otherwise
    std::uint64_t count = 0;         // n(t) among survivors
    double derivative_martingale = 0.0;  // Z_t
    PointConfig decoration;          // atoms chi_k(t) - M_t, max atom exactly 0
    std::uint64_t pruned_count = 0;
    double pruned_z_bound = 0.0;     // bound on Z contributions lost to pruning
    bool all_pruned = false;
};

namespace detail {

struct Particle {
    double pos;
    double clock;  // absolute time of next branch event
};

class ParticleSystem {
  public:
    ParticleSystem(double start, const BbmParams& p, Rng rng)
        : params_(p), rng_(std::move(rng)), drift_(p.drift_on ? -kSqrt2 : 0.0) {
        particles_.push_back({start, rng_.exponential()});
        validate(p);
    }

    static void validate(const BbmParams& p) {
        if (!(p.t > 0.0)) throw std::invalid_argument("bbm: time must be positive");
        if (!(p.barrier_depth >= 6.0)) {
            throw std::invalid_argument("bbm: barrier depth must be >= 6");
        }
        if (p.t > p.horizon_cap && !p.allow_long) {
            throw HorizonError("bbm: horizon exceeds cap; pass the long-run override");
        }
    }

    void run() {
        double now = 0.0;
        while (now < params_.t) {
            const double sweep_end =
                (std::floor(now / params_.sweep_dt) + 1.0) * params_.sweep_dt;
            const double seg_end = std::min(params_.t, sweep_end);
            advance_all(now, seg_end);
            now = seg_end;
            if (now < params_.t) prune();
        }
        prune();
    }

    const std::vector<Particle>& particles() const { return particles_; }
    std::uint64_t pruned_count() const { return pruned_count_; }
    double pruned_z_bound() const { return pruned_z_bound_; }
    double time() const { return params_.t; }

  private:
    void advance_all(double t_a, double t_b) {
        // Children appended during the loop start at their birth time and are
        // advanced by the same pass, so iterate by index.
        birth_time_.assign(particles_.size(), t_a);
        for (std::size_t i = 0; i < particles_.size(); ++i) {
            double cur = birth_time_[i];
            Particle p = particles_[i];  // copy: push_back below may reallocate
            while (p.clock <= t_b) {
                diffuse(p, p.clock - cur);
                cur = p.clock;
                p.clock = cur + rng_.exponential();
                birth_time_.push_back(cur);
                particles_.push_back({p.pos, cur + rng_.exponential()});
            }
            diffuse(p, t_b - cur);
            particles_[i] = p;
        }
    }

    void diffuse(Particle& p, double dt) {
        if (dt <= 0.0) return;
        p.pos += drift_ * dt + std::sqrt(dt) * rng_.normal();
    }

    void prune() {
        double top = -std::numeric_limits<double>::infinity();
        for (const auto& p : particles_) top = std::max(top, p.pos);
        const double cut = top - params_.barrier_depth;
        auto keep = std::remove_if(particles_.begin(), particles_.end(),
                                   [&](const Particle& p) {
                                       if (p.pos >= cut) return false;
                                       ++pruned_count_;
                                       const double depth = top - p.pos;
                                       pruned_z_bound_ += depth * std::exp(-kSqrt2 * depth);
                                       return true;
                                   });
        particles_.erase(keep, particles_.end());
    }

    BbmParams params_;
    Rng rng_;
    double drift_;
    std::vector<Particle> particles_;
    std::vector<double> birth_time_;
    std::uint64_t pruned_count_ = 0;
    double pruned_z_bound_ = 0.0;
};

}  // namespace detail

inline BbmSummary evolve_single(double start, const BbmParams& params, std::uint64_t seed) {
    detail::ParticleSystem sys(start, params, Rng::from_stream(seed, 0xbb31u));
    sys.run();
    const auto& ps = sys.particles();

    BbmSummary s;
    s.count = ps.size();
    s.pruned_count = sys.pruned_count();
    s.all_pruned = ps.empty();
    if (ps.empty()) return s;

    double top = -std::numeric_limits<double>::infinity();
    for (const auto& p : ps) top = std::max(top, p.pos);
    s.max_shifted = top;

    // Z_t = sum (sqrt2 t - chi) exp(-sqrt2 (sqrt2 t - chi)). In the drifted
    // frame sqrt2 t - chi = -pos; without drift chi = pos directly.
    double z = 0.0;
    std::vector<double> dec;
    dec.reserve(ps.size());
    for (const auto& p : ps) {
        const double gap = params.drift_on ? -p.pos : kSqrt2 * params.t - p.pos;
        z += gap * std::exp(-kSqrt2 * gap);
        dec.push_back(p.pos - top);
    }
    s.derivative_martingale = z;
    s.pruned_z_bound = sys.pruned_z_bound();
    std::optional<double> dec_floor;
    if (std::isfinite(params.barrier_depth)) dec_floor = -params.barrier_depth;
    s.decoration = PointConfig::from_atoms(std::move(dec), dec_floor);
    return s;
}

struct EvolveOptions {
    BbmParams bbm;
    // Atoms of the evolved configuration below keep_above are dropped (and
    // the floor recorded); -inf keeps everything.
    double keep_above = -std::numeric_limits<double>::infinity();
};

// theta_t = sum_i sum_k delta_{x_i + chi^i_k(t) - sqrt(2) t}: one independent
// BBM per initial atom, seed stream split by atom index.
inline PointConfig evolve_config(const PointConfig& initial, const EvolveOptions& opts,
                                 std::uint64_t seed) {
    if (initial.empty()) throw std::invalid_argument("evolve_config: empty initial configuration");
    BbmParams params = opts.bbm;
    params.drift_on = true;
    detail::ParticleSystem::validate(params);

    std::vector<double> atoms;
    std::uint64_t idx = 0;
    for (double x : initial.atoms) {
        detail::ParticleSystem sys(0.0, params, Rng::from_stream(seed, 0xc0de0000u + idx));
        sys.run();
        for (const auto& p : sys.particles()) {
            const double pos = x + p.pos;
            if (pos >= opts.keep_above) atoms.push_back(pos);
        }
        ++idx;
    }
    std::optional<double> floor;
    if (std::isfinite(opts.keep_above)) floor = opts.keep_above;
    if (initial.truncation_floor) {
        floor = floor ? std::max(*floor, *initial.truncation_floor) : initial.truncation_floor;
    }
    return PointConfig::from_atoms(std::move(atoms), floor);
}

// E_t = sum delta_{chi_k(t) - m(t)}: drift-off run recentered by m(t).
inline PointConfig extremal_snapshot(double t, const BbmParams& base, std::uint64_t seed) {
    if (!(t >= 1.0)) throw std::invalid_argument("extremal_snapshot: requires t >= 1");
    BbmParams params = base;
    params.t = t;
    params.drift_on = false;
    detail::ParticleSystem sys(0.0, params, Rng::from_stream(seed, 0xe5a9u));
    sys.run();
    const double m = m_of_t(t);
    std::vector<double> atoms;
    atoms.reserve(sys.particles().size());
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& p : sys.particles()) top = std::max(top, p.pos);
    for (const auto& p : sys.particles()) atoms.push_back(p.pos - m);
    std::optional<double> floor;
    if (std::isfinite(params.barrier_depth)) floor = top - params.barrier_depth - m;
    return PointConfig::from_atoms(std::move(atoms), floor);
}

}  // namespace bbmlab
