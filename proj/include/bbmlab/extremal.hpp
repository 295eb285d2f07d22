#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/math_util.hpp"
#include "bbmlab/point_config.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// Sampling of the fixed-point process: PPP skeleton with intensity
// sqrt2 e^{-sqrt2 x} dx, i.i.d. decorations attached per leader, optional
// random global shift. The decoration law is realized as the cloud seen from
// the maximum of a BBM run conditioned on an unusually high maximum, started
// from an offset inside the window [-sqrt(t)/delta, -delta sqrt(t)].

struct DecorationParams {
    double t_dec = 9.0;        // conditioned-BBM horizon
    double delta = 0.4;        // conditioning offset x = -delta sqrt(t_dec)
    double K = 2.0;            // acceptance event {x + Mbar_t >= -K}
    int max_attempts = 4000;
    double depth_cap = 10.0;   // atoms below (max - depth_cap) are dropped
    double barrier_slack = 4.0;
    double horizon_cap = 32.0;

    double offset() const { return -delta * std::sqrt(t_dec); }
    double barrier() const { return std::max(6.0, depth_cap + barrier_slack); }
};

struct RejectionBudgetError : std::runtime_error {
    RejectionBudgetError(int attempts, double rate)
        : std::runtime_error("sample_decoration: rejection budget exhausted after " +
                             std::to_string(attempts) + " attempts (acceptance ~" +
                             std::to_string(rate) + ")"),
          attempts_used(attempts), observed_acceptance(rate) {}
    int attempts_used;
    double observed_acceptance;
};

struct DecorationSample {
    PointConfig config;      // atoms <= 0, max atom exactly 0
    double source_t = 0.0;
    double source_x = 0.0;
    double conditioned_max = 0.0;  // x + Mbar_t of the accepted run
    double acceptance_rate = 1.0;
    int attempts = 1;
};

inline DecorationSample sample_decoration(const DecorationParams& p, std::uint64_t seed) {
    if (!(p.t_dec >= 9.0)) {
        throw std::invalid_argument("sample_decoration: t_dec must be >= 9");
    }
    if (!(p.delta > 0.0 && p.delta < 1.0)) {
        throw std::invalid_argument("sample_decoration: delta must lie in (0,1)");
    }
    const double x = p.offset();
    BbmParams run;
    run.t = p.t_dec;
    run.drift_on = true;
    run.barrier_depth = p.barrier();
    run.horizon_cap = p.horizon_cap;
    run.allow_long = p.t_dec > 16.0;

    Rng attempt_seeds = Rng::from_stream(seed, 0xdec0u);
    for (int attempt = 1; attempt <= p.max_attempts; ++attempt) {
        const BbmSummary s = evolve_single(x, run, attempt_seeds.next());
        if (s.max_shifted >= -p.K) {
            // keep the cloud within depth_cap of its own maximum
            std::vector<double> atoms;
            atoms.reserve(s.decoration.size());
            for (double d : s.decoration.atoms) {
                if (d >= -p.depth_cap) atoms.push_back(d);
            }
            DecorationSample out;
            out.config = PointConfig::from_atoms(std::move(atoms), -p.depth_cap);
            out.source_t = p.t_dec;
            out.source_x = x;
            out.conditioned_max = s.max_shifted;
            out.attempts = attempt;
            out.acceptance_rate = 1.0 / static_cast<double>(attempt);
            return out;
        }
    }
    throw RejectionBudgetError(p.max_attempts, 1.0 / static_cast<double>(p.max_attempts));
}

// Pre-generated decoration bank. Sampling thousands of configurations with a
// fresh conditioned BBM per leader is far beyond desk scale, so callers draw
// i.i.d. indices from this pool instead. Two disjoint halves are exposed so
// the two arms of a comparison never share an entry.
class DecorationPool {
  public:
    static DecorationPool build(const DecorationParams& p, std::size_t n,
                                std::uint64_t seed) {
        if (n < 2) throw std::invalid_argument("DecorationPool: need at least 2 entries");
        DecorationPool pool;
        pool.params_ = p;
        pool.entries_.reserve(n);
        long long attempts = 0;
        for (std::size_t i = 0; i < n; ++i) {
            DecorationSample s = sample_decoration(p, mix_seed(seed, i));
            attempts += s.attempts;
            pool.entries_.push_back(std::move(s.config));
        }
        pool.mean_acceptance_ =
            static_cast<double>(n) / static_cast<double>(attempts);
        return pool;
    }

    const PointConfig& draw(Rng& rng, int half = -1) const {
        const std::size_t n = entries_.size();
        if (half < 0) return entries_[rng.next() % n];
        const std::size_t h = n / 2;
        const std::size_t base = half == 0 ? 0 : h;
        const std::size_t span = half == 0 ? h : n - h;
        return entries_[base + rng.next() % span];
    }

    const std::vector<PointConfig>& entries() const { return entries_; }
    double mean_acceptance() const { return mean_acceptance_; }
    const DecorationParams& params() const { return params_; }

  private:
    std::vector<PointConfig> entries_;
    DecorationParams params_;
    double mean_acceptance_ = 1.0;
};

struct BarEParams {
    double window_floor = -8.0;  // L: nominal PPP truncation level
    double direct_floor = -8.0;  // leaders/atoms realized above max(L, this)
    DecorationParams dec;
    int pool_half = -1;
};

struct FixedPointSample {
    PointConfig config;
    double shift_S = 0.0;
    std::uint64_t skeleton_count = 0;  // leaders enumerated in the direct window
    double window_floor = 0.0;         // L
    double direct_floor = 0.0;         // atoms realized above this level
};

// bar E_infty := sum_{i,j} delta_{p_i + D^i_j} truncated at the direct floor.
// Leaders come top-down from the order-statistics representation of the PPP:
// Gamma_k a unit-rate Poisson process, p_k = -log(Gamma_k)/sqrt2. When pool
// is null every leader gets a fresh conditioned-BBM decoration.
inline FixedPointSample sample_bar_e(const BarEParams& p, const DecorationPool* pool,
                                     std::uint64_t seed) {
    if (!(p.window_floor <= 0.0)) {
        throw std::invalid_argument("sample_bar_e: window floor must be negative");
    }
    const double floor = std::max(p.window_floor, p.direct_floor);
    Rng leader_rng = Rng::from_stream(seed, 0x1eadu);
    Rng pool_rng = Rng::from_stream(seed, 0xd4a1u);

    std::vector<double> atoms;
    std::uint64_t n_leaders = 0;
    double gamma = 0.0;
    for (;;) {
        gamma += leader_rng.exponential();
        const double leader = -std::log(gamma) / kSqrt2;
        if (leader < floor) break;
        ++n_leaders;
        const PointConfig* dec = nullptr;
        DecorationSample fresh;
        if (pool) {
            dec = &pool->draw(pool_rng, p.pool_half);
        } else {
            try {
                fresh = sample_decoration(p.dec, mix_seed(seed, 0x5000u + n_leaders));
            } catch (const RejectionBudgetError& e) {
                throw std::runtime_error("sample_bar_e: leader " + std::to_string(n_leaders) +
                                         ": " + e.what());
            }
            dec = &fresh.config;
        }
        const double need = floor - leader;  // keep decoration atoms >= need
        for (double d : dec->atoms) {
            if (d < need) break;  // decoration atoms sorted descending
            atoms.push_back(leader + d);
        }
    }

    FixedPointSample out;
    out.config = PointConfig::from_atoms(std::move(atoms), floor);
    out.skeleton_count = n_leaders;
    out.window_floor = p.window_floor;
    out.direct_floor = floor;
    return out;
}

struct ShiftLaw {
    enum class Kind { point, gaussian, exponential };
    Kind kind = Kind::point;
    double a = 0.0;  // point: s; gaussian: mu; exponential: rate
    double b = 1.0;  // gaussian: sigma

    static ShiftLaw point(double s) { return {Kind::point, s, 0.0}; }
    static ShiftLaw gaussian(double mu, double sigma) { return {Kind::gaussian, mu, sigma}; }
    static ShiftLaw exponential(double rate) { return {Kind::exponential, rate, 0.0}; }
};

inline FixedPointSample apply_random_shift(const FixedPointSample& sample,
                                           const ShiftLaw& law, std::uint64_t seed) {
    double s = 0.0;
    Rng rng = Rng::from_stream(seed, 0x5417u);
    switch (law.kind) {
        case ShiftLaw::Kind::point: s = law.a; break;
        case ShiftLaw::Kind::gaussian: s = rng.normal(law.a, law.b); break;
        case ShiftLaw::Kind::exponential:
            if (!(law.a > 0.0)) throw std::invalid_argument("shift law: rate must be positive");
            s = rng.exponential(law.a);
            break;
    }
    FixedPointSample out;
    out.config = shift(sample.config, s);
    out.shift_S = sample.shift_S + s;
    out.skeleton_count = sample.skeleton_count;
    out.window_floor = sample.window_floor + s;
    out.direct_floor = sample.direct_floor + s;
    return out;
}

// Aggregate of the leader band [L, D0) that is far too dense to enumerate:
// for the m_{3/2} statistic the band total is a compound-Poisson sum of
// per-leader scores s(p) = sum_j e^{-beta |p + D_j|^{3/2}}, so its first two
// moments follow from pool averages of s and s^2 against the PPP intensity,
// and the total concentrates around the mean (relative noise ~ 1/sqrt(count)).
struct DeepBandMoments {
    double mean = 0.0;
    double var = 0.0;
};

inline DeepBandMoments m32_deep_band(double band_lo, double band_hi, double beta,
                                     const DecorationPool& pool,
                                     std::size_t grid_cells = 48) {
    if (band_hi <= band_lo) return {};
    DeepBandMoments out;
    const auto& entries = pool.entries();
    auto pooled_moments = [&](double p) {
        double s1 = 0.0, s2 = 0.0;
        for (const auto& dec : entries) {
            double s = 0.0;
            for (double d : dec.atoms) {
                const double ax = std::fabs(p + d);
                s += std::exp(-beta * ax * std::sqrt(ax));
            }
            s1 += s;
            s2 += s * s;
        }
        const auto n = static_cast<double>(entries.size());
        return std::pair<double, double>{s1 / n, s2 / n};
    };
    if (grid_cells % 2 != 0) ++grid_cells;
    const double h = (band_hi - band_lo) / static_cast<double>(grid_cells);
    for (std::size_t i = 0; i <= grid_cells; ++i) {
        const double p = band_lo + h * static_cast<double>(i);
        const double w = (i == 0 || i == grid_cells) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const auto [s1, s2] = pooled_moments(p);
        const double intensity = kSqrt2 * std::exp(-kSqrt2 * p);
        out.mean += w * intensity * s1;
        out.var += w * intensity * s2;
    }
    out.mean *= h / 3.0;
    out.var *= h / 3.0;
    return out;
}

// m_{3/2} statistic of a sample including the unenumerated deep band
// [window_floor, direct_floor), drawn as a Gaussian with the band moments.
inline double m32_with_deep_band(const FixedPointSample& sample, double beta,
                                 const DecorationPool& pool, std::uint64_t seed) {
    double score = m32_score(sample.config, beta);
    if (sample.window_floor < sample.direct_floor) {
        const DeepBandMoments band =
            m32_deep_band(sample.window_floor, sample.direct_floor, beta, pool);
        Rng rng = Rng::from_stream(seed, 0xba2du);
        score += band.mean + std::sqrt(std::max(band.var, 0.0)) * rng.normal();
    }
    return score;
}

}  // namespace bbmlab
