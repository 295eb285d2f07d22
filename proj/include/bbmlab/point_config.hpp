#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbmlab/math_util.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// Finite truncated stand-in for a locally finite configuration on R.
// Atoms are kept sorted non-increasing; multiplicities by repetition.
// truncation_floor records the level below which atoms were deliberately
// discarded at construction (nullopt when nothing was discarded).
struct PointConfig {
    std::vector<double> atoms;
    std::optional<double> truncation_floor;

    PointConfig() = default;

    static PointConfig from_atoms(std::vector<double> xs,
                                  std::optional<double> floor = std::nullopt) {
        for (double x : xs) {
            if (!std::isfinite(x)) throw std::invalid_argument("PointConfig: non-finite atom");
        }
        std::sort(xs.begin(), xs.end(), std::greater<double>());
        if (floor && !xs.empty() && xs.back() < *floor) {
            throw std::invalid_argument("PointConfig: atom below truncation floor");
        }
        PointConfig c;
        c.atoms = std::move(xs);
        c.truncation_floor = floor;
        return c;
    }

    bool empty() const { return atoms.empty(); }
    std::size_t size() const { return atoms.size(); }

    double max_atom() const {
        if (atoms.empty()) throw std::logic_error("PointConfig: max of empty configuration");
        return atoms.front();
    }
};

// Test function f(x) = sum_k c_k 1_{x > b_k} with all c_k > 0.
struct StepFunction {
    struct Step {
        double weight;
        double threshold;
    };
    std::vector<Step> steps;

    StepFunction() = default;
    explicit StepFunction(std::vector<Step> s) : steps(std::move(s)) { validate(); }

    static StepFunction single(double weight, double threshold) {
        return StepFunction({{weight, threshold}});
    }

    void validate() const {
        if (steps.empty()) throw std::invalid_argument("StepFunction: no steps");
        for (const auto& s : steps) {
            if (!(s.weight > 0.0) || !std::isfinite(s.weight) || !std::isfinite(s.threshold)) {
                throw std::invalid_argument("StepFunction: weights must be positive and finite");
            }
        }
    }

    // -K_f: f vanishes at and below this level.
    double support_floor() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& s : steps) m = std::min(m, s.threshold);
        return m;
    }

    double operator()(double x) const {
        double v = 0.0;
        for (const auto& s : steps) {
            if (x > s.threshold) v += s.weight;
        }
        return v;
    }

    StepFunction with_shifted_thresholds(double d) const {
        StepFunction g = *this;
        for (auto& s : g.steps) s.threshold += d;
        return g;
    }
};

// <f, theta> for a truncated configuration: strict inequality x > b_k
// exactly as in the step-function class.
inline double integrate(const PointConfig& config, const StepFunction& f) {
    double acc = 0.0;
    // atoms sorted descending: for each step, count atoms above the threshold.
    for (const auto& s : f.steps) {
        const auto it = std::partition_point(config.atoms.begin(), config.atoms.end(),
                                             [&](double x) { return x > s.threshold; });
        acc += s.weight * static_cast<double>(it - config.atoms.begin());
    }
    return acc;
}

inline PointConfig shift(const PointConfig& config, double u) {
    if (!std::isfinite(u)) throw std::invalid_argument("shift: non-finite offset");
    PointConfig out = config;
    for (double& x : out.atoms) x += u;
    if (out.truncation_floor) *out.truncation_floor += u;
    return out;
}

inline PointConfig superpose(const PointConfig& a, const PointConfig& b) {
    PointConfig out;
    out.atoms.resize(a.atoms.size() + b.atoms.size());
    std::merge(a.atoms.begin(), a.atoms.end(), b.atoms.begin(), b.atoms.end(),
               out.atoms.begin(), std::greater<double>());
    if (a.truncation_floor && b.truncation_floor) {
        out.truncation_floor = std::max(*a.truncation_floor, *b.truncation_floor);
    } else if (a.truncation_floor) {
        out.truncation_floor = a.truncation_floor;
    } else if (b.truncation_floor) {
        out.truncation_floor = b.truncation_floor;
    }
    return out;
}

// Number of atoms in the closed interval [lo, hi].
inline std::size_t count(const PointConfig& config, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("count: interval endpoints out of order");
    const auto& a = config.atoms;  // descending
    const auto first = std::partition_point(a.begin(), a.end(),
                                            [&](double x) { return x > hi; });
    const auto last = std::partition_point(first, a.end(),
                                           [&](double x) { return x >= lo; });
    return static_cast<std::size_t>(last - first);
}

// sum over atoms of exp(-beta |x|^{3/2}); the M_{3/2} membership statistic.
inline double m32_score(const PointConfig& config, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("m32_score: beta must lie in (0,1)");
    }
    double acc = 0.0;
    for (double x : config.atoms) {
        const double ax = std::fabs(x);
        acc += std::exp(-beta * ax * std::sqrt(ax));
    }
    return acc;
}

// Reference intensities on a bounded window, with closed-form mass.
struct IntensityDescriptor {
    enum class Kind { exponential, uniform, lattice };
    Kind kind = Kind::uniform;
    double lambda = 0.0;   // exponential: scale * exp(-lambda x)
    double scale = 0.0;
    double level = 0.0;    // uniform
    double spacing = 0.0;  // lattice: atoms at integer multiples of spacing
    double window_lo = 0.0;
    double window_hi = 0.0;

    static IntensityDescriptor exponential_intensity(double lambda, double scale,
                                                     double lo, double hi) {
        if (!(lambda > 0.0) || !(scale > 0.0)) {
            throw std::invalid_argument("exponential intensity: parameters must be positive");
        }
        IntensityDescriptor d;
        d.kind = Kind::exponential;
        d.lambda = lambda;
        d.scale = scale;
        d.set_window(lo, hi);
        return d;
    }

    static IntensityDescriptor uniform_intensity(double level, double lo, double hi) {
        if (!(level > 0.0)) throw std::invalid_argument("uniform intensity: level must be positive");
        IntensityDescriptor d;
        d.kind = Kind::uniform;
        d.level = level;
        d.set_window(lo, hi);
        return d;
    }

    static IntensityDescriptor lattice_intensity(double spacing, double lo, double hi) {
        if (!(spacing > 0.0)) throw std::invalid_argument("lattice intensity: spacing must be positive");
        IntensityDescriptor d;
        d.kind = Kind::lattice;
        d.spacing = spacing;
        d.set_window(lo, hi);
        return d;
    }

    void set_window(double lo, double hi) {
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
            throw std::invalid_argument("intensity window must be bounded with lo < hi");
        }
        window_lo = lo;
        window_hi = hi;
    }

    double mass() const {
        switch (kind) {
            case Kind::exponential:
                return scale / lambda *
                       (std::exp(-lambda * window_lo) - std::exp(-lambda * window_hi));
            case Kind::uniform:
                return level * (window_hi - window_lo);
            case Kind::lattice: {
                const double k_lo = std::ceil(window_lo / spacing - 1e-12);
                const double k_hi = std::floor(window_hi / spacing + 1e-12);
                return k_hi >= k_lo ? k_hi - k_lo + 1.0 : 0.0;
            }
        }
        return 0.0;
    }
};

// Poisson point process on the descriptor's window. The lattice kind is a
// deterministic sum of delta masses and ignores the seed.
inline PointConfig sample_ppp(const IntensityDescriptor& intensity, std::uint64_t seed) {
    std::vector<double> atoms;
    if (intensity.kind == IntensityDescriptor::Kind::lattice) {
        const double k_lo = std::ceil(intensity.window_lo / intensity.spacing - 1e-12);
        const double k_hi = std::floor(intensity.window_hi / intensity.spacing + 1e-12);
        for (double k = k_lo; k <= k_hi; k += 1.0) atoms.push_back(k * intensity.spacing);
        return PointConfig::from_atoms(std::move(atoms), intensity.window_lo);
    }
    Rng rng = Rng::from_stream(seed, 0x9e37u);
    const double mass = intensity.mass();
    const std::uint64_t n = mass > 0.0 ? rng.poisson(mass) : 0;
    atoms.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const double u = rng.u01();
        if (intensity.kind == IntensityDescriptor::Kind::uniform) {
            atoms.push_back(intensity.window_lo + u * (intensity.window_hi - intensity.window_lo));
        } else {
            // inverse CDF of the normalized exponential intensity on the window
            const double ea = std::exp(-intensity.lambda * intensity.window_lo);
            const double eb = std::exp(-intensity.lambda * intensity.window_hi);
            atoms.push_back(-std::log(ea - u * (ea - eb)) / intensity.lambda);
        }
    }
    return PointConfig::from_atoms(std::move(atoms), intensity.window_lo);
}

}  // namespace bbmlab
