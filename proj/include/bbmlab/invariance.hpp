#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/math_util.hpp"
#include "bbmlab/parallel.hpp"
#include "bbmlab/point_config.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

struct McEstimate {
    std::uint64_t replicas = 0;
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t seed_base = 0;
};

inline McEstimate mc_from_samples(const std::vector<double>& xs, std::uint64_t seed_base) {
    McEstimate e;
    e.replicas = xs.size();
    e.seed_base = seed_base;
    if (xs.empty()) return e;
    double sum = 0.0;
    for (double x : xs) sum += x;
    e.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - e.mean) * (x - e.mean);
    if (xs.size() > 1) {
        e.std_error = std::sqrt(ss / (static_cast<double>(xs.size()) *
                                      static_cast<double>(xs.size() - 1)));
    }
    return e;
}

using ConfigSampler = std::function<PointConfig(std::uint64_t seed)>;

// Monte Carlo estimate of the Laplace functional Psi(f) = E[exp(-<f, theta>)].
inline McEstimate laplace_estimate(const ConfigSampler& sampler, const StepFunction& f,
                                   std::uint64_t n, std::uint64_t seed) {
    if (n < 100) throw std::invalid_argument("laplace_estimate: need N >= 100");
    std::vector<double> xs(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const PointConfig c = sampler(mix_seed(seed, i));
        xs[i] = std::exp(-integrate(c, f));
    }
    return mc_from_samples(xs, seed);
}

struct InvarianceRecord {
    std::string f_id;
    McEstimate laplace_t0;
    McEstimate laplace_t;
    double z_score = 0.0;
    bool pass = false;
};

struct InvarianceReport {
    double t = 0.0;
    std::uint64_t replicas = 0;
    double z_threshold = 3.0;
    std::vector<InvarianceRecord> per_function;
    double pass_fraction = 0.0;
};

// z score conventions. Laplace means below 1e-12 cannot be told apart from
// zero by any Monte Carlo of feasible size (and e^{-<f,theta>} underflows
// outright once <f,theta> > 745), so a probe whose means are both at that
// level carries no information: z = 0. Zero spread with genuinely different
// means is a hard fail.
inline double z_score_of(const McEstimate& a, const McEstimate& b) {
    if (a.mean < 1e-12 && b.mean < 1e-12) return 0.0;
    const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    const double diff = a.mean - b.mean;
    if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / se;
}

// Tests Eq.-level invariance E[e^{-<f,theta>}] = E[e^{-<f,theta_t>}] over a
// bank of step functions. Fresh independent samples for the two arms; each
// sample is evaluated on the whole bank (bank-wide reuse of a replica only
// correlates records across functions, not the two arms of any one record).
// The two arms may use distinct samplers of the same law, e.g. disjoint
// decoration-pool halves.
inline InvarianceReport invariance_test_two(const ConfigSampler& sampler_t0,
                                            const ConfigSampler& sampler_evolved,
                                            double t, const std::vector<StepFunction>& bank,
                                            std::uint64_t n, std::uint64_t seed,
                                            const EvolveOptions& evolve_opts,
                                            double z_threshold = 3.0, unsigned threads = 1) {
    if (bank.empty()) throw std::invalid_argument("invariance_test: empty bank");
    for (const auto& f : bank) {
        if (f.support_floor() < -5.0) {
            throw std::invalid_argument(
                "invariance_test: bank support floors must be >= -5 for the samplers' "
                "truncation budgets to apply");
        }
    }
    const std::size_t m = bank.size();
    std::vector<std::vector<double>> vals0(m, std::vector<double>(n));
    std::vector<std::vector<double>> valsT(m, std::vector<double>(n));

    parallel_for_index(n, threads, [&](std::uint64_t i) {
        const PointConfig c0 = sampler_t0(mix_seed(seed, 2 * i));
        for (std::size_t k = 0; k < m; ++k) vals0[k][i] = std::exp(-integrate(c0, bank[k]));
        if (t > 0.0) {
            const PointConfig c = sampler_evolved(mix_seed(seed, 2 * i + 1));
            const PointConfig ct = evolve_config(c, evolve_opts, mix_seed(seed ^ 0xf10au, i));
            for (std::size_t k = 0; k < m; ++k) valsT[k][i] = std::exp(-integrate(ct, bank[k]));
        } else {
            // t = 0 is the degenerate identity: matched seeds, so a
            // single-sampler call reproduces the t0 arm exactly.
            const PointConfig c = sampler_evolved(mix_seed(seed, 2 * i));
            for (std::size_t k = 0; k < m; ++k) valsT[k][i] = std::exp(-integrate(c, bank[k]));
        }
    });

    InvarianceReport rep;
    rep.t = t;
    rep.replicas = n;
    rep.z_threshold = z_threshold;
    std::size_t passed = 0;
    for (std::size_t k = 0; k < m; ++k) {
        InvarianceRecord rec;
        rec.f_id = "f" + std::to_string(k);
        rec.laplace_t0 = mc_from_samples(vals0[k], seed);
        rec.laplace_t = mc_from_samples(valsT[k], seed ^ 0xf10au);
        rec.z_score = z_score_of(rec.laplace_t0, rec.laplace_t);
        rec.pass = std::fabs(rec.z_score) <= z_threshold;
        passed += rec.pass ? 1 : 0;
        rep.per_function.push_back(std::move(rec));
    }
    rep.pass_fraction = static_cast<double>(passed) / static_cast<double>(m);
    return rep;
}

inline InvarianceReport invariance_test(const ConfigSampler& sampler, double t,
                                        const std::vector<StepFunction>& bank,
                                        std::uint64_t n, std::uint64_t seed,
                                        const EvolveOptions& evolve_opts,
                                        double z_threshold = 3.0, unsigned threads = 1) {
    return invariance_test_two(sampler, sampler, t, bank, n, seed, evolve_opts, z_threshold,
                               threads);
}

struct ZThetaResult {
    double value = 0.0;
    bool out_of_grid_flag = false;  // some atoms used the tail surrogate
};

// Z_t^theta = (1/C_M) int_{-inf}^0 P(x + M_t >= sqrt2 t) theta(dx). Atoms
// below the PDE grid contribute through a tail surrogate of sharp-bound shape
// matched continuously at the grid edge.
inline ZThetaResult z_theta(const PointConfig& config, double t, const FkppField& field_uM,
                            double cm_hat) {
    if (!(cm_hat > 0.0)) throw std::invalid_argument("z_theta: need a positive C_M estimate");
    const double y_edge = field_uM.grid().y_max - 1.0;
    const double log_t = std::log(t);
    auto tail_shape = [&](double X) {
        return (X + log_t) * std::pow(t, -1.5) * std::exp(-kSqrt2 * X - X * X / (2.0 * t));
    };
    const double edge_ratio = field_uM.value(t, y_edge) / tail_shape(y_edge);
    ZThetaResult out;
    double acc = 0.0;
    for (double x : config.atoms) {
        if (x > 0.0) continue;
        const double y = -x;  // u_M(t, sqrt2 t - x) at frame coordinate -x
        if (y <= y_edge) {
            acc += field_uM.value(t, y);
        } else {
            acc += edge_ratio * tail_shape(y);
            out.out_of_grid_flag = true;
        }
    }
    out.value = acc / cm_hat;
    return out;
}

enum class BasinFamily { lattice, uniform_ppp, exp_ppp };

struct DecayRow {
    double t = 0.0;
    McEstimate window_count;
};

struct DecayTable {
    BasinFamily family;
    double window_lo = 0.0, window_hi = 0.0;
    std::vector<DecayRow> rows;
};

// Window-count decay along the flow for the basin-of-attraction examples.
// Initial configurations are truncated at a depth where discarded atoms'
// descendants cannot reach the window by the largest requested time.
inline DecayTable basin_run(BasinFamily family, double exp_lambda,
                            const std::vector<double>& t_grid, double window_lo,
                            double window_hi, std::uint64_t n, std::uint64_t seed,
                            const BbmParams& engine) {
    if (window_lo > window_hi) throw std::invalid_argument("basin_run: bad window");
    double t_max = 0.0;
    for (double t : t_grid) t_max = std::max(t_max, t);
    const double floor = window_lo - 4.0 * std::sqrt(std::max(t_max, 1.0)) - 4.0;

    auto make_initial = [&](std::uint64_t s) {
        switch (family) {
            case BasinFamily::lattice:
                return sample_ppp(IntensityDescriptor::lattice_intensity(1.0, floor, 0.0), s);
            case BasinFamily::uniform_ppp:
                return sample_ppp(IntensityDescriptor::uniform_intensity(1.0, floor, 0.0), s);
            case BasinFamily::exp_ppp:
                if (!(exp_lambda > 0.0 && exp_lambda <= kSqrt2 + 1e-12)) {
                    throw std::invalid_argument("basin_run: exp family needs lambda in (0, sqrt2]");
                }
                return sample_ppp(
                    IntensityDescriptor::exponential_intensity(exp_lambda, 1.0, floor, 0.0), s);
        }
        throw std::logic_error("basin_run: unknown family");
    };

    DecayTable table;
    table.family = family;
    table.window_lo = window_lo;
    table.window_hi = window_hi;
    for (double t : t_grid) {
        std::vector<double> counts(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            const std::uint64_t s = mix_seed(seed, 1000003ULL * i + static_cast<std::uint64_t>(t * 64.0));
            const PointConfig c0 = make_initial(s);
            if (t == 0.0) {
                counts[i] = static_cast<double>(count(c0, window_lo, window_hi));
                continue;
            }
            EvolveOptions opts;
            opts.bbm = engine;
            opts.bbm.t = t;
            opts.keep_above = window_lo - 1.0;
            const PointConfig ct = evolve_config(c0, opts, mix_seed(s, 7));
            counts[i] = static_cast<double>(count(ct, window_lo, window_hi));
        }
        DecayRow row;
        row.t = t;
        row.window_count = mc_from_samples(counts, seed);
        table.rows.push_back(row);
    }
    return table;
}

struct ConcentrationReport {
    double bound = 0.0;                    // Chebyshev: 1/(eps^2 sum p_i)
    double empirical_violation_rate = 0.0;
    std::uint64_t replicas = 0;
};

// Chebyshev bound for sums of independent Bernoullis plus a direct simulation
// of the violation rate P(|X - E X| >= eps E X).
inline ConcentrationReport bernoulli_concentration(const std::vector<double>& p_list,
                                                   double eps, std::uint64_t n,
                                                   std::uint64_t seed) {
    if (!(eps > 0.0 && eps < 1.0 + 1e-12)) {
        throw std::invalid_argument("bernoulli_concentration: eps must lie in (0,1]");
    }
    double mean = 0.0;
    for (double p : p_list) {
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("bernoulli_concentration: bad p");
        mean += p;
    }
    if (!(mean > 0.0)) {
        throw std::invalid_argument("bernoulli_concentration: sum of p must be positive");
    }
    ConcentrationReport rep;
    rep.bound = 1.0 / (eps * eps * mean);
    rep.replicas = n;
    Rng rng = Rng::from_stream(seed, 0xbe27u);
    std::uint64_t violations = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        double x = 0.0;
        for (double p : p_list) {
            if (rng.u01() <= p) x += 1.0;
        }
        if (std::fabs(x - mean) >= eps * mean) ++violations;
    }
    rep.empirical_violation_rate = static_cast<double>(violations) / static_cast<double>(n);
    return rep;
}

// The default 20-function probe bank: single steps spanning thresholds
// -4..4 at two weights plus two genuinely multi-step functions.
inline std::vector<StepFunction> default_bank() {
    std::vector<StepFunction> bank;
    for (double b = -4.0; b <= 4.0; b += 1.0) {
        bank.push_back(StepFunction::single(0.25, b));
        bank.push_back(StepFunction::single(1.0, b));
    }
    bank.push_back(StepFunction({{1.0, -1.0}, {1.0, 1.0}}));
    bank.push_back(StepFunction({{0.5, -2.0}, {2.0, 0.0}}));
    return bank;
}

}  // namespace bbmlab
