#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/invariance.hpp"
#include "bbmlab/math_util.hpp"
#include "bbmlab/parallel.hpp"
#include "bbmlab/point_config.hpp"

namespace bbmlab {

// Cross-oracle verification suite. Each criterion pins its tolerance here;
// nothing is deferred to later calibration. Reduced replica counts behind
// `quick` keep a smoke run under a few minutes.

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    bool quick = false;
    unsigned threads = 1;
    std::uint64_t seed = 20240901;
    std::vector<int> only;  // run a subset when non-empty
};

namespace acceptance_detail {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

inline std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

struct SmallTRun {
    std::vector<std::uint64_t> counts;       // n(t)
    std::vector<std::vector<double>> tops;   // particle positions per replica
    std::vector<double> z;                   // Z_t
};

}  // namespace acceptance_detail

class AcceptanceContext {
  public:
    explicit AcceptanceContext(const AcceptanceOptions& opts) : opts_(opts) {}

    const AcceptanceOptions& opts() const { return opts_; }

    std::uint64_t n_scaled(std::uint64_t full, std::uint64_t quick) const {
        return opts_.quick ? quick : full;
    }

    // u_M field on the default grid with all checkpoints the criteria touch.
    const FkppField& u_M() {
        if (!u_M_) {
            FkppGrid g;
            u_M_ = std::make_unique<FkppField>(solve_fkpp(
                FkppInitial::step(),
                {2.0, 8.0, 16.0, 20.0, 40.0, 64.0, 80.0, 128.0, 240.0, 480.0}, g));
        }
        return *u_M_;
    }

    // u_phi field for f = 1 * 1_{x>0}, used by the C(f) cross-check.
    const FkppField& u_phi_unit() {
        if (!u_phi_) {
            FkppGrid g;
            u_phi_ = std::make_unique<FkppField>(solve_fkpp(
                FkppInitial::from_f(StepFunction::single(1.0, 0.0)), {8.0, 16.0, 32.0, 64.0}, g));
        }
        return *u_phi_;
    }

    const DecorationPool& pool() {
        if (!pool_) {
            DecorationParams p;
            const std::size_t n = n_scaled(2000, 400);
            pool_ = std::make_unique<DecorationPool>(
                DecorationPool::build(p, n, mix_seed(opts_.seed, 0x900Cu)));
        }
        return *pool_;
    }

    double cm_hat() {
        if (cm_hat_ == 0.0) {
            cm_hat_ = estimate_CM_from_profile(wave_profile(u_M(), 480.0), 480.0).value;
        }
        return cm_hat_;
    }

    // Drift-off reference runs reused by the many-to-one and martingale suites.
    const acceptance_detail::SmallTRun& small_t_run(double t, std::uint64_t n) {
        auto& slot = runs_[t];
        if (slot.counts.size() != n) {
            slot.counts.assign(n, 0);
            slot.tops.assign(n, {});
            slot.z.assign(n, 0.0);
            BbmParams p;
            p.t = t;
            p.drift_on = false;
            p.barrier_depth = std::numeric_limits<double>::infinity();
            parallel_for_index(n, opts_.threads, [&](std::uint64_t i) {
                const BbmSummary s =
                    evolve_single(0.0, p, mix_seed(opts_.seed, 0xabcd00 + i * 8 +
                                                              static_cast<std::uint64_t>(t)));
                slot.counts[i] = s.count;
                slot.z[i] = s.derivative_martingale;
                std::vector<double> pos(s.decoration.atoms);
                for (double& d : pos) d += s.max_shifted;
                slot.tops[i] = std::move(pos);
            });
        }
        return slot;
    }

  private:
    AcceptanceOptions opts_;
    std::unique_ptr<FkppField> u_M_;
    std::unique_ptr<FkppField> u_phi_;
    std::unique_ptr<DecorationPool> pool_;
    double cm_hat_ = 0.0;
    std::map<double, acceptance_detail::SmallTRun> runs_;
};

namespace acceptance_detail {

inline CriterionResult c1_many_to_one(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{1, "many-to-one suite"};
    const std::uint64_t n = ctx.n_scaled(10000, 2000);
    bool ok = true;
    std::ostringstream d;
    double worst = 0.0;
    for (double t : {1.0, 2.0, 4.0}) {
        const auto& run = ctx.small_t_run(t, n);
        for (double a : {-1.0, 0.0, 1.0, 2.0}) {
            std::vector<double> xs(n);
            for (std::uint64_t i = 0; i < n; ++i) {
                double c = 0.0;
                for (double p : run.tops[i]) {
                    if (p >= a) c += 1.0;
                }
                xs[i] = c;
            }
            const McEstimate e = mc_from_samples(xs, 0);
            const double expect = std::exp(t) * normal_tail(a / std::sqrt(t));
            const double dev = std::fabs(e.mean - expect) / e.std_error;
            worst = std::max(worst, dev);
            if (dev > 4.0) {
                ok = false;
                d << " t=" << t << ",a=" << a << ":" << fmt(dev, 3) << "SE";
            }
        }
    }
    const double secs = sw.elapsed();
    r.pass = ok && secs < 120.0;
    r.detail = "worst deviation " + fmt(worst, 3) + " SE (limit 4), " + fmt(secs, 3) +
               " s (limit 120)" + d.str();
    r.seconds = secs;
    return r;
}

inline CriterionResult c2_martingale(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{2, "derivative martingale mean"};
    const std::uint64_t n = ctx.n_scaled(10000, 2000);
    bool ok = true;
    double worst = 0.0;
    for (double t : {1.0, 2.0, 4.0}) {
        const auto& run = ctx.small_t_run(t, n);
        const McEstimate e = mc_from_samples(run.z, 0);
        const double dev = std::fabs(e.mean) / e.std_error;
        worst = std::max(worst, dev);
        if (dev > 4.0) ok = false;
    }
    r.pass = ok;
    r.detail = "worst |mean Z_t| = " + fmt(worst, 3) + " SE (limit 4)";
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c3_wave_convergence(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{3, "FKPP wave convergence"};
    const auto& field = ctx.u_M();
    const WaveEstimate w20 = wave_profile(field, 20.0);
    const WaveEstimate w40 = wave_profile(field, 40.0);
    double sup = 0.0;
    for (std::size_t i = 0; i < w20.profile.size(); ++i) {
        sup = std::max(sup, std::fabs(w40.profile[i] - w20.profile[i]));
    }
    // The m(t)-frame profile obeys the sqrt2-wave ODE only up to the
    // O(1/t) drift correction 3/(2 sqrt2 t) |omega'|, so the residual
    // tolerance is checked where it has converged (t = 240), not at t = 40
    // where that term alone is ~5e-3.
    const WaveEstimate w_res = wave_profile(field, 240.0);
    const double secs = sw.elapsed();
    r.pass = sup < 0.01 && w_res.residual_norm < 1e-3 && secs < 60.0;
    r.detail = "sup|w40-w20| = " + fmt(sup, 3) + " (limit 0.01), residual(t=240) = " +
               fmt(w_res.residual_norm, 3) + " (limit 1e-3), " + fmt(secs, 3) + " s (limit 60)";
    r.seconds = secs;
    return r;
}

inline CriterionResult c4_omega_tail_law(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{4, "omega_M tail-law plateau at t=40"};
    const auto& field = ctx.u_M();
    const CmEstimate cm40 = estimate_CM_from_profile(wave_profile(field, 40.0), 40.0);
    const CmEstimate cm240 = estimate_CM_from_profile(wave_profile(field, 240.0), 240.0);
    r.pass = cm40.flatness <= 1.10;
    r.detail = "flatness(t=40) = " + fmt(cm40.flatness, 4) +
               " (limit 1.10); for reference flatness(t=240) = " + fmt(cm240.flatness, 4) +
               ", C_M(240) = " + fmt(cm240.value, 4);
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c5_psi_sandwich(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{5, "Bramson psi sandwich"};
    const auto& field = ctx.u_M();
    bool ok = true;
    std::ostringstream d;
    double spread8 = 0.0, spread16 = 0.0;
    for (double X : {10.0, 20.0, 40.0}) {
        const double u = field.value(64.0, X);
        const double ps = psi_bramson(field, 8.0, 64.0, X, /*enforce=*/false);
        const double ratio = u / ps;
        if (!(ratio >= 2.0 / 3.0 && ratio <= 1.5)) ok = false;
        d << " X=" << fmt(X, 3) << ":" << fmt(ratio, 4);
    }
    // gamma_r improves with r: compare log-ratio spreads at a time horizon
    // valid for both r = 8 and r = 16 (t = 128 >= 8 r).
    for (double X : {10.0, 20.0, 40.0}) {
        const double u = field.value(128.0, X);
        spread8 = std::max(spread8,
                           std::fabs(std::log(u / psi_bramson(field, 8.0, 128.0, X, false))));
        spread16 = std::max(spread16,
                            std::fabs(std::log(u / psi_bramson(field, 16.0, 128.0, X, false))));
    }
    if (!(spread16 <= spread8)) ok = false;
    r.pass = ok;
    r.detail = "u/psi at (r=8,t=64):" + d.str() + "; max|log ratio| at t=128: r=8 " +
               fmt(spread8, 4) + " vs r=16 " + fmt(spread16, 4);
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c6_tail_band(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{6, "sharp-bound tail band"};
    const auto& field = ctx.u_M();
    auto make_grid = [](double t) {
        std::vector<double> xs;
        for (double x = 1.0; x <= std::sqrt(t) + 1e-9; x += 0.25) xs.push_back(x);
        return xs;
    };
    const TailBandReport b40 = tail_bound_check(field, 40.0, make_grid(40.0));
    const TailBandReport b80 = tail_bound_check(field, 80.0, make_grid(80.0));
    const bool overlap = b40.ratio_min <= b80.ratio_max && b80.ratio_min <= b40.ratio_max;
    r.pass = b40.pass && b80.pass && overlap;
    r.detail = "band(40) = [" + fmt(b40.ratio_min, 4) + "," + fmt(b40.ratio_max, 4) +
               "], band(80) = [" + fmt(b80.ratio_min, 4) + "," + fmt(b80.ratio_max, 4) +
               "], max/min limits 10, overlap " + (overlap ? "yes" : "no");
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c7_pde_vs_mc(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{7, "PDE vs simulator oracle"};
    const std::uint64_t n = ctx.n_scaled(100000, 10000);
    BbmParams p;
    p.t = 2.0;
    p.drift_on = true;
    p.barrier_depth = std::numeric_limits<double>::infinity();
    std::vector<double> hit(n);
    parallel_for_index(n, ctx.opts().threads, [&](std::uint64_t i) {
        hit[i] = evolve_single(0.0, p, mix_seed(ctx.opts().seed, 0x70 + i)).max_shifted >= 1.0
                     ? 1.0
                     : 0.0;
    });
    const McEstimate e = mc_from_samples(hit, 0);
    const double u = ctx.u_M().value(2.0, 1.0);
    const double dev = std::fabs(u - e.mean) / e.std_error;
    r.pass = dev <= 4.0;
    r.detail = "u_M(2, 2 sqrt2 + 1) = " + fmt(u, 5) + ", MC = " + fmt(e.mean, 5) + " +- " +
               fmt(e.std_error, 3) + " -> " + fmt(dev, 3) + " SE (limit 4)";
    r.seconds = sw.elapsed();
    return r;
}

inline ConfigSampler bar_e_sampler(const DecorationPool& pool, int half,
                                   double floor = -8.0) {
    BarEParams bp;
    bp.window_floor = floor;
    bp.direct_floor = floor;
    bp.pool_half = half;
    return [&pool, bp](std::uint64_t seed) { return sample_bar_e(bp, &pool, seed).config; };
}

inline CriterionResult c8_fixed_point_invariance(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{8, "fixed-point invariance of bar E_infty"};
    const std::uint64_t n = ctx.n_scaled(2000, 300);
    const auto bank = default_bank();
    EvolveOptions ev;
    ev.bbm.t = 1.0;
    ev.keep_above = -6.0;
    const InvarianceReport rep =
        invariance_test_two(bar_e_sampler(ctx.pool(), 0), bar_e_sampler(ctx.pool(), 1), 1.0,
                            bank, n, mix_seed(ctx.opts().seed, 0x80), ev);
    const double secs = sw.elapsed();
    r.pass = rep.pass_fraction >= 0.9 && secs < 900.0;
    std::ostringstream zs;
    for (const auto& rec : rep.per_function) zs << " " << fmt(rec.z_score, 2);
    r.detail = "pass fraction " + fmt(rep.pass_fraction, 3) + " (limit 0.9), " + fmt(secs, 4) +
               " s (limit 900); z:" + zs.str();
    r.seconds = secs;
    return r;
}

inline CriterionResult c9_negative_control(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{9, "negative control power"};
    const std::uint64_t n = ctx.n_scaled(2000, 500);
    const int reps = 20;
    const auto bank = default_bank();
    ConfigSampler origin = [](std::uint64_t) { return PointConfig::from_atoms({0.0}); };
    EvolveOptions ev;
    ev.bbm.t = 2.0;
    int rejected = 0;
    for (int k = 0; k < reps; ++k) {
        const InvarianceReport rep = invariance_test(
            origin, 2.0, bank, n, mix_seed(ctx.opts().seed, 0x90 + k), ev);
        bool any = false;
        for (const auto& rec : rep.per_function) {
            if (std::fabs(rec.z_score) > 3.0) any = true;
        }
        rejected += any ? 1 : 0;
    }
    const double frac = static_cast<double>(rejected) / reps;
    r.pass = frac >= 0.95;
    r.detail = "rejected in " + std::to_string(rejected) + "/20 meta-repetitions (need >= 19)";
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c10_superposition(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{10, "superposition identity"};
    const std::uint64_t n = ctx.n_scaled(2000, 400);
    const auto bank = default_bank();
    const auto& pool = ctx.pool();
    const double q = std::log(2.0) / kSqrt2;

    BarEParams bp;
    bp.window_floor = -8.0;
    bp.direct_floor = -8.0;
    bp.pool_half = 0;
    ConfigSampler pair = [&pool, bp](std::uint64_t seed) {
        const auto a = sample_bar_e(bp, &pool, mix_seed(seed, 1));
        const auto b = sample_bar_e(bp, &pool, mix_seed(seed, 2));
        return superpose(a.config, b.config);
    };
    BarEParams bs = bp;
    bs.pool_half = 1;
    ConfigSampler shifted = [&pool, bs, q](std::uint64_t seed) {
        const auto s = sample_bar_e(bs, &pool, seed);
        return shift(s.config, q);
    };

    bool ok = true;
    double worst = 0.0;
    const std::uint64_t seed = mix_seed(ctx.opts().seed, 0xa0);
    std::vector<std::vector<double>> va(bank.size(), std::vector<double>(n));
    std::vector<std::vector<double>> vb(bank.size(), std::vector<double>(n));
    parallel_for_index(n, ctx.opts().threads, [&](std::uint64_t i) {
        const PointConfig ca = pair(mix_seed(seed, 2 * i));
        const PointConfig cb = shifted(mix_seed(seed, 2 * i + 1));
        for (std::size_t k = 0; k < bank.size(); ++k) {
            va[k][i] = std::exp(-integrate(ca, bank[k]));
            vb[k][i] = std::exp(-integrate(cb, bank[k]));
        }
    });
    for (std::size_t k = 0; k < bank.size(); ++k) {
        const double z = z_score_of(mc_from_samples(va[k], 0), mc_from_samples(vb[k], 0));
        worst = std::max(worst, std::fabs(z));
        if (std::fabs(z) > 3.0) ok = false;
    }
    r.pass = ok;
    r.detail = "worst |z| over bank = " + fmt(worst, 3) + " (limit 3)";
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c11_basin_decay(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{11, "basin-of-attraction decay"};
    const std::uint64_t n = ctx.n_scaled(1000, 200);
    BbmParams engine;
    engine.barrier_depth = 10.0;
    bool ok = true;
    std::ostringstream d;
    // Window [-1, 3]: by t = 8 the front centering has only dropped to
    // m(8) - sqrt2*8 ~ -2.2, so a window reaching below that still gains
    // mass between t = 1 and t = 8 (many-to-one puts the [-3,3] mean at
    // 4.4 -> 4.6). Decay by t = 8 is real only above that level.
    for (auto family : {BasinFamily::uniform_ppp, BasinFamily::lattice}) {
        const DecayTable table = basin_run(family, 0.0, {1.0, 8.0}, -1.0, 3.0, n,
                                           mix_seed(ctx.opts().seed, 0xb0), engine);
        const auto& r1 = table.rows[0].window_count;
        const auto& r8 = table.rows[1].window_count;
        const double sep = (r1.mean - r8.mean) /
                           std::sqrt(r1.std_error * r1.std_error + r8.std_error * r8.std_error);
        if (!(sep >= 3.0)) ok = false;
        d << (family == BasinFamily::uniform_ppp ? " uniform:" : " lattice:") << fmt(sep, 3)
          << "SE(" << fmt(r1.mean, 3) << "->" << fmt(r8.mean, 3) << ")";
    }
    r.pass = ok;
    r.detail = "t=1 vs t=8 window-count separation (need >= 3 SE):" + d.str();
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c12_cf_cross_check(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{12, "C(f) decoration cross-check"};
    const CfEstimate cf = estimate_Cf_from_field(ctx.u_phi_unit(), {8.0, 16.0, 32.0, 64.0});

    // Monte Carlo side of C(f) = C_M sqrt2 int E[1 - e^{-<f(y+.), D>}] e^{-sqrt2 y} dy
    // for f = 1_{x>0}: the inner integral counts decoration atoms above -y.
    const auto& pool = ctx.pool();
    const double h = 0.05;
    std::vector<double> integrand;
    for (double y = 0.0; y <= 10.0 + 1e-9; y += h) {
        double acc = 0.0;
        for (const auto& dec : pool.entries()) {
            const double hits = static_cast<double>(count(dec, -y, 0.0));
            acc += 1.0 - std::exp(-hits);
        }
        acc /= static_cast<double>(pool.entries().size());
        integrand.push_back(kSqrt2 * acc * std::exp(-kSqrt2 * y));
    }
    const double mc_integral = simpson_samples(integrand, h);
    const double mc_side = ctx.cm_hat() * mc_integral;
    const double rel = std::fabs(cf.value - mc_side) / std::fabs(cf.value);
    r.pass = rel <= 0.10;
    r.detail = "PDE C(f) = " + fmt(cf.value, 4) + ", C_M x decoration integral = " +
               fmt(mc_side, 4) + " (C_M = " + fmt(ctx.cm_hat(), 4) + "), rel diff " +
               fmt(rel, 3) + " (limit 0.10)";
    r.seconds = sw.elapsed();
    return r;
}

inline CriterionResult c13_m32_stability(AcceptanceContext& ctx) {
    Stopwatch sw;
    CriterionResult r{13, "M_{3/2} floor stability"};
    const std::uint64_t n = ctx.n_scaled(200, 50);
    const auto& pool = ctx.pool();
    const double beta = 0.5;
    auto mean_score = [&](double floor_L) {
        BarEParams bp;
        bp.window_floor = floor_L;
        bp.direct_floor = -8.0;
        bp.pool_half = -1;
        std::vector<double> xs(n);
        parallel_for_index(n, ctx.opts().threads, [&](std::uint64_t i) {
            const std::uint64_t s = mix_seed(ctx.opts().seed, 0xd0 + i);
            const FixedPointSample smp = sample_bar_e(bp, &pool, s);
            xs[i] = m32_with_deep_band(smp, beta, pool, s);
        });
        return mc_from_samples(xs, 0);
    };
    // paired by seed: the direct part is identical, only the [L, -8) band moves
    const McEstimate m15 = mean_score(-15.0);
    const McEstimate m25 = mean_score(-25.0);
    const double rel = std::fabs(m25.mean - m15.mean) / m15.mean;
    r.pass = rel < 0.01;
    r.detail = "mean score floor -15: " + fmt(m15.mean, 5) + ", floor -25: " + fmt(m25.mean, 5) +
               ", rel change " + fmt(rel, 4) + " (limit 0.01)";
    r.seconds = sw.elapsed();
    return r;
}

}  // namespace acceptance_detail

inline std::vector<CriterionResult> run_acceptance(AcceptanceContext& ctx,
                                                   std::ostream& log) {
    using Runner = std::function<CriterionResult(AcceptanceContext&)>;
    const std::vector<Runner> runners = {
        acceptance_detail::c1_many_to_one,     acceptance_detail::c2_martingale,
        acceptance_detail::c3_wave_convergence, acceptance_detail::c4_omega_tail_law,
        acceptance_detail::c5_psi_sandwich,    acceptance_detail::c6_tail_band,
        acceptance_detail::c7_pde_vs_mc,       acceptance_detail::c8_fixed_point_invariance,
        acceptance_detail::c9_negative_control, acceptance_detail::c10_superposition,
        acceptance_detail::c11_basin_decay,    acceptance_detail::c12_cf_cross_check,
        acceptance_detail::c13_m32_stability};
    std::vector<CriterionResult> out;
    for (std::size_t i = 0; i < runners.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        const auto& only = ctx.opts().only;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        CriterionResult res = runners[i](ctx);
        out.push_back(res);
        log << "criterion " << res.id << " [" << (res.pass ? "PASS" : "FAIL") << "] "
            << res.name << ": " << res.detail << "\n";
        log.flush();
    }
    return out;
}

}  // namespace bbmlab
