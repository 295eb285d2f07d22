#include <catch_amalgamated.hpp>

#include <cmath>

#include "bbmlab/extremal.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/invariance.hpp"
#include "bbmlab/math_util.hpp"

using namespace bbmlab;

namespace {

const DecorationPool& shared_pool() {
    static const DecorationPool pool = DecorationPool::build(DecorationParams{}, 300, 424242);
    return pool;
}

}  // namespace

TEST_CASE("decoration samples are recentered with an atom at zero", "[extremal]") {
    DecorationParams p;
    for (std::uint64_t seed : {10ULL, 11ULL, 12ULL}) {
        const DecorationSample d = sample_decoration(p, seed);
        REQUIRE(d.config.size() >= 1);
        CHECK(d.config.max_atom() == 0.0);
        CHECK(d.acceptance_rate > 0.0);
        CHECK(d.acceptance_rate <= 1.0);
        CHECK(d.conditioned_max >= -p.K);
        for (double a : d.config.atoms) CHECK(a >= -p.depth_cap);
    }
    const DecorationSample a = sample_decoration(p, 5);
    const DecorationSample b = sample_decoration(p, 5);
    CHECK(a.config.atoms == b.config.atoms);

    CHECK_THROWS_AS(sample_decoration([] { DecorationParams q; q.t_dec = 5.0; return q; }(), 1),
                    std::invalid_argument);
}

TEST_CASE("rejection budget error carries the observed rate", "[extremal]") {
    DecorationParams p;
    p.K = -6.0;  // acceptance event {x + Mbar >= 6}: essentially never at t=9
    p.max_attempts = 4;
    try {
        sample_decoration(p, 3);
        FAIL("expected RejectionBudgetError");
    } catch (const RejectionBudgetError& e) {
        CHECK(e.attempts_used == 4);
        CHECK(e.observed_acceptance == 0.25);
    }
}

TEST_CASE("acceptance rate is predicted by u_M within a factor two", "[extremal][slow]") {
    // P(accept) = P(x + Mbar_t >= -K) = u_M(t, sqrt2 t - x - K)
    DecorationParams p;  // t = 9, x = -1.2, K = 2
    FkppGrid g;
    g.y_min = -40.0;
    g.y_max = 40.0;
    const FkppField uM = solve_fkpp(FkppInitial::step(), {p.t_dec}, g);
    const double predicted = uM.value_lab(p.t_dec, kSqrt2 * p.t_dec - p.offset() - p.K);

    const int n = 60;
    long long attempts = 0;
    for (int i = 0; i < n; ++i) attempts += sample_decoration(p, mix_seed(1000, i)).attempts;
    const double empirical = static_cast<double>(n) / static_cast<double>(attempts);
    INFO("predicted " << predicted << " empirical " << empirical);
    CHECK(empirical < 2.0 * predicted);
    CHECK(empirical > 0.5 * predicted);
}

TEST_CASE("conditioned functional equals the FKPP ratio exactly in law", "[extremal][slow]") {
    // For supp(f) in [-K_f, inf) and conditioning {x + Mbar_t >= -K_f}:
    //   E[1 - e^{-<f(x + Mbar_t + .), D_t>} | accept]
    //     = u_phi(t, sqrt2 t - x) / u_M(t, sqrt2 t - x - K_f),
    // an identity at every finite t, which exercises the whole conditioned
    // sampler against the PDE side.
    const StepFunction f = StepFunction::single(1.0, -1.0);  // K_f = 1
    DecorationParams p;
    p.K = 1.0;
    FkppGrid g;
    g.y_min = -40.0;
    g.y_max = 40.0;
    const FkppField uphi = solve_fkpp(FkppInitial::from_f(f), {p.t_dec}, g);
    const FkppField uM = solve_fkpp(FkppInitial::step(), {p.t_dec}, g);
    const double x = p.offset();
    const double ratio = uphi.value_lab(p.t_dec, kSqrt2 * p.t_dec - x) /
                         uM.value_lab(p.t_dec, kSqrt2 * p.t_dec - x - 1.0);

    const std::uint64_t n = 150;
    std::vector<double> xs(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const DecorationSample d = sample_decoration(p, mix_seed(2000, i));
        double inner = 0.0;
        for (double z : d.config.atoms) inner += f(d.conditioned_max + z);
        xs[i] = 1.0 - std::exp(-inner);
    }
    const McEstimate e = mc_from_samples(xs, 0);
    INFO("mc " << e.mean << " +- " << e.std_error << " vs pde " << ratio);
    CHECK(std::fabs(e.mean - ratio) <= 4.0 * e.std_error);
}

TEST_CASE("decoration law stabilizes from t_dec 9 to 16", "[extremal][slow]") {
    // same conditioned functional at two horizons; tight barrier keeps the
    // t = 16 cloud affordable, the f floor keeps the truncation irrelevant
    const StepFunction f = StepFunction::single(1.0, -1.0);
    DecorationParams p9;
    p9.K = 1.0;
    DecorationParams p16 = p9;
    p16.t_dec = 16.0;
    p16.depth_cap = 4.0;
    p16.barrier_slack = 3.0;

    auto functional = [&](const DecorationParams& p, std::uint64_t n, std::uint64_t seed) {
        std::vector<double> xs(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            const DecorationSample d = sample_decoration(p, mix_seed(seed, i));
            double inner = 0.0;
            for (double z : d.config.atoms) inner += f(d.conditioned_max + z);
            xs[i] = 1.0 - std::exp(-inner);
        }
        return mc_from_samples(xs, seed);
    };
    const McEstimate e9 = functional(p9, 150, 31);
    const McEstimate e16 = functional(p16, 12, 32);
    const double se = std::sqrt(e9.std_error * e9.std_error + e16.std_error * e16.std_error);
    INFO("t=9: " << e9.mean << " t=16: " << e16.mean << " combined se " << se);
    CHECK(std::fabs(e9.mean - e16.mean) <= 3.0 * se);
}

TEST_CASE("pool halves are disjoint and draws deterministic", "[extremal]") {
    const auto& pool = shared_pool();
    REQUIRE(pool.entries().size() == 300);
    CHECK(pool.mean_acceptance() > 0.0);
    Rng r1(1), r2(1);
    for (int i = 0; i < 50; ++i) {
        const PointConfig& a = pool.draw(r1, 0);
        const PointConfig& b = pool.draw(r2, 0);
        CHECK(&a == &b);
    }
    // half 0 and half 1 never alias
    for (int rep = 0; rep < 200; ++rep) {
        Rng ra(rep), rb(rep);
        CHECK(&pool.draw(ra, 0) != &pool.draw(rb, 1));
    }
}

TEST_CASE("bar E leader count matches the PPP mass", "[extremal]") {
    BarEParams bp;
    bp.window_floor = -2.0;
    bp.direct_floor = -2.0;
    const double expect = std::exp(2.0 * kSqrt2);  // 16.9188
    CHECK_THAT(expect, Catch::Matchers::WithinAbs(16.9188, 5e-4));
    const std::uint64_t n = 1000;
    std::vector<double> counts(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        counts[i] = static_cast<double>(
            sample_bar_e(bp, &shared_pool(), mix_seed(51, i)).skeleton_count);
    }
    const McEstimate e = mc_from_samples(counts, 0);
    CHECK(std::fabs(e.mean - expect) <= 4.0 * e.std_error);
    CHECK_THROWS_AS(sample_bar_e([] { BarEParams q; q.window_floor = 1.0; return q; }(),
                                 &shared_pool(), 1),
                    std::invalid_argument);
}

TEST_CASE("bar E samples respect the direct floor", "[extremal]") {
    BarEParams bp;  // floors at -8
    const FixedPointSample s = sample_bar_e(bp, &shared_pool(), 99);
    REQUIRE_FALSE(s.config.empty());
    CHECK(*s.config.truncation_floor == -8.0);
    for (double a : s.config.atoms) CHECK(a >= -8.0);
    CHECK(s.skeleton_count > 50000);  // e^{8 sqrt2} ~ 8.2e4 leaders
    CHECK(s.config.max_atom() < 10.0);
}

TEST_CASE("fresh decorations per leader work at shallow floors", "[extremal]") {
    BarEParams bp;
    bp.window_floor = -5.0;
    bp.direct_floor = -5.0;
    const FixedPointSample s = sample_bar_e(bp, nullptr, 7);
    REQUIRE_FALSE(s.config.empty());
    CHECK(s.config.max_atom() <= 12.0);
    const FixedPointSample s2 = sample_bar_e(bp, nullptr, 7);
    CHECK(s.config.atoms == s2.config.atoms);
}

TEST_CASE("tail growth of bar E matches e^{sqrt2 x}", "[extremal][slow]") {
    // regress log(mean count([-x,inf)) / x) on x: the x e^{sqrt2 x} law
    // leaves slope sqrt2
    BarEParams bp;
    const std::uint64_t n = 40;
    std::vector<double> xs = {4.0, 5.0, 6.0, 7.0, 8.0};
    std::vector<double> logmean;
    for (double x : xs) {
        double acc = 0.0;
        for (std::uint64_t i = 0; i < n; ++i) {
            const FixedPointSample s = sample_bar_e(bp, &shared_pool(), mix_seed(61, i));
            acc += static_cast<double>(count(s.config, -x, 1e9));
        }
        logmean.push_back(std::log(acc / static_cast<double>(n) / x));
    }
    // least squares slope
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += logmean[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * logmean[i];
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    INFO("slope " << slope);
    CHECK_THAT(slope, Catch::Matchers::WithinAbs(kSqrt2, 0.15));
}

TEST_CASE("random shifts translate samples", "[extremal]") {
    BarEParams bp;
    bp.window_floor = -5.0;
    bp.direct_floor = -5.0;
    const FixedPointSample s = sample_bar_e(bp, &shared_pool(), 13);
    const FixedPointSample id = apply_random_shift(s, ShiftLaw::point(0.0), 1);
    CHECK(id.config.atoms == s.config.atoms);
    CHECK(id.shift_S == 0.0);
    const FixedPointSample up = apply_random_shift(s, ShiftLaw::point(3.0), 1);
    CHECK(up.config.max_atom() == s.config.max_atom() + 3.0);
    CHECK(up.shift_S == 3.0);
    CHECK(up.window_floor == s.window_floor + 3.0);
    const FixedPointSample g1 = apply_random_shift(s, ShiftLaw::gaussian(0.0, 1.0), 5);
    const FixedPointSample g2 = apply_random_shift(s, ShiftLaw::gaussian(0.0, 1.0), 5);
    CHECK(g1.shift_S == g2.shift_S);
    CHECK_THROWS_AS(apply_random_shift(s, ShiftLaw::exponential(-1.0), 1),
                    std::invalid_argument);
}

TEST_CASE("deep leader band moments behave", "[extremal]") {
    const auto& pool = shared_pool();
    const DeepBandMoments b15 = m32_deep_band(-15.0, -8.0, 0.5, pool);
    const DeepBandMoments b25 = m32_deep_band(-25.0, -8.0, 0.5, pool);
    CHECK(b15.mean > 0.0);
    CHECK(b25.mean > b15.mean);          // wider band holds more mass
    CHECK(b25.mean - b15.mean < 0.01 * b15.mean + 0.5);  // but the extension is tiny
    CHECK(b15.var >= 0.0);
    CHECK(m32_deep_band(-8.0, -8.0, 0.5, pool).mean == 0.0);

    BarEParams bp;
    bp.window_floor = -15.0;
    const FixedPointSample s = sample_bar_e(bp, &pool, 17);
    const double with_band = m32_with_deep_band(s, 0.5, pool, 17);
    const double direct = m32_score(s.config, 0.5);
    CHECK(with_band > direct);
    CHECK(with_band < direct * 1.5);
}
