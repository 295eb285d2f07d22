#include <catch_amalgamated.hpp>

#include <cmath>

#include "bbmlab/invariance.hpp"
#include "bbmlab/io.hpp"
#include "bbmlab/math_util.hpp"
#include "bbmlab/point_config.hpp"

using namespace bbmlab;

TEST_CASE("integrate sums step weights over atoms", "[point]") {
    const StepFunction f1 = StepFunction::single(1.0, -1.0);
    CHECK(integrate(PointConfig::from_atoms({0.0, -2.0}), f1) == 1.0);
    CHECK(integrate(PointConfig{}, f1) == 0.0);

    // hand enumeration over 3 atoms and 2 steps
    const StepFunction f2({{2.0, 0.0}, {1.0, -4.0}});
    CHECK(integrate(PointConfig::from_atoms({1.0, 1.0, -3.0}), f2) == 7.0);
}

TEST_CASE("step function evaluation uses strict thresholds", "[point]") {
    const StepFunction f({{1.5, 0.0}, {0.5, 0.0}});
    CHECK(f(0.0) == 0.0);  // x > b strictly
    CHECK(f(1e-9) == 2.0);
    CHECK(f.support_floor() == 0.0);
    CHECK_THROWS_AS(StepFunction({{0.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(StepFunction({{-1.0, 1.0}}), std::invalid_argument);
}

TEST_CASE("shift translates atoms and floor", "[point]") {
    const PointConfig c = PointConfig::from_atoms({0.0, -1.0});
    CHECK(shift(c, 0.0).atoms == c.atoms);
    const PointConfig s = shift(c, 2.5);
    CHECK(s.atoms == std::vector<double>{2.5, 1.5});

    const PointConfig c2 = PointConfig::from_atoms({3.0, 0.0, -7.0});
    CHECK(shift(shift(c2, 1.25), -1.25).atoms == c2.atoms);

    PointConfig floored = PointConfig::from_atoms({0.0}, -4.0);
    CHECK(*shift(floored, 1.0).truncation_floor == -3.0);
    CHECK_THROWS_AS(shift(c, std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("superpose merges multisets", "[point]") {
    CHECK(superpose(PointConfig::from_atoms({0.0}), PointConfig{}).atoms ==
          std::vector<double>{0.0});
    CHECK(superpose(PointConfig::from_atoms({1.0, -1.0}), PointConfig::from_atoms({0.0})).atoms ==
          std::vector<double>{1.0, 0.0, -1.0});

    const PointConfig a = PointConfig::from_atoms({2.0, -2.0});
    const PointConfig b = PointConfig::from_atoms({0.0});
    CHECK(count(superpose(a, b), -1.0, 3.0) == count(a, -1.0, 3.0) + count(b, -1.0, 3.0));
    CHECK(count(superpose(a, b), -1.0, 3.0) == 2);
}

TEST_CASE("count over closed intervals with multiplicity", "[point]") {
    CHECK(count(PointConfig::from_atoms({0.0, -2.0}), -1.0, 1.0) == 1);
    CHECK(count(PointConfig::from_atoms({0.0, 0.0}), 0.0, 0.0) == 2);
    CHECK(count(PointConfig::from_atoms({5.0, -5.0}), -4.0, 4.0) == 0);
    CHECK_THROWS_AS(count(PointConfig{}, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("m32_score evaluates the M_{3/2} statistic", "[point]") {
    CHECK(m32_score(PointConfig::from_atoms({0.0}), 0.7) == 1.0);
    CHECK_THAT(m32_score(PointConfig::from_atoms({-1.0}), 0.5),
               Catch::Matchers::WithinRel(std::exp(-0.5), 1e-12));
    // |-4|^{3/2} = 8
    CHECK_THAT(m32_score(PointConfig::from_atoms({0.0, -4.0}), 0.25),
               Catch::Matchers::WithinRel(1.0 + std::exp(-2.0), 1e-12));
    CHECK_THROWS_AS(m32_score(PointConfig{}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(m32_score(PointConfig{}, 0.0), std::invalid_argument);
}

TEST_CASE("m32_score is non-increasing in beta", "[point]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const PointConfig c = sample_ppp(
            IntensityDescriptor::uniform_intensity(0.8, -12.0, 5.0), seed);
        double prev = std::numeric_limits<double>::infinity();
        for (double beta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double s = m32_score(c, beta);
            CHECK(s <= prev + 1e-12);
            prev = s;
        }
    }
}

TEST_CASE("lattice intensity sampling is deterministic", "[point]") {
    const auto d = IntensityDescriptor::lattice_intensity(1.0, -5.0, 0.0);
    const PointConfig c = sample_ppp(d, 123);
    CHECK(c.atoms == std::vector<double>{0.0, -1.0, -2.0, -3.0, -4.0, -5.0});
    CHECK(sample_ppp(d, 7).atoms == c.atoms);
    CHECK(d.mass() == 6.0);
}

TEST_CASE("ppp mean counts match window mass", "[point]") {
    const std::uint64_t n = 10000;

    // exponential sqrt2 e^{-sqrt2 x} on [0,30]: mass 1 - e^{-30 sqrt2} ~ 1
    const auto exp_d = IntensityDescriptor::exponential_intensity(kSqrt2, kSqrt2, 0.0, 30.0);
    std::vector<double> counts(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        counts[i] = static_cast<double>(sample_ppp(exp_d, i).size());
    }
    McEstimate e = mc_from_samples(counts, 0);
    CHECK(std::fabs(e.mean - exp_d.mass()) <= 4.0 * e.std_error);
    CHECK(std::fabs(e.mean - 1.0) <= 0.03);

    const auto uni_d = IntensityDescriptor::uniform_intensity(1.0, -10.0, 0.0);
    for (std::uint64_t i = 0; i < n; ++i) {
        counts[i] = static_cast<double>(sample_ppp(uni_d, i).size());
    }
    e = mc_from_samples(counts, 0);
    CHECK(std::fabs(e.mean - 10.0) <= 4.0 * e.std_error);
    CHECK(std::fabs(e.mean - 10.0) <= 0.1 + 4.0 * e.std_error);
}

TEST_CASE("ppp Laplace functional matches the closed form", "[point]") {
    // E e^{-<f,theta>} = exp(-int (1-e^{-f}) dmu), quadrature oracle
    struct Case {
        IntensityDescriptor mu;
        StepFunction f;
    };
    const std::vector<Case> cases = {
        {IntensityDescriptor::exponential_intensity(kSqrt2, kSqrt2, 0.0, 30.0),
         StepFunction::single(std::log(2.0), 0.0)},
        {IntensityDescriptor::uniform_intensity(0.7, -6.0, 2.0),
         StepFunction({{0.5, -2.0}, {1.0, 0.5}})},
    };
    for (const auto& [mu, f] : cases) {
        auto density = [&](double x) {
            return mu.kind == IntensityDescriptor::Kind::uniform
                       ? mu.level
                       : mu.scale * std::exp(-mu.lambda * x);
        };
        const double integral = simpson(
            [&](double x) { return (1.0 - std::exp(-f(x))) * density(x); }, mu.window_lo,
            mu.window_hi, 4000);
        const double closed_form = std::exp(-integral);

        const std::uint64_t n = 10000;
        std::vector<double> xs(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            xs[i] = std::exp(-integrate(sample_ppp(mu, mix_seed(17, i)), f));
        }
        const McEstimate e = mc_from_samples(xs, 0);
        INFO("closed form " << closed_form << " vs mc " << e.mean);
        CHECK(std::fabs(e.mean - closed_form) <= 4.0 * e.std_error);
    }

    // the spec's worked case: f = ln2 on x > 0 gives exp(-1/2)
    const double target = std::exp(-0.5);
    const auto mu = IntensityDescriptor::exponential_intensity(kSqrt2, kSqrt2, 0.0, 30.0);
    const StepFunction f = StepFunction::single(std::log(2.0), 0.0);
    std::vector<double> xs(10000);
    for (std::uint64_t i = 0; i < xs.size(); ++i) {
        xs[i] = std::exp(-integrate(sample_ppp(mu, mix_seed(99, i)), f));
    }
    const McEstimate e = mc_from_samples(xs, 0);
    CHECK(std::fabs(e.mean - target) <= 4.0 * e.std_error);
}

TEST_CASE("integrate is additive under superpose and shift-covariant", "[point]") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(seed);
        const PointConfig a =
            sample_ppp(IntensityDescriptor::uniform_intensity(0.5, -8.0, 4.0), seed * 2);
        const PointConfig b =
            sample_ppp(IntensityDescriptor::uniform_intensity(1.1, -5.0, 2.0), seed * 2 + 1);
        const StepFunction f({{0.25 + rng.u01(), -3.0 + 4.0 * rng.u01()},
                              {0.5 + rng.u01(), rng.u01()}});
        CHECK(integrate(superpose(a, b), f) == integrate(a, f) + integrate(b, f));

        const double u = -2.0 + 4.0 * rng.u01();
        CHECK_THAT(integrate(shift(a, u), f),
                   Catch::Matchers::WithinULP(integrate(a, f.with_shifted_thresholds(-u)), 4));
    }
}

TEST_CASE("config invariants are enforced", "[point]") {
    const PointConfig c = PointConfig::from_atoms({-3.0, 5.0, 1.0});
    CHECK(c.atoms == std::vector<double>{5.0, 1.0, -3.0});
    CHECK(c.max_atom() == 5.0);
    CHECK_THROWS_AS(PointConfig::from_atoms({0.0, -9.0}, -4.0), std::invalid_argument);
    CHECK_THROWS_AS(PointConfig::from_atoms({std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(PointConfig{}.max_atom(), std::logic_error);
}

TEST_CASE("config csv round trip", "[point]") {
    const PointConfig c = PointConfig::from_atoms({1.5, 0.25, -2.75}, -4.0);
    const auto path = std::filesystem::temp_directory_path() / "bbmlab_cfg_test.csv";
    write_config_csv(path, c);
    const PointConfig back = read_config_csv(path, c.truncation_floor);
    CHECK(back.atoms == c.atoms);
    std::filesystem::remove(path);
}

TEST_CASE("bank json round trip", "[point]") {
    const auto bank = default_bank();
    REQUIRE(bank.size() == 20);
    const auto bank2 = bank_from_json(bank_to_json(bank));
    REQUIRE(bank2.size() == bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        CHECK(bank2[i].steps.size() == bank[i].steps.size());
        for (std::size_t k = 0; k < bank[i].steps.size(); ++k) {
            CHECK(bank2[i].steps[k].weight == bank[i].steps[k].weight);
            CHECK(bank2[i].steps[k].threshold == bank[i].steps[k].threshold);
        }
    }
}
