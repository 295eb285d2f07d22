// Batch front door: reproducible experiments wired from JSON configs.
// Exit codes: 0 success, 1 statistical failure in verify, 2 schema violation,
// 3 resource-cap violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bbmlab/acceptance.hpp"
#include "bbmlab/bbm.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/invariance.hpp"
#include "bbmlab/io.hpp"
#include "bbmlab/point_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bbmlab;

namespace {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("config must be a JSON object");
    return j;
}

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::set<std::string>& required) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw SchemaError("unknown config key: " + key);
    }
    for (const auto& key : required) {
        if (!j.count(key)) throw SchemaError("missing config key: " + key);
    }
}

double num(const json& j, const std::string& key, std::optional<double> fallback = {}) {
    if (!j.count(key)) {
        if (fallback) return *fallback;
        throw SchemaError("missing numeric key: " + key);
    }
    if (!j.at(key).is_number()) throw SchemaError("key must be numeric: " + key);
    return j.at(key).get<double>();
}

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    unsigned threads = 1;
    bool quick = false;
};

std::uint64_t resolve_seed(const CommonArgs& args, const json& cfg) {
    if (args.seed) return *args.seed;
    if (cfg.count("seed")) return cfg.at("seed").get<std::uint64_t>();
    throw SchemaError("a seed is required (pass --seed or a `seed` config key)");
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const json& resolved,
                    std::uint64_t seed) {
    json m;
    m["artifact_version"] = kArtifactVersion;
    m["subcommand"] = subcommand;
    m["seed"] = seed;
    m["config"] = resolved;
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << "\n";
}

StepFunction bank_entry_from_json(const json& fn) {
    std::vector<StepFunction::Step> steps;
    for (const auto& st : fn) steps.push_back({st.at("c").get<double>(), st.at("b").get<double>()});
    return StepFunction(std::move(steps));
}

int cmd_simulate(const CommonArgs& args) {
    json cfg = load_config(args.config_path);
    require_keys(cfg,
                 {"start", "config_file", "t", "drift_on", "barrier_depth", "sweeps", "seed",
                  "replicas", "allow_long", "keep_above"},
                 {"t", "replicas"});
    if (cfg.count("start") == cfg.count("config_file")) {
        throw SchemaError("exactly one of `start` / `config_file` is required");
    }
    const std::uint64_t seed = resolve_seed(args, cfg);
    BbmParams params;
    params.t = num(cfg, "t");
    params.drift_on = cfg.value("drift_on", true);
    params.barrier_depth = num(cfg, "barrier_depth", 10.0);
    params.sweep_dt = num(cfg, "sweeps", 0.25);
    params.allow_long = cfg.value("allow_long", false);
    const auto replicas = static_cast<std::uint64_t>(num(cfg, "replicas"));

    std::optional<PointConfig> initial;
    if (cfg.count("config_file")) {
        initial = read_config_csv(cfg.at("config_file").get<std::string>());
    }

    fs::create_directories(args.out_dir);
    std::ofstream csv(fs::path(args.out_dir) / "runs.csv");
    csv << "seed,t,count,max_shifted,Z_t,pruned\n";
    for (std::uint64_t i = 0; i < replicas; ++i) {
        const std::uint64_t s = mix_seed(seed, i);
        if (initial) {
            EvolveOptions opts;
            opts.bbm = params;
            if (cfg.count("keep_above")) opts.keep_above = num(cfg, "keep_above");
            const PointConfig out = evolve_config(*initial, opts, s);
            double z = 0.0;
            for (double x : out.atoms) z += -x * std::exp(kSqrt2 * x);
            csv << s << ',' << format_double(params.t) << ',' << out.size() << ','
                << format_double(out.empty() ? 0.0 : out.max_atom()) << ',' << format_double(z)
                << ",0\n";
        } else {
            const BbmSummary sum = evolve_single(num(cfg, "start"), params, s);
            csv << s << ',' << format_double(params.t) << ',' << sum.count << ','
                << format_double(sum.max_shifted) << ','
                << format_double(sum.derivative_martingale) << ',' << sum.pruned_count << "\n";
        }
    }
    write_manifest(args.out_dir, "simulate", cfg, seed);
    return 0;
}

int cmd_fkpp(const CommonArgs& args) {
    json cfg = load_config(args.config_path);
    require_keys(cfg,
                 {"initial", "T", "times", "grid", "wave_at", "estimate_cm", "cf_r_schedule",
                  "seed"},
                 {"initial"});
    const std::uint64_t seed = args.seed.value_or(cfg.value("seed", 0ULL));

    FkppInitial initial;
    if (cfg.at("initial").is_string() && cfg.at("initial") == "step") {
        initial = FkppInitial::step();
    } else if (cfg.at("initial").is_array()) {
        initial = FkppInitial::from_f(bank_entry_from_json(cfg.at("initial")));
    } else {
        throw SchemaError("initial must be \"step\" or an array of {c,b} steps");
    }

    FkppGrid grid;
    if (cfg.count("grid")) {
        const json& g = cfg.at("grid");
        require_keys(g, {"y_min", "y_max", "h", "dt"}, {});
        grid.y_min = num(g, "y_min", grid.y_min);
        grid.y_max = num(g, "y_max", grid.y_max);
        grid.h = num(g, "h", grid.h);
        grid.dt = num(g, "dt", grid.dt);
    }

    std::vector<double> times;
    if (cfg.count("times")) {
        for (const auto& t : cfg.at("times")) times.push_back(t.get<double>());
    }
    if (cfg.count("T")) times.push_back(num(cfg, "T"));
    if (times.empty()) throw SchemaError("need `T` or `times`");

    const double wave_at = num(cfg, "wave_at", times.back());
    if (std::find(times.begin(), times.end(), wave_at) == times.end()) times.push_back(wave_at);
    std::vector<double> schedule;
    if (cfg.count("cf_r_schedule")) {
        for (const auto& r : cfg.at("cf_r_schedule")) {
            schedule.push_back(r.get<double>());
            if (std::find(times.begin(), times.end(), schedule.back()) == times.end()) {
                times.push_back(schedule.back());
            }
        }
    }

    const FkppField field = solve_fkpp(initial, times, grid);
    fs::create_directories(args.out_dir);
    for (double t : field.times()) {
        std::ostringstream name;
        name << "field_t" << t << ".csv";
        write_field_csv(fs::path(args.out_dir) / name.str(), field, t);
    }

    json report;
    report["grid"] = {{"y_min", grid.y_min}, {"y_max", grid.y_max}, {"h", grid.h}, {"dt", grid.dt}};
    if (wave_at >= 8.0) {
        const WaveEstimate w = wave_profile(field, wave_at);
        std::ofstream wcsv(fs::path(args.out_dir) / "wave.csv");
        wcsv << "x,omega\n";
        for (std::size_t i = 0; i < w.profile.size(); ++i) {
            wcsv << format_double(w.x_min + w.h * static_cast<double>(i)) << ','
                 << format_double(w.profile[i]) << "\n";
        }
        report["wave"] = {{"t", wave_at},
                          {"residual_norm", w.residual_norm},
                          {"recentering", w.recentering}};
        if (cfg.value("estimate_cm", false)) {
            const CmEstimate cm = estimate_CM_from_profile(w, wave_at);
            report["C_M"] = {{"value", cm.value}, {"flatness", cm.flatness}, {"t", cm.t_used}};
            if (cm.flatness > 1.25) report["C_M"]["unconverged_flag"] = true;
        }
    }
    if (!schedule.empty()) {
        const CfEstimate cf = estimate_Cf_from_field(field, schedule);
        json per_r = json::array();
        for (const auto& [r, v] : cf.per_r) per_r.push_back({{"r", r}, {"value", v}});
        report["C_f"] = {{"value", cf.value},
                         {"per_r", per_r},
                         {"converged", cf.converged},
                         {"tail_report", cf.tail_report}};
    }
    std::ofstream rep(fs::path(args.out_dir) / "report.json");
    rep << report.dump(2) << "\n";
    write_manifest(args.out_dir, "fkpp", cfg, seed);
    return 0;
}

int cmd_sample_extremal(const CommonArgs& args) {
    json cfg = load_config(args.config_path);
    require_keys(cfg,
                 {"mode", "t_dec", "delta", "K", "depth_cap", "max_attempts", "window_floor",
                  "direct_floor", "pool", "replicas", "seed"},
                 {"mode", "replicas"});
    const std::uint64_t seed = resolve_seed(args, cfg);
    const std::string mode = cfg.at("mode").get<std::string>();
    const auto replicas = static_cast<std::uint64_t>(num(cfg, "replicas"));

    DecorationParams dp;
    dp.t_dec = num(cfg, "t_dec", dp.t_dec);
    dp.delta = num(cfg, "delta", dp.delta);
    dp.K = num(cfg, "K", dp.K);
    dp.depth_cap = num(cfg, "depth_cap", dp.depth_cap);
    dp.max_attempts = static_cast<int>(num(cfg, "max_attempts", dp.max_attempts));

    fs::create_directories(args.out_dir);
    json manifest_extra;
    manifest_extra["t_dec"] = dp.t_dec;
    manifest_extra["K"] = dp.K;
    manifest_extra["delta"] = dp.delta;

    if (mode == "decoration") {
        double acc = 0.0;
        for (std::uint64_t i = 0; i < replicas; ++i) {
            const DecorationSample d = sample_decoration(dp, mix_seed(seed, i));
            acc += d.acceptance_rate;
            std::ostringstream name;
            name << "decoration_" << i << ".csv";
            write_config_csv(fs::path(args.out_dir) / name.str(), d.config);
        }
        manifest_extra["acceptance_rate"] = acc / static_cast<double>(replicas);
    } else if (mode == "bar_e") {
        BarEParams bp;
        bp.window_floor = num(cfg, "window_floor", bp.window_floor);
        bp.direct_floor = num(cfg, "direct_floor", bp.direct_floor);
        bp.dec = dp;
        const auto pool_size = static_cast<std::size_t>(num(cfg, "pool", 400.0));
        std::unique_ptr<DecorationPool> pool;
        if (pool_size > 0) {
            pool = std::make_unique<DecorationPool>(
                DecorationPool::build(dp, pool_size, mix_seed(seed, 0x900Cu)));
            manifest_extra["acceptance_rate"] = pool->mean_acceptance();
            manifest_extra["pool"] = pool_size;
        }
        manifest_extra["L"] = bp.window_floor;
        for (std::uint64_t i = 0; i < replicas; ++i) {
            const FixedPointSample s = sample_bar_e(bp, pool.get(), mix_seed(seed, i));
            std::ostringstream name;
            name << "bar_e_" << i << ".csv";
            write_config_csv(fs::path(args.out_dir) / name.str(), s.config);
        }
    } else {
        throw SchemaError("mode must be \"decoration\" or \"bar_e\"");
    }
    json resolved = cfg;
    resolved["resolved"] = manifest_extra;
    write_manifest(args.out_dir, "sample-extremal", resolved, seed);
    return 0;
}

int cmd_invariance(const CommonArgs& args) {
    json cfg = load_config(args.config_path);
    require_keys(cfg,
                 {"sampler", "t", "bank", "n", "seed", "window_floor", "pool", "keep_above",
                  "z_threshold"},
                 {"sampler", "t", "n"});
    const std::uint64_t seed = resolve_seed(args, cfg);
    const double t = num(cfg, "t");
    const auto n = static_cast<std::uint64_t>(num(cfg, "n"));

    std::vector<StepFunction> bank;
    if (!cfg.count("bank") || cfg.at("bank") == "default") {
        bank = default_bank();
    } else {
        bank = bank_from_json(cfg.at("bank"));
    }

    EvolveOptions ev;
    ev.bbm.t = t;
    ev.keep_above = num(cfg, "keep_above", -6.0);

    InvarianceReport rep;
    const std::string sampler_id = cfg.at("sampler").get<std::string>();
    if (sampler_id == "bar_e") {
        DecorationParams dp;
        const auto pool_size = static_cast<std::size_t>(num(cfg, "pool", 400.0));
        const DecorationPool pool =
            DecorationPool::build(dp, pool_size, mix_seed(seed, 0x900Cu));
        BarEParams bp;
        bp.window_floor = num(cfg, "window_floor", -8.0);
        bp.direct_floor = bp.window_floor;
        BarEParams b0 = bp, b1 = bp;
        b0.pool_half = 0;
        b1.pool_half = 1;
        ConfigSampler s0 = [&pool, b0](std::uint64_t s) { return sample_bar_e(b0, &pool, s).config; };
        ConfigSampler s1 = [&pool, b1](std::uint64_t s) { return sample_bar_e(b1, &pool, s).config; };
        rep = invariance_test_two(s0, s1, t, bank, n, seed, ev,
                                  num(cfg, "z_threshold", 3.0), args.threads);
    } else if (sampler_id == "point") {
        ConfigSampler s = [](std::uint64_t) { return PointConfig::from_atoms({0.0}); };
        rep = invariance_test(s, t, bank, n, seed, ev, num(cfg, "z_threshold", 3.0),
                              args.threads);
    } else if (sampler_id == "ppp_exp") {
        ConfigSampler s = [](std::uint64_t sd) {
            return sample_ppp(
                IntensityDescriptor::exponential_intensity(kSqrt2, kSqrt2, -8.0, 8.0), sd);
        };
        rep = invariance_test(s, t, bank, n, seed, ev, num(cfg, "z_threshold", 3.0),
                              args.threads);
    } else {
        throw SchemaError("sampler must be one of bar_e, point, ppp_exp");
    }

    fs::create_directories(args.out_dir);
    std::ofstream jout(fs::path(args.out_dir) / "invariance.json");
    jout << invariance_report_to_json(rep).dump(2) << "\n";
    write_invariance_csv(fs::path(args.out_dir) / "invariance.csv", rep);
    write_manifest(args.out_dir, "invariance", cfg, seed);
    return 0;
}

int cmd_basin(const CommonArgs& args) {
    json cfg = load_config(args.config_path);
    require_keys(cfg, {"family", "lambda", "t_grid", "window", "n", "seed", "barrier_depth"},
                 {"family", "t_grid", "window", "n"});
    const std::uint64_t seed = resolve_seed(args, cfg);
    const std::string fam_id = cfg.at("family").get<std::string>();
    BasinFamily family;
    if (fam_id == "lattice") {
        family = BasinFamily::lattice;
    } else if (fam_id == "uniform_ppp") {
        family = BasinFamily::uniform_ppp;
    } else if (fam_id == "exp_ppp") {
        family = BasinFamily::exp_ppp;
    } else {
        throw SchemaError("family must be lattice, uniform_ppp or exp_ppp");
    }
    std::vector<double> t_grid;
    for (const auto& t : cfg.at("t_grid")) t_grid.push_back(t.get<double>());
    const auto& w = cfg.at("window");
    if (!w.is_array() || w.size() != 2) throw SchemaError("window must be [lo, hi]");

    BbmParams engine;
    engine.barrier_depth = num(cfg, "barrier_depth", 10.0);
    const DecayTable table =
        basin_run(family, num(cfg, "lambda", 1.0), t_grid, w[0].get<double>(),
                  w[1].get<double>(), static_cast<std::uint64_t>(num(cfg, "n")), seed, engine);
    fs::create_directories(args.out_dir);
    write_decay_csv(fs::path(args.out_dir) / "decay.csv", table);
    write_manifest(args.out_dir, "basin", cfg, seed);
    return 0;
}

int cmd_verify(const CommonArgs& args) {
    json cfg = args.config_path.empty() ? json::object() : load_config(args.config_path);
    require_keys(cfg, {"criteria", "seed"}, {});
    AcceptanceOptions opts;
    opts.quick = args.quick;
    opts.threads = args.threads;
    if (args.seed) opts.seed = *args.seed;
    if (cfg.count("criteria")) {
        for (const auto& c : cfg.at("criteria")) opts.only.push_back(c.get<int>());
    }
    AcceptanceContext ctx(opts);
    const std::vector<CriterionResult> results = run_acceptance(ctx, std::cout);

    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        json j = json::array();
        for (const auto& r : results) {
            j.push_back({{"id", r.id},
                         {"name", r.name},
                         {"pass", r.pass},
                         {"detail", r.detail},
                         {"seconds", r.seconds}});
        }
        std::ofstream out(fs::path(args.out_dir) / "verify.json");
        out << j.dump(2) << "\n";
        write_manifest(args.out_dir, "verify", cfg, opts.seed);
    }
    for (const auto& r : results) {
        if (!r.pass) {
            std::cerr << "verify: criterion " << r.id << " (" << r.name << ") failed\n";
            return 1;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bbmlab: branching Brownian motion fixed-point laboratory"};
    app.require_subcommand(1);

    CommonArgs args;
    app.add_option("--config", args.config_path, "JSON experiment config");
    app.add_option("--seed", args.seed, "seed (overrides config)");
    app.add_option("--out", args.out_dir, "output directory");
    app.add_option("--threads", args.threads, "worker thread cap");
    app.add_flag("--quick", args.quick, "reduced replica counts");

    auto* simulate = app.add_subcommand("simulate", "run the BBM engine");
    auto* fkpp = app.add_subcommand("fkpp", "solve the FKPP equation and derived estimates");
    auto* sample = app.add_subcommand("sample-extremal", "sample decorations / bar E_infty");
    auto* invariance = app.add_subcommand("invariance", "Laplace-functional invariance test");
    auto* basin = app.add_subcommand("basin", "window-count decay along the flow");
    auto* verify = app.add_subcommand("verify", "run the acceptance suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(args);
        if (fkpp->parsed()) return cmd_fkpp(args);
        if (sample->parsed()) return cmd_sample_extremal(args);
        if (invariance->parsed()) return cmd_invariance(args);
        if (basin->parsed()) return cmd_basin(args);
        if (verify->parsed()) return cmd_verify(args);
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const HorizonError& e) {
        std::cerr << "resource cap: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
