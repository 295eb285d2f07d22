#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbmlab/extremal.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/invariance.hpp"
#include "bbmlab/point_config.hpp"

namespace bbmlab {

inline constexpr const char* kArtifactVersion = "bbmlab 0.1.0";

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// PointConfig CSV: header `x`, one atom per row.
inline void write_config_csv(const std::filesystem::path& path, const PointConfig& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "x\n";
    for (double x : c.atoms) out << format_double(x) << "\n";
}

inline PointConfig read_config_csv(const std::filesystem::path& path,
                                   std::optional<double> floor = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "x") {
        throw std::runtime_error("config csv: missing `x` header in " + path.string());
    }
    std::vector<double> atoms;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        atoms.push_back(std::stod(line));
    }
    return PointConfig::from_atoms(std::move(atoms), floor);
}

inline nlohmann::json config_sidecar(const PointConfig& c, std::uint64_t seed,
                                     const std::string& sampler) {
    nlohmann::json j;
    if (c.truncation_floor) {
        j["floor"] = *c.truncation_floor;
    } else {
        j["floor"] = "none";
    }
    j["seed"] = seed;
    j["sampler"] = sampler;
    return j;
}

// Step-function banks load from a JSON array of {c, b} pair lists.
inline std::vector<StepFunction> bank_from_json(const nlohmann::json& j) {
    std::vector<StepFunction> bank;
    for (const auto& fn : j) {
        std::vector<StepFunction::Step> steps;
        for (const auto& st : fn) {
            steps.push_back({st.at("c").get<double>(), st.at("b").get<double>()});
        }
        bank.push_back(StepFunction(std::move(steps)));
    }
    return bank;
}

inline nlohmann::json bank_to_json(const std::vector<StepFunction>& bank) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& f : bank) {
        nlohmann::json fn = nlohmann::json::array();
        for (const auto& s : f.steps) fn.push_back({{"c", s.weight}, {"b", s.threshold}});
        j.push_back(fn);
    }
    return j;
}

inline nlohmann::json mc_to_json(const McEstimate& e) {
    return {{"replicas", e.replicas},
            {"mean", e.mean},
            {"std_error", e.std_error},
            {"seed_base", e.seed_base}};
}

inline nlohmann::json invariance_report_to_json(const InvarianceReport& rep) {
    nlohmann::json j;
    j["t"] = rep.t;
    j["replicas"] = rep.replicas;
    j["z_threshold"] = rep.z_threshold;
    j["pass_fraction"] = rep.pass_fraction;
    j["per_function"] = nlohmann::json::array();
    for (const auto& r : rep.per_function) {
        j["per_function"].push_back({{"f_id", r.f_id},
                                     {"laplace_t0", mc_to_json(r.laplace_t0)},
                                     {"laplace_t", mc_to_json(r.laplace_t)},
                                     {"z", r.z_score},
                                     {"pass", r.pass}});
    }
    return j;
}

inline void write_invariance_csv(const std::filesystem::path& path,
                                 const InvarianceReport& rep) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "f_id,t,mean0,se0,meanT,seT,z\n";
    for (const auto& r : rep.per_function) {
        out << r.f_id << ',' << format_double(rep.t) << ',' << format_double(r.laplace_t0.mean)
            << ',' << format_double(r.laplace_t0.std_error) << ','
            << format_double(r.laplace_t.mean) << ',' << format_double(r.laplace_t.std_error)
            << ',' << format_double(r.z_score) << "\n";
    }
}

inline void write_decay_csv(const std::filesystem::path& path, const DecayTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "t,mean,se\n";
    for (const auto& row : table.rows) {
        out << format_double(row.t) << ',' << format_double(row.window_count.mean) << ','
            << format_double(row.window_count.std_error) << "\n";
    }
}

inline void write_field_csv(const std::filesystem::path& path, const FkppField& field,
                            double t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "y,u\n";
    const auto& row = field.at_time(t);
    const auto& g = field.grid();
    for (std::size_t i = 0; i < row.size(); ++i) {
        out << format_double(g.y_min + g.h * static_cast<double>(i)) << ','
            << format_double(row[i]) << "\n";
    }
}

}  // namespace bbmlab
