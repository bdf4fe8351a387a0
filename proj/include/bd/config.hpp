#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "bd/errors.hpp"
#include "bd/io.hpp"

namespace bd {

// Allowed configuration schema: section -> keys. Unknown keys anywhere are a
// validation error listing the offenders.
inline const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"", {"experiment", "model", "z", "rho", "solve_tol", "integrator", "pair",
              "perturbation", "interp", "dissipativity", "spectrum", "decay", "duhamel", "out",
              "seed", "threads", "snapshots"}},
        {"model", {"kind", "alpha", "mu", "q", "zs", "a", "b", "N"}},
        {"integrator",
         {"method", "rtol", "atol", "dt_init", "dt_max", "t_end", "checkpoints",
          "checkpoint_spacing", "stability_fraction"}},
        {"pair", {"k", "m"}},
        {"perturbation", {"p", "pattern", "amplitude", "profile", "pivot", "seed"}},
        {"interp",
         {"eta", "r", "s_lo", "s_hi", "s_points", "quad_tol", "kexact_samples", "N_samples"}},
        {"dissipativity", {"k_list", "g_max", "g_steps", "samples", "ntilde"}},
        {"spectrum", {"g_max", "g_steps", "k_list", "samples"}},
        {"decay",
         {"t_end", "t_points", "t_min", "fit_lo", "route", "duhamel_check", "checkpoint_dt",
          "lyapunov_scan", "rtol"}},
        {"duhamel", {"t_end", "checkpoint_dt", "t_points", "halvings"}},
    };
    return schema;
}

inline void validate_config_keys(const json& cfg) {
    std::vector<std::string> unknown;
    const auto& schema = config_schema();
    auto check_level = [&](const json& obj, const std::string& section) {
        const auto it = schema.find(section);
        if (it == schema.end()) return;
        for (const auto& [key, value] : obj.items()) {
            if (!it->second.count(key)) {
                unknown.push_back(section.empty() ? key : section + "." + key);
            }
        }
    };
    if (!cfg.is_object()) throw ValidationError("config root must be a JSON object");
    check_level(cfg, "");
    for (const auto& [key, value] : cfg.items()) {
        if (value.is_object()) check_level(value, key);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ValidationError(msg);
    }
}

// Apply "--override a.b=value" pairs; values parse as JSON scalars when they
// can, strings otherwise.
inline void apply_override(json& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ValidationError("override must look like key=value: " + spec);
    const std::string path = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (...) {
        value = raw;
    }
    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ValidationError("bad override path: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &((*node)[key]);
        start = dot + 1;
    }
}

// Typed reader that records every value it resolves, defaults included, so
// reports can embed the full effective configuration.
class ConfigReader {
public:
    explicit ConfigReader(json cfg) : cfg_(std::move(cfg)) { validate_config_keys(cfg_); }

    template <typename T>
    T get(const std::string& section, const std::string& key, T def) {
        const json* node = locate(section, key);
        T out = def;
        if (node != nullptr) {
            try {
                out = node->get<T>();
            } catch (...) {
                throw ValidationError("config key " + dotted(section, key) + " has the wrong type");
            }
        }
        record(section, key, json(out));
        return out;
    }

    template <typename T>
    T require(const std::string& section, const std::string& key) {
        const json* node = locate(section, key);
        if (node == nullptr)
            throw ValidationError("missing required config key " + dotted(section, key));
        T out;
        try {
            out = node->get<T>();
        } catch (...) {
            throw ValidationError("config key " + dotted(section, key) + " has the wrong type");
        }
        record(section, key, json(out));
        return out;
    }

    [[nodiscard]] bool has(const std::string& section, const std::string& key) const {
        return locate(section, key) != nullptr;
    }

    void record(const std::string& section, const std::string& key, json value) {
        if (section.empty()) {
            resolved_[key] = std::move(value);
        } else {
            resolved_[section][key] = std::move(value);
        }
    }

    [[nodiscard]] const json& raw() const { return cfg_; }
    [[nodiscard]] const json& resolved() const { return resolved_; }

private:
    [[nodiscard]] const json* locate(const std::string& section, const std::string& key) const {
        const json* node = &cfg_;
        if (!section.empty()) {
            if (!cfg_.contains(section)) return nullptr;
            node = &cfg_.at(section);
        }
        if (!node->contains(key)) return nullptr;
        return &node->at(key);
    }

    static std::string dotted(const std::string& section, const std::string& key) {
        return section.empty() ? key : section + "." + key;
    }

    json cfg_;
    json resolved_;
};

}  // namespace bd
