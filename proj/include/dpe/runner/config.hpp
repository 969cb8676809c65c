#pragma once

// Experiment configuration: a sectioned key=value file.
//
// The file is read with Boost.PropertyTree's INI reader and flattened into one
// ordered map per section. Every key is checked against the schema below and
// unknown keys are reported together in a single ConfigError.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/error.hpp"
#include "dpe/io.hpp"

namespace dpe::runner {

using Section = std::map<std::string, std::string>;

/// Raw configuration: section name -> (key -> value). Keys outside any
/// section live in the section named "".
class RawConfig {
public:
    RawConfig() = default;
    explicit RawConfig(std::map<std::string, Section> s) : sections_(std::move(s)) {}

    bool has(const std::string& section, const std::string& key) const {
        const auto it = sections_.find(section);
        return it != sections_.end() && it->second.count(key) > 0;
    }

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        const auto it = sections_.find(section);
        if (it == sections_.end()) return std::nullopt;
        const auto kt = it->second.find(key);
        if (kt == it->second.end()) return std::nullopt;
        return kt->second;
    }

    void set(const std::string& section, const std::string& key, std::string value) {
        sections_[section][key] = std::move(value);
    }

    const std::map<std::string, Section>& sections() const noexcept { return sections_; }

    /// Canonical text form: top-level keys first, then sections in name
    /// order, keys sorted. Re-reading the echo gives the same configuration.
    std::string echo() const {
        std::ostringstream os;
        if (const auto top = sections_.find(""); top != sections_.end())
            for (const auto& [k, v] : top->second) os << k << " = " << v << '\n';
        for (const auto& [name, sec] : sections_) {
            if (name.empty()) continue;
            os << '\n' << '[' << name << "]\n";
            for (const auto& [k, v] : sec) os << k << " = " << v << '\n';
        }
        return os.str();
    }

private:
    std::map<std::string, Section> sections_;
};

/// Parses INI text. Lines starting with '#' or ';' are comments.
inline RawConfig parse_ini(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream in(text);
    std::ostringstream cleaned;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = io::trim(line);
        if (!t.empty() && t.front() == '#') {
            cleaned << '\n'; // keep line numbers stable for parser messages
            continue;
        }
        cleaned << line << '\n';
    }
    boost::property_tree::ptree tree;
    try {
        std::istringstream src(cleaned.str());
        boost::property_tree::ini_parser::read_ini(src, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
    }
    std::map<std::string, Section> sections;
    for (const auto& [name, child] : tree) {
        if (child.empty()) {
            sections[""][name] = io::trim(child.data());
            continue;
        }
        auto& sec = sections[name];
        for (const auto& [key, leaf] : child) {
            if (!leaf.empty()) throw ConfigError(origin + ": nested entries are not supported in [" + name + "]");
            sec[key] = io::trim(leaf.data());
        }
    }
    return RawConfig(std::move(sections));
}

inline RawConfig read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_ini(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Typed accessors

inline double to_double(const std::string& v, const std::string& where) {
    try {
        return io::parse_double(v, where);
    } catch (const StructuralError& e) {
        throw ConfigError(e.what());
    }
}

inline std::vector<double> to_doubles(const std::string& v, const std::string& where) {
    try {
        return io::parse_double_list(v, where);
    } catch (const StructuralError& e) {
        throw ConfigError(e.what());
    }
}

inline std::size_t to_count(const std::string& v, const std::string& where) {
    const double x = to_double(v, where);
    if (!(x >= 0.0) || x != static_cast<double>(static_cast<long long>(x)))
        throw ConfigError(where + " must be a nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

inline bool to_bool(const std::string& v, const std::string& where) {
    std::string s = io::trim(v);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw ConfigError(where + " must be a boolean, got '" + v + "'");
}

/// Section-scoped reader that records which keys were consumed.
class SectionReader {
public:
    SectionReader(const RawConfig& cfg, std::string section) : cfg_(&cfg), section_(std::move(section)) {}

    std::string where(const std::string& key) const {
        return section_.empty() ? key : "[" + section_ + "] " + key;
    }

    bool has(const std::string& key) const { return cfg_->has(section_, key); }

    std::string str(const std::string& key, const std::string& fallback) const {
        return cfg_->get(section_, key).value_or(fallback);
    }
    std::string required(const std::string& key) const {
        const auto v = cfg_->get(section_, key);
        if (!v) throw ConfigError("missing required key " + where(key));
        return *v;
    }
    double num(const std::string& key, double fallback) const {
        const auto v = cfg_->get(section_, key);
        return v ? to_double(*v, where(key)) : fallback;
    }
    double num(const std::string& key) const { return to_double(required(key), where(key)); }
    std::vector<double> list(const std::string& key, std::vector<double> fallback = {}) const {
        const auto v = cfg_->get(section_, key);
        return v ? to_doubles(*v, where(key)) : fallback;
    }
    std::size_t count(const std::string& key, std::size_t fallback) const {
        const auto v = cfg_->get(section_, key);
        return v ? to_count(*v, where(key)) : fallback;
    }
    std::size_t count(const std::string& key) const { return to_count(required(key), where(key)); }
    bool flag(const std::string& key, bool fallback) const {
        const auto v = cfg_->get(section_, key);
        return v ? to_bool(*v, where(key)) : fallback;
    }

private:
    const RawConfig* cfg_;
    std::string section_;
};

// ---------------------------------------------------------------------------
// Schema

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"oracle", "boltzmann", "fragmentation", "lifted_checks",
                                            "shattering_sweep"};
    return k;
}

inline std::set<std::string> model_keys(const std::string& kind) {
    if (kind == "oracle") return {"kind", "weights", "decay", "matrix"};
    if (kind == "boltzmann")
        return {"kind",         "grid.kind",      "grid.min",       "grid.max",      "grid.n",
                "sigma.kind",   "sigma.params",   "sigma.space",    "sigma.space_params",
                "kernel.kind",  "kernel.params",  "kernel.profile", "kernel.profile_params",
                "kernel.profile2", "kernel.profile2_params", "kernel.time", "kernel.time_params",
                "strict_subcritical"};
    if (kind == "fragmentation")
        return {"kind",        "grid.kind",     "grid.xmin",       "grid.xmax", "grid.n",
                "rate.kind",   "rate.params",   "daughter.kind",   "daughter.params", "strict_kernel"};
    throw ConfigError("unknown model kind '" + kind + "' (expected oracle, boltzmann or fragmentation)");
}

/// Model kind implied by the experiment; lifted checks choose via [model] kind.
inline std::string model_kind_of(const RawConfig& cfg, const std::string& experiment) {
    if (experiment == "oracle" || experiment == "boltzmann" || experiment == "fragmentation") {
        const auto k = cfg.get("model", "kind");
        if (k && *k != experiment)
            throw ConfigError("[model] kind = " + *k + " contradicts experiment = " + experiment);
        return experiment;
    }
    if (experiment == "lifted_checks") return cfg.get("model", "kind").value_or("oracle");
    return "";
}

inline std::set<std::string> section_keys(const std::string& section, const std::string& experiment,
                                          const RawConfig& cfg) {
    if (section.empty()) return {"experiment"};
    if (section == "engine") return {"s", "t_end", "dt", "n_max", "series_tol", "rule", "left_check", "duhamel_check"};
    if (section == "honesty") return {"threshold", "persistence", "basis_sweep", "basis_stride"};
    if (section == "output") return {"directory", "emit_svg", "iterates"};
    if (section == "initial_data") return {"kind", "node", "temperature", "path"};
    if (section == "model") {
        const auto kind = model_kind_of(cfg, experiment);
        if (kind.empty()) return {};
        return model_keys(kind);
    }
    if (section == "lifted") return {"t_max", "h", "lambda", "lambda_factor", "laplace_n_max", "series_terms", "bump_end"};
    if (section == "shattering") return {"alpha", "c", "x_max", "levels"};
    if (section == "sweep") return {"parameter", "values"};
    return {};
}

inline const std::vector<std::string>& known_sections() {
    static const std::vector<std::string> s{"",      "engine", "honesty", "output",    "initial_data",
                                            "model", "lifted", "shattering", "sweep"};
    return s;
}

/// Throws ConfigError listing every unknown section and key.
inline void validate_schema(const RawConfig& cfg) {
    const auto exp = cfg.get("", "experiment");
    if (!exp) throw ConfigError("missing required key experiment");
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), *exp) == kinds.end())
        throw ConfigError("unknown experiment '" + *exp +
                          "' (expected oracle, boltzmann, fragmentation, lifted_checks or shattering_sweep)");
    std::vector<std::string> unknown;
    for (const auto& [name, sec] : cfg.sections()) {
        const auto& ks = known_sections();
        if (std::find(ks.begin(), ks.end(), name) == ks.end()) {
            unknown.push_back("[" + name + "]");
            continue;
        }
        const auto allowed = section_keys(name, *exp, cfg);
        for (const auto& [key, value] : sec)
            if (!allowed.count(key)) unknown.push_back(name.empty() ? key : "[" + name + "] " + key);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown configuration keys:";
        for (const auto& u : unknown) msg += " " + u;
        throw ConfigError(msg);
    }
}

} // namespace dpe::runner
