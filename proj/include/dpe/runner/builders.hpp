#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "dpe/boltzmann.hpp"
#include "dpe/fragmentation.hpp"
#include "dpe/honesty.hpp"
#include "dpe/oracle_model.hpp"
#include "dpe/profiles.hpp"
#include "dpe/runner/config.hpp"
#include "dpe/time_grid.hpp"

namespace dpe::runner {

struct EngineSettings {
    double s = 0.0;
    double t_end = 1.0;
    double dt = 1e-2;
    std::size_t n_max = 20;
    double series_tol = EngineDefaults::series_tol;
    QuadratureRule rule = QuadratureRule::trapezoid;
    bool left_check = false;
    bool duhamel_check = true;

    TimeGrid time_grid() const { return TimeGrid(s, t_end, dt, rule); }
};

inline EngineSettings read_engine(const RawConfig& cfg) {
    const SectionReader r(cfg, "engine");
    EngineSettings e;
    e.s = r.num("s", e.s);
    e.t_end = r.num("t_end", e.t_end);
    e.dt = r.num("dt", e.dt);
    e.n_max = r.count("n_max", e.n_max);
    e.series_tol = r.num("series_tol", e.series_tol);
    const auto rule = r.str("rule", "trapezoid");
    if (rule == "trapezoid") e.rule = QuadratureRule::trapezoid;
    else if (rule == "midpoint") e.rule = QuadratureRule::midpoint;
    else throw ConfigError("[engine] rule must be trapezoid or midpoint, got '" + rule + "'");
    e.left_check = r.flag("left_check", e.left_check);
    e.duhamel_check = r.flag("duhamel_check", e.duhamel_check);
    if (!(e.dt > 0.0)) throw ConfigError("[engine] dt must be positive");
    if (!(e.t_end > e.s)) throw ConfigError("[engine] t_end must exceed s");
    if (e.n_max < 3) throw ConfigError("[engine] n_max must be at least 3");
    if (!(e.series_tol > 0.0)) throw ConfigError("[engine] series_tol must be positive");
    return e;
}

struct HonestySettings {
    HonestyOptions options;
    bool basis_sweep = false;
    std::size_t basis_stride = 1;
};

inline HonestySettings read_honesty(const RawConfig& cfg) {
    const SectionReader r(cfg, "honesty");
    HonestySettings h;
    h.options.threshold = r.num("threshold", h.options.threshold);
    h.options.persistence = r.count("persistence", h.options.persistence);
    h.basis_sweep = r.flag("basis_sweep", false);
    h.basis_stride = r.count("basis_stride", 1);
    if (!(h.options.threshold > 0.0)) throw ConfigError("[honesty] threshold must be positive");
    if (h.options.persistence < 1) throw ConfigError("[honesty] persistence must be at least 1");
    if (h.basis_stride < 1) throw ConfigError("[honesty] basis_stride must be at least 1");
    return h;
}

struct OutputSettings {
    std::string directory = "out";
    bool emit_svg = false;
    bool iterates = false;
};

inline OutputSettings read_output(const RawConfig& cfg) {
    const SectionReader r(cfg, "output");
    OutputSettings o;
    o.directory = r.str("directory", o.directory);
    o.emit_svg = r.flag("emit_svg", false);
    o.iterates = r.flag("iterates", false);
    return o;
}

// ---------------------------------------------------------------------------
// Profiles by name

inline TimeProfile time_profile(const std::string& kind, const std::vector<double>& p, const std::string& where) {
    auto need = [&](std::size_t n) {
        if (p.size() != n)
            throw ConfigError(where + ": time profile '" + kind + "' takes " + std::to_string(n) + " parameters, got " +
                              std::to_string(p.size()));
    };
    if (kind == "constant") return need(1), TimeProfile::constant(p[0]);
    if (kind == "affine") return need(2), TimeProfile::affine(p[0], p[1]);
    if (kind == "power") return need(2), TimeProfile::power(p[0], p[1]);
    if (kind == "exp_decay") return need(2), TimeProfile::exp_decay(p[0], p[1]);
    if (kind == "table") {
        // t0, k0, t1, k1, ...
        if (p.size() < 2 || p.size() % 2 != 0) throw ConfigError(where + ": table profile needs (time, value) pairs");
        std::vector<double> t, v;
        for (std::size_t i = 0; i < p.size(); i += 2) {
            t.push_back(p[i]);
            v.push_back(p[i + 1]);
        }
        return TimeProfile::table(std::move(t), std::move(v));
    }
    throw ConfigError(where + ": unknown time profile '" + kind + "'");
}

inline SpaceProfile space_profile(const std::string& kind, const std::vector<double>& p, const std::string& where) {
    auto need = [&](std::size_t n) {
        if (p.size() != n)
            throw ConfigError(where + ": space profile '" + kind + "' takes " + std::to_string(n) + " parameters, got " +
                              std::to_string(p.size()));
    };
    if (kind == "constant") return need(1), SpaceProfile::constant(p[0]);
    if (kind == "abs_power") return need(2), SpaceProfile::abs_power(p[0], p[1]);
    if (kind == "maxwellian") return need(1), SpaceProfile::maxwellian(p[0]);
    if (kind == "linear") return need(2), SpaceProfile::linear(p[0], p[1]);
    if (kind == "table") return SpaceProfile::table(p);
    throw ConfigError(where + ": unknown space profile '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Models

using AnyModel = std::variant<ConstantMatrixModel, CollisionModel, FragmentationModel>;

inline ConstantMatrixModel build_oracle(const RawConfig& cfg) {
    const SectionReader r(cfg, "model");
    const auto weights = r.list("weights", {1.0, 1.0});
    const double decay = r.num("decay", 1.0);
    const auto matrix = r.list("matrix", {0.0, 1.0, 1.0, 0.0});
    try {
        return ConstantMatrixModel(Grid::abstract(weights), decay, matrix);
    } catch (const StructuralError& e) {
        throw ConfigError(std::string("[model] ") + e.what());
    }
}

inline CollisionModel build_boltzmann(const RawConfig& cfg, const TimeGrid& tg, std::optional<bool> strict_override) {
    const SectionReader r(cfg, "model");
    const auto gkind = r.str("grid.kind", "velocity");
    if (gkind != "velocity") throw ConfigError("[model] grid.kind must be velocity for the Boltzmann model");
    const auto grid = Grid::uniform_velocity(r.num("grid.min", -1.0), r.num("grid.max", 1.0), r.count("grid.n", 8));

    CollisionFrequency sigma{
        time_profile(r.str("sigma.kind", "constant"), r.list("sigma.params", {1.0}), r.where("sigma")),
        space_profile(r.str("sigma.space", "constant"), r.list("sigma.space_params", {1.0}), r.where("sigma.space"))};

    CollisionKernel kernel;
    kernel.time = time_profile(r.str("kernel.time", "constant"), r.list("kernel.time_params", {1.0}),
                               r.where("kernel.time"));
    auto& sh = kernel.shape;
    const auto kkind = r.str("kernel.kind", "redistribute");
    const auto kp = r.list("kernel.params", {});
    auto param = [&](std::size_t i, double fallback) { return i < kp.size() ? kp[i] : fallback; };
    if (r.has("kernel.profile"))
        sh.first = space_profile(r.str("kernel.profile", ""), r.list("kernel.profile_params", {}),
                                 r.where("kernel.profile"));
    if (r.has("kernel.profile2"))
        sh.second = space_profile(r.str("kernel.profile2", ""), r.list("kernel.profile2_params", {}),
                                  r.where("kernel.profile2"));
    using K = KernelShape::Kind;
    if (kkind == "constant") sh.kind = K::constant, sh.c = param(0, 1.0);
    else if (kkind == "outgoing") sh.kind = K::outgoing, sh.c = param(0, 1.0);
    else if (kkind == "product") sh.kind = K::product, sh.c = param(0, 1.0);
    else if (kkind == "gaussian") sh.kind = K::gaussian, sh.c = param(0, 1.0), sh.width = param(1, 1.0);
    else if (kkind == "table") sh.kind = K::table, sh.values = kp;
    else if (kkind == "redistribute") {
        sh.kind = K::redistribute;
        sh.theta = param(0, 1.0);
        if (!r.has("kernel.profile")) sh.first = SpaceProfile::maxwellian(0.5);
    } else
        throw ConfigError("[model] unknown kernel.kind '" + kkind + "'");

    CollisionOptions opt;
    const bool strict = strict_override.value_or(r.flag("strict_subcritical", true));
    opt.mode = strict ? SubcriticalMode::strict : SubcriticalMode::lenient;
    opt.sample_times = validation_times(tg);
    opt.quad_step = tg.step();
    return CollisionModel(grid, sigma, kernel, opt);
}

inline FragmentationModel build_fragmentation(const RawConfig& cfg, const TimeGrid& tg,
                                              std::optional<bool> strict_override) {
    const SectionReader r(cfg, "model");
    const auto gkind = r.str("grid.kind", "mass");
    if (gkind != "mass") throw ConfigError("[model] grid.kind must be mass for the fragmentation model");
    const auto grid = Grid::uniform_mass(r.num("grid.xmin", 1.0 / 64.0), r.num("grid.xmax", 1.0), r.count("grid.n", 64));

    const auto rkind = r.str("rate.kind", "linear");
    const auto rp = r.list("rate.params", {1.0});
    auto need = [&](std::size_t n) {
        if (rp.size() != n)
            throw ConfigError("[model] rate.kind = " + rkind + " takes " + std::to_string(n) + " parameters");
    };
    FragmentationRate rate;
    if (rkind == "constant") need(1), rate = FragmentationRate::constant(rp[0]);
    else if (rkind == "linear") need(1), rate = FragmentationRate::linear(rp[0]);
    else if (rkind == "power") need(2), rate = FragmentationRate::power(rp[0], rp[1]);
    else if (rkind == "product_t") // (a + b t) c x^p
        need(4), rate = FragmentationRate::product_t(TimeProfile::affine(rp[0], rp[1]), rp[2], rp[3]);
    else
        throw ConfigError("[model] unknown rate.kind '" + rkind + "'");

    const auto dkind = r.str("daughter.kind", "binary_uniform");
    DaughterKernel daughter;
    if (dkind == "binary_uniform") daughter = DaughterKernel::binary_uniform();
    else if (dkind == "powerlaw") {
        const auto dp = r.list("daughter.params", {0.0});
        if (dp.size() != 1) throw ConfigError("[model] daughter.kind = powerlaw takes 1 parameter");
        daughter = DaughterKernel::powerlaw(dp[0]);
    } else
        throw ConfigError("[model] unknown daughter.kind '" + dkind + "'");

    FragmentationOptions opt;
    const bool strict = strict_override.value_or(r.flag("strict_kernel", true));
    opt.mode = strict ? KernelMode::strict : KernelMode::lenient;
    opt.sample_times = validation_times(tg);
    opt.quad_step = tg.step();
    return FragmentationModel(grid, rate, daughter, opt);
}

inline AnyModel build_model(const RawConfig& cfg, const std::string& kind, const TimeGrid& tg,
                            std::optional<bool> strict_override) {
    if (kind == "oracle") return build_oracle(cfg);
    if (kind == "boltzmann") return build_boltzmann(cfg, tg, strict_override);
    if (kind == "fragmentation") return build_fragmentation(cfg, tg, strict_override);
    throw ConfigError("unknown model kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Initial data

/// uniform and maxwellian data are scaled to unit norm; point(i) is the
/// normalized indicator of node i; csv reads `index,value` rows verbatim.
inline StateVector build_initial(const RawConfig& cfg, const GridPtr& grid) {
    const SectionReader r(cfg, "initial_data");
    const auto kind = r.str("kind", "point");
    StateVector u(grid);
    if (kind == "uniform") {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = 1.0;
        u *= 1.0 / l1_norm(u);
    } else if (kind == "point") {
        const auto node = r.count("node", 0);
        if (node >= grid->size())
            throw ConfigError("[initial_data] node " + std::to_string(node) + " is outside the grid of " +
                              std::to_string(grid->size()) + " nodes");
        u = unit_point(grid, node);
    } else if (kind == "maxwellian") {
        const auto vals = SpaceProfile::maxwellian(r.num("temperature", 1.0)).on(*grid);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = vals[i];
        u *= 1.0 / l1_norm(u);
    } else if (kind == "csv") {
        const auto path = r.required("path");
        std::ifstream in(path);
        if (!in) throw ConfigError("[initial_data] cannot open '" + path + "'");
        std::string line;
        if (!std::getline(in, line) || io::trim(line) != "index,value")
            throw ConfigError("[initial_data] '" + path + "' must start with the header index,value");
        while (std::getline(in, line)) {
            if (io::trim(line).empty()) continue;
            const auto f = io::split(line);
            if (f.size() != 2) throw ConfigError("[initial_data] malformed row '" + line + "'");
            const auto idx = to_count(f[0], "initial_data index");
            if (idx >= grid->size()) throw ConfigError("[initial_data] index " + f[0] + " is outside the grid");
            u[idx] = to_double(f[1], "initial_data value");
        }
    } else
        throw ConfigError("[initial_data] unknown kind '" + kind + "'");
    return u;
}

} // namespace dpe::runner
