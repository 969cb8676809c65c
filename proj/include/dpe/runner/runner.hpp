#pragma once

// Batch experiments driven by a configuration file.
//
// run() and sweep() compute every table first and only then render the
// output files, so a failing configuration or model never leaves partial
// output behind. All numbers are written with 17 significant digits and
// the computation is single threaded with a fixed summation order, which
// makes reruns byte-identical.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "dpe/boltzmann.hpp"
#include "dpe/dyson_phillips.hpp"
#include "dpe/fragmentation.hpp"
#include "dpe/honesty.hpp"
#include "dpe/io.hpp"
#include "dpe/lifted.hpp"
#include "dpe/runner/builders.hpp"
#include "dpe/runner/config.hpp"
#include "dpe/runner/svg.hpp"

namespace dpe::runner {

enum ExitCode : int { exit_ok = 0, exit_error = 1, exit_dishonest = 2, exit_inconclusive = 3 };

inline int exit_code_for(Verdict v) {
    switch (v) {
    case Verdict::honest: return exit_ok;
    case Verdict::dishonest: return exit_dishonest;
    case Verdict::inconclusive: return exit_inconclusive;
    }
    return exit_inconclusive;
}

/// Command-line overrides applied on top of the file.
struct RunOptions {
    std::optional<std::string> output_dir;
    std::optional<bool> emit_svg;
    /// true for --strict, false for --lenient
    std::optional<bool> strict;
};

struct RunReport {
    std::string experiment;
    /// honest, dishonest, inconclusive, or complete for experiments without a verdict
    std::string verdict;
    int exit_code = exit_ok;
    std::vector<double> defects;
    std::vector<MassLedgerRow> ledger;
    std::vector<std::pair<std::string, std::string>> residuals;
    double wall_seconds = 0.0;
    std::string config_echo;
    std::string output_dir;
    /// file name -> content, in write order
    std::map<std::string, std::string> files;
};

namespace detail {

using KV = std::vector<std::pair<std::string, std::string>>;

inline std::string num(double x) { return io::format_double(x); }

inline std::string kv_csv(const KV& rows, const char* header = "key,value") {
    std::ostringstream os;
    os << header << '\n';
    for (const auto& [k, v] : rows) os << k << ',' << v << '\n';
    return os.str();
}

inline Verdict combine(const std::vector<Verdict>& vs) {
    if (vs.empty()) return Verdict::inconclusive;
    bool all = true;
    for (auto v : vs) {
        if (v == Verdict::dishonest) return Verdict::dishonest;
        all = all && v == Verdict::honest;
    }
    return all ? Verdict::honest : Verdict::inconclusive;
}

/// Everything computed for one (model, u0, time grid) trajectory.
struct Trajectory {
    DysonPhillipsTable table;
    DefectSeries series;
    std::vector<MassLedgerRow> ledger;
    SeriesResult sum;
    KV residuals;
    std::optional<double> duhamel;
    double leakage = 0.0;
    std::optional<HonestySweep> basis;
    Verdict verdict = Verdict::inconclusive;
    std::size_t nodes = 0;
};

// The left recursion stores (N+1)(M+1)(M+2)/2 dense d x d blocks.
inline bool left_check_affordable(std::size_t N, std::size_t M, std::size_t d) {
    if (M > EngineDefaults::left_cap) return false;
    const double doubles = static_cast<double>(N + 1) * static_cast<double>((M + 1) * (M + 2) / 2) *
                           static_cast<double>(d * d);
    return doubles <= 5e7;
}

template <class Model>
Trajectory run_trajectory(const Model& model, const StateVector& u0, const EngineSettings& eng,
                          const HonestySettings& hs) {
    const TimeGrid tg = eng.time_grid();
    auto first = iterate_right(model, tg, u0, eng.n_max);
    auto series = honesty_verdict(first, hs.options);
    auto rows = mass_ledger(first);
    auto sum = series_sum(first, eng.series_tol);
    Trajectory tr{std::move(first), std::move(series), std::move(rows), std::move(sum), {}, {}, 0.0, {},
                  Verdict::inconclusive, model.grid()->size()};
    const auto& table = tr.table;

    double ledger_max = 0.0;
    for (const auto& r : tr.ledger) ledger_max = std::max(ledger_max, std::abs(r.residual));
    double mono = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < tr.series.values.size(); ++n)
        mono = std::max(mono, tr.series.values[n + 1] - tr.series.values[n]);
    tr.residuals.push_back({"ledger_max_abs_residual", num(ledger_max)});
    tr.residuals.push_back({"defect_max_increase", num(mono)});
    tr.residuals.push_back({"defect_monotonicity_slack", num(10.0 * eng.dt * eng.dt)});

    if (eng.duhamel_check) {
        tr.duhamel = duhamel_residual(model, tg, u0, table);
        tr.residuals.push_back({"duhamel_residual", num(*tr.duhamel)});
    }
    if (eng.left_check) {
        if (left_check_affordable(eng.n_max, tg.steps(), u0.size())) {
            const auto left = iterate_left(model, tg, u0, eng.n_max);
            tr.residuals.push_back({"left_right_discrepancy", num(table_discrepancy(table, left))});
        } else {
            tr.residuals.push_back({"left_right_discrepancy", "skipped"});
        }
    }

    using T = std::decay_t<Model>;
    if constexpr (std::is_same_v<T, CollisionModel>) {
        tr.residuals.push_back({"max_subcritical_excess", num(model.max_excess())});
        tr.residuals.push_back({"conservative", model.conservative() ? "true" : "false"});
        if (u0.is_nonnegative())
            tr.residuals.push_back({"smoothing_identity_residual", num(smoothing_mass_identity(model, tg, u0).residual)});
    } else if constexpr (std::is_same_v<T, FragmentationModel>) {
        // Relative to the per-node tolerance, so values <= 1 mean every column is acceptable.
        double kmax = 0.0;
        for (std::size_t j = 1; j < model.dim(); ++j)
            kmax = std::max(kmax, model.kernel_mass_check(tg.start(), j) / model.kernel_tolerance(j));
        tr.leakage = leakage_flux_estimate(model, table, table.order());
        tr.residuals.push_back({"kernel_mass_check_over_tolerance", num(kmax)});
        tr.residuals.push_back({"vn_identity_residual", num(vn_identity_residual(model, table, table.order()))});
        tr.residuals.push_back({"leakage_flux", num(tr.leakage)});
    } else {
        tr.residuals.push_back({"formally_conservative", model.formally_conservative() ? "true" : "false"});
    }

    std::vector<Verdict> verdicts{tr.series.verdict};
    if (hs.basis_sweep) {
        tr.basis = honesty_sweep(model, tg, eng.n_max, hs.options, hs.basis_stride);
        verdicts.push_back(tr.basis->verdict);
    }
    tr.verdict = combine(verdicts);
    return tr;
}

inline std::string defects_csv(const DefectSeries& s) {
    std::ostringstream os;
    io::CsvWriter csv(os);
    csv.header({"n", "defect", "ratio"});
    for (std::size_t n = 0; n < s.values.size(); ++n) csv.row(n, s.values[n], s.ratios[n]);
    return os.str();
}

inline std::string norms_csv(const DysonPhillipsTable& t) {
    std::ostringstream os;
    io::CsvWriter csv(os);
    csv.header({"n", "tau", "iterate_norm", "partial_sum"});
    const auto& tg = t.time_grid();
    for (std::size_t n = 0; n <= t.order(); ++n)
        for (std::size_t j = 0; j <= tg.steps(); ++j)
            csv.row(n, tg.node(j), t.iterate_norm(n, j), l1_norm(t.partial_sum(n, j)));
    return os.str();
}

inline std::string iterates_csv(const DysonPhillipsTable& t) {
    std::ostringstream os;
    io::CsvWriter csv(os);
    csv.header({"n", "tau", "coeff_index", "value"});
    const auto& tg = t.time_grid();
    for (std::size_t n = 0; n <= t.order(); ++n)
        for (std::size_t j = 0; j <= tg.steps(); ++j) {
            const auto v = t.iterate_span(n, j);
            for (std::size_t i = 0; i < v.size(); ++i) csv.row(n, tg.node(j), i, v[i]);
        }
    return os.str();
}

inline std::string basis_csv(const HonestySweep& s) {
    std::ostringstream os;
    io::CsvWriter csv(os);
    csv.header({"initial_data", "verdict", "final_defect", "limit_estimate", "ledger_min", "ledger_max"});
    for (const auto& e : s.entries)
        csv.row(e.label, to_string(e.series.verdict), e.series.values.back(), e.series.limit_estimate, e.ledger_min,
                e.ledger_max);
    return os.str();
}

inline std::string initial_data_label(const RawConfig& cfg) {
    const SectionReader r(cfg, "initial_data");
    const auto kind = r.str("kind", "point");
    if (kind == "point") return "point(" + std::to_string(r.count("node", 0)) + ")";
    if (kind == "maxwellian") return "maxwellian(" + num(r.num("temperature", 1.0)) + ")";
    if (kind == "csv") return "csv(" + r.str("path", "") + ")";
    return kind;
}

// ---------------------------------------------------------------------------

inline void run_model_experiment(const RawConfig& cfg, const std::string& experiment, const RunOptions& opt,
                                 RunReport& rep) {
    const auto eng = read_engine(cfg);
    const auto hs = read_honesty(cfg);
    const auto out = read_output(cfg);
    const auto model = build_model(cfg, experiment, eng.time_grid(), opt.strict);
    const auto tr = std::visit(
        [&](const auto& m) { return run_trajectory(m, build_initial(cfg, m.grid()), eng, hs); }, model);

    rep.verdict = to_string(tr.verdict);
    rep.exit_code = exit_code_for(tr.verdict);
    rep.defects = tr.series.values;
    rep.ledger = tr.ledger;
    rep.residuals = tr.residuals;

    KV report{{"experiment", experiment},
              {"verdict", rep.verdict},
              {"trajectory_verdict", to_string(tr.series.verdict)},
              {"initial_data", initial_data_label(cfg)},
              {"nodes", std::to_string(tr.nodes)},
              {"s", num(eng.s)},
              {"t_end", num(eng.t_end)},
              {"dt", num(eng.dt)},
              {"steps", std::to_string(tr.table.steps())},
              {"n_max", std::to_string(eng.n_max)},
              {"rule", to_string(eng.rule)},
              {"u0_norm", num(l1_norm(tr.table.u0()))},
              {"final_defect", num(tr.series.values.back())},
              {"limit_estimate", num(tr.series.limit_estimate)},
              {"tail_bound", num(tr.series.tail_bound)},
              {"threshold", num(tr.series.threshold)},
              {"series_terms", std::to_string(tr.sum.n_used)},
              {"series_converged", tr.sum.converged ? "true" : "false"},
              {"series_norm", num(l1_norm(tr.sum.value))}};
    if (tr.basis) {
        report.push_back({"basis_verdict", to_string(tr.basis->verdict)});
        report.push_back({"basis_entries", std::to_string(tr.basis->entries.size())});
        report.push_back({"basis_stride", std::to_string(hs.basis_stride)});
    } else {
        report.push_back({"basis_verdict", "not_run"});
    }

    rep.files["report.csv"] = kv_csv(report);
    {
        std::ostringstream os;
        write_honesty_csv(os, tr.table, tr.series);
        rep.files["ledger.csv"] = os.str();
    }
    rep.files["defects.csv"] = defects_csv(tr.series);
    rep.files["norms.csv"] = norms_csv(tr.table);
    rep.files["residuals.csv"] = kv_csv(tr.residuals, "check,value");
    if (out.iterates) rep.files["iterates.csv"] = iterates_csv(tr.table);
    if (tr.basis) rep.files["basis.csv"] = basis_csv(*tr.basis);
    if (opt.emit_svg.value_or(out.emit_svg)) {
        std::vector<double> ledger_res;
        for (const auto& r : tr.ledger) ledger_res.push_back(r.residual);
        rep.files["plots.svg"] = render_svg({{"defect D_n (log10)", tr.series.values, true},
                                             {"ledger residual", ledger_res, false}});
    }
}

/// f(t) = sin^2(pi t / end) u0 on [0, end], zero afterwards.
inline LiftedVector lifted_bump(const LiftedAxis& ax, const StateVector& u0, double end) {
    return make_lifted(ax, u0.grid(), [&](double t) {
        StateVector v = u0;
        const double s = t <= end ? std::pow(std::sin(std::numbers::pi * t / end), 2) : 0.0;
        v *= s;
        return v;
    });
}

struct LiftedSettings {
    double t_max = 6.0;
    std::vector<double> h{1.0 / 64.0, 1.0 / 128.0};
    std::optional<double> lambda;
    double lambda_factor = 4.0;
    std::size_t laplace_n_max = 3;
    std::size_t series_terms = 12;
    double bump_end = 1.0;
};

inline LiftedSettings read_lifted(const RawConfig& cfg) {
    const SectionReader r(cfg, "lifted");
    LiftedSettings l;
    l.t_max = r.num("t_max", l.t_max);
    l.h = r.list("h", l.h);
    if (r.has("lambda")) l.lambda = r.num("lambda");
    l.lambda_factor = r.num("lambda_factor", l.lambda_factor);
    l.laplace_n_max = r.count("laplace_n_max", l.laplace_n_max);
    l.series_terms = r.count("series_terms", l.series_terms);
    l.bump_end = r.num("bump_end", l.bump_end);
    if (l.h.empty()) throw ConfigError("[lifted] h needs at least one step");
    if (!(l.bump_end > 0.0)) throw ConfigError("[lifted] bump_end must be positive");
    return l;
}

struct LiftedRun {
    std::vector<LiftedCheck> checks;
    double lambda = 0.0;
    double b_norm = 0.0;
    double f_norm_max = 0.0;
    double worst_relative = 0.0;
    double worst_series_ratio = 0.0;
};

template <class Model>
LiftedRun run_lifted(const Model& model, const StateVector& u0, const LiftedSettings& ls) {
    LiftedRun out;
    {
        const LiftedAxis ax(ls.h.front(), ls.t_max);
        std::vector<double> times;
        for (std::size_t k = 0; k < ax.size(); ++k) times.push_back(ax.node(k));
        out.b_norm = perturbation_norm(model, times);
    }
    out.lambda = ls.lambda.value_or(ls.lambda_factor * out.b_norm);
    if (!(out.lambda > 0.0))
        throw ConfigError("[lifted] lambda must be positive; set lambda explicitly when the perturbation vanishes");
    for (double h : ls.h) {
        const LiftedAxis ax(h, ls.t_max);
        const auto f = lifted_bump(ax, u0, ls.bump_end);
        const double fn = f.norm();
        out.f_norm_max = std::max(out.f_norm_max, fn);
        std::vector<LiftedCheck> here;
        here.push_back(identity_lgBl_check(model, out.lambda, f));
        here.push_back(resolvent_series_check(model, out.lambda, f, ls.series_terms));
        out.worst_series_ratio = std::max(out.worst_series_ratio, worst_series_ratio(here.back(), 1e-14 * fn));
        for (std::size_t n = 0; n <= ls.laplace_n_max; ++n) here.push_back(laplace_Tn_check(model, out.lambda, n, f));
        for (auto& c : here) {
            if (fn > 0.0) out.worst_relative = std::max(out.worst_relative, c.residual / fn);
            out.checks.push_back(std::move(c));
        }
    }
    return out;
}

/// Ratio of each check's residual to the same check at the previous h.
inline std::string lifted_convergence_csv(const std::vector<LiftedCheck>& checks) {
    std::ostringstream os;
    io::CsvWriter csv(os);
    csv.header({"check_name", "n", "h", "residual", "ratio"});
    std::map<std::pair<std::string, std::size_t>, double> prev;
    for (const auto& c : checks) {
        const auto key = std::make_pair(c.name, c.n);
        const auto it = prev.find(key);
        if (it == prev.end()) csv.row(c.name, c.n, c.h, c.residual, "");
        else csv.row(c.name, c.n, c.h, c.residual, it->second > 0.0 ? c.residual / it->second : 0.0);
        prev[key] = c.residual;
    }
    return os.str();
}

inline void run_lifted_experiment(const RawConfig& cfg, const RunOptions& opt, const LiftedSettings& ls,
                                  RunReport& rep) {
    const auto eng = read_engine(cfg);
    const auto kind = model_kind_of(cfg, "lifted_checks");
    const auto model = build_model(cfg, kind, eng.time_grid(), opt.strict);
    const auto lr = std::visit(
        [&](const auto& m) -> LiftedRun {
            using T = std::decay_t<decltype(m)>;
            if constexpr (DiagonalLossModel<T>) return run_lifted(m, build_initial(cfg, m.grid()), ls);
            else throw ConfigError("lifted checks need a model with a diagonal loss term");
        },
        model);

    rep.verdict = "complete";
    rep.exit_code = exit_ok;
    KV report{{"experiment", "lifted_checks"},
              {"verdict", rep.verdict},
              {"model", kind},
              {"initial_data", initial_data_label(cfg)},
              {"t_max", num(ls.t_max)},
              {"perturbation_norm", num(lr.b_norm)},
              {"lambda", num(lr.lambda)},
              {"checks", std::to_string(lr.checks.size())},
              {"worst_relative_residual", num(lr.worst_relative)},
              {"worst_series_ratio", num(lr.worst_series_ratio)}};
    rep.residuals = {{"worst_relative_residual", num(lr.worst_relative)},
                     {"worst_series_ratio", num(lr.worst_series_ratio)}};
    rep.files["report.csv"] = kv_csv(report);
    std::ostringstream os;
    write_checks_csv(os, lr.checks);
    rep.files["checks.csv"] = os.str();
    rep.files["convergence.csv"] = lifted_convergence_csv(lr.checks);
}

inline ShatteringSetup read_shattering(const RawConfig& cfg) {
    const auto eng = read_engine(cfg);
    const SectionReader r(cfg, "shattering");
    ShatteringSetup s;
    if (eng.s != 0.0) throw ConfigError("the shattering experiment starts at s = 0");
    s.alpha = r.num("alpha", s.alpha);
    s.c = r.num("c", s.c);
    s.x_max = r.num("x_max", s.x_max);
    if (r.has("levels")) {
        s.levels.clear();
        for (double l : r.list("levels")) {
            if (l != std::floor(l) || l < 1.0) throw ConfigError("[shattering] levels must be positive integers");
            s.levels.push_back(static_cast<int>(l));
        }
    }
    s.t_end = eng.t_end;
    s.dt = eng.dt;
    s.n_max = eng.n_max;
    s.honesty = read_honesty(cfg).options;
    return s;
}

inline std::string shattering_csv(const ShatteringReport& sr) {
    std::ostringstream os;
    io::CsvWriter csv(os);
    csv.header({"x_min", "nodes", "final_defect", "limit_estimate", "verdict", "leakage", "mass_end"});
    for (const auto& r : sr.rows)
        csv.row(r.x_min, r.nodes, r.final_defect, r.limit_estimate, to_string(r.verdict), r.leakage, r.mass_end);
    return os.str();
}

inline void run_shattering_experiment(const ShatteringSetup& s, RunReport& rep, const std::string& file) {
    const auto sr = shattering_experiment(s);
    rep.verdict = "complete";
    rep.exit_code = exit_ok;
    KV report{{"experiment", "shattering_sweep"},
              {"verdict", rep.verdict},
              {"alpha", num(sr.alpha)},
              {"grids", std::to_string(sr.rows.size())},
              {"defect_trend", sr.defect_trend},
              {"leakage_trend", sr.leakage_trend},
              {"defect_bounded_away", sr.defect_bounded_away ? "true" : "false"},
              {"leakage_bounded_away", sr.leakage_bounded_away ? "true" : "false"}};
    rep.files["report.csv"] = kv_csv(report);
    rep.files[file] = shattering_csv(sr);
    for (const auto& r : sr.rows) rep.defects.push_back(r.final_defect);
}

inline RawConfig apply_options(RawConfig cfg, const RunOptions& opt) {
    if (opt.output_dir) cfg.set("output", "directory", *opt.output_dir);
    if (opt.emit_svg) cfg.set("output", "emit_svg", *opt.emit_svg ? "true" : "false");
    return cfg;
}

template <class Fn>
RunReport timed(const RawConfig& raw, const RunOptions& opt, Fn&& body) {
    const auto start = std::chrono::steady_clock::now();
    validate_schema(raw);
    const RawConfig cfg = apply_options(raw, opt);
    RunReport rep;
    rep.experiment = *cfg.get("", "experiment");
    rep.output_dir = read_output(cfg).directory;
    rep.config_echo = cfg.echo();
    body(cfg, rep);
    rep.files["config_echo.ini"] = rep.config_echo;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

} // namespace detail

/// Runs one experiment. Throws dpe::Error (ConfigError, ContractViolation, ...)
/// for configuration or model problems; nothing is written here.
inline RunReport run(const RawConfig& raw, const RunOptions& opt = {}) {
    return detail::timed(raw, opt, [&](const RawConfig& cfg, RunReport& rep) {
        const auto& exp = rep.experiment;
        if (exp == "oracle" || exp == "boltzmann" || exp == "fragmentation")
            detail::run_model_experiment(cfg, exp, opt, rep);
        else if (exp == "lifted_checks")
            detail::run_lifted_experiment(cfg, opt, detail::read_lifted(cfg), rep);
        else
            detail::run_shattering_experiment(detail::read_shattering(cfg), rep, "shattering.csv");
    });
}

/// Refinement study over [sweep] values; one row per entry.
inline RunReport sweep(const RawConfig& raw, const RunOptions& opt = {}) {
    return detail::timed(raw, opt, [&](const RawConfig& cfg, RunReport& rep) {
        using detail::num;
        const SectionReader sr(cfg, "sweep");
        const auto values = sr.list("values");
        if (values.size() < 2) throw ConfigError("[sweep] values needs at least two entries");
        const auto& exp = rep.experiment;

        if (exp == "shattering_sweep") {
            auto s = detail::read_shattering(cfg);
            const auto param = sr.str("parameter", "level");
            if (param != "level") throw ConfigError("[sweep] parameter must be level for shattering_sweep");
            s.levels.clear();
            for (double v : values) {
                if (v != std::floor(v) || v < 1.0) throw ConfigError("[sweep] levels must be positive integers");
                s.levels.push_back(static_cast<int>(v));
            }
            detail::run_shattering_experiment(s, rep, "sweep.csv");
            return;
        }
        if (exp == "lifted_checks") {
            const auto param = sr.str("parameter", "h");
            if (param != "h") throw ConfigError("[sweep] parameter must be h for lifted_checks");
            auto ls = detail::read_lifted(cfg);
            ls.h = values;
            detail::run_lifted_experiment(cfg, opt, ls, rep);
            rep.files["sweep.csv"] = rep.files["convergence.csv"];
            return;
        }

        const auto param = sr.str("parameter", "dt");
        if (param != "dt" && param != "grid_n") throw ConfigError("[sweep] parameter must be dt or grid_n");
        if (param == "grid_n" && exp == "oracle") throw ConfigError("[sweep] the oracle model has a fixed grid");
        const auto hs = read_honesty(cfg);

        std::ostringstream os;
        io::CsvWriter csv(os);
        csv.header({"resolution", "dt", "nodes", "final_defect", "defect_limit", "verdict", "ledger_residual",
                    "leakage", "duhamel_residual", "duhamel_ratio", "ledger_ratio"});
        std::vector<Verdict> verdicts;
        std::optional<double> prev_duhamel, prev_ledger;
        for (double v : values) {
            RawConfig c = cfg;
            if (param == "dt") c.set("engine", "dt", num(v));
            else c.set("model", "grid.n", std::to_string(to_count(num(v), "[sweep] values")));
            const auto eng = read_engine(c);
            const auto model = build_model(c, exp, eng.time_grid(), opt.strict);
            const auto tr = std::visit(
                [&](const auto& m) { return detail::run_trajectory(m, build_initial(c, m.grid()), eng, hs); }, model);
            const double ledger = tr.ledger.back().residual;
            const std::string duh = tr.duhamel ? num(*tr.duhamel) : "";
            std::string duh_ratio, led_ratio;
            if (prev_duhamel && tr.duhamel && *prev_duhamel > 0.0) duh_ratio = num(*tr.duhamel / *prev_duhamel);
            if (prev_ledger && *prev_ledger != 0.0) led_ratio = num(ledger / *prev_ledger);
            csv.row(v, eng.dt, tr.nodes, tr.series.values.back(), tr.series.limit_estimate, to_string(tr.verdict),
                    ledger, tr.leakage, duh, duh_ratio, led_ratio);
            prev_duhamel = tr.duhamel;
            prev_ledger = ledger;
            verdicts.push_back(tr.verdict);
            rep.defects.push_back(tr.series.values.back());
        }
        const auto verdict = detail::combine(verdicts);
        rep.verdict = to_string(verdict);
        rep.exit_code = exit_code_for(verdict);
        rep.files["sweep.csv"] = os.str();
        rep.files["report.csv"] = detail::kv_csv({{"experiment", exp},
                                                  {"verdict", rep.verdict},
                                                  {"parameter", param},
                                                  {"entries", std::to_string(values.size())}});
    });
}

/// Creates the output directory and writes every file of the report.
inline void write_outputs(const RunReport& rep) {
    namespace fs = std::filesystem;
    const fs::path dir(rep.output_dir);
    fs::create_directories(dir);
    for (const auto& [name, content] : rep.files) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw Error("cannot write " + (dir / name).string());
        os << content;
    }
}

} // namespace dpe::runner
