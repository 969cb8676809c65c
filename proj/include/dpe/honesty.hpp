#pragma once

// Mass-defect diagnostics for a Dyson-Phillips table.
//
// D_n = int_s^t |B(tau) V_n(tau, s) u| dtau is the mass that the n-th iterate
// hands to the next one. The family is honest along a trajectory exactly when
// D_n -> 0, and in the formally conservative case the ledger
//     |u| = sum_{k<=n} |V_k(t, s) u| + D_n
// holds for every n.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "dpe/dyson_phillips.hpp"
#include "dpe/error.hpp"
#include "dpe/io.hpp"
#include "dpe/state_space.hpp"

namespace dpe {

enum class Verdict { honest, dishonest, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::honest: return "honest";
    case Verdict::dishonest: return "dishonest";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

struct HonestyOptions {
    /// Relative to |u0|.
    double threshold = 1e-8;
    /// Number of consecutive tail ratios that must agree.
    std::size_t persistence = 3;
    double decay_ratio = 0.9;
    double plateau_ratio = 0.95;
};

/// Trapezoid integral of |B V_n u0| over the table's interval.
inline double defect(const DysonPhillipsTable& table, std::size_t n) {
    if (table.defects().size() <= n) throw PreconditionError("defect requested beyond the table order");
    return table.defects()[n];
}

struct MassLedgerRow {
    std::size_t n = 0;
    double partial_mass = 0.0;
    double defect = 0.0;
    double residual = 0.0;
};

inline MassLedgerRow mass_ledger(const DysonPhillipsTable& table, std::size_t n) {
    if (table.partial_norms().size() <= n) throw PreconditionError("ledger requested beyond the table order");
    MassLedgerRow row;
    row.n = n;
    row.partial_mass = table.partial_norms()[n];
    row.defect = table.defects()[n];
    row.residual = l1_norm(table.u0()) - row.partial_mass - row.defect;
    return row;
}

inline std::vector<MassLedgerRow> mass_ledger(const DysonPhillipsTable& table) {
    std::vector<MassLedgerRow> rows;
    for (std::size_t n = 0; n <= table.order(); ++n) rows.push_back(mass_ledger(table, n));
    return rows;
}

struct DefectSeries {
    std::vector<double> values;
    /// ratios[n] = D_n / D_{n-1}; ratios[0] is unused and set to 0.
    std::vector<double> ratios;
    /// D_N plus the geometric tail bound; infinite when the tail does not decay.
    double limit_estimate = 0.0;
    double tail_bound = 0.0;
    /// Absolute threshold (options.threshold * |u0|).
    double threshold = 0.0;
    Verdict verdict = Verdict::inconclusive;
};

namespace detail {

inline double defect_ratio(double num, double den) {
    if (den > 0.0) return num / den;
    return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

} // namespace detail

inline DefectSeries honesty_verdict(const std::vector<double>& defects, double u0_norm, const HonestyOptions& opt = {}) {
    DefectSeries out;
    out.values = defects;
    out.threshold = opt.threshold * u0_norm;
    const std::size_t N = defects.empty() ? 0 : defects.size() - 1;
    out.ratios.assign(defects.size(), 0.0);
    for (std::size_t n = 1; n <= N; ++n) out.ratios[n] = detail::defect_ratio(defects[n], defects[n - 1]);

    if (defects.empty()) return out;
    const double dN = defects[N];
    out.limit_estimate = dN;
    if (N < 3 || N < opt.persistence) return out; // too short to judge

    // With zero data or no perturbation every defect vanishes.
    if (dN == 0.0) {
        out.verdict = Verdict::honest;
        return out;
    }

    const double r = out.ratios[N];
    out.tail_bound = r < 1.0 ? dN * r / (1.0 - r) : std::numeric_limits<double>::infinity();
    out.limit_estimate = dN + out.tail_bound;

    bool decaying = true, plateau = true;
    for (std::size_t k = 0; k < opt.persistence; ++k) {
        const double rk = out.ratios[N - k];
        decaying = decaying && rk < opt.decay_ratio;
        plateau = plateau && rk >= opt.plateau_ratio;
    }
    if (decaying && out.limit_estimate < out.threshold)
        out.verdict = Verdict::honest;
    else if (plateau && dN > 10.0 * out.threshold)
        out.verdict = Verdict::dishonest;
    return out;
}

inline DefectSeries honesty_verdict(const DysonPhillipsTable& table, const HonestyOptions& opt = {}) {
    return honesty_verdict(table.defects(), l1_norm(table.u0()), opt);
}

inline DefectSeries honesty_verdict(const DysonPhillipsTable& table, double threshold) {
    HonestyOptions opt;
    opt.threshold = threshold;
    return honesty_verdict(table, opt);
}

/// Columns n, defect, partial_mass, ledger_residual and a closing
/// limit_estimate / verdict row.
inline void write_honesty_csv(std::ostream& os, const DysonPhillipsTable& table, const DefectSeries& series) {
    io::CsvWriter csv(os);
    csv.header({"n", "defect", "partial_mass", "ledger_residual"});
    for (const auto& row : mass_ledger(table)) csv.row(row.n, row.defect, row.partial_mass, row.residual);
    csv.row("limit_estimate", series.limit_estimate, "verdict", to_string(series.verdict));
}

// ---------------------------------------------------------------------------
// Sweep over a basis of initial data

struct SweepEntry {
    std::string label;
    DefectSeries series;
    double ledger_min = 0.0; // smallest ledger residual over n
    double ledger_max = 0.0; // largest ledger residual over n
};

struct HonestySweep {
    std::vector<SweepEntry> entries;
    Verdict verdict = Verdict::inconclusive;
};

/// Dishonest if any datum is dishonest, honest if every datum is honest.
inline Verdict combine_verdicts(const std::vector<SweepEntry>& entries) {
    if (entries.empty()) return Verdict::inconclusive;
    bool all_honest = true;
    for (const auto& e : entries) {
        if (e.series.verdict == Verdict::dishonest) return Verdict::dishonest;
        all_honest = all_honest && e.series.verdict == Verdict::honest;
    }
    return all_honest ? Verdict::honest : Verdict::inconclusive;
}

/// Normalized indicator of node i: unit norm concentrated on one grid cell.
inline StateVector unit_point(const GridPtr& grid, std::size_t i) {
    StateVector u(grid);
    u[i] = 1.0 / grid->weight(i);
    return u;
}

/// Runs the verdict for every unit point of the grid (or every stride-th one).
template <EvolutionModel M>
HonestySweep honesty_sweep(const M& model, const TimeGrid& tg, std::size_t N, const HonestyOptions& opt = {},
                           std::size_t stride = 1) {
    if (stride == 0) throw PreconditionError("sweep stride must be positive");
    HonestySweep out;
    const GridPtr grid = model.grid();
    for (std::size_t i = 0; i < grid->size(); i += stride) {
        const auto table = iterate_right(model, tg, unit_point(grid, i), N);
        SweepEntry e;
        e.label = "point(" + std::to_string(i) + ")";
        e.series = honesty_verdict(table, opt);
        const auto rows = mass_ledger(table);
        e.ledger_min = e.ledger_max = rows.front().residual;
        for (const auto& r : rows) {
            e.ledger_min = std::min(e.ledger_min, r.residual);
            e.ledger_max = std::max(e.ledger_max, r.residual);
        }
        out.entries.push_back(std::move(e));
    }
    out.verdict = combine_verdicts(out.entries);
    return out;
}

// ---------------------------------------------------------------------------
// Detailed-balance certificate

struct BalanceCertificate {
    StateVector M0;
    std::function<double(double)> beta;
    double lambda = 0.0;
    double symmetry_residual = 0.0;
    double growth_residual = 0.0;
    double tol = 1e-8;

    bool accepted() const { return symmetry_residual <= tol && growth_residual >= -tol; }
};

/// Models exposing the pointwise kernel b(t, v_i, v_j).
template <class M>
concept KernelModel = requires(const M& m, double t, std::size_t i, std::size_t j) {
    { m.grid() } -> std::convertible_to<GridPtr>;
    { m.kernel(t, i, j) } -> std::convertible_to<double>;
};

/// Checks b(t,v,v') M(t,v') = b(t,v',v) M(t,v) with M = beta(t) M0 and the
/// growth condition lambda M + dM/dt >= 0 on the sampled times. Both residuals
/// are relative: the symmetry one to the largest weighted flux, the growth
/// one to max M0.
template <KernelModel Model>
BalanceCertificate detailed_balance_certificate(const Model& model, const StateVector& M0, double lambda,
                                                const std::vector<double>& time_samples, double fd_step,
                                                std::function<double(double)> beta = {}, double tol = 1e-8) {
    if (!(lambda > 0.0)) throw PreconditionError("certificate needs lambda > 0");
    if (!(fd_step > 0.0)) throw PreconditionError("certificate needs a positive difference step");
    const GridPtr grid = model.grid();
    if (M0.size() != grid->size()) throw StructuralError("M0 is not on the model grid");
    for (std::size_t i = 0; i < M0.size(); ++i)
        if (!(M0[i] > 0.0)) throw PreconditionError("M0 must be strictly positive on the grid");
    if (!beta) beta = [lambda](double t) { return 1.0 - std::exp(-lambda * t); };

    BalanceCertificate cert{M0, beta, lambda, 0.0, std::numeric_limits<double>::infinity(), tol};
    const std::size_t d = grid->size();
    double m0_max = 0.0;
    for (std::size_t i = 0; i < d; ++i) m0_max = std::max(m0_max, M0[i]);

    for (double t : time_samples) {
        double scale = 0.0, worst = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double wij = grid->weight(i) * grid->weight(j);
                const double lhs = model.kernel(t, i, j) * M0[j] * wij;
                const double rhs = model.kernel(t, j, i) * M0[i] * wij;
                scale = std::max(scale, std::max(std::abs(lhs), std::abs(rhs)));
                worst = std::max(worst, std::abs(lhs - rhs));
            }
        if (scale > 0.0) cert.symmetry_residual = std::max(cert.symmetry_residual, worst / scale);

        // Centered difference, one-sided where t - h would leave [0, inf).
        const double dbeta = t - fd_step >= 0.0 ? (beta(t + fd_step) - beta(t - fd_step)) / (2.0 * fd_step)
                                                : (beta(t + fd_step) - beta(t)) / fd_step;
        const double g = lambda * beta(t) + dbeta;
        for (std::size_t i = 0; i < d; ++i) cert.growth_residual = std::min(cert.growth_residual, g * M0[i] / m0_max);
    }
    if (time_samples.empty()) cert.growth_residual = 0.0;
    return cert;
}

} // namespace dpe
