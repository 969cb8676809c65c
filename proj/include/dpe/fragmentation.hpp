#pragma once

// Non-autonomous pure fragmentation on a truncated mass grid.
//
//   d/dt u(x) = -a(t, x) u(x) + int_x^inf a(t, y) b(t, x, y) u(y) dy
//
// The state space is L^1(x dx): grid weights are x_i * dx, so the norm of a
// nonnegative state is its total mass. The smallest node has no smaller
// neighbours to fragment into; the mass it loses leaves the grid and is
// reported as leakage, separately from the honesty defect.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/dyson_phillips.hpp"
#include "dpe/error.hpp"
#include "dpe/honesty.hpp"
#include "dpe/profiles.hpp"
#include "dpe/state_space.hpp"
#include "dpe/time_grid.hpp"

namespace dpe {

/// a(t, x) = k(t) * c * x^p. Negative p gives rates singular at x = 0.
struct FragmentationRate {
    TimeProfile time = TimeProfile::constant(1.0);
    double c = 1.0;
    double p = 0.0;

    static FragmentationRate constant(double c) { return {TimeProfile::constant(1.0), c, 0.0}; }
    static FragmentationRate linear(double c) { return {TimeProfile::constant(1.0), c, 1.0}; }
    static FragmentationRate power(double c, double p) { return {TimeProfile::constant(1.0), c, p}; }
    static FragmentationRate product_t(TimeProfile k, double c, double p) { return {std::move(k), c, p}; }

    double space(double x) const { return c * std::pow(x, p); }
};

/// Daughter distribution b(t, x, y), zero for x >= y.
struct DaughterKernel {
    enum class Kind { binary_uniform, powerlaw, custom };
    Kind kind = Kind::binary_uniform;
    double nu = 0.0;
    std::function<double(double, double, double)> fn;

    static DaughterKernel binary_uniform() { return {}; }
    /// (nu + 2) x^nu / y^(nu + 1); nu = 0 is binary uniform.
    static DaughterKernel powerlaw(double nu) {
        if (!(nu > -2.0)) throw StructuralError("power-law daughter kernel needs nu > -2");
        return {Kind::powerlaw, nu, {}};
    }
    static DaughterKernel custom(std::function<double(double, double, double)> f) {
        return {Kind::custom, 0.0, std::move(f)};
    }

    bool time_independent() const noexcept { return kind != Kind::custom; }

    double operator()(double t, double x, double y) const {
        if (x >= y) return 0.0;
        switch (kind) {
        case Kind::binary_uniform: return 2.0 / y;
        case Kind::powerlaw: return (nu + 2.0) * std::pow(x, nu) / std::pow(y, nu + 1.0);
        case Kind::custom: return fn(t, x, y);
        }
        return 0.0;
    }
};

enum class KernelMode { strict, lenient };

struct FragmentationOptions {
    KernelMode mode = KernelMode::strict;
    double quad_step = 1.0 / 64.0;
    /// Strict mode renormalizes a column when its relative mass residual is
    /// at most max(floor, slope * dx / y + (x_min / y)^2), and refuses the
    /// kernel otherwise. The squared term is the share of the daughter mass
    /// that a kernel like 2/y places below the truncated domain [0, x_min).
    double renorm_floor = 1e-3;
    double renorm_slope = 2.0;
    std::vector<double> sample_times{0.0, 0.5, 1.0};
};

class FragmentationModel {
public:
    FragmentationModel(GridPtr grid, FragmentationRate rate, DaughterKernel daughter, FragmentationOptions opt = {})
        : grid_(std::move(grid)), rate_(std::move(rate)), daughter_(std::move(daughter)), opt_(std::move(opt)) {
        if (!grid_) throw StructuralError("fragmentation model needs a grid");
        if (grid_->kind() != GridKind::mass) throw StructuralError("fragmentation model needs a mass grid");
        if (!(grid_->lower() > 0.0)) throw StructuralError("fragmentation grid needs x_min > 0");
        const std::size_t d = grid_->size();
        g_.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            g_[i] = rate_.space(grid_->node(i));
            if (!(g_[i] >= 0.0) || !std::isfinite(g_[i]))
                throw ContractViolation("fragmentation rate is negative or not finite at node " + std::to_string(i));
        }
        for (double t : opt_.sample_times) {
            if (!(rate_.time(t) >= 0.0)) throw ContractViolation("fragmentation rate is negative at t=" + std::to_string(t));
            build_matrix(t, sample_);
        }
        if (daughter_.time_independent()) build_matrix(0.0, cached_);
    }

    const GridPtr& grid() const noexcept { return grid_; }
    const FragmentationOptions& options() const noexcept { return opt_; }
    std::size_t dim() const noexcept { return grid_->size(); }
    double dx() const noexcept { return grid_->spacing(); }

    double rate(double t, std::size_t i) const { return rate_.time(t) * g_.at(i); }
    double loss_rate(double t, std::size_t i) const { return rate(t, i); }

    /// |sum_{x_i < y} dx x_i b(t, x_i, y) - y| / y for y = x_j, before renormalization.
    double kernel_mass_check(double t, std::size_t j) const {
        const double y = grid_->node(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < j; ++i) acc += dx() * grid_->node(i) * daughter_(t, grid_->node(i), y);
        return std::abs(acc - y) / y;
    }

    /// Tolerance applied to kernel_mass_check at node j.
    double kernel_tolerance(std::size_t j) const {
        const double y = grid_->node(j);
        const double cut = grid_->lower() / y;
        return std::max(opt_.renorm_floor, opt_.renorm_slope * dx() / y + cut * cut);
    }

    /// Daughter matrix used by B (row i, column j), after any renormalization.
    double daughter(double t, std::size_t i, std::size_t j) const {
        if (daughter_.time_independent()) return cached_[i * dim() + j];
        build_matrix(t, scratch_matrix_);
        return scratch_matrix_[i * dim() + j];
    }

    void apply_U(double t, double s, std::span<const double> in, std::span<double> out) const {
        if (t < s) throw PreconditionError("U(t, s) needs t >= s");
        const double integral = rate_.time.integral(s, t, opt_.quad_step);
        if (!(integral >= 0.0)) {
            std::ostringstream os;
            os << "fragmentation rate became negative on [" << s << ", " << t << "]";
            throw ContractViolation(os.str());
        }
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * std::exp(-g_[i] * integral);
    }

    /// (B u)_i = sum_{j > i} dx a(t, x_j) b(t, x_i, x_j) u_j.
    void apply_B(double t, std::span<const double> in, std::span<double> out) const {
        const std::size_t d = dim();
        const double kt = rate_.time(t);
        if (!(kt >= 0.0)) {
            std::ostringstream os;
            os << "fragmentation rate is negative or NaN at t=" << t;
            throw ContractViolation(os.str());
        }
        const std::vector<double>* mat = &cached_;
        if (!daughter_.time_independent()) {
            build_matrix(t, scratch_matrix_);
            mat = &scratch_matrix_;
        }
        for (std::size_t i = 0; i < d; ++i) {
            const double* row = mat->data() + i * d;
            double acc = 0.0;
            for (std::size_t j = i + 1; j < d; ++j) acc += row[j] * g_[j] * in[j];
            out[i] = dx() * kt * acc;
        }
    }

    /// Mass per unit time leaving through the smallest node for state u.
    double leakage_flux(double t, std::span<const double> u) const {
        return rate(t, 0) * grid_->weight(0) * std::abs(u[0]);
    }

private:
    void build_matrix(double t, std::vector<double>& mat) const {
        const std::size_t d = dim();
        mat.assign(d * d, 0.0);
        for (std::size_t j = 1; j < d; ++j) {
            const double y = grid_->node(j);
            double acc = 0.0;
            for (std::size_t i = 0; i < j; ++i) {
                const double b = daughter_(t, grid_->node(i), y);
                if (!(b >= 0.0) || !std::isfinite(b)) {
                    std::ostringstream os;
                    os << "daughter kernel is negative or not finite at t=" << t << " (i=" << i << ", j=" << j << ")";
                    throw ContractViolation(os.str());
                }
                mat[i * d + j] = b;
                acc += dx() * grid_->node(i) * b;
            }
            if (opt_.mode == KernelMode::lenient) continue;
            const double residual = std::abs(acc - y) / y;
            if (residual > kernel_tolerance(j)) {
                std::ostringstream os;
                os << "daughter kernel violates the mass constraint at y=" << y << ": relative residual " << residual
                   << " exceeds " << kernel_tolerance(j);
                throw ContractViolation(os.str());
            }
            if (acc > 0.0)
                for (std::size_t i = 0; i < j; ++i) mat[i * d + j] *= y / acc;
        }
    }

    GridPtr grid_;
    FragmentationRate rate_;
    DaughterKernel daughter_;
    FragmentationOptions opt_;
    std::vector<double> g_;
    std::vector<double> cached_;
    mutable std::vector<double> sample_;
    mutable std::vector<double> scratch_matrix_;
};

/// Max over nodes of |v_n(t) - u + int a v_n - int B v_{n-1}| at the table's
/// end time, where v_n = sum_{k<=n} V_k. Time integrals use the trapezoid rule.
inline double vn_identity_residual(const FragmentationModel& model, const DysonPhillipsTable& table, std::size_t n) {
    if (n > table.order()) throw PreconditionError("identity requested beyond the table order");
    const auto& tg = table.time_grid();
    const std::size_t M = tg.steps(), d = table.dim();
    if (tg.degenerate()) return 0.0;
    std::vector<double> loss(M + 1), gain(M + 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= M; ++j) {
            double vn = 0.0, bv = 0.0;
            for (std::size_t k = 0; k <= n; ++k) vn += table.iterate_span(k, j)[i];
            for (std::size_t k = 0; k < n; ++k) bv += table.b_applied_span(k, j)[i];
            loss[j] = model.rate(tg.node(j), i) * vn;
            gain[j] = bv;
        }
        double vn_end = 0.0;
        for (std::size_t k = 0; k <= n; ++k) vn_end += table.iterate_span(k, M)[i];
        const double r = vn_end - table.u0()[i] + trapezoid(loss, tg.step()) - trapezoid(gain, tg.step());
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

/// Mass that left through the smallest node, summed over iterates 0..n.
/// Estimated directly from the boundary flux (trapezoid in time).
inline double leakage_flux_estimate(const FragmentationModel& model, const DysonPhillipsTable& table, std::size_t n) {
    const auto& tg = table.time_grid();
    if (tg.degenerate()) return 0.0;
    std::vector<double> flux(tg.steps() + 1, 0.0);
    for (std::size_t j = 0; j <= tg.steps(); ++j)
        for (std::size_t k = 0; k <= n; ++k) flux[j] += model.leakage_flux(tg.node(j), table.iterate_span(k, j));
    return trapezoid(flux, tg.step());
}

// ---------------------------------------------------------------------------
// Shattering sweep: singular rates on grids with shrinking x_min

struct ShatteringRow {
    double x_min = 0.0;
    std::size_t nodes = 0;
    double final_defect = 0.0;
    double limit_estimate = 0.0;
    Verdict verdict = Verdict::inconclusive;
    double leakage = 0.0;
    double mass_end = 0.0;
};

struct ShatteringReport {
    double alpha = 0.0;
    std::vector<ShatteringRow> rows;
    /// "increasing", "decreasing", "constant" or "mixed", over the grid sequence.
    std::string defect_trend;
    std::string leakage_trend;
    /// Smallest limit estimate exceeds 10x the absolute threshold.
    bool defect_bounded_away = false;
    bool leakage_bounded_away = false;
};

inline std::string trend_of(const std::vector<double>& v, double rel_tol = 1e-12) {
    bool up = true, down = true;
    for (std::size_t k = 1; k < v.size(); ++k) {
        const double tol = rel_tol * std::max(std::abs(v[k]), std::abs(v[k - 1]));
        up = up && v[k] >= v[k - 1] - tol;
        down = down && v[k] <= v[k - 1] + tol;
    }
    if (up && down) return "constant";
    if (up) return "increasing";
    if (down) return "decreasing";
    return "mixed";
}

struct ShatteringSetup {
    double alpha = 1.0;
    double c = 1.0;
    double x_max = 1.0;
    std::vector<int> levels{3, 4, 5, 6};
    double t_end = 1.0;
    double dt = 1.0 / 64.0;
    std::size_t n_max = 40;
    HonestyOptions honesty{};
    DaughterKernel daughter = DaughterKernel::binary_uniform();
    /// Initial datum as a function of mass; normalized to unit mass on each grid.
    std::function<double(double)> initial = [](double x) { return std::exp(-x); };
};

/// Level L uses a midpoint grid on [x_max / 2^L, x_max] with spacing x_max / 2^L.
inline ShatteringReport shattering_experiment(const ShatteringSetup& s) {
    if (!(s.alpha >= 0.0)) throw PreconditionError("shattering exponent must be nonnegative");
    ShatteringReport rep;
    rep.alpha = s.alpha;
    std::vector<double> defects, leaks;
    double min_limit = std::numeric_limits<double>::infinity(), min_leak = min_limit;
    for (int level : s.levels) {
        if (level < 1) throw PreconditionError("shattering levels must be >= 1");
        const double x_min = s.x_max / std::ldexp(1.0, level);
        const auto n = static_cast<std::size_t>(std::llround((s.x_max - x_min) / x_min));
        auto grid = Grid::uniform_mass(x_min, s.x_max, n);
        FragmentationOptions fo;
        fo.quad_step = s.dt;
        const FragmentationModel model(grid, FragmentationRate::power(s.c, -s.alpha), s.daughter, fo);
        StateVector u(grid);
        for (std::size_t i = 0; i < n; ++i) u[i] = s.initial(grid->node(i));
        u *= 1.0 / l1_norm(u);
        const TimeGrid tg(0.0, s.t_end, s.dt);
        const auto table = iterate_right(model, tg, u, s.n_max);
        const auto series = honesty_verdict(table, s.honesty);
        ShatteringRow row;
        row.x_min = x_min;
        row.nodes = n;
        row.final_defect = series.values.back();
        row.limit_estimate = series.limit_estimate;
        row.verdict = series.verdict;
        row.leakage = mass_ledger(table, table.order()).residual;
        row.mass_end = table.partial_norms().back();
        defects.push_back(row.limit_estimate);
        leaks.push_back(row.leakage);
        min_limit = std::min(min_limit, row.limit_estimate);
        min_leak = std::min(min_leak, row.leakage);
        rep.rows.push_back(row);
    }
    rep.defect_trend = trend_of(defects);
    rep.leakage_trend = trend_of(leaks);
    rep.defect_bounded_away = !rep.rows.empty() && min_limit > 10.0 * s.honesty.threshold;
    rep.leakage_bounded_away = !rep.rows.empty() && min_leak > 10.0 * s.honesty.threshold;
    return rep;
}

} // namespace dpe
