#pragma once

// Dyson-Phillips iterates for a substochastic evolution family U(t,s)
// perturbed by positive operators B(t).
//
// Right recursion (production path):
//     V_0(t,s) u = U(t,s) u
//     V_{n+1}(t,s) u = int_s^t U(t,r) B(r) V_n(r,s) u dr
// Left recursion (cross-validation only, O(M^3) operator products):
//     V_{n+1}(t,s) u = int_s^t V_n(t,r) B(r) U(r,s) u dr
// Both define the same iterates; their sum V(t,s) solves
//     V(t,s) u = U(t,s) u + int_s^t V(t,r) B(r) U(r,s) u dr.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/error.hpp"
#include "dpe/model.hpp"
#include "dpe/state_space.hpp"
#include "dpe/time_grid.hpp"

namespace dpe {

struct EngineDefaults {
    static constexpr double series_tol = 1e-10;
    static constexpr std::size_t n_cap = 40;
    static constexpr std::size_t left_cap = 64;
};

/// Iterates V_n(tau_j, s) u0 and B(tau_j) V_n(tau_j, s) u0 for n = 0..N, j = 0..M.
class DysonPhillipsTable {
public:
    DysonPhillipsTable(TimeGrid tg, StateVector u0, std::size_t order)
        : time_grid_(tg), u0_(std::move(u0)), order_(order), dim_(u0_.size()),
          iterates_(order + 1, std::vector<double>((tg.steps() + 1) * dim_, 0.0)),
          b_applied_(order + 1, std::vector<double>((tg.steps() + 1) * dim_, 0.0)) {}

    const TimeGrid& time_grid() const noexcept { return time_grid_; }
    const StateVector& u0() const noexcept { return u0_; }
    const GridPtr& grid() const noexcept { return u0_.grid(); }
    /// Highest iterate index N held by the table.
    std::size_t order() const noexcept { return order_; }
    std::size_t steps() const noexcept { return time_grid_.steps(); }
    std::size_t dim() const noexcept { return dim_; }

    std::span<const double> iterate_span(std::size_t n, std::size_t j) const {
        return {iterates_.at(n).data() + j * dim_, dim_};
    }
    std::span<double> iterate_span(std::size_t n, std::size_t j) { return {iterates_.at(n).data() + j * dim_, dim_}; }
    std::span<const double> b_applied_span(std::size_t n, std::size_t j) const {
        return {b_applied_.at(n).data() + j * dim_, dim_};
    }
    std::span<double> b_applied_span(std::size_t n, std::size_t j) {
        return {b_applied_.at(n).data() + j * dim_, dim_};
    }

    StateVector iterate(std::size_t n, std::size_t j) const { return to_state(iterate_span(n, j)); }
    StateVector b_applied(std::size_t n, std::size_t j) const { return to_state(b_applied_span(n, j)); }

    double iterate_norm(std::size_t n, std::size_t j) const { return l1_norm(iterate_span(n, j), grid()->weights()); }
    double b_norm(std::size_t n, std::size_t j) const { return l1_norm(b_applied_span(n, j), grid()->weights()); }

    /// Sum_{k <= n} |V_k(t_end, s) u0|.
    const std::vector<double>& partial_norms() const noexcept { return partial_norms_; }
    /// Trapezoid integrals of |B(tau) V_n(tau, s) u0| over [s, t_end].
    const std::vector<double>& defects() const noexcept { return defects_; }

    /// Sum_{k <= n} V_k(tau_j, s) u0.
    StateVector partial_sum(std::size_t n, std::size_t j) const {
        StateVector out(grid());
        for (std::size_t k = 0; k <= std::min(n, order_); ++k) {
            const auto v = iterate_span(k, j);
            for (std::size_t i = 0; i < dim_; ++i) out[i] += v[i];
        }
        return out;
    }

    /// Smallest coefficient over all stored iterates.
    double min_coefficient() const {
        double m = 0.0;
        for (const auto& row : iterates_)
            for (double c : row) m = std::min(m, c);
        return m;
    }

    /// Recomputes partial norms and defects from the stored rows.
    void finalize() {
        const auto w = grid()->weights();
        const auto M = steps();
        partial_norms_.assign(order_ + 1, 0.0);
        defects_.assign(order_ + 1, 0.0);
        double acc = 0.0;
        std::vector<double> bn(M + 1);
        for (std::size_t n = 0; n <= order_; ++n) {
            acc += l1_norm(iterate_span(n, M), w);
            partial_norms_[n] = acc;
            for (std::size_t j = 0; j <= M; ++j) bn[j] = l1_norm(b_applied_span(n, j), w);
            defects_[n] = trapezoid(bn, time_grid_.step());
        }
    }

    /// Elementwise a * this + b * other (tables on the same lattice).
    void combine(double a, const DysonPhillipsTable& other, double b) {
        for (std::size_t n = 0; n <= order_; ++n)
            for (std::size_t x = 0; x < iterates_[n].size(); ++x) {
                iterates_[n][x] = a * iterates_[n][x] + b * other.iterates_[n][x];
                b_applied_[n][x] = a * b_applied_[n][x] + b * other.b_applied_[n][x];
            }
    }

    void set_u0(StateVector u0) { u0_ = std::move(u0); }

private:
    StateVector to_state(std::span<const double> s) const {
        return StateVector(grid(), std::vector<double>(s.begin(), s.end()));
    }

    TimeGrid time_grid_;
    StateVector u0_;
    std::size_t order_;
    std::size_t dim_;
    std::vector<std::vector<double>> iterates_;
    std::vector<std::vector<double>> b_applied_;
    std::vector<double> partial_norms_;
    std::vector<double> defects_;
};

namespace detail {

template <EvolutionModel M>
void check_grid(const M& model, const StateVector& u0) {
    const GridPtr g = model.grid();
    if (!(g == u0.grid() || *g == *u0.grid())) throw StructuralError("initial datum is not on the model grid");
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <EvolutionModel M>
void eval_B(const M& model, std::size_t n, double tau, std::span<const double> in, std::span<double> out) {
    try {
        model.apply_B(tau, in, out);
    } catch (const Error& e) {
        std::ostringstream msg;
        msg << "perturbation failed at iterate n=" << n << ", tau=" << tau << ": " << e.what();
        throw EvaluationError(msg.str());
    }
    if (!all_finite(out)) {
        std::ostringstream msg;
        msg << "perturbation produced a non-finite value at iterate n=" << n << ", tau=" << tau;
        throw EvaluationError(msg.str());
    }
}

template <EvolutionModel M>
void eval_U(const M& model, double t, double s, std::span<const double> in, std::span<double> out) {
    if (t == s) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    model.apply_U(t, s, in, out);
}

template <EvolutionModel M>
DysonPhillipsTable right_recursion(const M& model, const TimeGrid& tg, const StateVector& u0, std::size_t N) {
    DysonPhillipsTable table(tg, u0, N);
    const std::size_t M_ = tg.steps();
    const std::size_t d = u0.size();
    const double dt = tg.step();
    std::vector<double> tmp(d), avg;

    for (std::size_t j = 0; j <= M_; ++j) eval_U(model, tg.node(j), tg.start(), u0.coeffs(), table.iterate_span(0, j));

    for (std::size_t n = 0; n <= N; ++n) {
        for (std::size_t j = 0; j <= M_; ++j)
            eval_B(model, n, tg.node(j), table.iterate_span(n, j), table.b_applied_span(n, j));
        if (n == N) break;

        if (tg.rule() == QuadratureRule::midpoint) {
            // Cell average of B V_n, propagated from the cell midpoint.
            avg.assign(M_ * d, 0.0);
            for (std::size_t k = 0; k < M_; ++k) {
                const auto g0 = table.b_applied_span(n, k);
                const auto g1 = table.b_applied_span(n, k + 1);
                for (std::size_t i = 0; i < d; ++i) avg[k * d + i] = 0.5 * (g0[i] + g1[i]);
            }
        }
        for (std::size_t j = 1; j <= M_; ++j) {
            auto out = table.iterate_span(n + 1, j);
            const double tj = tg.node(j);
            if (tg.rule() == QuadratureRule::trapezoid) {
                for (std::size_t k = 0; k <= j; ++k) {
                    const double w = trapezoid_weight(k, j, dt);
                    eval_U(model, tj, tg.node(k), table.b_applied_span(n, k), tmp);
                    for (std::size_t i = 0; i < d; ++i) out[i] += w * tmp[i];
                }
            } else {
                for (std::size_t k = 0; k < j; ++k) {
                    model.apply_U(tj, tg.midpoint(k), std::span<const double>(avg.data() + k * d, d), tmp);
                    for (std::size_t i = 0; i < d; ++i) out[i] += dt * tmp[i];
                }
            }
        }
    }
    return table;
}

} // namespace detail

/// Right-form iterates on `tg` up to order N. Signed data are split into their
/// positive and negative parts, processed separately and recombined.
template <EvolutionModel M>
DysonPhillipsTable iterate_right(const M& model, const TimeGrid& tg, const StateVector& u0, std::size_t N) {
    detail::check_grid(model, u0);
    if (u0.is_nonnegative()) {
        auto table = detail::right_recursion(model, tg, u0, N);
        table.finalize();
        return table;
    }
    const auto parts = decompose(u0);
    auto table = detail::right_recursion(model, tg, parts.plus, N);
    table.combine(1.0, detail::right_recursion(model, tg, parts.minus, N), -1.0);
    table.set_u0(u0);
    table.finalize();
    return table;
}

/// All left-form operators V_n(tau_j, tau_k), 0 <= k <= j <= M, stored densely.
///
/// The left recursion needs V_n started at every intermediate node, which is
/// why it is built as a full operator table. Memory and time grow like M^2 and
/// M^3; construction refuses M above `cap`.
class LeftOperatorTable {
public:
    template <EvolutionModel Model>
    LeftOperatorTable(const Model& model, const TimeGrid& tg, std::size_t N, std::size_t cap = EngineDefaults::left_cap)
        : time_grid_(tg), grid_(model.grid()), order_(N), dim_(model.grid()->size()) {
        const std::size_t M_ = tg.steps();
        if (M_ > cap)
            throw SizeError("left recursion needs M <= " + std::to_string(cap) + " steps, got " + std::to_string(M_));
        const std::size_t d = dim_;
        const double dt = tg.step();
        const std::size_t pairs = (M_ + 1) * (M_ + 2) / 2;
        ops_.assign(N + 1, std::vector<Eigen::MatrixXd>(pairs));

        auto as_matrix = [d](const std::vector<double>& rm) {
            Eigen::MatrixXd m(d, d);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) m(i, j) = rm[i * d + j];
            return m;
        };

        std::vector<Eigen::MatrixXd> bmat(M_ + 1);
        for (std::size_t l = 0; l <= M_; ++l) {
            const double tau = tg.node(l);
            bmat[l] = as_matrix(dense_matrix(d, [&](std::span<const double> in, std::span<double> out) {
                detail::eval_B(model, 0, tau, in, out);
            }));
        }
        for (std::size_t j = 0; j <= M_; ++j)
            for (std::size_t k = 0; k <= j; ++k) {
                const double tj = tg.node(j), tk = tg.node(k);
                ops_[0][index(j, k)] = as_matrix(dense_matrix(d, [&](std::span<const double> in, std::span<double> out) {
                    detail::eval_U(model, tj, tk, in, out);
                }));
            }
        // P(l, k) = B(tau_l) U(tau_l, tau_k)
        std::vector<Eigen::MatrixXd> p(pairs);
        for (std::size_t l = 0; l <= M_; ++l)
            for (std::size_t k = 0; k <= l; ++k) p[index(l, k)] = bmat[l] * ops_[0][index(l, k)];

        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t j = 0; j <= M_; ++j)
                for (std::size_t k = 0; k <= j; ++k) {
                    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
                    const std::size_t len = j - k;
                    for (std::size_t l = k; l <= j; ++l) {
                        const double w = trapezoid_weight(l - k, len, dt);
                        if (w == 0.0) continue;
                        acc.noalias() += w * (ops_[n][index(j, l)] * p[index(l, k)]);
                    }
                    ops_[n + 1][index(j, k)] = std::move(acc);
                }
    }

    const TimeGrid& time_grid() const noexcept { return time_grid_; }
    std::size_t order() const noexcept { return order_; }

    /// V_n(tau_j, tau_k) as a dense matrix.
    const Eigen::MatrixXd& op(std::size_t n, std::size_t j, std::size_t k) const {
        if (k > j) throw PreconditionError("left operator requested with start after end");
        return ops_.at(n).at(index(j, k));
    }

    StateVector apply(std::size_t n, std::size_t j, std::size_t k, const StateVector& u) const {
        Eigen::Map<const Eigen::VectorXd> x(u.coeffs().data(), static_cast<Eigen::Index>(dim_));
        Eigen::VectorXd y = op(n, j, k) * x;
        return StateVector(grid_, std::vector<double>(y.data(), y.data() + y.size()));
    }

private:
    static std::size_t index(std::size_t j, std::size_t k) noexcept { return j * (j + 1) / 2 + k; }

    TimeGrid time_grid_;
    GridPtr grid_;
    std::size_t order_;
    std::size_t dim_;
    std::vector<std::vector<Eigen::MatrixXd>> ops_;
};

/// Left-form iterates for u0, started at tg.start(). Always uses the trapezoid rule.
template <EvolutionModel M>
DysonPhillipsTable iterate_left(const M& model, const TimeGrid& tg, const StateVector& u0, std::size_t N,
                                std::size_t cap = EngineDefaults::left_cap) {
    detail::check_grid(model, u0);
    const LeftOperatorTable ops(model, tg, N, cap);
    DysonPhillipsTable table(tg, u0, N);
    for (std::size_t n = 0; n <= N; ++n)
        for (std::size_t j = 0; j <= tg.steps(); ++j) {
            const auto v = ops.apply(n, j, 0, u0);
            std::copy(v.coeffs().begin(), v.coeffs().end(), table.iterate_span(n, j).begin());
            detail::eval_B(model, n, tg.node(j), table.iterate_span(n, j), table.b_applied_span(n, j));
        }
    table.finalize();
    return table;
}

/// max over n, j of |V_n(tau_j, s) u0| difference between two tables on the same lattice.
inline double table_discrepancy(const DysonPhillipsTable& a, const DysonPhillipsTable& b) {
    if (a.steps() != b.steps() || a.order() != b.order() || a.dim() != b.dim())
        throw StructuralError("tables have different shapes");
    double worst = 0.0;
    std::vector<double> diff(a.dim());
    for (std::size_t n = 0; n <= a.order(); ++n)
        for (std::size_t j = 0; j <= a.steps(); ++j) {
            const auto x = a.iterate_span(n, j), y = b.iterate_span(n, j);
            for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = x[i] - y[i];
            worst = std::max(worst, l1_norm(std::span<const double>(diff), a.grid()->weights()));
        }
    return worst;
}

struct SeriesResult {
    StateVector value;
    std::size_t n_used = 0;
    bool converged = true;
};

/// Sum of V_n(t_end, s) u0 up to the first n whose iterate norm drops below
/// tol * |u0| (that iterate included), or up to the table order.
inline SeriesResult series_sum(const DysonPhillipsTable& table, double tol = EngineDefaults::series_tol) {
    const auto M_ = table.steps();
    const double u_norm = l1_norm(table.u0());
    if (u_norm == 0.0) return {StateVector(table.grid()), 0, true};
    SeriesResult res{StateVector(table.grid()), table.order(), false};
    for (std::size_t n = 0; n <= table.order(); ++n) {
        const auto v = table.iterate_span(n, M_);
        for (std::size_t i = 0; i < v.size(); ++i) res.value[i] += v[i];
        if (l1_norm(v, table.grid()->weights()) < tol * u_norm) {
            res.n_used = n;
            res.converged = true;
            break;
        }
    }
    return res;
}

/// Series value at lattice node j, summing all stored iterates.
inline StateVector series_at(const DysonPhillipsTable& table, std::size_t j) {
    return table.partial_sum(table.order(), j);
}

/// The perturbed family V(t,s) realized by right recursion plus series summation
/// on a fixed lattice step.
template <EvolutionModel M>
class PerturbedFamily {
public:
    PerturbedFamily(const M& model, double dt, std::size_t N = EngineDefaults::n_cap,
                    double tol = EngineDefaults::series_tol, QuadratureRule rule = QuadratureRule::trapezoid)
        : model_(&model), dt_(dt), order_(N), tol_(tol), rule_(rule) {}

    double step() const noexcept { return dt_; }
    std::size_t order() const noexcept { return order_; }
    const M& model() const noexcept { return *model_; }

    DysonPhillipsTable table(double t, double s, const StateVector& u) const {
        return iterate_right(*model_, TimeGrid(s, t, dt_, rule_), u, order_);
    }

    /// V(t,s) u; t - s must be a multiple of the step.
    StateVector apply(double t, double s, const StateVector& u) const {
        const TimeGrid tg(s, t, dt_, rule_);
        if (tg.degenerate()) return u;
        return series_sum(iterate_right(*model_, tg, u, order_), tol_).value;
    }

private:
    const M* model_;
    double dt_;
    std::size_t order_;
    double tol_;
    QuadratureRule rule_;
};

/// |V(t,s)u0 - U(t,s)u0 - int_s^t V(t,r) B(r) U(r,s) u0 dr| at t = t_end.
///
/// The first V is the summed `v_table`; the V(t,r) inside the integral comes
/// from one right-recursion table per quadrature node r, summed to
/// `reference_order`, so truncating `v_table` shows up in the residual.
template <EvolutionModel M>
double duhamel_residual(const M& model, const TimeGrid& tg, const StateVector& u0, const DysonPhillipsTable& v_table,
                        std::size_t reference_order = EngineDefaults::n_cap) {
    if (tg.degenerate()) return 0.0;
    const auto M_ = tg.steps();
    detail::check_grid(model, u0);
    StateVector diff = series_at(v_table, M_);
    diff -= v_table.iterate(0, M_);
    for (std::size_t k = 0; k <= M_; ++k) {
        const double w = trapezoid_weight(k, M_, tg.step());
        const StateVector g = v_table.b_applied(0, k); // B(r) U(r,s) u0
        if (k == M_) {
            diff.axpy(-w, g);
            continue;
        }
        const TimeGrid sub(tg.node(k), tg.end(), tg.step(), tg.rule());
        const auto sub_table = iterate_right(model, sub, g, reference_order);
        const StateVector vg = series_at(sub_table, sub.steps());
        diff.axpy(-w, vg);
    }
    return l1_norm(diff);
}

/// |V(t,s)u0 - V(t,r)V(r,s)u0| for lattice times s <= r <= t.
template <EvolutionModel M>
double cocycle_residual(const PerturbedFamily<M>& family, double t, double r, double s, const StateVector& u0) {
    if (!(s <= r && r <= t)) throw PreconditionError("cocycle check needs s <= r <= t");
    const TimeGrid full(s, t, family.step());
    full.index_of(r); // throws when r is off the lattice
    const auto direct = family.apply(t, s, u0);
    const auto composed = family.apply(t, r, family.apply(r, s, u0));
    return l1_norm(direct - composed);
}

/// max_n |V_n(t,s)u - sum_k V_k(t,r) V_{n-k}(r,s) u| with s, t the ends of the
/// operator table's lattice and r a lattice node.
inline double iterate_binomial_check(const LeftOperatorTable& ops, const StateVector& u, double r) {
    const auto& tg = ops.time_grid();
    const std::size_t jr = tg.index_of(r);
    const std::size_t jt = tg.steps();
    double worst = 0.0;
    for (std::size_t n = 0; n <= ops.order(); ++n) {
        StateVector diff = ops.apply(n, jt, 0, u);
        for (std::size_t k = 0; k <= n; ++k) diff -= ops.apply(k, jt, jr, ops.apply(n - k, jr, 0, u));
        worst = std::max(worst, l1_norm(diff));
    }
    return worst;
}

} // namespace dpe
