#pragma once

// Lifted space X = L^1(R+, E) on a truncated, uniform time axis.
//
// An evolution family acts on X as the evolutionary semigroup
//     (T0(t) f)(r) = U(r, r - t) f(r - t)  for r >= t, 0 otherwise,
// with generator Z g = -dg/dt - Sigma g and g(0) = 0. The perturbed
// semigroup has generator G = Z + B. Both are discretized by upwind
// differences, which keeps (lambda - Z_h) an M-matrix and its inverse positive.
// The resolvents are block lower bidiagonal, so they are solved node by node.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dpe/dyson_phillips.hpp"
#include "dpe/error.hpp"
#include "dpe/io.hpp"
#include "dpe/model.hpp"
#include "dpe/state_space.hpp"
#include "dpe/time_grid.hpp"

namespace dpe {

/// Nodes r_k = k h for k = 0..K.
class LiftedAxis {
public:
    LiftedAxis(double h, double t_max) : h_(h) {
        if (!(h > 0.0) || !(t_max > 0.0)) throw PreconditionError("lifted axis needs h > 0 and T_max > 0");
        const double k = t_max / h;
        K_ = static_cast<std::size_t>(std::llround(k));
        if (std::abs(k - static_cast<double>(K_)) > 1e-9 * std::max(1.0, k))
            throw PreconditionError("T_max must be a multiple of h");
    }

    double step() const noexcept { return h_; }
    std::size_t last() const noexcept { return K_; }
    std::size_t size() const noexcept { return K_ + 1; }
    double node(std::size_t k) const noexcept { return h_ * static_cast<double>(k); }
    double t_max() const noexcept { return node(K_); }

    /// Lattice index of t; throws off the lattice.
    std::size_t index_of(double t) const {
        const double k = t / h_;
        const auto m = static_cast<long long>(std::llround(k));
        if (m < 0 || std::abs(k - static_cast<double>(m)) > 1e-9 * std::max(1.0, k))
            throw PreconditionError("time " + io::format_double(t) + " is not on the lifted lattice");
        return static_cast<std::size_t>(m);
    }

    bool operator==(const LiftedAxis& o) const { return h_ == o.h_ && K_ == o.K_; }

private:
    double h_;
    std::size_t K_ = 0;
};

class LiftedVector {
public:
    LiftedVector(LiftedAxis axis, GridPtr grid)
        : axis_(axis), grid_(std::move(grid)), data_(axis_.size() * grid_->size(), 0.0) {}

    const LiftedAxis& axis() const noexcept { return axis_; }
    const GridPtr& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return grid_->size(); }

    std::span<double> at(std::size_t k) { return {data_.data() + k * dim(), dim()}; }
    std::span<const double> at(std::size_t k) const { return {data_.data() + k * dim(), dim()}; }
    StateVector state(std::size_t k) const {
        const auto s = at(k);
        return StateVector(grid_, std::vector<double>(s.begin(), s.end()));
    }
    void set(std::size_t k, const StateVector& v) { std::copy(v.coeffs().begin(), v.coeffs().end(), at(k).begin()); }

    /// sum_k h |f(r_k)|
    double norm() const {
        double acc = 0.0;
        for (std::size_t k = 0; k < axis_.size(); ++k) acc += axis_.step() * l1_norm(at(k), grid_->weights());
        return acc;
    }

    bool is_nonnegative(double tol = 0.0) const {
        for (double x : data_)
            if (x < -tol) return false;
        return true;
    }
    bool slice_is_zero(std::size_t k) const {
        for (double x : at(k))
            if (x != 0.0) return false;
        return true;
    }

    LiftedVector& operator+=(const LiftedVector& o) {
        check(o);
        for (std::size_t x = 0; x < data_.size(); ++x) data_[x] += o.data_[x];
        return *this;
    }
    LiftedVector& operator-=(const LiftedVector& o) {
        check(o);
        for (std::size_t x = 0; x < data_.size(); ++x) data_[x] -= o.data_[x];
        return *this;
    }
    LiftedVector& operator*=(double a) {
        for (double& x : data_) x *= a;
        return *this;
    }
    friend LiftedVector operator-(LiftedVector a, const LiftedVector& b) { return a -= b; }
    friend LiftedVector operator+(LiftedVector a, const LiftedVector& b) { return a += b; }

    const std::vector<double>& raw() const noexcept { return data_; }
    std::vector<double>& raw() noexcept { return data_; }

private:
    void check(const LiftedVector& o) const {
        if (!(axis_ == o.axis_) || data_.size() != o.data_.size()) throw StructuralError("lifted vectors differ in shape");
    }

    LiftedAxis axis_;
    GridPtr grid_;
    std::vector<double> data_;
};

/// Fills node k with fn(r_k) (a StateVector).
template <class Fn>
LiftedVector make_lifted(const LiftedAxis& axis, const GridPtr& grid, Fn&& fn) {
    LiftedVector f(axis, grid);
    for (std::size_t k = 0; k < axis.size(); ++k) f.set(k, fn(axis.node(k)));
    return f;
}

// ---------------------------------------------------------------------------
// Semigroups

template <EvolutionModel M>
LiftedVector apply_T0(const M& model, double t, const LiftedVector& f) {
    const auto& ax = f.axis();
    const std::size_t m = ax.index_of(t);
    LiftedVector out(ax, f.grid());
    for (std::size_t k = m; k < ax.size(); ++k) model.apply_U(ax.node(k), ax.node(k - m), f.at(k - m), out.at(k));
    return out;
}

/// (T_n(t) f)(r) = V_n(r, r - t) f(r - t), with V_n from the right recursion on step h.
template <EvolutionModel M>
LiftedVector apply_Tn(const M& model, std::size_t n, double t, const LiftedVector& f) {
    const auto& ax = f.axis();
    const std::size_t m = ax.index_of(t);
    LiftedVector out(ax, f.grid());
    for (std::size_t k = m; k < ax.size(); ++k) {
        if (f.slice_is_zero(k - m)) continue;
        if (m == 0) {
            if (n == 0) std::copy(f.at(k).begin(), f.at(k).end(), out.at(k).begin());
            continue;
        }
        const TimeGrid tg(ax.node(k - m), ax.node(k), ax.step());
        const auto table = iterate_right(model, tg, f.state(k - m), n);
        const auto v = table.iterate_span(n, tg.steps());
        std::copy(v.begin(), v.end(), out.at(k).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generator and resolvents

enum class LiftedOperator { Z, G };

/// Sparse matrix of Z_h (or G_h = Z_h + B) over the index (k, i) -> k d + i.
template <DiagonalLossModel M>
Eigen::SparseMatrix<double> generator_matrix(const M& model, const LiftedAxis& ax, LiftedOperator op) {
    const std::size_t d = model.grid()->size();
    const auto n = static_cast<Eigen::Index>(ax.size() * d);
    std::vector<Eigen::Triplet<double>> trip;
    const double ih = 1.0 / ax.step();
    std::vector<double> bmat;
    for (std::size_t k = 0; k < ax.size(); ++k) {
        const double r = ax.node(k);
        if (op == LiftedOperator::G)
            bmat = dense_matrix(d, [&](std::span<const double> in, std::span<double> out) { model.apply_B(r, in, out); });
        for (std::size_t i = 0; i < d; ++i) {
            const auto row = static_cast<Eigen::Index>(k * d + i);
            trip.emplace_back(row, row, -ih - model.loss_rate(r, i));
            if (k > 0) trip.emplace_back(row, static_cast<Eigen::Index>((k - 1) * d + i), ih);
            if (op == LiftedOperator::G)
                for (std::size_t j = 0; j < d; ++j)
                    if (bmat[i * d + j] != 0.0) trip.emplace_back(row, static_cast<Eigen::Index>(k * d + j), bmat[i * d + j]);
        }
    }
    Eigen::SparseMatrix<double> Z(n, n);
    Z.setFromTriplets(trip.begin(), trip.end());
    return Z;
}

/// Solves (lambda - Op) g = f node by node:
///     (lambda + 1/h + Sigma(r_k) - [B(r_k)]) g_k = f_k + g_{k-1} / h.
template <DiagonalLossModel M>
LiftedVector resolvent_solve(const M& model, LiftedOperator op, double lambda, const LiftedVector& f) {
    if (!(lambda > 0.0)) throw PreconditionError("resolvent needs lambda > 0");
    const auto& ax = f.axis();
    const std::size_t d = f.dim();
    const double ih = 1.0 / ax.step();
    LiftedVector g(ax, f.grid());
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(d));
    Eigen::MatrixXd A(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < ax.size(); ++k) {
        const double r = ax.node(k);
        for (std::size_t i = 0; i < d; ++i)
            rhs(static_cast<Eigen::Index>(i)) = f.at(k)[i] + (k > 0 ? ih * g.at(k - 1)[i] : 0.0);
        if (op == LiftedOperator::Z) {
            for (std::size_t i = 0; i < d; ++i) {
                const double diag = lambda + ih + model.loss_rate(r, i);
                if (!(diag > 0.0)) throw Error("internal error: singular resolvent block");
                g.at(k)[i] = rhs(static_cast<Eigen::Index>(i)) / diag;
            }
            continue;
        }
        const auto bmat = dense_matrix(d, [&](std::span<const double> in, std::span<double> out) { model.apply_B(r, in, out); });
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    (i == j ? lambda + ih + model.loss_rate(r, i) : 0.0) - bmat[i * d + j];
        const Eigen::VectorXd sol = A.partialPivLu().solve(rhs);
        for (std::size_t i = 0; i < d; ++i) g.at(k)[i] = sol(static_cast<Eigen::Index>(i));
    }
    return g;
}

/// Pointwise B: (B f)(r_k) = B(r_k) f(r_k).
template <EvolutionModel M>
LiftedVector apply_B_lifted(const M& model, const LiftedVector& f) {
    LiftedVector out(f.axis(), f.grid());
    for (std::size_t k = 0; k < f.axis().size(); ++k) model.apply_B(f.axis().node(k), f.at(k), out.at(k));
    return out;
}

/// (fB_lambda f)(s) = int_0^s exp(-lambda (s - tau)) B(s) U(s, tau) f(tau) dtau, trapezoid in tau.
template <EvolutionModel M>
LiftedVector fB_lambda(const M& model, double lambda, const LiftedVector& f) {
    if (!(lambda > 0.0)) throw PreconditionError("fB_lambda needs lambda > 0");
    const auto& ax = f.axis();
    const std::size_t d = f.dim();
    const double h = ax.step();
    LiftedVector out(ax, f.grid());
    std::vector<double> acc(d), tmp(d);
    for (std::size_t k = 0; k < ax.size(); ++k) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j <= k; ++j) {
            if (f.slice_is_zero(j)) continue;
            const double w = (k == 0) ? 0.0 : ((j == 0 || j == k) ? 0.5 * h : h);
            if (w == 0.0) continue;
            model.apply_U(ax.node(k), ax.node(j), f.at(j), tmp);
            const double e = w * std::exp(-lambda * (ax.node(k) - ax.node(j)));
            for (std::size_t i = 0; i < d; ++i) acc[i] += e * tmp[i];
        }
        model.apply_B(ax.node(k), acc, out.at(k));
    }
    return out;
}

/// max over times of the weighted L^1 operator norm of B(t).
template <EvolutionModel M>
double perturbation_norm(const M& model, std::span<const double> times) {
    const auto g = model.grid();
    const std::size_t d = g->size();
    double worst = 0.0;
    for (double t : times) {
        const auto b = dense_matrix(d, [&](std::span<const double> in, std::span<double> out) { model.apply_B(t, in, out); });
        for (std::size_t j = 0; j < d; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < d; ++i) col += g->weight(i) * std::abs(b[i * d + j]);
            worst = std::max(worst, col / g->weight(j));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Identity checks

struct LiftedCheck {
    std::string name;
    double h = 0.0;
    double lambda = 0.0;
    std::size_t n = 0;
    double residual = 0.0;
    double truncation_bound = 0.0;
    /// Residual after each added term (series check only).
    std::vector<double> history;
};

inline double truncation_bound(double lambda, const LiftedAxis& ax, const LiftedVector& f) {
    return std::exp(-lambda * ax.t_max()) * f.norm() / lambda;
}

/// | R_G fB_lambda f - R_G f + R_Z f |
template <DiagonalLossModel M>
LiftedCheck identity_lgBl_check(const M& model, double lambda, const LiftedVector& f) {
    const auto lhs = resolvent_solve(model, LiftedOperator::G, lambda, fB_lambda(model, lambda, f));
    auto diff = lhs - resolvent_solve(model, LiftedOperator::G, lambda, f);
    diff += resolvent_solve(model, LiftedOperator::Z, lambda, f);
    return {"identity_lgBl", f.axis().step(), lambda, 0, diff.norm(), truncation_bound(lambda, f.axis(), f), {}};
}

/// | R_G f - sum_{k<=N} R_Z (B R_Z)^k f |, with the residual after each added term.
template <DiagonalLossModel M>
LiftedCheck resolvent_series_check(const M& model, double lambda, const LiftedVector& f, std::size_t N) {
    const auto target = resolvent_solve(model, LiftedOperator::G, lambda, f);
    auto term = resolvent_solve(model, LiftedOperator::Z, lambda, f);
    auto partial = term;
    std::vector<double> res{(target - partial).norm()};
    for (std::size_t k = 1; k <= N; ++k) {
        term = resolvent_solve(model, LiftedOperator::Z, lambda, apply_B_lifted(model, term));
        partial += term;
        res.push_back((target - partial).norm());
    }
    return {"resolvent_series", f.axis().step(), lambda, N, res.back(), truncation_bound(lambda, f.axis(), f), res};
}

/// Largest ratio res[k+1] / res[k] of the series history, ignoring steps that
/// end below `floor_abs` (rounding level).
inline double worst_series_ratio(const LiftedCheck& c, double floor_abs) {
    double worst = 0.0;
    for (std::size_t k = 1; k < c.history.size(); ++k)
        if (c.history[k] > floor_abs && c.history[k - 1] > 0.0) worst = std::max(worst, c.history[k] / c.history[k - 1]);
    return worst;
}

/// | int_0^T exp(-lambda t) T_n(t) f dt - R_Z (B R_Z)^n f |. The Laplace integral
/// uses the trapezoid rule on the lattice; T_n is built from one right table per
/// nonzero time slice of f.
template <DiagonalLossModel M>
LiftedCheck laplace_Tn_check(const M& model, double lambda, std::size_t n, const LiftedVector& f) {
    if (!(lambda > 0.0)) throw PreconditionError("Laplace check needs lambda > 0");
    const auto& ax = f.axis();
    if (std::exp(-lambda * ax.t_max()) >= 1e-10) {
        const double need = std::log(1e10) / lambda;
        throw PreconditionError("lifted horizon too short: exp(-lambda T_max) must be below 1e-10, need T_max >= " +
                                io::format_double(need));
    }
    const std::size_t K = ax.last(), d = f.dim();
    const double h = ax.step();
    LiftedVector laplace(ax, f.grid());
    for (std::size_t j = 0; j <= K; ++j) {
        if (f.slice_is_zero(j)) continue;
        // t = 0 term: T_n(0) f = f for n = 0 and 0 otherwise
        if (n == 0)
            for (std::size_t i = 0; i < d; ++i) laplace.at(j)[i] += 0.5 * h * f.at(j)[i];
        if (j == K) continue;
        const TimeGrid tg(ax.node(j), ax.t_max(), h);
        const auto table = iterate_right(model, tg, f.state(j), n);
        for (std::size_t m = 1; j + m <= K; ++m) {
            const double w = (m == K) ? 0.5 * h : h;
            const double e = w * std::exp(-lambda * ax.node(m));
            const auto v = table.iterate_span(n, m);
            for (std::size_t i = 0; i < d; ++i) laplace.at(j + m)[i] += e * v[i];
        }
    }
    auto rhs = resolvent_solve(model, LiftedOperator::Z, lambda, f);
    for (std::size_t k = 1; k <= n; ++k) rhs = resolvent_solve(model, LiftedOperator::Z, lambda, apply_B_lifted(model, rhs));
    return {"laplace_Tn", h, lambda, n, (laplace - rhs).norm(), truncation_bound(lambda, ax, f), {}};
}

/// Duhamel identity in X at time t: | T(t) f - T0(t) f - int_0^t T(t - s) B T0(s) f ds |.
/// Fibre by fibre this is the E-space Duhamel identity on [r - t, r].
template <EvolutionModel M>
LiftedCheck lifted_duhamel_check(const M& model, double t, const LiftedVector& f, std::size_t order = EngineDefaults::n_cap) {
    const auto& ax = f.axis();
    const std::size_t m = ax.index_of(t);
    double acc = 0.0;
    for (std::size_t k = m; k < ax.size() && m > 0; ++k) {
        if (f.slice_is_zero(k - m)) continue;
        const TimeGrid tg(ax.node(k - m), ax.node(k), ax.step());
        const auto u = f.state(k - m);
        acc += ax.step() * duhamel_residual(model, tg, u, iterate_right(model, tg, u, order), order);
    }
    return {"lifted_duhamel", ax.step(), 0.0, m, acc, 0.0, {}};
}

/// Columns check_name, h, lambda, n, residual, truncation_bound.
inline void write_checks_csv(std::ostream& os, const std::vector<LiftedCheck>& checks) {
    io::CsvWriter csv(os);
    csv.header({"check_name", "h", "lambda", "n", "residual", "truncation_bound"});
    for (const auto& c : checks) csv.row(c.name, c.h, c.lambda, c.n, c.residual, c.truncation_bound);
}

} // namespace dpe
