#pragma once

// Model concepts for the perturbation engine.
//
// A model supplies a substochastic evolution family U(t, s) and a family of
// positive perturbations B(t) on one Grid. Both act on raw coefficient spans
// so the recursions can run without allocating per application.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/error.hpp"
#include "dpe/state_space.hpp"

namespace dpe {

template <class M>
concept EvolutionModel = requires(const M& m, double t, double s, std::span<const double> in, std::span<double> out) {
    { m.grid() } -> std::convertible_to<GridPtr>;
    m.apply_U(t, s, in, out);
    m.apply_B(t, in, out);
};

/// Models whose U is multiplication by exp(-int_s^t rate(tau, i) dtau). The
/// lifted generator needs the rate explicitly.
template <class M>
concept DiagonalLossModel = EvolutionModel<M> && requires(const M& m, double t, std::size_t i) {
    { m.loss_rate(t, i) } -> std::convertible_to<double>;
};

template <EvolutionModel M>
StateVector apply_U(const M& model, double t, double s, const StateVector& u) {
    StateVector out(u.grid());
    model.apply_U(t, s, u.coeffs(), out.coeffs());
    return out;
}

template <EvolutionModel M>
StateVector apply_B(const M& model, double t, const StateVector& u) {
    StateVector out(u.grid());
    model.apply_B(t, u.coeffs(), out.coeffs());
    return out;
}

/// Column-by-column dense matrix of a linear map on the grid (row-major, d x d).
template <class Apply>
std::vector<double> dense_matrix(std::size_t d, Apply&& apply) {
    std::vector<double> mat(d * d), e(d, 0.0), col(d);
    for (std::size_t j = 0; j < d; ++j) {
        e[j] = 1.0;
        apply(std::span<const double>(e), std::span<double>(col));
        for (std::size_t i = 0; i < d; ++i) mat[i * d + j] = col[i];
        e[j] = 0.0;
    }
    return mat;
}

struct ContractTolerances {
    double positivity = 1e-15;
    double substochastic = 1e-12;
    double cocycle = 1e-10;
};

/// Outcome of probing a model against the evolution-family / perturbation assumptions.
struct ContractReport {
    double min_coefficient = 0.0;        ///< most negative coefficient of U(t,s)u or B(t)u for u >= 0
    double max_norm_growth = 0.0;        ///< max of |U(t,s)u| - |u| over probes
    double max_cocycle_defect = 0.0;     ///< max |U(t,r)U(r,s)u - U(t,s)u|
    double max_identity_defect = 0.0;    ///< max |U(t,t)u - u|
    double min_B_coefficient = 0.0;
    bool ok = true;
    std::string failure;
};

/// Probes positivity, substochasticity, cocycle and identity of U and positivity
/// of B on nonnegative samples at all triples s <= r <= t drawn from `times`.
template <EvolutionModel M>
ContractReport check_model_contract(const M& model, std::span<const double> times,
                                    std::span<const StateVector> samples, ContractTolerances tol = {}) {
    ContractReport rep;
    const auto grid = model.grid();
    std::vector<double> sorted(times.begin(), times.end());
    std::sort(sorted.begin(), sorted.end());
    auto fail = [&](const std::string& msg) {
        if (rep.ok) rep.failure = msg;
        rep.ok = false;
    };
    for (const auto& u : samples) {
        if (!u.is_nonnegative()) throw PreconditionError("contract probes must be nonnegative");
        const double nu = l1_norm(u);
        const double scale = std::max(1.0, nu);
        for (std::size_t a = 0; a < sorted.size(); ++a) {
            const double t = sorted[a];
            const auto id = apply_U(model, t, t, u);
            rep.max_identity_defect = std::max(rep.max_identity_defect, l1_norm(id - u));
            const auto bu = apply_B(model, t, u);
            for (double c : bu.coeffs()) rep.min_B_coefficient = std::min(rep.min_B_coefficient, c);
            for (std::size_t b = 0; b <= a; ++b) {
                const double s = sorted[b];
                const auto ts = apply_U(model, t, s, u);
                for (double c : ts.coeffs()) rep.min_coefficient = std::min(rep.min_coefficient, c);
                rep.max_norm_growth = std::max(rep.max_norm_growth, l1_norm(ts) - nu);
                for (std::size_t c = b; c <= a; ++c) {
                    const double r = sorted[c];
                    const auto composed = apply_U(model, t, r, apply_U(model, r, s, u));
                    rep.max_cocycle_defect = std::max(rep.max_cocycle_defect, l1_norm(composed - ts) / scale);
                }
            }
        }
    }
    std::ostringstream msg;
    if (rep.min_coefficient < -tol.positivity) {
        msg << "U is not positivity preserving (min coefficient " << rep.min_coefficient << ")";
        fail(msg.str());
    }
    if (rep.max_norm_growth > tol.substochastic) fail("U increases the norm of a nonnegative vector");
    if (rep.max_cocycle_defect > tol.cocycle) fail("U violates the cocycle property");
    if (rep.max_identity_defect > tol.cocycle) fail("U(t,t) is not the identity");
    if (rep.min_B_coefficient < -tol.positivity) fail("B is not positivity preserving");
    return rep;
}

} // namespace dpe
