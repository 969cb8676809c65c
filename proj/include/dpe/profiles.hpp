#pragma once

// Built-in coefficient shapes selected by name from configuration files.
//
// TimeProfile is a scalar function of time with an exact antiderivative for
// every kind except `custom`, which is integrated by 8-point Gauss-Legendre
// on each quadrature step. SpaceProfile is evaluated once on grid nodes.

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dpe/error.hpp"
#include "dpe/state_space.hpp"

namespace dpe {

class TimeProfile {
public:
    enum class Kind { constant, affine, power, exp_decay, table, custom };

    /// c
    static TimeProfile constant(double c) { return TimeProfile(Kind::constant, {c}); }
    /// a + b t
    static TimeProfile affine(double a, double b) { return TimeProfile(Kind::affine, {a, b}); }
    /// c t^p with p >= 0
    static TimeProfile power(double c, double p) {
        if (p < 0.0) throw StructuralError("power time profile needs a nonnegative exponent");
        return TimeProfile(Kind::power, {c, p});
    }
    /// c exp(-r t)
    static TimeProfile exp_decay(double c, double r) { return TimeProfile(Kind::exp_decay, {c, r}); }
    /// Piecewise linear through (times[k], values[k]), constant beyond the ends.
    static TimeProfile table(std::vector<double> times, std::vector<double> values) {
        if (times.size() != values.size() || times.empty())
            throw StructuralError("table time profile needs matching, nonempty knots and values");
        for (std::size_t k = 1; k < times.size(); ++k)
            if (!(times[k] > times[k - 1])) throw StructuralError("table time knots must increase strictly");
        TimeProfile p(Kind::table, {});
        p.knots_ = std::move(times);
        p.values_ = std::move(values);
        return p;
    }
    /// Arbitrary callable; its integral uses Gauss-Legendre on steps of `quad_step`.
    static TimeProfile custom(std::function<double(double)> f) {
        TimeProfile p(Kind::custom, {});
        p.fn_ = std::move(f);
        return p;
    }

    Kind kind() const noexcept { return kind_; }
    bool has_antiderivative() const noexcept { return kind_ != Kind::custom; }
    const std::vector<double>& params() const noexcept { return params_; }

    double operator()(double t) const {
        switch (kind_) {
        case Kind::constant: return params_[0];
        case Kind::affine: return params_[0] + params_[1] * t;
        case Kind::power: return params_[0] * std::pow(t, params_[1]);
        case Kind::exp_decay: return params_[0] * std::exp(-params_[1] * t);
        case Kind::table: return interpolate(t);
        case Kind::custom: return fn_(t);
        }
        return 0.0;
    }

    /// int_s^t k(tau) dtau.
    double integral(double s, double t, double quad_step) const {
        if (t == s) return 0.0;
        switch (kind_) {
        case Kind::constant: return params_[0] * (t - s);
        case Kind::affine: return params_[0] * (t - s) + 0.5 * params_[1] * (t * t - s * s);
        case Kind::power: {
            const double q = params_[1] + 1.0;
            return params_[0] * (std::pow(t, q) - std::pow(s, q)) / q;
        }
        case Kind::exp_decay:
            if (params_[1] == 0.0) return params_[0] * (t - s);
            return params_[0] * (std::exp(-params_[1] * s) - std::exp(-params_[1] * t)) / params_[1];
        case Kind::table: return table_integral(s, t);
        case Kind::custom: return gauss_integral(s, t, quad_step);
        }
        return 0.0;
    }

private:
    TimeProfile(Kind k, std::vector<double> p) : kind_(k), params_(std::move(p)) {}

    double interpolate(double t) const {
        if (t <= knots_.front()) return values_.front();
        if (t >= knots_.back()) return values_.back();
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - knots_.begin());
        const double th = (t - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
        return (1.0 - th) * values_[k - 1] + th * values_[k];
    }

    // The interpolant is linear between consecutive breakpoints, so the
    // trapezoid rule over the breakpoints inside [s, t] is exact.
    double table_integral(double s, double t) const {
        std::vector<double> pts{s};
        for (double k : knots_)
            if (k > s && k < t) pts.push_back(k);
        pts.push_back(t);
        double acc = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            acc += 0.5 * (pts[i] - pts[i - 1]) * (interpolate(pts[i]) + interpolate(pts[i - 1]));
        return acc;
    }

    double gauss_integral(double s, double t, double quad_step) const {
        if (!(quad_step > 0.0)) throw PreconditionError("custom time profile needs a positive quadrature step");
        const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil((t - s) / quad_step - 1e-9)));
        const double h = (t - s) / static_cast<double>(pieces);
        double acc = 0.0;
        for (std::size_t k = 0; k < pieces; ++k) {
            const double a = s + h * static_cast<double>(k);
            acc += boost::math::quadrature::gauss<double, 8>::integrate(fn_, a, k + 1 == pieces ? t : a + h);
        }
        return acc;
    }

    Kind kind_;
    std::vector<double> params_;
    std::vector<double> knots_, values_;
    std::function<double(double)> fn_;
};

/// Functions of a single grid coordinate, tabulated on the grid.
class SpaceProfile {
public:
    enum class Kind { constant, abs_power, maxwellian, linear, table };

    static SpaceProfile constant(double c) { return SpaceProfile(Kind::constant, {c}); }
    /// c |v|^p
    static SpaceProfile abs_power(double c, double p) { return SpaceProfile(Kind::abs_power, {c, p}); }
    /// exp(-v^2 / (2 T)) / sqrt(2 pi T)
    static SpaceProfile maxwellian(double temperature) {
        if (!(temperature > 0.0)) throw StructuralError("maxwellian needs a positive temperature");
        return SpaceProfile(Kind::maxwellian, {temperature});
    }
    /// a + b v
    static SpaceProfile linear(double a, double b) { return SpaceProfile(Kind::linear, {a, b}); }
    static SpaceProfile table(std::vector<double> values) {
        SpaceProfile p(Kind::table, {});
        p.values_ = std::move(values);
        return p;
    }

    Kind kind() const noexcept { return kind_; }

    double at(double v) const {
        switch (kind_) {
        case Kind::constant: return params_[0];
        case Kind::abs_power: return params_[0] * std::pow(std::abs(v), params_[1]);
        case Kind::maxwellian:
            return std::exp(-v * v / (2.0 * params_[0])) / std::sqrt(2.0 * std::numbers::pi * params_[0]);
        case Kind::linear: return params_[0] + params_[1] * v;
        case Kind::table: break;
        }
        throw PreconditionError("table space profile has no pointwise formula");
    }

    std::vector<double> on(const Grid& grid) const {
        if (kind_ == Kind::table) {
            if (values_.size() != grid.size())
                throw StructuralError("table profile has " + std::to_string(values_.size()) + " values for " +
                                      std::to_string(grid.size()) + " grid nodes");
            return values_;
        }
        std::vector<double> out(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) out[i] = at(grid.node(i));
        return out;
    }

private:
    SpaceProfile(Kind k, std::vector<double> p) : kind_(k), params_(std::move(p)) {}

    Kind kind_;
    std::vector<double> params_;
    std::vector<double> values_;
};

} // namespace dpe
