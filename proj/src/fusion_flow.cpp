#include "coag2d/fusion_flow.hpp"

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <string>

#include "coag2d/errors.hpp"
#include "coag2d/state.hpp"

namespace coag2d {

namespace odeint = boost::numeric::odeint;

void FlowParams::validate() const {
    if (!(ode_tol >= 1e-12 && ode_tol <= 1e-4)) {
        throw ConfigError("ode_tol must lie in [1e-12, 1e-4]");
    }
    if (!(max_step > 0.0) || !std::isfinite(max_step)) throw ConfigError("max_step must be positive");
    if (frame == FlowFrame::SelfSimilarRegularized && !trunc) {
        throw ConfigError("the self-similar flow needs truncation parameters");
    }
    if (gamma != fusion.gamma()) throw ConfigError("flow gamma differs from the fusion spec");
}

Drift drift_physical(const FusionSpec& fusion, double a, double v) {
    if (!(a > 0.0) || !(v > 0.0) || !std::isfinite(a) || !std::isfinite(v)) {
        throw DomainError("drift needs positive finite (a, v)");
    }
    if (!in_region(a, v)) throw RegionError("drift evaluated outside the isoperimetric region");
    return {fusion.rate(a, v) * (sphere_area(v) - a), 0.0};
}

Drift drift_selfsim(const FlowParams& params, double A, double V, double /*clock*/) {
    if (!params.trunc) throw ConfigError("the self-similar drift needs truncation parameters");
    if (!(A > 0.0) || !(V > 0.0) || !std::isfinite(A) || !std::isfinite(V)) {
        throw DomainError("drift needs positive finite (A, V)");
    }
    if (!in_region(A, V)) throw RegionError("drift evaluated outside the isoperimetric region");
    const auto& tr = *params.trunc;
    const double fusion = (1.0 - params.gamma) * fusion_delta(params.fusion, tr, A, V) *
                          (sphere_area(V) - A);
    if (!params.transport) return {fusion, 0.0};
    const double th = theta_eps(tr, V);
    return {fusion - 2.0 / 3.0 * th * A, -th * V};
}

namespace {

using State = std::array<double, 3>;  // u, log V, h

struct Rhs {
    const FlowParams& p;
    double v0;

    void operator()(const State& x, State& dxdt, double /*t*/) const {
        const bool selfsim = p.frame == FlowFrame::SelfSimilarRegularized;
        const double V = selfsim ? std::exp(x[1]) : v0;
        const double s = sphere_area(V);
        const double A = s * (1.0 + x[0]);
        double rate = 0.0;
        if (p.fusion.enabled() && A > 0.0) {
            rate = selfsim ? (1.0 - p.gamma) * fusion_delta(p.fusion, *p.trunc, A, V)
                           : p.fusion.rate(A, V);
        }
        dxdt[0] = -rate * x[0];
        if (selfsim && p.transport) {
            const double th = theta_eps(*p.trunc, V);
            dxdt[1] = -th;
            dxdt[2] = th;
        } else {
            dxdt[1] = 0.0;
            dxdt[2] = 0.0;
        }
    }
};

CharacteristicEnd finish(const FlowParams& p, double v0, const State& x) {
    const bool selfsim = p.frame == FlowFrame::SelfSimilarRegularized;
    const double V = selfsim && x[1] != std::log(v0) ? std::exp(x[1]) : v0;
    double u = x[0];
    bool projected = false;
    if (u < 0.0) {
        if (-u > 10.0 * p.ode_tol) {
            throw RegionError("characteristic left the isoperimetric region (relative undershoot " +
                              format_double(-u) + ")");
        }
        u = 0.0;
        projected = true;
    }
    return {sphere_area(V) * (1.0 + u), V, x[2], projected};
}

}  // namespace

CharacteristicEnd integrate_characteristic(const FlowParams& params, double a0, double v0,
                                           double t_span, const TraceSink& trace) {
    params.validate();
    if (!(t_span >= 0.0) || !std::isfinite(t_span)) throw DomainError("t_span must be >= 0");
    if (!(a0 > 0.0) || !(v0 > 0.0) || !std::isfinite(a0) || !std::isfinite(v0)) {
        throw DomainError("characteristic needs positive finite (a0, v0)");
    }
    if (!in_region(a0, v0)) throw RegionError("characteristic starts outside the region");

    const bool selfsim = params.frame == FlowFrame::SelfSimilarRegularized;
    const double u0 = a0 / sphere_area(v0) - 1.0;
    const bool fusion_idle = !params.fusion.enabled() || u0 == 0.0;

    if (!selfsim && (fusion_idle || t_span == 0.0)) {
        if (trace) trace(t_span, a0, v0, 0.0);
        return {a0, v0, 0.0, false};
    }
    if (selfsim && fusion_idle) {
        // The shape ratio is frozen; only the scaling branches remain.
        const auto& tr = *params.trunc;
        const bool scaled = params.transport && v0 * std::exp(-t_span) > 2.0 * tr.eps;
        const bool frozen = !params.transport || v0 <= tr.eps;
        if (scaled || frozen) {
            const double V = scaled ? v0 * std::exp(-t_span) : v0;
            const double h = scaled ? t_span : 0.0;
            const double A = u0 == 0.0 ? sphere_area(V) : sphere_area(V) * (1.0 + u0);
            if (trace) trace(t_span, A, V, h);
            return {A, V, h, false};
        }
    }

    State x{u0, std::log(v0), 0.0};
    const Rhs rhs{params, v0};
    auto stepper = odeint::make_controlled(params.ode_tol * 1e-3, params.ode_tol,
                                           odeint::runge_kutta_dopri5<State>());
    double t = 0.0;
    double dt = std::min(params.max_step, t_span);
    const double dt_floor = 1e-14 * std::max(1.0, t_span);
    int rejections = 0;
    while (t < t_span) {
        const bool last = t + dt >= t_span;
        if (last) dt = t_span - t;
        const double t_before = t;
        const auto res = stepper.try_step(rhs, x, t, dt);
        if (res == odeint::success) {
            rejections = 0;
            if (last) t = t_span;
            if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2])) {
                throw IntegrationError("characteristic state became non-finite");
            }
            if (trace) {
                const double V = selfsim ? std::exp(x[1]) : v0;
                trace(t, sphere_area(V) * (1.0 + x[0]), V, x[2]);
            }
            dt = std::min(dt, params.max_step);
        } else {
            t = t_before;
            if (++rejections > 200 || dt < dt_floor) {
                throw IntegrationError("step size underflow while integrating a characteristic");
            }
        }
    }
    return finish(params, v0, x);
}

}  // namespace coag2d
