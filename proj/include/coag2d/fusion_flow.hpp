#pragma once

// Fusion drift and the characteristic curves of the transport part of the
// equation, in the physical frame and in the regularised self-similar frame.

#include <functional>
#include <optional>

#include "coag2d/kernels.hpp"

namespace coag2d {

enum class FlowFrame { Physical, SelfSimilarRegularized };

struct FlowParams {
    FusionSpec fusion;
    std::optional<TruncationParams> trunc;
    FlowFrame frame = FlowFrame::Physical;
    double gamma = 0.0;
    double ode_tol = 1e-10;
    double max_step = 0.5;
    /// Self-similar frame only: include the -(2/3)A and -V scaling terms and the
    /// weight growth. Disabling leaves pure fusion.
    bool transport = true;

    /// Throws ConfigError for tolerances outside [1e-12, 1e-4], a non-positive
    /// max_step, a missing truncation in the self-similar frame, or a gamma that
    /// disagrees with the fusion spec.
    void validate() const;
};

struct Drift {
    double da;
    double dv;
};

/// da/dt = r(a,v)(c0 v^{2/3} - a), dv/dt = 0. Throws RegionError outside the region.
Drift drift_physical(const FusionSpec& fusion, double a, double v);

/// dA/dt = (1-gamma) r_delta (c0 V^{2/3} - A) - (2/3) Theta(V) A,
/// dV/dt = -Theta(V) V (scaling terms dropped when transport is off).
Drift drift_selfsim(const FlowParams& params, double A, double V, double clock);

struct CharacteristicEnd {
    double A;
    double V;
    double h_eps;    // integral of Theta(V) along the path; 0 in the physical frame
    bool projected;  // a sub-tolerance undershoot of the region boundary was removed
};

/// Called after every accepted step with (t, A, V, h_eps).
using TraceSink = std::function<void(double, double, double, double)>;

/// Integrates the frame's drift from (a0, v0) over [0, t_span] with an adaptive
/// Dormand-Prince 5(4) scheme.
///
/// The state is (u, log V, h) with u = A / (c0 V^{2/3}) - 1, which turns the drift
/// into du/dt = -c r u. The region boundary u = 0 is then an exact fixed point,
/// and the pure-scaling branch of V is integrated without error.
CharacteristicEnd integrate_characteristic(const FlowParams& params, double a0, double v0,
                                           double t_span, const TraceSink& trace = {});

}  // namespace coag2d
