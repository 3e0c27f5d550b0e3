#pragma once

// Stochastic coagulation engines.
//
// Physical frame: Marcus-Lushnikov dynamics simulated event by event. Pairs are
// drawn against a volume-only majorant c (v_i^{-alpha} v_j^{beta} + v_j^{-alpha} v_i^{beta})
// and accepted with probability K / majorant. Fusion only moves areas, so the
// majorant is frozen between merges and each particle's area is advanced lazily.
//
// Self-similar frame: weighted particles, Strang splitting of flow and
// coagulation with fixed step, and resampling when weights spread.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "coag2d/kernels.hpp"
#include "coag2d/series.hpp"
#include "coag2d/state.hpp"

namespace coag2d {

enum class MajorantMode {
    Bound,  // c = K0, valid for every kernel in the family
    Tight,  // c = (K0/2)(1 + theta); exact for theta = 0
};

enum class RecordSpacing {
    Linear,  // every record_every units of clock
    Log,     // every record_every units of log(1 + clock)
};

struct EngineConfig {
    Frame frame = Frame::Physical;
    std::size_t n_particles = 10000;  // resampling target in the self-similar frame
    double lambda_sys = 0.0;          // 0: n / M_{0,0}(initial)
    double dt_split = 0.01;
    double resample_trigger = 100.0;      // max/min weight ratio
    double resample_min_fraction = 0.5;   // resample when fewer particles remain
    double t_end = 1.0;
    double record_every = 0.1;
    RecordSpacing spacing = RecordSpacing::Linear;
    std::uint64_t seed = 1;
    std::uint64_t replica = 0;

    MajorantMode majorant = MajorantMode::Bound;
    bool thinning = true;       // false requires an exact majorant (Tight, theta = 0)
    bool coagulation = true;
    bool transport = true;      // self-similar scaling terms
    bool exact_lattice = true;  // physical frame: snap onto a dyadic grid
    double ode_tol = 1e-10;
    double max_step = 0.5;

    std::vector<MomentKey> moments = default_moments();

    static std::vector<MomentKey> default_moments();
    void validate() const;
};

struct EventLog {
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::uint64_t resamplings = 0;
    std::uint64_t split_steps = 0;
    std::uint64_t integrations = 0;
    std::uint64_t projections = 0;
    std::uint64_t boundary_snaps = 0;
    double wall_seconds = 0.0;

    /// JSON object; wall-clock time omitted unless requested so that reports are reproducible.
    std::string to_json(bool with_timing = false) const;
    EventLog& operator+=(const EventLog& o);
};

struct RunResult {
    Ensemble ensemble;
    MomentSeries series;
    EventLog log;
    std::vector<ResampleAudit> audits;
};

/// Called with the ensemble at each record time.
using SnapshotObserver = std::function<void(const Ensemble&)>;

/// Independent stream for (seed, replica).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replica);

/// Record clocks in [0, t_end] for the given spacing; always includes 0 and t_end.
std::vector<double> record_times(double t_end, double record_every, RecordSpacing spacing);

RunResult run_physical(Ensemble e, const KernelSpec& kernel, const FusionSpec& fusion,
                       const EngineConfig& cfg, const SnapshotObserver& observer = {});

RunResult run_selfsim(Ensemble e, const KernelSpec& kernel, const FusionSpec& fusion,
                      const TruncationParams& trunc, const EngineConfig& cfg,
                      const SnapshotObserver& observer = {});

struct CoagStepStats {
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
};

/// Coagulation over [0, dt] with positions frozen, simulated exactly. An unordered
/// pair fires at rate (1-gamma) K_{eps,R} max(w_i, w_j); the product receives the
/// smaller weight and the heavier parent keeps the remainder (equal weights: both
/// parents are consumed). Throws DomainError when the majorant predicts more than
/// 0.1 n merges in the step.
CoagStepStats step_tau_leap(Ensemble& e, const KernelSpec& kernel, const TruncationParams& trunc,
                            double dt, MajorantMode mode = MajorantMode::Bound);

}  // namespace coag2d
