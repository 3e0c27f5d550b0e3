#pragma once

// Scenario presets for the three fusion regimes plus two oracle setups, replica
// orchestration, and report assembly.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coag2d/coag_mc.hpp"
#include "coag2d/kernels.hpp"
#include "coag2d/moments.hpp"
#include "coag2d/selfsim.hpp"
#include "coag2d/state.hpp"

namespace coag2d {

enum class InitialKind { MonodisperseSphere, MonodisperseElongated, LogNormalVolume, TwoPoint };

std::string to_string(InitialKind k);
InitialKind initial_kind_from_string(const std::string& s);

struct InitialDataParams {
    InitialKind kind = InitialKind::MonodisperseSphere;
    std::size_t n = 10000;
    double total_volume = 1.0;  // M_{0,1} of the result; weights are equal
    double v = 1.0;             // particle volume (median for LogNormalVolume)
    double ratio = 1.0;         // a / (c0 v^{2/3})
    double sigma_log = 0.5;     // LogNormalVolume: sd of log v
    double v2 = 2.0;            // TwoPoint: second volume
    double ratio2 = 1.0;        // TwoPoint: second shape ratio
    double fraction = 0.5;      // TwoPoint: share of particles at (v, ratio)
    Frame frame = Frame::Physical;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;  // replica index; distinct streams give independent draws
};

/// Equal-weight ensemble in the admissible region with the requested total volume.
Ensemble make_initial_data(const InitialDataParams& p);

enum class ScenarioName { SelfSimMuPos, FastFusion, Ramification, OracleConstantKernel, PureFusion };

std::string to_string(ScenarioName s);
ScenarioName scenario_from_string(const std::string& s);

struct ScenarioThresholds {
    double sigmas = 3.0;
    double plateau_tol = 0.10;             // relative drift of rescaled moments
    double selfsim_volume_drift = 0.01;    // per unit tau
    double pure_fusion_tol = 1e-8;         // relative, against the closed form
    RamificationThresholds ramification;
    double c2_candidate = 100.0;           // minimum initial area
    double epsilon_tilde = 0.5;            // exponent offset in the integrability moments
    std::vector<double> oracle_times = {0.5, 1.0, 2.0};
};

/// Scenario parameters. Construct through make_scenario so that the regime
/// hypotheses are checked before any compute.
struct Scenario {
    ScenarioName name = ScenarioName::OracleConstantKernel;
    KernelSpec kernel = KernelSpec::constant_oracle(1.0);
    FusionSpec fusion = FusionSpec::disabled(0.0);
    std::optional<TruncationParams> trunc;
    EngineConfig engine;
    InitialDataParams initial;
    std::size_t replicas = 30;
    ScenarioThresholds thresholds;
    /// Profile grid for the self-similar regime (fixed so snapshots are comparable).
    BinGrid profile_grid;

    /// Throws ConfigError when the parameters violate the scenario's hypotheses.
    void validate() const;
};

/// Overrides applied on top of a preset; unset fields keep the preset value.
struct ScenarioOverrides {
    std::optional<std::size_t> replicas;
    std::optional<std::size_t> n_particles;
    std::optional<double> t_end;
    std::optional<double> record_every;
    std::optional<double> dt_split;
    std::optional<std::uint64_t> seed;
    std::optional<double> K0, alpha, beta, theta;
    std::optional<double> R, mu;
    std::optional<double> eps, bigR, delta;
    std::optional<double> initial_ratio;
    std::optional<double> total_volume;
    std::optional<Frame> frame;

    /// Parses a JSON object; the key "scenario" is ignored here. Unknown keys are errors.
    static ScenarioOverrides from_json(const std::string& text);
};

Scenario make_scenario(ScenarioName name, const ScenarioOverrides& overrides = {});

/// Reads {"scenario": "...", ...overrides} from a JSON file.
Scenario scenario_from_config_file(const std::string& path);

/// Runs the replicas of a scenario on a worker pool; results are in replica order.
/// The observer factory, when given, is called once per replica.
std::vector<RunResult> run_replicas(
    const Scenario& s,
    const std::function<SnapshotObserver(std::size_t replica)>& observer_factory = {});

struct ScenarioOutcome {
    DiagnosticReport report;
    EventLog log;
    bool passed = false;
};

/// Quantities gathered by the snapshot observers while the replicas run.
struct ScenarioObservations {
    std::vector<RescaledSnapshot> pooled_profiles;  // self-similar regime, physical frame
    double closed_form_error = 0.0;                 // pure fusion: max relative area error
    std::uint64_t particles_checked = 0;
    std::uint64_t region_violations = 0;
};

/// Runs the replicas with observers attached and returns what they gathered.
std::vector<RunResult> run_observed(const Scenario& s, ScenarioObservations& obs);

/// Scenario-specific checks over already computed replicas.
ScenarioOutcome evaluate_scenario(const Scenario& s, const std::vector<RunResult>& runs,
                                  const ScenarioObservations& obs);

/// Runs and evaluates the scenario, then writes report.json, the replica mean/sem
/// series, the first replica's final ensemble, and any pooled rescaled profiles
/// into out_dir.
ScenarioOutcome run_scenario(const Scenario& s, const std::string& out_dir);

}  // namespace coag2d
