#include "coag2d/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <mutex>
#include <thread>

#include "coag2d/errors.hpp"

namespace coag2d {

using nlohmann::ordered_json;

std::string to_string(InitialKind k) {
    switch (k) {
        case InitialKind::MonodisperseSphere: return "monodisperse_sphere";
        case InitialKind::MonodisperseElongated: return "monodisperse_elongated";
        case InitialKind::LogNormalVolume: return "lognormal_volume";
        case InitialKind::TwoPoint: return "two_point";
    }
    return "?";
}

InitialKind initial_kind_from_string(const std::string& s) {
    for (auto k : {InitialKind::MonodisperseSphere, InitialKind::MonodisperseElongated,
                   InitialKind::LogNormalVolume, InitialKind::TwoPoint}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown initial data kind '" + s + "'");
}

std::string to_string(ScenarioName s) {
    switch (s) {
        case ScenarioName::SelfSimMuPos: return "selfsim_mu_pos";
        case ScenarioName::FastFusion: return "fast_fusion";
        case ScenarioName::Ramification: return "ramification";
        case ScenarioName::OracleConstantKernel: return "oracle_constant_kernel";
        case ScenarioName::PureFusion: return "pure_fusion";
    }
    return "?";
}

ScenarioName scenario_from_string(const std::string& s) {
    for (auto n : {ScenarioName::SelfSimMuPos, ScenarioName::FastFusion, ScenarioName::Ramification,
                   ScenarioName::OracleConstantKernel, ScenarioName::PureFusion}) {
        if (to_string(n) == s) return n;
    }
    throw ConfigError("unknown scenario '" + s + "'");
}

Ensemble make_initial_data(const InitialDataParams& p) {
    if (p.ratio < 1.0 || p.ratio2 < 1.0) throw DomainError("shape ratio must be >= 1");
    if (p.n == 0) throw DomainError("initial data needs at least one particle");
    if (!(p.total_volume > 0.0) || !(p.v > 0.0) || !(p.v2 > 0.0)) {
        throw DomainError("volumes must be positive");
    }
    if (!(p.fraction >= 0.0 && p.fraction <= 1.0)) throw DomainError("fraction must lie in [0,1]");
    if (!(p.sigma_log >= 0.0)) throw DomainError("sigma_log must be >= 0");

    auto rng = make_rng(p.seed, p.stream | (std::uint64_t{1} << 63));
    std::vector<double> vols(p.n, p.v);
    std::vector<double> ratios(p.n, 1.0);
    switch (p.kind) {
        case InitialKind::MonodisperseSphere: break;
        case InitialKind::MonodisperseElongated: std::fill(ratios.begin(), ratios.end(), p.ratio); break;
        case InitialKind::LogNormalVolume: {
            std::lognormal_distribution<double> dist(std::log(p.v), p.sigma_log);
            for (auto& v : vols) v = dist(rng);
            std::fill(ratios.begin(), ratios.end(), p.ratio);
            break;
        }
        case InitialKind::TwoPoint: {
            const auto k = static_cast<std::size_t>(std::llround(p.fraction * static_cast<double>(p.n)));
            for (std::size_t i = 0; i < p.n; ++i) {
                vols[i] = i < k ? p.v : p.v2;
                ratios[i] = i < k ? p.ratio : p.ratio2;
            }
            break;
        }
    }
    CompensatedSum vsum;
    for (double v : vols) vsum.add(v);
    const double w = p.total_volume / vsum.value();

    Ensemble e;
    e.frame = p.frame;
    e.particles.reserve(p.n);
    for (std::size_t i = 0; i < p.n; ++i) {
        const double s = sphere_area(vols[i]);
        e.particles.push_back({ratios[i] == 1.0 ? s : ratios[i] * s, vols[i], w});
    }
    e.lambda_sys = static_cast<double>(p.n) / moment(e, 0, 0);
    e.validate();
    return e;
}

namespace {

bool is_physical(const Scenario& s) { return s.engine.frame == Frame::Physical; }

void add_moment(EngineConfig& cfg, MomentKey key) {
    if (std::find(cfg.moments.begin(), cfg.moments.end(), key) == cfg.moments.end()) {
        cfg.moments.push_back(key);
    }
}

/// Moments named in the ramification estimates: v^{x1} for both candidate
/// exponents and the products (a^mu + a^2)(v^{-alpha-1} + v^m).
std::vector<MomentKey> ramification_moments(const Scenario& s) {
    const double mu = s.fusion.mu();
    const double x1a = s.fusion.sigma() / std::abs(mu);
    const double x1b = s.kernel.gamma() - 1.0 / 3.0;
    const double m = std::max(1.0 + s.thresholds.epsilon_tilde, s.fusion.sigma() + 2.0 / 3.0);
    const double lo = -s.kernel.alpha() - 1.0;
    return {{0, x1a}, {0, x1b}, {mu, lo}, {mu, m}, {2, lo}, {2, m}};
}

Scenario preset(ScenarioName name) {
    Scenario s;
    s.name = name;
    switch (name) {
        case ScenarioName::SelfSimMuPos: {
            s.kernel = KernelSpec::power_law(2.0, 0.5, 0.5);
            s.fusion = FusionSpec(1.0, 1.0, 0.0);
            s.trunc = TruncationParams::make(1e-3, 1e3, 1e-6, s.fusion);
            s.initial.kind = InitialKind::MonodisperseSphere;
            s.initial.n = 40000;
            s.engine.n_particles = 40000;
            s.engine.t_end = 200.0;
            s.engine.spacing = RecordSpacing::Log;
            s.engine.record_every = std::log1p(200.0) / 40.0;
            s.engine.dt_split = 0.01;
            s.replicas = 30;
            s.profile_grid.log_a_lo = std::log(0.04);
            s.profile_grid.log_a_hi = std::log(400.0);
            s.profile_grid.log_v_lo = std::log(1e-3);
            s.profile_grid.log_v_hi = std::log(50.0);
            s.profile_grid.na = 24;
            s.profile_grid.nv = 24;
            break;
        }
        case ScenarioName::FastFusion: {
            s.kernel = KernelSpec::constant_oracle(1.0);
            const double mu = 1.5 * (s.kernel.gamma() - 1.0);
            s.fusion = FusionSpec(heuristic_fusion_prefactor(1.0 / 6.0, mu), mu, s.kernel.gamma(), true);
            s.trunc = TruncationParams::make(1e-3, 100.0, 1e-6, s.fusion);
            s.engine.frame = Frame::SelfSimilar;
            s.initial.frame = Frame::SelfSimilar;
            s.initial.kind = InitialKind::MonodisperseElongated;
            s.initial.ratio = 2.0;
            s.initial.n = 1000;
            s.engine.n_particles = 1000;
            // Total volume chosen so that D(0) = M_{1,0} + M_{2,0} equals 1/(24(1-gamma)).
            const double a = s.initial.ratio * sphere_area(s.initial.v);
            s.initial.total_volume = s.initial.v / (24.0 * (1.0 - s.kernel.gamma()) * (a + a * a));
            s.engine.t_end = 5.0;
            s.engine.dt_split = 0.02;
            s.engine.record_every = 0.1;
            s.replicas = 30;
            break;
        }
        case ScenarioName::Ramification: {
            s.kernel = KernelSpec::power_law(2.0, 0.5, 0.75);
            s.fusion = FusionSpec(0.5, -1.0, s.kernel.gamma());
            s.trunc = TruncationParams::make(1e-3, 1e3, 1e-6, s.fusion);
            s.initial.kind = InitialKind::MonodisperseElongated;
            s.initial.ratio = 50.0;
            s.initial.n = 40000;
            s.engine.n_particles = 40000;
            s.engine.t_end = 60.0;
            s.engine.spacing = RecordSpacing::Log;
            s.engine.record_every = std::log1p(60.0) / 40.0;
            s.replicas = 30;
            break;
        }
        case ScenarioName::OracleConstantKernel: {
            s.kernel = KernelSpec::constant_oracle(1.0);
            s.fusion = FusionSpec::disabled(0.0);
            s.trunc = TruncationParams::make(1e-3, 1e3, 1e-6, s.fusion);
            s.initial.n = 10000;
            s.engine.n_particles = 10000;
            s.engine.t_end = 2.0;
            s.engine.record_every = 0.5;
            s.replicas = 50;
            break;
        }
        case ScenarioName::PureFusion: {
            s.kernel = KernelSpec::power_law(2.0, 0.5, 0.5);
            s.fusion = FusionSpec(1.0, 0.0, 0.0);
            s.trunc = TruncationParams::make(1e-3, 1e3, 1e-6, s.fusion);
            s.initial.kind = InitialKind::TwoPoint;
            s.initial.n = 1000;
            s.initial.v = 1.0;
            s.initial.ratio = 3.0;
            s.initial.v2 = 0.2;
            s.initial.ratio2 = 10.0;
            s.engine.n_particles = 1000;
            s.engine.coagulation = false;
            s.engine.t_end = 1.0;
            s.engine.record_every = 0.1;
            s.replicas = 1;
            break;
        }
    }
    return s;
}

void finalize_moments(Scenario& s) {
    add_moment(s.engine, {0, s.kernel.gamma()});
    if (s.name == ScenarioName::Ramification) {
        for (const auto& k : ramification_moments(s)) add_moment(s.engine, k);
    }
}

}  // namespace

void Scenario::validate() const {
    engine.validate();
    if (replicas == 0) throw ConfigError("replicas must be positive");
    if (fusion.gamma() != kernel.gamma()) throw ConfigError("fusion and kernel disagree on gamma");
    if (initial.frame != engine.frame) throw ConfigError("initial data and engine frames differ");
    if (engine.frame == Frame::SelfSimilar && !trunc) {
        throw ConfigError("self-similar runs need truncation parameters");
    }
    switch (name) {
        case ScenarioName::SelfSimMuPos:
            if (kernel.is_oracle()) throw ConfigError("selfsim_mu_pos needs a power-law kernel");
            if (!(fusion.mu() > 0.0) || !fusion.enabled()) {
                throw ConfigError("selfsim_mu_pos needs active fusion with mu > 0");
            }
            break;
        case ScenarioName::FastFusion: {
            if (!kernel.is_oracle() || kernel.gamma() != 0.0) {
                throw ConfigError("fast_fusion uses the constant kernel with gamma = 0");
            }
            if (fusion.mu() != 1.5 * (kernel.gamma() - 1.0)) {
                throw ConfigError("fast_fusion needs r = R0 a^{3(gamma-1)/2}");
            }
            if (fusion.R() < heuristic_fusion_prefactor(1.0 / 6.0, fusion.mu())) {
                throw ConfigError("fast_fusion prefactor below the heuristic sizing");
            }
            if (engine.frame != Frame::SelfSimilar) throw ConfigError("fast_fusion runs in the self-similar frame");
            const auto e = make_initial_data(initial);
            const double d0 = moment(e, 1, 0) + moment(e, 2, 0);
            if (d0 > (1.0 + 1e-12) / (24.0 * (1.0 - kernel.gamma()))) {
                throw ConfigError("fast_fusion needs D(0) <= 1/(24(1-gamma))");
            }
            break;
        }
        case ScenarioName::Ramification: {
            if (kernel.regime() != KernelRegime::AlphaPositive) {
                throw ConfigError("ramification needs alpha > 0");
            }
            if (!(fusion.mu() < 0.0) || !fusion.enabled()) throw ConfigError("ramification needs mu < 0");
            if (fusion.R() > initial.total_volume) throw ConfigError("ramification needs R1 <= v0");
            if (!is_physical(*this)) throw ConfigError("ramification runs in the physical frame");
            const auto e = make_initial_data(initial);
            if (moment(e, 1, 0) < thresholds.c2_candidate) {
                throw ConfigError("ramification needs initial area >= the C2 candidate");
            }
            break;
        }
        case ScenarioName::OracleConstantKernel:
            if (!kernel.is_oracle() || fusion.enabled()) {
                throw ConfigError("oracle scenario needs K == K0 and no fusion");
            }
            if (!is_physical(*this)) throw ConfigError("oracle scenario runs in the physical frame");
            break;
        case ScenarioName::PureFusion:
            if (engine.coagulation || !fusion.enabled() || fusion.mu() != 0.0) {
                throw ConfigError("pure_fusion needs coagulation off and mu = 0 fusion");
            }
            if (!is_physical(*this)) throw ConfigError("pure_fusion runs in the physical frame");
            break;
    }
}

ScenarioOverrides ScenarioOverrides::from_json(const std::string& text) {
    ScenarioOverrides o;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("invalid JSON config: ") + ex.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        const auto& v = it.value();
        auto num = [&]() {
            if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
            return v.get<double>();
        };
        auto count = [&]() -> std::uint64_t {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
                throw ConfigError("config key '" + key + "' must be a non-negative integer");
            }
            return v.get<std::uint64_t>();
        };
        if (key == "scenario") continue;
        if (key == "replicas") o.replicas = count();
        else if (key == "n_particles") o.n_particles = count();
        else if (key == "t_end") o.t_end = num();
        else if (key == "record_every") o.record_every = num();
        else if (key == "dt_split") o.dt_split = num();
        else if (key == "seed") o.seed = count();
        else if (key == "K0") o.K0 = num();
        else if (key == "alpha") o.alpha = num();
        else if (key == "beta") o.beta = num();
        else if (key == "theta") o.theta = num();
        else if (key == "R") o.R = num();
        else if (key == "mu") o.mu = num();
        else if (key == "eps") o.eps = num();
        else if (key == "bigR") o.bigR = num();
        else if (key == "delta") o.delta = num();
        else if (key == "initial_ratio") o.initial_ratio = num();
        else if (key == "total_volume") o.total_volume = num();
        else if (key == "frame") {
            if (!v.is_string()) throw ConfigError("config key 'frame' must be a string");
            o.frame = frame_from_string(v.get<std::string>());
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return o;
}

Scenario make_scenario(ScenarioName name, const ScenarioOverrides& o) {
    Scenario s = preset(name);
    if (o.replicas) s.replicas = *o.replicas;
    if (o.n_particles) {
        s.engine.n_particles = *o.n_particles;
        s.initial.n = *o.n_particles;
    }
    if (o.t_end) {
        s.engine.t_end = *o.t_end;
        if (s.engine.spacing == RecordSpacing::Log && !o.record_every) {
            s.engine.record_every = std::log1p(*o.t_end) / 40.0;
        }
    }
    if (o.record_every) s.engine.record_every = *o.record_every;
    if (o.dt_split) s.engine.dt_split = *o.dt_split;
    if (o.seed) {
        s.engine.seed = *o.seed;
        s.initial.seed = *o.seed;
    }
    if (o.K0 || o.alpha || o.beta || o.theta) {
        const double K0 = o.K0.value_or(s.kernel.K0());
        if (s.kernel.is_oracle() && !o.alpha && !o.beta) {
            s.kernel = KernelSpec::constant_oracle(K0);
        } else {
            s.kernel = KernelSpec::power_law(K0, o.alpha.value_or(s.kernel.alpha()),
                                             o.beta.value_or(s.kernel.beta()),
                                             o.theta.value_or(s.kernel.theta()));
        }
    }
    if (o.R || o.mu || s.fusion.gamma() != s.kernel.gamma()) {
        s.fusion = FusionSpec(o.R.value_or(s.fusion.R()), o.mu.value_or(s.fusion.mu()),
                              s.kernel.gamma(), s.fusion.steep());
    }
    if (s.trunc || o.eps || o.bigR || o.delta) {
        const auto base = s.trunc.value_or(TruncationParams::make(1e-3, 1e3, 1e-6, s.fusion));
        s.trunc = TruncationParams::make(o.eps.value_or(base.eps), o.bigR.value_or(base.bigR),
                                         o.delta.value_or(base.delta), s.fusion);
    }
    if (o.initial_ratio) {
        s.initial.ratio = *o.initial_ratio;
        if (*o.initial_ratio != 1.0 && s.initial.kind == InitialKind::MonodisperseSphere) {
            s.initial.kind = InitialKind::MonodisperseElongated;
        }
    }
    if (o.total_volume) s.initial.total_volume = *o.total_volume;
    if (o.frame) {
        if (*o.frame == Frame::SelfSimilar && s.engine.spacing == RecordSpacing::Log) {
            s.engine.spacing = RecordSpacing::Linear;
            if (!o.record_every) s.engine.record_every = s.engine.t_end / 40.0;
        }
        s.engine.frame = *o.frame;
        s.initial.frame = *o.frame;
    }
    finalize_moments(s);
    s.validate();
    return s;
}

Scenario scenario_from_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("invalid JSON config: ") + ex.what());
    }
    if (!j.is_object() || !j.contains("scenario") || !j["scenario"].is_string()) {
        throw ConfigError("config needs a string 'scenario' key");
    }
    return make_scenario(scenario_from_string(j["scenario"].get<std::string>()),
                         ScenarioOverrides::from_json(text));
}

std::vector<RunResult> run_replicas(
    const Scenario& s, const std::function<SnapshotObserver(std::size_t)>& observer_factory) {
    s.validate();
    std::vector<RunResult> results(s.replicas);
    std::vector<std::exception_ptr> errors(s.replicas);
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t r = 0;
            SnapshotObserver observer;
            {
                std::lock_guard lock(mu);
                if (next >= s.replicas) return;
                r = next++;
                if (observer_factory) observer = observer_factory(r);
            }
            try {
                InitialDataParams ip = s.initial;
                ip.stream = r;
                auto e = make_initial_data(ip);
                EngineConfig cfg = s.engine;
                cfg.replica = r;
                results[r] = is_physical(s) ? run_physical(std::move(e), s.kernel, s.fusion, cfg, observer)
                                            : run_selfsim(std::move(e), s.kernel, s.fusion, *s.trunc,
                                                          cfg, observer);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), s.replicas));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return results;
}

namespace {

struct ReplicaObservations {
    std::vector<RescaledSnapshot> profiles;
    std::vector<Particle> initial;
    double closed_form_error = 0.0;
    std::uint64_t checked = 0;
    std::uint64_t violations = 0;
};

}  // namespace

std::vector<RunResult> run_observed(const Scenario& s, ScenarioObservations& obs) {
    std::vector<ReplicaObservations> per(s.replicas);
    const bool profiles = s.name == ScenarioName::SelfSimMuPos && is_physical(s);
    const bool closed_form = s.name == ScenarioName::PureFusion;
    const double gamma = s.kernel.gamma();
    const FusionSpec fusion = s.fusion;
    const BinGrid grid = s.profile_grid;
    auto factory = [&](std::size_t r) -> SnapshotObserver {
        ReplicaObservations* ro = &per[r];
        return [=](const Ensemble& e) {
            for (const auto& p : e.particles) {
                ++ro->checked;
                if (!in_region(p.a, p.v)) ++ro->violations;
            }
            if (profiles && !e.empty()) ro->profiles.push_back(extract_profile(e, gamma, grid));
            if (closed_form) {
                if (ro->initial.empty()) {
                    ro->initial = e.particles;
                    return;
                }
                for (std::size_t i = 0; i < e.size(); ++i) {
                    const auto& p0 = ro->initial[i];
                    const double sph = sphere_area(p0.v);
                    const double rate = fusion.rate(p0.a, p0.v);  // independent of a when mu = 0
                    const double expected = sph + (p0.a - sph) * std::exp(-rate * e.clock);
                    ro->closed_form_error =
                        std::max(ro->closed_form_error, std::abs(e.particles[i].a - expected) / expected);
                }
            }
        };
    };
    auto runs = run_replicas(s, factory);

    obs = {};
    for (const auto& ro : per) {
        obs.particles_checked += ro.checked;
        obs.region_violations += ro.violations;
        obs.closed_form_error = std::max(obs.closed_form_error, ro.closed_form_error);
    }
    if (profiles) {
        const std::size_t n_snap = per.front().profiles.size();
        for (const auto& ro : per) {
            if (ro.profiles.size() != n_snap) throw ConfigError("replicas recorded different snapshot counts");
        }
        for (std::size_t k = 0; k < n_snap; ++k) {
            RescaledSnapshot pooled = per.front().profiles[k];
            for (std::size_t r = 1; r < per.size(); ++r) {
                const auto& other = per[r].profiles[k];
                for (std::size_t c = 0; c < pooled.mass.size(); ++c) pooled.mass[c] += other.mass[c];
                pooled.total_mass += other.total_mass;
                pooled.overflow_mass += other.overflow_mass;
            }
            obs.pooled_profiles.push_back(std::move(pooled));
        }
    }
    return runs;
}

namespace {

double median(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

std::vector<MomentSeries> series_of(const std::vector<RunResult>& runs) {
    std::vector<MomentSeries> out;
    out.reserve(runs.size());
    for (const auto& r : runs) out.push_back(r.series);
    return out;
}

DiagnosticRecord region_record(const ScenarioObservations& obs) {
    DiagnosticRecord r;
    r.name = "isoperimetric_region";
    r.observed = {static_cast<double>(obs.region_violations), static_cast<double>(obs.particles_checked)};
    r.bound = 0.0;
    r.margin = 0.0 - static_cast<double>(obs.region_violations);
    r.status = obs.region_violations == 0 ? CheckStatus::Pass : CheckStatus::Fail;
    r.note = "particles outside a >= c0 v^{2/3} at record times";
    return r;
}

void physical_conservation(const std::vector<RunResult>& runs, DiagnosticReport& rep) {
    DiagnosticRecord vol;
    vol.name = "volume_exact";
    DiagnosticRecord area;
    area.name = "area_non_increasing";
    double drift = 0.0;
    std::size_t increases = 0;
    std::uint64_t merges_max = 0;
    std::uint64_t merges_total = 0;
    for (const auto& run : runs) {
        const auto v = run.series.moment_column({0, 1});
        const auto a = run.series.moment_column({1, 0});
        for (std::size_t i = 0; i < v.size(); ++i) {
            drift = std::max(drift, std::abs(v[i] - v[0]) / v[0]);
            if (i > 0 && a[i] > a[i - 1]) ++increases;
        }
        merges_max = std::max(merges_max, run.log.accepted);
        merges_total += run.log.accepted;
        vol.t_to = area.t_to = run.series.rows().back().clock;
    }
    vol.observed = {drift, static_cast<double>(merges_max), static_cast<double>(merges_total)};
    vol.bound = 0.0;
    vol.margin = 0.0 - drift;
    vol.status = drift == 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    vol.note = "max relative drift of M_{0,1}; merges in the longest replica; merges overall";
    rep.add(vol);
    area.observed = {static_cast<double>(increases)};
    area.bound = 0.0;
    area.margin = 0.0 - static_cast<double>(increases);
    area.status = increases == 0 ? CheckStatus::Pass : CheckStatus::Fail;
    rep.add(area);
}

void selfsim_volume(const Scenario& s, std::span<const MomentSeries> series, DiagnosticReport& rep) {
    const auto cv = series.front().moment_index({0, 1}).value();
    const Band b = band_of(series, [cv](const MomentSeries& m, std::size_t i) {
        return m.rows()[i].moments[cv] / m.rows()[0].moments[cv];
    });
    const double slope = fit_line(b.clock, b.mean).slope;
    double dev = 0.0;
    for (double x : b.mean) dev = std::max(dev, std::abs(x - 1.0));
    DiagnosticRecord r;
    r.name = "selfsim_volume_drift";
    r.t_from = b.clock.front();
    r.t_to = b.clock.back();
    r.observed = {std::abs(slope), dev};
    r.bound = s.thresholds.selfsim_volume_drift;
    r.margin = r.bound - std::abs(slope);
    r.status = r.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    r.note = "fitted |d M_{0,1}/d tau| relative to M_{0,1}(0); max deviation";
    rep.add(r);
}

void running_sup(std::span<const MomentSeries> series, MomentKey key, const std::string& name,
                 double gamma, bool physical, DiagnosticReport& rep) {
    std::vector<double> values;
    std::vector<double> clocks;
    if (physical) {
        std::vector<MomentSeries> rescaled;
        for (const auto& m : series) rescaled.push_back(rescaled_moment(m, key, gamma));
        const Band b = moment_band(rescaled, key);
        values = b.mean;
        clocks = b.clock;
    } else {
        const Band b = moment_band(series, key);
        values = b.mean;
        clocks = b.clock;
    }
    double sup_all = 0.0;
    double sup_late = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sup_all = std::max(sup_all, values[i]);
        if (2 * i >= values.size()) sup_late = std::max(sup_late, values[i]);
    }
    DiagnosticRecord r;
    r.name = name;
    r.t_from = clocks.front();
    r.t_to = clocks.back();
    r.observed = {sup_all, sup_late};
    r.status = std::isfinite(sup_all) ? CheckStatus::Info : CheckStatus::Fail;
    r.note = "running supremum over the run and over its second half";
    rep.add(r);
}

}  // namespace

ScenarioOutcome evaluate_scenario(const Scenario& s, const std::vector<RunResult>& runs,
                                  const ScenarioObservations& obs) {
    ScenarioOutcome out;
    for (const auto& r : runs) out.log += r.log;
    auto& rep = out.report;
    const auto series = series_of(runs);
    const double gamma = s.kernel.gamma();
    const double sig = s.thresholds.sigmas;
    rep.add(region_record(obs));
    if (is_physical(s)) {
        physical_conservation(runs, rep);
    } else {
        selfsim_volume(s, series, rep);
        rep.append(check_area_budget(series, s.fusion, gamma, sig));
    }

    switch (s.name) {
        case ScenarioName::OracleConstantKernel: {
            const auto c0 = series.front().moment_index({0, 0}).value();
            const Band ratio = band_of(series, [c0](const MomentSeries& m, std::size_t i) {
                return m.rows()[i].moments[c0] / m.rows()[0].moments[c0];
            });
            const double n0 = moment_band(series, {0, 0}).mean.front();
            for (double t : s.thresholds.oracle_times) {
                const auto it = std::find_if(ratio.clock.begin(), ratio.clock.end(),
                                             [t](double c) { return std::abs(c - t) <= 1e-12 * (1 + t); });
                DiagnosticRecord r;
                r.name = "oracle_count_t" + format_double(t);
                r.t_from = r.t_to = t;
                if (it == ratio.clock.end()) {
                    r.status = CheckStatus::Fail;
                    r.note = "no record at this time";
                } else {
                    const auto i = static_cast<std::size_t>(it - ratio.clock.begin());
                    const double expected = oracle_constant_kernel_count(n0, t) / n0;
                    r.observed = {ratio.mean[i], ratio.sem[i]};
                    r.bound = expected;
                    r.margin = sig * ratio.sem[i] - std::abs(ratio.mean[i] - expected);
                    r.status = r.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
                    r.note = "N(t)/N(0) against 2/(2 + n0 t)";
                }
                rep.add(r);
            }
            break;
        }
        case ScenarioName::PureFusion: {
            DiagnosticRecord r;
            r.name = "closed_form_relaxation";
            r.t_to = s.engine.t_end;
            r.observed = {obs.closed_form_error};
            r.bound = s.thresholds.pure_fusion_tol;
            r.margin = r.bound - obs.closed_form_error;
            r.status = r.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
            r.note = "max relative area error against c0 v^{2/3} + (a0 - c0 v^{2/3}) e^{-r t}";
            rep.add(r);
            break;
        }
        case ScenarioName::SelfSimMuPos: {
            if (is_physical(s)) {
                const double t_end = s.engine.t_end;
                const double from = std::log1p(t_end / 10.0);
                const double to = std::log1p(t_end);
                for (MomentKey key : {MomentKey{0, 0}, MomentKey{1, 0}, MomentKey{0, 2}}) {
                    std::vector<MomentSeries> rescaled;
                    for (const auto& m : series) rescaled.push_back(rescaled_moment(m, key, gamma));
                    const Band b = moment_band(rescaled, key);
                    std::vector<double> x;
                    for (double c : b.clock) x.push_back(std::log1p(c));
                    auto rec = check_plateau("plateau_" + key.name(), x, b.mean, from * (1 - 1e-12), to,
                                             s.thresholds.plateau_tol);
                    rec.t_from = t_end / 10.0;
                    rec.t_to = t_end;
                    rec.note = "relative change of the rescaled moment fitted over the final decade of t";
                    rep.add(rec);
                }
                const auto& prof = obs.pooled_profiles;
                DiagnosticRecord r;
                r.name = "profile_convergence";
                std::vector<double> early;
                std::vector<double> late;
                const std::size_t pairs = prof.size() > 0 ? prof.size() - 1 : 0;
                for (std::size_t k = 0; k < pairs; ++k) {
                    const double d = profile_distance(prof[k], prof[k + 1]);
                    if (prof[k].clock >= t_end / 10.0) late.push_back(d);
                    else if (2 * k < pairs) early.push_back(d);
                }
                const double me = median(early);
                const double ml = median(late);
                r.observed = {ml, me, static_cast<double>(late.size())};
                r.bound = me;
                r.margin = me - ml;
                r.status = late.empty() || early.empty() ? CheckStatus::Fail
                           : ml < me                     ? CheckStatus::Pass
                                                         : CheckStatus::Fail;
                r.t_from = t_end / 10.0;
                r.t_to = t_end;
                r.note = "median late successive distance vs early-time median";
                rep.add(r);
            } else {
                rep.append(check_invariant_moment_set(series, s.kernel.regime(), {}, 0.01, sig));
            }
            running_sup(series, {0, gamma}, "running_sup_" + MomentKey{0, gamma}.name(), gamma,
                        is_physical(s), rep);
            running_sup(series, {1, 0}, "running_sup_M_1_0", gamma, is_physical(s), rep);
            break;
        }
        case ScenarioName::FastFusion:
            rep.append(check_D_invariant_region(series, gamma, sig));
            break;
        case ScenarioName::Ramification: {
            auto th = s.thresholds.ramification;
            const double tau_end = selfsim_time(s.engine.t_end, gamma);
            if (th.fit_from == 0.0 && th.fit_to == 0.0) th.fit_from = tau_end / 3.0;
            rep.append(check_ramification_ratios(series, gamma, th));
            const auto keys = ramification_moments(s);
            running_sup(series, keys[0], "x1_sigma_over_mu", gamma, true, rep);
            running_sup(series, keys[1], "x1_gamma_minus_third", gamma, true, rep);
            for (std::size_t k = 2; k < keys.size(); ++k) {
                running_sup(series, keys[k], "integrability_" + keys[k].name(), gamma, true, rep);
            }
            break;
        }
    }
    out.passed = rep.passed();
    return out;
}

namespace {

ordered_json scenario_json(const Scenario& s) {
    ordered_json j;
    j["scenario"] = to_string(s.name);
    j["frame"] = to_string(s.engine.frame);
    j["replicas"] = s.replicas;
    j["seed"] = s.engine.seed;
    j["kernel"] = {{"K0", s.kernel.K0()},
                   {"K1", s.kernel.K1()},
                   {"alpha", s.kernel.alpha()},
                   {"beta", s.kernel.beta()},
                   {"gamma", s.kernel.gamma()},
                   {"theta", s.kernel.theta()},
                   {"constant_oracle", s.kernel.is_oracle()}};
    j["fusion"] = {{"R", s.fusion.R()}, {"mu", s.fusion.mu()}, {"sigma", s.fusion.sigma()}};
    if (s.trunc) {
        j["truncation"] = {{"eps", s.trunc->eps},
                           {"bigR", s.trunc->bigR},
                           {"delta", s.trunc->delta},
                           {"L", std::isfinite(s.trunc->L) ? ordered_json(s.trunc->L) : ordered_json("inf")}};
    }
    j["initial"] = {{"kind", to_string(s.initial.kind)},
                    {"n", s.initial.n},
                    {"total_volume", s.initial.total_volume},
                    {"v", s.initial.v},
                    {"ratio", s.initial.ratio}};
    j["engine"] = {{"n_particles", s.engine.n_particles},
                   {"t_end", s.engine.t_end},
                   {"record_every", s.engine.record_every},
                   {"record_spacing", s.engine.spacing == RecordSpacing::Log ? "log" : "linear"},
                   {"dt_split", s.engine.dt_split},
                   {"resample_trigger", s.engine.resample_trigger},
                   {"coagulation", s.engine.coagulation},
                   {"ode_tol", s.engine.ode_tol}};
    return j;
}

}  // namespace

ScenarioOutcome run_scenario(const Scenario& s, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    {
        std::ofstream probe(dir / "report.json");
        if (!probe) throw ConfigError("output directory " + out_dir + " is not writable");
    }
    ScenarioObservations obs;
    const auto runs = run_observed(s, obs);
    auto outcome = evaluate_scenario(s, runs, obs);

    const auto series = series_of(runs);
    const auto summary = summarize(series);
    summary.mean.write_csv((dir / "series_mean.csv").string());
    summary.sem.write_csv((dir / "series_sem.csv").string());
    write_ensemble_csv((dir / "final_ensemble.csv").string(), runs.front().ensemble);
    for (std::size_t k = 0; k < obs.pooled_profiles.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "profile_%03zu.csv", k);
        obs.pooled_profiles[k].write_csv((dir / name).string());
    }

    ordered_json report;
    report["parameters"] = scenario_json(s);
    report["event_log"] = ordered_json::parse(outcome.log.to_json());
    report["diagnostics"] = ordered_json::parse(outcome.report.to_json());
    report["passed"] = outcome.passed;
    std::ofstream os(dir / "report.json");
    os << report.dump(2) << '\n';
    return outcome;
}

}  // namespace coag2d
