// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coag2d/coag_mc.hpp"
#include "coag2d/errors.hpp"
#include "coag2d/experiments.hpp"
#include "coag2d/fusion_flow.hpp"
#include "coag2d/kernels.hpp"
#include "coag2d/moments.hpp"
#include "coag2d/selfsim.hpp"

using namespace coag2d;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " FAILED(" << what << ")";
        }
    }
};

double rel_diff(double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); }

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

struct Point {
    double a;
    double v;
};

Point region_point(std::mt19937_64& rng, double v_lo = 1e-3, double v_hi = 1e3, double max_ratio = 100.0) {
    const double v = log_uniform(rng, v_lo, v_hi);
    return {log_uniform(rng, 1.0, max_ratio) * sphere_area(v), v};
}

/// Totals gathered over every run of the suite for the suite-wide criteria.
struct SuiteTotals {
    std::uint64_t physical_runs = 0;
    std::uint64_t area_increases = 0;
    std::uint64_t particles_checked = 0;
    std::uint64_t region_violations = 0;
};

void tally_physical(const std::vector<RunResult>& runs, SuiteTotals& tot) {
    for (const auto& r : runs) {
        ++tot.physical_runs;
        const auto a = r.series.moment_column({1, 0});
        for (std::size_t i = 1; i < a.size(); ++i) {
            if (a[i] > a[i - 1]) ++tot.area_increases;
        }
    }
}

void tally_region(const ScenarioObservations& obs, SuiteTotals& tot) {
    tot.particles_checked += obs.particles_checked;
    tot.region_violations += obs.region_violations;
}

struct ScenarioRun {
    Scenario scenario;
    std::vector<RunResult> runs;
    ScenarioObservations obs;
    ScenarioOutcome outcome;
    double seconds = 0.0;
};

ScenarioRun run_and_evaluate(ScenarioName name, const ScenarioOverrides& o, SuiteTotals& tot) {
    const auto start = std::chrono::steady_clock::now();
    ScenarioRun r{make_scenario(name, o)};
    r.runs = run_observed(r.scenario, r.obs);
    r.outcome = evaluate_scenario(r.scenario, r.runs, r.obs);
    tally_region(r.obs, tot);
    if (r.scenario.engine.frame == Frame::Physical) tally_physical(r.runs, tot);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

const DiagnosticRecord& record(const ScenarioRun& r, const std::string& name) {
    const auto* rec = r.outcome.report.find(name);
    if (!rec) throw ConfigError("scenario report lacks " + name);
    return *rec;
}

bool passes(const DiagnosticRecord& r) { return r.status != CheckStatus::Fail; }

FlowParams physical_flow(const FusionSpec& f) {
    FlowParams p{f};
    p.gamma = f.gamma();
    p.ode_tol = 1e-10;
    return p;
}

FlowParams selfsim_flow(const FusionSpec& f, double eps) {
    FlowParams p{f};
    p.trunc = TruncationParams::make(eps, 100.0, 1e-6, f);
    p.frame = FlowFrame::SelfSimilarRegularized;
    p.gamma = f.gamma();
    p.ode_tol = 1e-10;
    return p;
}

// Criterion 1 (physical half): one long replica with at least 1e5 merges.
Verdict conservation(const ScenarioRun& ff, const ScenarioRun& ss_frame,
                     const std::vector<const ScenarioRun*>& physical, SuiteTotals& tot) {
    Verdict v;
    InitialDataParams init;
    init.n = 120000;
    init.seed = 2024;
    Ensemble e = make_initial_data(init);
    EngineConfig cfg;
    cfg.t_end = 20.0;
    cfg.record_every = 0.5;
    cfg.seed = 2024;
    const auto res = run_physical(e, KernelSpec::constant_oracle(1.0), FusionSpec::disabled(0.0), cfg,
                                  [&](const Ensemble& snap) {
                                      for (const auto& p : snap.particles) {
                                          ++tot.particles_checked;
                                          if (!in_region(p.a, p.v)) ++tot.region_violations;
                                      }
                                  });
    tally_physical({res}, tot);
    const auto m01 = res.series.moment_column({0, 1});
    double drift = 0.0;
    for (double x : m01) drift = std::max(drift, std::abs(x - m01.front()) / m01.front());
    drift = std::max(drift, std::abs(moment(res.ensemble, 0, 1) - m01.front()) / m01.front());
    v.detail << "physical drift " << drift << " over " << res.log.accepted << " merges";
    v.require(drift == 0.0, "physical M_{0,1} drift");
    v.require(res.log.accepted >= 100000, "fewer than 1e5 merges");

    for (const auto* r : physical) {
        const auto& rec = record(*r, "volume_exact");
        v.require(passes(rec), to_string(r->scenario.name) + " volume drift");
    }
    const auto& d1 = record(ff, "selfsim_volume_drift");
    const auto& d2 = record(ss_frame, "selfsim_volume_drift");
    v.detail << "; self-similar drift/tau " << d1.observed[0] << " (fast_fusion), " << d2.observed[0]
             << " (selfsim_mu_pos)";
    v.require(passes(d1) && passes(d2), "self-similar volume drift");
    return v;
}

Verdict characteristics() {
    Verdict v;
    // Volume branch V = v0 e^{-t} in the self-similar frame.
    double worst_v = 0.0;
    for (double t : {0.1, 0.5, 1.0, 2.0, 3.0}) {
        for (double v0 : {0.5, 1.0, 4.0}) {
            const auto e = integrate_characteristic(selfsim_flow(FusionSpec(1.0, 1.0, 0.0), 1e-3),
                                                    3.0 * sphere_area(v0), v0, t);
            worst_v = std::max(worst_v, rel_diff(e.V, v0 * std::exp(-t)));
        }
    }
    v.detail << "volume branch err " << worst_v;
    v.require(worst_v <= 1e-9, "volume branch");

    // Spheres stay spheres.
    double worst_s = 0.0;
    const std::vector<FusionSpec> specs = {FusionSpec(1.0, 1.0, 0.0), FusionSpec(3.0, -0.5, 0.25),
                                           FusionSpec(0.5, -1.0, 0.25), FusionSpec(2.0, 0.0, 0.5)};
    for (const auto& f : specs) {
        for (double t : {0.5, 1.0, 2.0, 5.0}) {
            for (double v0 : {0.05, 1.0, 20.0}) {
                const auto ep = integrate_characteristic(physical_flow(f), sphere_area(v0), v0, t);
                worst_s = std::max(worst_s, rel_diff(ep.A, sphere_area(ep.V)));
                const auto es = integrate_characteristic(selfsim_flow(f, 1e-3), sphere_area(v0), v0, t);
                worst_s = std::max(worst_s, rel_diff(es.A, sphere_area(es.V)));
            }
        }
    }
    v.detail << "; sphere err " << worst_s;
    v.require(worst_s <= 1e-9, "sphere invariance");

    // Order of initial areas is preserved.
    std::mt19937_64 rng(99);
    int violations = 0;
    for (int n = 0; n < 1000; ++n) {
        const auto& f = specs[n % specs.size()];
        const auto p = region_point(rng, 0.05, 20.0, 50.0);
        const double a_hi = p.a * log_uniform(rng, 1.0 + 1e-6, 3.0);
        const double t = log_uniform(rng, 0.1, 5.0);
        const auto params = n % 2 == 0 ? physical_flow(f) : selfsim_flow(f, 1e-3);
        const auto lo = integrate_characteristic(params, p.a, p.v, t);
        const auto hi = integrate_characteristic(params, a_hi, p.v, t);
        if (lo.A / sphere_area(lo.V) > hi.A / sphere_area(hi.V) * (1 + 1e-12)) ++violations;
    }
    v.detail << "; order violations " << violations << "/1000";
    v.require(violations == 0, "area monotonicity of the flow");
    return v;
}

Verdict algebra() {
    Verdict v;
    constexpr double tol = 1e-10;
    std::mt19937_64 rng(4242);
    struct Combo {
        double alpha, beta, theta;
    };
    const std::vector<Combo> combos = {{0.5, 0.5, 0.0}, {0.5, 0.75, 0.0}, {0.25, 0.5, 0.6}, {0.0, 0.4, 0.3}};
    const std::vector<double> mus = {-1.0, -0.5, 0.0, 1.0, 2.5};
    std::size_t samples = 0;
    std::size_t failures[6] = {0, 0, 0, 0, 0, 0};
    for (int n = 0; n < 10000; ++n) {
        const auto& c = combos[n % combos.size()];
        const double K0 = 2.0;
        const auto k = KernelSpec::power_law(K0, c.alpha, c.beta, c.theta);
        const FusionSpec r(1.3, mus[n % mus.size()], k.gamma());
        const auto p = region_point(rng);
        const auto q = region_point(rng);
        const double lam = log_uniform(rng, 1e-3, 1e3);
        const double l23 = std::pow(lam, 2.0 / 3.0);
        const double kv = eval_coag_kernel(k, p.a, p.v, q.a, q.v);
        ++samples;

        if (rel_diff(eval_coag_kernel(k, l23 * p.a, lam * p.v, l23 * q.a, lam * q.v), std::pow(lam, k.gamma()) * kv) > tol ||
            rel_diff(eval_fusion(r, l23 * p.a, lam * p.v), std::pow(lam, k.gamma() - 1.0) * eval_fusion(r, p.a, p.v)) > tol) {
            ++failures[0];
        }
        if (rel_diff(eval_coag_kernel(k, q.a, q.v, p.a, p.v), kv) > tol) ++failures[1];
        const double vol = std::pow(p.v, -c.alpha) * std::pow(q.v, c.beta) + std::pow(q.v, -c.alpha) * std::pow(p.v, c.beta);
        if (kv < 0.5 * K0 * vol * (1 - tol) || kv > K0 * vol * (1 + tol)) ++failures[2];
        if (std::abs(2.0 / 3.0 * r.mu() + r.sigma() - (k.gamma() - 1.0)) > tol) ++failures[3];
        const double rate = r.rate(p.a, p.v);
        const double closed = 1.3 * std::pow(p.a, r.mu()) * std::pow(p.v, r.sigma());
        if (rel_diff(rate, closed) > tol) ++failures[4];
        const double flux_da = (r.mu() / p.a * (p.a - sphere_area(p.v)) + 1.0) * rate;
        const double da_closed = 1.3 * r.mu() * std::pow(p.a, r.mu() - 1.0) * std::pow(p.v, r.sigma());
        if (flux_da < -tol * rate || std::abs(r.rate_da(p.a, p.v) - da_closed) > tol * std::abs(closed / p.a)) {
            ++failures[5];
        }
    }
    const char* names[6] = {"homogeneity", "symmetry", "bounds", "exponent relation", "fusion closed form", "ODE condition"};
    v.detail << samples << " samples";
    for (int i = 0; i < 6; ++i) {
        v.detail << "; " << names[i] << " " << failures[i];
        v.require(failures[i] == 0, names[i]);
    }
    return v;
}

Verdict rescaling() {
    Verdict v;
    std::mt19937_64 rng(606);
    const double gamma = 0.25;
    Ensemble base;
    for (int i = 0; i < 500; ++i) {
        const auto p = region_point(rng, 1e-2, 10.0, 20.0);
        base.particles.push_back({p.a, p.v, log_uniform(rng, 0.5, 2.0)});
    }
    double worst = 0.0;
    int checked = 0;
    for (double v0 : {0.5, 2.0}) {
        Ensemble e = base;
        const double scale = v0 / moment(base, 0, 1);
        for (auto& p : e.particles) p.w *= scale;
        const auto u = rescale_to_unit_volume(e, v0, gamma);
        for (auto [y1, y2] : {std::pair{0.0, 1.0}, std::pair{1.0, 0.0}, std::pair{0.0, gamma}}) {
            const double expected = std::pow(v0, (gamma - 2.0 / 3.0 * y1 - y2) / (1.0 - gamma)) * moment(e, y1, y2);
            worst = std::max(worst, rel_diff(moment(u.ensemble, y1, y2), expected));
            ++checked;
        }
        v.require(rel_diff(u.fusion_factor, 1.0 / v0) <= 1e-15, "fusion factor");
    }
    v.detail << checked << " moment transforms, worst rel err " << worst;
    v.require(worst <= 1e-12, "moment transform exponents");
    return v;
}

void print(int id, const std::string& name, const Verdict& v, bool& all) {
    std::printf("criterion %2d %-28s %s  %s\n", id, name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.str().c_str());
    std::fflush(stdout);
    all = all && v.pass;
}

Verdict guarded(const std::function<Verdict()>& f) {
    try {
        return f();
    } catch (const std::exception& ex) {
        Verdict v;
        v.require(false, std::string("exception: ") + ex.what());
        return v;
    }
}

}  // namespace

int main() {
    SuiteTotals tot;
    bool all = true;
    std::vector<ScenarioRun> store;
    store.reserve(6);
    auto scenario = [&](ScenarioName n, const ScenarioOverrides& o) -> const ScenarioRun* {
        try {
            store.push_back(run_and_evaluate(n, o, tot));
            const auto& r = store.back();
            std::printf("  ran %-22s %zu replicas in %.1f s\n", to_string(n).c_str(), r.runs.size(), r.seconds);
            std::fflush(stdout);
            return &store.back();
        } catch (const std::exception& ex) {
            std::printf("  %s failed to run: %s\n", to_string(n).c_str(), ex.what());
            return nullptr;
        }
    };

    const auto* oracle = scenario(ScenarioName::OracleConstantKernel, {});
    const auto* pure = scenario(ScenarioName::PureFusion, {});
    const auto* selfsim = scenario(ScenarioName::SelfSimMuPos, {});
    ScenarioOverrides ss_frame;
    ss_frame.frame = Frame::SelfSimilar;
    ss_frame.n_particles = 10000;
    ss_frame.t_end = 2.0;
    ss_frame.replicas = 4;
    const auto* selfsim_ss = scenario(ScenarioName::SelfSimMuPos, ss_frame);
    const auto* ram = scenario(ScenarioName::Ramification, {});
    const auto* fast = scenario(ScenarioName::FastFusion, {});

    auto need = [](std::initializer_list<const ScenarioRun*> rs) {
        for (const auto* r : rs) {
            if (!r) throw ConfigError("a required scenario did not run");
        }
    };

    const Verdict c1 = guarded([&] {
        need({oracle, pure, selfsim, ram, fast, selfsim_ss});
        return conservation(*fast, *selfsim_ss, {oracle, pure, selfsim, ram}, tot);
    });
    print(1, "conservation", c1, all);

    print(2, "area monotonicity", guarded([&] {
              need({oracle, pure, selfsim, ram});
              Verdict v;
              v.detail << tot.physical_runs << " physical runs, " << tot.area_increases << " increases";
              v.require(tot.physical_runs > 0 && tot.area_increases == 0, "M_{1,0} increased");
              return v;
          }), all);

    print(3, "isoperimetric invariance", guarded([&] {
              Verdict v;
              v.detail << tot.region_violations << " violations among " << tot.particles_checked << " particle checks";
              v.require(tot.particles_checked > 0 && tot.region_violations == 0, "particles outside the region");
              return v;
          }), all);

    print(4, "characteristics", guarded(characteristics), all);

    print(5, "oracle equivalence", guarded([&] {
              need({oracle, pure});
              Verdict v;
              for (const auto& r : oracle->outcome.report.records) {
                  if (r.name.rfind("oracle_count", 0) == 0) {
                      v.detail << r.name << " " << r.observed[0] << " vs " << r.bound << "; ";
                      v.require(passes(r), r.name);
                  }
              }
              const auto& cf = record(*pure, "closed_form_relaxation");
              v.detail << "pure fusion rel err " << cf.observed[0];
              v.require(passes(cf), "closed form relaxation");
              return v;
          }), all);

    print(6, "self-similar regime", guarded([&] {
              need({selfsim});
              Verdict v;
              for (const char* name : {"plateau_M_0_0", "plateau_M_1_0", "plateau_M_0_2"}) {
                  const auto& r = record(*selfsim, name);
                  v.detail << name << " " << r.observed[0] << "; ";
                  v.require(passes(r), name);
              }
              const auto& pc = record(*selfsim, "profile_convergence");
              v.detail << "profile late/early median " << pc.observed[0] << "/" << pc.observed[1];
              v.require(passes(pc), "profile convergence");
              return v;
          }), all);

    print(7, "ramification", guarded([&] {
              need({ram});
              Verdict v;
              const auto& e = record(*ram, "selfsim_area_exponent");
              const auto& g = record(*ram, "shape_ratio_growth");
              const auto& b = record(*ram, "ratio_av_upper_bound");
              v.detail << "exponent " << e.observed[0] << "; shape growth " << g.observed[0]
                       << "; <a>/<v> increases " << b.observed[0];
              v.require(passes(e), "exponent");
              v.require(passes(g), "shape growth");
              v.require(passes(b), "<a>/<v> bound");
              return v;
          }), all);

    print(8, "fast-fusion invariant region", guarded([&] {
              need({fast});
              Verdict v;
              const auto& d = record(*fast, "D_invariant_region");
              v.detail << "D max " << d.observed[0] << " D(0) " << d.observed[1] << " bound " << d.bound;
              v.require(d.status == CheckStatus::Pass, "D exceeded 1/12 + 3 sem or D(0) above 1/24");
              return v;
          }), all);

    print(9, "kernel and fusion algebra", guarded(algebra), all);
    print(10, "unit-volume rescaling", guarded(rescaling), all);

    std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
    return all ? 0 : 1;
}
