#include "coag2d/coag_mc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

#include "coag2d/errors.hpp"
#include "coag2d/fenwick.hpp"
#include "coag2d/fusion_flow.hpp"

namespace coag2d {

std::vector<MomentKey> EngineConfig::default_moments() {
    return {{0, 0}, {0, 1}, {1, 0}, {2, 0}, {0, 2}};
}

void EngineConfig::validate() const {
    if (n_particles < 2) throw ConfigError("n_particles must be >= 2");
    if (!(lambda_sys >= 0.0) || !std::isfinite(lambda_sys)) throw ConfigError("lambda_sys must be >= 0");
    if (!(dt_split > 0.0 && dt_split <= 0.1)) throw ConfigError("dt_split must lie in (0, 0.1]");
    if (!(resample_trigger > 1.0)) throw ConfigError("resample_trigger must exceed 1");
    if (!(resample_min_fraction >= 0.0 && resample_min_fraction < 1.0)) {
        throw ConfigError("resample_min_fraction must lie in [0, 1)");
    }
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive");
    if (!(record_every > 0.0) || !std::isfinite(record_every)) {
        throw ConfigError("record_every must be positive");
    }
    if (!(ode_tol >= 1e-12 && ode_tol <= 1e-4)) throw ConfigError("ode_tol must lie in [1e-12, 1e-4]");
    if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
    if (moments.empty()) throw ConfigError("no moments requested");
}

std::string EventLog::to_json(bool with_timing) const {
    nlohmann::ordered_json j;
    j["proposed"] = proposed;
    j["accepted"] = accepted;
    j["rejected"] = rejected;
    j["resamplings"] = resamplings;
    j["split_steps"] = split_steps;
    j["integrations"] = integrations;
    j["projections"] = projections;
    j["boundary_snaps"] = boundary_snaps;
    if (with_timing) j["wall_seconds"] = wall_seconds;
    return j.dump(2);
}

EventLog& EventLog::operator+=(const EventLog& o) {
    proposed += o.proposed;
    accepted += o.accepted;
    rejected += o.rejected;
    resamplings += o.resamplings;
    split_steps += o.split_steps;
    integrations += o.integrations;
    projections += o.projections;
    boundary_snaps += o.boundary_snaps;
    wall_seconds += o.wall_seconds;
    return *this;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replica) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replica),
                      static_cast<std::uint32_t>(replica >> 32), 0x636f6167u};
    return std::mt19937_64(seq);
}

std::vector<double> record_times(double t_end, double record_every, RecordSpacing spacing) {
    if (!(t_end > 0.0) || !(record_every > 0.0)) throw ConfigError("bad record grid");
    std::vector<double> out{0.0};
    const double span = spacing == RecordSpacing::Linear ? t_end : std::log1p(t_end);
    for (std::size_t k = 1;; ++k) {
        const double x = static_cast<double>(k) * record_every;
        if (x >= span * (1.0 - 1e-12)) break;
        out.push_back(spacing == RecordSpacing::Linear ? x : std::expm1(x));
    }
    out.push_back(t_end);
    return out;
}

namespace {

double majorant_prefactor(const KernelSpec& kernel, MajorantMode mode) {
    return mode == MajorantMode::Bound ? kernel.K0() : kernel.tight_prefactor();
}

double inv_factor(const KernelSpec& k, double v) { return k.is_oracle() ? 1.0 : k.inv_factor(v); }
double fwd_factor(const KernelSpec& k, double v) { return k.is_oracle() ? 1.0 : k.fwd_factor(v); }

void check_volume_range(double v) {
    if (v < kMinVolume || v > kMaxVolume) {
        throw RegionError("particle volume " + format_double(v) + " left the working range");
    }
}

void check_majorant_ratio(double ratio) {
    if (!(ratio <= 1.0 + 1e-9)) {
        throw DomainError("kernel exceeds its majorant (ratio " + format_double(ratio) + ")");
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Draws an index with probability proportional to the sampler's values.
std::size_t draw(const FenwickSampler& s, std::size_t limit, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return s.find(unif(rng) * s.total(), limit);
}

}  // namespace

RunResult run_physical(Ensemble e, const KernelSpec& kernel, const FusionSpec& fusion,
                       const EngineConfig& cfg, const SnapshotObserver& observer) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    if (cfg.frame != Frame::Physical || e.frame != Frame::Physical) {
        throw ConfigError("run_physical needs a physical-frame ensemble and config");
    }
    if (fusion.gamma() != kernel.gamma()) throw ConfigError("fusion and kernel disagree on gamma");
    if (!cfg.thinning && !(cfg.majorant == MajorantMode::Tight && kernel.theta() == 0.0)) {
        throw ConfigError("thinning can only be disabled with an exact majorant");
    }
    if (e.empty()) throw DomainError("empty ensemble");
    if (e.clock != 0.0) throw ConfigError("runs start at clock 0");
    e.validate();
    const double w = e.particles.front().w;
    for (const auto& p : e.particles) {
        if (p.w != w) throw DomainError("the physical engine needs equal weights");
    }

    e.rng = make_rng(cfg.seed, cfg.replica);
    e.lambda_sys = cfg.lambda_sys > 0.0 ? cfg.lambda_sys
                                        : static_cast<double>(e.size()) / moment(e, 0, 0);
    Lattice lattice;
    if (cfg.exact_lattice) {
        lattice = Lattice::for_ensemble(e.particles);
        snap_to_lattice(e, lattice);
    }

    FlowParams flow{fusion, std::nullopt, FlowFrame::Physical, fusion.gamma(), cfg.ode_tol,
                    cfg.max_step, true};
    flow.validate();

    RunResult out;
    auto& ps = e.particles;
    std::size_t n = ps.size();
    std::vector<double> p(n), q(n), last(n, 0.0);
    FenwickSampler tp(n), tq(n);
    double S = 0.0;
    auto refresh_sums = [&] {
        tp.rebuild();
        tq.rebuild();
        S = 0.0;
        for (std::size_t i = 0; i < n; ++i) S += p[i] * q[i];
    };
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = inv_factor(kernel, ps[i].v);
        q[i] = fwd_factor(kernel, ps[i].v);
        tp.set(i, p[i]);
        tq.set(i, q[i]);
    }
    refresh_sums();

    const double c = majorant_prefactor(kernel, cfg.majorant);
    const double inv_lambda = 1.0 / e.lambda_sys;

    auto advance = [&](std::size_t k, double t) {
        if (!fusion.enabled() || last[k] >= t) {
            last[k] = std::max(last[k], t);
            return;
        }
        const auto end = integrate_characteristic(flow, ps[k].a, ps[k].v, t - last[k]);
        ++out.log.integrations;
        if (end.projected) ++out.log.projections;
        const double a = cfg.exact_lattice ? lattice.snap_area_up(end.A, ps[k].v) : end.A;
        ps[k].a = std::min(ps[k].a, a);
        last[k] = t;
    };

    const auto keys = cfg.moments;
    out.series = MomentSeries(keys, standard_aux_names());
    auto record = [&](double t) {
        for (std::size_t k = 0; k < n; ++k) advance(k, t);
        e.clock = t;
        out.series.append(record_row(e, keys, {}, {}));
        if (observer) observer(e);
    };

    const auto times = record_times(cfg.t_end, cfg.record_every, cfg.spacing);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double t = 0.0;
    record(0.0);
    std::size_t next = 1;
    std::size_t merges_since_refresh = 0;

    while (next < times.size() && (n >= 2 || !cfg.coagulation)) {
        if (!cfg.coagulation) {
            t = times[next];
            record(t);
            ++next;
            continue;
        }
        double pair_sum = tp.total() * tq.total() - S;
        if (n < 64 || !(pair_sum > 0.0)) {
            // Cancellation guard: with few particles sum the pairs directly.
            pair_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (i != j) pair_sum += p[i] * q[j];
                }
            }
        }
        const double total = c * inv_lambda * pair_sum;
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw RegionError("majorant rate underflowed or overflowed");
        }
        const double dt = std::exponential_distribution<double>(total)(e.rng);
        if (t + dt >= times[next]) {
            t = times[next];
            record(t);
            ++next;
            continue;
        }
        t += dt;

        std::size_t i = 0;
        std::size_t j = 0;
        do {
            i = draw(tp, n, e.rng);
            j = draw(tq, n, e.rng);
        } while (i == j);
        ++out.log.proposed;

        bool accept = true;
        if (cfg.thinning) {
            const double khat = c * (p[i] * q[j] + p[j] * q[i]);
            if (kernel.theta() > 0.0) {
                advance(i, t);
                advance(j, t);
            }
            const double ratio = eval_coag_kernel(kernel, ps[i].a, ps[i].v, ps[j].a, ps[j].v) / khat;
            check_majorant_ratio(ratio);
            accept = ratio >= 1.0 || unif(e.rng) < ratio;
        }
        if (!accept) {
            ++out.log.rejected;
            continue;
        }
        ++out.log.accepted;
        advance(i, t);
        advance(j, t);

        Particle merged = merge(ps[i], ps[j]);
        check_volume_range(merged.v);
        if (!in_region(merged.a, merged.v)) {
            merged.a = cfg.exact_lattice ? lattice.snap_area_up(merged.a, merged.v)
                                         : sphere_area(merged.v);
            ++out.log.boundary_snaps;
        }
        S -= p[i] * q[i] + p[j] * q[j];
        ps[i] = merged;
        p[i] = inv_factor(kernel, merged.v);
        q[i] = fwd_factor(kernel, merged.v);
        last[i] = t;
        S += p[i] * q[i];
        tp.set(i, p[i]);
        tq.set(i, q[i]);

        const std::size_t back = n - 1;
        if (j != back) {
            ps[j] = ps[back];
            p[j] = p[back];
            q[j] = q[back];
            last[j] = last[back];
            tp.set(j, p[j]);
            tq.set(j, q[j]);
        }
        tp.set(back, 0.0);
        tq.set(back, 0.0);
        ps.pop_back();
        p.pop_back();
        q.pop_back();
        last.pop_back();
        --n;

        if (++merges_since_refresh >= std::max<std::size_t>(n, 1024)) {
            merges_since_refresh = 0;
            // Trees keep their capacity; trailing slots hold zeros.
            S = 0.0;
            for (std::size_t k = 0; k < n; ++k) S += p[k] * q[k];
            tp.rebuild();
            tq.rebuild();
        }
    }
    for (std::size_t k = 0; k < n; ++k) advance(k, t);
    e.clock = t;
    out.log.wall_seconds = seconds_since(start);
    out.ensemble = std::move(e);
    return out;
}

CoagStepStats step_tau_leap(Ensemble& e, const KernelSpec& kernel, const TruncationParams& trunc,
                            double dt, MajorantMode mode) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("coagulation step needs dt > 0");
    CoagStepStats stats;
    auto& ps = e.particles;
    const std::size_t n = ps.size();
    if (n < 2) return stats;

    const double coef = (1.0 - kernel.gamma()) * majorant_prefactor(kernel, mode);
    std::vector<double> p(n), q(n);
    std::vector<char> alive(n, 1);
    // Ordered pair (i, j) has majorant weight p_i q_j (w_i + w_j), split as
    // (p_i w_i) q_j + p_i (q_j w_j).
    FenwickSampler tpw(n), tq(n), tp(n), tqw(n);
    double Sw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = inv_factor(kernel, ps[i].v);
        q[i] = fwd_factor(kernel, ps[i].v);
        tpw.set(i, p[i] * ps[i].w);
        tq.set(i, q[i]);
        tp.set(i, p[i]);
        tqw.set(i, q[i] * ps[i].w);
        Sw += p[i] * q[i] * ps[i].w;
    }
    auto branch_totals = [&] {
        const double a = std::max(0.0, tpw.total() * tq.total() - Sw);
        const double b = std::max(0.0, tp.total() * tqw.total() - Sw);
        return std::pair{a, b};
    };
    {
        const auto [a, b] = branch_totals();
        const double expected = coef * (a + b) * dt;
        if (expected > 0.1 * static_cast<double>(n)) {
            throw DomainError("split step too large: " + format_double(expected) +
                              " merges expected among " + std::to_string(n) + " particles");
        }
    }
    auto update = [&](std::size_t i) {
        Sw -= q[i] * tpw.value(i);
        if (!alive[i]) {
            tpw.set(i, 0.0);
            tq.set(i, 0.0);
            tp.set(i, 0.0);
            tqw.set(i, 0.0);
            return;
        }
        p[i] = inv_factor(kernel, ps[i].v);
        q[i] = fwd_factor(kernel, ps[i].v);
        tpw.set(i, p[i] * ps[i].w);
        tq.set(i, q[i]);
        tp.set(i, p[i]);
        tqw.set(i, q[i] * ps[i].w);
        Sw += p[i] * q[i] * ps[i].w;
    };

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t n_alive = n;
    double clock = 0.0;
    while (n_alive >= 2) {
        const auto [ta, tb] = branch_totals();
        const double total = coef * (ta + tb);
        if (!(total > 0.0)) break;
        clock += std::exponential_distribution<double>(total)(e.rng);
        if (clock > dt) break;

        std::size_t i = 0;
        std::size_t j = 0;
        const bool first_branch = unif(e.rng) * (ta + tb) < ta;
        do {
            i = draw(first_branch ? tpw : tp, n, e.rng);
            j = draw(first_branch ? tq : tqw, n, e.rng);
        } while (i == j || !alive[i] || !alive[j]);
        ++stats.proposed;

        const double wi = ps[i].w;
        const double wj = ps[j].w;
        const double khat = (p[i] * q[j] + p[j] * q[i]) * (wi + wj) * majorant_prefactor(kernel, mode);
        const double target =
            truncated_kernel(kernel, trunc, ps[i].a, ps[i].v, ps[j].a, ps[j].v) * std::max(wi, wj);
        const double ratio = target / khat;
        check_majorant_ratio(ratio);
        if (!(unif(e.rng) < ratio)) {
            ++stats.rejected;
            continue;
        }
        ++stats.accepted;

        const std::size_t heavy = wi >= wj ? i : j;
        const std::size_t light = heavy == i ? j : i;
        const double m = ps[light].w;
        Particle merged{ps[i].a + ps[j].a, ps[i].v + ps[j].v, m};
        check_volume_range(merged.v);
        if (!in_region(merged.a, merged.v)) merged.a = sphere_area(merged.v);
        ps[light] = merged;
        ps[heavy].w -= m;
        if (!(ps[heavy].w > 0.0)) {
            alive[heavy] = 0;
            --n_alive;
        }
        update(light);
        update(heavy);
    }

    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (alive[i]) ps[k++] = ps[i];
    }
    ps.resize(k);
    return stats;
}

namespace {

void check_selfsim_support(const Ensemble& e, const TruncationParams& trunc) {
    const double a_min = sphere_area(trunc.eps);
    for (const auto& p : e.particles) {
        if (p.v < trunc.eps || p.v >= 2.0 * trunc.bigR || p.a < a_min) {
            throw RegionError("initial particle (a=" + format_double(p.a) + ", v=" +
                              format_double(p.v) + ") outside the truncated support");
        }
    }
}

}  // namespace

RunResult run_selfsim(Ensemble e, const KernelSpec& kernel, const FusionSpec& fusion,
                      const TruncationParams& trunc, const EngineConfig& cfg,
                      const SnapshotObserver& observer) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    if (cfg.frame != Frame::SelfSimilar || e.frame != Frame::SelfSimilar) {
        throw ConfigError("run_selfsim needs a self-similar-frame ensemble and config");
    }
    if (fusion.gamma() != kernel.gamma()) throw ConfigError("fusion and kernel disagree on gamma");
    if (!cfg.thinning) throw ConfigError("the weighted engine always thins");
    if (e.empty()) throw DomainError("empty ensemble");
    if (e.clock != 0.0) throw ConfigError("runs start at clock 0");
    e.validate();
    check_selfsim_support(e, trunc);
    e.rng = make_rng(cfg.seed, cfg.replica);
    e.lambda_sys = 1.0;

    FlowParams flow{fusion, trunc, FlowFrame::SelfSimilarRegularized, fusion.gamma(), cfg.ode_tol,
                    cfg.max_step, cfg.transport};
    flow.validate();

    RunResult out;
    const auto keys = cfg.moments;
    auto aux_names = standard_aux_names();
    aux_names.push_back("fusion_term");
    aux_names.push_back("weight_ratio");
    out.series = MomentSeries(keys, aux_names);
    const std::vector<std::string> extra{"fusion_term", "weight_ratio"};

    auto weight_ratio = [&] {
        const auto [lo, hi] = std::minmax_element(
            e.particles.begin(), e.particles.end(),
            [](const Particle& x, const Particle& y) { return x.w < y.w; });
        return hi->w / lo->w;
    };
    auto record = [&] {
        CompensatedSum fusion_term;
        if (fusion.enabled()) {
            for (const auto& p : e.particles) {
                fusion_term.add(p.w * (1.0 - fusion.gamma()) * fusion_delta(fusion, trunc, p.a, p.v) *
                                (sphere_area(p.v) - p.a));
            }
        }
        const double values[2] = {fusion_term.value(), weight_ratio()};
        out.series.append(record_row(e, keys, extra, values));
        if (observer) observer(e);
    };
    auto half_flow = [&](double h) {
        for (auto& p : e.particles) {
            const auto end = integrate_characteristic(flow, p.a, p.v, h);
            ++out.log.integrations;
            if (end.projected) ++out.log.projections;
            p.a = end.A;
            p.v = end.V;
            if (end.h_eps != 0.0) p.w *= std::exp(end.h_eps);
            check_volume_range(p.v);
        }
    };

    const auto times = record_times(cfg.t_end, cfg.record_every, cfg.spacing);
    const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt_split - 1e-9));
    const double h = cfg.t_end / static_cast<double>(steps);
    record();
    std::size_t next = 1;
    for (std::size_t k = 0; k < steps; ++k) {
        half_flow(0.5 * h);
        if (cfg.coagulation) {
            const auto st = step_tau_leap(e, kernel, trunc, h, cfg.majorant);
            out.log.proposed += st.proposed;
            out.log.accepted += st.accepted;
            out.log.rejected += st.rejected;
        }
        if (e.empty()) throw DomainError("ensemble emptied");
        const double min_count = cfg.resample_min_fraction * static_cast<double>(cfg.n_particles);
        if (weight_ratio() > cfg.resample_trigger || static_cast<double>(e.size()) < min_count) {
            out.audits.push_back(resample(e, cfg.n_particles));
            ++out.log.resamplings;
        }
        half_flow(0.5 * h);
        ++out.log.split_steps;
        e.clock = k + 1 == steps ? cfg.t_end : static_cast<double>(k + 1) * h;
        bool due = false;
        while (next < times.size() && e.clock >= times[next] - 0.5 * h) {
            due = true;
            ++next;
        }
        if (due) record();
    }
    out.log.wall_seconds = seconds_since(start);
    out.ensemble = std::move(e);
    return out;
}

}  // namespace coag2d
