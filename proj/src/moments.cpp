#include "coag2d/moments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "coag2d/errors.hpp"

namespace coag2d {

std::string to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::HypothesisUnmet: return "hypothesis unmet";
        case CheckStatus::Info: return "info";
    }
    return "?";
}

void DiagnosticReport::append(const DiagnosticReport& other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
}

bool DiagnosticReport::passed() const {
    return std::none_of(records.begin(), records.end(),
                        [](const DiagnosticRecord& r) { return r.status == CheckStatus::Fail; });
}

const DiagnosticRecord* DiagnosticReport::find(const std::string& name) const {
    for (const auto& r : records) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

std::string DiagnosticReport::to_json() const {
    auto num = [](double x) -> nlohmann::ordered_json {
        if (std::isfinite(x)) return x;
        return format_double(x);
    };
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["name"] = r.name;
        j["t_from"] = num(r.t_from);
        j["t_to"] = num(r.t_to);
        auto obs = nlohmann::ordered_json::array();
        for (double x : r.observed) obs.push_back(num(x));
        j["observed"] = obs;
        j["bound"] = num(r.bound);
        j["status"] = to_string(r.status);
        j["margin"] = num(r.margin);
        if (!r.note.empty()) j["note"] = r.note;
        arr.push_back(j);
    }
    nlohmann::ordered_json root;
    root["passed"] = passed();
    root["checks"] = arr;
    return root.dump(2);
}

std::string DiagnosticReport::table() const {
    std::ostringstream os;
    os << std::left << std::setw(40) << "check" << std::setw(18) << "status" << std::setw(14)
       << "observed" << std::setw(14) << "bound" << "margin\n";
    for (const auto& r : records) {
        os << std::setw(40) << r.name << std::setw(18) << to_string(r.status) << std::setw(14)
           << std::setprecision(6) << (r.observed.empty() ? 0.0 : r.observed.front())
           << std::setw(14) << r.bound << r.margin << '\n';
    }
    return os.str();
}

double oracle_constant_kernel_count(double n0, double t) {
    if (!(n0 > 0.0) || !(t >= 0.0)) throw DomainError("oracle needs n0 > 0 and t >= 0");
    return n0 * 2.0 / (2.0 + n0 * t);
}

namespace {

void require_layout(std::span<const MomentSeries> replicas) {
    if (replicas.empty()) throw ConfigError("no series to analyse");
    for (const auto& r : replicas) {
        if (r.size() != replicas.front().size() || r.empty()) {
            throw ConfigError("replica series differ in length");
        }
    }
}

std::size_t moment_col(const MomentSeries& s, MomentKey key) {
    const auto idx = s.moment_index(key);
    if (!idx) throw ConfigError("series lacks column " + key.name());
    return *idx;
}

std::size_t aux_col(const MomentSeries& s, const std::string& name) {
    const auto idx = s.aux_index(name);
    if (!idx) throw ConfigError("series lacks column " + name);
    return *idx;
}

}  // namespace

Band band_of(std::span<const MomentSeries> replicas,
             const std::function<double(const MomentSeries&, std::size_t)>& column) {
    require_layout(replicas);
    Band b;
    const std::size_t n = replicas.front().size();
    std::vector<double> buf(replicas.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < replicas.size(); ++r) buf[r] = column(replicas[r], i);
        const auto st = sample_stats(buf);
        b.clock.push_back(replicas.front().rows()[i].clock);
        b.mean.push_back(st.mean);
        b.sem.push_back(st.sem);
    }
    return b;
}

Band moment_band(std::span<const MomentSeries> replicas, MomentKey key) {
    require_layout(replicas);
    const auto c = moment_col(replicas.front(), key);
    return band_of(replicas, [c](const MomentSeries& s, std::size_t i) { return s.rows()[i].moments[c]; });
}

Band aux_band(std::span<const MomentSeries> replicas, const std::string& name) {
    require_layout(replicas);
    const auto c = aux_col(replicas.front(), name);
    return band_of(replicas, [c](const MomentSeries& s, std::size_t i) { return s.rows()[i].aux[c]; });
}

DiagnosticReport check_area_budget(std::span<const MomentSeries> replicas, const FusionSpec& fusion,
                                   double gamma, double sigmas) {
    require_layout(replicas);
    if (!(gamma < 1.0)) throw DomainError("gamma must be < 1");
    const auto& first = replicas.front();
    const auto ca = moment_col(first, {1, 0});
    const auto cf = aux_col(first, "fusion_term");
    const std::size_t n = first.size();
    if (n < 3) throw ConfigError("area budget needs at least three records");

    // Per replica: excess of the central difference over the upper and lower
    // ends of the band spanned by the right-hand side on the stencil.
    auto excess = [&](bool upper) {
        return band_of(replicas, [=](const MomentSeries& s, std::size_t i) {
            if (i == 0 || i + 1 >= s.size()) return 0.0;
            const auto& r = s.rows();
            const double d = (r[i + 1].moments[ca] - r[i - 1].moments[ca]) /
                             (r[i + 1].clock - r[i - 1].clock);
            double hi = -std::numeric_limits<double>::infinity();
            double lo = std::numeric_limits<double>::infinity();
            for (std::size_t k = i - 1; k <= i + 1; ++k) {
                const double a3 = r[k].moments[ca] / 3.0;
                const double f = fusion.enabled() ? r[k].aux[cf] : 0.0;
                hi = std::max(hi, a3);
                lo = std::min(lo, a3 + f);
            }
            return upper ? d - hi : lo - d;
        });
    };
    const Band up = excess(true);
    const Band low = excess(false);
    const Band area = moment_band(replicas, {1, 0});

    DiagnosticRecord rec;
    rec.name = "area_budget";
    rec.t_from = first.rows()[1].clock;
    rec.t_to = first.rows()[n - 2].clock;
    rec.bound = 0.0;
    double worst = std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double slack = 1e-6 * std::abs(area.mean[i]);
        const double m_up = sigmas * up.sem[i] + slack - up.mean[i];
        const double m_low = sigmas * low.sem[i] + slack - low.mean[i];
        const double m = std::min(m_up, m_low);
        if (m < 0.0) ++violations;
        worst = std::min(worst, m / std::max(area.mean[i], 1e-300));
    }
    rec.observed = {static_cast<double>(violations)};
    rec.margin = worst;
    rec.status = violations == 0 ? CheckStatus::Pass : CheckStatus::Fail;
    rec.note = "relative margin of the derivative of M_{1,0} inside [A/3 + F, A/3]";
    DiagnosticReport rep;
    rep.add(rec);
    return rep;
}

DiagnosticReport check_D_invariant_region(std::span<const MomentSeries> replicas, double gamma,
                                          double sigmas) {
    require_layout(replicas);
    if (!(gamma < 1.0)) throw DomainError("gamma must be < 1");
    const auto& first = replicas.front();
    const auto c1 = moment_col(first, {1, 0});
    const auto c2 = moment_col(first, {2, 0});
    const Band D = band_of(replicas, [=](const MomentSeries& s, std::size_t i) {
        return s.rows()[i].moments[c1] + s.rows()[i].moments[c2];
    });
    const double threshold = 1.0 / (12.0 * (1.0 - gamma));

    DiagnosticRecord rec;
    rec.name = "D_invariant_region";
    rec.t_from = D.clock.front();
    rec.t_to = D.clock.back();
    rec.bound = threshold;
    double dmax = 0.0;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < D.mean.size(); ++i) {
        dmax = std::max(dmax, D.mean[i]);
        worst = std::min(worst, threshold + sigmas * D.sem[i] - D.mean[i]);
    }
    rec.observed = {dmax, D.mean.front(), D.mean.back()};
    rec.margin = worst;
    if (D.mean.front() > threshold) {
        rec.status = CheckStatus::HypothesisUnmet;
        rec.note = "D(0) exceeds the threshold";
    } else {
        rec.status = worst >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    }
    DiagnosticReport rep;
    rep.add(rec);
    return rep;
}

DiagnosticReport check_invariant_moment_set(std::span<const MomentSeries> replicas,
                                            KernelRegime regime,
                                            std::span<const MomentCandidate> candidates,
                                            double volume_tol, double sigmas) {
    require_layout(replicas);
    if (regime == KernelRegime::ConstantOracle) {
        throw ConfigError("moment-set check needs a kernel in one of the power-law regimes");
    }
    DiagnosticReport rep;
    const auto cv = moment_col(replicas.front(), {0, 1});
    const Band vol = band_of(replicas, [cv](const MomentSeries& s, std::size_t i) {
        return s.rows()[i].moments[cv] / s.rows()[0].moments[cv];
    });
    DiagnosticRecord rv;
    rv.name = "volume_normalised";
    rv.t_from = vol.clock.front();
    rv.t_to = vol.clock.back();
    rv.bound = volume_tol;
    double dev = 0.0;
    for (double x : vol.mean) dev = std::max(dev, std::abs(x - 1.0));
    rv.observed = {dev};
    rv.margin = volume_tol - dev;
    rv.status = dev <= volume_tol ? CheckStatus::Pass : CheckStatus::Fail;
    rep.add(rv);

    for (const auto& cand : candidates) {
        const Band b = moment_band(replicas, cand.key);
        DiagnosticRecord r;
        r.name = "invariant_" + cand.key.name();
        r.bound = cand.bound;
        r.t_to = b.clock.back();
        const std::size_t n = b.mean.size();
        std::size_t entry = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (b.mean[i] <= cand.bound) {
                entry = i;
                break;
            }
        }
        double sup_all = 0.0;
        double sup_late = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sup_all = std::max(sup_all, b.mean[i]);
            if (2 * i >= n) sup_late = std::max(sup_late, b.mean[i]);
        }
        r.observed = {sup_all, sup_late};
        if (entry == n) {
            r.status = CheckStatus::HypothesisUnmet;
            r.note = "candidate bound never reached";
            r.t_from = b.clock.front();
            r.margin = cand.bound - sup_all;
        } else {
            r.t_from = b.clock[entry];
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t i = entry; i < n; ++i) {
                worst = std::min(worst, cand.bound + sigmas * b.sem[i] - b.mean[i]);
            }
            r.margin = worst;
            r.status = worst >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
        }
        rep.add(r);
    }
    return rep;
}

double fit_log_slope(std::span<const double> x, std::span<const double> y, double from, double to) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= from && x[i] <= to) {
            if (!(y[i] > 0.0)) throw DomainError("log fit of a non-positive value");
            xs.push_back(x[i]);
            ys.push_back(std::log(y[i]));
        }
    }
    return fit_line(xs, ys).slope;
}

DiagnosticRecord check_plateau(const std::string& name, std::span<const double> x,
                               std::span<const double> y, double from, double to, double rel_tol) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= from && x[i] <= to) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    }
    const auto fit = fit_line(xs, ys);
    const double mean = sample_stats(ys).mean;
    const double change = std::abs(fit.slope * (xs.back() - xs.front()));
    DiagnosticRecord r;
    r.name = name;
    r.t_from = from;
    r.t_to = to;
    r.bound = rel_tol;
    r.observed = {change / std::abs(mean), mean};
    r.margin = rel_tol - change / std::abs(mean);
    r.status = r.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    return r;
}

DiagnosticReport check_ramification_ratios(std::span<const MomentSeries> replicas, double gamma,
                                           const RamificationThresholds& th) {
    require_layout(replicas);
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0,1)");
    const auto& first = replicas.front();
    const auto c_av = aux_col(first, "ratio_av");
    const auto c_av23 = aux_col(first, "ratio_av23");
    const auto c_area = moment_col(first, {1, 0});
    DiagnosticReport rep;

    // Physical-frame series only: the time change below assumes clock = t.
    const double xi = 1.0 / (1.0 - gamma);

    DiagnosticRecord mono;
    mono.name = "ratio_av_upper_bound";
    mono.t_from = first.rows().front().clock;
    mono.t_to = first.rows().back().clock;
    std::size_t increases = 0;
    double inf = std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& s : replicas) {
        const auto& r = s.rows();
        const double r0 = r.front().aux[c_av];
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double x = r[i].aux[c_av];
            if (x > r0 || (i > 0 && x > r[i - 1].aux[c_av])) ++increases;
            worst = std::min(worst, (r0 - x) / r0);
            inf = std::min(inf, x);
        }
    }
    mono.observed = {static_cast<double>(increases), inf};
    mono.bound = 0.0;
    mono.margin = worst;
    mono.status = increases == 0 && inf > 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    mono.note = "observed[1] is the infimum of <a>/<v>";
    rep.add(mono);

    const Band growth = band_of(replicas, [c_av23](const MomentSeries& s, std::size_t i) {
        return s.rows()[i].aux[c_av23] / s.rows()[0].aux[c_av23];
    });
    DiagnosticRecord g;
    g.name = "shape_ratio_growth";
    g.t_from = growth.clock.front();
    g.t_to = growth.clock.back();
    g.bound = th.min_shape_growth;
    g.observed = {growth.mean.back(), growth.sem.back()};
    g.margin = growth.mean.back() - th.min_shape_growth;
    g.status = g.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    rep.add(g);

    const double tau_end = xi * std::log1p(first.rows().back().clock);
    const double to = th.fit_to > 0.0 ? th.fit_to : tau_end;
    std::vector<double> slopes;
    for (const auto& s : replicas) {
        std::vector<double> tau;
        std::vector<double> area;
        for (const auto& r : s.rows()) {
            tau.push_back(xi * std::log1p(r.clock));
            area.push_back(r.moments[c_area] * std::pow(1.0 + r.clock, xi / 3.0));
        }
        slopes.push_back(fit_log_slope(tau, area, th.fit_from, to));
    }
    const auto st = sample_stats(slopes);
    DiagnosticRecord e;
    e.name = "selfsim_area_exponent";
    e.t_from = th.fit_from;
    e.t_to = to;
    e.bound = th.exponent;
    e.observed = {st.mean, st.sem};
    e.margin = th.exponent_tol - std::abs(st.mean - th.exponent);
    e.status = e.margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
    e.note = "fitted d log(M_{1,0}(f) (1+t)^{xi/3}) / d tau";
    rep.add(e);
    return rep;
}

double binomial_merge_ratio(double x, double y, double n) {
    if (!(x >= 0.0) || !(y >= 0.0) || !(n >= 1.0)) throw DomainError("binomial ratio arguments");
    const double denom = std::pow(2.0, n - 1.0) * (std::pow(x, n) + std::pow(y, n));
    return denom == 0.0 ? 0.0 : std::pow(x + y, n) / denom;
}

double young_constant(double eps, double mu) {
    if (!(eps > 0.0) || !(mu < 0.0)) throw DomainError("young_constant needs eps > 0 and mu < 0");
    const double m = -mu;
    const double a_star = 4.0 / 3.0 * m / (eps * (1.0 + m));
    return std::pow(a_star, m) * (4.0 / 3.0 - eps * a_star);
}

double heuristic_fusion_prefactor(double eps, double mu) { return 2.0 * young_constant(eps, mu); }

}  // namespace coag2d
