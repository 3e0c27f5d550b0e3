#include "coag2d/state.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "coag2d/errors.hpp"
#include "coag2d/kernels.hpp"

namespace coag2d {

std::string to_string(Frame f) { return f == Frame::Physical ? "physical" : "selfsim"; }

Frame frame_from_string(const std::string& s) {
    if (s == "physical") return Frame::Physical;
    if (s == "selfsim" || s == "self-similar" || s == "selfsimilar") return Frame::SelfSimilar;
    throw ConfigError("unknown frame '" + s + "'");
}

void validate_particle(const Particle& p) {
    if (!std::isfinite(p.a) || !std::isfinite(p.v) || !std::isfinite(p.w) || p.a <= 0.0 ||
        p.v <= 0.0 || p.w <= 0.0) {
        throw DomainError("particle fields must be positive and finite");
    }
    if (p.v < kMinVolume || p.v > kMaxVolume) {
        throw RegionError("particle volume " + format_double(p.v) + " outside the working range");
    }
    if (!in_region(p.a, p.v)) {
        throw RegionError("particle (a=" + format_double(p.a) + ", v=" + format_double(p.v) +
                          ") violates the isoperimetric inequality");
    }
}

void Ensemble::validate() const {
    for (const auto& p : particles) validate_particle(p);
}

Particle merge(const Particle& p, const Particle& q) {
    if (p.w != q.w) throw DomainError("merge requires equal weights");
    return {p.a + q.a, p.v + q.v, p.w};
}

double moment(std::span<const Particle> ps, double k, double l) {
    if (ps.empty()) return 0.0;
    const double w0 = ps.front().w;
    const bool uniform =
        std::all_of(ps.begin(), ps.end(), [w0](const Particle& p) { return p.w == w0; });
    CompensatedSum sum;
    for (const auto& p : ps) {
        const double term = power(p.a, k) * power(p.v, l);
        sum.add(uniform ? term : p.w * term);
    }
    const double m = uniform ? w0 * sum.value() : sum.value();
    if (!std::isfinite(m)) {
        throw RegionError("moment M_{" + format_double(k) + "," + format_double(l) +
                          "} overflowed");
    }
    return m;
}

MeanRatios mean_ratio_diagnostics(const Ensemble& e) {
    if (e.empty()) throw DomainError("mean ratios of an empty ensemble");
    const double m00 = moment(e, 0, 0);
    const double m10 = moment(e, 1, 0);
    const double m01 = moment(e, 0, 1);
    const double mean_a = m10 / m00;
    const double mean_v = m01 / m00;
    return {m10 / m01, mean_a / std::pow(mean_v, 2.0 / 3.0)};
}

ResampleAudit resample(Ensemble& e, std::size_t target_n) {
    if (target_n == 0) throw DomainError("resample target must be positive");
    if (e.empty()) throw DomainError("cannot resample an empty ensemble");
    ResampleAudit audit;
    audit.n_before = e.size();
    audit.m00_before = moment(e, 0, 0);
    audit.m01_before = moment(e, 0, 1);
    audit.m10_before = moment(e, 1, 0);

    const double total = audit.m00_before;
    const double w_new = total / static_cast<double>(target_n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u0 = unif(e.rng);

    std::vector<Particle> out;
    out.reserve(target_n);
    double cumulative = 0.0;
    std::size_t src = 0;
    for (std::size_t k = 0; k < target_n; ++k) {
        const double pointer = (u0 + static_cast<double>(k)) * w_new;
        while (src + 1 < e.size() && cumulative + e.particles[src].w <= pointer) {
            cumulative += e.particles[src].w;
            ++src;
        }
        const auto& p = e.particles[src];
        out.push_back({p.a, p.v, w_new});
    }
    e.particles = std::move(out);

    audit.n_after = e.size();
    audit.m00_after = moment(e, 0, 0);
    audit.m01_after = moment(e, 0, 1);
    audit.m10_after = moment(e, 1, 0);
    return audit;
}

namespace {

double quantum_for_total(double total) {
    if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("lattice needs a positive total");
    int exponent = 0;
    std::frexp(total, &exponent);  // total < 2^exponent
    // Two bits of headroom for snapping and rounding up.
    return std::ldexp(1.0, exponent - 51);
}

}  // namespace

Lattice Lattice::for_ensemble(std::span<const Particle> ps) {
    double sa = 0.0;
    double sv = 0.0;
    for (const auto& p : ps) {
        sa += p.a;
        sv += p.v;
    }
    return {quantum_for_total(sa), quantum_for_total(sv)};
}

double Lattice::snap_volume(double v) const {
    return std::max(v_quantum, std::nearbyint(v / v_quantum) * v_quantum);
}

double Lattice::snap_area_up(double a, double v) const {
    const double x = std::max(a, sphere_area(v));
    return std::ceil(x / a_quantum) * a_quantum;
}

void snap_to_lattice(Ensemble& e, const Lattice& lat) {
    for (auto& p : e.particles) {
        p.v = lat.snap_volume(p.v);
        p.a = lat.snap_area_up(p.a, p.v);
    }
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double x = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
    auto res = std::from_chars(first, last, x);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ConfigError("cannot parse number '" + s + "'");
    }
    return x;
}

void write_ensemble_csv(std::ostream& os, const Ensemble& e) {
    os << "a,v,w\n";
    for (const auto& p : e.particles) {
        os << format_double(p.a) << ',' << format_double(p.v) << ',' << format_double(p.w) << '\n';
    }
}

void write_ensemble_csv(const std::string& path, const Ensemble& e) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    write_ensemble_csv(os, e);
}

Ensemble read_ensemble_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty ensemble CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "a,v,w") throw ConfigError("ensemble CSV header must be 'a,v,w'");
    Ensemble e;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string fa, fv, fw;
        if (!std::getline(ss, fa, ',') || !std::getline(ss, fv, ',') || !std::getline(ss, fw)) {
            throw ConfigError("malformed ensemble row '" + line + "'");
        }
        e.particles.push_back({parse_double(fa), parse_double(fv), parse_double(fw)});
    }
    return e;
}

Ensemble read_ensemble_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    return read_ensemble_csv(is);
}

}  // namespace coag2d
