#include "coag2d/selfsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "coag2d/errors.hpp"
#include "coag2d/kernels.hpp"

namespace coag2d {

double scaling_xi(double gamma) {
    if (!(gamma < 1.0) || !std::isfinite(gamma)) throw DomainError("self-similar scaling needs gamma < 1");
    return 1.0 / (1.0 - gamma);
}

double selfsim_time(double t, double gamma) { return scaling_xi(gamma) * std::log1p(t); }

MomentSeries rescaled_moment(const MomentSeries& physical, MomentKey key, double gamma) {
    const double xi = scaling_xi(gamma);
    const auto values = physical.moment_column(key);
    const double exponent = -xi * (2.0 / 3.0 * key.k + key.l - 1.0);
    MomentSeries out({key}, {"tau"});
    for (std::size_t i = 0; i < physical.size(); ++i) {
        const double t = physical.rows()[i].clock;
        const double factor = exponent == 0.0 ? 1.0 : std::pow(1.0 + t, exponent);
        out.append({t, {values[i] * factor}, {xi * std::log1p(t)}});
    }
    return out;
}

BinGrid BinGrid::covering(std::span<const double> a_hat, std::span<const double> v_hat,
                          std::size_t na, std::size_t nv, double margin) {
    if (a_hat.empty() || a_hat.size() != v_hat.size()) throw DomainError("grid needs points");
    if (na == 0 || nv == 0) throw DomainError("grid needs at least one bin per axis");
    auto range = [margin](std::span<const double> xs, double& lo, double& hi) {
        lo = std::log(*std::min_element(xs.begin(), xs.end()));
        hi = std::log(*std::max_element(xs.begin(), xs.end()));
        const double span = std::max(hi - lo, 1e-6);
        lo -= margin * span;
        hi += margin * span;
    };
    BinGrid g;
    g.na = na;
    g.nv = nv;
    range(a_hat, g.log_a_lo, g.log_a_hi);
    range(v_hat, g.log_v_lo, g.log_v_hi);
    return g;
}

namespace {

std::size_t axis_bin(double x, double lo, double hi, std::size_t n) {
    const double lx = std::log(x);
    if (lx < lo) return 0;
    if (lx >= hi) return n + 1;
    const auto k = static_cast<std::size_t>((lx - lo) / (hi - lo) * static_cast<double>(n));
    return std::min(k, n - 1) + 1;
}

}  // namespace

std::size_t BinGrid::cell(double a_hat, double v_hat) const {
    return axis_bin(a_hat, log_a_lo, log_a_hi, na) * (nv + 2) +
           axis_bin(v_hat, log_v_lo, log_v_hi, nv);
}

bool BinGrid::is_overflow(std::size_t c) const {
    const std::size_t ia = c / (nv + 2);
    const std::size_t iv = c % (nv + 2);
    return ia == 0 || ia == na + 1 || iv == 0 || iv == nv + 1;
}

double BinGrid::a_center(std::size_t ia) const {
    return std::exp(log_a_lo + (static_cast<double>(ia) + 0.5) * (log_a_hi - log_a_lo) /
                                   static_cast<double>(na));
}

double BinGrid::v_center(std::size_t iv) const {
    return std::exp(log_v_lo + (static_cast<double>(iv) + 0.5) * (log_v_hi - log_v_lo) /
                                   static_cast<double>(nv));
}

bool BinGrid::meets_region(std::size_t c) const {
    if (is_overflow(c)) return true;
    const std::size_t ia = c / (nv + 2) - 1;
    const std::size_t iv = c % (nv + 2) - 1;
    const double a_top = std::exp(log_a_lo + static_cast<double>(ia + 1) * (log_a_hi - log_a_lo) /
                                                 static_cast<double>(na));
    const double v_bottom = std::exp(log_v_lo + static_cast<double>(iv) * (log_v_hi - log_v_lo) /
                                                    static_cast<double>(nv));
    return a_top * (1.0 + 1e-12) >= sphere_area(v_bottom);
}

void rescaled_coordinates(const Ensemble& e, double gamma, std::vector<double>& a_hat,
                          std::vector<double>& v_hat) {
    if (e.frame != Frame::Physical) throw ConfigError("profile extraction needs a physical ensemble");
    const double xi = scaling_xi(gamma);
    const double sv = std::pow(1.0 + e.clock, -xi);
    const double sa = std::pow(1.0 + e.clock, -2.0 / 3.0 * xi);
    a_hat.clear();
    v_hat.clear();
    for (const auto& p : e.particles) {
        a_hat.push_back(p.a * sa);
        v_hat.push_back(p.v * sv);
    }
}

RescaledSnapshot extract_profile(const Ensemble& e, double gamma, const BinGrid& grid) {
    if (e.empty()) throw DomainError("profile of an empty ensemble");
    std::vector<double> a_hat;
    std::vector<double> v_hat;
    rescaled_coordinates(e, gamma, a_hat, v_hat);
    RescaledSnapshot s;
    s.grid = grid;
    s.mass.assign(grid.cells(), 0.0);
    s.clock = e.clock;
    s.mass_scale = std::pow(1.0 + e.clock, scaling_xi(gamma));
    for (std::size_t i = 0; i < e.size(); ++i) {
        s.mass[grid.cell(a_hat[i], v_hat[i])] += e.particles[i].w;
    }
    s.total_mass = moment(e, 0, 0);
    CompensatedSum over;
    for (std::size_t c = 0; c < s.mass.size(); ++c) {
        if (grid.is_overflow(c)) over.add(s.mass[c]);
    }
    s.overflow_mass = over.value();
    return s;
}

double profile_distance(const RescaledSnapshot& s1, const RescaledSnapshot& s2) {
    if (!(s1.grid == s2.grid) || s1.mass.size() != s2.mass.size()) {
        throw DomainError("profile_distance needs identical grids");
    }
    CompensatedSum t1;
    CompensatedSum t2;
    for (std::size_t c = 0; c < s1.mass.size(); ++c) {
        t1.add(s1.mass[c]);
        t2.add(s2.mass[c]);
    }
    if (!(t1.value() > 0.0) || !(t2.value() > 0.0)) throw DomainError("profile with no mass");
    CompensatedSum d;
    for (std::size_t c = 0; c < s1.mass.size(); ++c) {
        d.add(std::abs(s1.mass[c] / t1.value() - s2.mass[c] / t2.value()));
    }
    return d.value();
}

void RescaledSnapshot::write_csv(std::ostream& os) const {
    os << "# clock=" << format_double(clock) << " total_mass=" << format_double(total_mass)
       << " mass_scale=" << format_double(mass_scale)
       << " overflow_mass=" << format_double(overflow_mass) << '\n';
    os << "# grid=" << format_double(grid.log_a_lo) << ',' << format_double(grid.log_a_hi) << ','
       << grid.na << ',' << format_double(grid.log_v_lo) << ',' << format_double(grid.log_v_hi)
       << ',' << grid.nv << '\n';
    os << "a_hat,v_hat,mass\n";
    for (std::size_t ia = 0; ia < grid.na; ++ia) {
        for (std::size_t iv = 0; iv < grid.nv; ++iv) {
            const double m = mass[(ia + 1) * (grid.nv + 2) + iv + 1];
            os << format_double(grid.a_center(ia)) << ',' << format_double(grid.v_center(iv)) << ','
               << format_double(m) << '\n';
        }
    }
    // Overflow cells are written with their raw cell index in place of centres.
    for (std::size_t c = 0; c < mass.size(); ++c) {
        if (grid.is_overflow(c) && mass[c] != 0.0) {
            os << "overflow," << c << ',' << format_double(mass[c]) << '\n';
        }
    }
}

void RescaledSnapshot::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open " + path + " for writing");
    write_csv(os);
}

namespace {

std::string header_value(const std::string& line, const std::string& key) {
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos) throw ConfigError("snapshot header lacks " + key);
    const auto start = pos + key.size() + 1;
    const auto end = line.find(' ', start);
    return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

}  // namespace

RescaledSnapshot RescaledSnapshot::read_csv(std::istream& is) {
    RescaledSnapshot s;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# clock=", 0) != 0) {
        throw ConfigError("snapshot CSV must start with a '# clock=' header");
    }
    s.clock = parse_double(header_value(line, "clock"));
    s.total_mass = parse_double(header_value(line, "total_mass"));
    s.mass_scale = parse_double(header_value(line, "mass_scale"));
    s.overflow_mass = parse_double(header_value(line, "overflow_mass"));
    if (!std::getline(is, line) || line.rfind("# grid=", 0) != 0) {
        throw ConfigError("snapshot CSV lacks the grid line");
    }
    {
        std::stringstream ss(line.substr(7));
        std::string f[6];
        for (auto& x : f) {
            if (!std::getline(ss, x, ',')) throw ConfigError("malformed grid line");
        }
        s.grid.log_a_lo = parse_double(f[0]);
        s.grid.log_a_hi = parse_double(f[1]);
        s.grid.na = static_cast<std::size_t>(parse_double(f[2]));
        s.grid.log_v_lo = parse_double(f[3]);
        s.grid.log_v_hi = parse_double(f[4]);
        s.grid.nv = static_cast<std::size_t>(parse_double(f[5]));
        if (s.grid.na == 0 || s.grid.nv == 0) throw ConfigError("empty grid");
    }
    if (!std::getline(is, line)) throw ConfigError("snapshot CSV lacks the column header");
    s.mass.assign(s.grid.cells(), 0.0);
    std::size_t interior = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string fa, fv, fm;
        if (!std::getline(ss, fa, ',') || !std::getline(ss, fv, ',') || !std::getline(ss, fm)) {
            throw ConfigError("malformed snapshot row '" + line + "'");
        }
        if (fa == "overflow") {
            const auto c = static_cast<std::size_t>(parse_double(fv));
            if (c >= s.mass.size()) throw ConfigError("overflow cell out of range");
            s.mass[c] = parse_double(fm);
            continue;
        }
        if (interior >= s.grid.na * s.grid.nv) throw ConfigError("too many snapshot rows");
        const std::size_t ia = interior / s.grid.nv;
        const std::size_t iv = interior % s.grid.nv;
        s.mass[(ia + 1) * (s.grid.nv + 2) + iv + 1] = parse_double(fm);
        ++interior;
    }
    if (interior != s.grid.na * s.grid.nv) throw ConfigError("snapshot has missing rows");
    return s;
}

RescaledSnapshot RescaledSnapshot::read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    return read_csv(is);
}

UnitVolumeRescaling rescale_to_unit_volume(const Ensemble& e, double v0, double gamma) {
    if (!(v0 > 0.0) || !std::isfinite(v0)) throw DomainError("v0 must be positive");
    const double m01 = moment(e, 0, 1);
    if (std::abs(m01 - v0) > 1e-9 * v0) throw DomainError("v0 differs from the ensemble volume");
    const double xi = scaling_xi(gamma);
    UnitVolumeRescaling out;
    out.v0 = v0;
    out.k = std::pow(v0, xi);
    out.fusion_factor = 1.0 / v0;
    const double sa = std::pow(out.k, -2.0 / 3.0);
    const double sw = out.k / v0;
    out.ensemble.frame = e.frame;
    out.ensemble.clock = e.clock;
    out.ensemble.lambda_sys = e.lambda_sys;
    out.ensemble.rng = e.rng;
    out.ensemble.particles.reserve(e.size());
    for (const auto& p : e.particles) {
        out.ensemble.particles.push_back({p.a * sa, p.v / out.k, p.w * sw});
    }
    return out;
}

Ensemble undo_unit_volume(const Ensemble& unit, double v0, double gamma) {
    if (!(v0 > 0.0) || !std::isfinite(v0)) throw DomainError("v0 must be positive");
    const double k = std::pow(v0, scaling_xi(gamma));
    const double sa = std::pow(k, 2.0 / 3.0);
    const double sw = v0 / k;
    Ensemble e;
    e.frame = unit.frame;
    e.clock = unit.clock;
    e.lambda_sys = unit.lambda_sys;
    e.rng = unit.rng;
    e.particles.reserve(unit.size());
    for (const auto& p : unit.particles) e.particles.push_back({p.a * sa, p.v * k, p.w * sw});
    return e;
}

}  // namespace coag2d
