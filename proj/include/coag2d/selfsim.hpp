#pragma once

// Scaling transforms between the physical and self-similar frames.
//
// With xi = 1/(1-gamma), the self-similar coordinates of a physical particle at
// time t are (a (1+t)^{-2xi/3}, v (1+t)^{-xi}); its weight in the self-similar
// density is w (1+t)^{xi}, and tau = xi log(1+t).

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "coag2d/series.hpp"
#include "coag2d/state.hpp"

namespace coag2d {

/// 1 / (1 - gamma); throws DomainError for gamma >= 1.
double scaling_xi(double gamma);

/// tau = xi log(1 + t).
double selfsim_time(double t, double gamma);

/// One-column series of M_{k,l}(f(t)) (1+t)^{-xi((2/3)k + l - 1)}; aux column "tau".
MomentSeries rescaled_moment(const MomentSeries& physical, MomentKey key, double gamma);

/// Log-spaced rectangular grid in (a_hat, v_hat) with one open-ended overflow
/// bin on each side of each axis.
struct BinGrid {
    double log_a_lo = 0.0, log_a_hi = 1.0;
    double log_v_lo = 0.0, log_v_hi = 1.0;
    std::size_t na = 1, nv = 1;

    /// Covers the points with `margin` (fraction of the log span) on every side.
    static BinGrid covering(std::span<const double> a_hat, std::span<const double> v_hat,
                            std::size_t na, std::size_t nv, double margin = 0.05);

    std::size_t cells() const { return (na + 2) * (nv + 2); }
    /// Cell index; row 0 / column 0 and the last row / column are overflow bins.
    std::size_t cell(double a_hat, double v_hat) const;
    bool is_overflow(std::size_t cell) const;
    /// Geometric bin centre of an interior cell.
    double a_center(std::size_t ia) const;
    double v_center(std::size_t iv) const;
    /// Whether the interior cell meets the region a >= c0 v^{2/3}.
    bool meets_region(std::size_t cell) const;

    bool operator==(const BinGrid&) const = default;
};

struct RescaledSnapshot {
    BinGrid grid;
    std::vector<double> mass;  // particle weight per cell, overflow cells included
    double total_mass = 0.0;   // sum of weights, equal to M_{0,0} of the source ensemble
    double mass_scale = 1.0;   // (1+t)^{xi}: converts weights to self-similar densities
    double overflow_mass = 0.0;
    double clock = 0.0;

    void write_csv(std::ostream& os) const;
    void write_csv(const std::string& path) const;
    static RescaledSnapshot read_csv(std::istream& is);
    static RescaledSnapshot read_csv(const std::string& path);
};

/// Rescaled coordinates of every particle of a physical ensemble at its clock.
void rescaled_coordinates(const Ensemble& e, double gamma, std::vector<double>& a_hat,
                          std::vector<double>& v_hat);

RescaledSnapshot extract_profile(const Ensemble& e, double gamma, const BinGrid& grid);

/// L1 distance between the mass-normalised histograms, in [0, 2].
double profile_distance(const RescaledSnapshot& s1, const RescaledSnapshot& s2);

struct UnitVolumeRescaling {
    Ensemble ensemble;
    double v0 = 1.0;
    double k = 1.0;              // v0^{xi}
    double fusion_factor = 1.0;  // multiply the fusion prefactor by this (1/v0)
};

/// (a, v, w) -> (a k^{-2/3}, v / k, w k / v0) with k = v0^{xi}; the result has
/// unit total volume and M_{y1,y2} scales by v0^{(gamma - (2/3) y1 - y2)/(1-gamma)}.
UnitVolumeRescaling rescale_to_unit_volume(const Ensemble& e, double v0, double gamma);

/// Inverse of rescale_to_unit_volume.
Ensemble undo_unit_volume(const Ensemble& unit, double v0, double gamma);

}  // namespace coag2d
