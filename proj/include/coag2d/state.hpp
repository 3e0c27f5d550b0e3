#pragma once

// Weighted particle ensembles and the operations on them that do not depend on
// the dynamics: merging, moments, resampling, exact-sum lattices, CSV snapshots.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace coag2d {

struct Particle {
    double a;  // surface area
    double v;  // volume
    double w;  // statistical weight (number concentration carried)
};

enum class Frame { Physical, SelfSimilar };

std::string to_string(Frame f);
Frame frame_from_string(const std::string& s);

/// Finite-N representation of the particle density (f in the physical frame,
/// g in the self-similar frame).
struct Ensemble {
    std::vector<Particle> particles;
    Frame frame = Frame::Physical;
    double clock = 0.0;       // t (physical) or tau (self-similar)
    double lambda_sys = 1.0;  // pair rates are K / lambda_sys in the physical frame
    std::mt19937_64 rng;

    std::size_t size() const { return particles.size(); }
    bool empty() const { return particles.empty(); }

    /// Throws RegionError/DomainError on the first particle violating the invariants.
    void validate() const;
};

/// Particles with volume outside [kMinVolume, kMaxVolume] abort the run.
inline constexpr double kMinVolume = 1e-300;
inline constexpr double kMaxVolume = 1e300;

void validate_particle(const Particle& p);

/// Coagulation product of two equal-weight particles.
Particle merge(const Particle& p, const Particle& q);

/// M_{k,l} = sum_i w_i a_i^k v_i^l with Neumaier summation. When every weight is
/// equal the common weight is factored out, so sums of lattice values are exact.
double moment(std::span<const Particle> ps, double k, double l);
inline double moment(const Ensemble& e, double k, double l) { return moment(e.particles, k, l); }

struct MeanRatios {
    double ratio_av;    // <a>/<v>
    double ratio_av23;  // <a>/<v>^{2/3}
};

MeanRatios mean_ratio_diagnostics(const Ensemble& e);

struct ResampleAudit {
    std::size_t n_before = 0;
    std::size_t n_after = 0;
    double m00_before = 0.0, m00_after = 0.0;
    double m01_before = 0.0, m01_after = 0.0;
    double m10_before = 0.0, m10_after = 0.0;
};

/// Systematic resampling to `target_n` equal-weight particles. Total weight is
/// preserved; other moments are preserved in expectation.
ResampleAudit resample(Ensemble& e, std::size_t target_n);

/// Dyadic grids for areas and volumes. With every value an integer multiple of a
/// quantum and totals below 2^53 quanta, all sums are exact in double precision,
/// so merges conserve the totals bit for bit.
struct Lattice {
    double a_quantum = 0.0;
    double v_quantum = 0.0;

    static Lattice for_ensemble(std::span<const Particle> ps);

    double snap_volume(double v) const;
    /// Rounds up onto the area grid and never below the sphere area of v.
    double snap_area_up(double a, double v) const;
};

/// Snaps every particle onto the lattice (volume to nearest, area upward).
void snap_to_lattice(Ensemble& e, const Lattice& lat);

/// Shortest round-trip decimal representation.
std::string format_double(double x);
double parse_double(const std::string& s);

/// CSV with header "a,v,w".
void write_ensemble_csv(std::ostream& os, const Ensemble& e);
void write_ensemble_csv(const std::string& path, const Ensemble& e);
Ensemble read_ensemble_csv(std::istream& is);
Ensemble read_ensemble_csv(const std::string& path);

/// Compensated (Neumaier) accumulator.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace coag2d
