#pragma once

// Closed-form oracles and moment-inequality diagnostics over recorded series.
//
// Every check takes the replica series of one run configuration. Statistical
// tolerances are `sigmas` times the replica standard error of the quantity
// checked (zero for a single replica).

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coag2d/kernels.hpp"
#include "coag2d/series.hpp"

namespace coag2d {

enum class CheckStatus { Pass, Fail, HypothesisUnmet, Info };

std::string to_string(CheckStatus s);

struct DiagnosticRecord {
    std::string name;
    double t_from = 0.0;
    double t_to = 0.0;
    std::vector<double> observed;
    double bound = 0.0;
    CheckStatus status = CheckStatus::Info;
    double margin = 0.0;  // positive when satisfied
    std::string note;
};

struct DiagnosticReport {
    std::vector<DiagnosticRecord> records;

    void add(DiagnosticRecord r) { records.push_back(std::move(r)); }
    void append(const DiagnosticReport& other);
    /// No record has status Fail.
    bool passed() const;
    const DiagnosticRecord* find(const std::string& name) const;

    std::string to_json() const;
    std::string table() const;
};

/// Mean-field number concentration for K == 1: n0 * 2 / (2 + n0 t).
double oracle_constant_kernel_count(double n0, double t);

/// Per-record mean and standard error of a derived column computed per replica.
struct Band {
    std::vector<double> clock;
    std::vector<double> mean;
    std::vector<double> sem;
};

Band band_of(std::span<const MomentSeries> replicas,
             const std::function<double(const MomentSeries&, std::size_t)>& column);
Band moment_band(std::span<const MomentSeries> replicas, MomentKey key);
Band aux_band(std::span<const MomentSeries> replicas, const std::string& name);

/// Area balance in the self-similar frame: the central difference of A = M_{1,0}
/// must lie in [A/3 + F, A/3] (F = recorded fusion term, <= 0) up to the
/// statistical tolerance.
DiagnosticReport check_area_budget(std::span<const MomentSeries> replicas, const FusionSpec& fusion,
                                   double gamma, double sigmas = 3.0);

/// D = M_{1,0} + M_{2,0} stays below 1/(12(1-gamma)) for the whole run when it starts below it.
DiagnosticReport check_D_invariant_region(std::span<const MomentSeries> replicas, double gamma,
                                          double sigmas = 3.0);

struct MomentCandidate {
    MomentKey key;
    double bound;
};

/// Forward invariance of the moment set: M_{0,1} stays at its initial value
/// within `volume_tol`, and each candidate bound, once met, is never exceeded
/// by more than the statistical tolerance. Running suprema are reported.
DiagnosticReport check_invariant_moment_set(std::span<const MomentSeries> replicas,
                                            KernelRegime regime,
                                            std::span<const MomentCandidate> candidates,
                                            double volume_tol = 0.01, double sigmas = 3.0);

struct RamificationThresholds {
    double min_shape_growth = 5.0;  // final/initial <a>/<v>^{2/3}
    double exponent = 1.0 / 3.0;
    double exponent_tol = 0.05;
    double fit_from = 0.0;  // window in self-similar time tau = xi log(1+t)
    double fit_to = 0.0;    // 0: end of run
};

/// Physical-frame ramification checks on <a>/<v>, <a>/<v>^{2/3} and the growth
/// exponent of the self-similar-frame area M_{1,0}(f) (1+t)^{xi/3} in tau.
DiagnosticReport check_ramification_ratios(std::span<const MomentSeries> replicas, double gamma,
                                           const RamificationThresholds& th);

/// Slope of log(y) against x by least squares over x in [from, to].
double fit_log_slope(std::span<const double> x, std::span<const double> y, double from, double to);

/// Plateau check: fits y against x over [from, to] and compares the fitted change
/// across the window with the window mean.
DiagnosticRecord check_plateau(const std::string& name, std::span<const double> x,
                               std::span<const double> y, double from, double to, double rel_tol);

/// (x + y)^n / (2^{n-1} (x^n + y^n)); at most 1 by convexity.
double binomial_merge_ratio(double x, double y, double n);

/// Smallest lambda with (4/3) a <= lambda a^{mu+1} + eps a^2 for all a > 0 (mu < 0).
double young_constant(double eps, double mu);

/// Fusion prefactor 2 lambda_eps sufficient for the fast-fusion area estimate.
double heuristic_fusion_prefactor(double eps, double mu);

}  // namespace coag2d
