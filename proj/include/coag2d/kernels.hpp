#pragma once

// Coagulation kernel, fusion rate, and their truncated variants.
//
// A particle is a point (a, v): surface area and volume. Admissible shapes satisfy
// the isoperimetric inequality a >= c0 v^{2/3}. Under the shape-preserving scaling
// (a, v) -> (lambda^{2/3} a, lambda v) the kernel has degree gamma and the fusion
// rate has degree gamma - 1.

#include <cmath>
#include <numbers>

namespace coag2d {

/// c0 = (36 pi)^{1/3}: a sphere of volume v has area c0 v^{2/3}.
inline const double kC0 = std::cbrt(36.0 * std::numbers::pi);

/// Area of the sphere with volume v. Defined out of line so every caller gets
/// the same rounding.
double sphere_area(double v);

bool in_region(double a, double v);

/// x^p with exact fast paths for the exponents the presets use.
inline double power(double x, double p) {
    if (p == 0.0) return 1.0;
    if (p == 1.0) return x;
    if (p == -1.0) return 1.0 / x;
    if (p == 0.5) return std::sqrt(x);
    if (p == -0.5) return 1.0 / std::sqrt(x);
    if (p == 2.0) return x * x;
    return std::pow(x, p);
}

enum class KernelRegime {
    AlphaPositive,   // alpha > 0, beta in (0,1), gamma = beta - alpha in [0,1)
    AlphaZero,       // alpha = 0, gamma = beta in (0, 2/3)
    ConstantOracle,  // K == K0; outside both regimes, for closed-form comparisons only
};

/// Coagulation kernel
///   K = (K0/2) (v^{-alpha} v2^{beta} + v2^{-alpha} v^{beta}) (1 + theta s(x) s(x2)),
/// where x = a / (c0 v^{2/3}) is the shape ratio and s(x) = 1 - 1/x on x >= 1.
/// The modulation has degree 0, so K keeps degree gamma, and with theta < 1 the
/// two-sided bound holds with K1 = K0/2.
class KernelSpec {
public:
    static KernelSpec power_law(double K0, double alpha, double beta, double theta = 0.0);
    /// Constant kernel K == K0. Violates beta > 0; flagged by regime().
    static KernelSpec constant_oracle(double K0);

    double K0() const { return K0_; }
    double K1() const { return K1_; }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    double gamma() const { return beta_ - alpha_; }
    double theta() const { return theta_; }
    KernelRegime regime() const { return regime_; }
    bool is_oracle() const { return regime_ == KernelRegime::ConstantOracle; }

    double inv_factor(double v) const { return power(v, -alpha_); }
    double fwd_factor(double v) const { return power(v, beta_); }

    /// v^{-alpha} v2^{beta} + v2^{-alpha} v^{beta}; equals 2 for the oracle.
    double volume_sum(double v, double v2) const;

    /// Shape-ratio map into [0,1).
    static double shape_map(double a, double v);

    /// Largest c with K <= c * volume_sum; (K0/2)(1 + theta), or K0/2 for the oracle.
    double tight_prefactor() const;

private:
    KernelSpec() = default;

    double K0_ = 1.0;
    double K1_ = 0.5;
    double alpha_ = 0.0;
    double beta_ = 0.0;
    double theta_ = 0.0;
    KernelRegime regime_ = KernelRegime::ConstantOracle;
};

/// Fusion rate r(a, v) = R a^{mu} v^{sigma} with sigma = gamma - 1 - (2/3) mu.
/// R = 0 disables fusion. mu >= -1 unless `steep` is set, which is reserved for
/// the fast-fusion heuristic r = R a^{3(gamma-1)/2}.
class FusionSpec {
public:
    FusionSpec(double R, double mu, double gamma, bool steep = false);

    static FusionSpec disabled(double gamma) { return FusionSpec(0.0, 0.0, gamma); }

    double R() const { return R_; }
    double mu() const { return mu_; }
    double sigma() const { return sigma_; }
    double gamma() const { return gamma_; }
    bool enabled() const { return R_ > 0.0; }
    bool steep() const { return steep_; }

    double rate(double a, double v) const { return R_ * power(a, mu_) * power(v, sigma_); }
    /// Analytic partial derivative of rate() in a.
    double rate_da(double a, double v) const { return mu_ / a * rate(a, v); }

private:
    double R_;
    double mu_;
    double sigma_;
    double gamma_;
    bool steep_;
};

/// Regularisation parameters: volume floor eps, volume ceiling bigR, fusion
/// mollifier delta, and the derived constant L = 12 / (R0 (1 - gamma)).
struct TruncationParams {
    double eps;
    double bigR;
    double delta;
    double L;

    /// Builds the parameters and derives L from the fusion prefactor (L = inf when R0 = 0).
    static TruncationParams make(double eps, double bigR, double delta, const FusionSpec& fusion);
};

double eval_coag_kernel(const KernelSpec& spec, double a, double v, double a2, double v2);
double eval_fusion(const FusionSpec& spec, double a, double v);

/// min(K, 2^{1+beta} K0 eps^{-alpha} bigR^{beta}) * xi_R(v + v2).
double truncated_kernel(const KernelSpec& spec, const TruncationParams& trunc, double a,
                        double v, double a2, double v2);
double kernel_cap(const KernelSpec& spec, const TruncationParams& trunc);

/// r_delta = r max(v^sigma, L delta) / (v^sigma (1 + delta a^mu)).
double fusion_delta(const FusionSpec& spec, const TruncationParams& trunc, double a, double v);

/// 0 on (0, eps], 1 on (2 eps, inf), cubic smoothstep between.
double theta_eps(const TruncationParams& trunc, double v);
/// 1 on (0, bigR], 0 on [2 bigR, inf), linear between.
double xi_R(const TruncationParams& trunc, double v);

}  // namespace coag2d
