#include "coag2d/kernels.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "coag2d/errors.hpp"

namespace coag2d {

namespace {

void require_positive(double x, const char* what) {
    if (!std::isfinite(x) || x <= 0.0) {
        throw DomainError(std::string(what) + " must be positive and finite, got " +
                          std::to_string(x));
    }
}

}  // namespace

double sphere_area(double v) {
    const double c = std::cbrt(v);
    return kC0 * c * c;
}

bool in_region(double a, double v) { return a >= sphere_area(v); }

KernelSpec KernelSpec::power_law(double K0, double alpha, double beta, double theta) {
    require_positive(K0, "K0");
    if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(theta)) {
        throw DomainError("kernel exponents must be finite");
    }
    if (theta < 0.0 || theta >= 1.0) {
        throw DomainError("area modulation theta must lie in [0,1)");
    }
    KernelSpec k;
    k.K0_ = K0;
    k.K1_ = 0.5 * K0;
    k.alpha_ = alpha;
    k.beta_ = beta;
    k.theta_ = theta;
    const double gamma = beta - alpha;
    if (alpha > 0.0) {
        if (!(beta > 0.0 && beta < 1.0) || !(gamma >= 0.0 && gamma < 1.0)) {
            throw DomainError("alpha > 0 requires beta in (0,1) and gamma = beta - alpha in [0,1)");
        }
        k.regime_ = KernelRegime::AlphaPositive;
    } else if (alpha == 0.0) {
        if (!(beta > 0.0 && beta < 2.0 / 3.0)) {
            throw DomainError("alpha = 0 requires gamma = beta in (0, 2/3)");
        }
        k.regime_ = KernelRegime::AlphaZero;
    } else {
        throw DomainError("alpha must be non-negative");
    }
    return k;
}

KernelSpec KernelSpec::constant_oracle(double K0) {
    require_positive(K0, "K0");
    KernelSpec k;
    k.K0_ = K0;
    k.K1_ = 0.5 * K0;
    k.regime_ = KernelRegime::ConstantOracle;
    return k;
}

double KernelSpec::volume_sum(double v, double v2) const {
    if (is_oracle()) return 2.0;
    return inv_factor(v) * fwd_factor(v2) + inv_factor(v2) * fwd_factor(v);
}

double KernelSpec::shape_map(double a, double v) {
    const double x = a / sphere_area(v);
    return x > 1.0 ? 1.0 - 1.0 / x : 0.0;
}

double KernelSpec::tight_prefactor() const {
    if (is_oracle()) return 0.5 * K0_;
    return 0.5 * K0_ * (1.0 + theta_);
}

FusionSpec::FusionSpec(double R, double mu, double gamma, bool steep)
    : R_(R), mu_(mu), sigma_(gamma - 1.0 - 2.0 / 3.0 * mu), gamma_(gamma), steep_(steep) {
    if (!std::isfinite(R) || R < 0.0) throw DomainError("fusion prefactor R must be >= 0");
    if (!std::isfinite(mu)) throw DomainError("fusion exponent mu must be finite");
    if (!std::isfinite(gamma) || gamma < 0.0 || gamma >= 1.0) {
        throw DomainError("gamma must lie in [0,1)");
    }
    if (mu < -1.0 && !steep) {
        throw DomainError("fusion exponent mu must be >= -1 (use the steep flag for the heuristic form)");
    }
}

TruncationParams TruncationParams::make(double eps, double bigR, double delta,
                                        const FusionSpec& fusion) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0,1)");
    if (!(bigR > 1.0) || !std::isfinite(bigR)) throw DomainError("bigR must be > 1");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0,1)");
    const double L = fusion.enabled() ? 12.0 / (fusion.R() * (1.0 - fusion.gamma()))
                                      : std::numeric_limits<double>::infinity();
    return {eps, bigR, delta, L};
}

double eval_coag_kernel(const KernelSpec& spec, double a, double v, double a2, double v2) {
    require_positive(a, "a");
    require_positive(v, "v");
    require_positive(a2, "a2");
    require_positive(v2, "v2");
    if (spec.is_oracle()) return spec.K0();
    const double base = 0.5 * spec.K0() * spec.volume_sum(v, v2);
    if (spec.theta() == 0.0) return base;
    return base * (1.0 + spec.theta() * (KernelSpec::shape_map(a, v) * KernelSpec::shape_map(a2, v2)));
}

double eval_fusion(const FusionSpec& spec, double a, double v) {
    require_positive(a, "a");
    require_positive(v, "v");
    return spec.rate(a, v);
}

double kernel_cap(const KernelSpec& spec, const TruncationParams& trunc) {
    return std::pow(2.0, 1.0 + spec.beta()) * spec.K0() * std::pow(trunc.eps, -spec.alpha()) *
           std::pow(trunc.bigR, spec.beta());
}

double truncated_kernel(const KernelSpec& spec, const TruncationParams& trunc, double a,
                        double v, double a2, double v2) {
    const double k = eval_coag_kernel(spec, a, v, a2, v2);
    const double cut = xi_R(trunc, v + v2);
    if (cut == 0.0) return 0.0;
    return std::min(k, kernel_cap(spec, trunc)) * cut;
}

double fusion_delta(const FusionSpec& spec, const TruncationParams& trunc, double a, double v) {
    require_positive(a, "a");
    require_positive(v, "v");
    if (!spec.enabled()) return 0.0;
    // r max(v^s, L d) / v^s with r = R a^mu v^s.
    const double a_mu = power(a, spec.mu());
    const double floor = std::max(power(v, spec.sigma()), trunc.L * trunc.delta);
    return spec.R() * a_mu * floor / (1.0 + trunc.delta * a_mu);
}

double theta_eps(const TruncationParams& trunc, double v) {
    if (v <= trunc.eps) return 0.0;
    if (v > 2.0 * trunc.eps) return 1.0;
    const double x = (v - trunc.eps) / trunc.eps;
    return x * x * (3.0 - 2.0 * x);
}

double xi_R(const TruncationParams& trunc, double v) {
    if (v <= trunc.bigR) return 1.0;
    if (v >= 2.0 * trunc.bigR) return 0.0;
    return (2.0 * trunc.bigR - v) / trunc.bigR;
}

}  // namespace coag2d
