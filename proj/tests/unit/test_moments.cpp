#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <random>

#include "coag2d/errors.hpp"
#include "coag2d/moments.hpp"
#include "coag2d/state.hpp"
#include "sampling.hpp"

using namespace coag2d;
using coag2d::testing::log_uniform;
using coag2d::testing::region_point;

namespace {

/// Self-similar-frame style series with A(tau), D parts and a fusion column.
MomentSeries budget_series(const std::function<double(double)>& area,
                           const std::function<double(double)>& fusion, double dt = 0.05, int n = 60) {
    MomentSeries s({{0, 1}, {1, 0}, {2, 0}}, {"fusion_term"});
    for (int i = 0; i <= n; ++i) {
        const double t = dt * i;
        s.append({t, {1.0, area(t), 0.0}, {fusion(t)}});
    }
    return s;
}

}  // namespace

TEST_CASE("constant-kernel oracle") {
    CHECK(oracle_constant_kernel_count(3.0, 0.0) == 3.0);
    CHECK(oracle_constant_kernel_count(1.0, 2.0) == 0.5);
    double prev = 2.0;
    for (double t = 0.5; t < 1e6; t *= 2) {
        const double n = oracle_constant_kernel_count(2.0, t);
        CHECK(n < prev);
        prev = n;
    }
    CHECK(prev < 1e-5);
    // Independent route: integrate n' = -n^2 / 2 with classical RK4.
    double n = 1.7;
    const double h = 1e-3;
    for (int i = 0; i < 2000; ++i) {
        auto f = [](double x) { return -0.5 * x * x; };
        const double k1 = f(n);
        const double k2 = f(n + 0.5 * h * k1);
        const double k3 = f(n + 0.5 * h * k2);
        const double k4 = f(n + h * k3);
        n += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    CHECK(n == doctest::Approx(oracle_constant_kernel_count(1.7, 2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(oracle_constant_kernel_count(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(oracle_constant_kernel_count(1.0, -1.0), DomainError);
}

TEST_CASE("area budget") {
    const FusionSpec f(1.0, 1.0, 0.0);
    SUBCASE("pure growth at rate 1/3 passes with or without fusion") {
        const auto s = budget_series([](double t) { return 2.0 * std::exp(t / 3.0); }, [](double) { return 0.0; });
        const std::vector<MomentSeries> reps = {s};
        CHECK(check_area_budget(reps, f, 0.0).passed());
        CHECK(check_area_budget(reps, FusionSpec::disabled(0.0), 0.0).passed());
    }
    SUBCASE("growth faster than 1/3 fails") {
        const auto s = budget_series([](double t) { return 2.0 * std::exp(0.4 * t); }, [](double) { return 0.0; });
        const std::vector<MomentSeries> reps = {s};
        const auto rep = check_area_budget(reps, f, 0.0);
        CHECK_FALSE(rep.passed());
        CHECK(rep.find("area_budget")->observed[0] > 0.0);
    }
    SUBCASE("dissipation within the recorded fusion term passes, beyond it fails") {
        // A' = A/3 - A/2 = -A/6 with F = -A: inside [A/3 + F, A/3].
        const auto ok = budget_series([](double t) { return std::exp(-t / 6.0); },
                                      [](double t) { return -std::exp(-t / 6.0); });
        const std::vector<MomentSeries> r1 = {ok};
        CHECK(check_area_budget(r1, f, 0.0).passed());
        // A' = -A with F = -A/2: below A/3 + F.
        const auto bad = budget_series([](double t) { return std::exp(-t); },
                                       [](double t) { return -0.5 * std::exp(-t); });
        const std::vector<MomentSeries> r2 = {bad};
        CHECK_FALSE(check_area_budget(r2, f, 0.0).passed());
    }
    SUBCASE("missing columns") {
        MomentSeries s({{1, 0}}, {});
        for (int i = 0; i < 4; ++i) s.append({double(i), {1.0}, {}});
        const std::vector<MomentSeries> reps = {s};
        CHECK_THROWS_AS(check_area_budget(reps, f, 0.0), ConfigError);
    }
}

TEST_CASE("D invariant region") {
    auto series = [](double d0, double rate) {
        MomentSeries s({{1, 0}, {2, 0}}, {});
        for (int i = 0; i <= 50; ++i) {
            const double t = 0.1 * i;
            const double d = d0 * std::exp(rate * t);
            s.append({t, {0.25 * d, 0.75 * d}, {}});
        }
        return s;
    };
    const double thr = 1.0 / 12.0;
    CHECK(thr == doctest::Approx(0.08333333333).epsilon(1e-10));
    {
        const std::vector<MomentSeries> reps = {series(thr / 2, -0.1)};
        const auto rep = check_D_invariant_region(reps, 0.0);
        CHECK(rep.records[0].status == CheckStatus::Pass);
        CHECK(rep.records[0].bound == doctest::Approx(thr));
    }
    {
        const std::vector<MomentSeries> reps = {series(thr / 2, 0.2)};
        CHECK(check_D_invariant_region(reps, 0.0).records[0].status == CheckStatus::Fail);
    }
    {
        const std::vector<MomentSeries> reps = {series(2 * thr, -0.1)};
        const auto rep = check_D_invariant_region(reps, 0.0);
        CHECK(rep.records[0].status == CheckStatus::HypothesisUnmet);
        CHECK(rep.passed());
    }
    {
        const std::vector<MomentSeries> reps = {series(0.9 / 12.0 / 0.75, 0.0)};
        CHECK(check_D_invariant_region(reps, 0.25).records[0].status == CheckStatus::Pass);
    }
}

TEST_CASE("invariant moment set") {
    MomentSeries s({{0, 1}, {1, 0}}, {});
    for (int i = 0; i <= 20; ++i) {
        const double t = 0.5 * i;
        s.append({t, {1.0 + 1e-4 * std::sin(t), 5.0 + 3.0 * std::exp(-t) + (t > 8 ? 2.0 : 0.0)}, {}});
    }
    const std::vector<MomentSeries> reps = {s};
    const std::vector<MomentCandidate> cands = {{{1, 0}, 100.0}, {{1, 0}, 1.0}, {{1, 0}, 6.0}};
    const auto rep = check_invariant_moment_set(reps, KernelRegime::AlphaPositive, cands);
    REQUIRE(rep.records.size() == 4);
    CHECK(rep.records[0].name == "volume_normalised");
    CHECK(rep.records[0].status == CheckStatus::Pass);
    CHECK(rep.records[1].status == CheckStatus::Pass);
    CHECK(rep.records[2].status == CheckStatus::HypothesisUnmet);
    CHECK(rep.records[3].status == CheckStatus::Fail);  // re-exceeds 6 after t = 8
    CHECK(rep.records[1].observed[0] == doctest::Approx(8.0));
    CHECK_THROWS_AS(check_invariant_moment_set(reps, KernelRegime::ConstantOracle, cands), ConfigError);

    MomentSeries drift({{0, 1}}, {});
    for (int i = 0; i <= 10; ++i) drift.append({double(i), {1.0 + 0.01 * i}, {}});
    const std::vector<MomentSeries> r2 = {drift};
    CHECK_FALSE(check_invariant_moment_set(r2, KernelRegime::AlphaZero, {}).passed());
}

TEST_CASE("ramification ratios on synthetic series") {
    // gamma = 1/4: with M_{1,0}(f) constant the self-similar area grows as e^{tau/3}.
    const double gamma = 0.25;
    auto make = [](double area_decay, double av23_growth) {
        MomentSeries s({{0, 1}, {1, 0}}, {"ratio_av", "ratio_av23"});
        for (int i = 0; i <= 40; ++i) {
            const double t = std::expm1(0.1 * i);
            const double area = 100.0 * std::pow(1.0 + t, -area_decay);
            s.append({t, {1.0, area}, {area, std::pow(1.0 + t, av23_growth)}});
        }
        return s;
    };
    RamificationThresholds th;
    th.fit_from = 1.0;
    {
        const std::vector<MomentSeries> reps = {make(0.0, 0.5)};
        const auto rep = check_ramification_ratios(reps, gamma, th);
        CHECK(rep.passed());
        CHECK(rep.find("selfsim_area_exponent")->observed[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
        CHECK(rep.find("ratio_av_upper_bound")->observed[1] == doctest::Approx(100.0));
    }
    {
        // M_{1,0}(f) ~ (1+t)^{-1/2}: the self-similar area exponent is 1/3 - (1/2)(1 - gamma).
        const std::vector<MomentSeries> reps = {make(0.5, 0.5)};
        const auto rep = check_ramification_ratios(reps, gamma, th);
        CHECK(rep.find("selfsim_area_exponent")->observed[0] ==
              doctest::Approx(1.0 / 3.0 - 0.5 * (1 - gamma)).epsilon(1e-10));
        CHECK(rep.find("selfsim_area_exponent")->status == CheckStatus::Fail);
    }
    {
        const std::vector<MomentSeries> reps = {make(-0.1, 0.1)};
        const auto rep = check_ramification_ratios(reps, gamma, th);
        CHECK(rep.find("ratio_av_upper_bound")->status == CheckStatus::Fail);
        CHECK(rep.find("shape_ratio_growth")->status == CheckStatus::Fail);
    }
}

TEST_CASE("log-slope fit and plateau check") {
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(0.25 * i);
        y.push_back(3.0 * std::exp(0.7 * 0.25 * i));
    }
    CHECK(fit_log_slope(x, y, 1.0, 4.0) == doctest::Approx(0.7).epsilon(1e-12));
    std::vector<double> flat(x.size(), 2.0);
    const auto ok = check_plateau("p", x, flat, 1.0, 4.0, 0.1);
    CHECK(ok.status == CheckStatus::Pass);
    CHECK(ok.observed[0] == doctest::Approx(0.0));
    std::vector<double> ramp;
    for (double xi : x) ramp.push_back(1.0 + 0.2 * xi);
    const auto bad = check_plateau("p", x, ramp, 1.0, 4.0, 0.1);
    CHECK(bad.status == CheckStatus::Fail);
    CHECK(bad.observed[0] == doctest::Approx(0.6 / 1.5).epsilon(1e-10));
    std::vector<double> neg = y;
    neg[5] = -1.0;
    CHECK_THROWS_AS(fit_log_slope(x, neg, 0.0, 5.0), DomainError);
}

TEST_CASE("binomial clamp on sampled merges") {
    std::mt19937_64 rng(19);
    for (int k = 0; k < 10000; ++k) {
        const auto p = region_point(rng);
        const auto q = region_point(rng);
        for (double n : {2.0, 3.0}) {
            CHECK(binomial_merge_ratio(p.a, q.a, n) <= 1.0 + 1e-12);
            const Particle m = merge({p.a, p.v, 1.0}, {q.a, q.v, 1.0});
            CHECK(std::pow(m.a, n) <= std::pow(2.0, n - 1.0) * (std::pow(p.a, n) + std::pow(q.a, n)) * (1 + 1e-12));
        }
    }
    CHECK(binomial_merge_ratio(2.0, 2.0, 3.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(binomial_merge_ratio(1.0, 1.0, 0.5), DomainError);
}

TEST_CASE("Young constant against brute force") {
    for (auto [eps, mu] : {std::pair{1.0 / 6.0, -1.5}, std::pair{0.1, -0.5}, std::pair{0.5, -1.0}}) {
        // sup over a of a^{-mu} (4/3 - eps a), on a fine log grid.
        double best = 0.0;
        for (int i = 0; i <= 2000000; ++i) {
            const double a = std::exp(-10.0 + 20.0 * i / 2000000.0);
            best = std::max(best, std::pow(a, -mu) * (4.0 / 3.0 - eps * a));
        }
        CHECK(young_constant(eps, mu) == doctest::Approx(best).epsilon(1e-8));
        const double lam = young_constant(eps, mu);
        for (int i = 0; i < 1000; ++i) {
            const double a = std::exp(-8.0 + 16.0 * i / 1000.0);
            CHECK(4.0 / 3.0 * a <= (lam * std::pow(a, mu + 1.0) + eps * a * a) * (1 + 1e-12));
        }
    }
    CHECK(heuristic_fusion_prefactor(1.0 / 6.0, -1.5) == doctest::Approx(2.0 * std::pow(4.8, 1.5) * (4.0 / 3.0 - 0.8)).epsilon(1e-12));
    CHECK_THROWS_AS(young_constant(0.1, 0.5), DomainError);
}

TEST_CASE("report serialisation") {
    DiagnosticReport rep;
    rep.add({"a", 0.0, 1.0, {1.0, 2.0}, 3.0, CheckStatus::Pass, 0.5, "note"});
    rep.add({"b", 0.0, 1.0, {std::nan("")}, 3.0, CheckStatus::Info, 0.0, ""});
    CHECK(rep.passed());
    const auto j = nlohmann::json::parse(rep.to_json());
    CHECK(j["passed"] == true);
    CHECK(j["checks"].size() == 2);
    CHECK(j["checks"][0]["observed"][1] == 2.0);
    CHECK(j["checks"][1]["observed"][0] == "nan");
    CHECK(rep.table().find("pass") != std::string::npos);
    rep.add({"c", 0.0, 1.0, {}, 0.0, CheckStatus::Fail, -1.0, ""});
    CHECK_FALSE(rep.passed());
    CHECK(rep.find("c") != nullptr);
    CHECK(rep.find("zzz") == nullptr);
    CHECK(to_string(CheckStatus::HypothesisUnmet) == "hypothesis unmet");
}

TEST_CASE("bands over replicas") {
    MomentSeries a({{0, 0}}, {"x"});
    MomentSeries b({{0, 0}}, {"x"});
    for (int i = 0; i < 3; ++i) {
        a.append({double(i), {1.0 + i}, {10.0}});
        b.append({double(i), {3.0 + i}, {20.0}});
    }
    const std::vector<MomentSeries> reps = {a, b};
    const auto m = moment_band(reps, {0, 0});
    CHECK(m.mean[1] == 3.0);
    CHECK(m.sem[1] == doctest::Approx(1.0));
    const auto x = aux_band(reps, "x");
    CHECK(x.mean[2] == 15.0);
    MomentSeries c({{0, 0}}, {"x"});
    c.append({0.0, {1.0}, {1.0}});
    const std::vector<MomentSeries> bad = {a, c};
    CHECK_THROWS_AS(moment_band(bad, {0, 0}), ConfigError);
}
