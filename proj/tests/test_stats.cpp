#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "volherd/rng.hpp"
#include "volherd/stats.hpp"

using namespace volherd;

namespace {

// Pareto with P(X > x) = x^-xi for x >= 1, via inverse CDF.
std::vector<double> pareto_samples(double xi, size_t n, uint64_t seed) {
    Xoshiro256pp rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = std::pow(1.0 - rng.next_double(), -1.0 / xi);
    return out;
}

// Histogram filled from an exact density formula instead of samples, to
// feed the fitting code a curve with zero sampling noise.
Histogram synthetic_histogram(double lo_exp10, double hi_exp10,
                              double (*density)(double)) {
    Histogram h;
    h.bins_per_decade = 20;
    const int bins = static_cast<int>((hi_exp10 - lo_exp10) * 20 + 0.5);
    for (int k = 0; k <= bins; ++k)
        h.bin_edges.push_back(std::pow(10.0, lo_exp10 + k / 20.0));
    for (int k = 0; k < bins; ++k) {
        const double cx = 0.5 * (std::log10(h.bin_edges[k]) +
                                 std::log10(h.bin_edges[k + 1]));
        h.densities.push_back(density(std::pow(10.0, cx)));
        h.counts.push_back(1000);
    }
    h.sample_count = 1000ULL * bins;
    return h;
}

}  // namespace

TEST_CASE("log_binned_pdf integrates to one and nails a uniform density") {
    Xoshiro256pp rng(3);
    std::vector<double> samples(1000000);
    for (auto& x : samples) x = 1.0 + 9.0 * rng.next_double();

    const Histogram h = log_binned_pdf(samples, 20);
    CHECK(h.sample_count == samples.size());

    double integral = 0.0;
    for (size_t k = 0; k < h.bin_count(); ++k)
        integral += h.densities[k] * (h.bin_edges[k + 1] - h.bin_edges[k]);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));

    // true density is 1/9 on [1, 10]; interior bins must sit within 3%
    for (size_t k = 0; k < h.bin_count(); ++k) {
        if (h.bin_edges[k] < 1.0 || h.bin_edges[k + 1] > 10.0) continue;
        if (h.counts[k] == 0) continue;
        CHECK(h.densities[k] == doctest::Approx(1.0 / 9.0).epsilon(0.03));
    }
}

TEST_CASE("log_binned_pdf edge cases") {
    // a point mass occupies one bin that carries all the density
    std::vector<double> point(500, 5.0);
    const Histogram h = log_binned_pdf(point, 20);
    int occupied = 0;
    double integral = 0.0;
    for (size_t k = 0; k < h.bin_count(); ++k) {
        if (h.counts[k] > 0) ++occupied;
        integral += h.densities[k] * (h.bin_edges[k + 1] - h.bin_edges[k]);
    }
    CHECK(occupied == 1);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> few(99, 2.0);
    CHECK_THROWS_AS(log_binned_pdf(few, 20), std::runtime_error);

    std::vector<double> bad(200, 1.0);
    bad[7] = 0.0;  // not strictly positive
    CHECK_THROWS_AS(log_binned_pdf(bad, 20), std::domain_error);

    std::vector<double> ok(200, 1.0);
    CHECK_THROWS_AS(log_binned_pdf(ok, 0), std::invalid_argument);
}

TEST_CASE("fit_power_law_tail recovers an exact synthetic exponent") {
    // density x^-2.5 exactly: slope -2.5, so xi = -slope - 1 = 1.5
    const Histogram h = synthetic_histogram(
        0.0, 4.0, [](double x) { return std::pow(x, -2.5); });
    const PowerLawFit fit = fit_power_law_tail(h, 1.0, 1e4);
    CHECK(fit.exponent == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.std_error < 1e-10);
    CHECK(fit.method == FitMethod::LogLogLeastSquares);
    CHECK(fit.n_points == h.bin_count());

    // restricting the range restricts the points
    const PowerLawFit part = fit_power_law_tail(h, 10.0, 1000.0);
    CHECK(part.exponent == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(part.n_points < fit.n_points);

    // fewer than 5 bins in range is an error
    CHECK_THROWS_AS(fit_power_law_tail(h, 1.0, 1.1), std::runtime_error);
}

TEST_CASE("power-law estimators recover Pareto tails within 0.05") {
    for (double xi : {0.8, 1.5, 3.0}) {
        CAPTURE(xi);
        const auto samples = pareto_samples(xi, 1000000, 20202 + (uint64_t)(xi * 10));

        const PowerLawFit hill = hill_tail_exponent(samples, 0.01);
        CHECK(hill.exponent == doctest::Approx(xi).epsilon(0.05 / xi));
        CHECK(hill.method == FitMethod::Hill);
        CHECK(hill.std_error == doctest::Approx(hill.exponent / 100.0));

        // regression estimator over a well-populated fixed range
        const Histogram h = log_binned_pdf(samples, 20);
        const double hi = std::pow(10.0, 2.0 / xi);
        const PowerLawFit reg = fit_power_law_tail(h, 1.0, hi);
        CHECK(std::fabs(reg.exponent - xi) < 0.05);

        // the two estimators agree within a couple of joint stderrs + bias room
        const double joint =
            std::sqrt(hill.std_error * hill.std_error +
                      reg.std_error * reg.std_error);
        CHECK(std::fabs(hill.exponent - reg.exponent) < 2.0 * joint + 0.02);
    }
}

TEST_CASE("hill estimator input checking") {
    std::vector<double> few(999, 2.0);
    CHECK_THROWS_AS(hill_tail_exponent(few, 0.01), std::runtime_error);
    const auto samples = pareto_samples(1.5, 2000, 9);
    CHECK_THROWS_AS(hill_tail_exponent(samples, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(hill_tail_exponent(samples, 0.6), std::invalid_argument);
    std::vector<double> flat(2000, 3.0);  // degenerate tail, log ratios all 0
    CHECK_THROWS_AS(hill_tail_exponent(flat, 0.01), std::runtime_error);
}

TEST_CASE("hill plateau diagnostic separates power laws from light tails") {
    const auto pareto = pareto_samples(1.5, 1000000, 88);
    const HillDiagnostic good = hill_plateau_diagnostic(pareto, 0.01);
    CHECK(good.stable);
    CHECK(good.max_drift < 4.0);

    // exponential data: Hill drifts hard with the cutoff
    Xoshiro256pp rng(89);
    std::vector<double> expo(1000000);
    for (auto& x : expo) x = 1.0 - std::log(1.0 - rng.next_double());
    const HillDiagnostic bad = hill_plateau_diagnostic(expo, 0.01);
    CHECK_FALSE(bad.stable);
    CHECK(bad.max_drift > 4.0);
}

TEST_CASE("autocorrelation matches the direct double-loop oracle") {
    Xoshiro256pp rng(5);
    const size_t n = 10000;
    std::vector<double> x(n);
    double prev = 0.0;
    for (auto& v : x) {  // mildly dependent series, nothing special
        v = rng.next_double() + 0.5 * prev;
        prev = v;
    }
    const uint32_t max_lag = 1000;
    const AcfResult acf = autocorrelation(x, max_lag);
    REQUIRE(acf.values.size() == max_lag + 1);
    CHECK(acf.series_length == n);
    CHECK(acf.values[0] == 1.0);

    // plain-loop oracle: subtract the global mean, normalize by
    // the lag-0 sum
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (double v : x) denom += (v - mean) * (v - mean);
    for (uint32_t tau : {1u, 2u, 10u, 100u, 999u, 1000u}) {
        double num = 0.0;
        for (size_t t = 0; t + tau < n; ++t)
            num += (x[t] - mean) * (x[t + tau] - mean);
        CHECK(std::fabs(acf.values[tau] - num / denom) < 1e-9);
    }
}

TEST_CASE("autocorrelation of white noise and AR(1)") {
    Xoshiro256pp rng(6);
    std::vector<double> iid(100000);
    for (auto& v : iid) v = rng.next_double();
    const AcfResult white = autocorrelation(iid, 10);
    for (uint32_t tau = 1; tau <= 10; ++tau)
        CHECK(std::fabs(white.values[tau]) < 0.02);

    // AR(1) with phi = 0.9: C(tau) = 0.9^tau
    std::vector<double> ar(1000000);
    double prev = 0.0;
    for (auto& v : ar) {
        v = 0.9 * prev + (rng.next_double() - 0.5);
        prev = v;
    }
    const AcfResult acf = autocorrelation(ar, 20);
    for (uint32_t tau = 1; tau <= 20; ++tau)
        CHECK(std::fabs(acf.values[tau] - std::pow(0.9, tau)) < 0.02);
}

TEST_CASE("autocorrelation input checking") {
    std::vector<double> shorty(99, 1.0);
    CHECK_THROWS_AS(autocorrelation(shorty, 10), std::invalid_argument);
    std::vector<double> constant(1000, 2.5);
    CHECK_THROWS_AS(autocorrelation(constant, 10), std::runtime_error);
}

TEST_CASE("fit_acf_decay recovers a clean power law") {
    AcfResult acf;
    acf.series_length = 100000;
    acf.values.push_back(1.0);
    for (uint32_t tau = 1; tau <= 2000; ++tau)
        acf.values.push_back(std::pow(static_cast<double>(tau), -0.3));

    const AcfDecayFit fit = fit_acf_decay(acf, 1, 1000);
    CHECK(fit.fit.exponent == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(fit.fit.r_squared == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.excluded_fraction == 0.0);
    CHECK_FALSE(fit.curvature_flag);
    CHECK(fit.curvature_delta < 1e-6);
}

TEST_CASE("fit_acf_decay flags exponential (curved) decay") {
    AcfResult acf;
    acf.series_length = 100000;
    acf.values.push_back(1.0);
    for (uint32_t tau = 1; tau <= 200; ++tau)
        acf.values.push_back(std::exp(-static_cast<double>(tau) / 10.0));

    const AcfDecayFit fit = fit_acf_decay(acf, 1, 100);
    // log-log slope of e^-tau/10 steepens with tau; the two halves disagree
    CHECK(fit.curvature_flag);
    CHECK(fit.curvature_delta > 0.25);
}

TEST_CASE("fit_acf_decay excludes non-positive values and gives up when "
          "they dominate") {
    AcfResult acf;
    acf.series_length = 100000;
    acf.values.push_back(1.0);
    for (uint32_t tau = 1; tau <= 100; ++tau) {
        double v = std::pow(static_cast<double>(tau), -0.5);
        if (tau % 5 == 0) v = -v;  // 20% exclusions
        acf.values.push_back(v);
    }
    const AcfDecayFit fit = fit_acf_decay(acf, 1, 100);
    CHECK(fit.excluded_fraction == doctest::Approx(0.2));
    CHECK(fit.fit.exponent == doctest::Approx(0.5).epsilon(1e-6));

    AcfResult dead;
    dead.series_length = 100000;
    dead.values.push_back(1.0);
    for (uint32_t tau = 1; tau <= 100; ++tau)
        dead.values.push_back(tau % 3 ? -0.01 : 0.01);  // 2/3 excluded
    CHECK_THROWS_AS(fit_acf_decay(dead, 1, 100), std::runtime_error);
}

TEST_CASE("window selector picks the steepest straight regime") {
    // two glued power laws: x^-2.5 up to ~316, then a shallower x^-1.3
    const Histogram two = synthetic_histogram(0.0, 6.0, [](double x) {
        const double knee = 316.22776601683796;  // 10^2.5
        if (x <= knee) return std::pow(x, -2.5);
        return std::pow(knee, -2.5 + 1.3) * std::pow(x, -1.3);
    });
    const auto win = select_power_law_range(two, 2.0, 0.98);
    REQUIRE(win.has_value());
    // the selected window must live inside the steep regime, not straddle
    CHECK(win->second <= 400.0);
    const PowerLawFit fit = fit_power_law_tail(two, win->first, win->second);
    CHECK(fit.exponent == doctest::Approx(1.5).epsilon(0.01));

    // one pure power law: the window covers (nearly) everything
    const Histogram one = synthetic_histogram(
        0.0, 6.0, [](double x) { return std::pow(x, -2.0); });
    const auto full = select_power_law_range(one, 2.0, 0.98);
    REQUIRE(full.has_value());
    CHECK(std::log10(full->second / full->first) > 5.5);
}

TEST_CASE("window selector refuses curved and rising histograms") {
    // exponential decay bends everywhere on log-log
    const Histogram curved = synthetic_histogram(
        0.0, 4.0, [](double x) { return std::exp(-x / 50.0); });
    CHECK_FALSE(select_power_law_range(curved, 2.0, 0.98).has_value());

    // straight but rising: never a decay regime
    const Histogram rising = synthetic_histogram(
        0.0, 4.0, [](double x) { return std::pow(x, 0.8); });
    CHECK_FALSE(select_power_law_range(rising, 2.0, 0.98).has_value());

    // straight but too shallow to be a tail (slope -0.4 > -1)
    const Histogram shallow = synthetic_histogram(
        0.0, 4.0, [](double x) { return std::pow(x, -0.4); });
    CHECK_FALSE(select_power_law_range(shallow, 2.0, 0.98).has_value());
}

TEST_CASE("exponent relation report") {
    const RelationReport ok = exponent_relation_report(1.0, 2.1, 1.9, 0.5);
    CHECK(ok.dev_N_2V == doctest::Approx(0.1));
    CHECK(ok.dev_r_N == doctest::Approx(0.2));
    CHECK(ok.pass);

    const RelationReport off = exponent_relation_report(0.5, 2.1, 1.9, 0.5);
    CHECK(off.dev_N_2V == doctest::Approx(1.1));
    CHECK_FALSE(off.pass);

    CHECK_THROWS_AS(exponent_relation_report(1.0, 2.0, 2.0, -0.1),
                    std::invalid_argument);
}
