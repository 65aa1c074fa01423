// Heavy-tail statistics: log-binned PDFs, power-law tail fits (log-log
// regression and Hill), autocorrelation, and the exponent-relation check.
//
// Conventions, pinned once here:
//   * PDF tail fits report xi with P(x) ~ x^-(1+xi), i.e. xi = -slope - 1
//     of the log10-density vs log10-x regression line. ACF decay fits
//     report lambda = -slope directly (C(tau) ~ tau^-lambda).
//   * autocorrelation() uses the biased estimator: subtract the global
//     mean, divide the lagged sum by the lag-0 sum. This is the variant
//     that guarantees C(0) = 1 exactly and |C(tau)| <= 1.
//
// Error style: std::domain_error for bad values inside the data,
// std::invalid_argument for misused parameters, std::runtime_error for
// data-dependent failures (too few samples, degenerate tails, ...).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace volherd {

struct Histogram {
    std::vector<double> bin_edges;  // bins+1 ascending positive edges
    std::vector<double> densities;  // per bin; integrates to 1
    std::vector<uint64_t> counts;   // raw per-bin counts
    uint64_t sample_count = 0;
    int bins_per_decade = 20;

    size_t bin_count() const { return densities.size(); }
};

enum class FitMethod : uint8_t { LogLogLeastSquares = 0, Hill = 1 };

struct PowerLawFit {
    double exponent = 0.0;   // xi (PDF convention) or lambda (ACF fits)
    double intercept = 0.0;  // log10 intercept of the line; 0 for Hill
    double fit_lo = 0.0;     // fitted range in data units
    double fit_hi = 0.0;
    double std_error = 0.0;  // slope stderr, or xi/sqrt(k) for Hill
    double r_squared = 0.0;  // 0 for Hill (not applicable)
    FitMethod method = FitMethod::LogLogLeastSquares;
    uint32_t n_points = 0;   // bins or tail points used
};

struct AcfResult {
    std::vector<double> values;  // C(tau) for tau = 0..max_lag (index = lag)
    uint64_t series_length = 0;

    uint32_t max_lag() const {
        return static_cast<uint32_t>(values.size() - 1);
    }
};

struct AcfDecayFit {
    PowerLawFit fit;                  // exponent = lambda
    double excluded_fraction = 0.0;   // lags in range with C(tau) <= 0
    double curvature_delta = 0.0;     // |lambda(first half) - lambda(second)|
    bool curvature_flag = false;      // fires when the delta exceeds 0.25
};

struct HillDiagnostic {
    double xi_half = 0.0;    // estimate at tail_fraction / 2
    double xi_base = 0.0;    // estimate at tail_fraction
    double xi_double = 0.0;  // estimate at min(2 * tail_fraction, 0.5)
    // Max pairwise |xi_a - xi_b| in units of the pair's combined stderr;
    // a true power law sits well under 4, lighter tails blow through it.
    double max_drift = 0.0;
    bool stable = false;  // max_drift <= 4
};

struct RelationReport {
    double xi_V = 0.0;
    double xi_N = 0.0;
    double xi_r = 0.0;
    double dev_N_2V = 0.0;  // |xi_N - 2 xi_V|
    double dev_r_N = 0.0;   // |xi_r - xi_N|
    double tolerance = 0.0;
    bool pass = false;
};

// Log-binned empirical PDF. Bin edges sit at powers 10^(k/bins_per_decade);
// densities are count / (n * bin_width) so the histogram integrates to 1.
// Needs >= 100 strictly positive samples.
Histogram log_binned_pdf(std::span<const double> samples,
                         int bins_per_decade = 20);

// Least-squares line through (log10 center, log10 density) over occupied
// bins whose geometric center lies in [fit_lo, fit_hi]; needs >= 5 such
// bins. Reported exponent is xi = -slope - 1 (PDF tail convention).
PowerLawFit fit_power_law_tail(const Histogram& hist, double fit_lo,
                               double fit_hi);

// Automatic scaling-window search over occupied bins. A window qualifies
// when it spans >= min_decades with >= 5 bins, decays at least as fast as
// 1/x, fits a line with r^2 >= min_r2, and its two halves agree on the
// slope within 0.25 (straight globally AND locally -- r^2 alone cannot
// tell one power law from two glued regimes). Of the qualifying windows
// the steepest wins: the scaling regime decays faster than the
// small-scale crossover structure below it and the sparse far-tail noise
// above it. Returns the data-unit range to feed fit_power_law_tail, or
// nullopt when no window qualifies (this is what "no power-law regime"
// looks like).
std::optional<std::pair<double, double>> select_power_law_range(
    const Histogram& hist, double min_decades = 2.0, double min_r2 = 0.98);

// Hill maximum-likelihood tail-index estimate from the top tail_fraction
// order statistics; stderr = xi / sqrt(k). Needs >= 1000 samples and
// tail_fraction in (0, 0.5]. Degenerate tails (all equal) throw.
PowerLawFit hill_tail_exponent(std::span<const double> samples,
                               double tail_fraction);

// Hill estimates at {tail_fraction/2, tail_fraction, 2*tail_fraction}: a
// genuine power law plateaus, anything lighter-tailed drifts.
HillDiagnostic hill_plateau_diagnostic(std::span<const double> samples,
                                       double tail_fraction);

// Normalized autocorrelation for lags 0..max_lag (biased estimator, see
// header comment). Needs series length >= 10 * max_lag and > max_lag,
// and nonzero variance.
AcfResult autocorrelation(std::span<const double> series, uint32_t max_lag);

// Log-log line over lags in [lag_lo, lag_hi] with C(tau) > 0; lambda =
// -slope. Throws when more than half of the lags in range are excluded.
// The curvature diagnostic refits both halves of the point list.
AcfDecayFit fit_acf_decay(const AcfResult& acf, uint32_t lag_lo,
                          uint32_t lag_hi);

// Checks the xi_r ~= xi_N ~= 2 xi_V relation against a tolerance.
RelationReport exponent_relation_report(double xi_V, double xi_N, double xi_r,
                                        double tolerance);

}  // namespace volherd
