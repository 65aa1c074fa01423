#include "volherd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "volherd/kernels.hpp"

namespace volherd {

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double std_error = 0.0;  // of the slope
    double r_squared = 1.0;
};

// Plain sequential OLS; inputs here are at most a few thousand points.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t m = x.size();
    double sx = 0.0, sy = 0.0;
    for (size_t i = 0; i < m; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / static_cast<double>(m);
    const double my = sy / static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ssr += e * e;
    }
    f.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    if (m > 2 && sxx > 0.0)
        f.std_error = std::sqrt(ssr / (static_cast<double>(m - 2) * sxx));
    return f;
}

double bin_center_log10(const Histogram& h, size_t j) {
    return 0.5 * (std::log10(h.bin_edges[j]) + std::log10(h.bin_edges[j + 1]));
}

}  // namespace

Histogram log_binned_pdf(std::span<const double> samples,
                         int bins_per_decade) {
    if (bins_per_decade <= 0)
        throw std::invalid_argument("bins_per_decade must be positive");
    if (samples.size() < 100)
        throw std::runtime_error("log_binned_pdf needs at least 100 samples");

    double lo = samples[0], hi = samples[0];
    for (const double x : samples) {
        if (!(x > 0.0))
            throw std::domain_error("log_binned_pdf sample must be positive");
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }

    const double bpd = static_cast<double>(bins_per_decade);
    const long k_lo =
        static_cast<long>(std::floor(bpd * std::log10(lo)));
    const long k_hi =
        static_cast<long>(std::floor(bpd * std::log10(hi)));
    const long bins_l = k_hi - k_lo + 1;
    if (bins_l > 10'000'000)
        throw std::runtime_error("log_binned_pdf sample range too wide");
    const size_t bins = static_cast<size_t>(bins_l);

    Histogram h;
    h.bins_per_decade = bins_per_decade;
    h.sample_count = samples.size();
    h.bin_edges.resize(bins + 1);
    for (size_t j = 0; j <= bins; ++j)
        h.bin_edges[j] =
            std::pow(10.0, static_cast<double>(k_lo + static_cast<long>(j)) / bpd);
    h.counts.assign(bins, 0);

    for (const double x : samples) {
        long idx = static_cast<long>(std::floor(bpd * std::log10(x))) - k_lo;
        idx = std::clamp(idx, 0L, bins_l - 1);
        // log10 rounding can misplace edge values by one bin; nudge back.
        if (x < h.bin_edges[static_cast<size_t>(idx)] && idx > 0)
            --idx;
        else if (x >= h.bin_edges[static_cast<size_t>(idx) + 1] &&
                 idx < bins_l - 1)
            ++idx;
        ++h.counts[static_cast<size_t>(idx)];
    }

    h.densities.resize(bins);
    const double n = static_cast<double>(h.sample_count);
    for (size_t j = 0; j < bins; ++j) {
        const double width = h.bin_edges[j + 1] - h.bin_edges[j];
        h.densities[j] = static_cast<double>(h.counts[j]) / (n * width);
    }
    return h;
}

PowerLawFit fit_power_law_tail(const Histogram& hist, double fit_lo,
                               double fit_hi) {
    if (!(fit_lo > 0.0) || !(fit_lo < fit_hi))
        throw std::invalid_argument("fit range must satisfy 0 < lo < hi");

    std::vector<double> xs, ys;
    double lo_edge = 0.0, hi_edge = 0.0;
    for (size_t j = 0; j < hist.bin_count(); ++j) {
        if (hist.counts[j] == 0) continue;
        const double cx = bin_center_log10(hist, j);
        const double center = std::pow(10.0, cx);
        if (center < fit_lo || center > fit_hi) continue;
        if (xs.empty()) lo_edge = hist.bin_edges[j];
        hi_edge = hist.bin_edges[j + 1];
        xs.push_back(cx);
        ys.push_back(std::log10(hist.densities[j]));
    }
    if (xs.size() < 5)
        throw std::runtime_error(
            "fit_power_law_tail needs at least 5 occupied bins in range");

    const LineFit line = fit_line(xs, ys);
    PowerLawFit fit;
    fit.exponent = -line.slope - 1.0;  // P(x) ~ x^-(1+xi)
    fit.intercept = line.intercept;
    fit.fit_lo = lo_edge;
    fit.fit_hi = hi_edge;
    fit.std_error = line.std_error;
    fit.r_squared = line.r_squared;
    fit.method = FitMethod::LogLogLeastSquares;
    fit.n_points = static_cast<uint32_t>(xs.size());
    return fit;
}

std::optional<std::pair<double, double>> select_power_law_range(
    const Histogram& hist, double min_decades, double min_r2) {
    // Occupied bins only; x in decades, y = log10 density.
    std::vector<double> xs, ys;
    std::vector<uint64_t> cnts;
    std::vector<size_t> bin_of;
    for (size_t j = 0; j < hist.bin_count(); ++j) {
        if (hist.counts[j] == 0) continue;
        xs.push_back(bin_center_log10(hist, j));
        ys.push_back(std::log10(hist.densities[j]));
        cnts.push_back(hist.counts[j]);
        bin_of.push_back(j);
    }
    const size_t m = xs.size();
    if (m < 5) return std::nullopt;

    // Prefix sums make each candidate window O(1).
    std::vector<double> px(m + 1, 0.0), py(m + 1, 0.0), pxx(m + 1, 0.0),
        pxy(m + 1, 0.0), pyy(m + 1, 0.0);
    std::vector<uint64_t> pc(m + 1, 0);
    for (size_t i = 0; i < m; ++i) {
        px[i + 1] = px[i] + xs[i];
        py[i + 1] = py[i] + ys[i];
        pxx[i + 1] = pxx[i] + xs[i] * xs[i];
        pxy[i + 1] = pxy[i] + xs[i] * ys[i];
        pyy[i + 1] = pyy[i] + ys[i] * ys[i];
        pc[i + 1] = pc[i] + cnts[i];
    }

    // O(1) window regression from the prefix sums over occupied bins
    // [i, j], half-open on the prefix arrays.
    auto window = [&](size_t i, size_t j, double& slope, double& se,
                      double& r2) {
        const double cnt = static_cast<double>(j - i + 1);
        const double sx = px[j + 1] - px[i];
        const double sy = py[j + 1] - py[i];
        const double sxx = (pxx[j + 1] - pxx[i]) - sx * sx / cnt;
        const double sxy = (pxy[j + 1] - pxy[i]) - sx * sy / cnt;
        const double syy = (pyy[j + 1] - pyy[i]) - sy * sy / cnt;
        slope = sxy / sxx;
        r2 = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
        const double ssr = std::max(syy - slope * sxy, 0.0);
        se = (cnt > 2.0 && sxx > 0.0)
                 ? std::sqrt(ssr / ((cnt - 2.0) * sxx))
                 : 0.0;
    };

    // A window qualifies when it decays like a normalizable tail
    // (slope <= -1), is straight globally (r^2) and locally (its two
    // halves agree on the slope within 0.25); global r^2 alone cannot
    // tell one power law from two glued regimes once the y-range is wide.
    // Among qualifying windows take the steepest: the scaling regime
    // decays faster than its neighbours -- shallower straight stretches
    // are small-scale crossover structure or sparse far-tail noise.
    // Ties go to the wider window, then the straighter one.
    bool found = false;
    double best_slope = 0.0, best_span = 0.0, best_r2 = 0.0;
    size_t best_i = 0, best_j = 0;
    for (size_t i = 0; i + 4 < m; ++i) {
        for (size_t j = i + 4; j < m; ++j) {
            const double span = xs[j] - xs[i];
            if (span < min_decades) continue;
            double slope, se, r2;
            window(i, j, slope, se, r2);
            if (slope > -1.0) continue;
            if (r2 < min_r2) continue;
            const size_t mid = i + (j - i) / 2;
            double s1, se1, r21, s2, se2, r22;
            window(i, mid, s1, se1, r21);
            window(mid + 1, j, s2, se2, r22);
            if (std::fabs(s1 - s2) > 0.25) continue;
            const bool better =
                !found || slope < best_slope - 1e-12 ||
                (slope < best_slope + 1e-12 &&
                 (span > best_span + 1e-12 ||
                  (span > best_span - 1e-12 && r2 > best_r2)));
            if (better) {
                found = true;
                best_slope = slope;
                best_span = span;
                best_r2 = r2;
                best_i = i;
                best_j = j;
            }
        }
    }
    if (!found) return std::nullopt;
    return std::make_pair(hist.bin_edges[bin_of[best_i]],
                          hist.bin_edges[bin_of[best_j] + 1]);
}

PowerLawFit hill_tail_exponent(std::span<const double> samples,
                               double tail_fraction) {
    if (!(tail_fraction > 0.0) || tail_fraction > 0.5)
        throw std::invalid_argument("tail_fraction must be in (0, 0.5]");
    if (samples.size() < 1000)
        throw std::runtime_error(
            "hill_tail_exponent needs at least 1000 samples");

    const size_t k = static_cast<size_t>(
        tail_fraction * static_cast<double>(samples.size()));
    if (k < 5) throw std::runtime_error("hill tail has fewer than 5 points");

    // Top k+1 order statistics, descending; x_(k+1) is the threshold.
    std::vector<double> top(k + 1);
    std::partial_sort_copy(samples.begin(), samples.end(), top.begin(),
                           top.end(), std::greater<double>());
    const double threshold = top[k];
    if (!(threshold > 0.0))
        throw std::runtime_error("hill tail must be strictly positive");

    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) acc += std::log(top[i] / threshold);
    const double xi_inv = acc / static_cast<double>(k);
    if (!(xi_inv > 0.0))
        throw std::runtime_error("hill tail is degenerate (no spread)");

    PowerLawFit fit;
    fit.exponent = 1.0 / xi_inv;
    fit.intercept = 0.0;
    fit.fit_lo = threshold;
    fit.fit_hi = top[0];
    fit.std_error = fit.exponent / std::sqrt(static_cast<double>(k));
    fit.r_squared = 0.0;  // not applicable
    fit.method = FitMethod::Hill;
    fit.n_points = static_cast<uint32_t>(k);
    return fit;
}

HillDiagnostic hill_plateau_diagnostic(std::span<const double> samples,
                                       double tail_fraction) {
    const PowerLawFit fits[3] = {
        hill_tail_exponent(samples, tail_fraction / 2.0),
        hill_tail_exponent(samples, tail_fraction),
        hill_tail_exponent(samples, std::min(2.0 * tail_fraction, 0.5)),
    };
    HillDiagnostic d;
    d.xi_half = fits[0].exponent;
    d.xi_base = fits[1].exponent;
    d.xi_double = fits[2].exponent;
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            const double gap = std::fabs(fits[a].exponent - fits[b].exponent);
            const double sig = fits[a].std_error + fits[b].std_error;
            d.max_drift = std::max(d.max_drift, gap / sig);
        }
    }
    d.stable = d.max_drift <= 4.0;
    return d;
}

AcfResult autocorrelation(std::span<const double> series, uint32_t max_lag) {
    const size_t n = series.size();
    if (max_lag < 1) throw std::invalid_argument("max_lag must be >= 1");
    if (n < 10ull * max_lag)
        throw std::invalid_argument(
            "autocorrelation needs series length >= 10 * max_lag");

    const double mean =
        kern::sum(series.data(), n) / static_cast<double>(n);
    std::vector<double> dev(n);
    for (size_t i = 0; i < n; ++i) dev[i] = series[i] - mean;

    const double denom = kern::dot(dev.data(), dev.data(), n);
    if (!(denom > 0.0))
        throw std::runtime_error("autocorrelation of a zero-variance series");

    AcfResult acf;
    acf.series_length = n;
    acf.values.resize(static_cast<size_t>(max_lag) + 1);
    for (uint32_t tau = 0; tau <= max_lag; ++tau)
        acf.values[tau] =
            kern::dot(dev.data(), dev.data() + tau, n - tau) / denom;
    return acf;
}

AcfDecayFit fit_acf_decay(const AcfResult& acf, uint32_t lag_lo,
                          uint32_t lag_hi) {
    if (lag_lo < 1 || lag_lo >= lag_hi || lag_hi > acf.max_lag())
        throw std::invalid_argument("bad acf fit range");

    std::vector<double> xs, ys;
    for (uint32_t tau = lag_lo; tau <= lag_hi; ++tau) {
        const double c = acf.values[tau];
        if (c <= 0.0) continue;
        xs.push_back(std::log10(static_cast<double>(tau)));
        ys.push_back(std::log10(c));
    }
    const size_t total = lag_hi - lag_lo + 1;
    const size_t used = xs.size();

    AcfDecayFit out;
    out.excluded_fraction =
        static_cast<double>(total - used) / static_cast<double>(total);
    if (used * 2 < total)
        throw std::runtime_error(
            "acf decay fit unreliable: more than half the lags non-positive");
    if (used < 5)
        throw std::runtime_error("acf decay fit needs at least 5 usable lags");

    const LineFit line = fit_line(xs, ys);
    out.fit.exponent = -line.slope;  // C(tau) ~ tau^-lambda
    out.fit.intercept = line.intercept;
    out.fit.fit_lo = static_cast<double>(lag_lo);
    out.fit.fit_hi = static_cast<double>(lag_hi);
    out.fit.std_error = line.std_error;
    out.fit.r_squared = line.r_squared;
    out.fit.method = FitMethod::LogLogLeastSquares;
    out.fit.n_points = static_cast<uint32_t>(used);

    // Curvature check: a clean power law fits both halves with the same
    // slope; exponential decay does not.
    const size_t half = used / 2;
    if (half >= 3 && used - half >= 3) {
        std::vector<double> x1(xs.begin(), xs.begin() + half);
        std::vector<double> y1(ys.begin(), ys.begin() + half);
        std::vector<double> x2(xs.begin() + half, xs.end());
        std::vector<double> y2(ys.begin() + half, ys.end());
        const double l1 = -fit_line(x1, y1).slope;
        const double l2 = -fit_line(x2, y2).slope;
        out.curvature_delta = std::fabs(l1 - l2);
        out.curvature_flag = out.curvature_delta > 0.25;
    }
    return out;
}

RelationReport exponent_relation_report(double xi_V, double xi_N, double xi_r,
                                        double tolerance) {
    if (!std::isfinite(xi_V) || !std::isfinite(xi_N) || !std::isfinite(xi_r))
        throw std::invalid_argument("exponent relation needs finite inputs");
    if (!(tolerance > 0.0))
        throw std::invalid_argument("tolerance must be positive");
    RelationReport rep;
    rep.xi_V = xi_V;
    rep.xi_N = xi_N;
    rep.xi_r = xi_r;
    rep.dev_N_2V = std::fabs(xi_N - 2.0 * xi_V);
    rep.dev_r_N = std::fabs(xi_r - xi_N);
    rep.tolerance = tolerance;
    rep.pass = rep.dev_N_2V <= tolerance && rep.dev_r_N <= tolerance;
    return rep;
}

}  // namespace volherd
