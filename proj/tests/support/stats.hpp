#pragma once

// Test-side statistical oracles, independent of the library under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace teststat
{
    inline double mean(const std::vector<double> &v)
    {
        double s = 0.0;
        for (double x : v)
        {
            s += x;
        }
        return s / static_cast<double>(v.size());
    }

    inline double sample_variance(const std::vector<double> &v)
    {
        const double m = mean(v);
        double s = 0.0;
        for (double x : v)
        {
            s += (x - m) * (x - m);
        }
        return s / static_cast<double>(v.size() - 1);
    }

    inline double std_error(const std::vector<double> &v)
    {
        return std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
    }

    // One-sample Kolmogorov-Smirnov statistic against a CDF.
    inline double ks_statistic(std::vector<double> samples, const std::function<double(double)> &cdf)
    {
        std::sort(samples.begin(), samples.end());
        const double n = static_cast<double>(samples.size());
        double d = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i)
        {
            const double f = cdf(samples[i]);
            d = std::max(d, std::abs(f - static_cast<double>(i) / n));
            d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
        }
        return d;
    }

    // Asymptotic two-sided KS critical value.
    inline double ks_critical(std::size_t n, double alpha = 0.01)
    {
        const double c = alpha <= 0.01 ? 1.628 : 1.358; // 0.01 / 0.05
        return c / std::sqrt(static_cast<double>(n));
    }

    // Chi-squared statistic for uniform counts over k bins.
    inline double chi2_uniform(const std::vector<long> &counts, long total)
    {
        const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
        double chi2 = 0.0;
        for (long c : counts)
        {
            const double d = static_cast<double>(c) - expected;
            chi2 += d * d / expected;
        }
        return chi2;
    }

    // Wilson-Hilferty approximation of the chi-squared quantile.
    inline double chi2_critical(int df, double alpha = 0.01)
    {
        const double z = alpha <= 0.01 ? 2.3263 : 1.6449;
        const double k = static_cast<double>(df);
        const double term = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
        return k * term * term * term;
    }

    inline double q_function(double x)
    {
        return 0.5 * std::erfc(x / std::sqrt(2.0));
    }

    // Normal-approximation binomial standard error of a fraction.
    inline double binom_se(double p_hat, std::size_t n)
    {
        return std::sqrt(std::max(p_hat * (1.0 - p_hat), 1e-12) / static_cast<double>(n));
    }
}
