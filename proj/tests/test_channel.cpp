#include "cancmac/channel.hpp"
#include "cancmac/topology.hpp"

#include "support/stats.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace cancmac;

TEST_CASE("sample_block_gain: zero average power gives the zero gain")
{
    RngStream rng(1);
    const ComplexGain h = sample_block_gain(0.0, rng);
    REQUIRE(h == ComplexGain{0.0, 0.0});
    REQUIRE(gain_power(h) == 0.0);
}

TEST_CASE("sample_block_gain: |h|^2 is exponential with the configured mean")
{
    RngStream rng(42);
    const std::size_t n = 1'000'000;

    std::vector<double> gammas(n);
    double sum = 0.0;
    for (auto &g : gammas)
    {
        g = gain_power(sample_block_gain(1.0, rng));
        sum += g;
    }
    REQUIRE(sum / static_cast<double>(n) == Catch::Approx(1.0).margin(0.01));

    const double d = teststat::ks_statistic(gammas, [](double g) { return 1.0 - std::exp(-g); });
    REQUIRE(d < teststat::ks_critical(n, 0.01));

    double sum4 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        sum4 += gain_power(sample_block_gain(4.0, rng));
    }
    REQUIRE(sum4 / static_cast<double>(n) == Catch::Approx(4.0).margin(0.04));
}

TEST_CASE("estimate_gain: consistent, unbiased, variance as stated")
{
    RngStream rng(7);

    SECTION("large pilot count collapses the error")
    {
        int close = 0;
        for (int i = 0; i < 1000; ++i)
        {
            const ComplexGain h{0.3, -0.4};
            const ComplexGain est = estimate_gain(h, 1'000'000, 10.0, rng);
            if (std::abs(est - h) < 1e-2)
            {
                close += 1;
            }
        }
        REQUIRE(close >= 999);
    }

    SECTION("error second moment is 1/(n_pilots * pilot_snr)")
    {
        const std::size_t n = 1'000'000;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const ComplexGain est = estimate_gain(ComplexGain{1.0, 0.0}, 1, 1.0, rng);
            sum_sq += std::norm(est - ComplexGain{1.0, 0.0});
        }
        REQUIRE(sum_sq / static_cast<double>(n) == Catch::Approx(1.0).epsilon(0.02));
    }

    SECTION("unbiased around a zero gain")
    {
        const std::size_t n = 200'000;
        std::vector<double> re(n), im(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            const ComplexGain est = estimate_gain(ComplexGain{0.0, 0.0}, 4, 2.0, rng);
            re[i] = est.real();
            im[i] = est.imag();
        }
        REQUIRE(std::abs(teststat::mean(re)) < 3.0 * teststat::std_error(re));
        REQUIRE(std::abs(teststat::mean(im)) < 3.0 * teststat::std_error(im));
    }

    SECTION("doubling the pilot count halves the error variance")
    {
        const std::size_t n = 1'000'000;
        double v1 = 0.0, v2 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            v1 += std::norm(estimate_gain(ComplexGain{0.5, 0.5}, 4, 3.0, rng) - ComplexGain{0.5, 0.5});
            v2 += std::norm(estimate_gain(ComplexGain{0.5, 0.5}, 8, 3.0, rng) - ComplexGain{0.5, 0.5});
        }
        REQUIRE(v1 / v2 == Catch::Approx(2.0).epsilon(0.05));
    }
}

TEST_CASE("snr is P*gamma/sigma^2")
{
    REQUIRE(snr(1.0, 0.0, 1e-9) == 0.0);
    REQUIRE(snr(1e-9, 1.0, 1e-9) == Catch::Approx(1.0));

    RngStream rng(3);
    for (int i = 0; i < 100; ++i)
    {
        const double p = rng.uniform(0.1, 10.0);
        const double gamma = rng.uniform(0.0, 5.0);
        REQUIRE(snr(p, gamma, 1e-9) == Catch::Approx(p * gamma / 1e-9));
    }
    REQUIRE_THROWS_AS(snr(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("LinkTable: reciprocity flag controls gain symmetry")
{
    auto avg = [](NodeId, NodeId) { return 1.0; };

    LinkTable reciprocal(4, true);
    RngStream rng1(11);
    reciprocal.resample(avg, rng1);
    for (NodeId i = 0; i < 4; ++i)
    {
        for (NodeId j = i + 1; j < 4; ++j)
        {
            REQUIRE(reciprocal.true_gain(i, j) == reciprocal.true_gain(j, i));
        }
    }

    LinkTable oneway(4, false);
    RngStream rng2(11);
    oneway.resample(avg, rng2);
    int differing = 0;
    for (NodeId i = 0; i < 4; ++i)
    {
        for (NodeId j = i + 1; j < 4; ++j)
        {
            if (oneway.true_gain(i, j) != oneway.true_gain(j, i))
            {
                differing += 1;
            }
        }
    }
    REQUIRE(differing == 6);
}

TEST_CASE("EstimateTable: monotone per-entry time, purge, reciprocity lookup")
{
    EstimateTable t;
    t.put(LinkKey{0, 1}, ComplexGain{1.0, 0.0}, 100);
    t.put(LinkKey{0, 1}, ComplexGain{2.0, 0.0}, 50); // stale write ignored
    REQUIRE(t.get(LinkKey{0, 1})->gain == ComplexGain{1.0, 0.0});
    REQUIRE(t.get(LinkKey{0, 1})->time_ns == 100);

    REQUIRE_FALSE(t.get(LinkKey{1, 0}).has_value());
    REQUIRE(t.get_reciprocal(LinkKey{1, 0}, true).has_value());
    REQUIRE_FALSE(t.get_reciprocal(LinkKey{1, 0}, false).has_value());

    t.put(LinkKey{2, 1}, ComplexGain{0.5, 0.5}, 10);
    t.purge_node(0);
    REQUIRE_FALSE(t.get(LinkKey{0, 1}).has_value());
    REQUIRE(t.get(LinkKey{2, 1}).has_value());
}

TEST_CASE("topology: co-located pair saturates at the configured maximum SNR")
{
    RngStream rng(5);
    const double snr_db = 17.0;
    Topology topo = build_topology(2, 1e-9, snr_db, 1.0, 1e-9, 3.0, 1.0, rng);
    REQUIRE(topo.avg_snr_db(0, 1, 1.0, 1e-9) == Catch::Approx(snr_db).margin(0.1));
}

TEST_CASE("topology: a cell-diameter link averages the configured SNR")
{
    const double snr_db = 20.0;
    std::vector<Position> pos{{-50.0, 0.0}, {50.0, 0.0}};
    Topology topo(pos, 50.0, snr_db, 1.0, 1e-9, 3.0, 1.0);
    REQUIRE(topo.avg_snr_db(0, 1, 1.0, 1e-9) == Catch::Approx(snr_db).margin(0.1));
}

TEST_CASE("topology: pairwise distance in a disc matches the analytic law")
{
    // Distance distribution of two uniform points in a disc of radius R:
    // f(d) = (2d/R^2) * (2/pi) * (acos(u) - u*sqrt(1-u^2)), u = d/(2R).
    const double R = 50.0;
    auto pdf = [&](double d)
    {
        const double u = d / (2.0 * R);
        return (2.0 * d / (R * R)) * (2.0 / M_PI) * (std::acos(u) - u * std::sqrt(1.0 - u * u));
    };
    // Numeric CDF by Simpson's rule on a fixed grid.
    const int grid = 4000;
    std::vector<double> cdf_grid(grid + 1, 0.0);
    const double h = 2.0 * R / grid;
    for (int i = 1; i <= grid; ++i)
    {
        const double a = (i - 1) * h, b = i * h;
        cdf_grid[i] = cdf_grid[i - 1] + (b - a) / 6.0 * (pdf(a) + 4.0 * pdf(0.5 * (a + b)) + pdf(b));
    }
    auto cdf = [&](double d)
    {
        const double x = std::clamp(d / h, 0.0, static_cast<double>(grid));
        const int i = static_cast<int>(x);
        if (i >= grid)
        {
            return 1.0;
        }
        const double frac = x - i;
        return cdf_grid[i] * (1.0 - frac) + cdf_grid[i + 1] * frac;
    };

    RngStream rng(99);
    const std::size_t n = 10'000;
    std::vector<double> d(n);
    for (auto &di : d)
    {
        auto pos = place_in_disc(10, R, rng);
        di = distance(pos[0], pos[1]);
    }
    REQUIRE(teststat::ks_statistic(d, cdf) < teststat::ks_critical(n, 0.01));
}
