#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace cancmac
{
    // splitmix64 finalizer; used to turn (seed, tag) pairs into well-mixed
    // stream seeds so independent RNG streams never alias.
    inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept
    {
        return mix64(mix64(base) ^ mix64(tag));
    }

    inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) noexcept
    {
        return mix64(derive_seed(base, tag) ^ mix64(index));
    }

    // One deterministic random stream. Every stochastic quantity in a run is
    // drawn from a stream derived from (run seed, purpose tag[, index]), so
    // draw order in one subsystem cannot perturb another.
    class RngStream
    {
    public:
        explicit RngStream(std::uint64_t seed) : m_gen(seed) {}

        double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(m_gen); }

        double uniform(double lo, double hi)
        {
            return std::uniform_real_distribution<double>(lo, hi)(m_gen);
        }

        // Inclusive on both ends.
        int uniform_int(int lo, int hi)
        {
            return std::uniform_int_distribution<int>(lo, hi)(m_gen);
        }

        double gaussian(double mean, double stddev)
        {
            return std::normal_distribution<double>(mean, stddev)(m_gen);
        }

        // Circularly symmetric complex Gaussian with the given per-component
        // variance. variance_per_component = 0 returns exactly zero.
        std::complex<double> complex_gaussian(double variance_per_component)
        {
            if (variance_per_component <= 0.0)
            {
                return {0.0, 0.0};
            }
            const double sd = std::sqrt(variance_per_component);
            const double re = gaussian(0.0, sd);
            const double im = gaussian(0.0, sd);
            return {re, im};
        }

        std::mt19937_64 &raw() { return m_gen; }

    private:
        std::mt19937_64 m_gen;
    };

    // Tags for the per-purpose streams used by the simulator.
    namespace rng_tag
    {
        inline constexpr std::uint64_t topology = 0x544F504Full;  // node placement
        inline constexpr std::uint64_t fading = 0x46414445ull;    // per-cycle block gains
        inline constexpr std::uint64_t estimate = 0x45535449ull;  // pilot estimation noise
        inline constexpr std::uint64_t phy = 0x50485953ull;       // symbol-level noise
        inline constexpr std::uint64_t backoff = 0x424B4F46ull;   // contention counters
    }
}
