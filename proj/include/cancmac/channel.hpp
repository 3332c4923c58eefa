#pragma once

#include "cancmac/rng.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>

namespace cancmac
{
    // One complex channel coefficient h. The instantaneous power of a link is
    // gamma = |h|^2.
    using ComplexGain = std::complex<double>;

    inline double gain_power(ComplexGain h) noexcept { return std::norm(h); }

    using NodeId = int;

    struct NoiseModel
    {
        double variance = 1e-9;       // watts
        double bandwidth_hz = 20e6;   // W

        void validate() const
        {
            if (variance <= 0.0)
            {
                throw std::invalid_argument("NoiseModel: variance must be > 0");
            }
            if (bandwidth_hz <= 0.0)
            {
                throw std::invalid_argument("NoiseModel: bandwidth must be > 0");
            }
        }
    };

    // Rayleigh block-fading draw: h ~ CN(0, avg_power), held constant for the
    // current frame/cycle and resampled per block by the caller.
    inline ComplexGain sample_block_gain(double avg_power, RngStream &rng)
    {
        if (avg_power < 0.0)
        {
            throw std::invalid_argument("sample_block_gain: avg_power must be >= 0");
        }
        return rng.complex_gaussian(avg_power / 2.0);
    }

    // Pilot-averaged channel estimate: h_est = h + e with e ~ CN per-component
    // variance 1/(2 * n_pilots * pilot_snr). Error shrinks as 1/n_pilots.
    inline ComplexGain estimate_gain(ComplexGain true_gain, int n_pilots, double pilot_snr, RngStream &rng)
    {
        if (n_pilots < 1)
        {
            throw std::invalid_argument("estimate_gain: n_pilots must be >= 1");
        }
        if (pilot_snr <= 0.0)
        {
            throw std::invalid_argument("estimate_gain: pilot_snr must be > 0");
        }
        const double var_per_component = 1.0 / (2.0 * static_cast<double>(n_pilots) * pilot_snr);
        return true_gain + rng.complex_gaussian(var_per_component);
    }

    inline double snr(double tx_power, double gain_power, double noise_var)
    {
        if (noise_var <= 0.0)
        {
            throw std::invalid_argument("snr: noise_var must be > 0");
        }
        return tx_power * gain_power / noise_var;
    }

    // Ordered link (from -> to).
    struct LinkKey
    {
        NodeId from = -1;
        NodeId to = -1;

        auto operator<=>(const LinkKey &) const = default;
    };

    struct GainEstimate
    {
        ComplexGain gain{0.0, 0.0};
        std::int64_t time_ns = 0;
    };

    // A node's local view of channel estimates: own pilot measurements plus
    // piggybacked estimates copied from overheard CTS payloads.
    class EstimateTable
    {
    public:
        void put(LinkKey key, ComplexGain gain, std::int64_t now_ns)
        {
            auto &slot = m_entries[key];
            // est_time is monotone per entry; stale writes are ignored.
            if (slot.time_ns <= now_ns)
            {
                slot = GainEstimate{gain, now_ns};
            }
        }

        std::optional<GainEstimate> get(LinkKey key) const
        {
            auto it = m_entries.find(key);
            if (it == m_entries.end())
            {
                return std::nullopt;
            }
            return it->second;
        }

        // Lookup honoring reciprocity: (a,b) falls back to (b,a).
        std::optional<GainEstimate> get_reciprocal(LinkKey key, bool reciprocity) const
        {
            if (auto e = get(key))
            {
                return e;
            }
            if (reciprocity)
            {
                return get(LinkKey{key.to, key.from});
            }
            return std::nullopt;
        }

        void purge_node(NodeId node)
        {
            for (auto it = m_entries.begin(); it != m_entries.end();)
            {
                if (it->first.from == node || it->first.to == node)
                {
                    it = m_entries.erase(it);
                }
                else
                {
                    ++it;
                }
            }
        }

        std::size_t size() const { return m_entries.size(); }
        void clear() { m_entries.clear(); }

        const std::map<LinkKey, GainEstimate> &entries() const { return m_entries; }

    private:
        std::map<LinkKey, GainEstimate> m_entries;
    };

    struct LinkState
    {
        ComplexGain true_gain{0.0, 0.0};
        std::optional<GainEstimate> est;
    };

    // True per-link gains for every ordered node pair in the cell, owned by
    // the event engine. With reciprocity on, gain(i,j) == gain(j,i) by
    // construction of the resampling.
    class LinkTable
    {
    public:
        LinkTable() = default;

        LinkTable(int n_nodes, bool reciprocity) : m_n(n_nodes), m_reciprocity(reciprocity) {}

        // Draws a fresh block realization for every link. avg_power is any
        // callable (i, j) -> average link power.
        template <typename AvgPowerFn>
        void resample(const AvgPowerFn &avg_power, RngStream &rng)
        {
            for (NodeId i = 0; i < m_n; ++i)
            {
                for (NodeId j = i + 1; j < m_n; ++j)
                {
                    const ComplexGain forward = sample_block_gain(avg_power(i, j), rng);
                    set(LinkKey{i, j}, forward);
                    if (m_reciprocity)
                    {
                        set(LinkKey{j, i}, forward);
                    }
                    else
                    {
                        set(LinkKey{j, i}, sample_block_gain(avg_power(j, i), rng));
                    }
                }
            }
        }

        ComplexGain true_gain(NodeId from, NodeId to) const
        {
            auto it = m_links.find(LinkKey{from, to});
            if (it == m_links.end())
            {
                throw std::out_of_range("LinkTable: unknown link");
            }
            return it->second.true_gain;
        }

        void set(LinkKey key, ComplexGain h)
        {
            m_links[key].true_gain = h;
        }

        void set_estimate(LinkKey key, ComplexGain h, std::int64_t now_ns)
        {
            auto &state = m_links[key];
            if (!state.est || state.est->time_ns <= now_ns)
            {
                state.est = GainEstimate{h, now_ns};
            }
        }

        const LinkState *find(LinkKey key) const
        {
            auto it = m_links.find(key);
            return it == m_links.end() ? nullptr : &it->second;
        }

        int n_nodes() const { return m_n; }
        bool reciprocity() const { return m_reciprocity; }

    private:
        int m_n = 0;
        bool m_reciprocity = true;
        std::map<LinkKey, LinkState> m_links;
    };
}
