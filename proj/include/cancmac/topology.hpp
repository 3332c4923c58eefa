#pragma once

#include "cancmac/channel.hpp"
#include "cancmac/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cancmac
{
    struct Position
    {
        double x = 0.0;
        double y = 0.0;
    };

    inline double distance(Position a, Position b) noexcept
    {
        return std::hypot(a.x - b.x, a.y - b.y);
    }

    // Node placements plus the average power of every link, from a
    // log-distance path-loss law normalized so a cell-diameter link averages
    // the configured SNR at transmit power P.
    class Topology
    {
    public:
        Topology() = default;

        Topology(std::vector<Position> positions, double cell_radius, double avg_snr_db,
                 double tx_power, double noise_var, double pathloss_exp, double min_distance)
            : m_positions(std::move(positions)),
              m_pathloss_exp(pathloss_exp),
              m_min_distance(min_distance)
        {
            const double snr_lin = std::pow(10.0, avg_snr_db / 10.0);
            m_ref_distance = std::max(2.0 * cell_radius, min_distance);
            m_ref_power = snr_lin * noise_var / tx_power;
        }

        int n_nodes() const { return static_cast<int>(m_positions.size()); }

        const std::vector<Position> &positions() const { return m_positions; }

        // Average link power; distances are clamped below at min_distance so
        // co-located nodes saturate at the cell-edge-normalized maximum.
        double avg_power(NodeId i, NodeId j) const
        {
            const double d = std::max(distance(m_positions.at(i), m_positions.at(j)), m_min_distance);
            return m_ref_power * std::pow(d / m_ref_distance, -m_pathloss_exp);
        }

        double avg_snr_db(NodeId i, NodeId j, double tx_power, double noise_var) const
        {
            return 10.0 * std::log10(tx_power * avg_power(i, j) / noise_var);
        }

    private:
        std::vector<Position> m_positions;
        double m_pathloss_exp = 3.0;
        double m_min_distance = 1.0;
        double m_ref_distance = 1.0;
        double m_ref_power = 1.0;
    };

    // Uniform placement in a disc of the given radius.
    inline std::vector<Position> place_in_disc(int n_nodes, double cell_radius, RngStream &rng)
    {
        if (n_nodes < 2)
        {
            throw std::invalid_argument("place_in_disc: need at least 2 nodes");
        }
        std::vector<Position> out;
        out.reserve(static_cast<std::size_t>(n_nodes));
        for (int i = 0; i < n_nodes; ++i)
        {
            // Uniform over the disc: radius via sqrt of a uniform draw.
            const double r = cell_radius * std::sqrt(rng.uniform());
            const double theta = rng.uniform(0.0, 2.0 * M_PI);
            out.push_back(Position{r * std::cos(theta), r * std::sin(theta)});
        }
        return out;
    }

    inline Topology build_topology(int n_nodes, double cell_radius, double avg_snr_db,
                                   double tx_power, double noise_var, double pathloss_exp,
                                   double min_distance, RngStream &rng)
    {
        return Topology(place_in_disc(n_nodes, cell_radius, rng), cell_radius, avg_snr_db,
                        tx_power, noise_var, pathloss_exp, min_distance);
    }
}
