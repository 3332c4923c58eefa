#pragma once

// Independent oracle implementations used by the tests. These deliberately
// re-derive results with separate code paths from the library.

#include "cancmac/channel.hpp"
#include "cancmac/phy.hpp"

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

namespace oracle
{
    using cancmac::ComplexGain;

    // Brute-force joint ML enumerator: for every symbol index, walk all
    // |A| x |B| candidate pairs and recompute the two-branch metric inline.
    // Ties resolve to the lowest (a, b) index pair, like the detector contract.
    inline std::pair<std::vector<ComplexGain>, std::vector<ComplexGain>> brute_force_joint_ml(
        const std::vector<ComplexGain> &y_dir, const std::vector<ComplexGain> &y_rel,
        ComplexGain dir_a, ComplexGain dir_b, ComplexGain rel_a, ComplexGain rel_b, double tx_power,
        const std::vector<ComplexGain> &dict_a, const std::vector<ComplexGain> &dict_b)
    {
        std::vector<ComplexGain> out_a, out_b;
        const double sp = std::sqrt(tx_power);
        for (std::size_t s = 0; s < y_dir.size(); ++s)
        {
            double best = -1.0;
            std::size_t best_ia = 0, best_ib = 0;
            for (std::size_t ia = 0; ia < dict_a.size(); ++ia)
            {
                for (std::size_t ib = 0; ib < dict_b.size(); ++ib)
                {
                    const ComplexGain d1 = y_dir[s] - sp * dir_a * dict_a[ia] - sp * dir_b * dict_b[ib];
                    const ComplexGain d2 = y_rel[s] - sp * rel_a * dict_a[ia] - sp * rel_b * dict_b[ib];
                    const double metric = std::norm(d1) + std::norm(d2);
                    if (best < 0.0 || metric < best)
                    {
                        best = metric;
                        best_ia = ia;
                        best_ib = ib;
                    }
                }
            }
            out_a.push_back(dict_a[best_ia]);
            out_b.push_back(dict_b[best_ib]);
        }
        return {out_a, out_b};
    }

    // Direct evaluation of the relayed-observation formula for one symbol.
    inline ComplexGain relayed_sample(ComplexGain x_a, ComplexGain x_b, ComplexGain h_sr_a,
                                      ComplexGain h_sr_b, ComplexGain h_rd, double g, double tx_power,
                                      ComplexGain n_relay, ComplexGain n_dst)
    {
        const double sp = std::sqrt(tx_power);
        return sp * h_sr_a * h_rd * g * x_a + sp * h_sr_b * h_rd * g * x_b + h_rd * g * n_relay + n_dst;
    }

    // Term-by-term ANC-OL sum-rate evaluation (mirrors the printed formula
    // with independent code).
    inline double ancol_rate(double W, double P, ComplexGain h1, ComplexGain h2, ComplexGain h4,
                             ComplexGain h7, ComplexGain h8, double g, double s2)
    {
        auto gp = [](ComplexGain h) { return h.real() * h.real() + h.imag() * h.imag(); };
        const double g1 = gp(h1), g2_ = gp(h2), g4 = gp(h4), g7 = gp(h7), g8 = gp(h8);
        const double gg = g * g;
        const double den = 1.0 + g4 * gg;
        double a = 1.0;
        a += P * g1 / s2;
        a += P * g8 / s2;
        a += P * g2_ * g4 * gg / (s2 * den);
        a += P * g4 * g7 * gg / (s2 * den);
        a += P * P * g1 * g4 * g7 * gg / (s2 * s2 * den);
        a += P * P * g2_ * g4 * g8 * gg / (s2 * s2 * den);
        const std::complex<double> cross = h1 * std::conj(h2) * h7 * std::conj(h8);
        a -= P * P * g4 * cross.real() * gg / (s2 * s2 * den);
        if (a < 1.0)
        {
            a = 1.0;
        }
        return W * std::log2(a);
    }
}
