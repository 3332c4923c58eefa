#pragma once

#include "cancmac/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

namespace cancmac
{
    // Control-plane durations entering the protocol overhead, in seconds.
    struct OverheadProfile
    {
        double t_rts = 52e-6;
        double t_cts = 44e-6;
        double t_ctc = 47e-6;
        double t_sifs = 16e-6;
        double t_slot = 9e-6;
        double t_rbkf = 0.0;
    };

    // T_OVHD = T_RTS + 2*T_CTS + 3*T_SIFS + 2*T_s + T_RBKF. The CTC is billed
    // as one T_CTS here (it is essentially a CTS), hence the coefficient 2.
    inline double protocol_overhead(const OverheadProfile &p)
    {
        return p.t_rts + 2.0 * p.t_cts + 3.0 * p.t_sifs + 2.0 * p.t_slot + p.t_rbkf;
    }

    // Estimated rate of the direct mode: W * log2(1 + P*gamma1/sigma^2).
    inline double r_dir(double bandwidth_hz, double tx_power, double gamma1, double noise_var)
    {
        return bandwidth_hz * std::log2(1.0 + tx_power * gamma1 / noise_var);
    }

    enum class CoopRateForm
    {
        // The product form exactly as printed.
        Paper,
        // Standard AF maximal-ratio combining alternative.
        Mrc,
    };

    // Two-slot amplify-and-forward cooperative rate:
    //   (W/2) * min{ log2(1 + P*g2/s2),
    //                log2(1 + (P*g1/s2) * (P*g2*g4*g^2) / (s2*(1+g4*g^2))) }.
    inline double r_coop(double bandwidth_hz, double tx_power, double gamma1, double gamma2,
                         double gamma4, double relay_g, double noise_var,
                         CoopRateForm form = CoopRateForm::Paper)
    {
        const double g2 = relay_g * relay_g;
        const double first = std::log2(1.0 + tx_power * gamma2 / noise_var);
        const double relayed_snr =
            tx_power * gamma2 * gamma4 * g2 / (noise_var * (1.0 + gamma4 * g2));
        double second = 0.0;
        if (form == CoopRateForm::Paper)
        {
            second = std::log2(1.0 + (tx_power * gamma1 / noise_var) * relayed_snr);
        }
        else
        {
            second = std::log2(1.0 + tx_power * gamma1 / noise_var + relayed_snr);
        }
        return 0.5 * bandwidth_hz * std::min(first, second);
    }

    // Estimated ANC-OL sum-rate for two interfering unicast flows, written
    // from one receiver's side. gamma_i = |h_i|^2; the argument is clamped at
    // 1 so estimation noise can never drive the rate negative.
    inline double r_ancol(double bandwidth_hz, double tx_power, ComplexGain h1, ComplexGain h2,
                          ComplexGain h4, ComplexGain h7, ComplexGain h8, double relay_g,
                          double noise_var)
    {
        const double g1 = gain_power(h1);
        const double g2 = gain_power(h2);
        const double g4 = gain_power(h4);
        const double g7 = gain_power(h7);
        const double g8 = gain_power(h8);
        const double gg = relay_g * relay_g;
        const double s2 = noise_var;
        const double s4 = noise_var * noise_var;
        const double denom = 1.0 + g4 * gg;
        const double p2 = tx_power * tx_power;

        double arg = 1.0;
        arg += tx_power * g1 / s2;
        arg += tx_power * g8 / s2;
        arg += tx_power * g2 * g4 * gg / (s2 * denom);
        arg += tx_power * g4 * g7 * gg / (s2 * denom);
        arg += p2 * g1 * g4 * g7 * gg / (s4 * denom);
        arg += p2 * g2 * g4 * g8 * gg / (s4 * denom);
        arg -= p2 * g4 * (h1 * std::conj(h2) * h7 * std::conj(h8)).real() * gg / (s4 * denom);

        return bandwidth_hz * std::log2(std::max(arg, 1.0));
    }

    inline double airtime_or_inf(double payload_bits, double rate_bps)
    {
        if (rate_bps <= 0.0)
        {
            return std::numeric_limits<double>::infinity();
        }
        return payload_bits / rate_bps;
    }

    // Ineq. (3): cooperation pays off iff L/R_coop + T_ovhd_coop < L/R_dir.
    inline bool coop_beneficial(double payload_bits, double rate_coop, double rate_dir,
                                double ovhd_coop_s)
    {
        return airtime_or_inf(payload_bits, rate_coop) + ovhd_coop_s <
               airtime_or_inf(payload_bits, rate_dir);
    }

    // Ineq. (5): ANC-OL beats COOP iff
    //   L/R_ancol + T_ovhd_ancol < L/R_coop + T_ovhd_coop.
    inline bool ancol_beneficial(double payload_bits, double rate_ancol, double rate_coop,
                                 double ovhd_ancol_s, double ovhd_coop_s)
    {
        return airtime_or_inf(payload_bits, rate_ancol) + ovhd_ancol_s <
               airtime_or_inf(payload_bits, rate_coop) + ovhd_coop_s;
    }

    // Relay contention slots: T_RBKF = (2N - floor(R_norm * N)) * T_s with
    // R_norm in [1, 2]. Out-of-range inputs are clamped (with a warning).
    inline int relay_backoff_slots(double r_norm, int n_max)
    {
        if (n_max < 1)
        {
            throw std::invalid_argument("relay_backoff_slots: n_max must be >= 1");
        }
        if (r_norm < 1.0 || r_norm > 2.0)
        {
            std::fprintf(stderr, "cancmac: relay_backoff_slots: r_norm %.6f outside [1,2], clamping\n",
                         r_norm);
            r_norm = std::clamp(r_norm, 1.0, 2.0);
        }
        return 2 * n_max - static_cast<int>(std::floor(r_norm * static_cast<double>(n_max)));
    }

    // Normalized rate gain of a transmission mode: effective packets delivered
    // per direct-equivalent airtime, clamped to [1, 2] (2 = two packets/slot).
    // chosen_rate is the mode's per-packet rate (the ANC-OL sum-rate already
    // is one: two packets in a 2L/R cycle).
    inline double normalize_rate_gain(double chosen_rate, double baseline_rate)
    {
        if (baseline_rate <= 0.0)
        {
            return 1.0;
        }
        return std::clamp(chosen_rate / baseline_rate, 1.0, 2.0);
    }

    // Per candidate pairing at a relay: estimated rates of the three modes.
    struct RateEstimateRow
    {
        NodeId src1 = -1;
        NodeId dst1 = -1;
        NodeId src2 = -1; // -1 when no secondary pair
        NodeId dst2 = -1;
        NodeId relay = -1;
        double rate_dir = 0.0;
        std::optional<double> rate_coop;
        std::optional<double> rate_ancol;
    };
}
