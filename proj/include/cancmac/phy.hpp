#pragma once

#include "cancmac/channel.hpp"
#include "cancmac/rng.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cancmac
{
    enum class Modulation
    {
        Bpsk,
        Qpsk,
    };

    // Unit-average-power symbol dictionary with Gray bit mapping.
    struct Constellation
    {
        Modulation scheme = Modulation::Qpsk;
        std::vector<ComplexGain> points;

        int bits_per_symbol() const { return scheme == Modulation::Bpsk ? 1 : 2; }

        static Constellation bpsk()
        {
            return Constellation{Modulation::Bpsk, {{1.0, 0.0}, {-1.0, 0.0}}};
        }

        static Constellation qpsk()
        {
            // Index = (b1 << 1) | b0; I carries b0, Q carries b1. Adjacent
            // points differ in one bit (Gray).
            const double a = 1.0 / std::sqrt(2.0);
            return Constellation{Modulation::Qpsk,
                                 {{a, a}, {-a, a}, {a, -a}, {-a, -a}}};
        }

        static Constellation make(Modulation m)
        {
            return m == Modulation::Bpsk ? bpsk() : qpsk();
        }
    };

    struct SymbolStream
    {
        std::vector<ComplexGain> symbols;
        NodeId source_id = -1;
    };

    enum class ObservationKind
    {
        Direct,
        Relayed,
    };

    struct Observation
    {
        std::vector<ComplexGain> samples;
        ObservationKind kind = ObservationKind::Direct;
    };

    // Amplify-and-forward power allocation factor at the relay.
    struct RelayGain
    {
        double g = 0.0;
    };

    inline SymbolStream modulate(std::span<const std::uint8_t> bits, const Constellation &c,
                                 NodeId source_id = -1)
    {
        const int bps = c.bits_per_symbol();
        if (bits.size() % static_cast<std::size_t>(bps) != 0)
        {
            throw std::invalid_argument("modulate: bit count not divisible by bits-per-symbol");
        }
        SymbolStream out;
        out.source_id = source_id;
        out.symbols.reserve(bits.size() / static_cast<std::size_t>(bps));
        for (std::size_t i = 0; i < bits.size(); i += static_cast<std::size_t>(bps))
        {
            std::size_t index = 0;
            for (int b = 0; b < bps; ++b)
            {
                index |= static_cast<std::size_t>(bits[i + static_cast<std::size_t>(b)] & 1u) << b;
            }
            out.symbols.push_back(c.points.at(index));
        }
        return out;
    }

    inline std::vector<std::uint8_t> demodulate(const SymbolStream &stream, const Constellation &c)
    {
        const int bps = c.bits_per_symbol();
        std::vector<std::uint8_t> bits;
        bits.reserve(stream.symbols.size() * static_cast<std::size_t>(bps));
        for (const auto &s : stream.symbols)
        {
            std::size_t best = 0;
            double best_d = std::norm(s - c.points[0]);
            for (std::size_t k = 1; k < c.points.size(); ++k)
            {
                const double d = std::norm(s - c.points[k]);
                if (d < best_d)
                {
                    best_d = d;
                    best = k;
                }
            }
            for (int b = 0; b < bps; ++b)
            {
                bits.push_back(static_cast<std::uint8_t>((best >> b) & 1u));
            }
        }
        return bits;
    }

    // g = sqrt(P / (P * sum(gamma_in) + sigma^2)): output power of the relay
    // is constrained to P for the given incident link powers.
    inline RelayGain relay_gain(double tx_power, std::span<const double> incident_gains, double noise_var)
    {
        if (tx_power <= 0.0)
        {
            throw std::invalid_argument("relay_gain: tx_power must be > 0");
        }
        double sum = 0.0;
        for (double gamma : incident_gains)
        {
            sum += gamma;
        }
        return RelayGain{std::sqrt(tx_power / (tx_power * sum + noise_var))};
    }

    // y = sqrt(P) h_dir x_A + sqrt(P) h_cross x_B + n, per symbol.
    inline Observation compose_direct(const SymbolStream &x_a, const SymbolStream &x_b,
                                      ComplexGain h_dir, ComplexGain h_cross, double tx_power,
                                      const NoiseModel &noise, RngStream &rng)
    {
        if (x_a.symbols.size() != x_b.symbols.size())
        {
            throw std::invalid_argument("compose_direct: stream lengths differ");
        }
        const double sp = std::sqrt(tx_power);
        Observation out;
        out.kind = ObservationKind::Direct;
        out.samples.reserve(x_a.symbols.size());
        for (std::size_t i = 0; i < x_a.symbols.size(); ++i)
        {
            ComplexGain y = sp * h_dir * x_a.symbols[i] + sp * h_cross * x_b.symbols[i];
            if (noise.variance > 0.0)
            {
                y += rng.complex_gaussian(noise.variance / 2.0);
            }
            out.samples.push_back(y);
        }
        return out;
    }

    // y = sqrt(P) h_sr_A h_rd g x_A + sqrt(P) h_sr_B h_rd g x_B + h_rd g n_relay + n_dst.
    inline Observation compose_relayed(const SymbolStream &x_a, const SymbolStream &x_b,
                                       ComplexGain h_sr_a, ComplexGain h_sr_b, ComplexGain h_rd,
                                       RelayGain g, double tx_power, const NoiseModel &noise,
                                       RngStream &rng)
    {
        if (x_a.symbols.size() != x_b.symbols.size())
        {
            throw std::invalid_argument("compose_relayed: stream lengths differ");
        }
        const double sp = std::sqrt(tx_power);
        Observation out;
        out.kind = ObservationKind::Relayed;
        out.samples.reserve(x_a.symbols.size());
        for (std::size_t i = 0; i < x_a.symbols.size(); ++i)
        {
            ComplexGain y = sp * h_sr_a * h_rd * g.g * x_a.symbols[i] +
                            sp * h_sr_b * h_rd * g.g * x_b.symbols[i];
            if (noise.variance > 0.0)
            {
                y += h_rd * g.g * rng.complex_gaussian(noise.variance / 2.0); // relay noise, amplified
                y += rng.complex_gaussian(noise.variance / 2.0);              // destination noise
            }
            out.samples.push_back(y);
        }
        return out;
    }

    // Effective (estimated) parameters of the two observation branches as seen
    // by one receiver: y_dir uses dir_a/dir_b, y_rel uses rel_a/rel_b
    // (composites like h2*h4*g).
    struct JointDetectParams
    {
        ComplexGain dir_a{0.0, 0.0};
        ComplexGain dir_b{0.0, 0.0};
        ComplexGain rel_a{0.0, 0.0};
        ComplexGain rel_b{0.0, 0.0};
        double tx_power = 1.0;

        // Optional ML noise weighting: the relayed branch has variance
        // sigma^2 * (1 + gamma_rd * g^2). Off by default (the unweighted form).
        bool weighted = false;
        double relayed_noise_scale = 1.0;
    };

    struct JointDetectResult
    {
        SymbolStream stream_a;
        SymbolStream stream_b;
        bool a_detectable = true;
        bool b_detectable = true;
        // All candidate pairs equidistant (e.g. every effective gain zero).
        bool degenerate = false;
    };

    // Exhaustive per-symbol joint ML over dict_A x dict_B:
    //   argmin |y_dir - sqrt(P)(dir_a x_A + dir_b x_B)|^2
    //        + |y_rel - sqrt(P)(rel_a x_A + rel_b x_B)|^2
    // Ties break toward the lowest (a, b) dictionary index pair.
    inline JointDetectResult ml_joint_detect(const Observation &y_dir, const Observation &y_rel,
                                             const JointDetectParams &p, const Constellation &dict_a,
                                             const Constellation &dict_b)
    {
        if (y_dir.samples.size() != y_rel.samples.size())
        {
            throw std::invalid_argument("ml_joint_detect: observation lengths differ");
        }
        const double sp = std::sqrt(p.tx_power);
        const double w_rel = p.weighted ? 1.0 / std::max(p.relayed_noise_scale, 1e-300) : 1.0;

        JointDetectResult res;
        res.a_detectable = gain_power(p.dir_a) > 0.0 || gain_power(p.rel_a) > 0.0;
        res.b_detectable = gain_power(p.dir_b) > 0.0 || gain_power(p.rel_b) > 0.0;
        res.degenerate = !res.a_detectable && !res.b_detectable;

        const std::size_t na = dict_a.points.size();
        const std::size_t nb = dict_b.points.size();

        // Candidate constellation points per (a, b) pair, both branches.
        std::vector<ComplexGain> cand_dir(na * nb);
        std::vector<ComplexGain> cand_rel(na * nb);
        for (std::size_t ia = 0; ia < na; ++ia)
        {
            for (std::size_t ib = 0; ib < nb; ++ib)
            {
                cand_dir[ia * nb + ib] = sp * p.dir_a * dict_a.points[ia] + sp * p.dir_b * dict_b.points[ib];
                cand_rel[ia * nb + ib] = sp * p.rel_a * dict_a.points[ia] + sp * p.rel_b * dict_b.points[ib];
            }
        }

        res.stream_a.symbols.reserve(y_dir.samples.size());
        res.stream_b.symbols.reserve(y_dir.samples.size());
        for (std::size_t s = 0; s < y_dir.samples.size(); ++s)
        {
            std::size_t best = 0;
            double best_metric = std::norm(y_dir.samples[s] - cand_dir[0]) +
                                 w_rel * std::norm(y_rel.samples[s] - cand_rel[0]);
            for (std::size_t k = 1; k < cand_dir.size(); ++k)
            {
                const double metric = std::norm(y_dir.samples[s] - cand_dir[k]) +
                                      w_rel * std::norm(y_rel.samples[s] - cand_rel[k]);
                if (metric < best_metric)
                {
                    best_metric = metric;
                    best = k;
                }
            }
            res.stream_a.symbols.push_back(dict_a.points[best / nb]);
            res.stream_b.symbols.push_back(dict_b.points[best % nb]);
        }
        return res;
    }

    // Single-stream ML over one or two branches; used for DIRECT reception and
    // the COOP combine (direct + relayed copies of the same stream).
    struct SingleBranch
    {
        const Observation *obs = nullptr;
        ComplexGain eff_gain{0.0, 0.0};
        double weight = 1.0;
    };

    inline SymbolStream ml_single_detect(std::span<const SingleBranch> branches, double tx_power,
                                         const Constellation &dict)
    {
        if (branches.empty() || branches[0].obs == nullptr)
        {
            throw std::invalid_argument("ml_single_detect: no branches");
        }
        const std::size_t len = branches[0].obs->samples.size();
        for (const auto &b : branches)
        {
            if (b.obs->samples.size() != len)
            {
                throw std::invalid_argument("ml_single_detect: branch lengths differ");
            }
        }
        const double sp = std::sqrt(tx_power);
        SymbolStream out;
        out.symbols.reserve(len);
        for (std::size_t s = 0; s < len; ++s)
        {
            std::size_t best = 0;
            double best_metric = 0.0;
            for (std::size_t k = 0; k < dict.points.size(); ++k)
            {
                double metric = 0.0;
                for (const auto &b : branches)
                {
                    metric += b.weight * std::norm(b.obs->samples[s] - sp * b.eff_gain * dict.points[k]);
                }
                if (k == 0 || metric < best_metric)
                {
                    best_metric = metric;
                    best = k;
                }
            }
            out.symbols.push_back(dict.points[best]);
        }
        return out;
    }

    // Per packet: success iff every symbol detected exactly (no FEC).
    inline std::pair<bool, bool> frame_success(const std::pair<SymbolStream, SymbolStream> &detected,
                                               const std::pair<SymbolStream, SymbolStream> &truth)
    {
        auto all_equal = [](const SymbolStream &a, const SymbolStream &b)
        {
            if (a.symbols.size() != b.symbols.size())
            {
                throw std::invalid_argument("frame_success: stream lengths differ");
            }
            for (std::size_t i = 0; i < a.symbols.size(); ++i)
            {
                if (a.symbols[i] != b.symbols[i])
                {
                    return false;
                }
            }
            return true;
        };
        return {all_equal(detected.first, truth.first), all_equal(detected.second, truth.second)};
    }

    inline bool stream_equal(const SymbolStream &a, const SymbolStream &b)
    {
        if (a.symbols.size() != b.symbols.size())
        {
            return false;
        }
        for (std::size_t i = 0; i < a.symbols.size(); ++i)
        {
            if (a.symbols[i] != b.symbols[i])
            {
                return false;
            }
        }
        return true;
    }
}
