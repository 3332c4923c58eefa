#pragma once

#include "cancmac/channel.hpp"
#include "cancmac/rate.hpp"
#include "cancmac/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cancmac
{
    enum class FrameKind
    {
        Rts,
        Cts,
        Ctc,
        Data,
        Ack,
        BusyTone,
    };

    enum class Mode
    {
        Direct,
        Coop,
        Ancol,
    };

    inline const char *mode_name(Mode m)
    {
        switch (m)
        {
        case Mode::Direct: return "DIRECT";
        case Mode::Coop: return "COOP";
        case Mode::Ancol: return "ANCOL";
        }
        return "?";
    }

    struct FlowRef
    {
        NodeId src = -1;
        NodeId dst = -1;

        auto operator<=>(const FlowRef &) const = default;
    };

    struct PiggybackEstimate
    {
        NodeId from = -1;
        NodeId to = -1;
        ComplexGain gain{0.0, 0.0};
    };

    struct Frame
    {
        FrameKind kind = FrameKind::Rts;
        NodeId src = -1;
        std::vector<NodeId> dsts;
        long payload_bits = 0;
        std::vector<PiggybackEstimate> piggyback; // CTS payload
        std::vector<FlowRef> flows;               // CTC payload: granted flows
        double granted_rate_bps = 0.0;            // CTC payload: the relay's rate estimate
        std::int64_t duration_ns = 0;

        // A CTC carries exactly two destination addresses; every other
        // addressed frame exactly one; a busy tone carries none.
        bool well_formed() const
        {
            switch (kind)
            {
            case FrameKind::Ctc:
                return dsts.size() == 2 && !flows.empty() && flows.size() <= 2;
            case FrameKind::BusyTone:
                return dsts.empty();
            default:
                return dsts.size() == 1;
            }
        }

        bool addressed_to(NodeId id) const
        {
            return std::find(dsts.begin(), dsts.end(), id) != dsts.end();
        }
    };

    // One monitored cooperative-flow record (Table I row). pair2 is absent for
    // plain COOP transmissions.
    struct AnflEntry
    {
        FlowRef pair1;
        std::optional<FlowRef> pair2;
        NodeId relay = -1;
        std::int64_t last_seen_ns = 0;

        bool involves(NodeId n) const
        {
            if (pair1.src == n || pair1.dst == n || relay == n)
            {
                return true;
            }
            return pair2 && (pair2->src == n || pair2->dst == n);
        }

        bool endpoint(NodeId n) const
        {
            if (pair1.src == n || pair1.dst == n)
            {
                return true;
            }
            return pair2 && (pair2->src == n || pair2->dst == n);
        }

        bool same_flows(const AnflEntry &o) const
        {
            return pair1 == o.pair1 && pair2 == o.pair2 && relay == o.relay;
        }
    };

    // LRU-bounded table of overheard cooperative flows.
    class AnflTable
    {
    public:
        explicit AnflTable(std::size_t capacity = 20) : m_capacity(capacity) {}

        void insert_or_refresh(FlowRef pair1, std::optional<FlowRef> pair2, NodeId relay,
                               std::int64_t now_ns)
        {
            if (relay == pair1.src || relay == pair1.dst ||
                (pair2 && (relay == pair2->src || relay == pair2->dst)))
            {
                throw std::invalid_argument("AnflTable: relay must differ from flow endpoints");
            }
            // Canonical order so {A,B} and {B,A} are one entry.
            if (pair2 && (pair2->src < pair1.src))
            {
                std::swap(pair1, *pair2);
            }
            AnflEntry entry{pair1, pair2, relay, now_ns};
            for (auto &e : m_entries)
            {
                if (e.same_flows(entry))
                {
                    e.last_seen_ns = now_ns;
                    return;
                }
            }
            if (m_entries.size() >= m_capacity)
            {
                evict_oldest();
            }
            m_entries.push_back(entry);
        }

        void purge_node(NodeId node)
        {
            std::erase_if(m_entries, [node](const AnflEntry &e) { return e.involves(node); });
        }

        // True when some relay has served both a and b as flow endpoints
        // (lines 6-9 of the exchange algorithm).
        bool nodes_share_relay(NodeId a, NodeId b) const
        {
            for (const auto &ea : m_entries)
            {
                if (!ea.endpoint(a))
                {
                    continue;
                }
                for (const auto &eb : m_entries)
                {
                    if (eb.relay == ea.relay && eb.endpoint(b))
                    {
                        return true;
                    }
                }
            }
            return false;
        }

        std::size_t size() const { return m_entries.size(); }
        std::size_t capacity() const { return m_capacity; }
        const std::deque<AnflEntry> &entries() const { return m_entries; }
        void clear() { m_entries.clear(); }

    private:
        void evict_oldest()
        {
            auto oldest = std::min_element(m_entries.begin(), m_entries.end(),
                                           [](const AnflEntry &a, const AnflEntry &b)
                                           { return a.last_seen_ns < b.last_seen_ns; });
            if (oldest != m_entries.end())
            {
                m_entries.erase(oldest);
            }
        }

        std::size_t m_capacity;
        std::deque<AnflEntry> m_entries;
    };

    struct BackoffParams
    {
        int cw_min = 16;
        int cw_max = 1024;
        int retry_limit = 7;
    };

    struct BackoffState
    {
        int cw = 16;
        int counter = 0;
        int retry = 0;
    };

    enum class TxOutcome
    {
        Success,
        Collision,
        Failure,
    };

    // Binary exponential backoff. Returns true when the retry limit was
    // exceeded and the head-of-line packet must be dropped.
    inline bool dcf_backoff(BackoffState &state, TxOutcome outcome, const BackoffParams &p,
                            RngStream &rng)
    {
        bool dropped = false;
        switch (outcome)
        {
        case TxOutcome::Success:
            state.cw = p.cw_min;
            state.retry = 0;
            break;
        case TxOutcome::Collision:
        case TxOutcome::Failure:
            state.retry += 1;
            if (state.retry > p.retry_limit)
            {
                dropped = true;
                state.cw = p.cw_min;
                state.retry = 0;
            }
            else
            {
                state.cw = std::min(state.cw * 2, p.cw_max);
            }
            break;
        }
        state.counter = rng.uniform_int(0, state.cw);
        return dropped;
    }

    struct RtsSeen
    {
        NodeId dst = -1;
        std::int64_t time_ns = 0;
    };

    struct PendingPacket
    {
        NodeId dst = -1;
        long bits = 0;
        std::int64_t hol_entry_ns = 0;
        int attempts = 0;
    };

    struct NodeState
    {
        NodeId id = -1;
        bool associated = true;
        BackoffState backoff;
        std::optional<PendingPacket> hol;
        NodeId traffic_dst = -1;
        long packets_completed = 0;
        long packets_since_rotation = 0;
        AnflTable anfl{20};
        EstimateTable est;
        std::map<NodeId, RtsSeen> last_rts;
        std::uint64_t malformed_frames = 0;

        void disassociate_peer(NodeId node)
        {
            est.purge_node(node);
            anfl.purge_node(node);
            last_rts.erase(node);
        }
    };

    // Channel-information exchange on an overheard control frame (Fig. 2 of
    // the protocol): RTS -> estimate toward the sender; CTS -> estimate plus
    // piggyback harvest; CTC -> anfl update. measured_gain is this node's
    // pilot measurement of the channel from frame.src.
    inline void on_overhear(NodeState &me, const Frame &frame, ComplexGain measured_gain,
                            std::int64_t now_ns)
    {
        if (!frame.well_formed())
        {
            me.malformed_frames += 1;
            return;
        }
        switch (frame.kind)
        {
        case FrameKind::Rts:
            me.est.put(LinkKey{frame.src, me.id}, measured_gain, now_ns);
            me.last_rts[frame.src] = RtsSeen{frame.dsts.front(), now_ns};
            break;
        case FrameKind::Cts:
            // Addressed node and relay candidates both estimate; in a single
            // cell every non-sender is a candidate.
            me.est.put(LinkKey{frame.src, me.id}, measured_gain, now_ns);
            for (const auto &pb : frame.piggyback)
            {
                me.est.put(LinkKey{pb.from, pb.to}, pb.gain, now_ns);
            }
            break;
        case FrameKind::Ctc:
        {
            std::optional<FlowRef> pair2;
            if (frame.flows.size() == 2)
            {
                pair2 = frame.flows[1];
            }
            me.anfl.insert_or_refresh(frame.flows[0], pair2, frame.src, now_ns);
            break;
        }
        default:
            break;
        }
    }

    // CTS construction at the RTS destination: always carries this node's
    // fresh estimate of the sender's channel, plus stored cross estimates for
    // nodes that have shared a relay with this node in the past.
    inline Frame build_cts(const NodeState &me, const Frame &rts, std::int64_t now_ns,
                           std::size_t max_cross_piggyback = 4)
    {
        Frame cts;
        cts.kind = FrameKind::Cts;
        cts.src = me.id;
        cts.dsts = {rts.src};

        if (auto own = me.est.get(LinkKey{rts.src, me.id}))
        {
            cts.piggyback.push_back(PiggybackEstimate{rts.src, me.id, own->gain});
        }

        // Cross estimates, most recent first.
        std::vector<std::pair<std::int64_t, PiggybackEstimate>> cross;
        for (const auto &[key, est] : me.est.entries())
        {
            if (key.to != me.id || key.from == rts.src || key.from == me.id)
            {
                continue;
            }
            if (me.anfl.nodes_share_relay(me.id, key.from))
            {
                cross.emplace_back(est.time_ns, PiggybackEstimate{key.from, me.id, est.gain});
            }
        }
        std::sort(cross.begin(), cross.end(),
                  [](const auto &a, const auto &b)
                  {
                      if (a.first != b.first)
                      {
                          return a.first > b.first;
                      }
                      return a.second.from < b.second.from;
                  });
        for (std::size_t i = 0; i < cross.size() && i < max_cross_piggyback; ++i)
        {
            cts.piggyback.push_back(cross[i].second);
        }
        (void)now_ns;
        return cts;
    }

    struct ModeDecision
    {
        Mode mode = Mode::Direct;
        std::optional<NodeId> relay;
        std::optional<FlowRef> secondary_pair;
        double expected_rate = 0.0;
    };

    enum class RelayDecisionRule
    {
        // Plain rate comparisons (Fig. 3 guards).
        Simple,
        // Additionally require Ineqs. (3)/(5) with the Eq. (6) overhead.
        OverheadAware,
    };

    struct RelayEvalParams
    {
        double bandwidth_hz = 20e6;
        double tx_power = 1.0;
        double noise_var = 1e-9;
        long payload_bits = 4000;
        int n_relay_slots = 10;
        CoopRateForm coop_form = CoopRateForm::Paper;
        bool reciprocity = true;
        RelayDecisionRule rule = RelayDecisionRule::Simple;
        bool ancol_enabled = true;
        OverheadProfile overhead;
        std::int64_t now_ns = 0;
        std::int64_t backlog_staleness_ns = 50'000'000; // 50 ms
        std::int64_t estimate_ttl_ns = -1;              // <0: estimates never expire
    };

    struct RelayDecision
    {
        Mode proposed = Mode::Coop;
        int tone_slot = 2; // 1 = ANC-OL, 2 = COOP
        std::optional<FlowRef> pair2;
        double r_norm = 1.0;
        int backoff_slots = 0;
        RateEstimateRow row;
    };

    // Rate-estimation pass a relay candidate runs after overhearing an
    // RTS/CTS exchange for `primary`. Returns nothing when the relay lacks
    // the estimates to improve on the direct mode (it then stays silent).
    inline std::optional<RelayDecision> evaluate_relay(const NodeState &relay, FlowRef primary,
                                                       const RelayEvalParams &p)
    {
        auto fresh = [&](LinkKey key) -> std::optional<ComplexGain>
        {
            auto e = relay.est.get_reciprocal(key, p.reciprocity);
            if (!e)
            {
                return std::nullopt;
            }
            if (p.estimate_ttl_ns >= 0 && e->time_ns + p.estimate_ttl_ns < p.now_ns)
            {
                return std::nullopt;
            }
            return e->gain;
        };

        const auto h1 = fresh(LinkKey{primary.src, primary.dst});
        const auto h2 = fresh(LinkKey{primary.src, relay.id});
        const auto h4 = fresh(LinkKey{relay.id, primary.dst});
        if (!h1 || !h2 || !h4)
        {
            return std::nullopt;
        }

        const double gamma1 = gain_power(*h1);
        const double gamma2 = gain_power(*h2);
        const double gamma4 = gain_power(*h4);
        const double rate_dir = r_dir(p.bandwidth_hz, p.tx_power, gamma1, p.noise_var);

        const double g_coop = std::sqrt(p.tx_power / (p.tx_power * gamma2 + p.noise_var));
        const double rate_coop = r_coop(p.bandwidth_hz, p.tx_power, gamma1, gamma2, gamma4,
                                        g_coop, p.noise_var, p.coop_form);

        if (!(rate_coop > rate_dir))
        {
            return std::nullopt;
        }

        // Best secondary pairing over recently announced backlogged flows.
        std::optional<FlowRef> best_pair;
        double best_anc = 0.0;
        if (p.ancol_enabled)
        {
            for (const auto &[src2, seen] : relay.last_rts)
            {
                const NodeId dst2 = seen.dst;
                if (p.now_ns - seen.time_ns > p.backlog_staleness_ns)
                {
                    continue;
                }
                if (src2 == primary.src || src2 == primary.dst || src2 == relay.id ||
                    dst2 == primary.src || dst2 == primary.dst || dst2 == relay.id || src2 == dst2)
                {
                    continue;
                }
                const auto h7 = fresh(LinkKey{src2, relay.id});
                const auto h8 = fresh(LinkKey{src2, primary.dst});
                const auto h6 = fresh(LinkKey{src2, dst2});
                const auto h3 = fresh(LinkKey{primary.src, dst2});
                const auto h5 = fresh(LinkKey{relay.id, dst2});
                if (!h7 || !h8 || !h6 || !h3 || !h5)
                {
                    continue;
                }
                const double gamma7 = gain_power(*h7);
                const double g_anc =
                    std::sqrt(p.tx_power / (p.tx_power * (gamma2 + gamma7) + p.noise_var));
                // Both receivers must decode: score a pairing by the worse
                // of the two receiver-side sum-rates.
                const double side1 = r_ancol(p.bandwidth_hz, p.tx_power, *h1, *h2, *h4, *h7, *h8,
                                             g_anc, p.noise_var);
                const double side2 = r_ancol(p.bandwidth_hz, p.tx_power, *h6, *h7, *h5, *h2, *h3,
                                             g_anc, p.noise_var);
                const double rate_anc = std::min(side1, side2);
                if (rate_anc > best_anc ||
                    (rate_anc == best_anc && best_pair && FlowRef{src2, dst2} < *best_pair))
                {
                    best_anc = rate_anc;
                    best_pair = FlowRef{src2, dst2};
                }
            }
        }

        RelayDecision d;
        d.row = RateEstimateRow{primary.src, primary.dst,
                                best_pair ? best_pair->src : -1,
                                best_pair ? best_pair->dst : -1,
                                relay.id, rate_dir, rate_coop,
                                best_pair ? std::optional<double>(best_anc) : std::nullopt};

        const bool anc_wins = best_pair && best_anc > rate_coop;
        if (anc_wins)
        {
            d.proposed = Mode::Ancol;
            d.tone_slot = 1;
            d.pair2 = best_pair;
            d.r_norm = normalize_rate_gain(best_anc, rate_dir);
        }
        else
        {
            d.proposed = Mode::Coop;
            d.tone_slot = 2;
            d.r_norm = normalize_rate_gain(rate_coop, rate_dir);
        }
        d.backoff_slots = relay_backoff_slots(d.r_norm, p.n_relay_slots);

        if (p.rule == RelayDecisionRule::OverheadAware)
        {
            OverheadProfile ov = p.overhead;
            ov.t_rbkf = static_cast<double>(d.backoff_slots) * ov.t_slot;
            const double t_ovhd = protocol_overhead(ov);
            const double bits = static_cast<double>(p.payload_bits);
            if (d.proposed == Mode::Ancol)
            {
                if (!ancol_beneficial(bits, best_anc, rate_coop, t_ovhd, t_ovhd) ||
                    !coop_beneficial(bits, rate_coop, rate_dir, t_ovhd))
                {
                    // Fall back to evaluating the COOP proposal.
                    d.proposed = Mode::Coop;
                    d.tone_slot = 2;
                    d.pair2.reset();
                    d.r_norm = normalize_rate_gain(rate_coop, rate_dir);
                    d.backoff_slots = relay_backoff_slots(d.r_norm, p.n_relay_slots);
                    ov.t_rbkf = static_cast<double>(d.backoff_slots) * ov.t_slot;
                }
            }
            if (d.proposed == Mode::Coop &&
                !coop_beneficial(bits, rate_coop, rate_dir, protocol_overhead(ov)))
            {
                return std::nullopt;
            }
        }
        return d;
    }

    struct ContentionOutcome
    {
        std::optional<NodeId> winner;
        int winner_slots = 0;
        bool collision = false;
    };

    // Relay contention round: the relay with the fewest backoff slots
    // transmits its CTC first and wins; an exact slot tie collides.
    inline ContentionOutcome relay_contention(std::span<const std::pair<NodeId, double>> relays,
                                              int n_max)
    {
        ContentionOutcome out;
        if (relays.empty())
        {
            return out;
        }
        int best_slots = relay_backoff_slots(relays[0].second, n_max);
        NodeId best_node = relays[0].first;
        bool tie = false;
        for (std::size_t i = 1; i < relays.size(); ++i)
        {
            const int slots = relay_backoff_slots(relays[i].second, n_max);
            if (slots < best_slots)
            {
                best_slots = slots;
                best_node = relays[i].first;
                tie = false;
            }
            else if (slots == best_slots)
            {
                tie = true;
            }
        }
        out.winner_slots = best_slots;
        out.collision = tie;
        if (!tie)
        {
            out.winner = best_node;
        }
        return out;
    }
}
