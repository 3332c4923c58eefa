#pragma once

#include "cancmac/channel.hpp"
#include "cancmac/config.hpp"
#include "cancmac/mac.hpp"
#include "cancmac/phy.hpp"
#include "cancmac/rate.hpp"
#include "cancmac/rng.hpp"
#include "cancmac/topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cancmac
{
    using Nanos = std::int64_t;

    inline Nanos us_to_ns(double us) { return static_cast<Nanos>(std::llround(us * 1000.0)); }

    enum class EventKind
    {
        SlotTick,
        TxStart,
        TxEnd,
        FrameDelivery,
        TimerExpiry,
    };

    inline const char *event_kind_name(EventKind k)
    {
        switch (k)
        {
        case EventKind::SlotTick: return "slot_tick";
        case EventKind::TxStart: return "tx_start";
        case EventKind::TxEnd: return "tx_end";
        case EventKind::FrameDelivery: return "frame_delivery";
        case EventKind::TimerExpiry: return "timer_expiry";
        }
        return "?";
    }

    inline const char *frame_kind_name(FrameKind k)
    {
        switch (k)
        {
        case FrameKind::Rts: return "RTS";
        case FrameKind::Cts: return "CTS";
        case FrameKind::Ctc: return "CTC";
        case FrameKind::Data: return "DATA";
        case FrameKind::Ack: return "ACK";
        case FrameKind::BusyTone: return "BUSY_TONE";
        }
        return "?";
    }

    struct TraceRecord
    {
        Nanos t_ns = 0;
        NodeId node = -1;
        EventKind kind = EventKind::SlotTick;
        int frame_kind = -1; // FrameKind or -1
        NodeId src = -1;
        std::array<NodeId, 2> dsts{-1, -1};
        int mode = -1; // Mode or -1
        const char *outcome = "";
    };

    struct Trace
    {
        std::vector<TraceRecord> records;

        static std::string format(const TraceRecord &r)
        {
            char buf[160];
            const char *fk = r.frame_kind >= 0 ? frame_kind_name(static_cast<FrameKind>(r.frame_kind)) : "-";
            const char *md = r.mode >= 0 ? mode_name(static_cast<Mode>(r.mode)) : "-";
            std::snprintf(buf, sizeof(buf), "%lld.%03lld,%d,%s,%s,%d,%d:%d,%s,%s",
                          static_cast<long long>(r.t_ns / 1000),
                          static_cast<long long>(r.t_ns % 1000), r.node, event_kind_name(r.kind),
                          fk, r.src, r.dsts[0], r.dsts[1], md, r.outcome);
            return buf;
        }

        // FNV-1a over the formatted records.
        std::uint64_t hash() const
        {
            std::uint64_t h = 1469598103934665603ULL;
            for (const auto &r : records)
            {
                for (char c : format(r))
                {
                    h ^= static_cast<std::uint8_t>(c);
                    h *= 1099511628211ULL;
                }
                h ^= static_cast<std::uint8_t>('\n');
                h *= 1099511628211ULL;
            }
            return h;
        }

        void write_csv(std::FILE *f) const
        {
            std::fputs("time_us,node,event_kind,frame_kind,src,dsts,mode,outcome\n", f);
            for (const auto &r : records)
            {
                std::fputs(format(r).c_str(), f);
                std::fputc('\n', f);
            }
        }
    };

    struct Metrics
    {
        long generated = 0;
        long delivered = 0;
        long dropped = 0;
        double delivered_bits = 0.0;
        Nanos end_time_ns = 0;
        std::vector<double> delay_us;
        std::array<long, 3> mode_count{0, 0, 0}; // DIRECT, COOP, ANCOL completed cycles
        long retx = 0;
        long detection_failures = 0;
        long rts_collisions = 0;
        long ctc_collisions = 0;
        long in_flight = 0; // packets still at HOL when the run stopped

        double throughput_bps() const
        {
            if (end_time_ns <= 0)
            {
                return 0.0;
            }
            return delivered_bits / (static_cast<double>(end_time_ns) * 1e-9);
        }

        double mean_delay_us() const
        {
            if (delay_us.empty())
            {
                return 0.0;
            }
            double s = 0.0;
            for (double d : delay_us)
            {
                s += d;
            }
            return s / static_cast<double>(delay_us.size());
        }

        double p95_delay_us() const
        {
            if (delay_us.empty())
            {
                return 0.0;
            }
            std::vector<double> v = delay_us;
            std::sort(v.begin(), v.end());
            const std::size_t idx =
                std::min(v.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * v.size())) - 0);
            return v[std::min(idx, v.size() - 1)];
        }

        long completed_cycles() const { return mode_count[0] + mode_count[1] + mode_count[2]; }
    };

    struct RunResult
    {
        Metrics metrics;
        Trace trace;
    };

    // Deterministic single-cell discrete-event simulator for the three MACs.
    class Simulator
    {
    public:
        explicit Simulator(ExperimentConfig cfg) : m_cfg(std::move(cfg))
        {
            m_cfg.validate();
            if (m_cfg.phy_fidelity == PhyFidelity::Rate && m_cfg.noise_var <= 0.0)
            {
                throw ConfigError("config: rate fidelity requires noise_var > 0");
            }

            m_slot = us_to_ns(m_cfg.slot_time_us());
            m_sifs = us_to_ns(m_cfg.sifs_us);
            m_difs = us_to_ns(m_cfg.difs_us);
            m_t_rts = us_to_ns(m_cfg.rts_us);
            m_t_cts = us_to_ns(m_cfg.cts_us);
            m_t_ack = us_to_ns(m_cfg.ack_us);
            m_t_ctc = us_to_ns(m_cfg.ctc_us);
            const int bps = Constellation::make(m_cfg.modulation).bits_per_symbol();
            m_symbols_per_packet = (m_cfg.packet_bits + bps - 1) / bps;
            m_t_data = us_to_ns(m_cfg.phy_preamble_us) +
                       static_cast<Nanos>(std::llround(static_cast<double>(m_symbols_per_packet) *
                                                       1e9 / m_cfg.bandwidth_hz));
            m_dict = Constellation::make(m_cfg.modulation);

            RngStream topo_rng(derive_seed(m_cfg.seed, rng_tag::topology));
            m_topology = build_topology(m_cfg.n_nodes, m_cfg.cell_radius_m, m_cfg.avg_snr_db,
                                        m_cfg.tx_power, std::max(m_cfg.noise_var, 1e-30),
                                        m_cfg.pathloss_exp, m_cfg.min_distance_m, topo_rng);
            m_links = LinkTable(m_cfg.n_nodes, m_cfg.reciprocity);
            m_backoff_rng = std::make_unique<RngStream>(derive_seed(m_cfg.seed, rng_tag::backoff));

            m_nodes.resize(static_cast<std::size_t>(m_cfg.n_nodes));
            for (int i = 0; i < m_cfg.n_nodes; ++i)
            {
                auto &n = m_nodes[static_cast<std::size_t>(i)];
                n.id = i;
                n.anfl = AnflTable(m_cfg.anfl_capacity);
                n.backoff.cw = m_cfg.cw_min;
                n.traffic_dst = -1;
                if (m_cfg.traffic == TrafficPattern::Pairs)
                {
                    n.traffic_dst = i ^ 1;
                }
                else if (i == 0)
                {
                    n.traffic_dst = 1;
                }
            }
        }

        RunResult run()
        {
            for (auto &n : m_nodes)
            {
                if (n.traffic_dst >= 0)
                {
                    refill_hol(n, 0);
                    n.backoff.counter = m_backoff_rng->uniform_int(0, n.backoff.cw);
                }
            }
            if (m_cfg.disassoc_node >= 0)
            {
                schedule_timer(us_to_ns(m_cfg.disassoc_time_ms * 1000.0), Timer::Disassociate,
                               m_cfg.disassoc_node);
            }
            start_contention(0);

            const Nanos t_max = static_cast<Nanos>(m_cfg.max_sim_time_s * 1e9);
            while (!m_queue.empty() && !m_done)
            {
                Event ev = m_queue.top();
                m_queue.pop();
                if (ev.t < m_now)
                {
                    throw std::logic_error("simulator: event dispatched out of order");
                }
                m_now = ev.t;
                if (m_now > t_max)
                {
                    throw std::runtime_error("simulator: exceeded max_sim_time_s before reaching the packet target");
                }
                dispatch(ev);
            }

            for (const auto &n : m_nodes)
            {
                if (n.hol.has_value())
                {
                    m_metrics.in_flight += 1;
                }
            }
            RunResult out;
            out.metrics = std::move(m_metrics);
            out.trace = std::move(m_trace);
            return out;
        }

        const Topology &topology() const { return m_topology; }

    private:
        enum class Timer
        {
            CtsTimeout,
            SenderDecision,
            RelayCtc,
            SenderFallback,
            CycleEnd,
            Disassociate,
        };

        struct Event
        {
            Nanos t = 0;
            int prio = 0;
            NodeId node = -1;
            std::uint64_t seq = 0;
            EventKind kind = EventKind::SlotTick;
            Frame frame;
            bool collided = false;
            Timer timer = Timer::CycleEnd;
            Mode mode = Mode::Direct;
            bool is_forward = false;

            bool operator>(const Event &o) const
            {
                if (t != o.t) return t > o.t;
                if (prio != o.prio) return prio > o.prio;
                if (node != o.node) return node > o.node;
                return seq > o.seq;
            }
        };

        static int kind_priority(EventKind k)
        {
            switch (k)
            {
            case EventKind::TxEnd: return 0;
            case EventKind::FrameDelivery: return 1;
            case EventKind::TimerExpiry: return 2;
            case EventKind::TxStart: return 3;
            case EventKind::SlotTick: return 4;
            }
            return 5;
        }

        struct ArmedRelay
        {
            NodeId id = -1;
            RelayDecision decision;
            bool cancelled = false;
        };

        struct Cycle
        {
            bool active = false;
            long index = 0;
            std::vector<NodeId> rts_senders;
            NodeId src = -1;
            NodeId dst = -1;
            bool cts_delivered = false;
            bool tone1 = false;
            bool tone2 = false;
            std::vector<ArmedRelay> armed;
            Nanos t_rc = 0;
            bool awaiting_ctc = false;
            std::optional<Nanos> ctc_start;
            bool ctc_collided = false;
            Mode mode = Mode::Direct;         // realized mode
            Mode granted_mode = Mode::Direct; // mode named by the CTC grant
            NodeId relay = -1;
            FlowRef flow2{-1, -1};
            bool secondary_active = false;
            int phase1_pending = 0;
            bool data_counted = false;
            double payload_rate_bps = 0.0; // selected rate after margin/floor (rate fidelity)
            Nanos phase_dur = 0;

            SymbolStream truth_a;
            SymbolStream truth_b;
            Observation obs_dir_d;   // at dst, phase 1
            Observation obs_dir_d2;  // at dst2, phase 1 (ANC-OL)
            std::vector<ComplexGain> relay_mixture; // amplified forward incl. relay noise
            double g_true = 0.0;

            bool outcome_a = false;
            bool outcome_b = false;
            bool acked_a = false;
            bool acked_b = false;
        };

        // ---- scheduling -------------------------------------------------

        void schedule(Event ev)
        {
            ev.seq = m_seq++;
            ev.prio = kind_priority(ev.kind);
            m_queue.push(std::move(ev));
        }

        void schedule_timer(Nanos t, Timer timer, NodeId node)
        {
            Event ev;
            ev.t = t;
            ev.node = node;
            ev.kind = EventKind::TimerExpiry;
            ev.timer = timer;
            schedule(std::move(ev));
        }

        void schedule_slot_tick(Nanos t)
        {
            Event ev;
            ev.t = t;
            ev.kind = EventKind::SlotTick;
            schedule(std::move(ev));
        }

        void schedule_tx(Nanos t, Frame frame, Mode mode, bool is_forward, bool collided)
        {
            Event ev;
            ev.t = t;
            ev.node = frame.src;
            ev.kind = EventKind::TxStart;
            ev.frame = std::move(frame);
            ev.mode = mode;
            ev.is_forward = is_forward;
            ev.collided = collided;
            schedule(std::move(ev));
        }

        void trace(Nanos t, NodeId node, EventKind kind, const Frame *frame, int mode,
                   const char *outcome)
        {
            TraceRecord r;
            r.t_ns = t;
            r.node = node;
            r.kind = kind;
            if (frame)
            {
                r.frame_kind = static_cast<int>(frame->kind);
                r.src = frame->src;
                for (std::size_t i = 0; i < frame->dsts.size() && i < 2; ++i)
                {
                    r.dsts[i] = frame->dsts[i];
                }
            }
            r.mode = mode;
            r.outcome = outcome;
            m_trace.records.push_back(r);
        }

        // ---- traffic ----------------------------------------------------

        void refill_hol(NodeState &n, Nanos now)
        {
            n.hol = PendingPacket{n.traffic_dst, m_cfg.packet_bits, now, 0};
            m_metrics.generated += 1;
        }

        void complete_packet(NodeState &n, Nanos now)
        {
            m_metrics.delivered += 1;
            m_metrics.delivered_bits += static_cast<double>(n.hol->bits);
            m_metrics.delay_us.push_back(static_cast<double>(now - n.hol->hol_entry_ns) / 1000.0);
            m_metrics.end_time_ns = now;
            n.packets_completed += 1;
            n.packets_since_rotation += 1;
            if (m_cfg.scenario == Scenario::S2Rotating &&
                n.packets_since_rotation >= m_cfg.rotation_period)
            {
                n.packets_since_rotation = 0;
                rotate_destination(n, now);
            }
            refill_hol(n, now);
            if (m_metrics.delivered >= m_cfg.n_packets)
            {
                m_done = true;
            }
        }

        void rotate_destination(NodeState &n, Nanos now)
        {
            NodeId next = (n.traffic_dst + 1) % m_cfg.n_nodes;
            if (next == n.id)
            {
                next = (next + 1) % m_cfg.n_nodes;
            }
            n.traffic_dst = next;
            trace(now, n.id, EventKind::TimerExpiry, nullptr, -1, "rotate");
        }

        void drop_packet(NodeState &n, Nanos now)
        {
            m_metrics.dropped += 1;
            trace(now, n.id, EventKind::TimerExpiry, nullptr, -1, "drop");
            refill_hol(n, now);
        }

        // Failed/collided attempt bookkeeping for one sender.
        void attempt_failed(NodeState &n, TxOutcome outcome, Nanos now)
        {
            const bool dropped = dcf_backoff(n.backoff, outcome,
                                             BackoffParams{m_cfg.cw_min, m_cfg.cw_max, m_cfg.retry_limit},
                                             *m_backoff_rng);
            if (dropped)
            {
                drop_packet(n, now);
            }
        }

        void attempt_succeeded(NodeState &n)
        {
            dcf_backoff(n.backoff, TxOutcome::Success,
                        BackoffParams{m_cfg.cw_min, m_cfg.cw_max, m_cfg.retry_limit}, *m_backoff_rng);
        }

        void note_attempt(NodeState &n)
        {
            if (n.hol->attempts > 0)
            {
                m_metrics.retx += 1;
            }
            n.hol->attempts += 1;
        }

        // ---- channel ----------------------------------------------------

        void resample_block()
        {
            RngStream rng(derive_seed(m_cfg.seed, rng_tag::fading, static_cast<std::uint64_t>(m_cycle.index)));
            m_links.resample([this](NodeId i, NodeId j) { return m_topology.avg_power(i, j); }, rng);
        }

        RngStream &est_rng()
        {
            return *m_est_rng;
        }

        ComplexGain measure(NodeId from, NodeId to, double extra_noise_scale = 1.0)
        {
            const double ps = m_cfg.pilot_snr_effective() / extra_noise_scale;
            if (m_cfg.noise_var <= 0.0)
            {
                return m_links.true_gain(from, to); // perfect CSI in the noiseless limit
            }
            return estimate_gain(m_links.true_gain(from, to), m_cfg.n_pilots, ps, est_rng());
        }

        ComplexGain measure_composite(ComplexGain true_composite, double noise_scale)
        {
            if (m_cfg.noise_var <= 0.0)
            {
                return true_composite;
            }
            const double ps = m_cfg.pilot_snr_effective() / noise_scale;
            return estimate_gain(true_composite, m_cfg.n_pilots, ps, est_rng());
        }

        // ---- contention ---------------------------------------------------

        void start_contention(Nanos idle_from)
        {
            if (m_done)
            {
                return;
            }
            apply_pending_disassociation(idle_from);
            m_contention = true;
            schedule_slot_tick(idle_from + m_difs);
        }

        bool is_contender(const NodeState &n) const
        {
            return n.associated && n.hol.has_value() &&
                   m_nodes[static_cast<std::size_t>(n.hol->dst)].associated;
        }

        void on_slot_tick(Nanos now)
        {
            if (!m_contention || m_done)
            {
                return;
            }
            trace(now, -1, EventKind::SlotTick, nullptr, -1, "");
            std::vector<NodeId> winners;
            for (auto &n : m_nodes)
            {
                if (is_contender(n) && n.backoff.counter == 0)
                {
                    winners.push_back(n.id);
                }
            }
            if (winners.empty())
            {
                for (auto &n : m_nodes)
                {
                    if (is_contender(n) && n.backoff.counter > 0)
                    {
                        n.backoff.counter -= 1;
                    }
                }
                schedule_slot_tick(now + m_slot);
                return;
            }
            m_contention = false;
            begin_cycle(now, winners);
        }

        void begin_cycle(Nanos now, const std::vector<NodeId> &winners)
        {
            m_cycle = Cycle{};
            m_cycle.active = true;
            m_cycle.index = m_cycle_count++;
            m_cycle.rts_senders = winners;
            resample_block();
            m_est_rng = std::make_unique<RngStream>(
                derive_seed(m_cfg.seed, rng_tag::estimate, static_cast<std::uint64_t>(m_cycle.index)));
            m_phy_rng = std::make_unique<RngStream>(
                derive_seed(m_cfg.seed, rng_tag::phy, static_cast<std::uint64_t>(m_cycle.index)));

            const bool collision = winners.size() > 1;
            if (collision)
            {
                m_metrics.rts_collisions += 1;
            }
            for (NodeId s : winners)
            {
                auto &n = m_nodes[static_cast<std::size_t>(s)];
                note_attempt(n);
                Frame rts;
                rts.kind = FrameKind::Rts;
                rts.src = s;
                rts.dsts = {n.hol->dst};
                rts.payload_bits = 0;
                rts.duration_ns = m_t_rts;
                schedule_tx(now, std::move(rts), Mode::Direct, false, collision);
            }
            if (collision)
            {
                // Senders time out waiting for a CTS that cannot come.
                schedule_timer(now + m_t_rts + m_sifs + m_t_cts + m_slot, Timer::CtsTimeout, -1);
            }
            else
            {
                m_cycle.src = winners[0];
                m_cycle.dst = m_nodes[static_cast<std::size_t>(winners[0])].hol->dst;
            }
        }

        // ---- frame handling ----------------------------------------------

        void on_tx_start(Event &ev)
        {
            // Relay CTC and busy-tone transmissions are conditional; anything
            // else transmits unconditionally.
            if (ev.frame.kind == FrameKind::BusyTone)
            {
                auto *armed = find_armed(ev.frame.src);
                if (armed == nullptr || armed->cancelled)
                {
                    return;
                }
                if (armed->decision.tone_slot == 2 && m_cycle.tone1)
                {
                    // An ANC-OL tone already claimed the round; COOP relays stand down.
                    armed->cancelled = true;
                    return;
                }
                if (armed->decision.tone_slot == 1)
                {
                    m_cycle.tone1 = true;
                }
                else
                {
                    m_cycle.tone2 = true;
                }
                trace(ev.t, ev.frame.src, EventKind::TxStart, &ev.frame, -1, "tone");
                Event end;
                end.t = ev.t + ev.frame.duration_ns;
                end.node = ev.frame.src;
                end.kind = EventKind::TxEnd;
                end.frame = ev.frame;
                schedule(std::move(end));
                return;
            }

            trace(ev.t, ev.frame.src, EventKind::TxStart, &ev.frame,
                  ev.frame.kind == FrameKind::Data ? static_cast<int>(ev.mode) : -1,
                  ev.is_forward ? "forward" : (ev.collided ? "collision" : ""));

            Event end;
            end.t = ev.t + ev.frame.duration_ns;
            end.node = ev.frame.src;
            end.kind = EventKind::TxEnd;
            end.frame = ev.frame;
            end.collided = ev.collided;
            schedule(end);

            Event del = end;
            del.kind = EventKind::FrameDelivery;
            del.mode = ev.mode;
            del.is_forward = ev.is_forward;
            schedule(std::move(del));
        }

        void on_relay_ctc_timer(Nanos now, NodeId relay_id)
        {
            auto *armed = find_armed(relay_id);
            if (armed == nullptr || armed->cancelled || !m_cycle.awaiting_ctc)
            {
                return;
            }
            if (m_cycle.ctc_start && *m_cycle.ctc_start < now)
            {
                // Overheard an earlier CTC: stop the T_RBKF timer.
                armed->cancelled = true;
                return;
            }
            if (m_cycle.ctc_start && *m_cycle.ctc_start == now)
            {
                m_cycle.ctc_collided = true;
            }
            else
            {
                m_cycle.ctc_start = now;
            }

            Frame ctc;
            ctc.kind = FrameKind::Ctc;
            ctc.src = relay_id;
            ctc.duration_ns = m_t_ctc;
            ctc.flows.push_back(FlowRef{m_cycle.src, m_cycle.dst});
            if (armed->decision.proposed == Mode::Ancol)
            {
                ctc.flows.push_back(*armed->decision.pair2);
                ctc.dsts = {m_cycle.src, armed->decision.pair2->src};
                ctc.granted_rate_bps = armed->decision.row.rate_ancol.value_or(0.0);
            }
            else
            {
                ctc.dsts = {m_cycle.src, m_cycle.dst};
                ctc.granted_rate_bps = armed->decision.row.rate_coop.value_or(0.0);
            }

            // Collision status is resolved at delivery (a same-slot peer may
            // still mark the start collided).
            trace(now, relay_id, EventKind::TxStart, &ctc, static_cast<int>(armed->decision.proposed), "");
            Event end;
            end.t = now + m_t_ctc;
            end.node = relay_id;
            end.kind = EventKind::TxEnd;
            end.frame = std::move(ctc);
            schedule(end);
            // Only the first CTC start produces the (single) delivery event.
            if (*m_cycle.ctc_start == now && !m_delivery_scheduled_for_ctc)
            {
                Event del = end;
                del.kind = EventKind::FrameDelivery;
                schedule(std::move(del));
                m_delivery_scheduled_for_ctc = true;
            }
        }

        ArmedRelay *find_armed(NodeId id)
        {
            for (auto &a : m_cycle.armed)
            {
                if (a.id == id)
                {
                    return &a;
                }
            }
            return nullptr;
        }

        void on_frame_delivery(Event &ev)
        {
            const Frame &f = ev.frame;
            switch (f.kind)
            {
            case FrameKind::Rts: on_rts_delivery(ev); break;
            case FrameKind::Cts: on_cts_delivery(ev); break;
            case FrameKind::Ctc: on_ctc_delivery(ev); break;
            case FrameKind::Data: on_data_delivery(ev); break;
            case FrameKind::Ack: on_ack_delivery(ev); break;
            default: break;
            }
        }

        void on_rts_delivery(Event &ev)
        {
            if (ev.collided)
            {
                trace(ev.t, -1, EventKind::FrameDelivery, &ev.frame, -1, "collision");
                return;
            }
            trace(ev.t, ev.frame.dsts[0], EventKind::FrameDelivery, &ev.frame, -1, "ok");
            for (auto &n : m_nodes)
            {
                if (n.id == ev.frame.src || !n.associated)
                {
                    continue;
                }
                on_overhear(n, ev.frame, measure(ev.frame.src, n.id), ev.t);
            }
            auto &dst = m_nodes[static_cast<std::size_t>(ev.frame.dsts[0])];
            if (!dst.associated)
            {
                schedule_timer(ev.t + m_sifs + m_t_cts + m_slot, Timer::CtsTimeout, -1);
                return;
            }
            Frame cts = build_cts(dst, ev.frame, ev.t);
            cts.duration_ns = m_t_cts;
            schedule_tx(ev.t + m_sifs, std::move(cts), Mode::Direct, false, false);
        }

        void on_cts_delivery(Event &ev)
        {
            trace(ev.t, ev.frame.dsts[0], EventKind::FrameDelivery, &ev.frame, -1, "ok");
            m_cycle.cts_delivered = true;
            for (auto &n : m_nodes)
            {
                if (n.id == ev.frame.src || !n.associated)
                {
                    continue;
                }
                on_overhear(n, ev.frame, measure(ev.frame.src, n.id), ev.t);
            }

            if (!m_cfg.mode_coop() && !m_cfg.mode_ancol())
            {
                // Plain DCF: data follows the CTS after a SIFS.
                schedule_data_direct(ev.t + m_sifs);
                return;
            }

            // Relay candidates evaluate their rate rows (Fig. 3 relay_overhear).
            RelayEvalParams p;
            p.bandwidth_hz = m_cfg.bandwidth_hz;
            p.tx_power = m_cfg.tx_power;
            p.noise_var = m_cfg.noise_var;
            p.payload_bits = m_cfg.packet_bits;
            p.n_relay_slots = m_cfg.n_relay_slots;
            p.coop_form = m_cfg.coop_rate_form;
            p.reciprocity = m_cfg.reciprocity;
            p.rule = m_cfg.relay_decision;
            p.ancol_enabled = m_cfg.mode_ancol();
            p.overhead = m_cfg.overhead_profile();
            p.now_ns = ev.t;
            p.backlog_staleness_ns = m_cfg.backlog_staleness_ms * 1'000'000;
            p.estimate_ttl_ns =
                m_cfg.staleness == StalenessModel::Frozen ? -1 : m_cfg.estimate_ttl_ms * 1'000'000;

            const int legacy = m_cfg.legacy_extra_slot ? 1 : 0;
            const Nanos w1 = ev.t + m_sifs + static_cast<Nanos>(legacy) * m_slot;
            const Nanos w2 = w1 + m_slot;
            if (m_cfg.noise_var > 0.0)
            {
                for (auto &n : m_nodes)
                {
                    if (n.id == m_cycle.src || n.id == m_cycle.dst || !n.associated)
                    {
                        continue;
                    }
                    auto d = evaluate_relay(n, FlowRef{m_cycle.src, m_cycle.dst}, p);
                    if (!d)
                    {
                        continue;
                    }
                    m_cycle.armed.push_back(ArmedRelay{n.id, *d, false});
                    Frame tone;
                    tone.kind = FrameKind::BusyTone;
                    tone.src = n.id;
                    tone.duration_ns = m_slot;
                    schedule_tx(d->tone_slot == 1 ? w1 : w2, std::move(tone), Mode::Direct, false, false);
                }
            }
            schedule_timer(w2 + m_slot, Timer::SenderDecision, m_cycle.src);
        }

        void on_sender_decision(Nanos now)
        {
            if (!m_cycle.tone1 && !m_cycle.tone2)
            {
                // No relay spoke up: direct transmission, at exactly this slot edge.
                schedule_data_direct(now);
                return;
            }
            m_cycle.t_rc = now;
            m_cycle.awaiting_ctc = true;
            for (const auto &a : m_cycle.armed)
            {
                if (!a.cancelled)
                {
                    schedule_timer(now + static_cast<Nanos>(a.decision.backoff_slots) * m_slot,
                                   Timer::RelayCtc, a.id);
                }
            }
            schedule_timer(now + static_cast<Nanos>(m_cfg.n_relay_slots + 1) * m_slot,
                           Timer::SenderFallback, m_cycle.src);
        }

        void on_sender_fallback(Nanos now)
        {
            if (!m_cycle.awaiting_ctc || m_cycle.ctc_start.has_value())
            {
                return; // a CTC arrived or is in flight; its delivery decides
            }
            m_cycle.awaiting_ctc = false;
            trace(now, m_cycle.src, EventKind::TimerExpiry, nullptr, -1, "fallback");
            schedule_data_direct(now);
        }

        void on_ctc_delivery(Event &ev)
        {
            m_cycle.awaiting_ctc = false;
            if (m_cycle.ctc_collided)
            {
                trace(ev.t, -1, EventKind::FrameDelivery, &ev.frame, -1, "collision");
                m_metrics.ctc_collisions += 1;
                schedule_data_direct(ev.t + m_sifs);
                return;
            }
            trace(ev.t, ev.frame.dsts[0], EventKind::FrameDelivery, &ev.frame, -1, "ok");
            for (auto &n : m_nodes)
            {
                if (n.id == ev.frame.src || !n.associated)
                {
                    continue;
                }
                on_overhear(n, ev.frame, measure(ev.frame.src, n.id), ev.t);
            }

            // The CTC winner must hold the smallest slot count (and thus, for
            // a strict win, the maximal normalized rate gain) among armed relays.
            if (const ArmedRelay *winner = find_armed(ev.frame.src))
            {
                for (const auto &a : m_cycle.armed)
                {
                    if (!a.cancelled && a.decision.backoff_slots < winner->decision.backoff_slots)
                    {
                        throw std::logic_error("simulator: CTC winner did not have minimal T_RBKF");
                    }
                }
            }

            m_cycle.relay = ev.frame.src;
            m_cycle.payload_rate_bps = select_payload_rate(ev.frame.granted_rate_bps);
            if (ev.frame.flows.size() == 2)
            {
                m_cycle.granted_mode = Mode::Ancol;
                m_cycle.flow2 = ev.frame.flows[1];
                auto &s2 = m_nodes[static_cast<std::size_t>(m_cycle.flow2.src)];
                m_cycle.secondary_active = s2.associated && s2.hol.has_value() &&
                                           s2.hol->dst == m_cycle.flow2.dst;
                m_cycle.mode = m_cycle.secondary_active ? Mode::Ancol : Mode::Coop;
            }
            else
            {
                m_cycle.granted_mode = Mode::Coop;
                m_cycle.mode = Mode::Coop;
            }
            schedule_data_phase1(ev.t + m_sifs);
        }

        // ---- data phases ---------------------------------------------------

        Frame make_data(NodeId src, NodeId dst, Nanos duration)
        {
            Frame f;
            f.kind = FrameKind::Data;
            f.src = src;
            f.dsts = {dst};
            f.payload_bits = m_cfg.packet_bits;
            f.duration_ns = duration;
            return f;
        }

        // Link adaptation (rate fidelity): the payload is carried at the
        // margin-backed estimated rate, floored at the slowest usable rate.
        double select_payload_rate(double rate_est) const
        {
            return std::max(m_cfg.rate_margin * rate_est, m_cfg.min_rate_mbps * 1e6);
        }

        // Airtime of one data phase carrying `bits` at `rate` (plus preamble).
        Nanos phase_airtime(double bits, double rate) const
        {
            return us_to_ns(m_cfg.phy_preamble_us) +
                   static_cast<Nanos>(std::llround(bits / rate * 1e9));
        }

        SymbolStream random_stream(NodeId src)
        {
            const int bps = m_dict.bits_per_symbol();
            std::vector<std::uint8_t> bits(static_cast<std::size_t>(m_symbols_per_packet) *
                                           static_cast<std::size_t>(bps));
            for (auto &b : bits)
            {
                b = static_cast<std::uint8_t>(m_phy_rng->uniform_int(0, 1));
            }
            return modulate(bits, m_dict, src);
        }

        void schedule_data_direct(Nanos t)
        {
            m_cycle.mode = Mode::Direct;
            Nanos dur = m_t_data;
            if (m_cfg.phy_fidelity == PhyFidelity::Symbol)
            {
                m_cycle.truth_a = random_stream(m_cycle.src);
            }
            else
            {
                // The sender picks its rate from the CSI fed back in the CTS.
                const auto &s = m_nodes[static_cast<std::size_t>(m_cycle.src)];
                double rate_est = 0.0;
                if (auto e = s.est.get(LinkKey{m_cycle.src, m_cycle.dst}))
                {
                    rate_est = r_dir(m_cfg.bandwidth_hz, m_cfg.tx_power, gain_power(e->gain),
                                     m_cfg.noise_var);
                }
                m_cycle.payload_rate_bps = select_payload_rate(rate_est);
                dur = phase_airtime(static_cast<double>(m_cfg.packet_bits), m_cycle.payload_rate_bps);
            }
            schedule_tx(t, make_data(m_cycle.src, m_cycle.dst, dur), Mode::Direct, false, false);
        }

        void schedule_data_phase1(Nanos t)
        {
            Nanos dur = m_t_data;
            if (m_cfg.phy_fidelity == PhyFidelity::Symbol)
            {
                m_cycle.truth_a = random_stream(m_cycle.src);
                if (m_cycle.mode == Mode::Ancol)
                {
                    m_cycle.truth_b = random_stream(m_cycle.flow2.src);
                }
            }
            else
            {
                // COOP's estimated rate already carries the half prelog, so L
                // bits occupy L/rate across the two phases; ANC-OL's sum rate
                // carries 2L across two phases of L/rate each. Timing follows
                // the grant (a silent secondary does not shorten the phases).
                const double bits_per_phase = m_cycle.granted_mode == Mode::Ancol
                                                  ? static_cast<double>(m_cfg.packet_bits)
                                                  : static_cast<double>(m_cfg.packet_bits) / 2.0;
                dur = phase_airtime(bits_per_phase, m_cycle.payload_rate_bps);
            }
            m_cycle.phase_dur = dur;
            m_cycle.phase1_pending = m_cycle.mode == Mode::Ancol ? 2 : 1;
            // The primary's attempt was counted at its RTS; the secondary's
            // service begins here.
            schedule_tx(t, make_data(m_cycle.src, m_cycle.dst, dur), m_cycle.mode, false, false);
            if (m_cycle.mode == Mode::Ancol)
            {
                note_attempt(m_nodes[static_cast<std::size_t>(m_cycle.flow2.src)]);
                schedule_tx(t, make_data(m_cycle.flow2.src, m_cycle.flow2.dst, dur), Mode::Ancol,
                            false, false);
            }
        }

        void on_data_delivery(Event &ev)
        {
            if (ev.is_forward)
            {
                on_forward_delivery(ev);
                return;
            }
            if (m_cycle.mode == Mode::Direct)
            {
                const bool ok = adjudicate_direct(ev.t);
                trace(ev.t, m_cycle.dst, EventKind::FrameDelivery, &ev.frame,
                      static_cast<int>(Mode::Direct), ok ? "ok" : "fail");
                count_cycle_mode(Mode::Direct);
                m_cycle.outcome_a = ok;
                if (!ok)
                {
                    m_metrics.detection_failures += 1;
                }
                schedule_ack_phase(ev.t);
                return;
            }

            // COOP phase 1 or ANC-OL phase 1.
            trace(ev.t, ev.frame.dsts[0], EventKind::FrameDelivery, &ev.frame,
                  static_cast<int>(m_cycle.mode), "phase1");
            m_cycle.phase1_pending -= 1;
            if (m_cycle.phase1_pending > 0)
            {
                return;
            }
            prepare_phase1_observations(ev.t);
            // The relay's amplified forward; addressed to the primary receiver,
            // heard by both.
            schedule_tx(ev.t + m_sifs, make_data(m_cycle.relay, m_cycle.dst, m_cycle.phase_dur),
                        m_cycle.mode, true, false);
        }

        void prepare_phase1_observations(Nanos now)
        {
            const NodeId s = m_cycle.src;
            const NodeId d = m_cycle.dst;
            const NodeId r = m_cycle.relay;
            const bool anc = m_cycle.mode == Mode::Ancol;
            const NodeId s2 = anc ? m_cycle.flow2.src : -1;
            const NodeId d2 = anc ? m_cycle.flow2.dst : -1;

            // Relay output power normalization from measured incident power.
            const double gamma_sr = gain_power(m_links.true_gain(s, r));
            const double gamma_s2r = anc ? gain_power(m_links.true_gain(s2, r)) : 0.0;
            m_cycle.g_true = std::sqrt(m_cfg.tx_power /
                                       (m_cfg.tx_power * (gamma_sr + gamma_s2r) + m_cfg.noise_var));

            if (m_cfg.phy_fidelity != PhyFidelity::Symbol)
            {
                return;
            }
            NoiseModel noise{m_cfg.noise_var, m_cfg.bandwidth_hz};
            const double sp = std::sqrt(m_cfg.tx_power);

            SymbolStream zero;
            zero.symbols.assign(m_cycle.truth_a.symbols.size(), ComplexGain{0.0, 0.0});
            const SymbolStream &xb = anc ? m_cycle.truth_b : zero;
            const ComplexGain h_cross_d = anc ? m_links.true_gain(s2, d) : ComplexGain{0.0, 0.0};

            m_cycle.obs_dir_d = compose_direct(m_cycle.truth_a, xb, m_links.true_gain(s, d),
                                               h_cross_d, m_cfg.tx_power, noise, *m_phy_rng);
            if (anc)
            {
                m_cycle.obs_dir_d2 = compose_direct(m_cycle.truth_a, xb, m_links.true_gain(s, d2),
                                                    m_links.true_gain(s2, d2), m_cfg.tx_power, noise,
                                                    *m_phy_rng);
            }

            // The relay's amplified mixture is shared by every phase-2 receiver.
            const ComplexGain h_sr = m_links.true_gain(s, r);
            const ComplexGain h_s2r = anc ? m_links.true_gain(s2, r) : ComplexGain{0.0, 0.0};
            m_cycle.relay_mixture.resize(m_cycle.truth_a.symbols.size());
            for (std::size_t i = 0; i < m_cycle.relay_mixture.size(); ++i)
            {
                ComplexGain y = sp * h_sr * m_cycle.truth_a.symbols[i];
                if (anc)
                {
                    y += sp * h_s2r * xb.symbols[i];
                }
                if (noise.variance > 0.0)
                {
                    y += m_phy_rng->complex_gaussian(noise.variance / 2.0);
                }
                m_cycle.relay_mixture[i] = m_cycle.g_true * y;
            }

            // Receivers refresh their direct estimates from the data preambles
            // (this cycle's fading block).
            auto &nd = m_nodes[static_cast<std::size_t>(d)];
            nd.est.put(LinkKey{s, d}, measure(s, d), now);
            if (anc)
            {
                nd.est.put(LinkKey{s2, d}, measure(s2, d), now);
                auto &nd2 = m_nodes[static_cast<std::size_t>(d2)];
                nd2.est.put(LinkKey{s, d2}, measure(s, d2), now);
                nd2.est.put(LinkKey{s2, d2}, measure(s2, d2), now);
            }
        }

        Observation receive_forward(NodeId receiver)
        {
            Observation out;
            out.kind = ObservationKind::Relayed;
            const ComplexGain h_rd = m_links.true_gain(m_cycle.relay, receiver);
            out.samples.resize(m_cycle.relay_mixture.size());
            for (std::size_t i = 0; i < out.samples.size(); ++i)
            {
                ComplexGain y = h_rd * m_cycle.relay_mixture[i];
                if (m_cfg.noise_var > 0.0)
                {
                    y += m_phy_rng->complex_gaussian(m_cfg.noise_var / 2.0);
                }
                out.samples[i] = y;
            }
            return out;
        }

        void on_forward_delivery(Event &ev)
        {
            const NodeId s = m_cycle.src;
            const NodeId d = m_cycle.dst;
            const NodeId r = m_cycle.relay;
            const bool anc = m_cycle.mode == Mode::Ancol;

            if (anc)
            {
                adjudicate_ancol();
            }
            else
            {
                m_cycle.outcome_a = adjudicate_coop(s, d, r);
            }
            const char *oc = anc ? (m_cycle.outcome_a ? (m_cycle.outcome_b ? "ok+ok" : "ok+fail")
                                                      : (m_cycle.outcome_b ? "fail+ok" : "fail+fail"))
                                 : (m_cycle.outcome_a ? "ok" : "fail");
            trace(ev.t, d, EventKind::FrameDelivery, &ev.frame, static_cast<int>(m_cycle.mode), oc);
            count_cycle_mode(m_cycle.mode);
            if (!m_cycle.outcome_a)
            {
                m_metrics.detection_failures += 1;
            }
            if (anc && !m_cycle.outcome_b)
            {
                m_metrics.detection_failures += 1;
            }
            schedule_ack_phase(ev.t);
        }

        void count_cycle_mode(Mode m)
        {
            if (!m_cycle.data_counted)
            {
                m_cycle.data_counted = true;
                m_metrics.mode_count[static_cast<std::size_t>(m)] += 1;
            }
        }

        // ---- adjudication ---------------------------------------------------

        bool adjudicate_direct(Nanos now)
        {
            const NodeId s = m_cycle.src;
            const NodeId d = m_cycle.dst;
            if (m_cfg.phy_fidelity == PhyFidelity::Rate)
            {
                const double rate = r_dir(m_cfg.bandwidth_hz, m_cfg.tx_power,
                                          gain_power(m_links.true_gain(s, d)), m_cfg.noise_var);
                return payload_rate() <= rate;
            }
            NoiseModel noise{m_cfg.noise_var, m_cfg.bandwidth_hz};
            SymbolStream zero;
            zero.symbols.assign(m_cycle.truth_a.symbols.size(), ComplexGain{0.0, 0.0});
            Observation y = compose_direct(m_cycle.truth_a, zero, m_links.true_gain(s, d),
                                           ComplexGain{0.0, 0.0}, m_cfg.tx_power, noise, *m_phy_rng);
            auto &nd = m_nodes[static_cast<std::size_t>(d)];
            nd.est.put(LinkKey{s, d}, measure(s, d), now);
            const ComplexGain h_est = nd.est.get(LinkKey{s, d})->gain;
            SingleBranch branch{&y, h_est, 1.0};
            SymbolStream det = ml_single_detect(std::span<const SingleBranch>(&branch, 1),
                                                m_cfg.tx_power, m_dict);
            return stream_equal(det, m_cycle.truth_a);
        }

        bool adjudicate_coop(NodeId s, NodeId d, NodeId r)
        {
            const double g = m_cycle.g_true;
            if (m_cfg.phy_fidelity == PhyFidelity::Rate)
            {
                const double rate = r_coop(m_cfg.bandwidth_hz, m_cfg.tx_power,
                                           gain_power(m_links.true_gain(s, d)),
                                           gain_power(m_links.true_gain(s, r)),
                                           gain_power(m_links.true_gain(r, d)), g, m_cfg.noise_var,
                                           m_cfg.coop_rate_form);
                return payload_rate() / 2.0 <= rate;
            }
            Observation y_rel = receive_forward(d);
            auto &nd = m_nodes[static_cast<std::size_t>(d)];
            const ComplexGain h1_est = nd.est.get(LinkKey{s, d})->gain;
            const double gamma_rd = gain_power(m_links.true_gain(r, d));
            const double scale = 1.0 + gamma_rd * g * g;
            const ComplexGain eff_true = m_links.true_gain(s, r) * m_links.true_gain(r, d) * g;
            const ComplexGain eff_est = measure_composite(eff_true, scale);
            const double w_rel = m_cfg.ml_weighted ? 1.0 / scale : 1.0;
            const std::array<SingleBranch, 2> branches{SingleBranch{&m_cycle.obs_dir_d, h1_est, 1.0},
                                                       SingleBranch{&y_rel, eff_est, w_rel}};
            SymbolStream det = ml_single_detect(branches, m_cfg.tx_power, m_dict);
            return stream_equal(det, m_cycle.truth_a);
        }

        void adjudicate_ancol()
        {
            const NodeId s = m_cycle.src;
            const NodeId d = m_cycle.dst;
            const NodeId r = m_cycle.relay;
            const NodeId s2 = m_cycle.flow2.src;
            const NodeId d2 = m_cycle.flow2.dst;
            const double g = m_cycle.g_true;

            if (m_cfg.phy_fidelity == PhyFidelity::Rate)
            {
                const double side1 = r_ancol(m_cfg.bandwidth_hz, m_cfg.tx_power,
                                             m_links.true_gain(s, d), m_links.true_gain(s, r),
                                             m_links.true_gain(r, d), m_links.true_gain(s2, r),
                                             m_links.true_gain(s2, d), g, m_cfg.noise_var);
                const double side2 = r_ancol(m_cfg.bandwidth_hz, m_cfg.tx_power,
                                             m_links.true_gain(s2, d2), m_links.true_gain(s2, r),
                                             m_links.true_gain(r, d2), m_links.true_gain(s, r),
                                             m_links.true_gain(s, d2), g, m_cfg.noise_var);
                const bool ok = payload_rate() <= std::min(side1, side2);
                m_cycle.outcome_a = ok;
                m_cycle.outcome_b = ok;
                return;
            }

            m_cycle.outcome_a = ancol_decode_at(d, /*wants_stream_a=*/true);
            m_cycle.outcome_b = ancol_decode_at(d2, /*wants_stream_a=*/false);
        }

        bool ancol_decode_at(NodeId rx, bool wants_stream_a)
        {
            const NodeId s = m_cycle.src;
            const NodeId r = m_cycle.relay;
            const NodeId s2 = m_cycle.flow2.src;
            const double g = m_cycle.g_true;
            Observation y_rel = receive_forward(rx);
            const Observation &y_dir = wants_stream_a ? m_cycle.obs_dir_d : m_cycle.obs_dir_d2;

            auto &n = m_nodes[static_cast<std::size_t>(rx)];
            JointDetectParams p;
            p.tx_power = m_cfg.tx_power;
            p.dir_a = n.est.get(LinkKey{s, rx})->gain;
            p.dir_b = n.est.get(LinkKey{s2, rx})->gain;
            const double gamma_rd = gain_power(m_links.true_gain(r, rx));
            const double scale = 1.0 + gamma_rd * g * g;
            p.rel_a = measure_composite(m_links.true_gain(s, r) * m_links.true_gain(r, rx) * g, scale);
            p.rel_b = measure_composite(m_links.true_gain(s2, r) * m_links.true_gain(r, rx) * g, scale);
            p.weighted = m_cfg.ml_weighted;
            p.relayed_noise_scale = scale;

            JointDetectResult res = ml_joint_detect(y_dir, y_rel, p, m_dict, m_dict);
            if (res.degenerate)
            {
                return false;
            }
            return wants_stream_a ? stream_equal(res.stream_a, m_cycle.truth_a)
                                  : stream_equal(res.stream_b, m_cycle.truth_b);
        }

        // Raw bit rate at which a fixed-modulation data frame carries payload.
        double payload_rate() const
        {
            return static_cast<double>(m_dict.bits_per_symbol()) * m_cfg.bandwidth_hz;
        }

        // ---- acks and cycle end ---------------------------------------------

        void schedule_ack_phase(Nanos now)
        {
            const bool anc = m_cycle.mode == Mode::Ancol;
            const Nanos w1 = now + m_sifs;
            if (m_cycle.outcome_a)
            {
                Frame ack;
                ack.kind = FrameKind::Ack;
                ack.src = m_cycle.dst;
                ack.dsts = {m_cycle.src};
                ack.duration_ns = m_t_ack;
                schedule_tx(w1, std::move(ack), m_cycle.mode, false, false);
            }
            if (anc)
            {
                const Nanos w2 = w1 + m_t_ack + m_sifs;
                if (m_cycle.outcome_b)
                {
                    Frame ack;
                    ack.kind = FrameKind::Ack;
                    ack.src = m_cycle.flow2.dst;
                    ack.dsts = {m_cycle.flow2.src};
                    ack.duration_ns = m_t_ack;
                    schedule_tx(w2, std::move(ack), m_cycle.mode, false, false);
                }
                schedule_timer(w2 + m_t_ack, Timer::CycleEnd, -1);
            }
            else
            {
                schedule_timer(w1 + m_t_ack, Timer::CycleEnd, -1);
            }
        }

        void on_ack_delivery(Event &ev)
        {
            trace(ev.t, ev.frame.dsts[0], EventKind::FrameDelivery, &ev.frame, -1, "ok");
            auto &sender = m_nodes[static_cast<std::size_t>(ev.frame.dsts[0])];
            complete_packet(sender, ev.t);
        }

        void on_cycle_end(Nanos now)
        {
            if (m_cycle.active)
            {
                auto &primary = m_nodes[static_cast<std::size_t>(m_cycle.src)];
                if (m_cycle.outcome_a)
                {
                    attempt_succeeded(primary);
                }
                else
                {
                    attempt_failed(primary, TxOutcome::Failure, now);
                }
                if (m_cycle.mode == Mode::Ancol)
                {
                    auto &secondary = m_nodes[static_cast<std::size_t>(m_cycle.flow2.src)];
                    if (m_cycle.outcome_b)
                    {
                        attempt_succeeded(secondary);
                    }
                    else
                    {
                        attempt_failed(secondary, TxOutcome::Failure, now);
                    }
                }
            }
            m_cycle = Cycle{};
            m_cycle.index = m_cycle_count;
            m_delivery_scheduled_for_ctc = false;
            trace(now, -1, EventKind::TimerExpiry, nullptr, -1, "cycle_end");
            start_contention(now);
        }

        void on_cts_timeout(Nanos now)
        {
            if (m_cycle.cts_delivered)
            {
                return;
            }
            for (NodeId s : m_cycle.rts_senders)
            {
                attempt_failed(m_nodes[static_cast<std::size_t>(s)], TxOutcome::Collision, now);
            }
            m_cycle = Cycle{};
            m_cycle.index = m_cycle_count;
            m_delivery_scheduled_for_ctc = false;
            trace(now, -1, EventKind::TimerExpiry, nullptr, -1, "cts_timeout");
            start_contention(now);
        }

        void apply_pending_disassociation(Nanos now)
        {
            if (!m_pending_disassoc)
            {
                return;
            }
            m_pending_disassoc = false;
            const NodeId gone = m_cfg.disassoc_node;
            auto &g = m_nodes[static_cast<std::size_t>(gone)];
            g.associated = false;
            g.hol.reset();
            g.est.clear();
            g.anfl.clear();
            g.last_rts.clear();
            for (auto &n : m_nodes)
            {
                if (n.id != gone)
                {
                    n.disassociate_peer(gone);
                }
            }
            trace(now, gone, EventKind::TimerExpiry, nullptr, -1, "disassociate");
        }

        void dispatch(Event &ev)
        {
            switch (ev.kind)
            {
            case EventKind::SlotTick:
                on_slot_tick(ev.t);
                break;
            case EventKind::TxStart:
                on_tx_start(ev);
                break;
            case EventKind::TxEnd:
                trace(ev.t, ev.frame.src, EventKind::TxEnd, &ev.frame, -1, "");
                break;
            case EventKind::FrameDelivery:
                on_frame_delivery(ev);
                break;
            case EventKind::TimerExpiry:
                switch (ev.timer)
                {
                case Timer::CtsTimeout: on_cts_timeout(ev.t); break;
                case Timer::SenderDecision:
                    trace(ev.t, ev.node, EventKind::TimerExpiry, nullptr, -1, "decision");
                    on_sender_decision(ev.t);
                    break;
                case Timer::RelayCtc: on_relay_ctc_timer(ev.t, ev.node); break;
                case Timer::SenderFallback: on_sender_fallback(ev.t); break;
                case Timer::CycleEnd: on_cycle_end(ev.t); break;
                case Timer::Disassociate: m_pending_disassoc = true; break;
                }
                break;
            }
        }

        // ---- members ------------------------------------------------------

        ExperimentConfig m_cfg;
        Topology m_topology;
        LinkTable m_links;
        std::vector<NodeState> m_nodes;
        Constellation m_dict;

        Nanos m_slot = 0, m_sifs = 0, m_difs = 0;
        Nanos m_t_rts = 0, m_t_cts = 0, m_t_ack = 0, m_t_ctc = 0, m_t_data = 0;
        long m_symbols_per_packet = 0;

        std::priority_queue<Event, std::vector<Event>, std::greater<>> m_queue;
        std::uint64_t m_seq = 0;
        Nanos m_now = 0;
        bool m_done = false;
        bool m_contention = false;
        bool m_pending_disassoc = false;
        bool m_delivery_scheduled_for_ctc = false;
        long m_cycle_count = 0;
        Cycle m_cycle;

        std::unique_ptr<RngStream> m_backoff_rng;
        std::unique_ptr<RngStream> m_est_rng;
        std::unique_ptr<RngStream> m_phy_rng;

        Metrics m_metrics;
        Trace m_trace;
    };

    inline RunResult run_simulation(const ExperimentConfig &cfg)
    {
        Simulator sim(cfg);
        return sim.run();
    }

    // Independent metric reconstruction from a trace (throughput, delays and
    // the mode histogram); checked against the engine's online metrics.
    inline Metrics collect(const Trace &trace, const ExperimentConfig &cfg)
    {
        Metrics m;
        std::map<NodeId, Nanos> last_completion;
        std::map<Nanos, int> data_cycles_at; // dedup concurrent ANC-OL data starts
        for (const auto &r : trace.records)
        {
            if (r.kind == EventKind::TxStart && r.frame_kind == static_cast<int>(FrameKind::Data) &&
                std::string_view(r.outcome) != "forward")
            {
                auto [it, fresh] = data_cycles_at.emplace(r.t_ns, r.mode);
                if (fresh)
                {
                    m.mode_count[static_cast<std::size_t>(r.mode)] += 1;
                }
            }
            else if (r.kind == EventKind::FrameDelivery &&
                     r.frame_kind == static_cast<int>(FrameKind::Ack) &&
                     std::string_view(r.outcome) == "ok")
            {
                const NodeId sender = r.dsts[0];
                const Nanos prev = last_completion.count(sender) ? last_completion[sender] : 0;
                m.delay_us.push_back(static_cast<double>(r.t_ns - prev) / 1000.0);
                last_completion[sender] = r.t_ns;
                m.delivered += 1;
                m.delivered_bits += static_cast<double>(cfg.packet_bits);
                m.end_time_ns = std::max(m.end_time_ns, r.t_ns);
            }
            else if (r.kind == EventKind::TimerExpiry && std::string_view(r.outcome) == "drop")
            {
                last_completion[r.node] = r.t_ns;
                m.dropped += 1;
            }
        }
        return m;
    }
}
