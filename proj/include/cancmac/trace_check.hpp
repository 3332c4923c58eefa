#pragma once

#include "cancmac/config.hpp"
#include "cancmac/engine.hpp"

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace cancmac
{
    // Protocol-conformance assertions over a run trace. Returns one message
    // per violation; empty means the trace conforms.
    inline std::vector<std::string> check_trace(const Trace &trace, const ExperimentConfig &cfg)
    {
        std::vector<std::string> violations;
        auto violate = [&](Nanos t, const std::string &msg)
        {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "t=%lldns: ", static_cast<long long>(t));
            violations.push_back(buf + msg);
        };

        const Nanos slot = us_to_ns(cfg.slot_time_us());
        const Nanos sifs = us_to_ns(cfg.sifs_us);
        const Nanos legacy = cfg.legacy_extra_slot ? slot : 0;
        const bool modes_on = cfg.mode_coop() || cfg.mode_ancol();

        // Clock must never run backwards.
        Nanos prev = 0;
        for (const auto &r : trace.records)
        {
            if (r.t_ns < prev)
            {
                violate(r.t_ns, "event out of order");
            }
            prev = r.t_ns;
        }

        // Segment the trace into contention rounds at cycle_end / cts_timeout
        // markers and check each completed round.
        struct Round
        {
            std::vector<const TraceRecord *> recs;
            bool complete = false;
        };
        std::vector<Round> rounds(1);
        for (const auto &r : trace.records)
        {
            rounds.back().recs.push_back(&r);
            if (r.kind == EventKind::TimerExpiry && (std::string_view(r.outcome) == "cycle_end" ||
                                                     std::string_view(r.outcome) == "cts_timeout"))
            {
                rounds.back().complete = true;
                rounds.emplace_back();
            }
        }

        for (const auto &round : rounds)
        {
            int cts_ok = 0;
            Nanos cts_end = -1;
            bool tone1 = false, tone2 = false;
            bool saw_rts = false, saw_ctc = false, ctc_clean = false;
            int ctc_mode = -1;
            int ancol_data = 0;
            int forwards = 0;
            Nanos first_data_start = -1;
            int data_frames = 0;

            for (const TraceRecord *r : round.recs)
            {
                const std::string_view oc(r->outcome);
                if (r->kind == EventKind::FrameDelivery &&
                    r->frame_kind == static_cast<int>(FrameKind::Cts) && oc == "ok")
                {
                    cts_ok += 1;
                }
                if (r->kind == EventKind::TxEnd && r->frame_kind == static_cast<int>(FrameKind::Cts))
                {
                    cts_end = r->t_ns;
                }
                if (r->kind == EventKind::TxStart && r->frame_kind == static_cast<int>(FrameKind::Rts))
                {
                    saw_rts = true;
                }
                if (r->kind == EventKind::TxStart &&
                    r->frame_kind == static_cast<int>(FrameKind::BusyTone) && cts_end >= 0)
                {
                    if (r->t_ns == cts_end + sifs + legacy)
                    {
                        tone1 = true;
                    }
                    else if (r->t_ns == cts_end + sifs + legacy + slot)
                    {
                        tone2 = true;
                    }
                    else
                    {
                        violate(r->t_ns, "busy tone outside both tone slots");
                    }
                }
                if (r->frame_kind == static_cast<int>(FrameKind::Ctc))
                {
                    if (r->kind == EventKind::TxStart)
                    {
                        saw_ctc = true;
                        if (ctc_mode < 0)
                        {
                            ctc_mode = r->mode;
                        }
                        if (r->dsts[0] < 0 || r->dsts[1] < 0)
                        {
                            violate(r->t_ns, "CTC without exactly two destination addresses");
                        }
                    }
                    if (r->kind == EventKind::FrameDelivery && oc == "ok")
                    {
                        ctc_clean = true;
                    }
                }
                if (r->kind == EventKind::TxStart && r->frame_kind == static_cast<int>(FrameKind::Data))
                {
                    data_frames += 1;
                    if (first_data_start < 0)
                    {
                        first_data_start = r->t_ns;
                    }
                    if (oc == "forward")
                    {
                        forwards += 1;
                    }
                    else if (r->mode == static_cast<int>(Mode::Ancol))
                    {
                        ancol_data += 1;
                        if (!saw_rts || cts_ok == 0 || !tone1 || !saw_ctc)
                        {
                            violate(r->t_ns, "ANCOL data without preceding RTS, CTS, slot-1 tone and CTC");
                        }
                    }
                }
            }

            if (cts_ok > 1)
            {
                violate(round.recs.front()->t_ns, "more than one completed RTS/CTS in a round");
            }
            if (tone1 && ctc_clean && ctc_mode != static_cast<int>(Mode::Ancol))
            {
                violate(cts_end, "slot-1 tone followed by a non-ANCOL CTC");
            }
            if (!tone1 && tone2 && ctc_clean && ctc_mode != static_cast<int>(Mode::Coop))
            {
                violate(cts_end, "slot-2 tone followed by a non-COOP CTC");
            }
            if (ancol_data > 0 && ancol_data != 2)
            {
                violate(cts_end, "ANCOL phase 1 without exactly two overlapping data frames");
            }
            if (ancol_data == 2 && round.complete && forwards != 1)
            {
                violate(cts_end, "ANCOL cycle without exactly one relay forward");
            }
            // No tone in either window => direct data at exactly
            // CTS_end + SIFS + 2 slots (when relaying is enabled at all).
            if (modes_on && round.complete && cts_ok == 1 && !tone1 && !tone2 && !saw_ctc &&
                data_frames > 0 && cts_end >= 0)
            {
                if (first_data_start != cts_end + sifs + legacy + 2 * slot)
                {
                    violate(first_data_start, "direct data not at CTS_end + SIFS + 2 slots");
                }
            }
        }
        return violations;
    }
}
