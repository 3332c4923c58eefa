#pragma once

#include "cancmac/config.hpp"
#include "cancmac/engine.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cancmac
{
    enum class SweepAxis
    {
        Nodes,
        Snr,
        PacketBits,
    };

    inline const char *axis_name(SweepAxis a)
    {
        switch (a)
        {
        case SweepAxis::Nodes: return "nodes";
        case SweepAxis::Snr: return "snr";
        case SweepAxis::PacketBits: return "packet_bits";
        }
        return "?";
    }

    inline ExperimentConfig apply_axis(ExperimentConfig cfg, SweepAxis axis, double value)
    {
        switch (axis)
        {
        case SweepAxis::Nodes: cfg.n_nodes = static_cast<int>(value); break;
        case SweepAxis::Snr: cfg.avg_snr_db = value; break;
        case SweepAxis::PacketBits: cfg.packet_bits = static_cast<long>(value); break;
        }
        return cfg;
    }

    struct SweepRow
    {
        Protocol protocol = Protocol::CancMac;
        SweepAxis axis = SweepAxis::Nodes;
        double axis_value = 0.0;
        std::uint64_t seed = 0;
        Metrics metrics;
        ExperimentConfig config;
    };

    inline std::string format_sweep_row(const SweepRow &r)
    {
        const long cycles = r.metrics.completed_cycles();
        auto share = [&](std::size_t i)
        { return cycles > 0 ? static_cast<double>(r.metrics.mode_count[i]) / static_cast<double>(cycles) : 0.0; };
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%llu,%.6f,%.3f,%.3f,%.6f,%.6f,%.6f,%ld",
                      protocol_name(r.protocol), axis_name(r.axis), r.axis_value,
                      static_cast<unsigned long long>(r.seed), r.metrics.throughput_bps(),
                      r.metrics.mean_delay_us(), r.metrics.p95_delay_us(), share(0), share(1),
                      share(2), r.metrics.retx);
        return buf;
    }

    inline constexpr const char *sweep_csv_header =
        "protocol,axis_name,axis_value,seed,throughput_bps,mean_delay_us,p95_delay_us,"
        "share_direct,share_coop,share_ancol,retx_count";

    // Runs protocols x values x seeds. Rows come back in deterministic sorted
    // order regardless of which worker finished first.
    inline std::vector<SweepRow> run_sweep(const ExperimentConfig &base, SweepAxis axis,
                                           const std::vector<double> &values,
                                           const std::vector<Protocol> &protocols,
                                           const std::vector<std::uint64_t> &seeds,
                                           unsigned n_threads = 0)
    {
        if (values.empty())
        {
            throw std::invalid_argument("sweep: values must be nonempty");
        }
        std::vector<SweepRow> rows;
        for (Protocol p : protocols)
        {
            for (double v : values)
            {
                for (std::uint64_t s : seeds)
                {
                    SweepRow row;
                    row.protocol = p;
                    row.axis = axis;
                    row.axis_value = v;
                    row.seed = s;
                    row.config = apply_axis(base, axis, v);
                    row.config.protocol = p;
                    row.config.seed = s;
                    row.config.coop_enabled_set = false;
                    row.config.ancol_enabled_set = false;
                    rows.push_back(std::move(row));
                }
            }
        }

        if (n_threads == 0)
        {
            n_threads = std::max(1u, std::thread::hardware_concurrency());
        }
        std::atomic<std::size_t> next{0};
        std::vector<std::string> errors(rows.size());
        auto worker = [&]()
        {
            while (true)
            {
                const std::size_t i = next.fetch_add(1);
                if (i >= rows.size())
                {
                    return;
                }
                try
                {
                    rows[i].metrics = run_simulation(rows[i].config).metrics;
                }
                catch (const std::exception &e)
                {
                    errors[i] = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < n_threads; ++t)
        {
            pool.emplace_back(worker);
        }
        worker();
        for (auto &t : pool)
        {
            t.join();
        }
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            if (!errors[i].empty())
            {
                throw std::runtime_error("sweep: run failed (" + errors[i] + ") for config:\n" +
                                         config_echo_text(rows[i].config, "  "));
            }
        }
        return rows;
    }

    // Main CSV: echoed base config header plus one row per (protocol, value, seed).
    inline void write_sweep_csv(std::ostream &os, const std::vector<SweepRow> &rows,
                                const ExperimentConfig &base)
    {
        os << "# cancmac sweep v1\n";
        os << config_echo_text(base);
        os << sweep_csv_header << "\n";
        for (const auto &r : rows)
        {
            os << format_sweep_row(r) << "\n";
        }
    }

    struct SummaryRow
    {
        Protocol protocol;
        SweepAxis axis;
        double axis_value;
        std::size_t n_seeds = 0;
        double throughput_mean = 0.0;
        double throughput_ci95 = 0.0;
        double delay_mean = 0.0;
        double delay_ci95 = 0.0;
    };

    inline std::vector<SummaryRow> summarize(const std::vector<SweepRow> &rows)
    {
        std::vector<SummaryRow> out;
        for (const auto &r : rows)
        {
            SummaryRow *s = nullptr;
            for (auto &cand : out)
            {
                if (cand.protocol == r.protocol && cand.axis == r.axis &&
                    cand.axis_value == r.axis_value)
                {
                    s = &cand;
                    break;
                }
            }
            if (s == nullptr)
            {
                out.push_back(SummaryRow{r.protocol, r.axis, r.axis_value, 0, 0, 0, 0, 0});
                s = &out.back();
            }
            // First pass accumulates sums; finished below.
            s->n_seeds += 1;
            s->throughput_mean += r.metrics.throughput_bps();
            s->delay_mean += r.metrics.mean_delay_us();
        }
        for (auto &s : out)
        {
            s.throughput_mean /= static_cast<double>(s.n_seeds);
            s.delay_mean /= static_cast<double>(s.n_seeds);
        }
        // Second pass for the normal-approximation 95% CI half-width.
        for (auto &s : out)
        {
            double var_t = 0.0, var_d = 0.0;
            for (const auto &r : rows)
            {
                if (r.protocol == s.protocol && r.axis == s.axis && r.axis_value == s.axis_value)
                {
                    var_t += std::pow(r.metrics.throughput_bps() - s.throughput_mean, 2);
                    var_d += std::pow(r.metrics.mean_delay_us() - s.delay_mean, 2);
                }
            }
            if (s.n_seeds > 1)
            {
                var_t /= static_cast<double>(s.n_seeds - 1);
                var_d /= static_cast<double>(s.n_seeds - 1);
                s.throughput_ci95 = 1.96 * std::sqrt(var_t / static_cast<double>(s.n_seeds));
                s.delay_ci95 = 1.96 * std::sqrt(var_d / static_cast<double>(s.n_seeds));
            }
        }
        return out;
    }

    inline void write_summary_csv(std::ostream &os, const std::vector<SummaryRow> &rows)
    {
        os << "protocol,axis_name,axis_value,n_seeds,throughput_mean_bps,throughput_ci95_bps,"
              "delay_mean_us,delay_ci95_us\n";
        for (const auto &s : rows)
        {
            char buf[224];
            std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%zu,%.6f,%.6f,%.3f,%.3f",
                          protocol_name(s.protocol), axis_name(s.axis), s.axis_value, s.n_seeds,
                          s.throughput_mean, s.throughput_ci95, s.delay_mean, s.delay_ci95);
            os << buf << "\n";
        }
    }
}
