// Command-line front end: single runs and experiment sweeps with CSV output.

#include "cancmac/cancmac.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace
{
    using namespace cancmac;

    struct CommonFlags
    {
        std::string config_path;
        std::string protocol;
        int nodes = -1;
        double snr_db = std::numeric_limits<double>::quiet_NaN();
        long packet_bits = -1;
        std::string scenario;
        long packets = -1;
        std::string fidelity;
        std::string extra; // repeated key=value overrides
        std::vector<std::string> set_kv;
    };

    void add_common_flags(CLI::App *cmd, CommonFlags &f)
    {
        cmd->add_option("--config", f.config_path, "flat key=value config file");
        cmd->add_option("--protocol", f.protocol, "DOT11 | COOP_MAC | CANC_MAC");
        cmd->add_option("--nodes", f.nodes, "number of nodes in the cell");
        cmd->add_option("--snr-db", f.snr_db, "average cell-edge SNR in dB");
        cmd->add_option("--packet-bits", f.packet_bits, "payload size in bits");
        cmd->add_option("--scenario", f.scenario, "s1 | s2")->check(CLI::IsMember({"s1", "s2"}));
        cmd->add_option("--packets", f.packets, "packet completions per run");
        cmd->add_option("--fidelity", f.fidelity, "symbol | rate")
            ->check(CLI::IsMember({"symbol", "rate"}));
        cmd->add_option("--set", f.set_kv, "extra key=value override (repeatable)");
    }

    // Layered resolution: defaults < file < flags.
    ExperimentConfig resolve_config(const CommonFlags &f)
    {
        ExperimentConfig cfg;
        if (!f.config_path.empty())
        {
            cfg = parse_config_file(f.config_path, cfg);
        }
        if (!f.protocol.empty())
        {
            apply_setting(cfg, "protocol", f.protocol);
        }
        if (f.nodes >= 0)
        {
            cfg.n_nodes = f.nodes;
        }
        if (!std::isnan(f.snr_db))
        {
            cfg.avg_snr_db = f.snr_db;
        }
        if (f.packet_bits >= 0)
        {
            cfg.packet_bits = f.packet_bits;
        }
        if (!f.scenario.empty())
        {
            apply_setting(cfg, "scenario", f.scenario);
        }
        if (f.packets >= 0)
        {
            cfg.n_packets = f.packets;
        }
        if (!f.fidelity.empty())
        {
            apply_setting(cfg, "fidelity", f.fidelity);
        }
        for (const auto &kv : f.set_kv)
        {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
            {
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            }
            apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }

    std::vector<std::uint64_t> parse_seeds(const std::string &spec)
    {
        std::vector<std::uint64_t> seeds;
        std::stringstream ss(spec);
        std::string part;
        while (std::getline(ss, part, ','))
        {
            const auto dots = part.find("..");
            if (dots != std::string::npos)
            {
                const std::uint64_t lo = std::stoull(part.substr(0, dots));
                const std::uint64_t hi = std::stoull(part.substr(dots + 2));
                for (std::uint64_t s = lo; s <= hi; ++s)
                {
                    seeds.push_back(s);
                }
            }
            else if (!part.empty())
            {
                seeds.push_back(std::stoull(part));
            }
        }
        if (seeds.empty())
        {
            throw ConfigError("--seeds produced no seeds: '" + spec + "'");
        }
        return seeds;
    }

    int cmd_run(const CommonFlags &flags, const std::string &seeds_spec, const std::string &out_path,
                const std::string &trace_path, bool check_invariants)
    {
        ExperimentConfig base = resolve_config(flags);
        std::ostream *os = &std::cout;
        std::ofstream file;
        if (!out_path.empty())
        {
            file.open(out_path);
            if (!file)
            {
                throw ConfigError("cannot open output file '" + out_path + "'");
            }
            os = &file;
        }

        *os << "# cancmac run v1\n" << config_echo_text(base);
        *os << "seed,throughput_bps,mean_delay_us,p95_delay_us,delivered,dropped,"
               "share_direct,share_coop,share_ancol,retx_count,detection_failures,trace_hash\n";
        for (std::uint64_t seed : parse_seeds(seeds_spec))
        {
            ExperimentConfig cfg = base;
            cfg.seed = seed;
            RunResult res = run_simulation(cfg);
            const long cycles = res.metrics.completed_cycles();
            auto share = [&](std::size_t i)
            {
                return cycles > 0 ? static_cast<double>(res.metrics.mode_count[i]) /
                                        static_cast<double>(cycles)
                                  : 0.0;
            };
            char buf[320];
            std::snprintf(buf, sizeof(buf),
                          "%llu,%.6f,%.3f,%.3f,%ld,%ld,%.6f,%.6f,%.6f,%ld,%ld,%016llx",
                          static_cast<unsigned long long>(seed), res.metrics.throughput_bps(),
                          res.metrics.mean_delay_us(), res.metrics.p95_delay_us(),
                          res.metrics.delivered, res.metrics.dropped, share(0), share(1), share(2),
                          res.metrics.retx, res.metrics.detection_failures,
                          static_cast<unsigned long long>(res.trace.hash()));
            *os << buf << "\n";

            if (!trace_path.empty())
            {
                std::FILE *tf = std::fopen(trace_path.c_str(), "w");
                if (tf == nullptr)
                {
                    throw ConfigError("cannot open trace file '" + trace_path + "'");
                }
                res.trace.write_csv(tf);
                std::fclose(tf);
            }
            if (check_invariants)
            {
                const auto violations = check_trace(res.trace, cfg);
                for (const auto &v : violations)
                {
                    std::cerr << "invariant violation: " << v << "\n";
                }
                if (!violations.empty())
                {
                    return 1;
                }
                std::cerr << "seed " << seed << ": trace invariants ok\n";
            }
        }
        return 0;
    }

    int cmd_sweep(const CommonFlags &flags, const std::string &axis_name_str,
                  const std::string &values_spec, const std::string &seeds_spec,
                  const std::vector<std::string> &protocol_names, const std::string &out_path,
                  unsigned jobs)
    {
        ExperimentConfig base = resolve_config(flags);

        SweepAxis axis;
        if (axis_name_str == "nodes") axis = SweepAxis::Nodes;
        else if (axis_name_str == "snr") axis = SweepAxis::Snr;
        else if (axis_name_str == "packet_bits") axis = SweepAxis::PacketBits;
        else throw ConfigError("unknown sweep axis '" + axis_name_str + "'");

        std::vector<double> values;
        std::stringstream ss(values_spec);
        std::string part;
        while (std::getline(ss, part, ','))
        {
            if (!part.empty())
            {
                values.push_back(std::stod(part));
            }
        }

        std::vector<Protocol> protocols;
        if (protocol_names.empty())
        {
            protocols = {Protocol::Dot11, Protocol::CoopMac, Protocol::CancMac};
        }
        else
        {
            for (const auto &p : protocol_names)
            {
                protocols.push_back(parse_protocol(p));
            }
        }

        const auto rows = run_sweep(base, axis, values, protocols, parse_seeds(seeds_spec), jobs);

        std::ostream *os = &std::cout;
        std::ofstream file;
        if (!out_path.empty())
        {
            file.open(out_path);
            if (!file)
            {
                throw ConfigError("cannot open output file '" + out_path + "'");
            }
            os = &file;
        }
        write_sweep_csv(*os, rows, base);

        if (!out_path.empty())
        {
            std::ofstream sf(out_path + ".summary.csv");
            write_summary_csv(sf, summarize(rows));
        }
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"cancmac: single-cell WLAN simulator comparing DCF, COOP-MAC and CANC-MAC"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    std::string run_seeds = "1";
    std::string run_out, run_trace;
    bool run_check = false;
    CLI::App *run = app.add_subcommand("run", "run one configuration (one row per seed)");
    add_common_flags(run, run_flags);
    run->add_option("--seeds", run_seeds, "seed list: '1,2,3' or '1..10'");
    run->add_option("--out", run_out, "metrics CSV path (default stdout)");
    run->add_option("--trace", run_trace, "write the per-event trace CSV here");
    run->add_flag("--check-invariants", run_check, "run trace conformance checks");

    CommonFlags sweep_flags;
    std::string sweep_axis = "nodes";
    std::string sweep_values = "2,4,8,16";
    std::string sweep_seeds = "1..10";
    std::vector<std::string> sweep_protocols;
    std::string sweep_out;
    unsigned sweep_jobs = 0;
    CLI::App *sweep = app.add_subcommand("sweep", "sweep an axis over the three protocols");
    add_common_flags(sweep, sweep_flags);
    sweep->add_option("--axis", sweep_axis, "nodes | snr | packet_bits")
        ->check(CLI::IsMember({"nodes", "snr", "packet_bits"}));
    sweep->add_option("--values", sweep_values, "comma-separated axis values");
    sweep->add_option("--seeds", sweep_seeds, "seed list: '1,2,3' or '1..10'");
    sweep->add_option("--protocols", sweep_protocols, "protocol subset (default: all three)");
    sweep->add_option("--out", sweep_out, "CSV path; also writes <out>.summary.csv");
    sweep->add_option("--jobs", sweep_jobs, "worker threads (0 = hardware)");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (run->parsed())
        {
            return cmd_run(run_flags, run_seeds, run_out, run_trace, run_check);
        }
        return cmd_sweep(sweep_flags, sweep_axis, sweep_values, sweep_seeds, sweep_protocols,
                         sweep_out, sweep_jobs);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
