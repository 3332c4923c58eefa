#pragma once

#include "cancmac/mac.hpp"
#include "cancmac/phy.hpp"
#include "cancmac/rate.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cancmac
{
    enum class Protocol
    {
        Dot11,
        CoopMac,
        CancMac,
    };

    inline const char *protocol_name(Protocol p)
    {
        switch (p)
        {
        case Protocol::Dot11: return "DOT11";
        case Protocol::CoopMac: return "COOP_MAC";
        case Protocol::CancMac: return "CANC_MAC";
        }
        return "?";
    }

    enum class Scenario
    {
        S1FixedPairs,
        S2Rotating,
    };

    enum class PhyFidelity
    {
        Symbol,
        Rate,
    };

    enum class TrafficPattern
    {
        Pairs,      // bidirectional pairs (2k <-> 2k+1), every node backlogged
        SingleFlow, // node 0 -> node 1 only
    };

    enum class StalenessModel
    {
        Frozen,
        Decay,
    };

    struct ConfigError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    struct ExperimentConfig
    {
        Protocol protocol = Protocol::CancMac;
        int n_nodes = 8;
        long packet_bits = 4000;
        double avg_snr_db = 20.0;
        Scenario scenario = Scenario::S1FixedPairs;
        long rotation_period = 500;
        std::uint64_t seed = 1;
        long n_packets = 10000;
        PhyFidelity phy_fidelity = PhyFidelity::Symbol;
        Modulation modulation = Modulation::Qpsk;
        int n_relay_slots = 10;
        std::size_t anfl_capacity = 20;
        TrafficPattern traffic = TrafficPattern::Pairs;

        // Physical layer
        double bandwidth_hz = 20e6;
        double noise_var = 1e-9;
        double tx_power = 1.0;
        double cell_radius_m = 50.0;
        double pathloss_exp = 3.0;
        double min_distance_m = 1.0;
        bool reciprocity = true;
        int n_pilots = 8;
        double pilot_snr = 0.0; // 0 = auto (P / sigma^2)

        // Timing (microseconds)
        double sifs_us = 16.0;
        double difs_us = 34.0;
        double slot_us = 0.0; // 0 = derived: (DIFS - SIFS) / 2
        double rts_us = 52.0;
        double cts_us = 44.0;
        double ack_us = 44.0;
        double ctc_us = 47.0;
        double phy_preamble_us = 20.0;

        // MAC parameters
        int cw_min = 16;
        int cw_max = 1024;
        int retry_limit = 7;
        bool legacy_extra_slot = false;
        long backlog_staleness_ms = 50;
        StalenessModel staleness = StalenessModel::Frozen;
        long estimate_ttl_ms = 50;
        RelayDecisionRule relay_decision = RelayDecisionRule::Simple;
        CoopRateForm coop_rate_form = CoopRateForm::Paper;
        bool ml_weighted = false;
        bool coop_enabled = true;  // protocol-derived unless overridden
        bool ancol_enabled = true;
        bool coop_enabled_set = false;
        bool ancol_enabled_set = false;

        // Rate-fidelity link adaptation: payload rate = rate_margin * estimated
        // rate, floored at min_rate_mbps (the slowest usable rate).
        double rate_margin = 0.8;
        double min_rate_mbps = 1.0;

        // Optional scripted disassociation (off when node < 0).
        int disassoc_node = -1;
        double disassoc_time_ms = 0.0;

        // Safety cap on simulated time.
        double max_sim_time_s = 300.0;

        double slot_time_us() const
        {
            return slot_us > 0.0 ? slot_us : (difs_us - sifs_us) / 2.0;
        }

        bool mode_coop() const
        {
            if (coop_enabled_set)
            {
                return coop_enabled;
            }
            return protocol != Protocol::Dot11;
        }

        bool mode_ancol() const
        {
            if (ancol_enabled_set)
            {
                return ancol_enabled;
            }
            return protocol == Protocol::CancMac;
        }

        double pilot_snr_effective() const
        {
            return pilot_snr > 0.0 ? pilot_snr : tx_power / noise_var;
        }

        OverheadProfile overhead_profile() const
        {
            OverheadProfile p;
            p.t_rts = rts_us * 1e-6;
            p.t_cts = cts_us * 1e-6;
            p.t_ctc = ctc_us * 1e-6;
            p.t_sifs = sifs_us * 1e-6;
            p.t_slot = slot_time_us() * 1e-6;
            p.t_rbkf = 0.0;
            return p;
        }

        void validate() const
        {
            auto fail = [](const std::string &msg) { throw ConfigError("config: " + msg); };
            if (n_nodes < 2) fail("nodes must be >= 2 (got " + std::to_string(n_nodes) + ")");
            if (packet_bits < 1) fail("packet_bits must be >= 1 (got " + std::to_string(packet_bits) + ")");
            if (n_packets < 1) fail("packets must be >= 1 (got " + std::to_string(n_packets) + ")");
            if (n_relay_slots < 1) fail("relay_slots must be >= 1");
            if (rotation_period < 1) fail("rotation_period must be >= 1");
            if (bandwidth_hz <= 0) fail("bandwidth_hz must be > 0");
            if (noise_var <= 0) fail("noise_var must be > 0");
            if (tx_power <= 0) fail("tx_power must be > 0");
            if (cell_radius_m < 0) fail("cell_radius_m must be >= 0");
            if (min_distance_m <= 0) fail("min_distance_m must be > 0");
            if (n_pilots < 1) fail("n_pilots must be >= 1");
            if (cw_min < 1 || cw_max < cw_min) fail("require 1 <= cw_min <= cw_max");
            if (retry_limit < 0) fail("retry_limit must be >= 0");
            if (sifs_us <= 0 || difs_us <= sifs_us) fail("require 0 < sifs_us < difs_us");
            if (slot_time_us() <= 0) fail("slot time must be > 0");
            if (rts_us <= 0 || cts_us <= 0 || ack_us <= 0 || ctc_us <= 0) fail("frame times must be > 0");
            if (max_sim_time_s <= 0) fail("max_sim_time_s must be > 0");
            if (rate_margin <= 0) fail("rate_margin must be > 0");
            if (min_rate_mbps <= 0) fail("min_rate_mbps must be > 0");
            if (anfl_capacity < 1) fail("anfl_capacity must be >= 1");
            if (traffic == TrafficPattern::Pairs && n_nodes % 2 != 0)
                fail("pairs traffic requires an even node count");
            if (disassoc_node >= n_nodes) fail("disassoc_node out of range");
        }
    };

    namespace detail
    {
        inline std::string trim(const std::string &s)
        {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos)
            {
                return "";
            }
            const auto e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        }

        inline bool parse_bool(const std::string &v, const std::string &key)
        {
            if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
            if (v == "0" || v == "false" || v == "off" || v == "no") return false;
            throw ConfigError("config: bad boolean for '" + key + "': " + v);
        }

        template <typename T>
        T parse_num(const std::string &v, const std::string &key)
        {
            std::istringstream iss(v);
            T out{};
            iss >> out;
            if (iss.fail() || !(iss >> std::ws).eof())
            {
                throw ConfigError("config: bad value for '" + key + "': " + v);
            }
            return out;
        }
    }

    inline Protocol parse_protocol(const std::string &v)
    {
        if (v == "DOT11" || v == "dot11") return Protocol::Dot11;
        if (v == "COOP_MAC" || v == "coop_mac" || v == "coop") return Protocol::CoopMac;
        if (v == "CANC_MAC" || v == "canc_mac" || v == "canc") return Protocol::CancMac;
        throw ConfigError("config: unknown protocol '" + v + "'");
    }

    // Applies one key=value setting. Unknown keys are named diagnostics.
    inline void apply_setting(ExperimentConfig &c, const std::string &key, const std::string &value)
    {
        using detail::parse_bool;
        using detail::parse_num;
        if (key == "protocol") c.protocol = parse_protocol(value);
        else if (key == "nodes") c.n_nodes = parse_num<int>(value, key);
        else if (key == "packet_bits") c.packet_bits = parse_num<long>(value, key);
        else if (key == "snr_db") c.avg_snr_db = parse_num<double>(value, key);
        else if (key == "scenario")
        {
            if (value == "s1") c.scenario = Scenario::S1FixedPairs;
            else if (value == "s2") c.scenario = Scenario::S2Rotating;
            else throw ConfigError("config: unknown scenario '" + value + "' (expected s1|s2)");
        }
        else if (key == "rotation_period") c.rotation_period = parse_num<long>(value, key);
        else if (key == "seed") c.seed = parse_num<std::uint64_t>(value, key);
        else if (key == "packets") c.n_packets = parse_num<long>(value, key);
        else if (key == "fidelity")
        {
            if (value == "symbol") c.phy_fidelity = PhyFidelity::Symbol;
            else if (value == "rate") c.phy_fidelity = PhyFidelity::Rate;
            else throw ConfigError("config: unknown fidelity '" + value + "' (expected symbol|rate)");
        }
        else if (key == "modulation")
        {
            if (value == "bpsk") c.modulation = Modulation::Bpsk;
            else if (value == "qpsk") c.modulation = Modulation::Qpsk;
            else throw ConfigError("config: unknown modulation '" + value + "'");
        }
        else if (key == "relay_slots") c.n_relay_slots = parse_num<int>(value, key);
        else if (key == "anfl_capacity") c.anfl_capacity = parse_num<std::size_t>(value, key);
        else if (key == "traffic")
        {
            if (value == "pairs") c.traffic = TrafficPattern::Pairs;
            else if (value == "single") c.traffic = TrafficPattern::SingleFlow;
            else throw ConfigError("config: unknown traffic '" + value + "' (expected pairs|single)");
        }
        else if (key == "bandwidth_hz") c.bandwidth_hz = parse_num<double>(value, key);
        else if (key == "noise_var") c.noise_var = parse_num<double>(value, key);
        else if (key == "tx_power") c.tx_power = parse_num<double>(value, key);
        else if (key == "cell_radius_m") c.cell_radius_m = parse_num<double>(value, key);
        else if (key == "pathloss_exp") c.pathloss_exp = parse_num<double>(value, key);
        else if (key == "min_distance_m") c.min_distance_m = parse_num<double>(value, key);
        else if (key == "reciprocity") c.reciprocity = parse_bool(value, key);
        else if (key == "n_pilots") c.n_pilots = parse_num<int>(value, key);
        else if (key == "pilot_snr") c.pilot_snr = parse_num<double>(value, key);
        else if (key == "sifs_us") c.sifs_us = parse_num<double>(value, key);
        else if (key == "difs_us") c.difs_us = parse_num<double>(value, key);
        else if (key == "slot_us") c.slot_us = parse_num<double>(value, key);
        else if (key == "rts_us") c.rts_us = parse_num<double>(value, key);
        else if (key == "cts_us") c.cts_us = parse_num<double>(value, key);
        else if (key == "ack_us") c.ack_us = parse_num<double>(value, key);
        else if (key == "ctc_us") c.ctc_us = parse_num<double>(value, key);
        else if (key == "phy_preamble_us") c.phy_preamble_us = parse_num<double>(value, key);
        else if (key == "cw_min") c.cw_min = parse_num<int>(value, key);
        else if (key == "cw_max") c.cw_max = parse_num<int>(value, key);
        else if (key == "retry_limit") c.retry_limit = parse_num<int>(value, key);
        else if (key == "legacy_extra_slot") c.legacy_extra_slot = parse_bool(value, key);
        else if (key == "backlog_staleness_ms") c.backlog_staleness_ms = parse_num<long>(value, key);
        else if (key == "staleness")
        {
            if (value == "frozen") c.staleness = StalenessModel::Frozen;
            else if (value == "decay") c.staleness = StalenessModel::Decay;
            else throw ConfigError("config: unknown staleness '" + value + "' (expected frozen|decay)");
        }
        else if (key == "estimate_ttl_ms") c.estimate_ttl_ms = parse_num<long>(value, key);
        else if (key == "relay_decision")
        {
            if (value == "simple") c.relay_decision = RelayDecisionRule::Simple;
            else if (value == "overhead_aware") c.relay_decision = RelayDecisionRule::OverheadAware;
            else throw ConfigError("config: unknown relay_decision '" + value + "'");
        }
        else if (key == "coop_rate_form")
        {
            if (value == "paper") c.coop_rate_form = CoopRateForm::Paper;
            else if (value == "mrc") c.coop_rate_form = CoopRateForm::Mrc;
            else throw ConfigError("config: unknown coop_rate_form '" + value + "'");
        }
        else if (key == "ml_weighted") c.ml_weighted = parse_bool(value, key);
        else if (key == "coop_enabled")
        {
            c.coop_enabled = parse_bool(value, key);
            c.coop_enabled_set = true;
        }
        else if (key == "ancol_enabled")
        {
            c.ancol_enabled = parse_bool(value, key);
            c.ancol_enabled_set = true;
        }
        else if (key == "rate_margin") c.rate_margin = parse_num<double>(value, key);
        else if (key == "min_rate_mbps") c.min_rate_mbps = parse_num<double>(value, key);
        else if (key == "disassoc_node") c.disassoc_node = parse_num<int>(value, key);
        else if (key == "disassoc_time_ms") c.disassoc_time_ms = parse_num<double>(value, key);
        else if (key == "max_sim_time_s") c.max_sim_time_s = parse_num<double>(value, key);
        else throw ConfigError("config: unknown key '" + key + "'");
    }

    // Flat key=value text; '#' starts a comment. Lines of the echoed form
    // "# key=value" in a config file are treated as comments, so an echo
    // header must be un-commented (the sweep CSV reproducer does this).
    inline void apply_config_text(ExperimentConfig &c, const std::string &text)
    {
        std::istringstream iss(text);
        std::string line;
        int lineno = 0;
        while (std::getline(iss, line))
        {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos)
            {
                line = line.substr(0, hash);
            }
            line = detail::trim(line);
            if (line.empty())
            {
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
            {
                throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: " + line);
            }
            apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        }
    }

    inline ExperimentConfig parse_config_file(const std::string &path, ExperimentConfig base = {})
    {
        std::ifstream in(path);
        if (!in)
        {
            throw ConfigError("config: cannot open file '" + path + "'");
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        apply_config_text(base, ss.str());
        return base;
    }

    // Full resolved-config echo; parsing these lines back reproduces the run.
    inline std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig &c)
    {
        auto num = [](double v)
        {
            std::ostringstream ss;
            ss.precision(17);
            ss << v;
            return ss.str();
        };
        std::vector<std::pair<std::string, std::string>> kv;
        kv.emplace_back("protocol", protocol_name(c.protocol));
        kv.emplace_back("nodes", std::to_string(c.n_nodes));
        kv.emplace_back("packet_bits", std::to_string(c.packet_bits));
        kv.emplace_back("snr_db", num(c.avg_snr_db));
        kv.emplace_back("scenario", c.scenario == Scenario::S1FixedPairs ? "s1" : "s2");
        kv.emplace_back("rotation_period", std::to_string(c.rotation_period));
        kv.emplace_back("seed", std::to_string(c.seed));
        kv.emplace_back("packets", std::to_string(c.n_packets));
        kv.emplace_back("fidelity", c.phy_fidelity == PhyFidelity::Symbol ? "symbol" : "rate");
        kv.emplace_back("modulation", c.modulation == Modulation::Bpsk ? "bpsk" : "qpsk");
        kv.emplace_back("relay_slots", std::to_string(c.n_relay_slots));
        kv.emplace_back("anfl_capacity", std::to_string(c.anfl_capacity));
        kv.emplace_back("traffic", c.traffic == TrafficPattern::Pairs ? "pairs" : "single");
        kv.emplace_back("bandwidth_hz", num(c.bandwidth_hz));
        kv.emplace_back("noise_var", num(c.noise_var));
        kv.emplace_back("tx_power", num(c.tx_power));
        kv.emplace_back("cell_radius_m", num(c.cell_radius_m));
        kv.emplace_back("pathloss_exp", num(c.pathloss_exp));
        kv.emplace_back("min_distance_m", num(c.min_distance_m));
        kv.emplace_back("reciprocity", c.reciprocity ? "on" : "off");
        kv.emplace_back("n_pilots", std::to_string(c.n_pilots));
        kv.emplace_back("pilot_snr", num(c.pilot_snr));
        kv.emplace_back("sifs_us", num(c.sifs_us));
        kv.emplace_back("difs_us", num(c.difs_us));
        kv.emplace_back("slot_us", num(c.slot_us));
        kv.emplace_back("rts_us", num(c.rts_us));
        kv.emplace_back("cts_us", num(c.cts_us));
        kv.emplace_back("ack_us", num(c.ack_us));
        kv.emplace_back("ctc_us", num(c.ctc_us));
        kv.emplace_back("phy_preamble_us", num(c.phy_preamble_us));
        kv.emplace_back("cw_min", std::to_string(c.cw_min));
        kv.emplace_back("cw_max", std::to_string(c.cw_max));
        kv.emplace_back("retry_limit", std::to_string(c.retry_limit));
        kv.emplace_back("legacy_extra_slot", c.legacy_extra_slot ? "on" : "off");
        kv.emplace_back("backlog_staleness_ms", std::to_string(c.backlog_staleness_ms));
        kv.emplace_back("staleness", c.staleness == StalenessModel::Frozen ? "frozen" : "decay");
        kv.emplace_back("estimate_ttl_ms", std::to_string(c.estimate_ttl_ms));
        kv.emplace_back("relay_decision",
                        c.relay_decision == RelayDecisionRule::Simple ? "simple" : "overhead_aware");
        kv.emplace_back("coop_rate_form", c.coop_rate_form == CoopRateForm::Paper ? "paper" : "mrc");
        kv.emplace_back("ml_weighted", c.ml_weighted ? "on" : "off");
        kv.emplace_back("rate_margin", num(c.rate_margin));
        kv.emplace_back("min_rate_mbps", num(c.min_rate_mbps));
        kv.emplace_back("coop_enabled", c.mode_coop() ? "on" : "off");
        kv.emplace_back("ancol_enabled", c.mode_ancol() ? "on" : "off");
        kv.emplace_back("disassoc_node", std::to_string(c.disassoc_node));
        kv.emplace_back("disassoc_time_ms", num(c.disassoc_time_ms));
        kv.emplace_back("max_sim_time_s", num(c.max_sim_time_s));
        return kv;
    }

    inline std::string config_echo_text(const ExperimentConfig &c, const std::string &prefix = "# ")
    {
        std::ostringstream ss;
        for (const auto &[k, v] : config_echo(c))
        {
            ss << prefix << k << "=" << v << "\n";
        }
        return ss.str();
    }
}
