#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "hrlsched/common.hpp"
#include "hrlsched/env.hpp"
#include "hrlsched/hrl.hpp"
#include "hrlsched/slotsim.hpp"

namespace hrlsched {

// Weights over (power, delay, throughput, reliability) for protocol ranking.
struct RankingWeights {
    double power = 0.25;
    double delay = 0.25;
    double throughput = 0.25;
    double reliability = 0.25;

    void validate() const {
        const double sum = power + delay + throughput + reliability;
        if (power < 0 || delay < 0 || throughput < 0 || reliability < 0 ||
            std::abs(sum - 1.0) > 1e-6)
            throw ConfigError("ranking weights must be non-negative and sum to 1");
    }

    static RankingWeights balanced() { return {0.25, 0.25, 0.25, 0.25}; }
    static RankingWeights power_focused() { return {0.7, 0.1, 0.1, 0.1}; }
    static RankingWeights delay_focused() { return {0.1, 0.7, 0.1, 0.1}; }
    static RankingWeights throughput_focused() { return {0.1, 0.1, 0.7, 0.1}; }
    static RankingWeights reliability_focused() { return {0.1, 0.1, 0.1, 0.7}; }

    static RankingWeights named(const std::string& name) {
        if (name == "balanced" || name == "b") return balanced();
        if (name == "power" || name == "p") return power_focused();
        if (name == "delay" || name == "d") return delay_focused();
        if (name == "throughput" || name == "t") return throughput_focused();
        if (name == "reliability" || name == "r") return reliability_focused();
        throw ConfigError("unknown weight preset '" + name + "'");
    }
};

// Linear interpolation of metric values into [0,100]; the best observed value
// scores 100 and the worst 0, with orientation set by higher_is_better.
// Degenerate spreads score 0 across the board; a single value scores 100.
inline std::vector<double> score_values(const std::vector<double>& values, bool higher_is_better) {
    if (values.empty()) return {};
    if (values.size() == 1) return {100.0};
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) {
        if (hi == lo) {
            out.push_back(0.0);
            continue;
        }
        const double toward_max = (v - lo) / (hi - lo) * 100.0;
        out.push_back(higher_is_better ? toward_max : 100.0 - toward_max);
    }
    return out;
}

struct ProtocolMetrics {
    std::string name;
    double power_mw = 0.0;       // lower is better
    double delay_ms = 0.0;       // lower is better
    double throughput_pps = 0.0; // higher is better
    double plr = 0.0;            // lower is better (reliability)
};

struct RankedProtocol {
    std::string name;
    double s_power = 0.0;
    double s_delay = 0.0;
    double s_throughput = 0.0;
    double s_reliability = 0.0;
    double final_score = 0.0;
};

inline std::vector<RankedProtocol> rank_protocols(const std::vector<ProtocolMetrics>& table,
                                                  const RankingWeights& w) {
    w.validate();
    std::vector<double> power, delay, throughput, plr;
    for (const auto& p : table) {
        power.push_back(p.power_mw);
        delay.push_back(p.delay_ms);
        throughput.push_back(p.throughput_pps);
        plr.push_back(p.plr);
    }
    const auto sp = score_values(power, false);
    const auto sd = score_values(delay, false);
    const auto st = score_values(throughput, true);
    const auto sr = score_values(plr, false);

    std::vector<RankedProtocol> out;
    for (std::size_t i = 0; i < table.size(); ++i) {
        RankedProtocol r;
        r.name = table[i].name;
        r.s_power = sp[i];
        r.s_delay = sd[i];
        r.s_throughput = st[i];
        r.s_reliability = sr[i];
        r.final_score = w.power * sp[i] + w.delay * sd[i] + w.throughput * st[i] +
                        w.reliability * sr[i];
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const RankedProtocol& a, const RankedProtocol& b) {
        if (a.final_score != b.final_score) return a.final_score > b.final_score;
        return a.name < b.name;
    });
    return out;
}

// --- requirement sweep ---

struct SweepRow {
    Requirements phi;
    double power_mw = 0.0;
    double delay_ms = 0.0;
    double throughput_pps = 0.0;
    double cost = 0.0;
    bool simulated = false;
    double sim_plr = 0.0;
    double sim_power_mw = 0.0;
    double sim_mean_latency_ms = 0.0;
};

struct SweepConfig {
    double grid_step = 0.1;
    int budget = 50;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool run_sim = false;
    double sim_duration_s = 60.0;
};

// One schedule synthesis and evaluation per grid point. Worker-pool order
// never leaks into the output: rows appear in grid enumeration order.
inline std::vector<SweepRow> sweep_pareto(const World& world, const PolicyBank& bank,
                                          const SweepConfig& cfg, const EnvConfig& env_cfg = {}) {
    if (!bank.complete()) throw ConfigError("policy bank is incomplete; train it first");
    const auto grid = Requirements::grid(cfg.grid_step);
    std::vector<SweepRow> rows(grid.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            SweepRow& row = rows[i];
            row.phi = grid[i];
            const auto synth = synthesize(world, bank, grid[i], cfg.budget,
                                          mix_seed(cfg.seed, i), env_cfg);
            const MetricsReport m = world.evaluate(synth.schedule);
            row.power_mw = m.network_power_mw;
            row.delay_ms = m.network_delay_ms;
            row.throughput_pps = m.network_throughput_pps;
            row.cost = cost(m.p_hat, m.d_hat, m.t_hat, grid[i]);
            if (cfg.run_sim) {
                SimConfig sim;
                sim.duration_s = cfg.sim_duration_s;
                sim.seed = mix_seed(cfg.seed, 0x51D ^ i);
                const SimReport rep = run_simulation(world.graph, world.tree,
                                                     learned_scheduler(synth.schedule),
                                                     world.energy, sim);
                row.simulated = true;
                row.sim_plr = rep.network_plr;
                row.sim_power_mw = rep.mean_power_mw;
                row.sim_mean_latency_ms = rep.mean_latency_ms;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::max(1, cfg.jobs); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return rows;
}

// --- CSV emission ---

namespace csv {

inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace csv

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out =
        "alpha,beta,gamma,power_mw,delay_ms,throughput_pps,cost";
    const bool any_sim = std::any_of(rows.begin(), rows.end(),
                                     [](const SweepRow& r) { return r.simulated; });
    if (any_sim) out += ",sim_plr,sim_power_mw,sim_mean_latency_ms";
    out += "\n";
    for (const auto& r : rows) {
        out += csv::num(r.phi.alpha) + "," + csv::num(r.phi.beta) + "," + csv::num(r.phi.gamma) +
               "," + csv::num(r.power_mw) + "," + csv::num(r.delay_ms) + "," +
               csv::num(r.throughput_pps) + "," + csv::num(r.cost);
        if (any_sim)
            out += "," + csv::num(r.sim_plr) + "," + csv::num(r.sim_power_mw) + "," +
                   csv::num(r.sim_mean_latency_ms);
        out += "\n";
    }
    return out;
}

inline std::string ranking_to_csv(const std::vector<RankedProtocol>& ranked) {
    std::string out = "protocol,final_score,s_power,s_delay,s_throughput,s_reliability\n";
    for (const auto& r : ranked)
        out += r.name + "," + csv::num(r.final_score) + "," + csv::num(r.s_power) + "," +
               csv::num(r.s_delay) + "," + csv::num(r.s_throughput) + "," +
               csv::num(r.s_reliability) + "\n";
    return out;
}

inline std::string deviations_to_csv(const std::vector<DeviationRow>& rows) {
    std::string out =
        "node,throughput_analytic_pps,throughput_sim_pps,throughput_rel_dev,power_analytic_mw,"
        "power_sim_mw,power_rel_dev,delay_analytic_ms,delay_sim_ms,delay_rel_dev\n";
    for (const auto& r : rows) {
        out += (r.node_id == 0 ? std::string("network") : std::to_string(r.node_id)) + "," +
               csv::num(r.throughput_analytic_pps) + "," + csv::num(r.throughput_sim_pps) + "," +
               csv::num(r.throughput_rel_dev) + "," + csv::num(r.power_analytic_mw) + "," +
               csv::num(r.power_sim_mw) + "," + csv::num(r.power_rel_dev) + "," +
               csv::num(r.delay_analytic_ms) + "," + csv::num(r.delay_sim_ms) + "," +
               csv::num(r.delay_rel_dev) + "\n";
    }
    return out;
}

inline std::string sim_report_to_csv(const SimReport& rep) {
    std::string out =
        "node,generated,delivered,dropped_queue,lost_collision,in_flight,plr,mean_latency_ms,"
        "max_latency_ms,jitter_ms,tx_attempts,tx_success,e_tx_mj,e_rx_mj,e_listen_mj,e_sleep_mj,"
        "mean_power_mw\n";
    for (const auto& n : rep.nodes) {
        out += std::to_string(n.node_id) + "," + std::to_string(n.generated) + "," +
               std::to_string(n.delivered) + "," + std::to_string(n.dropped_queue) + "," +
               std::to_string(n.lost_collision) + "," + std::to_string(n.in_flight) + "," +
               csv::num(n.plr) + "," + csv::num(n.mean_latency_ms) + "," +
               csv::num(n.max_latency_ms) + "," + csv::num(n.jitter_ms) + "," +
               std::to_string(n.tx_attempts) + "," + std::to_string(n.tx_success) + "," +
               csv::num(n.e_tx_mj) + "," + csv::num(n.e_rx_mj) + "," + csv::num(n.e_listen_mj) +
               "," + csv::num(n.e_sleep_mj) + "," + csv::num(n.mean_power_mw) + "\n";
    }
    out += "network," + std::to_string(rep.total_generated) + "," +
           std::to_string(rep.total_delivered) + "," + std::to_string(rep.total_dropped_queue) +
           "," + std::to_string(rep.total_lost_collision) + "," +
           std::to_string(rep.total_in_flight) + "," + csv::num(rep.network_plr) + "," +
           csv::num(rep.mean_latency_ms) + "," + csv::num(rep.max_latency_ms) +
           ",,,,,,,," + csv::num(rep.mean_power_mw) + "\n";
    return out;
}

inline std::string trace_to_csv(const std::vector<PacketTraceRow>& trace) {
    std::string out = "packet_id,origin,gen_asn,delivered_asn,hops,outcome\n";
    for (const auto& t : trace)
        out += std::to_string(t.packet_id) + "," + std::to_string(t.origin) + "," +
               std::to_string(t.gen_asn) + "," + std::to_string(t.delivered_asn) + "," +
               std::to_string(t.hops) + "," + t.outcome + "\n";
    return out;
}

}  // namespace hrlsched
