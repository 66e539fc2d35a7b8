#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "hrlsched/common.hpp"
#include "hrlsched/metrics.hpp"
#include "hrlsched/netmodel.hpp"
#include "hrlsched/schedule.hpp"

namespace hrlsched {

struct SimConfig {
    double duration_s = 60.0;
    double data_interval_s = 1.0;
    int packet_size_b = 12;
    int queue_capacity = 8;   // FIFO drop-tail
    int retx_limit = 0;       // 0 disables retransmissions
    double lpm_ma = 0.0545;   // sleep-state current at 3 V
    std::uint64_t seed = 0;
    bool collect_trace = false;
    bool collect_events = false;

    void validate() const {
        if (duration_s <= 0) throw ConfigError("duration must be positive");
        if (data_interval_s <= 0) throw ConfigError("data interval must be positive");
        if (queue_capacity <= 0) throw ConfigError("queue capacity must be positive");
    }
};

// Either an explicit contention-free slotframe or one of the autonomous
// baseline rules.
struct Scheduler {
    enum class Kind { Learned, OrchestraLike, SharedCell };
    Kind kind = Kind::Learned;
    TschSchedule schedule;    // Learned only
    int slotframe_size = 11;  // baselines
    int num_channels = 2;
    double slot_ms = 10.0;

    int frame_size() const {
        return kind == Kind::Learned ? schedule.slotframe_size() : slotframe_size;
    }
    int channels() const {
        return kind == Kind::Learned ? schedule.num_channels() : num_channels;
    }
    double slot_duration_ms() const {
        return kind == Kind::Learned ? schedule.slot_ms() : slot_ms;
    }
};

inline Scheduler learned_scheduler(TschSchedule s) {
    Scheduler sch;
    sch.kind = Scheduler::Kind::Learned;
    sch.schedule = std::move(s);
    return sch;
}

// Receiver-based autonomous rule: every node owns the Rx cell
// (id mod slotframe, id mod channels); children transmit in their parent's
// cell, so siblings may contend.
inline Scheduler orchestra_like(int slotframe_size = 11, int num_channels = 2,
                                double slot_ms = 10.0) {
    if (slotframe_size < 2) throw ConfigError("orchestra-like slotframe must be >= 2");
    Scheduler sch;
    sch.kind = Scheduler::Kind::OrchestraLike;
    sch.slotframe_size = slotframe_size;
    sch.num_channels = num_channels;
    sch.slot_ms = slot_ms;
    return sch;
}

// Minimal-connectivity rule: everyone contends in cell (0,0) once per
// slotframe; a uniformly random contender wins the slot.
inline Scheduler shared_cell(int slotframe_size, int num_channels = 2, double slot_ms = 10.0) {
    if (slotframe_size < 1) throw ConfigError("shared-cell slotframe must be >= 1");
    Scheduler sch;
    sch.kind = Scheduler::Kind::SharedCell;
    sch.slotframe_size = slotframe_size;
    sch.num_channels = num_channels;
    sch.slot_ms = slot_ms;
    return sch;
}

struct NodeSimStats {
    NodeId node_id = 0;
    // packet accounting by origin node
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped_queue = 0;
    std::uint64_t lost_collision = 0;
    std::uint64_t in_flight = 0;
    double plr = 0.0;  // 1 - delivered/generated
    double mean_latency_ms = 0.0;
    double max_latency_ms = 0.0;
    double jitter_ms = 0.0;  // mean |difference of consecutive sink inter-arrivals|
    // activity and energy by node
    std::uint64_t tx_attempts = 0;
    std::uint64_t tx_success = 0;
    double e_tx_mj = 0.0;
    double e_rx_mj = 0.0;
    double e_listen_mj = 0.0;
    double e_sleep_mj = 0.0;
    double mean_power_mw = 0.0;
};

struct PacketTraceRow {
    std::uint64_t packet_id = 0;
    NodeId origin = 0;
    std::uint64_t gen_asn = 0;
    std::int64_t delivered_asn = -1;
    int hops = 0;
    std::string outcome;  // delivered | dropped_queue | lost_collision | stranded
};

struct EnergyEvent {
    std::uint64_t asn = 0;
    NodeId node = 0;
    // tx_success, tx_fail, rx_success, garbled, idle_listen, sleep
    std::string type;
};

struct SimReport {
    std::vector<NodeSimStats> nodes;
    std::uint64_t total_generated = 0;
    std::uint64_t total_delivered = 0;
    std::uint64_t total_dropped_queue = 0;
    std::uint64_t total_lost_collision = 0;
    std::uint64_t total_in_flight = 0;
    std::uint64_t collision_events = 0;
    double network_plr = 0.0;
    double mean_latency_ms = 0.0;
    double max_latency_ms = 0.0;
    double mean_power_mw = 0.0;
    double duration_s = 0.0;
    std::vector<PacketTraceRow> trace;     // when collect_trace
    std::vector<EnergyEvent> events;       // when collect_events

    const NodeSimStats& node(NodeId id) const {
        for (const auto& n : nodes)
            if (n.node_id == id) return n;
        throw LookupError("node " + std::to_string(id) + " not in report");
    }
};

namespace simdetail {

struct Packet {
    std::uint64_t id = 0;
    NodeId origin = 0;
    std::uint64_t gen_asn = 0;
    int hops = 0;
    int attempts = 0;
};

struct PendingTx {
    NodeId src = 0;
    NodeId dst = 0;
    int phys_channel = 0;
    bool clean = true;  // shared-cell losers are marked dirty up front
};

}  // namespace simdetail

// Advances the network slot by slot: periodic upward traffic, unit-disk
// interference (exactly one in-range transmitter on a channel gets through),
// FIFO queues, and per-state energy accounting.
inline SimReport run_simulation(const NetworkGraph& graph, const ForwardingTree& tree,
                                const Scheduler& sched, const EnergyProfile& energy,
                                const SimConfig& cfg) {
    using simdetail::Packet;
    using simdetail::PendingTx;
    cfg.validate();
    energy.validate();
    if (sched.kind == Scheduler::Kind::Learned) validate_against(sched.schedule, graph);
    for (const auto& np : graph.nodes())
        if (!tree.contains(np.node_id))
            throw TopologyError("node " + std::to_string(np.node_id) + " missing from tree");

    const double slot_s = units::ms_to_s(sched.slot_duration_ms());
    const std::uint64_t total_slots = static_cast<std::uint64_t>(cfg.duration_s / slot_s);
    const int frame = sched.frame_size();
    const int channels = std::max(1, sched.channels());
    const double sleep_mj_per_slot = units::ma_at_3v_to_mw(cfg.lpm_ma) * slot_s;

    Rng rng(cfg.seed);
    std::map<NodeId, std::deque<Packet>> queues;
    std::map<NodeId, double> next_gen_s;
    std::map<NodeId, NodeSimStats> stats;
    std::map<NodeId, std::vector<double>> sink_arrivals_ms;  // per origin
    std::vector<double> all_latencies;
    SimReport report;
    report.duration_s = cfg.duration_s;

    const auto& nodes = graph.nodes();
    const double n_count = static_cast<double>(nodes.size());
    std::map<NodeId, int> backoff;  // tx opportunities to skip after a failure
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const NodeId id = nodes[i].node_id;
        queues[id] = {};
        stats[id].node_id = id;
        // periodic traffic synchronized at network start, one packet per
        // interval per node
        next_gen_s[id] = 0.0;
        backoff[id] = 0;
    }

    std::uint64_t next_packet_id = 1;
    auto log_event = [&](std::uint64_t asn, NodeId n, const char* type) {
        if (cfg.collect_events) report.events.push_back({asn, n, type});
    };
    auto finish_packet = [&](const Packet& p, const char* outcome, std::int64_t asn) {
        if (cfg.collect_trace)
            report.trace.push_back({p.id, p.origin, p.gen_asn, asn, p.hops, outcome});
    };

    for (std::uint64_t asn = 0; asn < total_slots; ++asn) {
        const double slot_end_s = static_cast<double>(asn + 1) * slot_s;
        // traffic generation toward the sink
        for (const auto& np : nodes) {
            const NodeId id = np.node_id;
            if (id == tree.sink()) continue;
            while (next_gen_s[id] < slot_end_s) {
                next_gen_s[id] += cfg.data_interval_s;
                stats[id].generated += 1;
                if (static_cast<int>(queues[id].size()) >= cfg.queue_capacity) {
                    stats[id].dropped_queue += 1;
                    finish_packet({next_packet_id++, id, asn, 0, 0}, "dropped_queue",
                                  static_cast<std::int64_t>(asn));
                    continue;
                }
                queues[id].push_back({next_packet_id++, id, asn, 0, 0});
            }
        }

        // who transmits, who listens
        std::vector<PendingTx> txs;
        std::map<NodeId, int> listeners;  // node -> physical channel
        const int slot_in_frame = static_cast<int>(asn % static_cast<std::uint64_t>(frame));
        // failed retransmissions back off a few of their own opportunities
        auto may_transmit = [&](NodeId id) {
            if (queues[id].empty()) return false;
            if (backoff[id] > 0) {
                backoff[id] -= 1;
                return false;
            }
            return true;
        };
        if (sched.kind == Scheduler::Kind::Learned) {
            for (const auto& e : sched.schedule.entries()) {
                if (e.cell.timeslot != slot_in_frame) continue;
                const int phys = static_cast<int>((asn + e.cell.channel_offset) %
                                                  static_cast<std::uint64_t>(channels));
                listeners[e.dst] = phys;
                if (may_transmit(e.src)) txs.push_back({e.src, e.dst, phys, true});
            }
        } else if (sched.kind == Scheduler::Kind::OrchestraLike) {
            for (const auto& np : nodes) {
                const NodeId id = np.node_id;
                if (id % frame == slot_in_frame)
                    listeners[id] = static_cast<int>((asn + id % channels) %
                                                     static_cast<std::uint64_t>(channels));
            }
            for (const auto& np : nodes) {
                const NodeId id = np.node_id;
                if (id == tree.sink()) continue;
                const NodeId parent = tree.parent(id);
                if (parent % frame != slot_in_frame) continue;
                if (!may_transmit(id)) continue;
                const int phys = static_cast<int>((asn + parent % channels) %
                                                  static_cast<std::uint64_t>(channels));
                txs.push_back({id, parent, phys, true});
            }
        } else {  // SharedCell
            if (slot_in_frame == 0) {
                const int phys = static_cast<int>(asn % static_cast<std::uint64_t>(channels));
                std::vector<NodeId> contenders;
                for (const auto& np : nodes)
                    if (np.node_id != tree.sink() && may_transmit(np.node_id))
                        contenders.push_back(np.node_id);
                for (const auto& np : nodes) listeners[np.node_id] = phys;
                if (!contenders.empty()) {
                    std::uniform_int_distribution<std::size_t> pick(0, contenders.size() - 1);
                    const NodeId winner = contenders[pick(rng)];
                    for (NodeId c : contenders)
                        txs.push_back({c, tree.parent(c), phys, c == winner});
                }
            }
        }

        // half-duplex: a transmitting node cannot listen
        for (const auto& tx : txs) listeners.erase(tx.src);

        std::set<NodeId> succeeded_rx;
        for (const auto& tx : txs) {
            stats[tx.src].tx_attempts += 1;
            Packet& pkt = queues[tx.src].front();

            bool ok = tx.clean;
            auto it = listeners.find(tx.dst);
            if (it == listeners.end() || it->second != tx.phys_channel) ok = false;
            if (ok && sched.kind != Scheduler::Kind::SharedCell) {
                int in_range = 0;
                for (const auto& other : txs)
                    if (other.phys_channel == tx.phys_channel &&
                        graph.within_if_range(other.src, tx.dst))
                        ++in_range;
                if (in_range != 1) {
                    ok = false;
                    report.collision_events += 1;
                }
            }
            if (!tx.clean) report.collision_events += 1;

            if (ok) {
                stats[tx.src].tx_success += 1;
                succeeded_rx.insert(tx.dst);
                stats[tx.src].e_tx_mj += energy.e_tx_uj * 1e-3;
                stats[tx.src].e_rx_mj += energy.e_rx_ack_uj * 1e-3;
                stats[tx.dst].e_rx_mj += energy.e_rx_uj * 1e-3;
                stats[tx.dst].e_tx_mj += energy.e_tx_ack_uj * 1e-3;
                log_event(asn, tx.src, "tx_success");
                log_event(asn, tx.dst, "rx_success");

                Packet moved = pkt;
                queues[tx.src].pop_front();
                moved.hops += 1;
                moved.attempts = 0;
                if (tx.dst == tree.sink()) {
                    stats[moved.origin].delivered += 1;
                    const double latency_ms =
                        static_cast<double>(asn - moved.gen_asn + 1) * sched.slot_duration_ms();
                    all_latencies.push_back(latency_ms);
                    auto& node_stats = stats[moved.origin];
                    node_stats.mean_latency_ms += latency_ms;  // summed; averaged later
                    node_stats.max_latency_ms = std::max(node_stats.max_latency_ms, latency_ms);
                    sink_arrivals_ms[moved.origin].push_back(
                        static_cast<double>(asn + 1) * sched.slot_duration_ms());
                    finish_packet(moved, "delivered", static_cast<std::int64_t>(asn));
                } else if (static_cast<int>(queues[tx.dst].size()) >= cfg.queue_capacity) {
                    stats[moved.origin].dropped_queue += 1;
                    finish_packet(moved, "dropped_queue", static_cast<std::int64_t>(asn));
                } else {
                    queues[tx.dst].push_back(moved);
                }
            } else {
                // failed attempt: sender burns the tx and waits for an ack in vain
                stats[tx.src].e_tx_mj += energy.e_tx_uj * 1e-3;
                stats[tx.src].e_listen_mj += energy.e_listen_uj * 1e-3;
                log_event(asn, tx.src, "tx_fail");
                pkt.attempts += 1;
                if (cfg.retx_limit > 0)
                    backoff[tx.src] = static_cast<int>(
                        rng() % (1ULL << std::min(pkt.attempts, 4)));
                if (pkt.attempts > cfg.retx_limit) {
                    stats[pkt.origin].lost_collision += 1;
                    finish_packet(pkt, "lost_collision", static_cast<std::int64_t>(asn));
                    queues[tx.src].pop_front();
                }
            }
        }

        // scheduled listeners that heard nothing useful
        for (const auto& [node, ch] : listeners) {
            if (succeeded_rx.count(node)) continue;
            stats[node].e_listen_mj += energy.e_listen_uj * 1e-3;
            log_event(asn, node, "idle_listen");
        }

        // everyone else sleeps through the slot
        for (const auto& np : nodes) {
            const NodeId id = np.node_id;
            const bool active = listeners.count(id) > 0 || succeeded_rx.count(id) > 0 ||
                                std::any_of(txs.begin(), txs.end(),
                                            [id](const PendingTx& t) { return t.src == id; });
            if (!active) {
                stats[id].e_sleep_mj += sleep_mj_per_slot;
                log_event(asn, id, "sleep");
            }
        }
    }

    // residual queue contents
    for (auto& [id, q] : queues)
        for (const auto& pkt : q) {
            stats[pkt.origin].in_flight += 1;
            finish_packet(pkt, "stranded", -1);
        }

    for (const auto& np : nodes) {
        NodeSimStats& s = stats[np.node_id];
        if (s.delivered > 0) s.mean_latency_ms /= static_cast<double>(s.delivered);
        if (s.generated > 0)
            s.plr = 1.0 - static_cast<double>(s.delivered) / static_cast<double>(s.generated);
        const auto& arrivals = sink_arrivals_ms[np.node_id];
        if (arrivals.size() >= 3) {
            double acc = 0.0;
            int count = 0;
            for (std::size_t i = 2; i < arrivals.size(); ++i) {
                const double ia1 = arrivals[i - 1] - arrivals[i - 2];
                const double ia2 = arrivals[i] - arrivals[i - 1];
                acc += std::abs(ia2 - ia1);
                ++count;
            }
            s.jitter_ms = acc / count;
        }
        const double radio_mj = s.e_tx_mj + s.e_rx_mj + s.e_listen_mj + s.e_sleep_mj;
        s.mean_power_mw = energy.p0_mw + radio_mj / cfg.duration_s;

        report.total_generated += s.generated;
        report.total_delivered += s.delivered;
        report.total_dropped_queue += s.dropped_queue;
        report.total_lost_collision += s.lost_collision;
        report.total_in_flight += s.in_flight;
        report.mean_power_mw += s.mean_power_mw;
        report.max_latency_ms = std::max(report.max_latency_ms, s.max_latency_ms);
        report.nodes.push_back(s);
    }
    report.mean_power_mw /= n_count;
    if (report.total_generated > 0)
        report.network_plr = 1.0 - static_cast<double>(report.total_delivered) /
                                       static_cast<double>(report.total_generated);
    if (!all_latencies.empty()) {
        double acc = 0.0;
        for (double l : all_latencies) acc += l;
        report.mean_latency_ms = acc / static_cast<double>(all_latencies.size());
    }
    return report;
}

// --- analytic vs simulated deviation table ---

struct DeviationRow {
    NodeId node_id = 0;  // 0 marks the network-wide row
    double throughput_analytic_pps = 0.0;
    double throughput_sim_pps = 0.0;
    double throughput_rel_dev = 0.0;
    double power_analytic_mw = 0.0;
    double power_sim_mw = 0.0;
    double power_rel_dev = 0.0;
    double delay_analytic_ms = 0.0;
    double delay_sim_ms = 0.0;
    double delay_rel_dev = 0.0;
};

inline double rel_dev(double sim, double analytic) {
    if (analytic == 0.0) return sim == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(sim - analytic) / std::abs(analytic);
}

// Per-node and network-wide relative deviations. Simulated throughput for a
// node is its successful transmit rate (delivered inflow for the sink);
// simulated delay is the mean end-to-end latency of its packets.
inline std::vector<DeviationRow> compare_reports(const MetricsReport& analytic,
                                                 const SimReport& sim, NodeId sink,
                                                 double duration_s) {
    std::vector<DeviationRow> rows;
    DeviationRow net;
    double mean_t_sim = 0.0;
    for (std::size_t i = 0; i < analytic.node_ids.size(); ++i) {
        const NodeId id = analytic.node_ids[i];
        const NodeSimStats& s = sim.node(id);
        DeviationRow r;
        r.node_id = id;
        r.throughput_analytic_pps = analytic.throughput_pps[i];
        r.throughput_sim_pps = id == sink
                                   ? static_cast<double>(sim.total_delivered) / duration_s
                                   : static_cast<double>(s.tx_success) / duration_s;
        r.throughput_rel_dev = rel_dev(r.throughput_sim_pps, r.throughput_analytic_pps);
        r.power_analytic_mw = analytic.power_mw[i];
        r.power_sim_mw = s.mean_power_mw;
        r.power_rel_dev = rel_dev(r.power_sim_mw, r.power_analytic_mw);
        r.delay_analytic_ms = analytic.delay_ms[i];
        r.delay_sim_ms = s.mean_latency_ms;
        r.delay_rel_dev = rel_dev(r.delay_sim_ms, r.delay_analytic_ms);
        mean_t_sim += r.throughput_sim_pps;
        rows.push_back(r);
    }
    net.node_id = 0;
    net.throughput_analytic_pps = analytic.network_throughput_pps;
    net.throughput_sim_pps = mean_t_sim / static_cast<double>(analytic.node_ids.size());
    net.throughput_rel_dev = rel_dev(net.throughput_sim_pps, net.throughput_analytic_pps);
    net.power_analytic_mw = analytic.network_power_mw;
    net.power_sim_mw = sim.mean_power_mw;
    net.power_rel_dev = rel_dev(net.power_sim_mw, net.power_analytic_mw);
    net.delay_analytic_ms = analytic.network_delay_ms;
    net.delay_sim_ms = sim.mean_latency_ms;
    net.delay_rel_dev = rel_dev(net.delay_sim_ms, net.delay_analytic_ms);
    rows.push_back(net);
    return rows;
}

}  // namespace hrlsched
