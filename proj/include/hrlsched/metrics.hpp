#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "hrlsched/common.hpp"
#include "hrlsched/netmodel.hpp"
#include "hrlsched/schedule.hpp"

namespace hrlsched {

// Per-event radio energies (microjoule) and the basic-operations baseline
// (milliwatt). Defaults follow the evaluation platform's measured values.
struct EnergyProfile {
    double e_tx_uj = 140.0;
    double e_rx_uj = 160.0;
    double e_tx_ack_uj = 55.0;
    double e_rx_ack_uj = 70.0;
    double e_listen_uj = 110.0;
    // CPU 1.85 mA at 3 V with a 10% duty assumption; configurable.
    double p0_mw = 0.57;

    void validate() const {
        if (e_tx_uj <= 0 || e_rx_uj <= 0 || e_tx_ack_uj <= 0 || e_rx_ack_uj <= 0 ||
            e_listen_uj <= 0)
            throw ConfigError("energy profile entries must be strictly positive");
    }
};

struct TrafficProfile {
    double t0_pps = 1.0;        // packets/second generated per non-sink node
    double k_ms = 1000.0;       // unstable-queue delay constant
    double sigma_t = 0.0;       // per-metric noise std deviations
    double sigma_p = 0.0;
    double sigma_d = 0.0;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (t0_pps <= 0) throw ConfigError("t0 must be positive");
        if (k_ms <= 0) throw ConfigError("K must be positive");
    }
};

// Min-max references used to squash raw metrics into [0,1]; fixed per
// topology so states and costs are comparable across episodes.
struct NormBounds {
    double p_min_mw = 0.0;
    double p_max_mw = 1.0;
    double d_cap_ms = 1.0;   // K x max_hops
    double t_ub_pps = 1.0;   // per-node max throughput with every slot transmitting

    static NormBounds for_topology(const ForwardingTree& tree, const EnergyProfile& energy,
                                   const TrafficProfile& traffic, double slot_ms) {
        NormBounds b;
        b.p_min_mw = energy.p0_mw;
        const double busiest_state_uj =
            std::max({energy.e_tx_uj + energy.e_rx_ack_uj, energy.e_rx_uj + energy.e_tx_ack_uj,
                      energy.e_listen_uj});
        b.p_max_mw = energy.p0_mw + units::uj_per_s_to_mw(busiest_state_uj / units::ms_to_s(slot_ms));
        b.d_cap_ms = traffic.k_ms * std::max(1, tree.max_hops());
        b.t_ub_pps = 1.0 / units::ms_to_s(slot_ms);
        return b;
    }
};

struct MetricsReport {
    std::vector<NodeId> node_ids;
    std::vector<double> throughput_pps;  // T_n
    std::vector<double> power_mw;        // P_n
    std::vector<double> delay_ms;        // D_n (worst case)
    double network_throughput_pps = 0.0;
    double network_power_mw = 0.0;
    double network_delay_ms = 0.0;
    double loss_rate = 0.0;
    double t_hat = 0.0;
    double p_hat = 0.0;
    double d_hat = 0.0;
    double l_hat = 0.0;
};

// --- throughput ---

inline double max_throughput_tx(const TschSchedule& s, NodeId n) {
    if (s.slotframe_size() <= 0 || s.slot_ms() <= 0)
        throw ContractError("slotframe must be non-empty");
    return s.tx_slot_count(n) / (s.slotframe_size() * units::ms_to_s(s.slot_ms()));
}

inline double max_throughput_rx(const TschSchedule& s, NodeId n) {
    return s.rx_slot_count(n) / (s.slotframe_size() * units::ms_to_s(s.slot_ms()));
}

namespace detail {

// Bottom-up pass computing T_n for every node. A non-sink node carries its
// own traffic plus the children's inflow unless its transmit capacity
// saturates; the sink reports its delivered inflow.
inline void node_throughputs(const TschSchedule& s, const ForwardingTree& tree, double t0,
                             std::map<NodeId, double>& t_out, std::map<NodeId, double>& children_out) {
    struct Walker {
        const TschSchedule& s;
        const ForwardingTree& tree;
        double t0;
        std::map<NodeId, double>& t_out;
        std::map<NodeId, double>& children_out;
        std::set<NodeId> in_progress;

        double visit(NodeId n) {
            if (auto it = t_out.find(n); it != t_out.end()) return it->second;
            if (!in_progress.insert(n).second)
                throw TopologyError("cycle through node " + std::to_string(n));
            double inflow = 0.0;
            for (NodeId c : tree.children(n)) inflow += visit(c);
            children_out[n] = inflow;
            double t;
            if (n == tree.sink()) {
                t = inflow;
            } else {
                const double cap = max_throughput_tx(s, n);
                t = (inflow < cap - t0) ? t0 + inflow : cap;
            }
            in_progress.erase(n);
            t_out[n] = t;
            return t;
        }
    } walker{s, tree, t0, t_out, children_out};
    for (NodeId n : tree.node_ids()) walker.visit(n);
}

}  // namespace detail

inline double node_throughput(const TschSchedule& s, const ForwardingTree& tree, NodeId n,
                              double t0) {
    std::map<NodeId, double> t, children;
    detail::node_throughputs(s, tree, t0, t, children);
    auto it = t.find(n);
    if (it == t.end()) throw LookupError("node " + std::to_string(n) + " not in tree");
    return it->second;
}

// --- power ---

struct PowerParts {
    double tx_mw = 0.0;
    double rx_mw = 0.0;
    double idle_listen_cells_per_s = 0.0;
    double total_mw = 0.0;  // p0 + tx + rx
};

namespace detail {

inline PowerParts node_power_parts_with(const TschSchedule& s, NodeId n,
                                        const EnergyProfile& energy, double t_n, double inflow) {
    PowerParts parts;
    parts.tx_mw = units::uj_per_s_to_mw(t_n * (energy.e_tx_uj + energy.e_rx_ack_uj));
    parts.idle_listen_cells_per_s = std::max(0.0, max_throughput_rx(s, n) - inflow);
    parts.rx_mw = units::uj_per_s_to_mw(inflow * (energy.e_rx_uj + energy.e_tx_ack_uj) +
                                        parts.idle_listen_cells_per_s * energy.e_listen_uj);
    parts.total_mw = energy.p0_mw + parts.tx_mw + parts.rx_mw;
    return parts;
}

}  // namespace detail

inline PowerParts node_power_parts(const TschSchedule& s, const ForwardingTree& tree, NodeId n,
                                   const EnergyProfile& energy, const TrafficProfile& traffic) {
    energy.validate();
    std::map<NodeId, double> t, children;
    detail::node_throughputs(s, tree, traffic.t0_pps, t, children);
    return detail::node_power_parts_with(s, n, energy, t.at(n), children.at(n));
}

inline double node_power(const TschSchedule& s, const ForwardingTree& tree, NodeId n,
                         const EnergyProfile& energy, const TrafficProfile& traffic) {
    return node_power_parts(s, tree, n, energy, traffic).total_mw;
}

// --- delay ---

// M/M/1-style queueing term for a forwarding node; K when the queue is
// unstable (arrival rate at or above service rate).
inline double queue_delay_ms(double lambda_pps, double mu_pps, double k_ms) {
    if (lambda_pps < mu_pps) return lambda_pps / (mu_pps * (mu_pps - lambda_pps)) * 1e3;
    return k_ms;
}

namespace detail {

// Slot-walk from n for one generation slot. A hop with no scheduled cell
// contributes K instead of an unbounded wait.
inline double path_wait_ms(const TschSchedule& s, const ForwardingTree& tree, NodeId n,
                           int gen_slot, double k_ms) {
    double total_ms = 0.0;
    std::uint64_t asn = static_cast<std::uint64_t>(gen_slot);
    for (const auto& [child, parent] : path_links(tree, n)) {
        auto cell = lookup_next(s, child, parent, asn);
        if (!cell) {
            total_ms += k_ms;
            continue;
        }
        int diff = cell->timeslot - static_cast<int>(asn % s.slotframe_size());
        if (diff < 0) diff += s.slotframe_size();
        total_ms += diff * s.slot_ms();
        asn += static_cast<std::uint64_t>(diff);
    }
    return total_ms;
}

}  // namespace detail

namespace detail {

inline double node_delay_ms_with(const TschSchedule& s, const ForwardingTree& tree, NodeId n,
                                 const TrafficProfile& traffic, const std::map<NodeId, double>& t,
                                 const std::map<NodeId, double>& children) {
    if (n == tree.sink()) return 0.0;
    double worst_wait = 0.0;
    for (int u = 0; u < s.slotframe_size(); ++u)
        worst_wait = std::max(worst_wait, path_wait_ms(s, tree, n, u, traffic.k_ms));

    double queue_ms = 0.0;
    const auto path = path_links(tree, n);
    for (std::size_t i = 1; i < path.size(); ++i) {  // forwarders exclude the source itself
        const NodeId f = path[i].first;
        queue_ms += queue_delay_ms(children.at(f), t.at(f), traffic.k_ms);
    }
    return worst_wait + queue_ms;
}

}  // namespace detail

inline double node_delay_ms(const TschSchedule& s, const ForwardingTree& tree, NodeId n,
                            const TrafficProfile& traffic) {
    if (!tree.contains(n)) throw LookupError("node " + std::to_string(n) + " not in tree");
    std::map<NodeId, double> t, children;
    detail::node_throughputs(s, tree, traffic.t0_pps, t, children);
    return detail::node_delay_ms_with(s, tree, n, traffic, t, children);
}

// --- loss ---

// Delivered fraction under the saturated throughput model; the network loses
// whatever the schedule cannot carry to the sink.
inline double loss_rate(const TschSchedule& s, const ForwardingTree& tree,
                        const TrafficProfile& traffic) {
    std::map<NodeId, double> t, children;
    detail::node_throughputs(s, tree, traffic.t0_pps, t, children);
    const double offered = static_cast<double>(tree.node_ids().size() - 1) * traffic.t0_pps;
    if (offered <= 0.0) return 0.0;
    const double delivered = children.at(tree.sink());
    return std::clamp(1.0 - delivered / offered, 0.0, 1.0);
}

// --- normalization ---

inline double normalize_minmax(double v, double lo, double hi) {
    if (hi <= lo) return 0.0;  // degenerate bounds
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

inline double normalize_delay(double d_ms, double cap_ms) {
    return std::clamp(d_ms, 0.0, cap_ms) / cap_ms;
}

// --- full evaluation ---

inline MetricsReport evaluate_metrics(const TschSchedule& s, const ForwardingTree& tree,
                                      const EnergyProfile& energy, const TrafficProfile& traffic,
                                      const NormBounds& bounds, Rng& rng) {
    energy.validate();
    traffic.validate();
    MetricsReport r;
    r.node_ids = tree.node_ids();

    std::map<NodeId, double> t, children;
    detail::node_throughputs(s, tree, traffic.t0_pps, t, children);

    std::normal_distribution<double> noise(0.0, 1.0);
    auto draw = [&](double sigma) { return sigma > 0.0 ? sigma * noise(rng) : 0.0; };

    double sum_t = 0.0, sum_p = 0.0, sum_d = 0.0;
    for (NodeId n : r.node_ids) {
        const double tn = t.at(n);
        const double pn = detail::node_power_parts_with(s, n, energy, tn, children.at(n)).total_mw;
        const double dn = detail::node_delay_ms_with(s, tree, n, traffic, t, children);
        r.throughput_pps.push_back(tn);
        r.power_mw.push_back(pn);
        r.delay_ms.push_back(dn);
        sum_t += tn + draw(traffic.sigma_t);
        sum_p += pn + draw(traffic.sigma_p);
        sum_d += dn + draw(traffic.sigma_d);
    }
    const double count = static_cast<double>(r.node_ids.size());
    r.network_throughput_pps = sum_t / count;
    r.network_power_mw = sum_p / count;
    r.network_delay_ms = sum_d / count;
    const double offered = (count - 1.0) * traffic.t0_pps;
    r.loss_rate =
        offered > 0.0 ? std::clamp(1.0 - children.at(tree.sink()) / offered, 0.0, 1.0) : 0.0;

    r.p_hat = normalize_minmax(r.network_power_mw, bounds.p_min_mw, bounds.p_max_mw);
    r.d_hat = normalize_delay(r.network_delay_ms, bounds.d_cap_ms);
    r.t_hat = normalize_minmax(r.network_throughput_pps, 0.0, bounds.t_ub_pps);
    r.l_hat = r.loss_rate;
    return r;
}

inline MetricsReport evaluate_metrics(const TschSchedule& s, const ForwardingTree& tree,
                                      const EnergyProfile& energy, const TrafficProfile& traffic,
                                      const NormBounds& bounds) {
    Rng rng(traffic.rng_seed);
    return evaluate_metrics(s, tree, energy, traffic, bounds, rng);
}

}  // namespace hrlsched
