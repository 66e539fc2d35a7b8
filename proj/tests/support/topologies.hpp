#pragma once

// Shared fixture topologies and brute-force oracles. Everything here is
// test-only and deliberately independent of the library's computation paths.

#include <deque>
#include <map>
#include <vector>

#include "hrlsched/env.hpp"
#include "hrlsched/netmodel.hpp"
#include "hrlsched/schedule.hpp"

namespace testsupport {

using namespace hrlsched;

inline NetworkGraph chain_topology(int n, double spacing = 40.0, double tx = 50.0,
                                   double ifr = 100.0) {
    std::vector<NodePosition> pos;
    for (int i = 0; i < n; ++i) pos.push_back({i + 1, spacing * i, 0.0});
    return build_graph(pos, tx, ifr);
}

// 2x2 grid: sink 1 and 4 are diagonal (not linked at 50 m range).
inline NetworkGraph square_topology() {
    return build_graph({{1, 0, 0}, {2, 40, 0}, {3, 0, 40}, {4, 40, 40}}, 50.0, 100.0);
}

inline World make_world(const NetworkGraph& g, int slotframe = 17, int channels = 2,
                        double slot_ms = 10.0) {
    return World::make(g, EnergyProfile{}, TrafficProfile{}, slotframe, channels, slot_ms);
}

// Independent BFS hop distances (the library's tree must agree).
inline std::map<NodeId, int> bfs_distances(const NetworkGraph& g, NodeId source) {
    std::map<NodeId, int> dist{{source, 0}};
    std::deque<NodeId> q{source};
    while (!q.empty()) {
        NodeId cur = q.front();
        q.pop_front();
        for (const auto& [a, b] : g.links())
            if (a == cur && !dist.count(b)) {
                dist[b] = dist[cur] + 1;
                q.push_back(b);
            }
    }
    return dist;
}

// Exhaustive minimum-diff scan mirroring the published lookup listing.
inline std::optional<Cell> brute_force_lookup(const TschSchedule& s, NodeId node, NodeId dst,
                                              std::uint64_t asn) {
    const int now = static_cast<int>(asn % static_cast<std::uint64_t>(s.slotframe_size()));
    int best_diff = s.slotframe_size() + 1;
    std::optional<Cell> best;
    for (const auto& e : s.entries()) {
        if (e.src != node || e.dst != dst) continue;
        int diff = e.cell.timeslot - now;
        if (diff < 0) diff += s.slotframe_size();
        if (diff < best_diff) {
            best_diff = diff;
            best = e.cell;
        }
    }
    return best;
}

// Slot-accounting throughput oracle: integer packets, per-slot transmissions
// along the tree, fractional generation accumulators, infinite queues. The
// per-node successful transmit rate over the measured window approximates the
// steady-state throughput.
inline std::map<NodeId, double> slot_accounting_throughput(const NetworkGraph& g,
                                                           const ForwardingTree& tree,
                                                           const TschSchedule& s, double t0_pps,
                                                           double measure_s = 120.0,
                                                           double warmup_s = 30.0) {
    const double slot_s = s.slot_ms() / 1000.0;
    const auto total_slots = static_cast<std::uint64_t>((measure_s + warmup_s) / slot_s);
    const auto warmup_slots = static_cast<std::uint64_t>(warmup_s / slot_s);

    std::map<NodeId, double> gen_acc;
    std::map<NodeId, std::uint64_t> queue;
    std::map<NodeId, std::uint64_t> sent;
    for (const auto& np : g.nodes()) {
        gen_acc[np.node_id] = 0.0;
        queue[np.node_id] = 0;
        sent[np.node_id] = 0;
    }

    for (std::uint64_t asn = 0; asn < total_slots; ++asn) {
        for (const auto& np : g.nodes()) {
            if (np.node_id == tree.sink()) continue;
            gen_acc[np.node_id] += t0_pps * slot_s;
            while (gen_acc[np.node_id] >= 1.0) {
                gen_acc[np.node_id] -= 1.0;
                queue[np.node_id] += 1;
            }
        }
        const int u = static_cast<int>(asn % static_cast<std::uint64_t>(s.slotframe_size()));
        std::vector<NodeId> receivers;
        for (const auto& e : s.entries()) {
            if (e.cell.timeslot != u) continue;
            if (queue[e.src] == 0) continue;
            queue[e.src] -= 1;
            receivers.push_back(e.dst);
            if (asn >= warmup_slots) sent[e.src] += 1;
        }
        for (NodeId r : receivers)
            if (r != tree.sink()) queue[r] += 1;
    }

    std::map<NodeId, double> rate;
    for (const auto& [n, cnt] : sent) rate[n] = static_cast<double>(cnt) / measure_s;
    // the sink's "throughput" is its delivered inflow
    double sink_in = 0.0;
    for (NodeId c : tree.children(tree.sink())) sink_in += rate[c];
    rate[tree.sink()] = sink_in;
    return rate;
}

// Random feasible schedule over arbitrary graph links (tree links favoured).
inline TschSchedule random_schedule(const World& w, Rng& rng, int max_entries) {
    TschSchedule s = w.empty_schedule();
    const auto edges = w.tree.edges();
    std::uniform_int_distribution<int> u_pick(0, w.slotframe_size - 1);
    std::uniform_int_distribution<int> z_pick(0, w.num_channels - 1);
    std::uniform_int_distribution<std::size_t> e_pick(0, edges.size() - 1);
    for (int i = 0; i < max_entries; ++i) {
        const auto& [src, dst] = edges[e_pick(rng)];
        auto [next, ok] = add_link(s, src, dst, Cell{u_pick(rng), z_pick(rng)});
        if (ok) s = std::move(next);
    }
    return s;
}

}  // namespace testsupport
