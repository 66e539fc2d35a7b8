#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "hrlsched/common.hpp"
#include "hrlsched/netmodel.hpp"

namespace hrlsched {

struct Cell {
    int timeslot = 0;        // u in [0, slotframe_size)
    int channel_offset = 0;  // zeta in [0, num_channels)

    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct ScheduledLink {
    NodeId src = 0;
    NodeId dst = 0;
    Cell cell;

    friend bool operator==(const ScheduledLink&, const ScheduledLink&) = default;
};

// Contention-free slotframe: at most one link per cell, and a node is active
// at most once per timeslot across all channel offsets (a radio cannot both
// be on two channels and tx/rx at once). Values are immutable snapshots;
// mutators return a new schedule plus a feasibility flag.
class TschSchedule {
public:
    TschSchedule() = default;
    TschSchedule(int slotframe_size, int num_channels, double slot_ms)
        : slotframe_size_(slotframe_size), num_channels_(num_channels), slot_ms_(slot_ms) {
        if (slotframe_size_ <= 0 || num_channels_ <= 0 || slot_ms_ <= 0.0)
            throw ConfigError("slotframe dimensions and slot duration must be positive");
    }

    int slotframe_size() const { return slotframe_size_; }
    int num_channels() const { return num_channels_; }
    double slot_ms() const { return slot_ms_; }
    int num_cells() const { return slotframe_size_ * num_channels_; }
    const std::vector<ScheduledLink>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    bool in_bounds(const Cell& c) const {
        return c.timeslot >= 0 && c.timeslot < slotframe_size_ && c.channel_offset >= 0 &&
               c.channel_offset < num_channels_;
    }

    const ScheduledLink* at(const Cell& c) const {
        for (const auto& e : entries_)
            if (e.cell == c) return &e;
        return nullptr;
    }

    bool node_busy(NodeId n, int timeslot) const {
        for (const auto& e : entries_)
            if (e.cell.timeslot == timeslot && (e.src == n || e.dst == n)) return true;
        return false;
    }

    bool feasible_add(NodeId src, NodeId dst, const Cell& c) const {
        if (!in_bounds(c) || src == dst) return false;
        if (at(c) != nullptr) return false;
        return !node_busy(src, c.timeslot) && !node_busy(dst, c.timeslot);
    }

    int count_link_cells(NodeId src, NodeId dst) const {
        int n = 0;
        for (const auto& e : entries_)
            if (e.src == src && e.dst == dst) ++n;
        return n;
    }

    int tx_slot_count(NodeId n) const {
        std::set<int> slots;
        for (const auto& e : entries_)
            if (e.src == n) slots.insert(e.cell.timeslot);
        return static_cast<int>(slots.size());
    }

    int rx_slot_count(NodeId n) const {
        std::set<int> slots;
        for (const auto& e : entries_)
            if (e.dst == n) slots.insert(e.cell.timeslot);
        return static_cast<int>(slots.size());
    }

    friend std::pair<TschSchedule, bool> add_link(const TschSchedule&, NodeId, NodeId, const Cell&);
    friend std::pair<TschSchedule, bool> remove_link(const TschSchedule&, const Cell&, NodeId);

    friend bool operator==(const TschSchedule&, const TschSchedule&) = default;

private:
    void sort_entries() {
        std::sort(entries_.begin(), entries_.end(), [](const ScheduledLink& a, const ScheduledLink& b) {
            return std::tie(a.cell.channel_offset, a.cell.timeslot, a.src) <
                   std::tie(b.cell.channel_offset, b.cell.timeslot, b.src);
        });
    }

    int slotframe_size_ = 0;
    int num_channels_ = 0;
    double slot_ms_ = 0.0;
    std::vector<ScheduledLink> entries_;  // kept sorted by (channel, timeslot)
};

// Returns the updated schedule and whether the insertion was feasible. An
// occupied cell or a node already active in that timeslot yields {unchanged,
// false}; the environment turns that flag into a penalty.
inline std::pair<TschSchedule, bool> add_link(const TschSchedule& s, NodeId src, NodeId dst,
                                              const Cell& c) {
    if (!s.in_bounds(c)) throw ContractError("cell out of slotframe bounds");
    if (!s.feasible_add(src, dst, c)) return {s, false};
    TschSchedule out = s;
    out.entries_.push_back({src, dst, c});
    out.sort_entries();
    return {out, true};
}

// Removal succeeds only when the cell is occupied and its destination matches
// expected_dst; anything else is reported infeasible.
inline std::pair<TschSchedule, bool> remove_link(const TschSchedule& s, const Cell& c,
                                                 NodeId expected_dst) {
    if (!s.in_bounds(c)) throw ContractError("cell out of slotframe bounds");
    const ScheduledLink* e = s.at(c);
    if (e == nullptr || e->dst != expected_dst) return {s, false};
    TschSchedule out = s;
    out.entries_.erase(std::find(out.entries_.begin(), out.entries_.end(), *e));
    return {out, true};
}

// Node-side earliest-link lookup: among `node`'s Tx entries toward dst_addr,
// pick the cell whose timeslot is nearest at or after asn mod slotframe,
// wrapping past slots forward by one slotframe.
inline std::optional<Cell> lookup_next(const TschSchedule& s, NodeId node, NodeId dst_addr,
                                       std::uint64_t asn) {
    const int now = static_cast<int>(asn % static_cast<std::uint64_t>(s.slotframe_size()));
    int best_diff = s.slotframe_size();
    std::optional<Cell> best;
    for (const auto& e : s.entries()) {
        if (e.src != node || e.dst != dst_addr) continue;
        int diff = e.cell.timeslot - now;
        if (diff < 0) diff += s.slotframe_size();
        if (diff < best_diff) {
            best_diff = diff;
            best = e.cell;
        }
    }
    return best;
}

// Every entry must reference a graph link; used when loading external
// schedule files and before simulation.
inline void validate_against(const TschSchedule& s, const NetworkGraph& g) {
    for (const auto& e : s.entries())
        if (!g.has_link(e.src, e.dst))
            throw TopologyError("scheduled link " + std::to_string(e.src) + "->" +
                                std::to_string(e.dst) + " is not a graph link");
}

}  // namespace hrlsched
