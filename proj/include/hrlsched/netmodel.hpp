#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "hrlsched/common.hpp"

namespace hrlsched {

using NodeId = int;

inline constexpr NodeId kSinkId = 1;

struct NodePosition {
    NodeId node_id = 0;  // unique, >= 1; id 1 is the sink
    double x_m = 0.0;
    double y_m = 0.0;
};

using Link = std::pair<NodeId, NodeId>;  // ordered (src, dst)

// Unit-disk connectivity graph. Links are stored as ordered pairs in both
// directions; membership uses squared distances so the range boundary is
// decided with exact arithmetic on integer-valued coordinates.
class NetworkGraph {
public:
    NetworkGraph() = default;

    const std::vector<NodePosition>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    double tx_range_m() const { return tx_range_m_; }
    double if_range_m() const { return if_range_m_; }

    bool has_node(NodeId n) const { return index_.count(n) > 0; }
    const NodePosition& position(NodeId n) const {
        auto it = index_.find(n);
        if (it == index_.end()) throw LookupError("unknown node " + std::to_string(n));
        return nodes_[it->second];
    }

    bool has_link(NodeId a, NodeId b) const {
        return std::binary_search(links_.begin(), links_.end(), Link{a, b});
    }

    // index into the canonical (src, dst)-sorted link ordering
    int link_index(NodeId a, NodeId b) const {
        auto it = std::lower_bound(links_.begin(), links_.end(), Link{a, b});
        if (it == links_.end() || *it != Link{a, b})
            throw LookupError("no link " + std::to_string(a) + "->" + std::to_string(b));
        return static_cast<int>(it - links_.begin());
    }
    const Link& link_at(int index) const { return links_.at(static_cast<std::size_t>(index)); }
    int num_links() const { return static_cast<int>(links_.size()); }

    std::vector<NodeId> neighbors(NodeId n) const {
        std::vector<NodeId> out;
        for (const auto& [a, b] : links_)
            if (a == n) out.push_back(b);
        return out;
    }

    double dist_sq(NodeId a, NodeId b) const {
        const auto& pa = position(a);
        const auto& pb = position(b);
        const double dx = pa.x_m - pb.x_m;
        const double dy = pa.y_m - pb.y_m;
        return dx * dx + dy * dy;
    }

    bool within_if_range(NodeId a, NodeId b) const {
        return dist_sq(a, b) <= if_range_m_ * if_range_m_;
    }

    friend NetworkGraph build_graph(const std::vector<NodePosition>&, double, double);

private:
    std::vector<NodePosition> nodes_;        // sorted by id
    std::vector<Link> links_;                // sorted (src, dst)
    std::map<NodeId, std::size_t> index_;    // id -> position slot
    double tx_range_m_ = 0.0;
    double if_range_m_ = 0.0;
};

inline NetworkGraph build_graph(const std::vector<NodePosition>& positions, double tx_range_m,
                                double if_range_m) {
    if (positions.size() < 2) throw ConfigError("topology needs at least 2 nodes");
    if (tx_range_m <= 0.0) throw ConfigError("tx_range must be positive");
    if (if_range_m < tx_range_m) throw ConfigError("if_range must be >= tx_range");

    NetworkGraph g;
    g.tx_range_m_ = tx_range_m;
    g.if_range_m_ = if_range_m;
    g.nodes_ = positions;
    std::sort(g.nodes_.begin(), g.nodes_.end(),
              [](const NodePosition& a, const NodePosition& b) { return a.node_id < b.node_id; });
    for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
        const auto& n = g.nodes_[i];
        if (n.node_id < 1) throw ConfigError("node ids must be >= 1");
        if (!g.index_.emplace(n.node_id, i).second)
            throw ConfigError("duplicate node id " + std::to_string(n.node_id));
    }
    for (std::size_t i = 0; i < g.nodes_.size(); ++i)
        for (std::size_t j = i + 1; j < g.nodes_.size(); ++j) {
            const auto& a = g.nodes_[i];
            const auto& b = g.nodes_[j];
            if (a.x_m == b.x_m && a.y_m == b.y_m)
                throw ConfigError("nodes " + std::to_string(a.node_id) + " and " +
                                  std::to_string(b.node_id) + " share a position");
            const double dx = a.x_m - b.x_m;
            const double dy = a.y_m - b.y_m;
            if (dx * dx + dy * dy <= tx_range_m * tx_range_m) {
                g.links_.emplace_back(a.node_id, b.node_id);
                g.links_.emplace_back(b.node_id, a.node_id);
            }
        }
    std::sort(g.links_.begin(), g.links_.end());
    return g;
}

// Shortest-hop collection tree toward the sink. Parent ties are broken by the
// lowest node id so the tree is a pure function of the graph.
class ForwardingTree {
public:
    ForwardingTree() = default;
    ForwardingTree(std::map<NodeId, NodeId> parent, NodeId sink)
        : parent_(std::move(parent)), sink_(sink) {
        for (const auto& [child, par] : parent_) children_[par].push_back(child);
        for (auto& [n, kids] : children_) std::sort(kids.begin(), kids.end());
    }

    NodeId sink() const { return sink_; }
    bool contains(NodeId n) const { return n == sink_ || parent_.count(n) > 0; }

    NodeId parent(NodeId n) const {
        if (n == sink_) throw LookupError("sink has no parent");
        auto it = parent_.find(n);
        if (it == parent_.end()) throw LookupError("node " + std::to_string(n) + " not in tree");
        return it->second;
    }

    const std::vector<NodeId>& children(NodeId n) const {
        static const std::vector<NodeId> none;
        auto it = children_.find(n);
        return it == children_.end() ? none : it->second;
    }

    // directed (child, parent) edges, sorted
    std::vector<Link> edges() const {
        std::vector<Link> out;
        out.reserve(parent_.size());
        for (const auto& [child, par] : parent_) out.emplace_back(child, par);
        std::sort(out.begin(), out.end());
        return out;
    }

    bool is_edge(NodeId child, NodeId par) const {
        auto it = parent_.find(child);
        return it != parent_.end() && it->second == par;
    }

    int hop_count(NodeId n) const {
        int hops = 0;
        for (NodeId cur = n; cur != sink_; cur = parent(cur)) ++hops;
        return hops;
    }

    int max_hops() const {
        int best = 0;
        for (const auto& [child, par] : parent_) best = std::max(best, hop_count(child));
        return best;
    }

    std::vector<NodeId> node_ids() const {
        std::vector<NodeId> ids{sink_};
        for (const auto& [child, par] : parent_) ids.push_back(child);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

private:
    std::map<NodeId, NodeId> parent_;
    std::map<NodeId, std::vector<NodeId>> children_;
    NodeId sink_ = kSinkId;
};

inline ForwardingTree build_forwarding_tree(const NetworkGraph& g) {
    const NodeId sink = kSinkId;
    if (!g.has_node(sink)) throw TopologyError("sink node 1 missing");

    std::map<NodeId, int> dist;
    dist[sink] = 0;
    std::deque<NodeId> queue{sink};
    while (!queue.empty()) {
        NodeId cur = queue.front();
        queue.pop_front();
        for (NodeId nb : g.neighbors(cur))
            if (!dist.count(nb)) {
                dist[nb] = dist[cur] + 1;
                queue.push_back(nb);
            }
    }

    std::map<NodeId, NodeId> parent;
    for (const auto& np : g.nodes()) {
        if (np.node_id == sink) continue;
        auto it = dist.find(np.node_id);
        if (it == dist.end())
            throw TopologyError("node " + std::to_string(np.node_id) + " unreachable from sink");
        NodeId best = 0;
        for (NodeId nb : g.neighbors(np.node_id)) {
            auto dn = dist.find(nb);
            if (dn != dist.end() && dn->second == it->second - 1 && (best == 0 || nb < best))
                best = nb;
        }
        parent[np.node_id] = best;
    }
    return ForwardingTree(std::move(parent), sink);
}

// (child, parent) links from n to the sink; empty for the sink itself.
inline std::vector<Link> path_links(const ForwardingTree& tree, NodeId n) {
    if (!tree.contains(n)) throw LookupError("node " + std::to_string(n) + " not in tree");
    std::vector<Link> out;
    for (NodeId cur = n; cur != tree.sink();) {
        NodeId par = tree.parent(cur);
        out.emplace_back(cur, par);
        cur = par;
    }
    return out;
}

// The evaluation topology used throughout the bundled configs: ten nodes on a
// 30 m grid with the sink at the origin, 50 m transmission and 100 m
// interference range.
inline NetworkGraph default_grid_topology() {
    std::vector<NodePosition> pos{
        {1, 0, 0},    {2, -30, 30},  {3, 0, 30},  {4, 30, 30},  {5, -30, 70},
        {6, 0, 70},   {7, 30, 70},   {8, -30, 110}, {9, 0, 110}, {10, 30, 110},
    };
    return build_graph(pos, 50.0, 100.0);
}

}  // namespace hrlsched
