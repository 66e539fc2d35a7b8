#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "hrlsched/common.hpp"
#include "hrlsched/metrics.hpp"
#include "hrlsched/netmodel.hpp"
#include "hrlsched/schedule.hpp"

namespace hrlsched {

// Application requirement weights over (power, delay, throughput).
struct Requirements {
    double alpha = 1.0 / 3;
    double beta = 1.0 / 3;
    double gamma = 1.0 / 3;

    void validate() const {
        if (alpha < 0 || beta < 0 || gamma < 0 || std::abs(alpha + beta + gamma - 1.0) > 1e-6)
            throw ContractError("requirement weights must be non-negative and sum to 1");
    }

    // All weight tuples on the simplex with the given resolution. gamma is
    // built as the exact complement so alpha+beta+gamma == 1.0 bit-for-bit.
    static std::vector<Requirements> grid(double step = 0.1) {
        const int units = static_cast<int>(std::lround(1.0 / step));
        if (units <= 0) throw ConfigError("grid step must divide 1");
        std::vector<Requirements> out;
        for (int i = 0; i <= units; ++i)
            for (int j = 0; j <= units - i; ++j) {
                Requirements r;
                r.alpha = static_cast<double>(i) / units;
                r.beta = static_cast<double>(j) / units;
                r.gamma = 1.0 - (r.alpha + r.beta);
                out.push_back(r);
            }
        return out;
    }
};

// Scalar objective the policies minimize; lower is better, in [-1, 1].
inline double cost(double p_hat, double d_hat, double t_hat, const Requirements& phi) {
    phi.validate();
    if (p_hat < 0 || p_hat > 1 || d_hat < 0 || d_hat > 1 || t_hat < 0 || t_hat > 1)
        throw ContractError("normalized metrics must lie in [0,1]");
    return phi.alpha * p_hat + phi.beta * d_hat - phi.gamma * t_hat;
}

enum class ActionKind { Add, Remove };

struct HighAction {
    ActionKind kind = ActionKind::Add;
    int link_index = 0;  // into the graph's canonical link ordering
};

inline int encode_high_action(const HighAction& a, int num_links) {
    return (a.kind == ActionKind::Add ? 0 : num_links) + a.link_index;
}

inline HighAction decode_high_action(int id, int num_links) {
    if (id < 0 || id >= 2 * num_links) throw ContractError("high action id out of range");
    if (id < num_links) return {ActionKind::Add, id};
    return {ActionKind::Remove, id - num_links};
}

inline Cell decode_low_action(int id, const TschSchedule& s) {
    if (id < 0 || id >= s.num_cells()) throw ContractError("low action id out of range");
    return Cell{id % s.slotframe_size(), id / s.slotframe_size()};
}

inline int encode_low_action(const Cell& c, const TschSchedule& s) {
    return c.channel_offset * s.slotframe_size() + c.timeslot;
}

struct EnvConfig {
    int max_steps = 50;          // episode budget for either level
    double psi = -1.0;           // penalty reward
    double upsilon = 2.0;        // reward offset, > max cost
    double sigma_t = 0.0;        // metric noise during training
    double sigma_p = 0.0;
    double sigma_d = 0.0;
    double phi_grid_step = 0.1;
};

// Immutable per-topology context shared by environments and evaluators.
struct World {
    NetworkGraph graph;
    ForwardingTree tree;
    EnergyProfile energy;
    TrafficProfile traffic;
    NormBounds bounds;
    int slotframe_size = 17;
    int num_channels = 2;
    double slot_ms = 10.0;

    static World make(NetworkGraph g, EnergyProfile energy, TrafficProfile traffic,
                      int slotframe_size, int num_channels, double slot_ms) {
        World w;
        w.graph = std::move(g);
        w.tree = build_forwarding_tree(w.graph);
        w.energy = energy;
        w.traffic = traffic;
        w.slotframe_size = slotframe_size;
        w.num_channels = num_channels;
        w.slot_ms = slot_ms;
        w.bounds = NormBounds::for_topology(w.tree, energy, traffic, slot_ms);
        return w;
    }

    TschSchedule empty_schedule() const {
        return TschSchedule(slotframe_size, num_channels, slot_ms);
    }

    int node_index(NodeId n) const {
        const auto& nodes = graph.nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].node_id == n) return static_cast<int>(i);
        throw LookupError("node " + std::to_string(n) + " not in world");
    }

    MetricsReport evaluate(const TschSchedule& s, double sigma_t, double sigma_p, double sigma_d,
                           Rng& rng) const {
        TrafficProfile t = traffic;
        t.sigma_t = sigma_t;
        t.sigma_p = sigma_p;
        t.sigma_d = sigma_d;
        return evaluate_metrics(s, tree, energy, t, bounds, rng);
    }

    MetricsReport evaluate(const TschSchedule& s) const {
        Rng rng(0);
        return evaluate(s, 0.0, 0.0, 0.0, rng);
    }
};

// A high action is penalized when it adds a link that lies on no forwarding
// path, or when the removal targets a link that is either off the forwarding
// paths or down to its last scheduled cell (removing it would leave a tree
// edge unserved).
inline bool penalized_high(const HighAction& a, const ForwardingTree& tree,
                           const TschSchedule& s, const NetworkGraph& g) {
    const auto& [src, dst] = g.link_at(a.link_index);
    const bool on_tree = tree.is_edge(src, dst);
    if (a.kind == ActionKind::Add) return !on_tree;
    return !on_tree || s.count_link_cells(src, dst) <= 1;
}

namespace detail {

inline double cell_code(const NetworkGraph& g, const ScheduledLink& e) {
    return static_cast<double>(g.link_index(e.src, e.dst) + 1) /
           static_cast<double>(g.num_links() + 1);
}

inline void append_adjacency(std::vector<double>& v, const NetworkGraph& g) {
    const auto& nodes = g.nodes();
    for (const auto& a : nodes)
        for (const auto& b : nodes)
            v.push_back(g.has_link(a.node_id, b.node_id) ? 1.0 : 0.0);
}

// Full-occupancy slotframe plane, channel-major, cells carrying the
// occupying link's code.
inline void append_schedule_plane(std::vector<double>& v, const NetworkGraph& g,
                                  const TschSchedule& s) {
    const std::size_t base = v.size();
    v.resize(base + static_cast<std::size_t>(s.num_cells()), 0.0);
    for (const auto& e : s.entries()) {
        const std::size_t idx =
            base + static_cast<std::size_t>(e.cell.channel_offset) * s.slotframe_size() +
            static_cast<std::size_t>(e.cell.timeslot);
        v[idx] = cell_code(g, e);
    }
}

// One node's own schedule: TSCH entries are Tx- or Rx-typed, so cells where
// the node transmits encode into (0, 0.5] and cells where it receives into
// (0.5, 1]; untouched cells stay 0.
inline void append_node_plane(std::vector<double>& v, const NetworkGraph& g,
                              const TschSchedule& s, NodeId node) {
    const std::size_t base = v.size();
    v.resize(base + static_cast<std::size_t>(s.num_cells()), 0.0);
    for (const auto& e : s.entries()) {
        if (e.src != node && e.dst != node) continue;
        const std::size_t idx =
            base + static_cast<std::size_t>(e.cell.channel_offset) * s.slotframe_size() +
            static_cast<std::size_t>(e.cell.timeslot);
        v[idx] = 0.5 * cell_code(g, e) + (e.dst == node ? 0.5 : 0.0);
    }
}

inline double link_code(int link_index, int num_links) {
    return static_cast<double>(link_index + 1) / static_cast<double>(num_links);
}

}  // namespace detail

// (P,D,T) + phi + adjacency + schedule plane + last-acted link.
inline std::vector<double> encode_high_state(const World& w, const TschSchedule& s,
                                             const MetricsReport& m, const Requirements& phi,
                                             int last_link_index) {
    std::vector<double> v;
    const int n = static_cast<int>(w.graph.nodes().size());
    v.reserve(static_cast<std::size_t>(3 + 3 + n * n + s.num_cells() + 1));
    v.push_back(m.p_hat);
    v.push_back(m.d_hat);
    v.push_back(m.t_hat);
    v.push_back(phi.alpha);
    v.push_back(phi.beta);
    v.push_back(phi.gamma);
    detail::append_adjacency(v, w.graph);
    detail::append_schedule_plane(v, w.graph, s);
    v.push_back(last_link_index < 0 ? 0.0
                                    : detail::link_code(last_link_index, w.graph.num_links()));
    return v;
}

// (P,D,L) + phi + adjacency + three schedule planes (source row, destination
// row, full occupancy) + the policy's own link.
inline std::vector<double> encode_low_state(const World& w, const TschSchedule& s,
                                            const MetricsReport& m, const Requirements& phi,
                                            int link_index) {
    std::vector<double> v;
    const int n = static_cast<int>(w.graph.nodes().size());
    v.reserve(static_cast<std::size_t>(3 + 3 + n * n + 3 * s.num_cells() + 1));
    v.push_back(m.p_hat);
    v.push_back(m.d_hat);
    v.push_back(m.l_hat);
    v.push_back(phi.alpha);
    v.push_back(phi.beta);
    v.push_back(phi.gamma);
    detail::append_adjacency(v, w.graph);
    const auto& [src, dst] = w.graph.link_at(link_index);
    detail::append_node_plane(v, w.graph, s, src);
    detail::append_node_plane(v, w.graph, s, dst);
    detail::append_schedule_plane(v, w.graph, s);
    v.push_back(detail::link_code(link_index, w.graph.num_links()));
    return v;
}

inline int high_state_size(const World& w) {
    const int n = static_cast<int>(w.graph.nodes().size());
    return 3 + 3 + n * n + w.slotframe_size * w.num_channels + 1;
}

inline int low_state_size(const World& w) {
    const int n = static_cast<int>(w.graph.nodes().size());
    return 3 + 3 + n * n + 3 * w.slotframe_size * w.num_channels + 1;
}

// Feasible starting schedule: exactly one randomly placed cell per
// forwarding-tree edge, so every path is served and both action kinds have
// meaningful early episodes.
inline TschSchedule random_initial_schedule(const World& w, Rng& rng) {
    constexpr int kMaxAttempts = 50;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        TschSchedule s = w.empty_schedule();
        bool ok = true;
        for (const auto& [child, parent] : w.tree.edges()) {
            std::vector<Cell> feasible;
            for (int z = 0; z < s.num_channels() && ok; ++z)
                for (int u = 0; u < s.slotframe_size(); ++u) {
                    Cell c{u, z};
                    if (s.feasible_add(child, parent, c)) feasible.push_back(c);
                }
            if (feasible.empty()) {
                ok = false;
                break;
            }
            std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
            s = add_link(s, child, parent, feasible[pick(rng)]).first;
        }
        if (ok) return s;
    }
    throw EnvironmentError("slotframe too small to place one cell per tree edge");
}

inline Requirements sample_phi(const EnvConfig& cfg, Rng& rng) {
    static thread_local std::vector<Requirements> cache;
    static thread_local double cache_step = -1.0;
    if (cache_step != cfg.phi_grid_step) {
        cache = Requirements::grid(cfg.phi_grid_step);
        cache_step = cfg.phi_grid_step;
    }
    std::uniform_int_distribution<std::size_t> pick(0, cache.size() - 1);
    return cache[pick(rng)];
}

struct StepOutcome {
    std::vector<double> next_state;
    double reward = 0.0;
    bool terminal = false;
    double cost = 0.0;
    bool penalized = false;
};

// Training environment for one lower-level policy: the link and kind are
// fixed, each step picks a cell for that link. For removal policies the
// reset seeds extra cells of the link so there is something to remove.
class LowCellEnv {
public:
    LowCellEnv(const World& world, int link_index, ActionKind kind, EnvConfig cfg)
        : world_(&world), link_index_(link_index), kind_(kind), cfg_(cfg) {}

    int state_size() const { return low_state_size(*world_); }
    int action_count() const { return world_->slotframe_size * world_->num_channels; }

    std::vector<double> reset(std::uint64_t seed, std::optional<Requirements> phi = {}) {
        rng_.seed(seed);
        return reset_with(rng_, phi);
    }

    std::vector<double> reset_with(Rng& rng, std::optional<Requirements> phi = {}) {
        schedule_ = random_initial_schedule(*world_, rng);
        if (kind_ == ActionKind::Remove) seed_removable_cells(rng);
        phi_ = phi ? *phi : sample_phi(cfg_, rng);
        phi_.validate();
        steps_ = 0;
        finished_ = false;
        metrics_ = eval(rng);
        return state();
    }

    StepOutcome step(int cell_action) { return step_with(rng_, cell_action); }

    StepOutcome step_with(Rng& rng, int cell_action) {
        if (finished_) throw LifecycleError("episode already finished");
        const Cell cell = decode_low_action(cell_action, schedule_);
        const auto& [src, dst] = world_->graph.link_at(link_index_);

        bool feasible;
        if (kind_ == ActionKind::Add)
            std::tie(schedule_, feasible) = add_link(schedule_, src, dst, cell);
        else
            std::tie(schedule_, feasible) = remove_link(schedule_, cell, dst);

        ++steps_;
        metrics_ = eval(rng);
        const double c = cost(metrics_.p_hat, metrics_.d_hat, metrics_.t_hat, phi_);

        StepOutcome out;
        out.penalized = !feasible;
        out.cost = c;
        out.reward = out.penalized ? cfg_.psi : cfg_.upsilon - c;
        out.terminal = out.penalized || steps_ >= cfg_.max_steps;
        finished_ = out.terminal;
        out.next_state = state();
        return out;
    }

    std::vector<double> state() const {
        return encode_low_state(*world_, schedule_, metrics_, phi_, link_index_);
    }
    const TschSchedule& schedule() const { return schedule_; }
    const Requirements& phi() const { return phi_; }

private:
    MetricsReport eval(Rng& rng) {
        return world_->evaluate(schedule_, cfg_.sigma_t, cfg_.sigma_p, cfg_.sigma_d, rng);
    }

    void seed_removable_cells(Rng& rng) {
        const auto& [src, dst] = world_->graph.link_at(link_index_);
        std::uniform_int_distribution<int> extra_count(1, 3);
        const int wanted = extra_count(rng);
        for (int i = 0; i < wanted; ++i) {
            std::vector<Cell> feasible;
            for (int z = 0; z < schedule_.num_channels(); ++z)
                for (int u = 0; u < schedule_.slotframe_size(); ++u) {
                    Cell c{u, z};
                    if (schedule_.feasible_add(src, dst, c)) feasible.push_back(c);
                }
            if (feasible.empty()) break;
            std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
            schedule_ = add_link(schedule_, src, dst, feasible[pick(rng)]).first;
        }
    }

    const World* world_;
    int link_index_;
    ActionKind kind_;
    EnvConfig cfg_;
    Rng rng_{0};
    TschSchedule schedule_;
    Requirements phi_;
    MetricsReport metrics_;
    int steps_ = 0;
    bool finished_ = true;
};

// Hierarchical environment. step_high picks the (link, kind) pair and hands
// back the matching low-policy observation; step_low lands the cell action,
// after which rewards for the step are known (the listing executes the low
// action before scoring the high one).
class HighEnv {
public:
    HighEnv(const World& world, EnvConfig cfg) : world_(&world), cfg_(cfg) {}

    int high_state_dim() const { return high_state_size(*world_); }
    int low_state_dim() const { return low_state_size(*world_); }
    int high_action_count() const { return 2 * world_->graph.num_links(); }
    int low_action_count() const { return world_->slotframe_size * world_->num_channels; }

    std::vector<double> reset(std::uint64_t seed, std::optional<Requirements> phi = {}) {
        rng_.seed(seed);
        schedule_ = random_initial_schedule(*world_, rng_);
        phi_ = phi ? *phi : sample_phi(cfg_, rng_);
        phi_.validate();
        steps_ = 0;
        last_link_ = -1;
        finished_ = false;
        pending_.reset();
        metrics_ = eval();
        return high_state();
    }

    // Returns the observation for the selected link's lower-level policy.
    std::vector<double> step_high(int high_action_id) {
        if (finished_) throw LifecycleError("episode already finished");
        if (pending_) throw LifecycleError("previous high action still awaiting its cell");
        HighAction a = decode_high_action(high_action_id, world_->graph.num_links());
        pending_ = a;
        pending_penalized_ = penalized_high(a, world_->tree, schedule_, world_->graph);
        return encode_low_state(*world_, schedule_, metrics_, phi_, a.link_index);
    }

    StepOutcome step_low(int cell_action) {
        if (finished_) throw LifecycleError("episode already finished");
        if (!pending_) throw LifecycleError("step_low without a pending high action");
        const HighAction a = *pending_;
        pending_.reset();

        const Cell cell = decode_low_action(cell_action, schedule_);
        const auto& [src, dst] = world_->graph.link_at(a.link_index);
        bool feasible;
        if (a.kind == ActionKind::Add)
            std::tie(schedule_, feasible) = add_link(schedule_, src, dst, cell);
        else
            std::tie(schedule_, feasible) = remove_link(schedule_, cell, dst);

        ++steps_;
        last_link_ = a.link_index;
        metrics_ = eval();
        const double c = cost(metrics_.p_hat, metrics_.d_hat, metrics_.t_hat, phi_);

        StepOutcome out;
        out.penalized = pending_penalized_ || !feasible;
        out.cost = c;
        out.reward = out.penalized ? cfg_.psi : cfg_.upsilon - c;
        out.terminal = out.penalized || steps_ >= cfg_.max_steps;
        finished_ = out.terminal;
        out.next_state = high_state();
        return out;
    }

    std::vector<double> high_state() const {
        return encode_high_state(*world_, schedule_, metrics_, phi_, last_link_);
    }
    const TschSchedule& schedule() const { return schedule_; }
    const MetricsReport& metrics() const { return metrics_; }
    const Requirements& phi() const { return phi_; }
    const World& world() const { return *world_; }
    bool finished() const { return finished_; }

private:
    MetricsReport eval() {
        return world_->evaluate(schedule_, cfg_.sigma_t, cfg_.sigma_p, cfg_.sigma_d, rng_);
    }

    const World* world_;
    EnvConfig cfg_;
    Rng rng_{0};
    TschSchedule schedule_;
    Requirements phi_;
    MetricsReport metrics_;
    std::optional<HighAction> pending_;
    bool pending_penalized_ = false;
    int steps_ = 0;
    int last_link_ = -1;
    bool finished_ = true;
};

}  // namespace hrlsched
