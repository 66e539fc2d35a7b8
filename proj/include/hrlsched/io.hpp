#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hrlsched/common.hpp"
#include "hrlsched/dqn.hpp"
#include "hrlsched/env.hpp"
#include "hrlsched/metrics.hpp"
#include "hrlsched/netmodel.hpp"
#include "hrlsched/schedule.hpp"

namespace hrlsched {

using json = nlohmann::ordered_json;

// --- topology files ---

inline json topology_to_json(const NetworkGraph& g) {
    json j;
    j["nodes"] = json::array();
    for (const auto& n : g.nodes())
        j["nodes"].push_back({{"id", n.node_id}, {"x", n.x_m}, {"y", n.y_m}});
    j["tx_range_m"] = g.tx_range_m();
    j["if_range_m"] = g.if_range_m();
    return j;
}

inline NetworkGraph topology_from_json(const json& j) {
    std::vector<NodePosition> pos;
    for (const auto& n : j.at("nodes"))
        pos.push_back({n.at("id").get<NodeId>(), n.at("x").get<double>(), n.at("y").get<double>()});
    return build_graph(pos, j.at("tx_range_m").get<double>(), j.at("if_range_m").get<double>());
}

// --- schedule files ---

inline json schedule_to_json(const TschSchedule& s) {
    json j;
    j["slotframe_size"] = s.slotframe_size();
    j["num_channels"] = s.num_channels();
    j["slot_duration_ms"] = s.slot_ms();
    j["entries"] = json::array();
    for (const auto& e : s.entries())
        j["entries"].push_back(
            {{"src", e.src}, {"dst", e.dst}, {"u", e.cell.timeslot}, {"ch", e.cell.channel_offset}});
    return j;
}

inline TschSchedule schedule_from_json(const json& j) {
    TschSchedule s(j.at("slotframe_size").get<int>(), j.at("num_channels").get<int>(),
                   j.at("slot_duration_ms").get<double>());
    for (const auto& e : j.at("entries")) {
        Cell c{e.at("u").get<int>(), e.at("ch").get<int>()};
        auto [next, ok] =
            add_link(s, e.at("src").get<NodeId>(), e.at("dst").get<NodeId>(), c);
        if (!ok) throw ConfigError("schedule file violates slotframe feasibility at cell (" +
                                   std::to_string(c.timeslot) + "," +
                                   std::to_string(c.channel_offset) + ")");
        s = std::move(next);
    }
    return s;
}

// --- profiles and environment configuration ---

inline json energy_to_json(const EnergyProfile& e) {
    return json{{"e_tx_uj", e.e_tx_uj},         {"e_rx_uj", e.e_rx_uj},
                {"e_tx_ack_uj", e.e_tx_ack_uj}, {"e_rx_ack_uj", e.e_rx_ack_uj},
                {"e_listen_uj", e.e_listen_uj}, {"p0_mw", e.p0_mw}};
}

inline EnergyProfile energy_from_json(const json& j) {
    EnergyProfile e;
    e.e_tx_uj = j.value("e_tx_uj", e.e_tx_uj);
    e.e_rx_uj = j.value("e_rx_uj", e.e_rx_uj);
    e.e_tx_ack_uj = j.value("e_tx_ack_uj", e.e_tx_ack_uj);
    e.e_rx_ack_uj = j.value("e_rx_ack_uj", e.e_rx_ack_uj);
    e.e_listen_uj = j.value("e_listen_uj", e.e_listen_uj);
    e.p0_mw = j.value("p0_mw", e.p0_mw);
    e.validate();
    return e;
}

inline json traffic_to_json(const TrafficProfile& t) {
    return json{{"t0_pps", t.t0_pps},   {"k_ms", t.k_ms},         {"sigma_t", t.sigma_t},
                {"sigma_p", t.sigma_p}, {"sigma_d", t.sigma_d},   {"rng_seed", t.rng_seed}};
}

inline TrafficProfile traffic_from_json(const json& j) {
    TrafficProfile t;
    t.t0_pps = j.value("t0_pps", t.t0_pps);
    t.k_ms = j.value("k_ms", t.k_ms);
    t.sigma_t = j.value("sigma_t", t.sigma_t);
    t.sigma_p = j.value("sigma_p", t.sigma_p);
    t.sigma_d = j.value("sigma_d", t.sigma_d);
    t.rng_seed = j.value("rng_seed", t.rng_seed);
    t.validate();
    return t;
}

inline json env_config_to_json(const EnvConfig& c) {
    return json{{"max_steps", c.max_steps},
                {"psi", c.psi},
                {"upsilon", c.upsilon},
                {"sigma_t", c.sigma_t},
                {"sigma_p", c.sigma_p},
                {"sigma_d", c.sigma_d},
                {"phi_grid_step", c.phi_grid_step}};
}

inline EnvConfig env_config_from_json(const json& j) {
    EnvConfig c;
    c.max_steps = j.value("max_steps", c.max_steps);
    c.psi = j.value("psi", c.psi);
    c.upsilon = j.value("upsilon", c.upsilon);
    c.sigma_t = j.value("sigma_t", c.sigma_t);
    c.sigma_p = j.value("sigma_p", c.sigma_p);
    c.sigma_d = j.value("sigma_d", c.sigma_d);
    c.phi_grid_step = j.value("phi_grid_step", c.phi_grid_step);
    return c;
}

inline json train_config_to_json(const TrainConfig& c) {
    return json{{"total_steps", c.total_steps},
                {"capacity", c.capacity},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"discount", c.discount},
                {"learning_starts", c.learning_starts},
                {"exploration_fraction", c.exploration_fraction},
                {"eps_min", c.eps_min},
                {"target_update_interval", c.target_update_interval},
                {"train_freq", c.train_freq},
                {"hidden", c.hidden},
                {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
    c.total_steps = j.value("total_steps", c.total_steps);
    c.capacity = j.value("capacity", c.capacity);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.discount = j.value("discount", c.discount);
    c.learning_starts = j.value("learning_starts", c.learning_starts);
    c.exploration_fraction = j.value("exploration_fraction", c.exploration_fraction);
    c.eps_min = j.value("eps_min", c.eps_min);
    c.target_update_interval = j.value("target_update_interval", c.target_update_interval);
    c.train_freq = j.value("train_freq", c.train_freq);
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

// --- network checkpoints ---

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.size();
    const auto cols = rows == 0 ? 0 : j.at(0).size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j.at(r).at(c).get<double>();
    return m;
}

inline json net_params_to_json(const QNetwork& net) {
    json j;
    j["weights"] = json::array();
    j["biases"] = json::array();
    for (const auto& w : net.weights()) j["weights"].push_back(matrix_to_json(w));
    for (const auto& b : net.biases()) {
        json v = json::array();
        for (Eigen::Index i = 0; i < b.size(); ++i) v.push_back(b(i));
        j["biases"].push_back(std::move(v));
    }
    return j;
}

inline void net_params_from_json(const json& j, QNetwork& net) {
    auto& w = net.weights();
    auto& b = net.biases();
    for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] = matrix_from_json(j.at("weights").at(l));
        const auto& bv = j.at("biases").at(l);
        b[l].resize(static_cast<Eigen::Index>(bv.size()));
        for (std::size_t i = 0; i < bv.size(); ++i)
            b[l](static_cast<Eigen::Index>(i)) = bv.at(i).get<double>();
    }
}

}  // namespace detail

struct Checkpoint {
    QNetwork net;
    QNetwork target;
    std::uint64_t step = 0;
    std::string rng_state;
};

inline json checkpoint_to_json(const Checkpoint& ck) {
    json j;
    j["format_version"] = 1;
    j["dims"] = ck.net.dims();
    j["theta"] = detail::net_params_to_json(ck.net);
    j["theta_target"] = detail::net_params_to_json(ck.target);
    j["step"] = ck.step;
    j["rng_state"] = ck.rng_state;
    return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
    if (j.at("format_version").get<int>() != 1) throw ConfigError("unknown checkpoint version");
    Checkpoint ck;
    const auto dims = j.at("dims").get<std::vector<int>>();
    Rng scratch(0);
    ck.net = QNetwork(dims, scratch);
    ck.target = QNetwork(dims, scratch);
    detail::net_params_from_json(j.at("theta"), ck.net);
    detail::net_params_from_json(j.at("theta_target"), ck.target);
    ck.step = j.at("step").get<std::uint64_t>();
    ck.rng_state = j.at("rng_state").get<std::string>();
    return ck;
}

// --- file helpers ---

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

inline std::uint64_t topology_fingerprint(const NetworkGraph& g) {
    return fnv1a(topology_to_json(g).dump());
}

// --- experiment configuration ---

// Everything a run needs: topology, slotframe geometry, profiles, environment
// and training settings. The shipped defaults use the evaluation parameters
// and the laptop-scale training profile.
struct ExperimentConfig {
    NetworkGraph graph = default_grid_topology();
    int slotframe_size = 17;
    int num_channels = 2;
    double slot_ms = 10.0;
    EnergyProfile energy;
    TrafficProfile traffic;
    EnvConfig env;
    TrainConfig train = TrainConfig::desk_scale();
    int synth_budget = 50;

    World make_world() const {
        return World::make(graph, energy, traffic, slotframe_size, num_channels, slot_ms);
    }

    json to_json() const {
        json j;
        j["topology"] = topology_to_json(graph);
        j["slotframe"] = {{"size", slotframe_size},
                          {"channels", num_channels},
                          {"slot_ms", slot_ms}};
        j["energy"] = energy_to_json(energy);
        j["traffic"] = traffic_to_json(traffic);
        j["env"] = env_config_to_json(env);
        j["train"] = train_config_to_json(train);
        j["synth_budget"] = synth_budget;
        return j;
    }

    std::uint64_t hash() const { return fnv1a(to_json().dump()); }

    static ExperimentConfig from_json(const json& j, const std::string& base_dir = ".") {
        ExperimentConfig c;
        if (j.contains("topology")) {
            const auto& t = j.at("topology");
            c.graph = t.is_string()
                          ? topology_from_json(read_json_file(
                                (std::filesystem::path(base_dir) / t.get<std::string>()).string()))
                          : topology_from_json(t);
        }
        if (j.contains("slotframe")) {
            const auto& s = j.at("slotframe");
            c.slotframe_size = s.value("size", c.slotframe_size);
            c.num_channels = s.value("channels", c.num_channels);
            c.slot_ms = s.value("slot_ms", c.slot_ms);
        }
        if (j.contains("energy")) c.energy = energy_from_json(j.at("energy"));
        if (j.contains("traffic")) c.traffic = traffic_from_json(j.at("traffic"));
        if (j.contains("env")) c.env = env_config_from_json(j.at("env"));
        if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
        c.synth_budget = j.value("synth_budget", c.synth_budget);
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        return from_json(read_json_file(path),
                         std::filesystem::path(path).parent_path().string());
    }
};

}  // namespace hrlsched
