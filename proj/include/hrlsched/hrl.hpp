#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <thread>
#include <vector>

#include "hrlsched/common.hpp"
#include "hrlsched/dqn.hpp"
#include "hrlsched/env.hpp"
#include "hrlsched/io.hpp"

namespace hrlsched {

inline const char* kind_name(ActionKind k) { return k == ActionKind::Add ? "add" : "rm"; }

// One trained policy per (link, kind): |E| cell-selection policies for adds
// and |E| for removals, plus the link-management policy on top.
struct PolicyBank {
    std::uint64_t topology_fp = 0;
    std::uint64_t config_hash = 0;
    std::vector<Link> links;  // canonical ordering snapshot
    QNetwork high;
    bool has_high = false;
    std::map<std::pair<int, int>, QNetwork> lows;  // (link_index, kind)

    static std::pair<int, int> key(int link_index, ActionKind kind) {
        return {link_index, kind == ActionKind::Add ? 0 : 1};
    }

    bool has_low(int link_index, ActionKind kind) const {
        return lows.count(key(link_index, kind)) > 0;
    }

    const QNetwork& low(int link_index, ActionKind kind) const {
        auto it = lows.find(key(link_index, kind));
        if (it == lows.end()) {
            const auto& [src, dst] = links.at(static_cast<std::size_t>(link_index));
            throw ConfigError("missing lower-level policy for link " + std::to_string(src) + "->" +
                              std::to_string(dst) + " kind " + kind_name(kind));
        }
        return it->second;
    }

    bool complete() const {
        return has_high && lows.size() == 2 * links.size();
    }
};

inline int greedy_action(const QNetwork& net, const std::vector<double>& state) {
    Eigen::Map<const Eigen::VectorXd> s(state.data(), static_cast<Eigen::Index>(state.size()));
    const Eigen::VectorXd q = net.forward(s);
    int best = 0;
    for (int a = 1; a < q.size(); ++a)
        if (q(a) > q(best)) best = a;
    return best;
}

struct LowTrainOutcome {
    int link_index = 0;
    ActionKind kind = ActionKind::Add;
    QNetwork net;
    QNetwork target;
    std::vector<EpisodeStats> episodes;
    std::string rng_state;
    double holdout_nonpenalized = 0.0;  // fraction of greedy hold-out actions that were feasible
};

// Greedy evaluation on fresh resets the policy never trained on.
inline double holdout_nonpenalized_rate(const World& world, const QNetwork& net, int link_index,
                                        ActionKind kind, const EnvConfig& cfg, std::uint64_t seed,
                                        int cases = 100) {
    int ok = 0;
    for (int i = 0; i < cases; ++i) {
        LowCellEnv env(world, link_index, kind, cfg);
        const auto state = env.reset(mix_seed(seed, 0xC0FFEE + i));
        const int action = greedy_action(net, state);
        if (!env.step(action).penalized) ++ok;
    }
    return static_cast<double>(ok) / cases;
}

// Learning-curve statistic: mean episodic reward over the first and last
// tenth of the episodes.
inline std::pair<double, double> first_last_decile_means(const std::vector<EpisodeStats>& eps) {
    if (eps.empty()) return {0.0, 0.0};
    const std::size_t tenth = std::max<std::size_t>(1, eps.size() / 10);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < tenth; ++i) {
        first += eps[i].total_reward;
        last += eps[eps.size() - 1 - i].total_reward;
    }
    return {first / tenth, last / tenth};
}

inline LowTrainOutcome train_low(const World& world, int link_index, ActionKind kind,
                                 const EnvConfig& env_cfg, const TrainConfig& train_cfg) {
    LowCellEnv env(world, link_index, kind, env_cfg);
    TrainResult r = train_dqn(env, train_cfg);

    LowTrainOutcome out;
    out.link_index = link_index;
    out.kind = kind;
    out.net = std::move(r.net);
    out.target = std::move(r.target);
    out.episodes = std::move(r.episodes);
    out.rng_state = std::move(r.rng_state);
    out.holdout_nonpenalized =
        holdout_nonpenalized_rate(world, out.net, link_index, kind, env_cfg, train_cfg.seed);
    return out;
}

// Trains every (link, kind) policy; jobs run in a bounded pool, each with a
// seed derived from its policy index so results do not depend on scheduling.
inline std::vector<LowTrainOutcome> train_low_all(const World& world, const EnvConfig& env_cfg,
                                                  const TrainConfig& train_cfg, int jobs = 1) {
    struct Job {
        int link_index;
        ActionKind kind;
    };
    std::vector<Job> todo;
    for (int li = 0; li < world.graph.num_links(); ++li) {
        todo.push_back({li, ActionKind::Add});
        todo.push_back({li, ActionKind::Remove});
    }
    std::vector<LowTrainOutcome> results(todo.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            TrainConfig cfg = train_cfg;
            cfg.seed = mix_seed(train_cfg.seed, i);
            results[i] = train_low(world, todo[i].link_index, todo[i].kind, env_cfg, cfg);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
}

// Adapter exposing the hierarchy as a flat environment for the trainer: the
// high policy picks (link, kind) and the matching frozen low policy supplies
// the cell greedily.
class HighEnvWithBank {
public:
    HighEnvWithBank(const World& world, const PolicyBank& bank, EnvConfig cfg)
        : env_(world, cfg), bank_(&bank) {
        for (int li = 0; li < world.graph.num_links(); ++li)
            for (ActionKind k : {ActionKind::Add, ActionKind::Remove})
                bank.low(li, k);  // fail early if a checkpoint is missing
    }

    int state_size() const { return env_.high_state_dim(); }
    int action_count() const { return env_.high_action_count(); }

    std::vector<double> reset(std::uint64_t seed) { return env_.reset(seed, phi_override_); }
    std::vector<double> reset(std::uint64_t seed, std::optional<Requirements> phi) {
        return env_.reset(seed, phi);
    }
    void fix_phi(std::optional<Requirements> phi) { phi_override_ = phi; }

    StepOutcome step(int high_action) {
        const HighAction a = decode_high_action(high_action, env_.world().graph.num_links());
        const auto low_state = env_.step_high(high_action);
        const int cell = greedy_action(bank_->low(a.link_index, a.kind), low_state);
        return env_.step_low(cell);
    }

    HighEnv& env() { return env_; }

private:
    HighEnv env_;
    const PolicyBank* bank_;
    std::optional<Requirements> phi_override_;
};

inline TrainResult train_high(const World& world, const PolicyBank& bank, const EnvConfig& env_cfg,
                              const TrainConfig& train_cfg) {
    HighEnvWithBank env(world, bank, env_cfg);
    return train_dqn(env, train_cfg);
}

struct SynthesisResult {
    TschSchedule schedule;
    double cost = 0.0;
    bool stopped_immediately = false;  // first greedy action was already penalized
    std::vector<double> visited_costs;  // reset state first, then each non-penalized step
    int steps_taken = 0;
};

// Greedy rollout for a fixed requirement tuple with noise off; returns the
// best-cost schedule seen along the trajectory.
inline SynthesisResult synthesize(const World& world, const PolicyBank& bank,
                                  const Requirements& phi, int budget, std::uint64_t seed,
                                  EnvConfig cfg = {}) {
    phi.validate();
    if (!bank.has_high) throw ConfigError("policy bank has no higher-level policy");
    cfg.sigma_t = cfg.sigma_p = cfg.sigma_d = 0.0;
    HighEnvWithBank env(world, bank, cfg);

    SynthesisResult best;
    auto state = env.reset(seed, phi);
    const MetricsReport& m0 = env.env().metrics();
    best.schedule = env.env().schedule();
    best.cost = cost(m0.p_hat, m0.d_hat, m0.t_hat, phi);
    best.visited_costs.push_back(best.cost);

    for (int t = 0; t < budget; ++t) {
        const int a = greedy_action(bank.high, state);
        const StepOutcome out = env.step(a);
        ++best.steps_taken;
        if (out.penalized) {
            if (t == 0) best.stopped_immediately = true;
            break;
        }
        best.visited_costs.push_back(out.cost);
        if (out.cost < best.cost) {
            best.cost = out.cost;
            best.schedule = env.env().schedule();
        }
        if (out.terminal) break;
        state = out.next_state;
    }
    return best;
}

// Uniform-random hierarchy rollout; the Monte-Carlo baseline for greedy runs.
inline double random_rollout_cost(const World& world, const Requirements& phi, int budget,
                                  std::uint64_t seed, EnvConfig cfg = {}) {
    cfg.sigma_t = cfg.sigma_p = cfg.sigma_d = 0.0;
    HighEnv env(world, cfg);
    Rng rng(mix_seed(seed, 0xBA5E));
    env.reset(seed, phi);
    const MetricsReport& m0 = env.metrics();
    double best = cost(m0.p_hat, m0.d_hat, m0.t_hat, phi);
    std::uniform_int_distribution<int> high(0, env.high_action_count() - 1);
    std::uniform_int_distribution<int> low(0, env.low_action_count() - 1);
    for (int t = 0; t < budget; ++t) {
        env.step_high(high(rng));
        const StepOutcome out = env.step_low(low(rng));
        if (out.penalized) break;
        best = std::min(best, out.cost);
        if (out.terminal) break;
    }
    return best;
}

// --- bank persistence ---

inline std::string low_policy_filename(const Link& link, ActionKind kind) {
    return "low_" + std::to_string(link.first) + "_" + std::to_string(link.second) + "_" +
           kind_name(kind) + ".json";
}

// Full training state per policy, for resumable checkpoints; a bank saved
// without it still loads fine for inference.
struct BankCheckpoints {
    std::map<std::pair<int, int>, Checkpoint> lows;
    std::optional<Checkpoint> high;
};

inline void save_bank(const PolicyBank& bank, const std::string& dir,
                      const BankCheckpoints* full = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json manifest;
    manifest["format_version"] = 1;
    manifest["topology_fingerprint"] = hex64(bank.topology_fp);
    manifest["config_hash"] = hex64(bank.config_hash);
    manifest["links"] = json::array();
    for (const auto& [src, dst] : bank.links) manifest["links"].push_back({src, dst});
    manifest["high"] = bank.has_high ? "high.json" : "";
    json lows = json::array();
    for (const auto& [key, net] : bank.lows) {
        const Link& link = bank.links.at(static_cast<std::size_t>(key.first));
        const ActionKind kind = key.second == 0 ? ActionKind::Add : ActionKind::Remove;
        const std::string file = low_policy_filename(link, kind);
        lows.push_back({{"src", link.first},
                        {"dst", link.second},
                        {"kind", kind_name(kind)},
                        {"file", file}});
        Checkpoint ck{net, net, 0, ""};
        if (full) {
            if (auto it = full->lows.find(key); it != full->lows.end()) ck = it->second;
        }
        write_json_file((fs::path(dir) / file).string(), checkpoint_to_json(ck));
    }
    manifest["lows"] = std::move(lows);
    if (bank.has_high) {
        Checkpoint ck{bank.high, bank.high, 0, ""};
        if (full && full->high) ck = *full->high;
        write_json_file((fs::path(dir) / "high.json").string(), checkpoint_to_json(ck));
    }
    write_json_file((fs::path(dir) / "manifest.json").string(), manifest);
}

inline PolicyBank load_bank(const std::string& dir, const NetworkGraph& graph) {
    namespace fs = std::filesystem;
    const json manifest = read_json_file((fs::path(dir) / "manifest.json").string());
    PolicyBank bank;
    bank.topology_fp = std::stoull(manifest.at("topology_fingerprint").get<std::string>(), nullptr, 16);
    bank.config_hash = std::stoull(manifest.at("config_hash").get<std::string>(), nullptr, 16);
    if (bank.topology_fp != topology_fingerprint(graph))
        throw ConfigError("policy bank was trained on a different topology");
    for (const auto& l : manifest.at("links"))
        bank.links.emplace_back(l.at(0).get<NodeId>(), l.at(1).get<NodeId>());
    for (const auto& l : manifest.at("lows")) {
        const Link link{l.at("src").get<NodeId>(), l.at("dst").get<NodeId>()};
        const ActionKind kind =
            l.at("kind").get<std::string>() == "add" ? ActionKind::Add : ActionKind::Remove;
        const Checkpoint ck =
            checkpoint_from_json(read_json_file((fs::path(dir) / l.at("file").get<std::string>()).string()));
        bank.lows[PolicyBank::key(graph.link_index(link.first, link.second), kind)] = ck.net;
    }
    const std::string high_file = manifest.at("high").get<std::string>();
    if (!high_file.empty()) {
        bank.high = checkpoint_from_json(read_json_file((fs::path(dir) / high_file).string())).net;
        bank.has_high = true;
    }
    return bank;
}

}  // namespace hrlsched
