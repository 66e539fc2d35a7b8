#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "hrlsched/common.hpp"
#include "hrlsched/env.hpp"

namespace hrlsched {

// Dense Q-value approximator: linear layers with rectified-linear units in
// between, raw Q-values out. Gradients are computed by hand in
// loss_and_gradients; no autodiff anywhere.
class QNetwork {
public:
    struct Gradients {
        std::vector<Eigen::MatrixXd> dw;
        std::vector<Eigen::VectorXd> db;
    };

    QNetwork() = default;

    QNetwork(const std::vector<int>& dims, Rng& rng) : dims_(dims) {
        if (dims.size() < 2) throw ConfigError("network needs input and output dimensions");
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const int fan_in = dims[l];
            const int fan_out = dims[l + 1];
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> u(-limit, limit);
            Eigen::MatrixXd w(fan_out, fan_in);
            for (int r = 0; r < fan_out; ++r)
                for (int c = 0; c < fan_in; ++c) w(r, c) = u(rng);
            w_.push_back(std::move(w));
            b_.push_back(Eigen::VectorXd::Zero(fan_out));
        }
    }

    int input_size() const { return dims_.front(); }
    int output_size() const { return dims_.back(); }
    const std::vector<int>& dims() const { return dims_; }
    std::vector<Eigen::MatrixXd>& weights() { return w_; }
    std::vector<Eigen::VectorXd>& biases() { return b_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
    const std::vector<Eigen::VectorXd>& biases() const { return b_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        if (x.size() != input_size()) throw ContractError("state dimension mismatch");
        Eigen::VectorXd h = x;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            h = (w_[l] * h + b_[l]).eval();
            if (l + 1 < w_.size()) h = h.cwiseMax(0.0);
        }
        return h;
    }

    // Columns are samples.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd h = x;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            h = ((w_[l] * h).colwise() + b_[l]).eval();
            if (l + 1 < w_.size()) h = h.cwiseMax(0.0);
        }
        return h;
    }

    // Mean-squared error on the taken actions' Q-values against fixed targets.
    double loss_for_batch(const Eigen::MatrixXd& states, const std::vector<int>& actions,
                          const Eigen::VectorXd& targets) const {
        const Eigen::MatrixXd q = forward_batch(states);
        double loss = 0.0;
        for (int i = 0; i < static_cast<int>(actions.size()); ++i) {
            const double diff = q(actions[i], i) - targets(i);
            loss += diff * diff;
        }
        return loss / static_cast<double>(actions.size());
    }

    double loss_and_gradients(const Eigen::MatrixXd& states, const std::vector<int>& actions,
                              const Eigen::VectorXd& targets, Gradients& grads) const {
        const int batch = static_cast<int>(actions.size());
        const std::size_t layers = w_.size();

        std::vector<Eigen::MatrixXd> pre(layers);   // pre-activation per layer
        std::vector<Eigen::MatrixXd> act(layers + 1);
        act[0] = states;
        for (std::size_t l = 0; l < layers; ++l) {
            pre[l] = (w_[l] * act[l]).colwise() + b_[l];
            act[l + 1] = (l + 1 < layers) ? pre[l].cwiseMax(0.0) : pre[l];
        }

        double loss = 0.0;
        Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(output_size(), batch);
        for (int i = 0; i < batch; ++i) {
            const double diff = act[layers](actions[i], i) - targets(i);
            loss += diff * diff;
            delta(actions[i], i) = 2.0 * diff / static_cast<double>(batch);
        }
        loss /= static_cast<double>(batch);

        grads.dw.assign(layers, {});
        grads.db.assign(layers, {});
        for (std::size_t l = layers; l-- > 0;) {
            grads.dw[l] = delta * act[l].transpose();
            grads.db[l] = delta.rowwise().sum();
            if (l > 0)
                delta = (w_[l].transpose() * delta)
                            .cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        return loss;
    }

    void apply_sgd(const Gradients& grads, double learning_rate) {
        for (std::size_t l = 0; l < w_.size(); ++l) {
            w_[l] -= learning_rate * grads.dw[l];
            b_[l] -= learning_rate * grads.db[l];
        }
        for (std::size_t l = 0; l < w_.size(); ++l)
            if (!w_[l].allFinite() || !b_[l].allFinite())
                throw ContractError("non-finite network parameters after update");
    }

private:
    std::vector<int> dims_;
    std::vector<Eigen::MatrixXd> w_;  // w_[l]: dims[l+1] x dims[l]
    std::vector<Eigen::VectorXd> b_;
};

// Epsilon-greedy with lowest-index tie break on the exploit path.
inline int select_action(const QNetwork& net, const Eigen::VectorXd& state, double epsilon,
                         Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw ContractError("epsilon must lie in [0,1]");
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
        std::uniform_int_distribution<int> pick(0, net.output_size() - 1);
        return pick(rng);
    }
    const Eigen::VectorXd q = net.forward(state);
    int best = 0;
    for (int a = 1; a < q.size(); ++a)
        if (q(a) > q(best)) best = a;
    return best;
}

// Linear decay from 1.0 to eps_min over exploration_fraction x total_steps,
// constant afterwards.
inline double epsilon_at(std::uint64_t step, std::uint64_t total_steps,
                         double exploration_fraction, double eps_min) {
    const double horizon = exploration_fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0) return eps_min;
    const double progress = static_cast<double>(step) / horizon;
    if (progress >= 1.0) return eps_min;
    return 1.0 + (eps_min - 1.0) * progress;
}

struct Transition {
    Eigen::VectorXd state;
    int action = 0;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool terminal = false;
};

// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
        data_.reserve(capacity_);
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return data_[i]; }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
        std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
        std::vector<std::size_t> out(batch);
        for (auto& i : out) i = pick(rng);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

struct TrainConfig {
    std::uint64_t total_steps = 500000;
    std::size_t capacity = 100000;
    std::size_t batch_size = 512;
    double learning_rate = 0.001;
    double discount = 0.8;
    std::size_t learning_starts = 5000;
    double exploration_fraction = 0.7;
    double eps_min = 0.01;
    std::uint64_t target_update_interval = 10000;  // in environment steps
    std::uint64_t train_freq = 1;                  // gradient update every n-th step
    std::vector<int> hidden{128, 128};
    std::uint64_t seed = 0;

    void validate() const {
        if (discount <= 0.0 || discount > 1.0) throw ConfigError("discount must be in (0,1]");
        if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
        if (batch_size > capacity) throw ConfigError("batch size exceeds replay capacity");
        if (train_freq == 0 || target_update_interval == 0)
            throw ConfigError("train_freq and target_update_interval must be positive");
    }

    // Short-budget profile for laptop-scale experiments; the default-built
    // config keeps the published hyperparameters. The smaller batch, higher
    // learning rate and exploration floor compensate for the 25x shorter run.
    static TrainConfig desk_scale(std::uint64_t seed = 0) {
        TrainConfig c;
        c.total_steps = 20000;
        c.capacity = 20000;
        c.batch_size = 64;
        c.learning_rate = 0.002;
        c.learning_starts = 500;
        c.eps_min = 0.05;
        c.target_update_interval = 500;
        c.seed = seed;
        return c;
    }
};

// One sampled gradient step; nullopt when the buffer is still warming up.
inline std::optional<double> train_step(QNetwork& net, const QNetwork& target,
                                        const ReplayBuffer& buffer, const TrainConfig& cfg,
                                        Rng& rng) {
    if (buffer.size() == 0) return std::nullopt;
    const std::size_t batch = std::min(cfg.batch_size, buffer.size());
    const auto idx = buffer.sample_indices(batch, rng);

    Eigen::MatrixXd states(net.input_size(), batch);
    Eigen::MatrixXd next_states(net.input_size(), batch);
    std::vector<int> actions(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const Transition& t = buffer.at(idx[i]);
        states.col(static_cast<int>(i)) = t.state;
        next_states.col(static_cast<int>(i)) = t.next_state;
        actions[i] = t.action;
    }

    const Eigen::MatrixXd q_next = target.forward_batch(next_states);
    Eigen::VectorXd targets(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const Transition& t = buffer.at(idx[i]);
        targets(static_cast<int>(i)) =
            t.terminal ? t.reward
                       : t.reward + cfg.discount * q_next.col(static_cast<int>(i)).maxCoeff();
    }

    QNetwork::Gradients grads;
    const double loss = net.loss_and_gradients(states, actions, targets, grads);
    net.apply_sgd(grads, cfg.learning_rate);
    return loss;
}

struct EpisodeStats {
    double total_reward = 0.0;
    int length = 0;
};

struct TrainResult {
    QNetwork net;
    QNetwork target;
    std::vector<EpisodeStats> episodes;
    std::uint64_t steps = 0;
    std::string rng_state;  // for checkpoint resumability
};

// Environments provide: state_size(), action_count(),
// reset(seed) -> std::vector<double>, step(action) -> StepOutcome.
template <typename Env>
TrainResult train_dqn(Env& env, const TrainConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::vector<int> dims{env.state_size()};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(env.action_count());

    TrainResult result;
    result.net = QNetwork(dims, rng);
    result.target = result.net;
    ReplayBuffer buffer(cfg.capacity);

    std::uint64_t episode = 0;
    auto to_vec = [](const std::vector<double>& v) {
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))
            .eval();
    };
    Eigen::VectorXd state = to_vec(env.reset(mix_seed(cfg.seed, episode)));
    EpisodeStats ep;

    for (std::uint64_t step = 0; step < cfg.total_steps; ++step) {
        const double eps =
            epsilon_at(step, cfg.total_steps, cfg.exploration_fraction, cfg.eps_min);
        const int action = select_action(result.net, state, eps, rng);
        const StepOutcome out = env.step(action);
        Eigen::VectorXd next = to_vec(out.next_state);
        buffer.push({state, action, out.reward, next, out.terminal});
        ep.total_reward += out.reward;
        ep.length += 1;

        if (buffer.size() > cfg.learning_starts && step % cfg.train_freq == 0)
            train_step(result.net, result.target, buffer, cfg, rng);
        if ((step + 1) % cfg.target_update_interval == 0) result.target = result.net;

        if (out.terminal) {
            result.episodes.push_back(ep);
            ep = EpisodeStats{};
            ++episode;
            state = to_vec(env.reset(mix_seed(cfg.seed, episode)));
        } else {
            state = std::move(next);
        }
    }
    result.steps = cfg.total_steps;
    result.rng_state = rng_state_string(rng);
    return result;
}

}  // namespace hrlsched
