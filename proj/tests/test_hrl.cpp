#include <gtest/gtest.h>

#include <filesystem>

#include "hrlsched/hrl.hpp"
#include "hrlsched/io.hpp"
#include "support/topologies.hpp"

using namespace hrlsched;
using namespace testsupport;

namespace {

// Low policy rigged to always pick one fixed cell, regardless of state.
QNetwork rigged_low(const World& w, int preferred_cell) {
    Rng rng(0);
    QNetwork net({low_state_size(w), w.slotframe_size * w.num_channels}, rng);
    net.weights()[0].setZero();
    net.biases()[0].setZero();
    net.biases()[0](preferred_cell) = 1.0;
    return net;
}

PolicyBank rigged_bank(const World& w) {
    PolicyBank bank;
    bank.topology_fp = topology_fingerprint(w.graph);
    bank.links = w.graph.links();
    for (int li = 0; li < w.graph.num_links(); ++li) {
        bank.lows[PolicyBank::key(li, ActionKind::Add)] = rigged_low(w, (2 * li) % 34);
        bank.lows[PolicyBank::key(li, ActionKind::Remove)] = rigged_low(w, (2 * li + 1) % 34);
    }
    Rng rng(1);
    bank.high = QNetwork({high_state_size(w), 2 * w.graph.num_links()}, rng);
    bank.has_high = true;
    return bank;
}

// Cut-down profile for mechanics-only hierarchy tests; policy quality at the
// proper desk scale is the acceptance suite's job.
TrainConfig smoke_train(std::uint64_t seed) {
    TrainConfig cfg = TrainConfig::desk_scale(seed);
    cfg.total_steps = 8000;
    cfg.capacity = 8000;
    cfg.learning_starts = 300;
    cfg.hidden = {64, 64};
    return cfg;
}

const World& square_world() {
    static const World w = make_world(square_topology());
    return w;
}

}  // namespace

TEST(HierarchyRouting, EveryHighActionDispatchesItsOwnLowPolicy) {
    const World& w = square_world();
    const PolicyBank bank = rigged_bank(w);
    for (int id = 0; id < 2 * w.graph.num_links(); ++id) {
        const HighAction a = decode_high_action(id, w.graph.num_links());
        const QNetwork& net = bank.low(a.link_index, a.kind);
        // the rigged marker identifies the policy bit-exactly
        const int marker = a.kind == ActionKind::Add ? (2 * a.link_index) % 34
                                                     : (2 * a.link_index + 1) % 34;
        Eigen::VectorXd probe = Eigen::VectorXd::Zero(low_state_size(w));
        int best = 0;
        const Eigen::VectorXd q = net.forward(probe);
        for (int c = 1; c < q.size(); ++c)
            if (q(c) > q(best)) best = c;
        EXPECT_EQ(best, marker) << "high action " << id;
    }
}

TEST(HierarchyRouting, ExecutedCellComesFromTheDispatchedPolicy) {
    const World& w = square_world();
    const PolicyBank bank = rigged_bank(w);
    for (const auto& [child, parent] : w.tree.edges()) {
        const int li = w.graph.link_index(child, parent);
        HighEnvWithBank env(w, bank, {});
        env.reset(11, Requirements{0.5, 0.3, 0.2});
        const int before = env.env().schedule().count_link_cells(child, parent);
        const StepOutcome out =
            env.step(encode_high_action({ActionKind::Add, li}, w.graph.num_links()));
        const Cell expected = decode_low_action((2 * li) % 34, env.env().schedule());
        if (!out.penalized) {
            const ScheduledLink* e = env.env().schedule().at(expected);
            ASSERT_NE(e, nullptr);
            EXPECT_EQ(e->src, child);
            EXPECT_EQ(e->dst, parent);
            EXPECT_EQ(env.env().schedule().count_link_cells(child, parent), before + 1);
        }
    }
}

TEST(PolicyBank, MissingLowPolicyNamesTheLink) {
    const World& w = square_world();
    PolicyBank bank = rigged_bank(w);
    const int li = w.graph.link_index(2, 1);
    bank.lows.erase(PolicyBank::key(li, ActionKind::Remove));
    try {
        bank.low(li, ActionKind::Remove);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2->1"), std::string::npos);
        EXPECT_NE(msg.find("rm"), std::string::npos);
    }
    EXPECT_THROW(HighEnvWithBank(w, bank, {}), ConfigError);
}

TEST(Synthesize, ImmediatePenaltyReturnsResetScheduleWithFlag) {
    const World& w = square_world();
    PolicyBank bank = rigged_bank(w);
    // force the greedy high action onto an off-tree link: (1,2) reverses the
    // tree edge (2,1), so adding it is penalized and the rollout dies at once
    bank.high.weights().back().setZero();
    bank.high.biases().back().setZero();
    const int bad = encode_high_action({ActionKind::Add, w.graph.link_index(1, 2)},
                                       w.graph.num_links());
    bank.high.biases().back()(bad) = 5.0;

    const SynthesisResult r = synthesize(w, bank, Requirements{0.5, 0.3, 0.2}, 20, 3);
    EXPECT_TRUE(r.stopped_immediately);
    EXPECT_EQ(r.schedule.entries().size(), w.tree.edges().size());  // the reset schedule
    EXPECT_EQ(r.visited_costs.size(), 1u);
}

TEST(TrainLow, AddPolicyLearnsToAvoidPenalties) {
    const World& w = square_world();
    const int li = w.graph.link_index(4, 2);
    const LowTrainOutcome out =
        train_low(w, li, ActionKind::Add, {}, TrainConfig::desk_scale(5));
    EXPECT_GE(out.holdout_nonpenalized, 0.95);
    const auto [first, last] = first_last_decile_means(out.episodes);
    EXPECT_GT(last, first);
}

TEST(TrainLow, RemovePolicyPicksTheOnlyRemovableCell) {
    const World& w = square_world();
    const int li = w.graph.link_index(4, 2);
    const LowTrainOutcome out =
        train_low(w, li, ActionKind::Remove, {}, TrainConfig::desk_scale(6));
    EXPECT_GE(out.holdout_nonpenalized, 0.95);
    const auto [first, last] = first_last_decile_means(out.episodes);
    EXPECT_GT(last, first);

    // exactly one cell holds (4,2) and no other cell has dst 2: the greedy
    // action must pick it (a random policy hits it with probability 1/34)
    TschSchedule s = w.empty_schedule();
    s = add_link(s, 2, 1, Cell{0, 0}).first;
    s = add_link(s, 3, 1, Cell{5, 1}).first;
    const Cell target{9, 1};
    s = add_link(s, 4, 2, target).first;
    const MetricsReport m = w.evaluate(s);
    const auto state = encode_low_state(w, s, m, Requirements{0.5, 0.3, 0.2}, li);
    EXPECT_EQ(decode_low_action(greedy_action(out.net, state), s), target);
}

TEST(Hierarchy, TrainSynthesizePersistRoundTrip) {
    const World& w = square_world();
    const EnvConfig env_cfg;
    const auto lows = train_low_all(w, env_cfg, smoke_train(7), 2);
    EXPECT_EQ(lows.size(), 2u * w.graph.num_links());
    PolicyBank bank;
    bank.topology_fp = topology_fingerprint(w.graph);
    bank.links = w.graph.links();
    for (const auto& lo : lows) bank.lows[PolicyBank::key(lo.link_index, lo.kind)] = lo.net;

    const TrainResult high = train_high(w, bank, env_cfg, smoke_train(8));
    bank.high = high.net;
    bank.has_high = true;
    EXPECT_TRUE(bank.complete());

    const Requirements phi{0.8, 0.1, 0.1};
    const SynthesisResult synth = synthesize(w, bank, phi, 30, 99);

    // synthesized schedules respect the slotframe invariants and keep every
    // tree edge covered
    validate_against(synth.schedule, w.graph);
    for (const auto& [child, parent] : w.tree.edges())
        EXPECT_GE(synth.schedule.count_link_cells(child, parent), 1);

    // min-cost selection: the returned schedule's cost equals the minimum of
    // the visited costs, recomputed independently from the schedule itself
    const MetricsReport m = w.evaluate(synth.schedule);
    EXPECT_DOUBLE_EQ(synth.cost, cost(m.p_hat, m.d_hat, m.t_hat, phi));
    double min_visited = synth.visited_costs.front();
    for (double c : synth.visited_costs) min_visited = std::min(min_visited, c);
    EXPECT_DOUBLE_EQ(synth.cost, min_visited);

    // budget 0 returns the reset schedule
    const SynthesisResult empty = synthesize(w, bank, phi, 0, 99);
    EXPECT_EQ(empty.schedule.entries().size(), w.tree.edges().size());

    // determinism: same bank, phi, seed -> identical schedule file
    const SynthesisResult again = synthesize(w, bank, phi, 30, 99);
    EXPECT_EQ(schedule_to_json(again.schedule).dump(), schedule_to_json(synth.schedule).dump());

    // bank persistence round trip
    const std::string dir =
        (std::filesystem::temp_directory_path() / "hrlsched_bank_test").string();
    std::filesystem::remove_all(dir);
    save_bank(bank, dir);
    const PolicyBank loaded = load_bank(dir, w.graph);
    EXPECT_TRUE(loaded.complete());
    const SynthesisResult from_loaded = synthesize(w, loaded, phi, 30, 99);
    EXPECT_EQ(schedule_to_json(from_loaded.schedule).dump(),
              schedule_to_json(synth.schedule).dump());
    // wrong topology is rejected
    EXPECT_THROW(load_bank(dir, chain_topology(3)), ConfigError);
    std::filesystem::remove_all(dir);
}
