#include <gtest/gtest.h>

#include <set>

#include "hrlsched/env.hpp"
#include "support/topologies.hpp"

using namespace hrlsched;
using namespace testsupport;

TEST(Cost, HandValues) {
    EXPECT_DOUBLE_EQ(cost(0.4, 0.0, 0.0, {1, 0, 0}), 0.4);
    EXPECT_DOUBLE_EQ(cost(0.0, 0.0, 1.0, {0, 0, 1}), -1.0);
    EXPECT_NEAR(cost(0.2, 0.5, 0.8, {0.5, 0.3, 0.2}), 0.09, 1e-12);
}

TEST(Cost, RejectsBadInputs) {
    EXPECT_THROW(cost(0.5, 0.5, 0.5, {0.5, 0.5, 0.5}), ContractError);
    EXPECT_THROW(cost(1.5, 0.0, 0.0, {1, 0, 0}), ContractError);
}

TEST(RequirementsGrid, CardinalityAndExactSums) {
    const auto g01 = Requirements::grid(0.1);
    EXPECT_EQ(g01.size(), 66u);
    for (const auto& r : g01) {
        EXPECT_EQ(r.alpha + r.beta + r.gamma, 1.0);  // exact by construction
        EXPECT_GE(r.gamma, -1e-12);
    }
    EXPECT_EQ(Requirements::grid(0.5).size(), 6u);
    EXPECT_EQ(Requirements::grid(0.2).size(), 21u);
    // uniqueness
    std::set<std::pair<double, double>> seen;
    for (const auto& r : g01) EXPECT_TRUE(seen.insert({r.alpha, r.beta}).second);
}

TEST(HighActionCodec, RoundTrip) {
    const NetworkGraph g = default_grid_topology();
    const int n = g.num_links();
    for (int id = 0; id < 2 * n; ++id) {
        const HighAction a = decode_high_action(id, n);
        EXPECT_EQ(encode_high_action(a, n), id);
    }
    EXPECT_THROW(decode_high_action(2 * n, n), ContractError);
    EXPECT_THROW(decode_high_action(-1, n), ContractError);
}

TEST(LowActionCodec, RoundTrip) {
    const TschSchedule s(17, 2, 10.0);
    for (int id = 0; id < s.num_cells(); ++id) {
        const Cell c = decode_low_action(id, s);
        EXPECT_EQ(encode_low_action(c, s), id);
        EXPECT_TRUE(s.in_bounds(c));
    }
    EXPECT_THROW(decode_low_action(34, s), ContractError);
}

TEST(PenalizedHigh, AddOffTreeLink) {
    const World w = make_world(default_grid_topology());
    Rng rng(1);
    const TschSchedule s = random_initial_schedule(w, rng);
    // (5,9) exists in the graph but 9 forwards through 5, not the reverse
    const HighAction add_off{ActionKind::Add, w.graph.link_index(5, 9)};
    EXPECT_TRUE(penalized_high(add_off, w.tree, s, w.graph));
    const HighAction add_on{ActionKind::Add, w.graph.link_index(5, 2)};
    EXPECT_FALSE(penalized_high(add_on, w.tree, s, w.graph));
}

TEST(PenalizedHigh, RemoveDependsOnRemainingCells) {
    const World w = make_world(default_grid_topology());
    Rng rng(1);
    TschSchedule s = random_initial_schedule(w, rng);
    const HighAction rm{ActionKind::Remove, w.graph.link_index(2, 1)};
    // one cell serves (2,1): removing the last cell would orphan the edge
    ASSERT_EQ(s.count_link_cells(2, 1), 1);
    EXPECT_TRUE(penalized_high(rm, w.tree, s, w.graph));
    // add a second cell; now removal is allowed
    for (int u = 0; u < 17; ++u) {
        auto [next, ok] = add_link(s, 2, 1, Cell{u, 0});
        if (ok) {
            s = std::move(next);
            break;
        }
    }
    ASSERT_EQ(s.count_link_cells(2, 1), 2);
    EXPECT_FALSE(penalized_high(rm, w.tree, s, w.graph));
    // removals of links outside the forwarding paths are always penalized
    const HighAction rm_off{ActionKind::Remove, w.graph.link_index(1, 2)};
    EXPECT_TRUE(penalized_high(rm_off, w.tree, s, w.graph));
}

TEST(HighEnvReset, StateLengthMatchesTopology) {
    const World w = make_world(default_grid_topology());
    HighEnv env(w, {});
    const auto s = env.reset(7, Requirements{1, 0, 0});
    // 3 metrics + 3 weights + 100 adjacency + 34 cells + 1 link slot
    EXPECT_EQ(s.size(), 141u);
    EXPECT_EQ(high_state_size(w), 141);
    EXPECT_EQ(low_state_size(w), 209);
    for (double v : s) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(HighEnvReset, DeterministicForSeed) {
    const World w = make_world(default_grid_topology());
    HighEnv a(w, {}), b(w, {});
    EXPECT_EQ(a.reset(123), b.reset(123));
    EXPECT_NE(a.reset(123), a.reset(124));
}

TEST(HighEnvReset, SampledPhiSumsToOne) {
    const World w = make_world(default_grid_topology());
    HighEnv env(w, {});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        env.reset(seed);
        const Requirements& phi = env.phi();
        EXPECT_EQ(phi.alpha + phi.beta + phi.gamma, 1.0);
    }
}

TEST(HighEnvReset, TooSmallSlotframeIsAnEnvironmentError) {
    // square topology has 3 tree edges but a 2x1 frame offers only 2 cells
    const World w = make_world(square_topology(), 2, 1);
    HighEnv env(w, {});
    EXPECT_THROW(env.reset(1), EnvironmentError);
}

TEST(HighEnvReset, OneCellPerTreeEdge) {
    const World w = make_world(default_grid_topology());
    HighEnv env(w, {});
    env.reset(99);
    EXPECT_EQ(env.schedule().entries().size(), w.tree.edges().size());
    for (const auto& [child, parent] : w.tree.edges())
        EXPECT_EQ(env.schedule().count_link_cells(child, parent), 1);
}

TEST(HighEnvStep, PenalizedLowActionTerminatesWithPsi) {
    const World w = make_world(default_grid_topology());
    HighEnv env(w, {});
    env.reset(5, Requirements{0.5, 0.3, 0.2});
    // pick an on-tree add, then deliberately land on an occupied cell
    const int link = w.graph.link_index(2, 1);
    env.step_high(encode_high_action({ActionKind::Add, link}, w.graph.num_links()));
    const auto& occupied = env.schedule().entries().front();
    const StepOutcome out = env.step_low(encode_low_action(occupied.cell, env.schedule()));
    EXPECT_TRUE(out.penalized);
    EXPECT_TRUE(out.terminal);
    EXPECT_DOUBLE_EQ(out.reward, -1.0);
    EXPECT_THROW(env.step_high(0), LifecycleError);
}

TEST(HighEnvStep, FeasibleActionRewardIsUpsilonMinusCost) {
    const World w = make_world(default_grid_topology());
    HighEnv env(w, {});
    env.reset(5, Requirements{0.5, 0.3, 0.2});
    const int link = w.graph.link_index(2, 1);
    env.step_high(encode_high_action({ActionKind::Add, link}, w.graph.num_links()));
    // find a cell that is actually free for (2,1)
    int action = -1;
    for (int id = 0; id < 34; ++id) {
        const Cell c = decode_low_action(id, env.schedule());
        if (env.schedule().feasible_add(2, 1, c)) {
            action = id;
            break;
        }
    }
    ASSERT_GE(action, 0);
    const StepOutcome out = env.step_low(action);
    EXPECT_FALSE(out.penalized);
    EXPECT_DOUBLE_EQ(out.reward, 2.0 - out.cost);
    EXPECT_GE(out.reward, 1.0);
    EXPECT_LE(out.reward, 3.0);
    EXPECT_FALSE(out.terminal);
}

TEST(HighEnvStep, BudgetExhaustionTerminatesNormally) {
    const World w = make_world(default_grid_topology());
    EnvConfig cfg;
    cfg.max_steps = 3;
    HighEnv env(w, cfg);
    env.reset(17, Requirements{0.5, 0.3, 0.2});
    const int link = w.graph.link_index(2, 1);
    int steps = 0;
    StepOutcome out;
    while (!env.finished()) {
        env.step_high(encode_high_action({ActionKind::Add, link}, w.graph.num_links()));
        int action = -1;
        for (int id = 0; id < 34; ++id)
            if (env.schedule().feasible_add(2, 1, decode_low_action(id, env.schedule()))) {
                action = id;
                break;
            }
        ASSERT_GE(action, 0);
        out = env.step_low(action);
        ++steps;
        ASSERT_LE(steps, 3);
    }
    EXPECT_EQ(steps, 3);
    EXPECT_TRUE(out.terminal);
    EXPECT_FALSE(out.penalized);  // budget exhaustion keeps the normal reward
    EXPECT_GE(out.reward, 1.0);
}

TEST(RewardRanges, DisjointOverTenThousandRandomEpisodes) {
    const World w = make_world(default_grid_topology());
    HighEnv env(w, {});
    Rng rng(100);
    std::uniform_int_distribution<int> high(0, 2 * w.graph.num_links() - 1);
    std::uniform_int_distribution<int> low(0, 33);
    for (int ep = 0; ep < 10000; ++ep) {
        env.reset(1000 + ep);
        while (!env.finished()) {
            env.step_high(high(rng));
            const StepOutcome out = env.step_low(low(rng));
            if (out.penalized)
                EXPECT_DOUBLE_EQ(out.reward, -1.0);
            else {
                EXPECT_GE(out.reward, 1.0);
                EXPECT_LE(out.reward, 3.0);
            }
            for (double v : out.next_state) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
            }
        }
    }
}

TEST(RewardRanges, StateBoundsHoldUnderTrainingNoise) {
    const World w = make_world(default_grid_topology());
    EnvConfig cfg;
    cfg.sigma_t = 0.5;
    cfg.sigma_p = 0.5;
    cfg.sigma_d = 200.0;
    HighEnv env(w, cfg);
    Rng rng(42);
    std::uniform_int_distribution<int> high(0, 2 * w.graph.num_links() - 1);
    std::uniform_int_distribution<int> low(0, 33);
    for (int ep = 0; ep < 500; ++ep) {
        env.reset(7000 + ep);
        while (!env.finished()) {
            env.step_high(high(rng));
            const StepOutcome out = env.step_low(low(rng));
            for (double v : out.next_state) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
            }
            if (!out.penalized) {
                ASSERT_GE(out.reward, 1.0);
                ASSERT_LE(out.reward, 3.0);
            }
        }
    }
}

TEST(LowCellEnv, AddEpisodeKeepsAcceptingFeasibleCells) {
    const World w = make_world(default_grid_topology());
    const int link = w.graph.link_index(3, 1);
    LowCellEnv env(w, link, ActionKind::Add, {});
    auto state = env.reset(3, Requirements{0.5, 0.3, 0.2});
    EXPECT_EQ(state.size(), 209u);
    int feasible_steps = 0;
    while (true) {
        int action = -1;
        for (int id = 0; id < 34; ++id)
            if (env.schedule().feasible_add(3, 1, decode_low_action(id, env.schedule()))) {
                action = id;
                break;
            }
        if (action < 0) break;
        const StepOutcome out = env.step(action);
        EXPECT_FALSE(out.penalized);
        ++feasible_steps;
        if (out.terminal) break;
    }
    EXPECT_GT(feasible_steps, 5);  // plenty of room in a 17x2 frame
}

TEST(LowCellEnv, RemoveEpisodeSeedsRemovableCells) {
    const World w = make_world(default_grid_topology());
    const int link = w.graph.link_index(10, 6);
    LowCellEnv env(w, link, ActionKind::Remove, {});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        env.reset(seed);
        // reset guarantees at least 2 cells of the policy's own link
        EXPECT_GE(env.schedule().count_link_cells(10, 6), 2);
    }
}

TEST(LowCellEnv, DeterministicEpisodes) {
    const World w = make_world(default_grid_topology());
    const int link = w.graph.link_index(2, 1);
    LowCellEnv a(w, link, ActionKind::Add, {}), b(w, link, ActionKind::Add, {});
    EXPECT_EQ(a.reset(5), b.reset(5));
    for (int id : {0, 7, 19}) {
        const StepOutcome oa = a.step(id);
        const StepOutcome ob = b.step(id);
        EXPECT_EQ(oa.next_state, ob.next_state);
        EXPECT_EQ(oa.reward, ob.reward);
        if (oa.terminal) break;
    }
}
