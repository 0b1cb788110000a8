#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <future>
#include <random>

using namespace mirror;

namespace {

STMEntry entry(int step, std::string action = "get_weather", std::string observation = "[SimulatedFailure] down") {
    return STMEntry{step, "Check the weather", std::move(action), Json{{"city", "Lyon"}}, std::move(observation),
                    "looked fine"};
}

TrajectoryStep traj_step(std::string node, std::string fn, ExecStatus status, std::string payload, int attempt = 1) {
    return TrajectoryStep{node, "subtask of " + node, ToolCall{fn, Json{{"q", node}}, IntraReflection("ok", 8)},
                          ExecutionResult{status, std::move(payload)}, attempt};
}

const PromptKit& kit() { return test::prompts(); }

}  // namespace

TEST(ShortTermMemory, RecordFirstStep) {
    ShortTermMemory stm("node1");
    stm.record(entry(1));
    EXPECT_EQ(stm.size(), 1u);
}

TEST(ShortTermMemory, StepGap) {
    ShortTermMemory stm("node1");
    stm.record(entry(1));
    stm.record(entry(2));
    try {
        stm.record(entry(4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StepGap);
    }
    EXPECT_EQ(stm.size(), 2u);
    EXPECT_THROW(ShortTermMemory("n").record(entry(2)), Error);
}

TEST(ShortTermMemory, ResetOnSuccess) {
    ShortTermMemory stm("node1");
    stm.record(entry(1));
    stm.record(entry(2));
    stm.reset_on_success();
    EXPECT_TRUE(stm.empty());
    stm.reset_on_success();
    EXPECT_TRUE(stm.empty());
    stm.record(entry(1));
    EXPECT_EQ(stm.size(), 1u);
}

TEST(ShortTermMemory, RebindDropsEntries) {
    ShortTermMemory stm("node1");
    stm.record(entry(1));
    stm.rebind("node2");
    EXPECT_EQ(stm.node_id(), "node2");
    EXPECT_TRUE(stm.empty());
}

TEST(ShortTermMemory, EmptyRendersSentinel) {
    EXPECT_EQ(ShortTermMemory("n").render(kit()), "No previous failed trajectories.");
}

TEST(ShortTermMemory, TwoFailuresRenderInOrder) {
    ShortTermMemory stm("node1");
    stm.record(entry(1, "get_weather", "[InvalidParameters] missing required parameter \"date\""));
    stm.record(entry(2, "get_forecast", "[SimulatedFailure] service down"));
    const std::string expected =
        "**Memory:**\n1\n\n**Subtask:**\nCheck the weather\n\n**Action:**\nget_weather\n\n"
        "**Action Input:**\n{\"city\":\"Lyon\"}\n\n**Inter-Reflection:**\n"
        "[InvalidParameters] missing required parameter \"date\"\n"
        "\n"
        "**Memory:**\n2\n\n**Subtask:**\nCheck the weather\n\n**Action:**\nget_forecast\n\n"
        "**Action Input:**\n{\"city\":\"Lyon\"}\n\n**Inter-Reflection:**\n[SimulatedFailure] service down\n";
    EXPECT_EQ(stm.render(kit()), expected);
}

TEST(ShortTermMemory, RenderListsStepsInOrderForAnyCount) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 8);
        ShortTermMemory stm("node1");
        for (int s = 1; s <= n; ++s) stm.record(entry(s, "fn" + std::to_string(s)));
        const std::string out = stm.render(kit());
        EXPECT_EQ(test::memory_entries_in(out), n);
        std::size_t last = 0;
        for (int s = 1; s <= n; ++s) {
            const auto at = out.find("**Memory:**\n" + std::to_string(s) + "\n");
            ASSERT_NE(at, std::string::npos);
            if (s > 1) EXPECT_GT(at, last);
            last = at;
        }
    }
}

TEST(ShortTermMemory, RenderIsInjectiveOnOrdering) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> actions = {"a", "b", "c", "d"};
        auto render_in = [&](const std::vector<std::string>& order) {
            ShortTermMemory stm("n");
            for (std::size_t i = 0; i < order.size(); ++i) stm.record(entry(static_cast<int>(i) + 1, order[i]));
            return stm.render(kit());
        };
        auto permuted = actions;
        do {
            std::shuffle(permuted.begin(), permuted.end(), rng);
        } while (permuted == actions);
        EXPECT_NE(render_in(actions), render_in(permuted));
    }
}

TEST(LongTermMemory, AppendAndRoundGap) {
    LongTermMemory ltm("task");
    ltm.append(LTMRecord{1, std::nullopt, {}, "answer scored 7"});
    EXPECT_EQ(ltm.size(), 1u);
    try {
        ltm.append(LTMRecord{3, std::nullopt, {}, "x"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RoundGap);
    }
    EXPECT_THROW(LongTermMemory("t").append(LTMRecord{2, std::nullopt, {}, "x"}), Error);
}

TEST(LongTermMemory, ResetOnCompletion) {
    LongTermMemory ltm("task");
    for (int r = 1; r <= 3; ++r) ltm.append(LTMRecord{r, std::nullopt, {}, "failed"});
    ltm.reset_on_completion();
    EXPECT_TRUE(ltm.empty());
    LongTermMemory fresh("t");
    fresh.reset_on_completion();
    EXPECT_TRUE(fresh.empty());
}

TEST(LongTermMemory, EmptyRendersSentinel) {
    EXPECT_EQ(LongTermMemory("t").render(kit()), std::string(kEmptyMemorySentinel));
}

TEST(LongTermMemory, TwoRecordsRenderInRoundOrder) {
    LongTermMemory ltm("t");
    Plan p{{PlanNode{"node1", NodeStatus::Succeeded, "Check weather", "get_weather"}}, IntraReflection("fine", 9)};
    ltm.append(LTMRecord{1, p, {traj_step("node1", "get_weather", ExecStatus::Ok, "sunny")}, "Answer scored 7."});
    ltm.append(LTMRecord{2, std::nullopt, {}, "Execution failed at node2."});
    const std::string out = ltm.render(kit());
    const std::string expected =
        "**Memory:**\n1\n\n**Trajectory:**\n"
        "Plan:\n1. node1 [Succeeded] Check weather -> get_weather\nPlan score: 9\n\n"
        "Step 1 (node1, attempt 1)\nSubtask: subtask of node1\nAction: get_weather\n"
        "Action Input: {\"q\":\"node1\"}\nObservation: [Ok] sunny\n\n"
        "**Inter-Reflection:**\nAnswer scored 7.\n"
        "\n"
        "**Memory:**\n2\n\n**Trajectory:**\n(empty trajectory)\n\n"
        "**Inter-Reflection:**\nExecution failed at node2.\n";
    EXPECT_EQ(out, expected);
    EXPECT_EQ(test::memory_entries_in(out), 2);
    EXPECT_LT(out.find("**Memory:**\n1"), out.find("**Memory:**\n2"));
}

TEST(Trajectory, ThreeStepsRenderThreeBlocksInOrder) {
    const std::vector<TrajectoryStep> steps = {traj_step("node1", "a", ExecStatus::SimulatedFailure, "down"),
                                               traj_step("node1", "a", ExecStatus::Ok, "up", 2),
                                               traj_step("node2", "b", ExecStatus::Ok, "done")};
    const std::string out = render_trajectory(std::nullopt, steps);
    std::size_t count = 0;
    std::size_t last = 0;
    for (const char* obs : {"Observation: [SimulatedFailure] down", "Observation: [Ok] up", "Observation: [Ok] done"}) {
        const auto at = out.find(obs);
        ASSERT_NE(at, std::string::npos) << obs;
        EXPECT_GE(at, last);
        last = at;
    }
    for (auto at = out.find("Action: "); at != std::string::npos; at = out.find("Action: ", at + 1)) ++count;
    EXPECT_EQ(count, 3u);
    EXPECT_NE(out.find("Step 2 (node1, attempt 2)"), std::string::npos);
}

TEST(MemoryIsolation, ConcurrentTasksNeverShareEntries) {
    constexpr int kTasks = 8;
    auto worker = [](int id) {
        const std::string tag = "sentinel-" + std::to_string(id);
        LongTermMemory ltm(tag);
        ShortTermMemory stm(tag);
        bool clean = true;
        for (int round = 1; round <= 50; ++round) {
            ltm.append(LTMRecord{round, std::nullopt, {}, tag});
            stm.record(STMEntry{stm.next_step(), tag, tag, Json{{"tag", tag}}, tag, tag});
            if (round % 7 == 0) stm.reset_on_success();
            for (const auto& r : ltm.records()) clean = clean && r.inter_reflection == tag;
            for (const auto& e : stm.entries()) clean = clean && e.observation == tag;
            const std::string text = ltm.render(test::prompts()) + stm.render(test::prompts());
            for (int other = 0; other < kTasks; ++other) {
                if (other != id) clean = clean && text.find("sentinel-" + std::to_string(other) + "\n") == std::string::npos;
            }
            std::this_thread::yield();
        }
        ltm.reset_on_completion();
        return clean && ltm.empty();
    };
    std::vector<std::future<bool>> futures;
    for (int i = 0; i < kTasks; ++i) futures.push_back(std::async(std::launch::async, worker, i));
    for (auto& f : futures) EXPECT_TRUE(f.get());
}
