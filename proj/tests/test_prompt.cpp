#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mirror;

namespace {

const PromptKit& kit() { return test::prompts(); }

}  // namespace

TEST(PromptFiles, HashesMatchGoldenCopies) {
    const std::map<std::string, std::string> golden = {
        {"AnswerSystem", "968c4452f7551a6a5d34818ecbf980587a7ced48662082c6e05e5a709057df92"},
        {"AnswerUser", "91610d30864883b41b4d91db2a9866f0b0ef68338499c9f8a8735ce0d442b827"},
        {"LTMEntry", "c53c68e2a3dec190766315f05c85fc11c59ae44a27e18d5d310361200bdd7274"},
        {"PlannerSystem", "b49790cdd74653a6292227897cdf19ff2427e00b89bd5641167ebb0083a1be58"},
        {"PlannerUser", "438cf6f4fe39821c4e3dbe4c6d862c811197662fc1b31cfabc9f39b5d0fb6c82"},
        {"STMEntry", "0b04ad239d644ebe24d137d2ba61f269b575d7430d579a7582f33a2765bd505a"},
        {"ToolSystem", "94aad6aa180460d18e3aadb26eafe19df26b83ddec0c4b7eb0b3a4521677e7aa"},
        {"ToolUser", "fb6d7dca8a0fca1d5c0e148348d0afefee074a5d630b5fd4da64a84b451f62ab"},
    };
    for (PromptKind k : kAllPromptKinds) {
        EXPECT_EQ(sha256_hex(kit().get(k).body()), golden.at(std::string(to_string(k)))) << to_string(k);
    }
    EXPECT_TRUE(kit().verify_manifest(kit().directory() + "/MANIFEST.sha256").empty());
}

TEST(PromptFiles, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(PromptFiles, TamperedManifestIsReported) {
    const std::string dir = test::scratch_dir("prompt_tamper");
    for (PromptKind k : kAllPromptKinds) {
        write_text_file(dir + "/" + prompt_file_name(k), kit().get(k).body());
    }
    write_text_file(dir + "/MANIFEST.sha256", read_text_file(kit().directory() + "/MANIFEST.sha256"));
    write_text_file(dir + "/ToolUser.txt", kit().get(PromptKind::ToolUser).body() + " ");
    const auto tampered = PromptKit::load(dir);
    const auto problems = tampered.verify_manifest(dir + "/MANIFEST.sha256");
    ASSERT_EQ(problems.size(), 1u);
    EXPECT_NE(problems[0].find("ToolUser"), std::string::npos);
}

TEST(PromptTemplate, PlaceholdersPerTemplate) {
    using V = std::vector<std::string>;
    EXPECT_EQ(kit().get(PromptKind::PlannerUser).placeholders(), (V{"task_description", "long_memory", "functions"}));
    EXPECT_EQ(kit().get(PromptKind::ToolUser).placeholders(), (V{"subtask", "related_outputs", "short_memory"}));
    EXPECT_EQ(kit().get(PromptKind::AnswerUser).placeholders(), (V{"task_description", "trajectory"}));
    EXPECT_EQ(kit().get(PromptKind::LTMEntry).placeholders(), (V{"round_index", "trajectory", "inter-reflection"}));
    EXPECT_EQ(kit().get(PromptKind::STMEntry).placeholders(),
              (V{"step", "subtask", "function_name", "parameters", "observation"}));
    EXPECT_TRUE(kit().get(PromptKind::PlannerSystem).placeholders().empty());
    EXPECT_TRUE(kit().get(PromptKind::ToolSystem).placeholders().empty());
    EXPECT_TRUE(kit().get(PromptKind::AnswerSystem).placeholders().empty());
}

TEST(PromptTemplate, SystemPromptsRenderToTheirBody) {
    for (auto k : {PromptKind::PlannerSystem, PromptKind::ToolSystem, PromptKind::AnswerSystem}) {
        EXPECT_EQ(kit().get(k).render({}), kit().get(k).body());
    }
}

TEST(PromptTemplate, PlannerUserFilledHasNoSlotMarkers) {
    const std::string out = render(kit().get(PromptKind::PlannerUser),
                                   {{"task_description", "Plan a trip."}, {"long_memory", "none"}, {"functions", "[]"}});
    EXPECT_EQ(out.find('{'), std::string::npos);
    EXPECT_EQ(out,
              "**Given Task:**\nPlan a trip.\n\n**Previous Failed Trajectories:**\nnone\n\n"
              "**Available Functions:**\n[]\n");
}

TEST(PromptTemplate, MissingSlotIsNamed) {
    try {
        render(kit().get(PromptKind::ToolUser), {{"subtask", "s"}, {"related_outputs", "r"}});
        FAIL();
    } catch (const MissingSlot& e) {
        EXPECT_EQ(e.slot(), "short_memory");
        EXPECT_EQ(e.code(), ErrorCode::MissingSlot);
    }
}

TEST(PromptTemplate, BracesInSlotValuesPassThrough) {
    const std::string tricky = "{\"temp\": {\"c\": 21}} and {short_memory} and {{inter-reflection}}";
    const std::string out = render(kit().get(PromptKind::ToolUser),
                                   {{"subtask", tricky}, {"related_outputs", "{subtask}"}, {"short_memory", "}{"}});
    EXPECT_EQ(out, "**Given Subtask:**\n" + tricky + "\n\n**Results of Previous Subtasks:**\n{subtask}\n\n" +
                       "**Previous Failed Trajectories:**\n}{\n");
}

TEST(PromptTemplate, DoubleBraceSlotIsReplacedWhole) {
    const std::string out = render(kit().get(PromptKind::LTMEntry),
                                   {{"round_index", "1"}, {"trajectory", "T"}, {"inter-reflection", "R"}});
    EXPECT_EQ(out, "**Memory:**\n1\n\n**Trajectory:**\nT\n\n**Inter-Reflection:**\nR\n");
}

TEST(PromptTemplate, JsonSamplesInSystemPromptsAreLiteral) {
    const auto& body = kit().get(PromptKind::ToolSystem).body();
    EXPECT_NE(body.find("\"function\": \"selected_function_name\""), std::string::npos);
}

TEST(PromptTemplate, ExtraSlotsAreIgnored) {
    EXPECT_NO_THROW(render(kit().get(PromptKind::AnswerUser),
                           {{"task_description", "a"}, {"trajectory", "b"}, {"unused", "c"}}));
}

// ---------------------------------------------------------------------------

TEST(ExtractJson, BareObject) { EXPECT_EQ(extract_json("{\"a\": 1}"), (Json{{"a", 1}})); }

TEST(ExtractJson, MissingValueIsMalformed) {
    try {
        extract_json("{\"a\": }");
        FAIL();
    } catch (const MalformedJson& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedJson);
        EXPECT_EQ(e.offset(), 6u);
    }
}

TEST(ExtractJson, Corpus) {
    const Json corpus = read_json_file(test::fixture_path("extraction_corpus.json"));
    std::vector<ToolSpec> tools;
    for (const auto& name : corpus["tools"]) tools.push_back(ToolSpec{name.get<std::string>(), "d", {}});
    ASSERT_GE(corpus["cases"].size(), 20u);
    for (const auto& c : corpus["cases"]) {
        SCOPED_TRACE(c["name"].get<std::string>());
        const std::string raw = c["raw"];
        const std::string expect = c["expect"];
        const std::string kind_name = c["kind"];
        const OutputKind kind = kind_name == "planner" ? OutputKind::PlannerOut
                                : kind_name == "tool"  ? OutputKind::ToolOut
                                                       : OutputKind::AnswerOut;
        std::string got = "ok";
        std::optional<std::size_t> offset;
        std::optional<AgentOutput> out;
        try {
            const Json value = extract_json(raw);
            if (expect == "ok") EXPECT_EQ(value, c["json"]);
            out = validate_output(value, kind, &tools);
        } catch (const MalformedJson& e) {
            got = "MalformedJson";
            offset = e.offset();
        } catch (const Error& e) {
            got = std::string(to_string(e.code()));
        }
        ASSERT_EQ(got, expect);
        if (c.contains("offset")) EXPECT_EQ(offset, c["offset"].get<std::size_t>());
        if (expect != "ok") continue;
        const IntraReflection* r = nullptr;
        if (auto* p = std::get_if<Plan>(&*out)) {
            r = &p->reflection;
            ASSERT_EQ(p->nodes.size(), c["nodes"].get<std::size_t>());
            for (const auto& n : p->nodes) EXPECT_EQ(n.status, NodeStatus::Pending);
        } else if (auto* t = std::get_if<ToolCall>(&*out)) {
            r = &t->reflection;
            EXPECT_EQ(t->function, c["function"].get<std::string>());
        } else {
            const auto& a = std::get<FinalAnswer>(*out);
            r = &a.reflection;
            EXPECT_EQ(a.text, c["answer"].get<std::string>());
        }
        EXPECT_EQ(r->score(), c["score"].get<int>());
        EXPECT_EQ(r->clamped(), c["clamped"].get<bool>());
        EXPECT_GE(r->score(), kMinScore);
        EXPECT_LE(r->score(), kMaxScore);
        EXPECT_FALSE(r->evaluation().empty());
    }
}

TEST(ValidateOutput, PlannerTwoNodesScoreNine) {
    const Json j = Json::parse(test::plan_text({{"a", "f"}, {"b", "g"}}, 9));
    const Plan p = std::get<Plan>(validate_output(j, OutputKind::PlannerOut));
    ASSERT_EQ(p.nodes.size(), 2u);
    EXPECT_EQ(p.nodes[0].status, NodeStatus::Pending);
    EXPECT_EQ(p.nodes[1].id, "node2");
    EXPECT_EQ(p.reflection.score(), 9);
}

TEST(ValidateOutput, ToolMissingScoreIsSchemaError) {
    Json j = Json::parse(test::tool_text("f", Json::object(), 9));
    j["intra_reflection"].erase("score");
    EXPECT_THROW(validate_output(j, OutputKind::ToolOut), SchemaError);
}

TEST(ValidateOutput, AnswerScoreElevenIsClamped) {
    const Json j = Json::parse(test::answer_text("done", 11));
    const auto a = std::get<FinalAnswer>(validate_output(j, OutputKind::AnswerOut));
    EXPECT_EQ(a.reflection.score(), 10);
    EXPECT_TRUE(a.reflection.clamped());
}

TEST(ValidateOutput, SchemaErrorListsEveryProblem) {
    try {
        validate_output(Json{{"parameters", 3}}, OutputKind::ToolOut);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.problems().size(), 3u);
    }
}

TEST(ExtractJson, RenderThenExtractRoundTrips) {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> score(0, 12);
    const char* texts[] = {"plain", "with {braces}", "quote \" inside", "back\\slash", "tab\tand\nnewline", "}{"};
    for (int i = 0; i < 300; ++i) {
        Json params{{"q", texts[rng() % 6]}, {"n", static_cast<int>(rng() % 100)}};
        const std::string out = test::tool_text("t" + std::to_string(rng() % 3), params, score(rng), texts[rng() % 6]);
        const Json expected = Json::parse(out);
        const std::string prompt = render(kit().get(PromptKind::ToolUser),
                                          {{"subtask", out}, {"related_outputs", texts[rng() % 6]},
                                           {"short_memory", std::string(kEmptyMemorySentinel)}});
        ASSERT_EQ(extract_json(prompt), expected);
    }
}
