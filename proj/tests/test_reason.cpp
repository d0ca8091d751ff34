#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hirec/kb.hpp"
#include "hirec/reason.hpp"
#include "helpers.hpp"

using namespace hirec;

namespace {

Document make_doc(const std::string& id, Tier tier, const std::string& department,
                  const std::string& title, const std::string& body,
                  std::map<std::string, std::string> metadata = {}) {
    if (tier == Tier::ITEM && metadata.find("test_id") == metadata.end()) {
        metadata["test_id"] = "tst_" + id;
    }
    return Document::create(DocumentId::create(id).value(), tier, department, title, body,
                            std::move(metadata))
        .value();
}

ScoredDoc scored(const Document& doc, double similarity) {
    return ScoredDoc{RetrievalHit{doc.id(), similarity}, &doc};
}

}  // namespace

TEST_CASE("mock root reasoner: single department normalizes to confidence 1") {
    auto d1 = make_doc("d1", Tier::DEPARTMENT, "cardiology", "guide a", "body");
    auto d2 = make_doc("d2", Tier::DEPARTMENT, "cardiology", "guide b", "body");
    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "chest pain";
    ctx.hits = {scored(d1, 0.4), scored(d2, 0.2)};

    MockReasoner reasoner;
    auto output = reasoner.analyze(ctx);
    REQUIRE(output.ok());
    REQUIRE(output.value().departments.size() == 1);
    CHECK(output.value().departments[0].department == "cardiology");
    CHECK(output.value().departments[0].confidence == Catch::Approx(1.0));
}

TEST_CASE("mock root reasoner: empty hits flag uncertain_diagnosis") {
    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "chest pain";

    MockReasoner reasoner;
    auto output = reasoner.analyze(ctx);
    REQUIRE(output.ok());
    CHECK(output.value().departments.empty());
    CHECK(output.value().flags == std::vector<std::string>{"uncertain_diagnosis"});
}

TEST_CASE("mock root scoring rule: floored similarity mass over total") {
    auto cardio_a = make_doc("c1", Tier::DEPARTMENT, "cardiology", "a", "b");
    auto cardio_b = make_doc("c2", Tier::DEPARTMENT, "cardiology", "a", "b");
    auto endo = make_doc("e1", Tier::DEPARTMENT, "endocrinology", "a", "b");
    auto gastro = make_doc("g1", Tier::DEPARTMENT, "gastroenterology", "a", "b");

    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "chest pain";
    ctx.hits = {scored(cardio_a, 0.5), scored(cardio_b, 0.3), scored(endo, 0.2),
                scored(gastro, -0.4)};  // gastro mass floors at 0 and is dropped

    MockReasoner reasoner;
    auto output = reasoner.analyze(ctx);
    REQUIRE(output.ok());
    const auto& departments = output.value().departments;
    REQUIRE(departments.size() == 2);

    // Independent recomputation of the documented rule.
    const double cardio_mass = 0.5 + 0.3;
    const double endo_mass = 0.2;
    const double total = cardio_mass + endo_mass;
    CHECK(departments[0].department == "cardiology");
    CHECK(departments[0].confidence == Catch::Approx(cardio_mass / total));
    CHECK(departments[1].department == "endocrinology");
    CHECK(departments[1].confidence == Catch::Approx(endo_mass / total));

    double sum = 0.0;
    for (const auto& candidate : departments) sum += candidate.confidence;
    CHECK(sum == Catch::Approx(1.0));
}

TEST_CASE("mock root urgency comes from hit document tags") {
    auto urgent = make_doc("u1", Tier::DEPARTMENT, "cardiology", "a", "b", {{"urgency", "urgent"}});
    auto routine = make_doc("r1", Tier::DEPARTMENT, "endocrinology", "a", "b");
    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "chest pain";
    ctx.hits = {scored(urgent, 0.5), scored(routine, 0.4)};

    MockReasoner reasoner;
    auto output = reasoner.analyze(ctx);
    REQUIRE(output.ok());
    REQUIRE(output.value().departments.size() == 2);
    CHECK(output.value().departments[0].urgency == UrgencyLevel::URGENT);
    CHECK(output.value().departments[1].urgency == UrgencyLevel::ROUTINE);
    const auto& flags = output.value().flags;
    CHECK(std::find(flags.begin(), flags.end(), "urgent_case") != flags.end());
}

TEST_CASE("urgent symptom keywords raise urgent_case") {
    auto doc = make_doc("d1", Tier::DEPARTMENT, "cardiology", "a", "b");
    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "severe chest pain";
    ctx.hits = {scored(doc, 0.5)};

    MockReasoner reasoner;
    auto output = reasoner.analyze(ctx);
    REQUIRE(output.ok());
    const auto& flags = output.value().flags;
    CHECK(std::find(flags.begin(), flags.end(), "urgent_case") != flags.end());
}

TEST_CASE("mock department reasoner matches the retrieval oracle and threshold") {
    auto stack = testutil::make_stack(7);
    REQUIRE(stack);

    auto query_vec = stack->embedder.embed("chest pain");
    REQUIRE(query_vec.ok());
    auto hits = stack->index.search(query_vec.value(), 10, [](Tier t, const std::string& d) {
        return t == Tier::ITEM && d == "cardiology";
    });
    REQUIRE(hits.ok());

    ReasoningContext ctx;
    ctx.layer = Layer::DEPARTMENT;
    ctx.department = "cardiology";
    ctx.query.symptoms = "chest pain";
    for (const auto& hit : hits.value()) {
        ctx.hits.push_back(ScoredDoc{hit, stack->corpus.kb.find(hit.doc_id.str())});
    }

    // Independent expectation: the oracle scan filtered by the documented
    // threshold, in similarity order.
    auto expected = testutil::oracle_search(
        stack->index.entries(), query_vec.value(), 10,
        [](Tier t, const std::string& d) { return t == Tier::ITEM && d == "cardiology"; });
    std::vector<std::string> expected_tests;
    for (const auto& hit : expected) {
        if (hit.similarity >= kMockSimilarityThreshold) {
            expected_tests.push_back(*stack->corpus.kb.find(hit.doc_id.str())->test_id());
        }
    }
    REQUIRE_FALSE(expected_tests.empty());

    MockReasoner reasoner;
    auto output = reasoner.analyze(ctx);
    REQUIRE(output.ok());
    REQUIRE(output.value().tests.size() == expected_tests.size());
    for (size_t i = 0; i < expected_tests.size(); ++i) {
        CHECK(output.value().tests[i].test_id == expected_tests[i]);
        CHECK(output.value().tests[i].confidence >= kMockSimilarityThreshold);
    }
}

TEST_CASE("mock candidates only cite context hits (no hallucinated tests)") {
    auto stack = testutil::make_stack(19, {"cardiology", "neurology"}, 6);
    REQUIRE(stack);
    MockReasoner reasoner;
    testutil::Rng rng(77);

    for (int trial = 0; trial < 30; ++trial) {
        const auto& items = stack->corpus.kb.items_tier();
        const auto& doc = items[rng.below(items.size())];
        auto query_vec = stack->embedder.embed(doc.body());
        REQUIRE(query_vec.ok());
        auto hits = stack->index.search(query_vec.value(), 1 + static_cast<int>(rng.below(8)));
        REQUIRE(hits.ok());

        ReasoningContext ctx;
        ctx.layer = Layer::ITEM;
        ctx.query.symptoms = doc.title();
        std::set<std::string> context_tests;
        for (const auto& hit : hits.value()) {
            const Document* hit_doc = stack->corpus.kb.find(hit.doc_id.str());
            ctx.hits.push_back(ScoredDoc{hit, hit_doc});
            if (auto test_id = hit_doc->test_id()) context_tests.insert(*test_id);
        }
        auto output = reasoner.analyze(ctx);
        REQUIRE(output.ok());
        for (const auto& candidate : output.value().tests) {
            CHECK(context_tests.count(candidate.test_id) == 1);
            REQUIRE(candidate.supporting_doc_ids.size() == 1);
        }
    }
}

TEST_CASE("mock analyze is deterministic") {
    auto stack = testutil::make_stack(7);
    REQUIRE(stack);
    auto query_vec = stack->embedder.embed("chest pain on exertion");
    REQUIRE(query_vec.ok());
    auto hits = stack->index.search(query_vec.value(), 10);
    REQUIRE(hits.ok());

    ReasoningContext ctx;
    ctx.layer = Layer::ITEM;
    ctx.query.symptoms = "chest pain on exertion";
    for (const auto& hit : hits.value()) {
        ctx.hits.push_back(ScoredDoc{hit, stack->corpus.kb.find(hit.doc_id.str())});
    }
    MockReasoner reasoner;
    auto first = reasoner.analyze(ctx);
    auto second = reasoner.analyze(ctx);
    REQUIRE(first.ok());
    REQUIRE(second.ok());
    CHECK(first.value() == second.value());
}

TEST_CASE("render_prompt contains query, hit titles, and memory summaries") {
    auto alpha = make_doc("a1", Tier::DEPARTMENT, "cardiology", "alpha guidelines", "alpha body");
    auto beta = make_doc("b1", Tier::DEPARTMENT, "endocrinology", "beta guidelines", "beta body");

    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "chest pain on exertion";
    ctx.hits = {scored(alpha, 0.5), scored(beta, 0.25)};
    ctx.memory.push_back(MemoryRecord{0, Layer::ROOT, "remember this summary", {"urgent_case"}, {}});

    const auto library = PromptLibrary::builtin();
    const std::string prompt = render_prompt(ctx, library);
    CHECK(prompt.find("chest pain on exertion") != std::string::npos);
    CHECK(prompt.find("alpha guidelines") != std::string::npos);
    CHECK(prompt.find("beta guidelines") != std::string::npos);
    CHECK(prompt.find("remember this summary") != std::string::npos);
    CHECK(render_prompt(ctx, library) == prompt);  // deterministic

    SECTION("department placeholder") {
        ctx.layer = Layer::DEPARTMENT;
        ctx.department = "cardiology";
        const std::string dept_prompt = render_prompt(ctx, library);
        CHECK(dept_prompt.find("the cardiology department") != std::string::npos);
        CHECK(dept_prompt.find("{{DEPARTMENT}}") == std::string::npos);
    }
}

TEST_CASE("render_prompt truncates document bodies to the limit") {
    std::string long_body(kPromptBodyLimit + 500, 'x');
    long_body[kPromptBodyLimit] = 'Y';  // first char past the cut
    auto doc = make_doc("big", Tier::DEPARTMENT, "cardiology", "big doc", long_body);

    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "chest pain";
    ctx.hits = {scored(doc, 0.5)};

    const std::string prompt = render_prompt(ctx, PromptLibrary::builtin());
    CHECK(prompt.find('Y') == std::string::npos);
    CHECK(prompt.find(std::string(kPromptBodyLimit, 'x')) != std::string::npos);
}

TEST_CASE("shipped template files match the compiled-in library") {
    auto from_files = PromptLibrary::from_directory(HIREC_TEMPLATE_DIR);
    REQUIRE(from_files.ok());
    CHECK(from_files.value() == PromptLibrary::builtin());
}

TEST_CASE("parse_response accepts the documented schema") {
    const std::string raw = R"({"departments": [{"department": "cardiology",
        "confidence": 0.8, "urgency": "priority", "rationale": "why"}],
        "flags": ["urgent_case"], "summary": "ok"})";
    auto output = parse_response(Layer::ROOT, raw);
    REQUIRE(output.ok());
    REQUIRE(output.value().departments.size() == 1);
    CHECK(output.value().departments[0].department == "cardiology");
    CHECK(output.value().departments[0].confidence == Catch::Approx(0.8));
    CHECK(output.value().departments[0].urgency == UrgencyLevel::PRIORITY);
    CHECK(output.value().flags == std::vector<std::string>{"urgent_case"});
    CHECK(output.value().summary == "ok");
}

TEST_CASE("parse_response extracts JSON from chatty replies") {
    const std::string bare = R"({"tests": [{"test_id": "ecg", "confidence": 0.5}],
        "flags": [], "summary": "s"})";
    const std::string chatty = "Sure — here is the structured answer you asked for:\n" + bare +
                               "\nLet me know if you need anything else.";
    auto from_bare = parse_response(Layer::DEPARTMENT, bare);
    auto from_chatty = parse_response(Layer::DEPARTMENT, chatty);
    REQUIRE(from_bare.ok());
    REQUIRE(from_chatty.ok());
    CHECK(from_bare.value() == from_chatty.value());
}

TEST_CASE("parse_response handles braces inside strings") {
    const std::string raw =
        R"(prefix {"tests": [{"test_id": "ecg", "confidence": 0.5, "rationale": "has { and } and \" inside"}], "flags": [], "summary": "s"} suffix)";
    auto output = parse_response(Layer::ITEM, raw);
    REQUIRE(output.ok());
    CHECK(output.value().tests[0].rationale == "has { and } and \" inside");
}

TEST_CASE("parse_response failures and clamping") {
    CHECK(parse_response(Layer::ROOT, "I cannot help").error().code ==
          ErrorCode::UNPARSEABLE_RESPONSE);
    CHECK(parse_response(Layer::ROOT, R"({"tests": []})").error().code ==
          ErrorCode::UNPARSEABLE_RESPONSE);

    auto clamped = parse_response(
        Layer::ROOT, R"({"departments": [{"department": "x", "confidence": 1.7}]})");
    REQUIRE(clamped.ok());
    CHECK(clamped.value().departments[0].confidence == 1.0);

    auto negative = parse_response(
        Layer::ROOT, R"({"departments": [{"department": "x", "confidence": -0.3}]})");
    REQUIRE(negative.ok());
    CHECK(negative.value().departments[0].confidence == 0.0);
}

TEST_CASE("unknown flags are dropped with a warning") {
    std::vector<std::string> warnings;
    auto previous = warning_sink();
    warning_sink() = [&](const std::string& message) { warnings.push_back(message); };

    auto output = parse_response(
        Layer::ROOT,
        R"({"departments": [], "flags": ["urgent_case", "made_up_flag"], "summary": ""})");
    warning_sink() = previous;

    REQUIRE(output.ok());
    CHECK(output.value().flags == std::vector<std::string>{"urgent_case"});
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("made_up_flag") != std::string::npos);
}

TEST_CASE("parse_response of serialize is the identity") {
    ReasoningOutput root_output;
    root_output.departments.push_back(
        DepartmentCandidate{"cardiology", 0.75, "similarity mass", UrgencyLevel::URGENT});
    root_output.departments.push_back(
        DepartmentCandidate{"endocrinology", 0.25, "less mass", UrgencyLevel::ROUTINE});
    root_output.flags = {"urgent_case"};
    root_output.summary = "two departments";

    auto root_round = parse_response(Layer::ROOT, serialize_reasoning_output(Layer::ROOT, root_output));
    REQUIRE(root_round.ok());
    CHECK(root_round.value() == root_output);

    ReasoningOutput test_output;
    TestCandidate candidate;
    candidate.test_id = "ecg_12_lead";
    candidate.name = "electrocardiogram";
    candidate.department = "cardiology";
    candidate.confidence = 0.6125;
    candidate.urgency = UrgencyLevel::PRIORITY;
    candidate.rationale = "matched 'electrocardiogram' (similarity 0.6125)";
    candidate.supporting_doc_ids.push_back(DocumentId::create("item_ecg").value());
    test_output.tests.push_back(candidate);
    test_output.flags = {"needs_followup"};
    test_output.summary = "one test";

    auto test_round =
        parse_response(Layer::DEPARTMENT, serialize_reasoning_output(Layer::DEPARTMENT, test_output));
    REQUIRE(test_round.ok());
    CHECK(test_round.value() == test_output);
}

// --- remote reasoner against a mock chat endpoint ----------------------------

namespace {

struct MockChatServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    std::vector<std::string> replies;
    std::vector<nlohmann::json> seen;

    explicit MockChatServer(std::vector<std::string> scripted) : replies(std::move(scripted)) {
        server.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = requests.fetch_add(1);
            seen.push_back(nlohmann::json::parse(req.body));
            const std::string& content =
                replies[std::min(static_cast<size_t>(n), replies.size() - 1)];
            const nlohmann::json body = {
                {"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
            res.set_content(body.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~MockChatServer() {
        server.stop();
        thread.join();
    }

    ReasonerConfig config() const {
        ReasonerConfig cfg;
        cfg.kind = ReasonerKind::REMOTE;
        cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
        cfg.model_name = "test-chat";
        cfg.timeout_ms = 2000;
        cfg.retry_backoff_ms = 10;
        return cfg;
    }
};

ReasoningContext tiny_root_ctx() {
    ReasoningContext ctx;
    ctx.layer = Layer::ROOT;
    ctx.query.symptoms = "chest pain";
    return ctx;
}

}  // namespace

TEST_CASE("remote reasoner parses a clean structured reply") {
    MockChatServer mock({R"({"departments": [{"department": "cardiology", "confidence": 0.9}],
                             "flags": [], "summary": "s"})"});
    RemoteReasoner reasoner(mock.config(), PromptLibrary::builtin());
    auto output = reasoner.analyze(tiny_root_ctx());
    REQUIRE(output.ok());
    CHECK(output.value().departments.size() == 1);
    CHECK(mock.requests.load() == 1);
    // temperature pinned to 0 on the wire
    CHECK(mock.seen[0]["temperature"].get<double>() == 0.0);
}

TEST_CASE("remote reasoner repairs one unparseable reply") {
    MockChatServer mock({"I will not produce JSON, sorry.",
                         R"({"departments": [{"department": "cardiology", "confidence": 0.9}],
                             "flags": [], "summary": "repaired"})"});
    RemoteReasoner reasoner(mock.config(), PromptLibrary::builtin());
    auto output = reasoner.analyze(tiny_root_ctx());
    REQUIRE(output.ok());
    CHECK(output.value().summary == "repaired");
    REQUIRE(mock.requests.load() == 2);
    // The repair round carries the failed reply plus the corrective message.
    CHECK(mock.seen[1]["messages"].size() == 4);
}

TEST_CASE("remote reasoner gives up after the repair round") {
    MockChatServer mock({"no json here", "still no json"});
    RemoteReasoner reasoner(mock.config(), PromptLibrary::builtin());
    auto output = reasoner.analyze(tiny_root_ctx());
    REQUIRE_FALSE(output.ok());
    CHECK(output.error().code == ErrorCode::UNPARSEABLE_RESPONSE);
    CHECK(mock.requests.load() == 2);
}

TEST_CASE("remote reasoner reports BACKEND_UNAVAILABLE on transport failure") {
    ReasonerConfig cfg;
    cfg.kind = ReasonerKind::REMOTE;
    cfg.endpoint_url = "http://127.0.0.1:1/v1/chat";
    cfg.model_name = "test-chat";
    cfg.timeout_ms = 200;
    cfg.retry_backoff_ms = 5;
    RemoteReasoner reasoner(cfg, PromptLibrary::builtin());
    auto output = reasoner.analyze(tiny_root_ctx());
    REQUIRE_FALSE(output.ok());
    CHECK(output.error().code == ErrorCode::BACKEND_UNAVAILABLE);
}
