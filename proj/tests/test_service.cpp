#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hirec/service.hpp"
#include "helpers.hpp"

using namespace hirec;

namespace {

struct RunningService {
    std::unique_ptr<testutil::Stack> stack;
    std::unique_ptr<RecommendService> service;
    std::thread thread;
    int port = 0;

    RunningService() {
        stack = testutil::make_stack(7);
        REQUIRE(stack);
        service = std::make_unique<RecommendService>(*stack->engine, AblationConfig{},
                                                     PipelineParams{}, stack->index.size());
        port = service->bind_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { service->listen_after_bind(); });
        while (!service->is_running()) std::this_thread::yield();
    }

    ~RunningService() {
        service->stop();
        thread.join();
    }

    httplib::Client client() { return httplib::Client("127.0.0.1", port); }
};

}  // namespace

TEST_CASE("health endpoint reports build info") {
    RunningService running;
    auto client = running.client();
    auto res = client.Get("/v1/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body["status"] == "ok");
    CHECK(body["index_size"] == 15);
    CHECK(body.contains("version"));
}

TEST_CASE("recommend endpoint equals the in-process engine result") {
    RunningService running;
    auto client = running.client();

    PatientQuery query;
    query.symptoms = "chest pain on exertion";
    query.age = 54;
    query.sex = Sex::M;

    auto res = client.Post("/v1/recommend", to_json(query).dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);

    auto direct = running.stack->engine->recommend(query);
    REQUIRE(direct.ok());
    CHECK(body == to_json(direct.value()));
    REQUIRE(body.contains("recommendations"));
    REQUIRE_FALSE(body["recommendations"].empty());

    // sorted non-increasing by weight
    double previous = 1.0 + 1e-9;
    for (const auto& rec : body["recommendations"]) {
        const double weight = rec["weight"].get<double>();
        CHECK(weight <= previous);
        previous = weight;
    }
}

TEST_CASE("invalid queries map to 400 with the matching error code") {
    RunningService running;
    auto client = running.client();

    SECTION("empty symptoms") {
        auto res = client.Post("/v1/recommend", R"({"symptoms": ""})", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
        CHECK(nlohmann::json::parse(res->body)["error"]["code"] == "EMPTY_SYMPTOMS");
    }
    SECTION("age out of range") {
        auto res = client.Post("/v1/recommend", R"({"symptoms": "fatigue", "age": 200})",
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
        CHECK(nlohmann::json::parse(res->body)["error"]["code"] == "AGE_OUT_OF_RANGE");
    }
    SECTION("malformed body") {
        auto res = client.Post("/v1/recommend", "{not json", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
        CHECK(nlohmann::json::parse(res->body)["error"]["code"] == "PARSE_ERROR");
    }
    SECTION("wrong sex enum") {
        auto res = client.Post("/v1/recommend", R"({"symptoms": "x", "sex": "unknown"})",
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
}

TEST_CASE("concurrent requests produce identical results") {
    RunningService running;
    const std::string body = R"({"symptoms": "chest pain on exertion"})";

    std::vector<std::string> responses(6);
    std::vector<std::thread> workers;
    for (size_t i = 0; i < responses.size(); ++i) {
        workers.emplace_back([&, i] {
            httplib::Client client("127.0.0.1", running.port);
            auto res = client.Post("/v1/recommend", body, "application/json");
            if (res && res->status == 200) responses[i] = res->body;
        });
    }
    for (auto& worker : workers) worker.join();
    for (const auto& response : responses) {
        REQUIRE_FALSE(response.empty());
        CHECK(response == responses.front());
    }
}
