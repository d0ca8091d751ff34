#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hirec/embed.hpp"
#include "helpers.hpp"

using namespace hirec;

namespace {

// Independent restatement of the documented embedding function, used as
// the oracle: FNV-1a 64 per token, bucket = hash mod D, sign from bit 32,
// then L2 normalization.
std::vector<float> reference_embedding(const std::string& text, size_t dimension) {
    std::vector<float> values(dimension, 0.0f);
    std::string token;
    auto flush = [&]() {
        if (token.empty()) return;
        uint64_t hash = 0xcbf29ce484222325ULL;
        for (unsigned char byte : token) {
            hash ^= byte;
            hash *= 0x100000001b3ULL;
        }
        values[hash % dimension] += ((hash >> 32) & 1ULL) ? -1.0f : 1.0f;
        token.clear();
    };
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else {
            flush();
        }
    }
    flush();
    double norm = 0.0;
    for (float v : values) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (float& v : values) v = static_cast<float>(v / norm);
    }
    return values;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return dot_similarity(a, b); }

}  // namespace

TEST_CASE("hashed embedder is deterministic and unit-norm") {
    HashedEmbedder embedder(256);
    auto first = embedder.embed("chest pain");
    auto second = embedder.embed("chest pain");
    REQUIRE(first.ok());
    REQUIRE(second.ok());
    CHECK(first.value().values() == second.value().values());  // bitwise

    const char* samples[] = {"chest pain", "a", "panel 12 lead ecg", "x y z w q"};
    for (const char* text : samples) {
        auto vec = embedder.embed(text);
        REQUIRE(vec.ok());
        double norm = 0.0;
        for (float v : vec.value().values()) norm += static_cast<double>(v) * v;
        CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-6);
    }
}

TEST_CASE("hashed embedder matches the documented reference function") {
    HashedEmbedder embedder(64);
    for (const char* text : {"chest pain", "Crushing, CHEST-pain!!", "one two three four",
                             "numbers 123 mix99"}) {
        auto vec = embedder.embed(text);
        REQUIRE(vec.ok());
        CHECK(vec.value().values() == reference_embedding(text, 64));
    }
}

TEST_CASE("tokenization is lowercase alphanumeric splitting") {
    HashedEmbedder embedder(256);
    CHECK(embedder.embed("Crushing, CHEST-pain!!").value().values() ==
          embedder.embed("crushing chest pain").value().values());
    CHECK(embedder.embed("a\tb\nc").value().values() == embedder.embed("a b c").value().values());
}

TEST_CASE("zero-token input is EMPTY_TEXT") {
    HashedEmbedder embedder(256);
    for (const char* text : {"", "   ", "!!!", "...,;--"}) {
        auto vec = embedder.embed(text);
        REQUIRE_FALSE(vec.ok());
        CHECK(vec.error().code == ErrorCode::EMPTY_TEXT);
    }
}

TEST_CASE("token overlap orders cosine similarity as expected") {
    HashedEmbedder embedder(256);
    const auto crushing = embedder.embed("crushing chest pain").value();
    const auto exertion = embedder.embed("chest pain on exertion").value();
    const auto chest = embedder.embed("chest pain").value();
    const auto rash = embedder.embed("skin rash").value();
    CHECK(cosine(crushing, exertion) > cosine(chest, rash));
}

TEST_CASE("embed_batch is pointwise and order-preserving") {
    HashedEmbedder embedder(128);
    CHECK(embedder.embed_batch({}).value().empty());

    auto pair = embedder.embed_batch({"a", "b"});
    REQUIRE(pair.ok());
    REQUIRE(pair.value().size() == 2);
    CHECK(pair.value()[0].values() == embedder.embed("a").value().values());
    CHECK(pair.value()[1].values() == embedder.embed("b").value().values());

    testutil::Rng rng(42);
    std::vector<std::string> texts;
    for (int i = 0; i < 100; ++i) {
        std::string text;
        const size_t words = 1 + rng.below(6);
        for (size_t w = 0; w < words; ++w) {
            if (w > 0) text += " ";
            text += "tok" + std::to_string(rng.below(500));
        }
        texts.push_back(text);
    }
    auto batch = embedder.embed_batch(texts);
    REQUIRE(batch.ok());
    for (size_t i = 0; i < texts.size(); ++i) {
        CHECK(batch.value()[i].values() == embedder.embed(texts[i]).value().values());
    }

    auto failing = embedder.embed_batch({"fine", "!!!", "also fine"});
    REQUIRE_FALSE(failing.ok());
    CHECK(failing.error().code == ErrorCode::EMPTY_TEXT);
    CHECK(failing.error().index == 1);
}

// --- remote embedder against an in-process mock endpoint --------------------

namespace {

struct MockEmbedServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    std::atomic<int> fail_first_n{0};
    std::string last_auth;
    size_t reply_dimension = 32;

    MockEmbedServer() {
        server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            if (auto it = req.headers.find("Authorization"); it != req.headers.end()) {
                last_auth = it->second;
            }
            if (fail_first_n.fetch_sub(1) > 0) {
                res.status = 503;
                return;
            }
            nlohmann::json body = nlohmann::json::parse(req.body);
            nlohmann::json data = nlohmann::json::array();
            for (size_t i = 0; i < body["input"].size(); ++i) {
                std::vector<double> values(reply_dimension, 0.0);
                values[i % reply_dimension] = 2.0;  // deliberately non-unit
                data.push_back({{"embedding", values}});
            }
            res.set_content(nlohmann::json({{"data", data}}).dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~MockEmbedServer() {
        server.stop();
        thread.join();
    }

    EmbedderConfig config() const {
        EmbedderConfig cfg;
        cfg.kind = EmbedderKind::REMOTE;
        cfg.dimension = reply_dimension;
        cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
        cfg.model_name = "test-embed";
        cfg.timeout_ms = 2000;
        cfg.retry_backoff_ms = 10;
        return cfg;
    }
};

}  // namespace

TEST_CASE("remote embedder round trip, normalization, and auth header") {
    MockEmbedServer mock;
    ::setenv("HIREC_EMBED_API_KEY", "test-key", 1);
    RemoteEmbedder embedder(mock.config());

    auto batch = embedder.embed_batch({"chest pain", "skin rash"});
    REQUIRE(batch.ok());
    REQUIRE(batch.value().size() == 2);
    for (const auto& vec : batch.value()) {
        double norm = 0.0;
        for (float v : vec.values()) norm += static_cast<double>(v) * v;
        CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-6);  // normalized client-side
    }
    CHECK(mock.last_auth == "Bearer test-key");
    ::unsetenv("HIREC_EMBED_API_KEY");
}

TEST_CASE("remote embedder rejects wrong dimensions") {
    MockEmbedServer mock;
    auto cfg = mock.config();
    cfg.dimension = 64;  // server replies with 32
    RemoteEmbedder embedder(cfg);
    auto result = embedder.embed("chest pain");
    REQUIRE_FALSE(result.ok());
    CHECK(result.error().code == ErrorCode::REMOTE_BAD_RESPONSE);
}

TEST_CASE("remote embedder retries through transient 5xx failures") {
    MockEmbedServer mock;
    mock.fail_first_n = 2;  // two 503s, then success
    RemoteEmbedder embedder(mock.config());
    auto result = embedder.embed("chest pain");
    REQUIRE(result.ok());
    CHECK(mock.requests.load() == 3);
}

TEST_CASE("remote embedder reports REMOTE_UNAVAILABLE after exhausted retries") {
    EmbedderConfig cfg;
    cfg.kind = EmbedderKind::REMOTE;
    cfg.dimension = 32;
    cfg.endpoint_url = "http://127.0.0.1:1/v1/embeddings";  // nothing listens here
    cfg.model_name = "test-embed";
    cfg.timeout_ms = 200;
    cfg.retry_backoff_ms = 5;
    RemoteEmbedder embedder(cfg);
    auto result = embedder.embed("chest pain");
    REQUIRE_FALSE(result.ok());
    CHECK(result.error().code == ErrorCode::REMOTE_UNAVAILABLE);
}

TEST_CASE("embedder config validation") {
    EmbedderConfig cfg;
    cfg.dimension = 4;
    CHECK_FALSE(cfg.validate().ok());

    cfg = EmbedderConfig{};
    cfg.kind = EmbedderKind::REMOTE;
    CHECK_FALSE(cfg.validate().ok());  // missing endpoint + model
    cfg.endpoint_url = "http://x/v1";
    cfg.model_name = "m";
    CHECK(cfg.validate().ok());
}
