#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hirec/hashing.hpp"
#include "hirec/result.hpp"
#include "hirec/vecstore.hpp"

namespace hirec {

inline constexpr size_t kMinEmbeddingDimension = 8;

enum class EmbedderKind { LOCAL_HASHED, REMOTE };

struct EmbedderConfig {
    EmbedderKind kind = EmbedderKind::LOCAL_HASHED;
    size_t dimension = kDefaultDimension;
    std::string endpoint_url;   // REMOTE only
    std::string model_name;     // REMOTE only
    int timeout_ms = 10000;
    int retry_backoff_ms = 100;  // first retry delay; doubled for the second
    int max_in_flight = 4;

    Result<void> validate() const {
        if (dimension < kMinEmbeddingDimension) {
            return make_error(ErrorCode::INVALID_ARGUMENT, "embedding dimension must be >= 8");
        }
        if (timeout_ms < 1) {
            return make_error(ErrorCode::INVALID_ARGUMENT, "timeout_ms must be positive");
        }
        if (kind == EmbedderKind::REMOTE && (endpoint_url.empty() || model_name.empty())) {
            return make_error(ErrorCode::INVALID_ARGUMENT,
                              "remote embedder requires endpoint_url and model_name");
        }
        return ok();
    }
};

/// Text-to-vector backend. Implementations are safe for concurrent embed
/// calls and always return unit-norm vectors of dimension().
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual size_t dimension() const = 0;
    virtual Result<EmbeddingVector> embed(std::string_view text) const = 0;

    /// Pointwise embed, order preserved; errors carry the failing index.
    virtual Result<std::vector<EmbeddingVector>> embed_batch(
        const std::vector<std::string>& texts) const {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (size_t i = 0; i < texts.size(); ++i) {
            auto vec = embed(texts[i]);
            if (!vec.ok()) {
                Error err = vec.error();
                err.index = static_cast<long>(i);
                return err;
            }
            out.push_back(std::move(vec).value());
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// deterministic local embedder
// ---------------------------------------------------------------------------

/// Hashed bag-of-words embedder. The function is fixed:
///   token    = lowercase alphanumeric word (tokenize_lower_alnum)
///   hash     = FNV-1a 64-bit of the token bytes
///   bucket   = hash mod D
///   sign     = +1 when bit 32 of the hash is 0, else -1
///   vector   = L2-normalized sum of signed unit contributions
/// Pure and platform-independent: the same text yields bitwise-identical
/// vectors everywhere. Zero-token input is EMPTY_TEXT.
class HashedEmbedder final : public Embedder {
public:
    explicit HashedEmbedder(size_t dimension = kDefaultDimension) : dimension_(dimension) {}

    size_t dimension() const override { return dimension_; }

    Result<EmbeddingVector> embed(std::string_view text) const override {
        const auto tokens = tokenize_lower_alnum(text);
        if (tokens.empty()) {
            return make_error(ErrorCode::EMPTY_TEXT, "no alphanumeric tokens in input");
        }
        std::vector<float> values(dimension_, 0.0f);
        for (const auto& token : tokens) {
            const uint64_t hash = fnv1a64(token);
            const size_t bucket = static_cast<size_t>(hash % dimension_);
            const float sign = ((hash >> 32) & 1ULL) ? -1.0f : 1.0f;
            values[bucket] += sign;
        }
        auto unit = EmbeddingVector::normalized(std::move(values));
        if (unit.ok()) return unit;
        // Opposite-signed tokens can cancel to the zero vector; fall back to
        // a single deterministic bucket derived from the joined token text.
        std::string joined;
        for (const auto& token : tokens) {
            if (!joined.empty()) joined.push_back(' ');
            joined += token;
        }
        std::vector<float> fallback(dimension_, 0.0f);
        fallback[static_cast<size_t>(fnv1a64(joined) % dimension_)] = 1.0f;
        return EmbeddingVector::normalized(std::move(fallback));
    }

private:
    size_t dimension_;
};

// ---------------------------------------------------------------------------
// remote embedder
// ---------------------------------------------------------------------------

namespace detail {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // leading slash, "/" when absent
};

inline Result<ParsedUrl> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        return make_error(ErrorCode::INVALID_ARGUMENT, "endpoint url lacks a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return ParsedUrl{url, "/"};
    }
    return ParsedUrl{url.substr(0, path_start), url.substr(path_start)};
}

inline const char* getenv_or_null(const char* name) { return std::getenv(name); }

}  // namespace detail

/// Client for an OpenAI-compatible embedding endpoint. Wire contract
/// (documented in docs/remote_endpoints.md):
///   request  POST {"model": <name>, "input": [<texts>]}
///   response {"data": [{"embedding": [<numbers>]}, ...]}  in input order
/// Each request is retried at most twice with exponential backoff, never
/// blocking past timeout_ms per attempt. Returned vectors are normalized
/// client-side before use. The API key comes from HIREC_EMBED_API_KEY and
/// is never logged.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderConfig config)
        : config_(std::move(config)),
          in_flight_(std::max(1, config_.max_in_flight)) {}

    size_t dimension() const override { return config_.dimension; }

    Result<EmbeddingVector> embed(std::string_view text) const override {
        auto batch = embed_batch({std::string(text)});
        if (!batch.ok()) return batch.error();
        return std::move(batch.value().front());
    }

    Result<std::vector<EmbeddingVector>> embed_batch(
        const std::vector<std::string>& texts) const override {
        if (texts.empty()) return std::vector<EmbeddingVector>{};
        for (size_t i = 0; i < texts.size(); ++i) {
            if (texts[i].find_first_not_of(" \t\r\n") == std::string::npos) {
                Error err = make_error(ErrorCode::EMPTY_TEXT, "empty input text");
                err.index = static_cast<long>(i);
                return err;
            }
        }

        nlohmann::json request = {{"model", config_.model_name}, {"input", texts}};
        auto response = post_json("/", request);
        if (!response.ok()) return response.error();
        const nlohmann::json& body = response.value();

        if (!body.contains("data") || !body["data"].is_array() ||
            body["data"].size() != texts.size()) {
            return make_error(ErrorCode::REMOTE_BAD_RESPONSE,
                              "embedding response lacks a data array of the input size");
        }
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (size_t i = 0; i < texts.size(); ++i) {
            const auto& item = body["data"][i];
            if (!item.contains("embedding") || !item["embedding"].is_array()) {
                Error err = make_error(ErrorCode::REMOTE_BAD_RESPONSE, "missing embedding array");
                err.index = static_cast<long>(i);
                return err;
            }
            const auto& raw = item["embedding"];
            if (raw.size() != config_.dimension) {
                Error err = make_error(ErrorCode::REMOTE_BAD_RESPONSE,
                                       "embedding has dimension " + std::to_string(raw.size()) +
                                           ", expected " + std::to_string(config_.dimension));
                err.index = static_cast<long>(i);
                return err;
            }
            std::vector<float> values(config_.dimension);
            for (size_t d = 0; d < config_.dimension; ++d) {
                if (!raw[d].is_number()) {
                    Error err = make_error(ErrorCode::REMOTE_BAD_RESPONSE,
                                           "non-numeric embedding component");
                    err.index = static_cast<long>(i);
                    return err;
                }
                values[d] = raw[d].get<float>();
            }
            auto unit = EmbeddingVector::normalized(std::move(values));
            if (!unit.ok()) {
                Error err = make_error(ErrorCode::REMOTE_BAD_RESPONSE, "zero embedding vector");
                err.index = static_cast<long>(i);
                return err;
            }
            out.push_back(std::move(unit).value());
        }
        return out;
    }

private:
    Result<nlohmann::json> post_json(const std::string& fallback_path,
                                     const nlohmann::json& request) const {
        auto parsed = detail::split_url(config_.endpoint_url);
        if (!parsed.ok()) return parsed.error();
        const std::string path = parsed.value().path.empty() ? fallback_path : parsed.value().path;

        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<>& sem;
            ~Release() { sem.release(); }
        } release{in_flight_};

        httplib::Client client(parsed.value().base);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));

        httplib::Headers headers;
        if (const char* key = detail::getenv_or_null("HIREC_EMBED_API_KEY")) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        const std::string payload = request.dump();
        std::string last_failure = "transport error";
        for (int attempt = 0; attempt <= 2; ++attempt) {
            if (attempt > 0) {
                const int delay = config_.retry_backoff_ms * (1 << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            auto res = client.Post(path, headers, payload, "application/json");
            if (!res) {
                last_failure = httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_failure = "server status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                return make_error(ErrorCode::REMOTE_BAD_RESPONSE,
                                  "unexpected status " + std::to_string(res->status));
            }
            nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
            if (body.is_discarded()) {
                return make_error(ErrorCode::REMOTE_BAD_RESPONSE, "response is not valid JSON");
            }
            return body;
        }
        return make_error(ErrorCode::REMOTE_UNAVAILABLE,
                          "embedding endpoint unreachable after retries: " + last_failure);
    }

    EmbedderConfig config_;
    mutable std::counting_semaphore<> in_flight_;
};

inline Result<std::unique_ptr<Embedder>> make_embedder(const EmbedderConfig& config) {
    auto valid = config.validate();
    if (!valid.ok()) return valid.error();
    if (config.kind == EmbedderKind::LOCAL_HASHED) {
        return std::unique_ptr<Embedder>(new HashedEmbedder(config.dimension));
    }
    return std::unique_ptr<Embedder>(new RemoteEmbedder(config));
}

}  // namespace hirec
