#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hirec/core.hpp"
#include "hirec/hashing.hpp"
#include "hirec/json_io.hpp"
#include "hirec/log.hpp"
#include "hirec/memory.hpp"
#include "hirec/reason.hpp"
#include "hirec/result.hpp"

namespace hirec {

/// Final priority in [0,1].
struct Weight {
    double value = 0.0;

    static Result<Weight> create(double value) {
        if (!(value >= 0.0 && value <= 1.0)) {  // also rejects NaN
            return make_error(ErrorCode::INVALID_ARGUMENT,
                              "weight " + std::to_string(value) + " outside [0,1]");
        }
        return Weight{value};
    }

    bool operator==(const Weight&) const = default;
};

/// Candidate plus the patient context the scorer may factor in.
struct ScoreRequest {
    std::variant<DepartmentCandidate, TestCandidate> candidate;
    PatientQuery query;
    std::vector<MemoryRecord> memory;

    double confidence() const {
        return std::visit([](const auto& c) { return c.confidence; }, candidate);
    }
    UrgencyLevel urgency() const {
        return std::visit([](const auto& c) { return c.urgency; }, candidate);
    }
    const std::string& rationale() const {
        return std::visit([](const auto& c) -> const std::string& { return c.rationale; },
                          candidate);
    }
};

/// Priority scorer. Implementations are safe for concurrent calls and
/// always return weights in [0,1].
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual Result<Weight> score(const ScoreRequest& req) const = 0;

    /// Pointwise score, order preserved; errors carry the failing index.
    virtual Result<std::vector<Weight>> score_batch(const std::vector<ScoreRequest>& reqs) const {
        std::vector<Weight> out;
        out.reserve(reqs.size());
        for (size_t i = 0; i < reqs.size(); ++i) {
            auto weight = score(reqs[i]);
            if (!weight.ok()) {
                Error err = weight.error();
                err.index = static_cast<long>(i);
                return err;
            }
            out.push_back(weight.value());
        }
        return out;
    }
};

/// Stand-in for the fine-tuned weight model. Fixed formula:
///   weight = clamp01(0.7 * confidence + 0.2 * urgency_term + 0.1 * history_term)
/// with urgency_term 0 / 0.5 / 1 for ROUTINE / PRIORITY / URGENT and
/// history_term 1 when any patient-history entry shares a token with the
/// candidate rationale (lowercase alphanumeric tokens), else 0. Monotone in
/// confidence and urgency, bounded, and a pure function of the request.
class HeuristicScorer final : public Scorer {
public:
    Result<Weight> score(const ScoreRequest& req) const override {
        const double urgency_term = urgency_value(req.urgency());
        const double history_term = history_matches(req) ? 1.0 : 0.0;
        const double raw = 0.7 * req.confidence() + 0.2 * urgency_term + 0.1 * history_term;
        return Weight{std::min(1.0, std::max(0.0, raw))};
    }

    static double urgency_value(UrgencyLevel level) {
        switch (level) {
            case UrgencyLevel::ROUTINE: return 0.0;
            case UrgencyLevel::PRIORITY: return 0.5;
            case UrgencyLevel::URGENT: return 1.0;
        }
        return 0.0;
    }

    static bool history_matches(const ScoreRequest& req) {
        const auto rationale_tokens = tokenize_lower_alnum(req.rationale());
        for (const auto& entry : req.query.history) {
            for (const auto& token : tokenize_lower_alnum(entry)) {
                if (std::find(rationale_tokens.begin(), rationale_tokens.end(), token) !=
                    rationale_tokens.end()) {
                    return true;
                }
            }
        }
        return false;
    }
};

// ---------------------------------------------------------------------------
// remote scorer
// ---------------------------------------------------------------------------

enum class ScorerKind { HEURISTIC, REMOTE };

struct ScorerConfig {
    ScorerKind kind = ScorerKind::HEURISTIC;
    std::string endpoint_url;
    int timeout_ms = 10000;
    int retry_backoff_ms = 100;
    int max_in_flight = 4;

    Result<void> validate() const {
        if (kind == ScorerKind::REMOTE && endpoint_url.empty()) {
            return make_error(ErrorCode::INVALID_ARGUMENT, "remote scorer requires endpoint_url");
        }
        return ok();
    }
};

inline nlohmann::json to_json(const ScoreRequest& req) {
    nlohmann::json candidate;
    if (std::holds_alternative<DepartmentCandidate>(req.candidate)) {
        candidate = to_json(std::get<DepartmentCandidate>(req.candidate));
        candidate["kind"] = "department";
    } else {
        candidate = to_json(std::get<TestCandidate>(req.candidate));
        candidate["kind"] = "test";
    }
    nlohmann::json memory = nlohmann::json::array();
    for (const auto& record : req.memory) memory.push_back(to_json(record));
    return {{"candidate", std::move(candidate)},
            {"query", to_json(req.query)},
            {"memory", std::move(memory)}};
}

/// Client for a drop-in replacement of the heuristic (a genuinely
/// fine-tuned model can sit behind the same interface). Wire contract
/// (docs/remote_endpoints.md):
///   request  POST the serialized ScoreRequest
///   response {"weight": number in [0,1]}
/// Finite out-of-range weights are clamped with a logged warning;
/// non-numeric or non-finite weights are REMOTE_BAD_RESPONSE. The API key
/// comes from HIREC_WEIGHT_API_KEY and is never logged.
class RemoteScorer final : public Scorer {
public:
    explicit RemoteScorer(ScorerConfig config)
        : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {}

    Result<Weight> score(const ScoreRequest& req) const override {
        auto parsed_url = detail::split_url(config_.endpoint_url);
        if (!parsed_url.ok()) return parsed_url.error();

        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<>& sem;
            ~Release() { sem.release(); }
        } release{in_flight_};

        httplib::Client client(parsed_url.value().base);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));

        httplib::Headers headers;
        if (const char* key = detail::getenv_or_null("HIREC_WEIGHT_API_KEY")) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        const std::string payload = to_json(req).dump();

        std::string last_failure = "transport error";
        for (int attempt = 0; attempt <= 2; ++attempt) {
            if (attempt > 0) {
                const int delay = config_.retry_backoff_ms * (1 << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            auto res = client.Post(parsed_url.value().path, headers, payload, "application/json");
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
                                  "scorer returned status " + std::to_string(res->status));
            }
            nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
            if (body.is_discarded() || !body.contains("weight") || !body["weight"].is_number()) {
                return make_error(ErrorCode::REMOTE_BAD_RESPONSE,
                                  "scorer reply lacks a numeric weight");
            }
            const double raw = body["weight"].get<double>();
            if (!std::isfinite(raw)) {
                return make_error(ErrorCode::REMOTE_BAD_RESPONSE, "scorer weight is not finite");
            }
            if (raw < 0.0 || raw > 1.0) {
                log_warning("remote weight " + std::to_string(raw) + " clamped into [0,1]");
                return Weight{std::min(1.0, std::max(0.0, raw))};
            }
            return Weight{raw};
        }
        return make_error(ErrorCode::REMOTE_UNAVAILABLE,
                          "scorer endpoint unreachable after retries: " + last_failure);
    }

private:
    ScorerConfig config_;
    mutable std::counting_semaphore<> in_flight_;
};

inline Result<std::unique_ptr<Scorer>> make_scorer(const ScorerConfig& config) {
    auto valid = config.validate();
    if (!valid.ok()) return valid.error();
    if (config.kind == ScorerKind::HEURISTIC) {
        return std::unique_ptr<Scorer>(new HeuristicScorer());
    }
    return std::unique_ptr<Scorer>(new RemoteScorer(config));
}

}  // namespace hirec
