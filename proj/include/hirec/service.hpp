#pragma once

#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hirec/core.hpp"
#include "hirec/json_io.hpp"
#include "hirec/pipeline.hpp"
#include "hirec/result.hpp"

namespace hirec {

/// Stateless HTTP front end over a RecommendEngine. Versioned paths:
///   POST /v1/recommend  query JSON in, RecommendationResult JSON out
///   GET  /v1/health     build info
/// Requests run concurrently; each one is an independent recommend call.
/// 400 carries the validation error code, 503 backend unavailability,
/// 500 anything else.
class RecommendService {
public:
    RecommendService(const RecommendEngine& engine, AblationConfig config, PipelineParams params,
                     size_t index_size)
        : engine_(&engine),
          config_(config),
          params_(params),
          index_size_(index_size) {
        server_.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            const nlohmann::json body = {{"status", "ok"},
                                         {"version", kLibraryVersion},
                                         {"index_size", index_size_}};
            res.set_content(body.dump(), "application/json");
        });
        server_.Post("/v1/recommend", [this](const httplib::Request& req, httplib::Response& res) {
            handle_recommend(req, res);
        });
    }

    /// Blocks serving until stop() is called.
    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

    /// Binds an ephemeral port and returns it; serve with listen_after_bind.
    int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }

    void stop() { server_.stop(); }
    bool is_running() const { return server_.is_running(); }

private:
    void handle_recommend(const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            respond_error(res, 400, make_error(ErrorCode::PARSE_ERROR, "body is not valid JSON"));
            return;
        }
        auto query = patient_query_from_json(body);
        if (!query.ok()) {
            respond_error(res, 400, query.error());
            return;
        }
        auto valid = validate_query(query.value());
        if (!valid.ok()) {
            respond_error(res, 400, valid.error());
            return;
        }
        auto result = engine_->recommend(query.value(), config_, params_);
        if (!result.ok()) {
            const ErrorCode code = result.error().code;
            const int status = (code == ErrorCode::BACKEND_UNAVAILABLE ||
                                code == ErrorCode::REMOTE_UNAVAILABLE)
                                   ? 503
                                   : 500;
            respond_error(res, status, result.error());
            return;
        }
        res.set_content(to_json(result.value()).dump(), "application/json");
    }

    static void respond_error(httplib::Response& res, int status, const Error& error) {
        res.status = status;
        res.set_content(error_to_json(error).dump(), "application/json");
    }

    const RecommendEngine* engine_;
    AblationConfig config_;
    PipelineParams params_;
    size_t index_size_;
    httplib::Server server_;
};

}  // namespace hirec
