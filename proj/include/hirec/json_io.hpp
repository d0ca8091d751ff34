#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "hirec/core.hpp"
#include "hirec/memory.hpp"
#include "hirec/reason.hpp"
#include "hirec/result.hpp"

namespace hirec {

inline nlohmann::json to_json(const PatientQuery& query) {
    nlohmann::json body = {{"symptoms", query.symptoms}};
    if (query.age) body["age"] = *query.age;
    if (query.sex) body["sex"] = to_string(*query.sex);
    if (!query.vitals.empty()) body["vitals"] = query.vitals;
    if (!query.history.empty()) body["history"] = query.history;
    return body;
}

/// Accepts the documented query object: symptoms plus optional age, sex,
/// vitals and history. Validation (non-empty symptoms, age range) is the
/// caller's job via validate_query.
inline Result<PatientQuery> patient_query_from_json(const nlohmann::json& body) {
    if (!body.is_object()) {
        return make_error(ErrorCode::PARSE_ERROR, "query must be a JSON object");
    }
    PatientQuery query;
    if (body.contains("symptoms")) {
        if (!body["symptoms"].is_string()) {
            return make_error(ErrorCode::PARSE_ERROR, "symptoms must be a string");
        }
        query.symptoms = body["symptoms"].get<std::string>();
    }
    if (body.contains("age")) {
        if (!body["age"].is_number_integer()) {
            return make_error(ErrorCode::PARSE_ERROR, "age must be an integer");
        }
        query.age = body["age"].get<int>();
    }
    if (body.contains("sex")) {
        if (!body["sex"].is_string()) {
            return make_error(ErrorCode::PARSE_ERROR, "sex must be a string");
        }
        auto sex = sex_from_string(body["sex"].get<std::string>());
        if (!sex) {
            return make_error(ErrorCode::PARSE_ERROR, "sex must be one of F, M, OTHER");
        }
        query.sex = *sex;
    }
    if (body.contains("vitals")) {
        if (!body["vitals"].is_object()) {
            return make_error(ErrorCode::PARSE_ERROR, "vitals must be an object");
        }
        for (const auto& [key, value] : body["vitals"].items()) {
            if (!value.is_number()) {
                return make_error(ErrorCode::PARSE_ERROR, "vital '" + key + "' must be a number");
            }
            query.vitals.emplace(key, value.get<double>());
        }
    }
    if (body.contains("history")) {
        if (!body["history"].is_array()) {
            return make_error(ErrorCode::PARSE_ERROR, "history must be an array of strings");
        }
        for (const auto& entry : body["history"]) {
            if (!entry.is_string()) {
                return make_error(ErrorCode::PARSE_ERROR, "history entries must be strings");
            }
            query.history.push_back(entry.get<std::string>());
        }
    }
    return query;
}

inline nlohmann::json to_json(const MemoryRecord& record) {
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& id : record.doc_ids) ids.push_back(id.str());
    return {{"step", record.step},
            {"layer", to_string(record.layer)},
            {"summary", record.summary},
            {"flags", record.flags},
            {"doc_ids", std::move(ids)}};
}

inline nlohmann::json to_json(const DepartmentCandidate& candidate) {
    return {{"department", candidate.department},
            {"confidence", candidate.confidence},
            {"urgency", to_string(candidate.urgency)},
            {"rationale", candidate.rationale}};
}

inline nlohmann::json to_json(const TestCandidate& candidate) {
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& id : candidate.supporting_doc_ids) ids.push_back(id.str());
    return {{"test_id", candidate.test_id},
            {"name", candidate.name},
            {"department", candidate.department},
            {"confidence", candidate.confidence},
            {"urgency", to_string(candidate.urgency)},
            {"rationale", candidate.rationale},
            {"supporting_doc_ids", std::move(ids)}};
}

inline nlohmann::json error_to_json(const Error& error) {
    nlohmann::json body = {{"code", to_string(error.code)}, {"message", error.message}};
    if (error.line >= 0) body["line"] = error.line;
    if (error.index >= 0) body["index"] = error.index;
    return {{"error", std::move(body)}};
}

}  // namespace hirec
