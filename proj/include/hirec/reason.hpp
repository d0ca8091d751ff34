#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hirec/core.hpp"
#include "hirec/embed.hpp"
#include "hirec/log.hpp"
#include "hirec/memory.hpp"
#include "hirec/result.hpp"
#include "hirec/vecstore.hpp"

namespace hirec {

// ---------------------------------------------------------------------------
// candidates and outputs
// ---------------------------------------------------------------------------

/// Allowed flag vocabulary. Unknown flags from remote replies are dropped
/// with a warning.
inline const std::set<std::string>& flag_vocabulary() {
    static const std::set<std::string> flags = {"urgent_case", "uncertain_diagnosis",
                                                "needs_followup"};
    return flags;
}

struct DepartmentCandidate {
    std::string department;
    double confidence = 0.0;  // in [0,1]
    std::string rationale;
    UrgencyLevel urgency = UrgencyLevel::ROUTINE;

    bool operator==(const DepartmentCandidate&) const = default;
};

struct TestCandidate {
    std::string test_id;
    std::string name;
    std::string department;
    double confidence = 0.0;  // in [0,1]
    UrgencyLevel urgency = UrgencyLevel::ROUTINE;
    std::string rationale;
    std::vector<DocumentId> supporting_doc_ids;

    bool operator==(const TestCandidate&) const = default;
};

/// Structured result of one reasoning step. ROOT fills departments;
/// DEPARTMENT and ITEM fill tests.
struct ReasoningOutput {
    std::vector<DepartmentCandidate> departments;
    std::vector<TestCandidate> tests;
    std::vector<std::string> flags;
    std::string summary;

    bool operator==(const ReasoningOutput&) const = default;
};

/// A retrieved document with its similarity. The document pointer refers
/// into the caller's knowledge base and must outlive the context.
struct ScoredDoc {
    RetrievalHit hit;
    const Document* doc;
};

struct ReasoningContext {
    Layer layer = Layer::ROOT;
    PatientQuery query;
    std::vector<ScoredDoc> hits;
    std::vector<MemoryRecord> memory;
    std::optional<std::string> department;  // required when layer == DEPARTMENT
};

// ---------------------------------------------------------------------------
// prompt templates
// ---------------------------------------------------------------------------
//
// Templates are plain text with {{QUERY}}, {{HITS}}, {{MEMORY}} and
// {{DEPARTMENT}} placeholders; the layer instruction and output schema are
// part of the template text. The repo ships them under templates/ and the
// library carries an identical compiled-in copy (kept in sync by test).

inline constexpr size_t kPromptBodyLimit = 800;  // chars of document body per hit

namespace detail {

inline constexpr const char* kRootTemplate =
    "You are a medical triage assistant routing a patient to hospital departments.\n"
    "\n"
    "Patient presentation:\n"
    "{{QUERY}}\n"
    "\n"
    "Department knowledge retrieved for this presentation:\n"
    "{{HITS}}\n"
    "\n"
    "Reasoning history so far:\n"
    "{{MEMORY}}\n"
    "\n"
    "Identify the departments that should evaluate this patient. Respond with a\n"
    "single JSON object and nothing else, following exactly this schema:\n"
    "{\"departments\": [{\"department\": string, \"confidence\": number in [0,1],\n"
    "  \"urgency\": \"routine\"|\"priority\"|\"urgent\", \"rationale\": string}],\n"
    " \"flags\": [string], \"summary\": string}\n";

inline constexpr const char* kDepartmentTemplate =
    "You are a medical specialist in the {{DEPARTMENT}} department selecting\n"
    "diagnostic tests for a referred patient.\n"
    "\n"
    "Patient presentation:\n"
    "{{QUERY}}\n"
    "\n"
    "Test knowledge retrieved for this presentation:\n"
    "{{HITS}}\n"
    "\n"
    "Reasoning history so far:\n"
    "{{MEMORY}}\n"
    "\n"
    "Select the diagnostic tests this department should run. Respond with a\n"
    "single JSON object and nothing else, following exactly this schema:\n"
    "{\"tests\": [{\"test_id\": string, \"name\": string, \"department\": string,\n"
    "  \"confidence\": number in [0,1], \"urgency\": \"routine\"|\"priority\"|\"urgent\",\n"
    "  \"rationale\": string, \"supporting_doc_ids\": [string]}],\n"
    " \"flags\": [string], \"summary\": string}\n";

inline constexpr const char* kItemTemplate =
    "You are consolidating diagnostic test recommendations across departments\n"
    "into one coherent plan.\n"
    "\n"
    "Patient presentation:\n"
    "{{QUERY}}\n"
    "\n"
    "Candidate tests and retrieved knowledge:\n"
    "{{HITS}}\n"
    "\n"
    "Reasoning history so far:\n"
    "{{MEMORY}}\n"
    "\n"
    "Produce the final consolidated test list, removing redundancies. Respond\n"
    "with a single JSON object and nothing else, following exactly this schema:\n"
    "{\"tests\": [{\"test_id\": string, \"name\": string, \"department\": string,\n"
    "  \"confidence\": number in [0,1], \"urgency\": \"routine\"|\"priority\"|\"urgent\",\n"
    "  \"rationale\": string, \"supporting_doc_ids\": [string]}],\n"
    " \"flags\": [string], \"summary\": string}\n";

}  // namespace detail

/// Per-layer prompt templates, loadable from a directory of versioned
/// files (root.tmpl, department.tmpl, item.tmpl).
class PromptLibrary {
public:
    static PromptLibrary builtin() {
        PromptLibrary lib;
        lib.templates_[Layer::ROOT] = detail::kRootTemplate;
        lib.templates_[Layer::DEPARTMENT] = detail::kDepartmentTemplate;
        lib.templates_[Layer::ITEM] = detail::kItemTemplate;
        return lib;
    }

    static Result<PromptLibrary> from_directory(const std::string& dir) {
        PromptLibrary lib;
        const std::pair<Layer, const char*> files[] = {
            {Layer::ROOT, "root.tmpl"},
            {Layer::DEPARTMENT, "department.tmpl"},
            {Layer::ITEM, "item.tmpl"},
        };
        for (const auto& [layer, name] : files) {
            std::ifstream in(dir + "/" + name);
            if (!in) {
                return make_error(ErrorCode::IO_ERROR,
                                  "cannot open template '" + dir + "/" + name + "'");
            }
            std::stringstream buffer;
            buffer << in.rdbuf();
            lib.templates_[layer] = buffer.str();
        }
        return lib;
    }

    const std::string& text(Layer layer) const { return templates_.at(layer); }

    bool operator==(const PromptLibrary&) const = default;

private:
    std::map<Layer, std::string> templates_;
};

namespace detail {

inline std::string format_similarity(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

inline std::string render_query_block(const PatientQuery& query) {
    std::ostringstream out;
    out << "symptoms: " << query.symptoms;
    if (query.age) out << "\nage: " << *query.age;
    if (query.sex) out << "\nsex: " << to_string(*query.sex);
    for (const auto& [key, value] : query.vitals) {
        out << "\n" << key << ": " << format_similarity(value);
    }
    if (!query.history.empty()) {
        out << "\nhistory:";
        for (const auto& entry : query.history) out << "\n  - " << entry;
    }
    return out.str();
}

inline std::string render_hits_block(const std::vector<ScoredDoc>& hits) {
    if (hits.empty()) return "(no documents retrieved)";
    std::ostringstream out;
    bool first = true;
    for (const auto& scored : hits) {
        if (!first) out << "\n";
        first = false;
        out << "- [" << scored.hit.doc_id.str() << "] " << scored.doc->title() << " (similarity "
            << format_similarity(scored.hit.similarity) << ")\n  ";
        const std::string& body = scored.doc->body();
        out << (body.size() > kPromptBodyLimit ? body.substr(0, kPromptBodyLimit) : body);
    }
    return out.str();
}

inline std::string render_memory_block(const std::vector<MemoryRecord>& memory) {
    if (memory.empty()) return "(none)";
    std::ostringstream out;
    bool first = true;
    for (const auto& record : memory) {
        if (!first) out << "\n";
        first = false;
        out << "- [step " << record.step << " | " << to_string(record.layer) << "] "
            << record.summary;
        if (!record.flags.empty()) {
            out << " | flags:";
            for (const auto& flag : record.flags) out << " " << flag;
        }
    }
    return out.str();
}

inline void replace_all(std::string& text, std::string_view needle, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

}  // namespace detail

/// Deterministic prompt rendering: the query text, each hit's title and
/// truncated body, serialized memory summaries, and the layer instruction
/// from the template.
inline std::string render_prompt(const ReasoningContext& ctx, const PromptLibrary& library) {
    std::string prompt = library.text(ctx.layer);
    detail::replace_all(prompt, "{{QUERY}}", detail::render_query_block(ctx.query));
    detail::replace_all(prompt, "{{HITS}}", detail::render_hits_block(ctx.hits));
    detail::replace_all(prompt, "{{MEMORY}}", detail::render_memory_block(ctx.memory));
    detail::replace_all(prompt, "{{DEPARTMENT}}", ctx.department.value_or(""));
    return prompt;
}

// ---------------------------------------------------------------------------
// structured output parsing
// ---------------------------------------------------------------------------

namespace detail {

/// First balanced top-level JSON object embedded in possibly chatty text.
inline std::optional<std::string> extract_first_json_object(std::string_view raw) {
    const size_t start = raw.find('{');
    if (start == std::string_view::npos) return std::nullopt;
    for (size_t from = start; from != std::string_view::npos; from = raw.find('{', from + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (size_t i = from; i < raw.size(); ++i) {
            const char ch = raw[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (ch == '\\') {
                    escaped = true;
                } else if (ch == '"') {
                    in_string = false;
                }
                continue;
            }
            if (ch == '"') {
                in_string = true;
            } else if (ch == '{') {
                ++depth;
            } else if (ch == '}') {
                if (--depth == 0) {
                    auto candidate = raw.substr(from, i - from + 1);
                    auto parsed = nlohmann::json::parse(candidate, nullptr, false);
                    if (!parsed.is_discarded()) return std::string(candidate);
                    break;  // unbalanced-in-detail; try the next '{'
                }
            }
        }
    }
    return std::nullopt;
}

inline double clamp01(double value) { return std::min(1.0, std::max(0.0, value)); }

inline std::vector<std::string> parse_flags(const nlohmann::json& node) {
    std::vector<std::string> flags;
    if (!node.is_array()) return flags;
    for (const auto& flag : node) {
        if (!flag.is_string()) continue;
        const std::string text = flag.get<std::string>();
        if (flag_vocabulary().count(text) != 0) {
            if (std::find(flags.begin(), flags.end(), text) == flags.end()) flags.push_back(text);
        } else {
            log_warning("dropping unknown flag '" + text + "'");
        }
    }
    return flags;
}

}  // namespace detail

/// Parses a reply against the documented schema: the first well-formed
/// JSON object is extracted from the text, confidences are clamped into
/// [0,1], unknown flags are dropped with a warning.
inline Result<ReasoningOutput> parse_response(Layer layer, std::string_view raw) {
    auto extracted = detail::extract_first_json_object(raw);
    if (!extracted) {
        return make_error(ErrorCode::UNPARSEABLE_RESPONSE, "no JSON object found in reply");
    }
    const nlohmann::json body = nlohmann::json::parse(*extracted);

    ReasoningOutput output;
    if (body.contains("summary") && body["summary"].is_string()) {
        output.summary = body["summary"].get<std::string>();
    }
    if (body.contains("flags")) output.flags = detail::parse_flags(body["flags"]);

    if (layer == Layer::ROOT) {
        if (!body.contains("departments") || !body["departments"].is_array()) {
            return make_error(ErrorCode::UNPARSEABLE_RESPONSE,
                              "root reply lacks a departments array");
        }
        for (const auto& node : body["departments"]) {
            if (!node.is_object() || !node.contains("department") ||
                !node["department"].is_string()) {
                log_warning("skipping department candidate without a department name");
                continue;
            }
            DepartmentCandidate candidate;
            candidate.department = canonicalize_department(node["department"].get<std::string>());
            if (node.contains("confidence") && node["confidence"].is_number()) {
                candidate.confidence = detail::clamp01(node["confidence"].get<double>());
            }
            if (node.contains("urgency") && node["urgency"].is_string()) {
                candidate.urgency = urgency_from_string(node["urgency"].get<std::string>());
            }
            if (node.contains("rationale") && node["rationale"].is_string()) {
                candidate.rationale = node["rationale"].get<std::string>();
            }
            output.departments.push_back(std::move(candidate));
        }
        return output;
    }

    if (!body.contains("tests") || !body["tests"].is_array()) {
        return make_error(ErrorCode::UNPARSEABLE_RESPONSE, "reply lacks a tests array");
    }
    for (const auto& node : body["tests"]) {
        if (!node.is_object() || !node.contains("test_id") || !node["test_id"].is_string() ||
            node["test_id"].get_ref<const std::string&>().empty()) {
            log_warning("skipping test candidate without a test_id");
            continue;
        }
        TestCandidate candidate;
        candidate.test_id = node["test_id"].get<std::string>();
        if (node.contains("name") && node["name"].is_string()) {
            candidate.name = node["name"].get<std::string>();
        }
        if (node.contains("department") && node["department"].is_string()) {
            candidate.department = canonicalize_department(node["department"].get<std::string>());
        }
        if (node.contains("confidence") && node["confidence"].is_number()) {
            candidate.confidence = detail::clamp01(node["confidence"].get<double>());
        }
        if (node.contains("urgency") && node["urgency"].is_string()) {
            candidate.urgency = urgency_from_string(node["urgency"].get<std::string>());
        }
        if (node.contains("rationale") && node["rationale"].is_string()) {
            candidate.rationale = node["rationale"].get<std::string>();
        }
        if (node.contains("supporting_doc_ids") && node["supporting_doc_ids"].is_array()) {
            for (const auto& id_node : node["supporting_doc_ids"]) {
                if (!id_node.is_string()) continue;
                auto id = DocumentId::create(id_node.get<std::string>());
                if (id.ok()) candidate.supporting_doc_ids.push_back(std::move(id).value());
            }
        }
        output.tests.push_back(std::move(candidate));
    }
    return output;
}

/// Inverse of parse_response for valid outputs (roundtrip identity).
inline std::string serialize_reasoning_output(Layer layer, const ReasoningOutput& output) {
    nlohmann::json body;
    if (layer == Layer::ROOT) {
        body["departments"] = nlohmann::json::array();
        for (const auto& candidate : output.departments) {
            body["departments"].push_back({{"department", candidate.department},
                                           {"confidence", candidate.confidence},
                                           {"urgency", to_string(candidate.urgency)},
                                           {"rationale", candidate.rationale}});
        }
    } else {
        body["tests"] = nlohmann::json::array();
        for (const auto& candidate : output.tests) {
            nlohmann::json ids = nlohmann::json::array();
            for (const auto& id : candidate.supporting_doc_ids) ids.push_back(id.str());
            body["tests"].push_back({{"test_id", candidate.test_id},
                                     {"name", candidate.name},
                                     {"department", candidate.department},
                                     {"confidence", candidate.confidence},
                                     {"urgency", to_string(candidate.urgency)},
                                     {"rationale", candidate.rationale},
                                     {"supporting_doc_ids", std::move(ids)}});
        }
    }
    body["flags"] = output.flags;
    body["summary"] = output.summary;
    return body.dump();
}

// ---------------------------------------------------------------------------
// backends
// ---------------------------------------------------------------------------

/// Layer-specific reasoning backend. Implementations must be safe for
/// concurrent analyze calls.
class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual Result<ReasoningOutput> analyze(const ReasoningContext& ctx) const = 0;
};

/// Similarity floor below which the mock emits no test candidate.
inline constexpr double kMockSimilarityThreshold = 0.05;

/// Top-candidate confidence below which the mock flags needs_followup.
inline constexpr double kMockFollowupConfidence = 0.3;

/// Symptom keywords that raise the urgent_case flag.
inline const std::vector<std::string>& urgent_symptom_keywords() {
    static const std::vector<std::string> keywords = {"severe", "acute"};
    return keywords;
}

/// Deterministic stand-in for the LLM backend; a pure function of the
/// context.
///
/// ROOT rule: group hits by department; each department's confidence is its
/// similarity mass (sum of hit similarities, floored at 0) divided by the
/// total mass over all departments, so confidences sum to 1 whenever any
/// positive-mass hit exists. A department is URGENT when any of its hit
/// documents carries metadata urgency="urgent".
///
/// DEPARTMENT/ITEM rule: candidates are the ITEM-tier hits carrying a
/// test_id whose similarity is at least kMockSimilarityThreshold, in hit
/// order; confidence is the similarity clamped into [0,1]; urgency comes
/// from the document's urgency tag. Candidate test ids therefore always
/// come from context hits, never invented.
///
/// Flags: urgent_case when the symptoms contain an urgent keyword or any
/// emitted candidate is URGENT; uncertain_diagnosis when no candidate was
/// emitted; needs_followup when candidates exist but the best confidence
/// is below kMockFollowupConfidence.
class MockReasoner final : public Reasoner {
public:
    Result<ReasoningOutput> analyze(const ReasoningContext& ctx) const override {
        ReasoningOutput output;
        bool any_urgent = false;

        if (ctx.layer == Layer::ROOT) {
            std::map<std::string, double> mass;
            std::map<std::string, size_t> doc_count;
            std::map<std::string, std::string> top_title;
            std::set<std::string> urgent_departments;
            for (const auto& scored : ctx.hits) {
                const std::string& dept = scored.doc->department();
                mass[dept] += scored.hit.similarity;
                if (++doc_count[dept] == 1) top_title[dept] = scored.doc->title();
                if (scored.doc->urgency_tag() == UrgencyLevel::URGENT) {
                    urgent_departments.insert(dept);
                }
            }
            double total = 0.0;
            for (auto& [dept, value] : mass) {
                value = std::max(0.0, value);
                total += value;
            }
            if (total > 0.0) {
                for (const auto& [dept, value] : mass) {
                    if (value <= 0.0) continue;
                    DepartmentCandidate candidate;
                    candidate.department = dept;
                    candidate.confidence = value / total;
                    candidate.urgency = urgent_departments.count(dept) ? UrgencyLevel::URGENT
                                                                       : UrgencyLevel::ROUTINE;
                    candidate.rationale = "similarity mass " + detail::format_similarity(value) +
                                          " across " + std::to_string(doc_count[dept]) +
                                          " documents (top: " + top_title[dept] + ")";
                    any_urgent |= candidate.urgency == UrgencyLevel::URGENT;
                    output.departments.push_back(std::move(candidate));
                }
                std::sort(output.departments.begin(), output.departments.end(),
                          [](const DepartmentCandidate& a, const DepartmentCandidate& b) {
                              if (a.confidence != b.confidence) return a.confidence > b.confidence;
                              return a.department < b.department;
                          });
            }
            std::ostringstream summary;
            summary << output.departments.size() << " department(s) ranked from "
                    << ctx.hits.size() << " retrieved documents";
            output.summary = summary.str();
        } else {
            for (const auto& scored : ctx.hits) {
                if (scored.doc->tier() != Tier::ITEM) continue;
                auto test_id = scored.doc->test_id();
                if (!test_id) continue;
                if (scored.hit.similarity < kMockSimilarityThreshold) continue;
                TestCandidate candidate;
                candidate.test_id = *test_id;
                candidate.name = scored.doc->title();
                candidate.department = scored.doc->department();
                candidate.confidence = detail::clamp01(scored.hit.similarity);
                candidate.urgency = scored.doc->urgency_tag();
                candidate.rationale = "matched '" + scored.doc->title() + "' (similarity " +
                                      detail::format_similarity(scored.hit.similarity) + ")";
                candidate.supporting_doc_ids.push_back(scored.hit.doc_id);
                any_urgent |= candidate.urgency == UrgencyLevel::URGENT;
                output.tests.push_back(std::move(candidate));
            }
            std::ostringstream summary;
            summary << output.tests.size() << " candidate test(s) from " << ctx.hits.size()
                    << " retrieved documents";
            if (ctx.department) summary << " in " << *ctx.department;
            output.summary = summary.str();
        }

        const bool empty = output.departments.empty() && output.tests.empty();
        const auto symptom_tokens = tokenize_lower_alnum(ctx.query.symptoms);
        bool keyword_urgent = false;
        for (const auto& keyword : urgent_symptom_keywords()) {
            keyword_urgent |=
                std::find(symptom_tokens.begin(), symptom_tokens.end(), keyword) !=
                symptom_tokens.end();
        }
        if (keyword_urgent || any_urgent) output.flags.push_back("urgent_case");
        if (empty) output.flags.push_back("uncertain_diagnosis");
        if (!empty && ctx.layer != Layer::ROOT && !output.tests.empty() &&
            output.tests.front().confidence < kMockFollowupConfidence) {
            output.flags.push_back("needs_followup");
        }
        return output;
    }
};

// ---------------------------------------------------------------------------
// remote backend
// ---------------------------------------------------------------------------

enum class ReasonerKind { MOCK, REMOTE };

struct ReasonerConfig {
    ReasonerKind kind = ReasonerKind::MOCK;
    std::string endpoint_url;
    std::string model_name;
    int timeout_ms = 30000;
    int retry_backoff_ms = 100;
    int max_in_flight = 2;

    Result<void> validate() const {
        if (kind == ReasonerKind::REMOTE && (endpoint_url.empty() || model_name.empty())) {
            return make_error(ErrorCode::INVALID_ARGUMENT,
                              "remote reasoner requires endpoint_url and model_name");
        }
        return ok();
    }
};

/// Client for a chat-completion endpoint (docs/remote_endpoints.md):
///   request  POST {"model", "temperature": 0, "messages": [...]}
///   response {"choices": [{"message": {"content": <text>}}]}
/// One automatic repair round-trip re-sends the schema when the reply
/// fails structured parsing; a second failure is UNPARSEABLE_RESPONSE.
/// The API key comes from HIREC_LLM_API_KEY and is never logged.
class RemoteReasoner final : public Reasoner {
public:
    RemoteReasoner(ReasonerConfig config, PromptLibrary library)
        : config_(std::move(config)),
          library_(std::move(library)),
          in_flight_(std::max(1, config_.max_in_flight)) {}

    Result<ReasoningOutput> analyze(const ReasoningContext& ctx) const override {
        const std::string prompt = render_prompt(ctx, library_);
        nlohmann::json messages = nlohmann::json::array();
        messages.push_back({{"role", "system"},
                            {"content", "You are a clinical decision support reasoning engine. "
                                        "Answer with a single JSON object only."}});
        messages.push_back({{"role", "user"}, {"content", prompt}});

        auto reply = complete(messages);
        if (!reply.ok()) return reply.error();
        auto parsed = parse_response(ctx.layer, reply.value());
        if (parsed.ok()) return parsed;
        if (parsed.error().code != ErrorCode::UNPARSEABLE_RESPONSE) return parsed.error();

        // Repair round: show the reply back and restate the schema.
        messages.push_back({{"role", "assistant"}, {"content", reply.value()}});
        messages.push_back(
            {{"role", "user"},
             {"content", "That reply could not be parsed. Respond again with a single JSON "
                         "object exactly matching the schema given in the first message, with "
                         "no surrounding prose."}});
        auto repaired = complete(messages);
        if (!repaired.ok()) return repaired.error();
        return parse_response(ctx.layer, repaired.value());
    }

private:
    Result<std::string> complete(const nlohmann::json& messages) const {
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
        if (const char* key = detail::getenv_or_null("HIREC_LLM_API_KEY")) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        const nlohmann::json request = {
            {"model", config_.model_name}, {"temperature", 0}, {"messages", messages}};
        const std::string payload = request.dump();

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
                return make_error(ErrorCode::BACKEND_UNAVAILABLE,
                                  "chat endpoint returned status " + std::to_string(res->status));
            }
            nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
            if (body.is_discarded() || !body.contains("choices") || !body["choices"].is_array() ||
                body["choices"].empty() || !body["choices"][0].contains("message") ||
                !body["choices"][0]["message"].contains("content") ||
                !body["choices"][0]["message"]["content"].is_string()) {
                return make_error(ErrorCode::BACKEND_UNAVAILABLE,
                                  "chat endpoint reply is not a completion object");
            }
            return body["choices"][0]["message"]["content"].get<std::string>();
        }
        return make_error(ErrorCode::BACKEND_UNAVAILABLE,
                          "chat endpoint unreachable after retries: " + last_failure);
    }

    ReasonerConfig config_;
    PromptLibrary library_;
    mutable std::counting_semaphore<> in_flight_;
};

inline Result<std::unique_ptr<Reasoner>> make_reasoner(const ReasonerConfig& config,
                                                       const PromptLibrary& library) {
    auto valid = config.validate();
    if (!valid.ok()) return valid.error();
    if (config.kind == ReasonerKind::MOCK) {
        return std::unique_ptr<Reasoner>(new MockReasoner());
    }
    return std::unique_ptr<Reasoner>(new RemoteReasoner(config, library));
}

}  // namespace hirec
