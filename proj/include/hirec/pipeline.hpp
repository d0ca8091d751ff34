#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hirec/core.hpp"
#include "hirec/embed.hpp"
#include "hirec/hashing.hpp"
#include "hirec/json_io.hpp"
#include "hirec/kb.hpp"
#include "hirec/memory.hpp"
#include "hirec/reason.hpp"
#include "hirec/result.hpp"
#include "hirec/vecstore.hpp"
#include "hirec/weigh.hpp"

namespace hirec {

// ---------------------------------------------------------------------------
// results
// ---------------------------------------------------------------------------

struct TestRecommendation {
    std::string test_id;
    std::string name;
    std::string department;
    Weight weight;
    UrgencyLevel urgency = UrgencyLevel::ROUTINE;
    std::string rationale;
    std::vector<DocumentId> supporting_doc_ids;

    bool operator==(const TestRecommendation&) const = default;
};

/// One trace entry per reasoning step. retrieval_filter records how the
/// search was scoped ("tier=department", "tier=item department=x",
/// "tier=item", or "merged" when the dual-KB split is disabled); retrieved
/// carries the hits with their similarities so a step's prompt can be
/// reconstructed and its digest re-verified from the trace alone.
struct ReasoningStep {
    Layer layer = Layer::ROOT;
    std::optional<std::string> department;
    std::string prompt_digest;  // fnv1a64 hex of the rendered prompt
    std::string summary;
    std::vector<std::string> flags;
    std::string retrieval_filter;
    int retrieval_k = 0;
    std::vector<RetrievalHit> retrieved;

    bool operator==(const ReasoningStep&) const = default;
};

struct LayerTimings {
    double root_ms = 0.0;
    double department_ms = 0.0;
    double item_ms = 0.0;
};

/// Full pipeline output. Equality and JSON serialization exclude timings,
/// which vary run to run; everything else is deterministic with local
/// backends.
struct RecommendationResult {
    std::vector<TestRecommendation> recommendations;
    std::vector<ReasoningStep> trace;
    std::vector<MemoryRecord> memory_final;
    AblationConfig config_used;
    PipelineParams params_used;
    LayerTimings timings;

    bool operator==(const RecommendationResult& other) const {
        return recommendations == other.recommendations && trace == other.trace &&
               memory_final == other.memory_final && config_used == other.config_used &&
               params_used == other.params_used;
    }
};

inline nlohmann::json to_json(const TestRecommendation& rec) {
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& id : rec.supporting_doc_ids) ids.push_back(id.str());
    return {{"test_id", rec.test_id},
            {"name", rec.name},
            {"department", rec.department},
            {"weight", rec.weight.value},
            {"urgency", to_string(rec.urgency)},
            {"rationale", rec.rationale},
            {"supporting_doc_ids", std::move(ids)}};
}

inline nlohmann::json to_json(const ReasoningStep& step) {
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& hit : step.retrieved) {
        hits.push_back({{"doc_id", hit.doc_id.str()}, {"similarity", hit.similarity}});
    }
    nlohmann::json body = {{"layer", to_string(step.layer)},
                           {"prompt_digest", step.prompt_digest},
                           {"summary", step.summary},
                           {"flags", step.flags},
                           {"retrieval_filter", step.retrieval_filter},
                           {"retrieval_k", step.retrieval_k},
                           {"retrieved", std::move(hits)}};
    if (step.department) body["department"] = *step.department;
    return body;
}

inline nlohmann::json to_json(const AblationConfig& config) {
    return {{"memory_enabled", config.memory_enabled},
            {"department_layer_enabled", config.department_layer_enabled},
            {"dual_kb_enabled", config.dual_kb_enabled}};
}

inline nlohmann::json to_json(const PipelineParams& params) {
    return {{"root_top_k", params.root_top_k},
            {"dept_top_k", params.dept_top_k},
            {"max_departments", params.max_departments},
            {"max_recommendations", params.max_recommendations},
            {"min_weight", params.min_weight}};
}

inline nlohmann::json to_json(const RecommendationResult& result, bool include_timings = false) {
    nlohmann::json recommendations = nlohmann::json::array();
    for (const auto& rec : result.recommendations) recommendations.push_back(to_json(rec));
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& step : result.trace) trace.push_back(to_json(step));
    nlohmann::json memory = nlohmann::json::array();
    for (const auto& record : result.memory_final) memory.push_back(to_json(record));
    nlohmann::json body = {{"recommendations", std::move(recommendations)},
                           {"trace", std::move(trace)},
                           {"memory", std::move(memory)},
                           {"config_used", {{"ablation", to_json(result.config_used)},
                                            {"params", to_json(result.params_used)}}}};
    if (include_timings) {
        body["timings_ms"] = {{"root", result.timings.root_ms},
                              {"department", result.timings.department_ms},
                              {"item", result.timings.item_ms}};
    }
    return body;
}

/// Line-delimited structured trace log, one JSON object per step.
inline std::string trace_to_jsonl(const RecommendationResult& result) {
    std::string out;
    for (const auto& step : result.trace) {
        out += to_json(step).dump();
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

/// Three-layer recommendation engine: root routing over department
/// knowledge, per-department test refinement, and a final consolidation
/// pass with memory-based redundancy elimination and weighting.
///
/// The engine borrows its collaborators; they must outlive it. recommend()
/// is const and internally sequential, so distinct calls may run in
/// parallel (the index serves concurrent readers).
class RecommendEngine {
public:
    RecommendEngine(const KnowledgeBase& kb, const VectorIndex& index, const Embedder& embedder,
                    const Reasoner& reasoner, const Scorer& scorer,
                    PromptLibrary library = PromptLibrary::builtin())
        : kb_(&kb),
          index_(&index),
          embedder_(&embedder),
          reasoner_(&reasoner),
          scorer_(&scorer),
          library_(std::move(library)) {}

    const PromptLibrary& prompt_library() const { return library_; }

    Result<RecommendationResult> recommend(const PatientQuery& query,
                                           const AblationConfig& config = {},
                                           const PipelineParams& params = {}) const {
        auto query_ok = validate_query(query);
        if (!query_ok.ok()) return query_ok.error();
        auto params_ok = params.validate();
        if (!params_ok.ok()) return params_ok.error();

        RecommendationResult result;
        result.config_used = config;
        result.params_used = params;
        std::vector<MemoryRecord> memory;

        // --- root layer: route to departments -------------------------------
        const auto root_start = std::chrono::steady_clock::now();

        auto query_vec = embedder_->embed(embedding_text(query));
        if (!query_vec.ok()) return annotate(query_vec.error(), Layer::ROOT);

        std::string root_filter_desc;
        auto root_hits = scoped_search(query_vec.value(), params.root_top_k,
                                       config.dual_kb_enabled ? std::optional(Tier::DEPARTMENT)
                                                              : std::nullopt,
                                       std::nullopt, config.dual_kb_enabled, root_filter_desc);
        if (!root_hits.ok()) return annotate(root_hits.error(), Layer::ROOT);

        ReasoningContext root_ctx;
        root_ctx.layer = Layer::ROOT;
        root_ctx.query = query;
        root_ctx.hits = root_hits.value();
        root_ctx.memory = memory;
        const std::string root_prompt = render_prompt(root_ctx, library_);

        auto root_output = reasoner_->analyze(root_ctx);
        if (!root_output.ok()) return annotate(root_output.error(), Layer::ROOT);

        // Weigh departments; advance those with positive weight, best first.
        std::vector<std::pair<DepartmentCandidate, Weight>> kept;
        for (const auto& candidate : root_output.value().departments) {
            auto weight = scorer_->score(ScoreRequest{candidate, query, memory});
            if (!weight.ok()) return annotate(weight.error(), Layer::ROOT);
            if (weight.value().value > 0.0) kept.emplace_back(candidate, weight.value());
        }
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second.value != b.second.value) return a.second.value > b.second.value;
            return a.first.department < b.first.department;
        });
        if (kept.size() > static_cast<size_t>(params.max_departments)) {
            kept.resize(static_cast<size_t>(params.max_departments));
        }

        if (config.memory_enabled) {
            memory.push_back(MemoryRecord{static_cast<int>(memory.size()), Layer::ROOT,
                                          root_output.value().summary, root_output.value().flags,
                                          hit_ids(root_ctx.hits)});
        }
        result.trace.push_back(ReasoningStep{Layer::ROOT, std::nullopt, fnv1a64_hex(root_prompt),
                                             root_output.value().summary,
                                             root_output.value().flags, root_filter_desc,
                                             params.root_top_k, hit_list(root_ctx.hits)});
        result.timings.root_ms = elapsed_ms(root_start);

        // --- department layer: per-specialty refinement ----------------------
        const auto dept_start = std::chrono::steady_clock::now();

        struct PooledCandidate {
            TestCandidate candidate;
            int source_step;  // memory step of the record created alongside it
        };
        std::vector<PooledCandidate> pooled;

        const bool run_department_layer = config.department_layer_enabled && !kept.empty();
        if (run_department_layer) {
            // Every department branch sees the same post-root memory snapshot,
            // keeping branches order-independent.
            const std::vector<MemoryRecord> memory_after_root = memory;
            int branch_index = 0;
            for (const auto& [candidate, weight] : kept) {
                std::string filter_desc;
                auto dept_hits = scoped_search(
                    query_vec.value(), params.dept_top_k,
                    config.dual_kb_enabled ? std::optional(Tier::ITEM) : std::nullopt,
                    config.dual_kb_enabled ? std::optional(candidate.department) : std::nullopt,
                    config.dual_kb_enabled, filter_desc);
                if (!dept_hits.ok()) return annotate(dept_hits.error(), Layer::DEPARTMENT);

                ReasoningContext dept_ctx;
                dept_ctx.layer = Layer::DEPARTMENT;
                dept_ctx.query = query;
                dept_ctx.hits = dept_hits.value();
                dept_ctx.memory = memory_after_root;
                dept_ctx.department = candidate.department;
                const std::string dept_prompt = render_prompt(dept_ctx, library_);

                auto dept_output = reasoner_->analyze(dept_ctx);
                if (!dept_output.ok()) return annotate(dept_output.error(), Layer::DEPARTMENT);

                const int source_step = static_cast<int>(memory.size()) + branch_index;
                for (const auto& test : dept_output.value().tests) {
                    pooled.push_back(PooledCandidate{test, source_step});
                }
                if (config.memory_enabled) {
                    memory.push_back(MemoryRecord{
                        static_cast<int>(memory.size()), Layer::DEPARTMENT,
                        dept_output.value().summary, dept_output.value().flags,
                        hit_ids(dept_ctx.hits)});
                } else {
                    ++branch_index;  // keep source steps distinct without records
                }
                result.trace.push_back(ReasoningStep{
                    Layer::DEPARTMENT, candidate.department, fnv1a64_hex(dept_prompt),
                    dept_output.value().summary, dept_output.value().flags, filter_desc,
                    params.dept_top_k, hit_list(dept_ctx.hits)});
            }
        }
        result.timings.department_ms = elapsed_ms(dept_start);

        // --- item layer: consolidate, weigh, rank ----------------------------
        const auto item_start = std::chrono::steady_clock::now();

        ReasoningContext item_ctx;
        item_ctx.layer = Layer::ITEM;
        item_ctx.query = query;
        item_ctx.memory = memory;
        std::string item_filter_desc = "(no retrieval)";
        std::string item_summary;
        std::vector<std::string> item_flags;
        int item_k = 0;

        if (!run_department_layer) {
            // Table IV's "w/o Department Layer" shape: derive candidates from
            // one unfiltered item-tier search. The same path doubles as the
            // fallback when root routing kept no department.
            auto item_hits = scoped_search(
                query_vec.value(), params.dept_top_k,
                config.dual_kb_enabled ? std::optional(Tier::ITEM) : std::nullopt, std::nullopt,
                config.dual_kb_enabled, item_filter_desc);
            if (!item_hits.ok()) return annotate(item_hits.error(), Layer::ITEM);
            item_ctx.hits = item_hits.value();
            item_k = params.dept_top_k;

            auto item_output = reasoner_->analyze(item_ctx);
            if (!item_output.ok()) return annotate(item_output.error(), Layer::ITEM);
            const int source_step = static_cast<int>(memory.size());
            for (const auto& test : item_output.value().tests) {
                pooled.push_back(PooledCandidate{test, source_step});
            }
            item_summary = item_output.value().summary;
            item_flags = item_output.value().flags;
        } else {
            // Consolidation-only pass: the prompt context is the pooled
            // candidates' supporting evidence.
            for (const auto& entry : pooled) {
                for (const auto& id : entry.candidate.supporting_doc_ids) {
                    if (const Document* doc = kb_->find(id.str())) {
                        item_ctx.hits.push_back(
                            ScoredDoc{RetrievalHit{id, entry.candidate.confidence}, doc});
                    }
                }
            }
        }

        // Memory-based redundancy elimination: a candidate is dropped when a
        // strictly earlier DEPARTMENT/ITEM-layer memory record already
        // surfaced its test id (an upstream node already considered that
        // test). Root records are exempt: routing retrieval is evidence
        // about departments, not a test decision. Disabled without memory,
        // like the rest of the memory mechanism.
        std::vector<TestCandidate> survivors;
        if (config.memory_enabled) {
            std::map<int, std::set<std::string>> tests_by_step;
            for (const auto& record : memory) {
                if (record.layer == Layer::ROOT) continue;
                tests_by_step[record.step] = derived_test_ids(record);
            }
            for (const auto& entry : pooled) {
                bool redundant = false;
                for (const auto& [step, tests] : tests_by_step) {
                    if (step >= entry.source_step) break;
                    if (tests.count(entry.candidate.test_id) != 0) {
                        redundant = true;
                        break;
                    }
                }
                if (!redundant) survivors.push_back(entry.candidate);
            }
        } else {
            for (const auto& entry : pooled) survivors.push_back(entry.candidate);
        }

        // Dedupe by test id, keeping the highest confidence (first wins ties).
        std::vector<TestCandidate> deduped;
        std::map<std::string, size_t> best_slot;
        for (auto& candidate : survivors) {
            auto [it, inserted] = best_slot.emplace(candidate.test_id, deduped.size());
            if (inserted) {
                deduped.push_back(std::move(candidate));
            } else if (candidate.confidence > deduped[it->second].confidence) {
                deduped[it->second] = std::move(candidate);
            }
        }

        for (auto& candidate : deduped) {
            auto weight = scorer_->score(ScoreRequest{candidate, query, memory});
            if (!weight.ok()) return annotate(weight.error(), Layer::ITEM);
            if (weight.value().value < params.min_weight) continue;
            result.recommendations.push_back(TestRecommendation{
                candidate.test_id, candidate.name, candidate.department, weight.value(),
                candidate.urgency, candidate.rationale, candidate.supporting_doc_ids});
        }
        std::sort(result.recommendations.begin(), result.recommendations.end(),
                  [](const TestRecommendation& a, const TestRecommendation& b) {
                      if (a.weight.value != b.weight.value) return a.weight.value > b.weight.value;
                      return a.test_id < b.test_id;
                  });
        if (result.recommendations.size() > static_cast<size_t>(params.max_recommendations)) {
            result.recommendations.resize(static_cast<size_t>(params.max_recommendations));
        }

        if (item_summary.empty()) {
            std::ostringstream summary;
            summary << "consolidated " << result.recommendations.size()
                    << " recommendation(s) from " << pooled.size() << " pooled candidate(s)";
            item_summary = summary.str();
        }
        if (result.recommendations.empty() &&
            std::find(item_flags.begin(), item_flags.end(), "uncertain_diagnosis") ==
                item_flags.end()) {
            item_flags.push_back("uncertain_diagnosis");
        }

        const std::string item_prompt = render_prompt(item_ctx, library_);
        if (config.memory_enabled) {
            std::vector<DocumentId> final_ids;
            std::set<std::string> seen_ids;
            for (const auto& rec : result.recommendations) {
                for (const auto& id : rec.supporting_doc_ids) {
                    if (seen_ids.insert(id.str()).second) final_ids.push_back(id);
                }
            }
            memory.push_back(MemoryRecord{static_cast<int>(memory.size()), Layer::ITEM,
                                          item_summary, item_flags, std::move(final_ids)});
        }
        result.trace.push_back(ReasoningStep{Layer::ITEM, std::nullopt, fnv1a64_hex(item_prompt),
                                             item_summary, item_flags, item_filter_desc, item_k,
                                             hit_list(item_ctx.hits)});
        result.timings.item_ms = elapsed_ms(item_start);

        result.memory_final = std::move(memory);
        return result;
    }

    /// The text the query is embedded from: symptoms plus history lines.
    static std::string embedding_text(const PatientQuery& query) {
        std::string text = query.symptoms;
        for (const auto& entry : query.history) {
            text += "\n";
            text += entry;
        }
        return text;
    }

    /// Human-readable report of the trace and final list. Deterministic;
    /// never includes timings.
    static std::string explain(const RecommendationResult& result) {
        std::ostringstream out;
        out << "recommendation report\n";
        out << "=====================\n";
        const auto& config = result.config_used;
        out << "config: memory=" << (config.memory_enabled ? "on" : "off")
            << " department_layer=" << (config.department_layer_enabled ? "on" : "off")
            << " dual_kb=" << (config.dual_kb_enabled ? "on" : "off") << "\n\n";

        out << "reasoning trace\n";
        for (const auto& step : result.trace) {
            out << "  [" << to_string(step.layer);
            if (step.department) out << ":" << *step.department;
            out << "] " << step.summary << "\n";
            out << "      retrieval: " << step.retrieval_filter;
            if (step.retrieval_k > 0) out << " (k=" << step.retrieval_k << ")";
            out << ", " << step.retrieved.size() << " hit(s)\n";
            if (!step.flags.empty()) {
                out << "      flags:";
                for (const auto& flag : step.flags) out << " " << flag;
                out << "\n";
            }
        }

        out << "\nrecommendations\n";
        if (result.recommendations.empty()) {
            out << "  none";
            std::set<std::string> flags;
            for (const auto& step : result.trace) flags.insert(step.flags.begin(), step.flags.end());
            if (!flags.empty()) {
                out << " (flags:";
                for (const auto& flag : flags) out << " " << flag;
                out << ")";
            }
            out << "\n";
        } else {
            int rank = 1;
            for (const auto& rec : result.recommendations) {
                char weight_text[32];
                std::snprintf(weight_text, sizeof(weight_text), "%.4f", rec.weight.value);
                out << "  " << rank++ << ". " << rec.test_id << " [" << rec.department
                    << "] weight=" << weight_text << " urgency=" << to_string(rec.urgency) << "\n";
                out << "     " << rec.rationale << "\n";
                out << "     supporting:";
                for (const auto& id : rec.supporting_doc_ids) out << " " << id.str();
                out << "\n";
            }
        }
        return out.str();
    }

private:
    static Error annotate(Error err, Layer layer) {
        err.message = std::string(to_string(layer)) + " layer: " + err.message;
        return err;
    }

    static double elapsed_ms(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }

    static std::vector<DocumentId> hit_ids(const std::vector<ScoredDoc>& hits) {
        std::vector<DocumentId> ids;
        ids.reserve(hits.size());
        for (const auto& scored : hits) ids.push_back(scored.hit.doc_id);
        return ids;
    }

    static std::vector<RetrievalHit> hit_list(const std::vector<ScoredDoc>& hits) {
        std::vector<RetrievalHit> list;
        list.reserve(hits.size());
        for (const auto& scored : hits) list.push_back(scored.hit);
        return list;
    }

    /// Runs one index search and resolves hit documents. With the dual KB
    /// disabled every search is the unfiltered merged corpus, recorded as
    /// such in the trace.
    Result<std::vector<ScoredDoc>> scoped_search(const EmbeddingVector& query_vec, int k,
                                                 std::optional<Tier> tier,
                                                 std::optional<std::string> department,
                                                 bool dual_kb, std::string& filter_desc) const {
        SearchFilter filter;
        if (!dual_kb) {
            filter_desc = "merged";
        } else if (tier && department) {
            filter_desc = std::string("tier=") + to_string(*tier) + " department=" + *department;
            filter = [tier, department](Tier t, const std::string& d) {
                return t == *tier && d == *department;
            };
        } else if (tier) {
            filter_desc = std::string("tier=") + to_string(*tier);
            filter = [tier](Tier t, const std::string&) { return t == *tier; };
        } else {
            filter_desc = "merged";
        }
        auto hits = index_->search(query_vec, k, filter);
        if (!hits.ok()) return hits.error();
        std::vector<ScoredDoc> scored;
        scored.reserve(hits.value().size());
        for (const auto& hit : hits.value()) {
            const Document* doc = kb_->find(hit.doc_id.str());
            if (doc == nullptr) {
                return make_error(ErrorCode::INVALID_ARGUMENT,
                                  "index entry '" + hit.doc_id.str() +
                                      "' has no document in the knowledge base");
            }
            scored.push_back(ScoredDoc{hit, doc});
        }
        return scored;
    }

    /// Test ids derivable from a memory record's cited documents.
    std::set<std::string> derived_test_ids(const MemoryRecord& record) const {
        std::set<std::string> tests;
        for (const auto& id : record.doc_ids) {
            if (const Document* doc = kb_->find(id.str())) {
                if (doc->tier() == Tier::ITEM) {
                    if (auto test_id = doc->test_id()) tests.insert(*test_id);
                }
            }
        }
        return tests;
    }

    const KnowledgeBase* kb_;
    const VectorIndex* index_;
    const Embedder* embedder_;
    const Reasoner* reasoner_;
    const Scorer* scorer_;
    PromptLibrary library_;
};

}  // namespace hirec
