// Shared test fixtures: deterministic RNG helpers, the standard seed-7
// stack, an independent full-scan retrieval oracle, and small process /
// file utilities.
#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hirec/embed.hpp"
#include "hirec/kb.hpp"
#include "hirec/pipeline.hpp"
#include "hirec/reason.hpp"
#include "hirec/vecstore.hpp"
#include "hirec/weigh.hpp"

namespace testutil {

// --- deterministic randomness -----------------------------------------------

struct Rng {
    std::mt19937_64 engine;

    explicit Rng(uint64_t seed) : engine(seed) {}

    uint64_t next() { return engine(); }
    size_t below(size_t n) { return n == 0 ? 0 : static_cast<size_t>(engine() % n); }
    // uniform in [-1, 1)
    double unit() { return static_cast<double>(engine() >> 11) * (2.0 / 9007199254740992.0) - 1.0; }
};

inline hirec::EmbeddingVector random_unit_vector(Rng& rng, size_t dimension) {
    std::vector<float> values(dimension);
    for (auto& v : values) v = static_cast<float>(rng.unit());
    auto vec = hirec::EmbeddingVector::normalized(std::move(values));
    if (!vec.ok()) {
        std::vector<float> fallback(dimension, 0.0f);
        fallback[0] = 1.0f;
        return hirec::EmbeddingVector::normalized(std::move(fallback)).value();
    }
    return std::move(vec).value();
}

// --- independent retrieval oracle -------------------------------------------

// Naive full scan, written against the documented contract rather than the
// index internals: dot product accumulated in double over ascending
// indices, sorted by similarity descending with ascending-id tie break.
inline std::vector<hirec::RetrievalHit> oracle_search(
    const std::vector<hirec::IndexEntry>& entries, const hirec::EmbeddingVector& query, int k,
    const hirec::SearchFilter& filter = {}) {
    std::vector<hirec::RetrievalHit> hits;
    for (const auto& entry : entries) {
        if (filter && !filter(entry.tier, entry.department)) continue;
        const auto& a = query.values();
        const auto& b = entry.vector.values();
        double dot = 0.0;
        for (size_t i = 0; i < a.size(); ++i) {
            dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        }
        hits.push_back(hirec::RetrievalHit{entry.doc_id, dot});
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const hirec::RetrievalHit& x, const hirec::RetrievalHit& y) {
                         if (x.similarity != y.similarity) return x.similarity > y.similarity;
                         return x.doc_id.str() < y.doc_id.str();
                     });
    if (hits.size() > static_cast<size_t>(k)) hits.erase(hits.begin() + k, hits.end());
    return hits;
}

// --- the standard deterministic stack ----------------------------------------

struct Stack {
    hirec::SyntheticCorpus corpus;
    hirec::HashedEmbedder embedder{hirec::kDefaultDimension};
    hirec::VectorIndex index{hirec::kDefaultDimension};
    hirec::MockReasoner reasoner;
    hirec::HeuristicScorer scorer;
    std::unique_ptr<hirec::RecommendEngine> engine;
};

inline std::unique_ptr<Stack> make_stack(uint64_t seed = 7,
                                         std::vector<std::string> departments = {},
                                         int items_per_department = 4) {
    auto stack = std::make_unique<Stack>();
    auto corpus = hirec::generate_synthetic_corpus(
        seed, departments.empty() ? hirec::default_departments() : departments,
        items_per_department);
    if (!corpus.ok()) return nullptr;
    stack->corpus = std::move(corpus).value();
    auto count = hirec::build_index(stack->corpus.kb, stack->embedder, stack->index);
    if (!count.ok()) return nullptr;
    stack->engine = std::make_unique<hirec::RecommendEngine>(
        stack->corpus.kb, stack->index, stack->embedder, stack->reasoner, stack->scorer);
    return stack;
}

// --- trace replay -------------------------------------------------------------

// Re-renders each trace step's prompt from the stored hits with an EMPTY
// memory list, returning digests in trace order. With memory disabled the
// engine's own digests must match these exactly; with memory enabled the
// post-root steps must differ (their prompts carry memory text).
inline std::vector<std::string> replay_digests_without_memory(
    const hirec::KnowledgeBase& kb, const hirec::PromptLibrary& library,
    const hirec::PatientQuery& query, const hirec::RecommendationResult& result) {
    std::vector<std::string> digests;
    for (const auto& step : result.trace) {
        hirec::ReasoningContext ctx;
        ctx.layer = step.layer;
        ctx.query = query;
        ctx.department = step.department;
        for (const auto& hit : step.retrieved) {
            if (const hirec::Document* doc = kb.find(hit.doc_id.str())) {
                ctx.hits.push_back(hirec::ScoredDoc{hit, doc});
            }
        }
        digests.push_back(hirec::fnv1a64_hex(render_prompt(ctx, library)));
    }
    return digests;
}

// --- files and processes -------------------------------------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline bool write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    return static_cast<bool>(out);
}

inline std::string temp_dir() {
    static int counter = 0;
    std::string path = "/tmp/hirec_test_" + std::to_string(::getpid()) + "_" +
                       std::to_string(counter++);
    std::filesystem::create_directories(path);
    return path;
}

struct ProcessResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs a command via the shell, capturing stdout/stderr separately.
inline ProcessResult run_process(const std::string& command) {
    ProcessResult result;
    const std::string dir = temp_dir();
    const std::string out_path = dir + "/out";
    const std::string err_path = dir + "/err";
    const std::string full = command + " >" + out_path + " 2>" + err_path;
    const int status = std::system(full.c_str());
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

}  // namespace testutil
