#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hirec/core.hpp"
#include "hirec/embed.hpp"
#include "hirec/hashing.hpp"
#include "hirec/result.hpp"
#include "hirec/vecstore.hpp"

namespace hirec {

// ---------------------------------------------------------------------------
// knowledge base
// ---------------------------------------------------------------------------

/// The two-tier knowledge base: department-level guidance plus per-test
/// item entries. Doc ids are unique across both tiers. Immutable once
/// ingested; shareable across threads.
class KnowledgeBase {
public:
    Result<void> add_document(Document doc) {
        const std::string& id = doc.id().str();
        if (by_id_.count(id) != 0) {
            return make_error(ErrorCode::DUPLICATE_ID, "doc id '" + id + "' already present");
        }
        if (doc.tier() == Tier::DEPARTMENT) {
            department_set_.insert(doc.department());
            by_id_.emplace(id, Slot{Tier::DEPARTMENT, departments_.size()});
            departments_.push_back(std::move(doc));
        } else {
            by_id_.emplace(id, Slot{Tier::ITEM, items_.size()});
            items_.push_back(std::move(doc));
        }
        return ok();
    }

    const std::vector<Document>& departments_tier() const { return departments_; }
    const std::vector<Document>& items_tier() const { return items_; }
    const std::set<std::string>& department_set() const { return department_set_; }
    size_t size() const { return departments_.size() + items_.size(); }

    const Document* find(const std::string& doc_id) const {
        auto it = by_id_.find(doc_id);
        if (it == by_id_.end()) return nullptr;
        return it->second.tier == Tier::DEPARTMENT ? &departments_[it->second.index]
                                                   : &items_[it->second.index];
    }

    /// Item-tier departments that have no department-tier document. Real
    /// corpora are messy; mismatches are reported, never rejected.
    std::vector<std::string> cross_tier_warnings() const {
        std::set<std::string> orphaned;
        for (const auto& doc : items_) {
            if (department_set_.count(doc.department()) == 0) orphaned.insert(doc.department());
        }
        return {orphaned.begin(), orphaned.end()};
    }

private:
    struct Slot {
        Tier tier;
        size_t index;
    };

    std::vector<Document> departments_;
    std::vector<Document> items_;
    std::set<std::string> department_set_;
    std::unordered_map<std::string, Slot> by_id_;
};

// ---------------------------------------------------------------------------
// ingestion
// ---------------------------------------------------------------------------
//
// Document file format (docs/document_schema.json): UTF-8, one JSON object
// per line. Required keys: id, tier ("department"|"item"), department,
// title, body. Optional: metadata, an object of string values. Blank lines
// are ignored.

struct IngestResult {
    KnowledgeBase kb;
    std::vector<Error> issues;   // one entry per rejected line
    size_t lines_seen = 0;       // non-blank lines

    size_t loaded() const { return kb.size(); }
};

namespace detail {

inline Result<Document> parse_document_line(const std::string& line, long line_no) {
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
        Error err = make_error(ErrorCode::PARSE_ERROR, "line is not a JSON object");
        err.line = line_no;
        return err;
    }
    for (const char* field : {"id", "tier", "department", "title", "body"}) {
        if (!record.contains(field) || !record[field].is_string() ||
            record[field].get_ref<const std::string&>().empty()) {
            Error err = make_error(ErrorCode::MISSING_FIELD, std::string("field '") + field +
                                                                 "' missing or empty");
            err.line = line_no;
            return err;
        }
    }
    const auto tier = tier_from_string(record["tier"].get_ref<const std::string&>());
    if (!tier) {
        Error err = make_error(ErrorCode::PARSE_ERROR,
                               "tier must be \"department\" or \"item\", got \"" +
                                   record["tier"].get<std::string>() + "\"");
        err.line = line_no;
        return err;
    }
    std::map<std::string, std::string> metadata;
    if (record.contains("metadata")) {
        if (!record["metadata"].is_object()) {
            Error err = make_error(ErrorCode::PARSE_ERROR, "metadata must be an object");
            err.line = line_no;
            return err;
        }
        for (const auto& [key, value] : record["metadata"].items()) {
            if (!value.is_string()) {
                Error err = make_error(ErrorCode::PARSE_ERROR,
                                       "metadata value for '" + key + "' must be a string");
                err.line = line_no;
                return err;
            }
            metadata.emplace(key, value.get<std::string>());
        }
    }
    auto id = DocumentId::create(record["id"].get<std::string>());
    if (!id.ok()) {
        Error err = id.error();
        err.line = line_no;
        return err;
    }
    auto doc = Document::create(std::move(id).value(), *tier, record["department"].get<std::string>(),
                                record["title"].get<std::string>(), record["body"].get<std::string>(),
                                std::move(metadata));
    if (!doc.ok()) {
        Error err = doc.error();
        err.line = line_no;
        return err;
    }
    return doc;
}

}  // namespace detail

/// Loads a document file. IO failures are hard errors; per-record problems
/// are collected with their line numbers, so loaded() + issues.size()
/// equals the number of non-blank lines.
inline Result<IngestResult> ingest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        return make_error(ErrorCode::IO_ERROR, "cannot open '" + path + "' for reading");
    }
    IngestResult result;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        ++result.lines_seen;
        auto doc = detail::parse_document_line(line, line_no);
        if (!doc.ok()) {
            result.issues.push_back(doc.error());
            continue;
        }
        const std::string id = doc.value().id().str();
        auto added = result.kb.add_document(std::move(doc).value());
        if (!added.ok()) {
            Error err = added.error();  // duplicate reports the later line
            err.line = line_no;
            result.issues.push_back(std::move(err));
        }
    }
    if (in.bad()) {
        return make_error(ErrorCode::IO_ERROR, "read failure on '" + path + "'");
    }
    return result;
}

/// Serializes one document as a JSONL record (the ingest format).
inline std::string document_to_jsonl(const Document& doc) {
    nlohmann::json record = {
        {"id", doc.id().str()},     {"tier", to_string(doc.tier())},
        {"department", doc.department()}, {"title", doc.title()},
        {"body", doc.body()},
    };
    if (!doc.metadata().empty()) {
        record["metadata"] = doc.metadata();
    }
    return record.dump();
}

// ---------------------------------------------------------------------------
// index building
// ---------------------------------------------------------------------------

/// Embeds every document (title + "\n" + body) and adds it to the store
/// with its tier and department tag. Returns the number of indexed entries.
/// Deterministic given a deterministic embedder, so repeated builds produce
/// byte-identical snapshots.
inline Result<size_t> build_index(const KnowledgeBase& kb, const Embedder& embedder,
                                  VectorIndex& store) {
    size_t count = 0;
    auto index_one = [&](const Document& doc) -> Result<void> {
        auto vec = embedder.embed(doc.title() + "\n" + doc.body());
        if (!vec.ok()) {
            Error err = vec.error();
            err.message = "doc '" + doc.id().str() + "': " + err.message;
            return err;
        }
        auto added = store.add(
            IndexEntry{doc.id(), std::move(vec).value(), doc.tier(), doc.department()});
        if (!added.ok()) {
            Error err = added.error();
            err.message = "doc '" + doc.id().str() + "': " + err.message;
            return err;
        }
        ++count;
        return ok();
    };
    for (const auto& doc : kb.departments_tier()) {
        auto step = index_one(doc);
        if (!step.ok()) return step.error();
    }
    for (const auto& doc : kb.items_tier()) {
        auto step = index_one(doc);
        if (!step.ok()) return step.error();
    }
    return count;
}

// ---------------------------------------------------------------------------
// synthetic corpus
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& default_departments() {
    static const std::vector<std::string> departments = {"cardiology", "endocrinology",
                                                         "gastroenterology"};
    return departments;
}

inline constexpr int kDefaultItemsPerDepartment = 4;

/// Generator output: the corpus plus a ground-truth table mapping each
/// item's symptom phrase to the test ids considered relevant for it.
struct SyntheticCorpus {
    KnowledgeBase kb;
    std::map<std::string, std::set<std::string>> ground_truth;
};

namespace detail {

struct CatalogEntry {
    const char* name;
    const char* keywords;
    const char* urgency;
};

inline const std::vector<CatalogEntry>& test_catalog(const std::string& department) {
    static const std::vector<CatalogEntry> cardiology = {
        {"electrocardiogram", "chest pain palpitations irregular heartbeat", "routine"},
        {"troponin assay", "crushing chest pain radiating arm sweating", "urgent"},
        {"exercise stress test", "chest pain on exertion shortness of breath", "priority"},
        {"echocardiogram", "heart murmur ankle swelling fatigue", "routine"},
        {"holter monitor", "palpitations dizziness fainting episodes", "priority"},
        {"lipid panel", "high cholesterol family heart disease", "routine"},
    };
    static const std::vector<CatalogEntry> endocrinology = {
        {"fasting glucose test", "excessive thirst frequent urination weight loss", "priority"},
        {"hemoglobin a1c", "elevated blood sugar fatigue blurred vision", "routine"},
        {"thyroid function panel", "cold intolerance weight gain hair thinning", "routine"},
        {"cortisol level", "severe fatigue muscle weakness low blood pressure", "urgent"},
        {"glucose tolerance test", "gestational screening elevated fasting sugar", "priority"},
        {"bone density scan", "fracture risk long term steroid use", "routine"},
    };
    static const std::vector<CatalogEntry> gastroenterology = {
        {"colonoscopy", "blood in stool altered bowel habits", "urgent"},
        {"upper endoscopy", "persistent heartburn difficulty swallowing", "priority"},
        {"liver function panel", "jaundice dark urine itching", "routine"},
        {"abdominal ultrasound", "abdominal pain bloating nausea", "routine"},
        {"stool culture", "persistent diarrhea cramping fever", "priority"},
        {"breath urea test", "stomach burning after meals bloating", "routine"},
    };
    static const std::vector<CatalogEntry> empty = {};
    if (department == "cardiology") return cardiology;
    if (department == "endocrinology") return endocrinology;
    if (department == "gastroenterology") return gastroenterology;
    return empty;
}

// Deterministic RNG helpers: only raw mt19937_64 outputs, which the
// standard fixes bit-for-bit, never std distributions (their algorithms
// are implementation-defined and would break cross-platform goldens).
struct CorpusRng {
    std::mt19937_64 engine;

    explicit CorpusRng(uint64_t seed) : engine(seed) {}

    std::string tag() {
        static const char* digits = "0123456789abcdef";
        uint64_t v = engine();
        std::string out(8, '0');
        for (int i = 7; i >= 0; --i) {
            out[static_cast<size_t>(i)] = digits[v & 0xF];
            v >>= 4;
        }
        return out;
    }
};

inline std::string slug(std::string_view text) {
    std::string out = canonicalize_department(text);  // same lowercase/underscore rule
    return out.empty() ? "x" : out;
}

}  // namespace detail

/// Builds a deterministic stand-in corpus: one department document per
/// department plus `items_per_department` test items each, with distinct
/// test ids, symptom keywords, and urgency tags. The same seed always
/// yields the same corpus; different seeds differ in the cohort tags woven
/// into document bodies (and in synthesized entries past the catalog).
/// Two items are mutually relevant in the ground-truth table when their
/// keyword sets share at least two tokens.
inline Result<SyntheticCorpus> generate_synthetic_corpus(
    uint64_t seed, const std::vector<std::string>& departments = default_departments(),
    int items_per_department = kDefaultItemsPerDepartment) {
    if (departments.empty()) {
        return make_error(ErrorCode::INVALID_ARGUMENT, "departments must be non-empty");
    }
    if (items_per_department < 1) {
        return make_error(ErrorCode::INVALID_ARGUMENT, "items_per_department must be positive");
    }

    detail::CorpusRng rng(seed);
    SyntheticCorpus corpus;

    struct ItemDraft {
        std::string test_id;
        std::string name;
        std::string keywords;
        std::string urgency;
        std::string department;
    };
    std::vector<ItemDraft> drafts;

    for (const auto& raw_name : departments) {
        const std::string department = canonicalize_department(raw_name);
        if (department.empty()) {
            return make_error(ErrorCode::INVALID_ARGUMENT,
                              "department name '" + raw_name + "' canonicalizes to empty");
        }
        const auto& catalog = detail::test_catalog(department);
        const std::string cohort = rng.tag();

        std::vector<ItemDraft> dept_items;
        for (int i = 0; i < items_per_department; ++i) {
            ItemDraft draft;
            draft.department = department;
            if (static_cast<size_t>(i) < catalog.size()) {
                const auto& entry = catalog[static_cast<size_t>(i)];
                draft.name = entry.name;
                draft.keywords = entry.keywords;
                draft.urgency = entry.urgency;
            } else {
                // Past the catalog (or an unknown department): synthesize.
                const std::string marker = rng.tag();
                draft.name = department + " panel " + std::to_string(i);
                draft.keywords = "finding_" + department + "_" + std::to_string(i % 3) +
                                 " symptom_" + department + " marker_" + marker;
                draft.urgency = (i % 3 == 1) ? "priority" : "routine";
            }
            draft.test_id = department + "_" + detail::slug(draft.name);
            drafts.push_back(draft);
            dept_items.push_back(draft);
        }

        // Department-tier doc: broad guidance covering its items' presentations.
        std::string presentations;
        for (const auto& item : dept_items) {
            if (!presentations.empty()) presentations += "; ";
            presentations += item.keywords;
        }
        std::ostringstream body;
        body << "Clinical guidelines for the " << department << " department. "
             << "Common presentations: " << presentations << ". "
             << "Standard referral pathways and specialty best practices apply. "
             << "Cohort " << cohort << ".";
        auto dept_id = DocumentId::create("dept_" + department);
        auto dept_doc = Document::create(std::move(dept_id).value(), Tier::DEPARTMENT, department,
                                         department + " department guidelines", body.str(),
                                         {{"source", "synthetic"}});
        auto added = corpus.kb.add_document(std::move(dept_doc).value());
        if (!added.ok()) return added.error();  // duplicate department in the input list

        for (const auto& item : dept_items) {
            std::ostringstream item_body;
            item_body << "Indications: " << item.keywords << ". "
                      << "Interpretation follows standard reference ranges. "
                      << "Test code " << item.test_id << ". Department: " << department << ". "
                      << "Cohort " << rng.tag() << ".";
            auto item_id = DocumentId::create("item_" + item.test_id);
            auto item_doc = Document::create(
                std::move(item_id).value(), Tier::ITEM, department, item.name, item_body.str(),
                {{"test_id", item.test_id}, {"urgency", item.urgency}, {"source", "synthetic"}});
            auto item_added = corpus.kb.add_document(std::move(item_doc).value());
            if (!item_added.ok()) return item_added.error();
        }
    }

    // Ground truth: phrase -> ids of tests sharing >= 2 keyword tokens.
    auto token_set = [](const std::string& text) {
        auto tokens = tokenize_lower_alnum(text);
        return std::set<std::string>(tokens.begin(), tokens.end());
    };
    for (const auto& a : drafts) {
        const auto a_tokens = token_set(a.keywords);
        std::set<std::string>& relevant = corpus.ground_truth[a.keywords];
        for (const auto& b : drafts) {
            const auto b_tokens = token_set(b.keywords);
            size_t shared = 0;
            for (const auto& token : a_tokens) shared += b_tokens.count(token);
            if (shared >= 2 || a.test_id == b.test_id) relevant.insert(b.test_id);
        }
    }
    return corpus;
}

}  // namespace hirec
