#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hirec/result.hpp"

namespace hirec {

inline constexpr const char* kLibraryVersion = "0.1.0";

// ---------------------------------------------------------------------------
// identifiers and enums
// ---------------------------------------------------------------------------

/// Knowledge-base document identifier. Non-empty, never whitespace-only.
class DocumentId {
public:
    static Result<DocumentId> create(std::string value) {
        if (value.empty() || value.find_first_not_of(" \t\r\n") == std::string::npos) {
            return make_error(ErrorCode::INVALID_DOCUMENT, "document id must be non-empty");
        }
        return DocumentId(std::move(value));
    }

    const std::string& str() const { return value_; }

    auto operator<=>(const DocumentId&) const = default;

private:
    explicit DocumentId(std::string value) : value_(std::move(value)) {}
    std::string value_;
};

/// Which knowledge-base tier a document belongs to.
enum class Tier : uint8_t {
    DEPARTMENT = 0,
    ITEM = 1,
};

inline const char* to_string(Tier tier) {
    return tier == Tier::DEPARTMENT ? "department" : "item";
}

inline std::optional<Tier> tier_from_string(std::string_view text) {
    if (text == "department") return Tier::DEPARTMENT;
    if (text == "item") return Tier::ITEM;
    return std::nullopt;
}

/// Three-level urgency scale with a total order ROUTINE < PRIORITY < URGENT.
enum class UrgencyLevel : uint8_t {
    ROUTINE = 0,
    PRIORITY = 1,
    URGENT = 2,
};

inline const char* to_string(UrgencyLevel level) {
    switch (level) {
        case UrgencyLevel::ROUTINE: return "routine";
        case UrgencyLevel::PRIORITY: return "priority";
        case UrgencyLevel::URGENT: return "urgent";
    }
    return "routine";
}

inline UrgencyLevel urgency_from_string(std::string_view text) {
    if (text == "urgent") return UrgencyLevel::URGENT;
    if (text == "priority") return UrgencyLevel::PRIORITY;
    return UrgencyLevel::ROUTINE;
}

enum class Sex : uint8_t { F, M, OTHER };

inline const char* to_string(Sex sex) {
    switch (sex) {
        case Sex::F: return "F";
        case Sex::M: return "M";
        case Sex::OTHER: return "OTHER";
    }
    return "OTHER";
}

inline std::optional<Sex> sex_from_string(std::string_view text) {
    if (text == "F") return Sex::F;
    if (text == "M") return Sex::M;
    if (text == "OTHER") return Sex::OTHER;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// department canonicalization
// ---------------------------------------------------------------------------

// Department names are matched by string equality across tiers, so every
// entry point canonicalizes them the same way: lowercase ASCII, any run of
// non-alphanumeric characters collapsed to a single underscore, no leading
// or trailing underscores. "Internal Medicine" -> "internal_medicine".
inline std::string canonicalize_department(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    bool pending_sep = false;
    for (char ch : name) {
        const bool digit = ch >= '0' && ch <= '9';
        const bool lower = ch >= 'a' && ch <= 'z';
        const bool upper = ch >= 'A' && ch <= 'Z';
        if (digit || lower || upper) {
            if (pending_sep && !out.empty()) out.push_back('_');
            pending_sep = false;
            out.push_back(upper ? static_cast<char>(ch - 'A' + 'a') : ch);
        } else {
            pending_sep = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// documents
// ---------------------------------------------------------------------------

/// One knowledge-base entry. Construct through create(); instances always
/// satisfy the invariants (non-empty body and department, ITEM documents
/// carry a "test_id" metadata key).
class Document {
public:
    static Result<Document> create(DocumentId id, Tier tier, std::string department,
                                   std::string title, std::string body,
                                   std::map<std::string, std::string> metadata = {}) {
        std::string canonical = canonicalize_department(department);
        if (canonical.empty()) {
            return make_error(ErrorCode::INVALID_DOCUMENT,
                              "document '" + id.str() + "' has an empty department");
        }
        if (body.empty()) {
            return make_error(ErrorCode::INVALID_DOCUMENT,
                              "document '" + id.str() + "' has an empty body");
        }
        if (tier == Tier::ITEM) {
            auto it = metadata.find("test_id");
            if (it == metadata.end() || it->second.empty()) {
                return make_error(ErrorCode::MISSING_FIELD,
                                  "item document '" + id.str() + "' lacks metadata key 'test_id'");
            }
        }
        return Document(std::move(id), tier, std::move(canonical), std::move(title),
                        std::move(body), std::move(metadata));
    }

    const DocumentId& id() const { return id_; }
    Tier tier() const { return tier_; }
    const std::string& department() const { return department_; }
    const std::string& title() const { return title_; }
    const std::string& body() const { return body_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    std::optional<std::string> metadata_value(const std::string& key) const {
        auto it = metadata_.find(key);
        if (it == metadata_.end()) return std::nullopt;
        return it->second;
    }

    /// test_id metadata for ITEM documents; nullopt for DEPARTMENT documents.
    std::optional<std::string> test_id() const { return metadata_value("test_id"); }

    /// Urgency tag from metadata, defaulting to ROUTINE when absent.
    UrgencyLevel urgency_tag() const {
        auto tag = metadata_value("urgency");
        return tag ? urgency_from_string(*tag) : UrgencyLevel::ROUTINE;
    }

private:
    Document(DocumentId id, Tier tier, std::string department, std::string title,
             std::string body, std::map<std::string, std::string> metadata)
        : id_(std::move(id)),
          tier_(tier),
          department_(std::move(department)),
          title_(std::move(title)),
          body_(std::move(body)),
          metadata_(std::move(metadata)) {}

    DocumentId id_;
    Tier tier_;
    std::string department_;
    std::string title_;
    std::string body_;
    std::map<std::string, std::string> metadata_;
};

// ---------------------------------------------------------------------------
// patient query
// ---------------------------------------------------------------------------

inline constexpr int kMaxPatientAge = 150;

/// Pipeline input: free-text symptoms plus optional demographics and history.
struct PatientQuery {
    std::string symptoms;
    std::optional<int> age;
    std::optional<Sex> sex;
    std::map<std::string, double> vitals;  // unit stated in the key, e.g. "heart_rate_bpm"
    std::vector<std::string> history;

    bool operator==(const PatientQuery&) const = default;
};

inline Result<void> validate_query(const PatientQuery& query) {
    if (query.symptoms.find_first_not_of(" \t\r\n") == std::string::npos) {
        return make_error(ErrorCode::EMPTY_SYMPTOMS, "symptoms must be non-empty");
    }
    if (query.age && (*query.age < 0 || *query.age > kMaxPatientAge)) {
        return make_error(ErrorCode::AGE_OUT_OF_RANGE,
                          "age " + std::to_string(*query.age) + " outside [0, " +
                              std::to_string(kMaxPatientAge) + "]");
    }
    return ok();
}

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

/// Ablation switches. Defaults reproduce the full pipeline; each switch
/// disables one architectural component.
struct AblationConfig {
    bool memory_enabled = true;
    bool department_layer_enabled = true;
    bool dual_kb_enabled = true;

    bool operator==(const AblationConfig&) const = default;
};

/// Retrieval depths and output caps. All tunable; defaults mirror a
/// three-department deployment.
struct PipelineParams {
    int root_top_k = 10;
    int dept_top_k = 10;
    int max_departments = 3;
    int max_recommendations = 10;
    double min_weight = 0.0;

    bool operator==(const PipelineParams&) const = default;

    Result<void> validate() const {
        if (root_top_k < 1 || dept_top_k < 1 || max_departments < 1 || max_recommendations < 1) {
            return make_error(ErrorCode::INVALID_ARGUMENT, "pipeline depths must be positive");
        }
        if (min_weight < 0.0 || min_weight > 1.0) {
            return make_error(ErrorCode::INVALID_ARGUMENT, "min_weight must lie in [0,1]");
        }
        return ok();
    }
};

}  // namespace hirec
