#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hirec/core.hpp"
#include "hirec/json_io.hpp"
#include "hirec/kb.hpp"
#include "hirec/pipeline.hpp"
#include "hirec/result.hpp"

namespace hirec {

// ---------------------------------------------------------------------------
// cases and metrics
// ---------------------------------------------------------------------------

/// One ground-truth case: what the engine should have recommended (G),
/// which of those are critical (C, a subset of G), and optional expert
/// clinical-relevance annotations on a 1-5 scale.
struct EvalCase {
    std::string id;
    PatientQuery query;
    std::set<std::string> relevant_tests;
    std::set<std::string> critical_tests;
    std::vector<int> crs_annotations;

    Result<void> validate() const {
        if (id.empty()) return make_error(ErrorCode::INVALID_ARGUMENT, "case id must be non-empty");
        if (relevant_tests.empty()) {
            return make_error(ErrorCode::INVALID_ARGUMENT,
                              "case '" + id + "' has no relevant tests");
        }
        for (const auto& test : critical_tests) {
            if (relevant_tests.count(test) == 0) {
                return make_error(ErrorCode::INVALID_ARGUMENT,
                                  "case '" + id + "': critical test '" + test +
                                      "' is not in relevant_tests");
            }
        }
        for (int score : crs_annotations) {
            if (score < 1 || score > 5) {
                return make_error(ErrorCode::INVALID_ARGUMENT,
                                  "case '" + id + "': CRS annotation " + std::to_string(score) +
                                      " outside [1,5]");
            }
        }
        return validate_query(query);
    }
};

struct MetricTriple {
    double coverage_rate = 0.0;
    double accuracy = 0.0;
    double miss_rate = 0.0;
    bool vacuous_precision = false;  // accuracy defined as 1.0 because R was empty
};

/// Set-arithmetic metrics over a recommendation set R:
///   CR  = |R n G| / |G|
///   acc = |R n G| / |R|, defined as 1.0 (and flagged) when R is empty
///   MR  = |C \ R| / |C|, defined as 0.0 when C is empty
inline MetricTriple metrics(const std::set<std::string>& recommended, const EvalCase& eval_case) {
    MetricTriple out;
    size_t hits = 0;
    for (const auto& test : recommended) hits += eval_case.relevant_tests.count(test);
    out.coverage_rate = static_cast<double>(hits) /
                        static_cast<double>(eval_case.relevant_tests.size());
    if (recommended.empty()) {
        out.accuracy = 1.0;
        out.vacuous_precision = true;
    } else {
        out.accuracy = static_cast<double>(hits) / static_cast<double>(recommended.size());
    }
    if (eval_case.critical_tests.empty()) {
        out.miss_rate = 0.0;
    } else {
        size_t missed = 0;
        for (const auto& test : eval_case.critical_tests) missed += 1 - recommended.count(test);
        out.miss_rate = static_cast<double>(missed) /
                        static_cast<double>(eval_case.critical_tests.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// evaluation runs
// ---------------------------------------------------------------------------

struct PerCaseRow {
    std::string case_id;
    bool failed = false;
    std::string failure;  // error description when failed
    MetricTriple metrics;
    std::string top_department;  // department of the top recommendation, "" if none
    std::set<std::string> recommended;
};

struct DepartmentAggregate {
    double coverage_rate = 0.0;
    double accuracy = 0.0;
    double miss_rate = 0.0;
    size_t cases = 0;
};

struct EvalReport {
    double coverage_rate = 0.0;
    double accuracy = 0.0;
    double miss_rate = 0.0;
    std::optional<double> crs_mean;
    std::vector<PerCaseRow> per_case;
    std::map<std::string, DepartmentAggregate> per_department;
    size_t evaluated = 0;  // cases included in the means
    size_t failed = 0;
};

/// Runs the engine once per case and macro-averages the metrics
/// (unweighted mean over succeeding cases). Engine failures become FAILED
/// rows, excluded from the means. Per-department rows aggregate over the
/// cases whose top recommendation belongs to that department. crs_mean is
/// the mean of every supplied annotation; CRS is ingested, never computed.
inline Result<EvalReport> evaluate(const std::vector<EvalCase>& cases,
                                   const RecommendEngine& engine,
                                   const AblationConfig& config = {},
                                   const PipelineParams& params = {}) {
    if (cases.empty()) {
        return make_error(ErrorCode::INVALID_ARGUMENT, "no evaluation cases supplied");
    }
    EvalReport report;
    double crs_sum = 0.0;
    size_t crs_count = 0;

    for (const auto& eval_case : cases) {
        auto valid = eval_case.validate();
        if (!valid.ok()) return valid.error();
        for (int score : eval_case.crs_annotations) {
            crs_sum += score;
            ++crs_count;
        }

        PerCaseRow row;
        row.case_id = eval_case.id;
        auto result = engine.recommend(eval_case.query, config, params);
        if (!result.ok()) {
            row.failed = true;
            row.failure = result.error().describe();
            ++report.failed;
            report.per_case.push_back(std::move(row));
            continue;
        }
        for (const auto& rec : result.value().recommendations) row.recommended.insert(rec.test_id);
        if (!result.value().recommendations.empty()) {
            row.top_department = result.value().recommendations.front().department;
        }
        row.metrics = metrics(row.recommended, eval_case);

        report.coverage_rate += row.metrics.coverage_rate;
        report.accuracy += row.metrics.accuracy;
        report.miss_rate += row.metrics.miss_rate;
        ++report.evaluated;
        report.per_case.push_back(std::move(row));
    }

    if (report.evaluated > 0) {
        report.coverage_rate /= static_cast<double>(report.evaluated);
        report.accuracy /= static_cast<double>(report.evaluated);
        report.miss_rate /= static_cast<double>(report.evaluated);
    }
    if (crs_count > 0) report.crs_mean = crs_sum / static_cast<double>(crs_count);

    std::map<std::string, std::vector<const PerCaseRow*>> by_department;
    for (const auto& row : report.per_case) {
        if (row.failed || row.top_department.empty()) continue;
        by_department[row.top_department].push_back(&row);
    }
    for (const auto& [department, rows] : by_department) {
        DepartmentAggregate agg;
        for (const PerCaseRow* row : rows) {
            agg.coverage_rate += row->metrics.coverage_rate;
            agg.accuracy += row->metrics.accuracy;
            agg.miss_rate += row->metrics.miss_rate;
        }
        agg.cases = rows.size();
        agg.coverage_rate /= static_cast<double>(rows.size());
        agg.accuracy /= static_cast<double>(rows.size());
        agg.miss_rate /= static_cast<double>(rows.size());
        report.per_department.emplace(department, agg);
    }
    return report;
}

// ---------------------------------------------------------------------------
// ablation suite
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string variant;
    AblationConfig config;
    EvalReport report;
    // Percentage-point deltas vs the full configuration.
    double coverage_delta = 0.0;
    double accuracy_delta = 0.0;
    double miss_rate_delta = 0.0;
};

struct AblationTable {
    std::vector<AblationRow> rows;  // always 4: full + three variants
};

/// Evaluates the four configurations of the component analysis — full,
/// without memory, without the department layer, single knowledge base —
/// and reports percentage-point deltas against the full run (the full row
/// is zero by construction).
inline Result<AblationTable> ablation_suite(const std::vector<EvalCase>& cases,
                                            const RecommendEngine& engine,
                                            const PipelineParams& params = {}) {
    const std::pair<std::string, AblationConfig> variants[] = {
        {"Full", AblationConfig{true, true, true}},
        {"w/o Memory", AblationConfig{false, true, true}},
        {"w/o Department Layer", AblationConfig{true, false, true}},
        {"Single Knowledge Base", AblationConfig{true, true, false}},
    };
    AblationTable table;
    for (const auto& [label, config] : variants) {
        auto report = evaluate(cases, engine, config, params);
        if (!report.ok()) return report.error();
        AblationRow row;
        row.variant = label;
        row.config = config;
        row.report = std::move(report).value();
        table.rows.push_back(std::move(row));
    }
    const EvalReport& full = table.rows.front().report;
    for (auto& row : table.rows) {
        row.coverage_delta = (row.report.coverage_rate - full.coverage_rate) * 100.0;
        row.accuracy_delta = (row.report.accuracy - full.accuracy) * 100.0;
        row.miss_rate_delta = (row.report.miss_rate - full.miss_rate) * 100.0;
    }
    return table;
}

// ---------------------------------------------------------------------------
// case files
// ---------------------------------------------------------------------------
//
// Eval case file: UTF-8, one JSON object per line with keys id,
// query{symptoms, age?, sex?, history?}, relevant_tests, critical_tests,
// crs_annotations?. Blank lines ignored.

inline Result<std::vector<EvalCase>> load_cases(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        return make_error(ErrorCode::IO_ERROR, "cannot open '" + path + "' for reading");
    }
    std::vector<EvalCase> cases;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            Error err = make_error(ErrorCode::PARSE_ERROR, "line is not a JSON object");
            err.line = line_no;
            return err;
        }
        EvalCase eval_case;
        if (!record.contains("id") || !record["id"].is_string()) {
            Error err = make_error(ErrorCode::MISSING_FIELD, "field 'id' missing");
            err.line = line_no;
            return err;
        }
        eval_case.id = record["id"].get<std::string>();
        if (!record.contains("query")) {
            Error err = make_error(ErrorCode::MISSING_FIELD, "field 'query' missing");
            err.line = line_no;
            return err;
        }
        auto query = patient_query_from_json(record["query"]);
        if (!query.ok()) {
            Error err = query.error();
            err.line = line_no;
            return err;
        }
        eval_case.query = std::move(query).value();
        auto read_set = [&](const char* key, std::set<std::string>& out) -> Result<void> {
            if (!record.contains(key) || !record[key].is_array()) {
                Error err = make_error(ErrorCode::MISSING_FIELD,
                                       std::string("field '") + key + "' missing or not an array");
                err.line = line_no;
                return err;
            }
            for (const auto& node : record[key]) {
                if (!node.is_string()) {
                    Error err = make_error(ErrorCode::PARSE_ERROR,
                                           std::string(key) + " entries must be strings");
                    err.line = line_no;
                    return err;
                }
                out.insert(node.get<std::string>());
            }
            return ok();
        };
        auto relevant = read_set("relevant_tests", eval_case.relevant_tests);
        if (!relevant.ok()) return relevant.error();
        auto critical = read_set("critical_tests", eval_case.critical_tests);
        if (!critical.ok()) return critical.error();
        if (record.contains("crs_annotations")) {
            if (!record["crs_annotations"].is_array()) {
                Error err = make_error(ErrorCode::PARSE_ERROR, "crs_annotations must be an array");
                err.line = line_no;
                return err;
            }
            for (const auto& node : record["crs_annotations"]) {
                if (!node.is_number_integer()) {
                    Error err = make_error(ErrorCode::PARSE_ERROR,
                                           "crs_annotations entries must be integers");
                    err.line = line_no;
                    return err;
                }
                eval_case.crs_annotations.push_back(node.get<int>());
            }
        }
        auto valid = eval_case.validate();
        if (!valid.ok()) {
            Error err = valid.error();
            err.line = line_no;
            return err;
        }
        cases.push_back(std::move(eval_case));
    }
    if (in.bad()) {
        return make_error(ErrorCode::IO_ERROR, "read failure on '" + path + "'");
    }
    return cases;
}

inline std::string case_to_jsonl(const EvalCase& eval_case) {
    nlohmann::json record = {{"id", eval_case.id},
                             {"query", to_json(eval_case.query)},
                             {"relevant_tests", eval_case.relevant_tests},
                             {"critical_tests", eval_case.critical_tests}};
    if (!eval_case.crs_annotations.empty()) {
        record["crs_annotations"] = eval_case.crs_annotations;
    }
    return record.dump();
}

/// Derives one benchmark case per ground-truth phrase of a synthetic
/// corpus: the phrase is the query, the mapped test ids are G, and the
/// urgent-tagged subset is C. Ages, sexes, histories and CRS annotations
/// follow fixed positional patterns so runs are reproducible.
inline std::vector<EvalCase> make_benchmark_cases(const SyntheticCorpus& corpus) {
    std::set<std::string> urgent_tests;
    for (const auto& doc : corpus.kb.items_tier()) {
        if (doc.urgency_tag() == UrgencyLevel::URGENT && doc.test_id()) {
            urgent_tests.insert(*doc.test_id());
        }
    }
    std::vector<EvalCase> cases;
    int index = 0;
    for (const auto& [phrase, relevant] : corpus.ground_truth) {
        EvalCase eval_case;
        char id[32];
        std::snprintf(id, sizeof(id), "case_%03d", index);
        eval_case.id = id;
        eval_case.query.symptoms = phrase;
        eval_case.query.age = 28 + 4 * index;
        eval_case.query.sex = (index % 2 == 0) ? Sex::F : Sex::M;
        if (index % 3 == 0) {
            const auto tokens = tokenize_lower_alnum(phrase);
            if (!tokens.empty()) eval_case.query.history.push_back("prior episode of " + tokens.front());
        }
        eval_case.relevant_tests = relevant;
        for (const auto& test : relevant) {
            if (urgent_tests.count(test) != 0) eval_case.critical_tests.insert(test);
        }
        if (index % 2 == 0) {
            eval_case.crs_annotations = {3 + (index % 3), 4};
        }
        ++index;
        cases.push_back(std::move(eval_case));
    }
    return cases;
}

// ---------------------------------------------------------------------------
// report rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed1(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", value);
    return buf;
}

inline std::string signed1(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.1f", value);
    // The full row prints as plain 0.0, matching the reference layout.
    if (std::string(buf) == "+0.0" || std::string(buf) == "-0.0") return "0.0";
    return buf;
}

inline std::string pad_right(std::string text, size_t width) {
    if (text.size() < width) text.append(width - text.size(), ' ');
    return text;
}

inline std::string pad_left(std::string text, size_t width) {
    if (text.size() < width) text.insert(0, width - text.size(), ' ');
    return text;
}

}  // namespace detail

/// Row of the method-comparison table; rates are percentages, CRS on the
/// 1-5 scale (negative = not available).
struct MethodRow {
    std::string method;
    double coverage_rate = 0.0;
    double accuracy = 0.0;
    double miss_rate = 0.0;
    double crs = -1.0;
};

/// Formats the method-comparison table (percentages, CRS on 1-5).
inline std::string render_method_table(const std::vector<MethodRow>& rows) {
    std::ostringstream out;
    out << detail::pad_right("Method", 12) << detail::pad_left("Coverage Rate", 15)
        << detail::pad_left("Accuracy", 10) << detail::pad_left("Miss Rate", 11)
        << detail::pad_left("CRS", 6) << "\n";
    out << std::string(54, '-') << "\n";
    for (const auto& row : rows) {
        out << detail::pad_right(row.method, 12)
            << detail::pad_left(detail::fixed1(row.coverage_rate), 15)
            << detail::pad_left(detail::fixed1(row.accuracy), 10)
            << detail::pad_left(detail::fixed1(row.miss_rate), 11)
            << detail::pad_left(row.crs < 0.0 ? "-" : detail::fixed1(row.crs), 6) << "\n";
    }
    return out.str();
}

/// Formats the ablation delta table: 4 variant rows x 3 delta columns in
/// percentage points, full row zero.
inline std::string render_ablation_table(const AblationTable& table) {
    std::ostringstream out;
    out << detail::pad_right("System Variant", 24) << detail::pad_left("Coverage Rate", 15)
        << detail::pad_left("Accuracy", 10) << detail::pad_left("Miss Rate", 11) << "\n";
    out << std::string(60, '-') << "\n";
    for (const auto& row : table.rows) {
        out << detail::pad_right(row.variant, 24)
            << detail::pad_left(detail::signed1(row.coverage_delta), 15)
            << detail::pad_left(detail::signed1(row.accuracy_delta), 10)
            << detail::pad_left(detail::signed1(row.miss_rate_delta), 11) << "\n";
    }
    return out.str();
}

/// Human-readable evaluation summary (rates rendered as percentages).
inline std::string render_report(const EvalReport& report) {
    std::ostringstream out;
    out << "evaluation over " << report.evaluated << " case(s)";
    if (report.failed > 0) out << " (" << report.failed << " failed, excluded from means)";
    out << "\n";
    out << "  coverage rate: " << detail::fixed1(report.coverage_rate * 100.0) << "\n";
    out << "  accuracy:      " << detail::fixed1(report.accuracy * 100.0) << "\n";
    out << "  miss rate:     " << detail::fixed1(report.miss_rate * 100.0) << "\n";
    if (report.crs_mean) {
        out << "  CRS (mean):    " << detail::fixed1(*report.crs_mean) << "\n";
    }
    if (!report.per_department.empty()) {
        out << "per-department (by top recommendation)\n";
        for (const auto& [department, agg] : report.per_department) {
            out << "  " << detail::pad_right(department, 20) << " CR "
                << detail::pad_left(detail::fixed1(agg.coverage_rate * 100.0), 6) << "  acc "
                << detail::pad_left(detail::fixed1(agg.accuracy * 100.0), 6) << "  MR "
                << detail::pad_left(detail::fixed1(agg.miss_rate * 100.0), 6) << "  n="
                << agg.cases << "\n";
        }
    }
    return out.str();
}

inline nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json overall = {{"coverage_rate", report.coverage_rate},
                              {"accuracy", report.accuracy},
                              {"miss_rate", report.miss_rate},
                              {"evaluated", report.evaluated},
                              {"failed", report.failed}};
    if (report.crs_mean) overall["crs_mean"] = *report.crs_mean;
    nlohmann::json departments = nlohmann::json::object();
    for (const auto& [department, agg] : report.per_department) {
        departments[department] = {{"coverage_rate", agg.coverage_rate},
                                   {"accuracy", agg.accuracy},
                                   {"miss_rate", agg.miss_rate},
                                   {"cases", agg.cases}};
    }
    nlohmann::json per_case = nlohmann::json::array();
    for (const auto& row : report.per_case) {
        nlohmann::json entry = {{"case_id", row.case_id}, {"failed", row.failed}};
        if (row.failed) {
            entry["failure"] = row.failure;
        } else {
            entry["coverage_rate"] = row.metrics.coverage_rate;
            entry["accuracy"] = row.metrics.accuracy;
            entry["miss_rate"] = row.metrics.miss_rate;
            entry["vacuous_precision"] = row.metrics.vacuous_precision;
            entry["top_department"] = row.top_department;
            entry["recommended"] = row.recommended;
        }
        per_case.push_back(std::move(entry));
    }
    return {{"overall", std::move(overall)},
            {"per_department", std::move(departments)},
            {"per_case", std::move(per_case)}};
}

inline nlohmann::json to_json(const AblationTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        rows.push_back({{"variant", row.variant},
                        {"ablation", to_json(row.config)},
                        {"coverage_rate", row.report.coverage_rate},
                        {"accuracy", row.report.accuracy},
                        {"miss_rate", row.report.miss_rate},
                        {"coverage_delta_pp", row.coverage_delta},
                        {"accuracy_delta_pp", row.accuracy_delta},
                        {"miss_rate_delta_pp", row.miss_rate_delta}});
    }
    return {{"rows", std::move(rows)}};
}

}  // namespace hirec
