// hirec command-line front end: ingest/index a knowledge base, run single
// recommendations, evaluate against ground-truth cases, run the ablation
// suite, serve the HTTP API, and generate synthetic corpora.
//
// Exit codes: 0 success, 1 input/validation error, 2 I/O error, 3 backend
// failure. recommend exits 0 on an empty list (an empty recommendation is
// a valid clinical answer). Config precedence: flags > config file >
// environment > defaults.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hirec/core.hpp"
#include "hirec/embed.hpp"
#include "hirec/eval.hpp"
#include "hirec/json_io.hpp"
#include "hirec/kb.hpp"
#include "hirec/pipeline.hpp"
#include "hirec/reason.hpp"
#include "hirec/result.hpp"
#include "hirec/service.hpp"
#include "hirec/vecstore.hpp"
#include "hirec/weigh.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitIo = 2;
constexpr int kExitBackend = 3;

struct CliConfig {
    // paths
    std::string kb_path;
    std::string index_path;
    std::string cases_path;
    std::string out_path;
    std::string config_path;
    std::string templates_dir;
    // backends
    std::string embedder_kind = "local";
    std::string embed_url;
    std::string embed_model;
    std::string reasoner_kind = "mock";
    std::string llm_url;
    std::string llm_model;
    std::string scorer_kind = "heuristic";
    std::string weight_url;
    int dimension = static_cast<int>(hirec::kDefaultDimension);
    int timeout_ms = 10000;
    // pipeline
    hirec::AblationConfig ablation;
    hirec::PipelineParams params;
    // output
    bool json = false;
    bool explain = false;
    bool timings = false;
    std::string trace_out;
};

int exit_code_for(const hirec::Error& error, bool inputs_are_user_errors) {
    switch (error.code) {
        case hirec::ErrorCode::IO_ERROR:
            return inputs_are_user_errors ? kExitInput : kExitIo;
        case hirec::ErrorCode::BACKEND_UNAVAILABLE:
        case hirec::ErrorCode::REMOTE_UNAVAILABLE:
        case hirec::ErrorCode::REMOTE_BAD_RESPONSE:
        case hirec::ErrorCode::UNPARSEABLE_RESPONSE:
            return kExitBackend;
        default:
            return kExitInput;
    }
}

int fail(const hirec::Error& error, bool json_mode, bool inputs_are_user_errors = true) {
    if (json_mode) {
        std::cout << hirec::error_to_json(error).dump() << "\n";
    }
    std::cerr << "error: " << error.describe() << "\n";
    return exit_code_for(error, inputs_are_user_errors);
}

const char* env_or(const char* name, const char* fallback) {
    const char* value = std::getenv(name);
    return value != nullptr && *value != '\0' ? value : fallback;
}

// Environment defaults, overridable by config file and flags.
void apply_environment(CliConfig& config) {
    config.embed_url = env_or("HIREC_EMBED_URL", config.embed_url.c_str());
    config.embed_model = env_or("HIREC_EMBED_MODEL", config.embed_model.c_str());
    config.llm_url = env_or("HIREC_LLM_URL", config.llm_url.c_str());
    config.llm_model = env_or("HIREC_LLM_MODEL", config.llm_model.c_str());
    config.weight_url = env_or("HIREC_WEIGHT_URL", config.weight_url.c_str());
}

hirec::Result<void> apply_config_file(CliConfig& config) {
    if (config.config_path.empty()) return hirec::ok();
    std::ifstream in(config.config_path);
    if (!in) {
        return hirec::make_error(hirec::ErrorCode::IO_ERROR,
                                 "cannot open config file '" + config.config_path + "'");
    }
    nlohmann::json body = nlohmann::json::parse(in, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        return hirec::make_error(hirec::ErrorCode::PARSE_ERROR,
                                 "config file is not a JSON object");
    }
    auto read_string = [&](const char* key, std::string& out) {
        if (body.contains(key) && body[key].is_string()) out = body[key].get<std::string>();
    };
    auto read_int = [&](const char* key, int& out) {
        if (body.contains(key) && body[key].is_number_integer()) out = body[key].get<int>();
    };
    read_string("kb", config.kb_path);
    read_string("index", config.index_path);
    read_string("cases", config.cases_path);
    read_string("templates", config.templates_dir);
    read_string("embedder", config.embedder_kind);
    read_string("embed_url", config.embed_url);
    read_string("embed_model", config.embed_model);
    read_string("reasoner", config.reasoner_kind);
    read_string("llm_url", config.llm_url);
    read_string("llm_model", config.llm_model);
    read_string("scorer", config.scorer_kind);
    read_string("weight_url", config.weight_url);
    read_int("dimension", config.dimension);
    read_int("timeout_ms", config.timeout_ms);
    if (body.contains("ablation") && body["ablation"].is_object()) {
        const auto& node = body["ablation"];
        auto read_bool = [&](const char* key, bool& out) {
            if (node.contains(key) && node[key].is_boolean()) out = node[key].get<bool>();
        };
        read_bool("memory_enabled", config.ablation.memory_enabled);
        read_bool("department_layer_enabled", config.ablation.department_layer_enabled);
        read_bool("dual_kb_enabled", config.ablation.dual_kb_enabled);
    }
    if (body.contains("params") && body["params"].is_object()) {
        const auto& node = body["params"];
        auto read_param = [&](const char* key, int& out) {
            if (node.contains(key) && node[key].is_number_integer()) out = node[key].get<int>();
        };
        read_param("root_top_k", config.params.root_top_k);
        read_param("dept_top_k", config.params.dept_top_k);
        read_param("max_departments", config.params.max_departments);
        read_param("max_recommendations", config.params.max_recommendations);
        if (node.contains("min_weight") && node["min_weight"].is_number()) {
            config.params.min_weight = node["min_weight"].get<double>();
        }
    }
    return hirec::ok();
}

// Owns the backend objects the engine borrows.
struct Stack {
    hirec::KnowledgeBase kb;
    hirec::VectorIndex index{hirec::kDefaultDimension};
    std::unique_ptr<hirec::Embedder> embedder;
    std::unique_ptr<hirec::Reasoner> reasoner;
    std::unique_ptr<hirec::Scorer> scorer;
    hirec::PromptLibrary library = hirec::PromptLibrary::builtin();
    std::unique_ptr<hirec::RecommendEngine> engine;
};

hirec::Result<void> build_backends(const CliConfig& config, Stack& stack) {
    hirec::EmbedderConfig embed_config;
    embed_config.kind = config.embedder_kind == "remote" ? hirec::EmbedderKind::REMOTE
                                                         : hirec::EmbedderKind::LOCAL_HASHED;
    if (config.embedder_kind != "local" && config.embedder_kind != "remote") {
        return hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT,
                                 "embedder must be 'local' or 'remote'");
    }
    embed_config.dimension = static_cast<size_t>(config.dimension);
    embed_config.endpoint_url = config.embed_url;
    embed_config.model_name = config.embed_model;
    embed_config.timeout_ms = config.timeout_ms;
    auto embedder = hirec::make_embedder(embed_config);
    if (!embedder.ok()) return embedder.error();
    stack.embedder = std::move(embedder).value();

    if (!config.templates_dir.empty()) {
        auto library = hirec::PromptLibrary::from_directory(config.templates_dir);
        if (!library.ok()) return library.error();
        stack.library = std::move(library).value();
    }

    hirec::ReasonerConfig reason_config;
    if (config.reasoner_kind == "mock") {
        reason_config.kind = hirec::ReasonerKind::MOCK;
    } else if (config.reasoner_kind == "remote") {
        reason_config.kind = hirec::ReasonerKind::REMOTE;
    } else {
        return hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT,
                                 "reasoner must be 'mock' or 'remote'");
    }
    reason_config.endpoint_url = config.llm_url;
    reason_config.model_name = config.llm_model;
    reason_config.timeout_ms = config.timeout_ms;
    auto reasoner = hirec::make_reasoner(reason_config, stack.library);
    if (!reasoner.ok()) return reasoner.error();
    stack.reasoner = std::move(reasoner).value();

    hirec::ScorerConfig scorer_config;
    if (config.scorer_kind == "heuristic") {
        scorer_config.kind = hirec::ScorerKind::HEURISTIC;
    } else if (config.scorer_kind == "remote") {
        scorer_config.kind = hirec::ScorerKind::REMOTE;
    } else {
        return hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT,
                                 "scorer must be 'heuristic' or 'remote'");
    }
    scorer_config.endpoint_url = config.weight_url;
    scorer_config.timeout_ms = config.timeout_ms;
    auto scorer = hirec::make_scorer(scorer_config);
    if (!scorer.ok()) return scorer.error();
    stack.scorer = std::move(scorer).value();
    return hirec::ok();
}

// Loads KB + snapshot and cross-checks that every indexed id has a document.
hirec::Result<void> load_stack(const CliConfig& config, Stack& stack) {
    if (config.kb_path.empty() || config.index_path.empty()) {
        return hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT,
                                 "--kb and --index are required");
    }
    auto ingested = hirec::ingest(config.kb_path);
    if (!ingested.ok()) return ingested.error();
    if (!ingested.value().issues.empty()) {
        return hirec::make_error(hirec::ErrorCode::PARSE_ERROR,
                                 "knowledge base file has " +
                                     std::to_string(ingested.value().issues.size()) +
                                     " invalid record(s); first: " +
                                     ingested.value().issues.front().describe());
    }
    stack.kb = std::move(ingested.value().kb);

    auto index = hirec::VectorIndex::load(config.index_path);
    if (!index.ok()) return index.error();
    stack.index = std::move(index).value();

    if (stack.index.dimension() != static_cast<size_t>(config.dimension)) {
        return hirec::make_error(hirec::ErrorCode::DIMENSION_MISMATCH,
                                 "index dimension " + std::to_string(stack.index.dimension()) +
                                     " does not match configured dimension " +
                                     std::to_string(config.dimension));
    }
    for (const auto& entry : stack.index.entries()) {
        if (stack.kb.find(entry.doc_id.str()) == nullptr) {
            return hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT,
                                     "index entry '" + entry.doc_id.str() +
                                         "' has no document in the knowledge base file");
        }
    }

    auto backends = build_backends(config, stack);
    if (!backends.ok()) return backends.error();
    stack.engine = std::make_unique<hirec::RecommendEngine>(
        stack.kb, stack.index, *stack.embedder, *stack.reasoner, *stack.scorer, stack.library);
    return hirec::ok();
}

hirec::Result<void> write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        return hirec::make_error(hirec::ErrorCode::IO_ERROR,
                                 "cannot open '" + path + "' for writing");
    }
    out << content;
    out.flush();
    if (!out) return hirec::make_error(hirec::ErrorCode::IO_ERROR, "short write to '" + path + "'");
    return hirec::ok();
}

// --- subcommands -----------------------------------------------------------

int cmd_ingest(const CliConfig& config) {
    if (config.kb_path.empty() || config.out_path.empty()) {
        return fail(hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT,
                                      "--kb and --out are required"),
                    config.json);
    }
    auto ingested = hirec::ingest(config.kb_path);
    if (!ingested.ok()) return fail(ingested.error(), config.json, false);

    const auto& issues = ingested.value().issues;
    for (const auto& warning : ingested.value().kb.cross_tier_warnings()) {
        std::cerr << "warning: item-tier department '" << warning
                  << "' has no department-tier document\n";
    }
    if (!issues.empty()) {
        if (config.json) {
            nlohmann::json report = {{"indexed", 0},
                                     {"rejected", issues.size()},
                                     {"issues", nlohmann::json::array()}};
            for (const auto& issue : issues) report["issues"].push_back(issue.describe());
            std::cout << report.dump() << "\n";
        }
        for (const auto& issue : issues) std::cerr << "error: " << issue.describe() << "\n";
        return kExitInput;
    }

    Stack stack;
    auto backends = build_backends(config, stack);
    if (!backends.ok()) return fail(backends.error(), config.json);
    stack.index = hirec::VectorIndex(static_cast<size_t>(config.dimension));
    auto count = hirec::build_index(ingested.value().kb, *stack.embedder, stack.index);
    if (!count.ok()) return fail(count.error(), config.json, false);
    auto saved = stack.index.save(config.out_path);
    if (!saved.ok()) return fail(saved.error(), config.json, false);

    if (config.json) {
        std::cout << nlohmann::json({{"indexed", count.value()}, {"rejected", 0}}).dump() << "\n";
    } else {
        std::cout << "indexed " << count.value() << " documents\n";
    }
    return kExitOk;
}

hirec::Result<hirec::PatientQuery> read_query(const std::string& inline_json,
                                              const std::string& file_path) {
    std::string text = inline_json;
    if (!file_path.empty()) {
        std::ifstream in(file_path);
        if (!in) {
            return hirec::make_error(hirec::ErrorCode::IO_ERROR,
                                     "cannot open query file '" + file_path + "'");
        }
        std::stringstream buffer;
        buffer << in.rdbuf();
        text = buffer.str();
    }
    if (text.empty()) {
        return hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT,
                                 "provide a query with --query or --query-file");
    }
    nlohmann::json body = nlohmann::json::parse(text, nullptr, false);
    if (body.is_discarded()) {
        return hirec::make_error(hirec::ErrorCode::PARSE_ERROR, "query is not valid JSON");
    }
    auto query = hirec::patient_query_from_json(body);
    if (!query.ok()) return query.error();
    auto valid = hirec::validate_query(query.value());
    if (!valid.ok()) return valid.error();
    return query;
}

int cmd_recommend(const CliConfig& config, const std::string& query_json,
                  const std::string& query_file) {
    Stack stack;
    auto loaded = load_stack(config, stack);
    if (!loaded.ok()) return fail(loaded.error(), config.json);
    auto query = read_query(query_json, query_file);
    if (!query.ok()) return fail(query.error(), config.json);

    auto result = stack.engine->recommend(query.value(), config.ablation, config.params);
    if (!result.ok()) return fail(result.error(), config.json);

    std::cout << hirec::to_json(result.value(), config.timings).dump() << "\n";
    if (config.explain) {
        std::cerr << hirec::RecommendEngine::explain(result.value());
    }
    if (!config.trace_out.empty()) {
        auto written = write_file(config.trace_out, hirec::trace_to_jsonl(result.value()));
        if (!written.ok()) return fail(written.error(), config.json, false);
    }
    return kExitOk;
}

int cmd_evaluate(const CliConfig& config) {
    Stack stack;
    auto loaded = load_stack(config, stack);
    if (!loaded.ok()) return fail(loaded.error(), config.json);
    if (config.cases_path.empty()) {
        return fail(hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT, "--cases is required"),
                    config.json);
    }
    auto cases = hirec::load_cases(config.cases_path);
    if (!cases.ok()) return fail(cases.error(), config.json);
    auto report = hirec::evaluate(cases.value(), *stack.engine, config.ablation, config.params);
    if (!report.ok()) return fail(report.error(), config.json);

    const nlohmann::json report_json = hirec::to_json(report.value());
    if (!config.out_path.empty()) {
        auto written = write_file(config.out_path, report_json.dump(2) + "\n");
        if (!written.ok()) return fail(written.error(), config.json, false);
    }
    if (config.json) {
        std::cout << report_json.dump() << "\n";
        std::cerr << hirec::render_report(report.value());
    } else {
        std::cout << hirec::render_report(report.value());
    }
    for (const auto& row : report.value().per_case) {
        if (row.failed) std::cerr << "case " << row.case_id << " failed: " << row.failure << "\n";
    }
    if (report.value().evaluated == 0) {
        std::cerr << "error: every case failed\n";
        return kExitBackend;
    }
    return kExitOk;
}

int cmd_ablate(const CliConfig& config) {
    Stack stack;
    auto loaded = load_stack(config, stack);
    if (!loaded.ok()) return fail(loaded.error(), config.json);
    if (config.cases_path.empty()) {
        return fail(hirec::make_error(hirec::ErrorCode::INVALID_ARGUMENT, "--cases is required"),
                    config.json);
    }
    auto cases = hirec::load_cases(config.cases_path);
    if (!cases.ok()) return fail(cases.error(), config.json);
    auto table = hirec::ablation_suite(cases.value(), *stack.engine, config.params);
    if (!table.ok()) return fail(table.error(), config.json);

    const nlohmann::json table_json = hirec::to_json(table.value());
    if (!config.out_path.empty()) {
        auto written = write_file(config.out_path, table_json.dump(2) + "\n");
        if (!written.ok()) return fail(written.error(), config.json, false);
    }
    if (config.json) {
        std::cout << table_json.dump() << "\n";
        std::cerr << hirec::render_ablation_table(table.value());
    } else {
        std::cout << hirec::render_ablation_table(table.value());
    }
    return kExitOk;
}

std::atomic<hirec::RecommendService*> g_service{nullptr};

void handle_interrupt(int) {
    if (auto* service = g_service.load()) service->stop();
}

int cmd_serve(const CliConfig& config, const std::string& bind_addr, int port) {
    Stack stack;
    auto loaded = load_stack(config, stack);
    if (!loaded.ok()) return fail(loaded.error(), config.json);

    hirec::RecommendService service(*stack.engine, config.ablation, config.params,
                                    stack.index.size());
    g_service.store(&service);
    std::signal(SIGINT, handle_interrupt);
    std::signal(SIGTERM, handle_interrupt);

    std::cerr << "serving on http://" << bind_addr << ":" << port << " (index size "
              << stack.index.size() << ")\n";
    const bool ok = service.listen(bind_addr, port);
    g_service.store(nullptr);
    if (!ok) {
        return fail(hirec::make_error(hirec::ErrorCode::IO_ERROR,
                                      "failed to bind " + bind_addr + ":" + std::to_string(port)),
                    config.json, false);
    }
    std::cerr << "shut down\n";
    return kExitOk;
}

int cmd_gen_corpus(const CliConfig& config, uint64_t seed,
                   const std::vector<std::string>& departments, int items_per_department,
                   const std::string& corpus_out, const std::string& cases_out,
                   const std::string& truth_out) {
    auto corpus = hirec::generate_synthetic_corpus(
        seed, departments.empty() ? hirec::default_departments() : departments,
        items_per_department);
    if (!corpus.ok()) return fail(corpus.error(), config.json);

    std::string corpus_text;
    for (const auto& doc : corpus.value().kb.departments_tier()) {
        corpus_text += hirec::document_to_jsonl(doc) + "\n";
    }
    for (const auto& doc : corpus.value().kb.items_tier()) {
        corpus_text += hirec::document_to_jsonl(doc) + "\n";
    }
    auto written = write_file(corpus_out, corpus_text);
    if (!written.ok()) return fail(written.error(), config.json, false);

    if (!cases_out.empty()) {
        std::string cases_text;
        for (const auto& eval_case : hirec::make_benchmark_cases(corpus.value())) {
            cases_text += hirec::case_to_jsonl(eval_case) + "\n";
        }
        auto cases_written = write_file(cases_out, cases_text);
        if (!cases_written.ok()) return fail(cases_written.error(), config.json, false);
    }
    if (!truth_out.empty()) {
        nlohmann::json truth = nlohmann::json::object();
        for (const auto& [phrase, tests] : corpus.value().ground_truth) truth[phrase] = tests;
        auto truth_written = write_file(truth_out, truth.dump(2) + "\n");
        if (!truth_written.ok()) return fail(truth_written.error(), config.json, false);
    }

    if (config.json) {
        std::cout << nlohmann::json({{"documents", corpus.value().kb.size()},
                                     {"ground_truth_entries",
                                      corpus.value().ground_truth.size()}})
                         .dump()
                  << "\n";
    } else {
        std::cout << "generated " << corpus.value().kb.size() << " documents\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical retrieval-augmented medical test recommendation engine"};
    app.require_subcommand(1);

    CliConfig config;
    apply_environment(config);

    // Options shared by every subcommand.
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config.config_path, "JSON config file");
        cmd->add_option("--dim", config.dimension, "embedding dimension");
        cmd->add_option("--timeout-ms", config.timeout_ms, "remote request timeout");
        cmd->add_option("--templates", config.templates_dir, "prompt template directory");
        cmd->add_option("--embedder", config.embedder_kind, "embedding backend: local|remote");
        cmd->add_option("--embed-url", config.embed_url, "remote embedding endpoint");
        cmd->add_option("--embed-model", config.embed_model, "remote embedding model name");
        cmd->add_option("--reasoner", config.reasoner_kind, "reasoning backend: mock|remote");
        cmd->add_option("--llm-url", config.llm_url, "remote chat endpoint");
        cmd->add_option("--llm-model", config.llm_model, "remote chat model name");
        cmd->add_option("--scorer", config.scorer_kind, "weight backend: heuristic|remote");
        cmd->add_option("--weight-url", config.weight_url, "remote scorer endpoint");
        cmd->add_flag("--json", config.json, "machine-readable JSON on stdout");
    };
    auto add_pipeline = [&](CLI::App* cmd) {
        cmd->add_flag("--no-memory", [&](size_t) { config.ablation.memory_enabled = false; },
                      "disable the memory component");
        cmd->add_flag("--no-department-layer",
                      [&](size_t) { config.ablation.department_layer_enabled = false; },
                      "skip the department layer");
        cmd->add_flag("--single-kb", [&](size_t) { config.ablation.dual_kb_enabled = false; },
                      "search the merged corpus without tier filters");
        cmd->add_option("--top-k", config.params.root_top_k, "root retrieval depth");
        cmd->add_option("--dept-top-k", config.params.dept_top_k, "department retrieval depth");
        cmd->add_option("--max-departments", config.params.max_departments,
                        "departments advanced past the root layer");
        cmd->add_option("--max-recommendations", config.params.max_recommendations,
                        "final list size cap");
        cmd->add_option("--min-weight", config.params.min_weight, "minimum final weight");
    };

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "ingest a document file and write an index snapshot");
    ingest_cmd->add_option("--kb", config.kb_path, "document file (JSONL)")->required();
    ingest_cmd->add_option("--out", config.out_path, "index snapshot output path")->required();
    add_common(ingest_cmd);

    // recommend
    std::string query_json;
    std::string query_file;
    auto* recommend_cmd = app.add_subcommand("recommend", "run one recommendation");
    recommend_cmd->add_option("--kb", config.kb_path, "document file (JSONL)")->required();
    recommend_cmd->add_option("--index", config.index_path, "index snapshot")->required();
    recommend_cmd->add_option("--query", query_json, "patient query JSON (inline)");
    recommend_cmd->add_option("--query-file", query_file, "patient query JSON file");
    recommend_cmd->add_flag("--explain", config.explain, "print a human-readable report to stderr");
    recommend_cmd->add_flag("--timings", config.timings, "include per-layer timings in the JSON");
    recommend_cmd->add_option("--trace-out", config.trace_out, "write the trace as JSONL");
    add_common(recommend_cmd);
    add_pipeline(recommend_cmd);

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate against ground-truth cases");
    evaluate_cmd->add_option("--kb", config.kb_path, "document file (JSONL)")->required();
    evaluate_cmd->add_option("--index", config.index_path, "index snapshot")->required();
    evaluate_cmd->add_option("--cases", config.cases_path, "eval case file (JSONL)")->required();
    evaluate_cmd->add_option("--out", config.out_path, "report JSON output path");
    add_common(evaluate_cmd);
    add_pipeline(evaluate_cmd);

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run the four-variant ablation suite");
    ablate_cmd->add_option("--kb", config.kb_path, "document file (JSONL)")->required();
    ablate_cmd->add_option("--index", config.index_path, "index snapshot")->required();
    ablate_cmd->add_option("--cases", config.cases_path, "eval case file (JSONL)")->required();
    ablate_cmd->add_option("--out", config.out_path, "ablation JSON output path");
    add_common(ablate_cmd);
    add_pipeline(ablate_cmd);

    // serve
    std::string bind_addr = "127.0.0.1";
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "serve the HTTP API");
    serve_cmd->add_option("--kb", config.kb_path, "document file (JSONL)")->required();
    serve_cmd->add_option("--index", config.index_path, "index snapshot")->required();
    serve_cmd->add_option("--bind", bind_addr, "bind address");
    serve_cmd->add_option("--port", port, "bind port");
    add_common(serve_cmd);
    add_pipeline(serve_cmd);

    // gen-corpus
    uint64_t seed = 7;
    std::vector<std::string> departments;
    int items_per_department = hirec::kDefaultItemsPerDepartment;
    std::string corpus_out = "corpus.jsonl";
    std::string cases_out;
    std::string truth_out;
    auto* gen_cmd = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
    gen_cmd->add_option("--seed", seed, "generator seed");
    gen_cmd->add_option("--departments", departments, "department names (repeatable)");
    gen_cmd->add_option("--items-per-department", items_per_department, "items per department");
    gen_cmd->add_option("--out", corpus_out, "corpus JSONL output path");
    gen_cmd->add_option("--cases-out", cases_out, "benchmark case JSONL output path");
    gen_cmd->add_option("--truth-out", truth_out, "ground-truth JSON output path");
    add_common(gen_cmd);

    // Config file sits between environment and flags: apply it before the
    // parse so that flags (assigned only when present) win on top.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) {
            config.config_path = argv[i + 1];
        } else if (arg.rfind("--config=", 0) == 0) {
            config.config_path = arg.substr(9);
        }
    }
    if (!config.config_path.empty()) {
        auto applied = apply_config_file(config);
        if (!applied.ok()) return fail(applied.error(), config.json);
    }

    CLI11_PARSE(app, argc, argv);

    if (ingest_cmd->parsed()) return cmd_ingest(config);
    if (recommend_cmd->parsed()) return cmd_recommend(config, query_json, query_file);
    if (evaluate_cmd->parsed()) return cmd_evaluate(config);
    if (ablate_cmd->parsed()) return cmd_ablate(config);
    if (serve_cmd->parsed()) return cmd_serve(config, bind_addr, port);
    if (gen_cmd->parsed()) {
        return cmd_gen_corpus(config, seed, departments, items_per_department, corpus_out,
                              cases_out, truth_out);
    }
    return kExitInput;
}
