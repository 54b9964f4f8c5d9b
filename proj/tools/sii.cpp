#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sii/backend.hpp"
#include "sii/catalog.hpp"
#include "sii/corpus.hpp"
#include "sii/dataset.hpp"
#include "sii/evalkit.hpp"
#include "sii/manifest.hpp"
#include "sii/matcher.hpp"
#include "sii/mdp.hpp"
#include "sii/tabular.hpp"
#include "sii/text.hpp"

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string manifest_path;
    std::string run_id = "run";
    std::uint64_t seed = 42;
    std::size_t top_n = 400;
    std::size_t train_size = 360;
    std::size_t test_size = 40;
    std::size_t token_budget = 2049;
    std::string backend_kind;  // overrides the config file when set
    int rpm = -1;              // overrides when >= 0
};

std::optional<std::string> config_path_or_none(const GlobalOptions& opts) {
    if (opts.config_path.empty()) return std::nullopt;
    return opts.config_path;
}

nlohmann::json load_config_json(const GlobalOptions& opts) {
    if (opts.config_path.empty()) return nlohmann::json::object();
    std::ifstream in(opts.config_path);
    if (!in) throw std::runtime_error("cannot open config file " + opts.config_path);
    nlohmann::json config;
    try {
        in >> config;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config file " + opts.config_path + ": " + e.what());
    }
    if (!config.is_object()) throw std::runtime_error("config file must hold a JSON object");
    return config;
}

std::string slurp_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (sii::trim(line).empty()) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    auto out = open_output(path);
    out << content;
}

void print_warnings(const std::vector<std::string>& diagnostics) {
    for (const auto& d : diagnostics) std::cerr << "warn: " << d << "\n";
}

// Each stage records only the config it owns; shared keys would make
// differently-flagged stages conflict in the manifest.
std::string split_hash(const GlobalOptions& opts) {
    std::ostringstream key;
    key << "train=" << opts.train_size << ";test=" << opts.test_size << ";seed=" << opts.seed;
    return sii::fnv1a64_hex(key.str());
}

std::string rank_hash(const GlobalOptions& opts) {
    std::ostringstream key;
    key << "top_n=" << opts.top_n;
    return sii::fnv1a64_hex(key.str());
}

std::string token_gate_hash(const GlobalOptions& opts) {
    sii::TokenGate gate;
    std::ostringstream key;
    key << "budget=" << opts.token_budget << ";reserve=" << gate.completion_reserve;
    return sii::fnv1a64_hex(key.str());
}

void record_stage(const GlobalOptions& opts, const std::map<std::string, std::string>& hashes,
                  const std::string& stage, std::vector<std::string> outputs) {
    if (opts.manifest_path.empty()) return;
    auto manifest = std::filesystem::exists(opts.manifest_path)
                        ? sii::RunManifest::load(opts.manifest_path)
                        : sii::RunManifest(opts.run_id, {});
    manifest.merge_config_hashes(hashes);
    manifest.record_stage(stage, std::move(outputs));
    manifest.save(opts.manifest_path);
}

sii::TokenGate gate_from(const GlobalOptions& opts) {
    sii::TokenGate gate;
    gate.budget = opts.token_budget;
    return gate;
}

sii::BackendConfig backend_config_from(const GlobalOptions& opts, const nlohmann::json& config) {
    sii::BackendConfig backend;
    if (config.contains("backend")) {
        const auto& section = config.at("backend");
        backend.kind = section.value("kind", backend.kind);
        backend.endpoint = section.value("endpoint", backend.endpoint);
        backend.completion_path = section.value("completion_path", backend.completion_path);
        backend.finetune_path = section.value("finetune_path", backend.finetune_path);
        backend.model_id = section.value("model_id", backend.model_id);
        backend.max_tokens = section.value("max_tokens", backend.max_tokens);
        backend.temperature = section.value("temperature", backend.temperature);
        backend.stop = section.value("stop", backend.stop);
        backend.timeout_ms = section.value("timeout_ms", backend.timeout_ms);
        backend.max_retries = section.value("max_retries", backend.max_retries);
        backend.requests_per_minute =
            section.value("requests_per_minute", backend.requests_per_minute);
        backend.retry_backoff_ms = section.value("retry_backoff_ms", backend.retry_backoff_ms);
        backend.credential_env = section.value("credential_env", backend.credential_env);
        backend.prompt_field = section.value("prompt_field", backend.prompt_field);
        backend.model_field = section.value("model_field", backend.model_field);
        backend.response_text_path =
            section.value("response_text_path", backend.response_text_path);
        backend.mock_table_path = section.value("mock_table_path", backend.mock_table_path);
        backend.mock_corrupt = section.value("mock_corrupt", backend.mock_corrupt);
    }
    if (!opts.backend_kind.empty()) backend.kind = opts.backend_kind;
    if (opts.rpm >= 0) backend.requests_per_minute = opts.rpm;
    return backend;
}

sii::FineTuneConfig finetune_config_from(const nlohmann::json& config) {
    sii::FineTuneConfig tune;
    if (config.contains("finetune")) {
        const auto& section = config.at("finetune");
        tune.epochs = section.value("epochs", tune.epochs);
        tune.batch_size = section.value("batch_size", tune.batch_size);
        tune.learning_rate_multiplier =
            section.value("learning_rate_multiplier", tune.learning_rate_multiplier);
        tune.prompt_loss_weight = section.value("prompt_loss_weight", tune.prompt_loss_weight);
        tune.base_model = section.value("base_model", tune.base_model);
    }
    return tune;
}

nlohmann::json content_to_json(const sii::ExtractedContent& content) {
    return {{"doc_id", content.doc_id},
            {"text", content.text},
            {"word_count", content.word_count},
            {"token_estimate", content.token_estimate}};
}

// Counts are recomputed from the text so a hand-edited file stays coherent.
std::vector<sii::ExtractedContent> load_contents_jsonl(const std::string& path) {
    std::vector<sii::ExtractedContent> contents;
    for (const auto& row : read_jsonl(path)) {
        contents.push_back(sii::make_extracted_content(row.at("doc_id").get<std::string>(),
                                                       row.at("text").get<std::string>()));
    }
    return contents;
}

std::map<std::string, sii::ExtractedContent> contents_by_id(
    const std::vector<sii::ExtractedContent>& contents) {
    std::map<std::string, sii::ExtractedContent> by_id;
    for (const auto& content : contents) {
        if (!by_id.emplace(content.doc_id, content).second)
            throw std::runtime_error("duplicate doc_id in contents: " + content.doc_id);
    }
    return by_id;
}

nlohmann::json record_values_json(const sii::DeviceRecord& record,
                                  const sii::ElementCatalog& catalog) {
    auto values = nlohmann::json::object();
    for (const auto& key : catalog.keys()) values[key] = record.value(key);
    return values;
}

sii::DeviceRecord record_from_values_json(const nlohmann::json& values, const std::string& doc_id,
                                          const sii::ElementCatalog& catalog) {
    auto record = sii::DeviceRecord::with_defaults(catalog, doc_id);
    for (auto it = values.begin(); it != values.end(); ++it) {
        if (!catalog.has_key(it.key()))
            throw std::runtime_error("unknown element key in ranked file: " + it.key());
        record.set(it.key(), it.value().get<std::string>());
    }
    return record;
}

sii::DeviceRecord all_missing_record(const sii::ElementCatalog& catalog,
                                     const std::string& doc_id) {
    auto record = sii::DeviceRecord::with_defaults(catalog, doc_id);
    for (const auto& key : catalog.keys()) record.missing.insert(key);
    return record;
}

// Reorders predictions to the gold order; docs without a prediction become
// all-missing records so they score as pure false negatives.
std::vector<sii::DeviceRecord> align_predictions(const std::vector<sii::DeviceRecord>& preds,
                                                 const std::vector<sii::GoldRow>& golds,
                                                 const sii::ElementCatalog& catalog) {
    std::map<std::string, const sii::DeviceRecord*> by_id;
    for (const auto& pred : preds) by_id[pred.source_id] = &pred;
    std::set<std::string> gold_ids;
    for (const auto& gold : golds) gold_ids.insert(gold.doc_id);
    for (const auto& pred : preds) {
        if (!gold_ids.count(pred.source_id))
            std::cerr << "warn: prediction for unknown doc " << pred.source_id << " ignored\n";
    }
    std::vector<sii::DeviceRecord> aligned;
    aligned.reserve(golds.size());
    for (const auto& gold : golds) {
        auto it = by_id.find(gold.doc_id);
        if (it == by_id.end()) {
            std::cerr << "warn: no prediction for doc " << gold.doc_id << "\n";
            aligned.push_back(all_missing_record(catalog, gold.doc_id));
        } else {
            aligned.push_back(*it->second);
        }
    }
    return aligned;
}

std::vector<sii::DeviceRecord> gold_records(const std::vector<sii::GoldRow>& golds) {
    std::vector<sii::DeviceRecord> records;
    records.reserve(golds.size());
    for (const auto& gold : golds) records.push_back(gold.record);
    return records;
}

void emit_report(const std::string& table, const std::string& out_path) {
    std::cout << table;
    if (!out_path.empty()) write_text_file(out_path, table);
}

// ---- commands ----

struct IngestArgs {
    std::string corpus_dir;
    std::string doc_manifest;
    std::string out = "contents.jsonl";
};

void run_ingest(const GlobalOptions& opts, const IngestArgs& args) {
    auto gate = gate_from(opts);
    auto out = open_output(args.out);
    std::size_t kept = 0, skipped = 0;
    for (const auto& row : read_jsonl(args.doc_manifest)) {
        auto doc_id = row.at("doc_id").get<std::string>();
        auto rel_path = row.at("path").get<std::string>();
        auto path = std::filesystem::path(args.corpus_dir) / rel_path;
        try {
            auto format = row.contains("format")
                              ? sii::markup_format_from_name(row.at("format").get<std::string>())
                              : sii::infer_format_from_path(rel_path);
            auto ingested = sii::ingest_document(slurp_file(path), format, doc_id);
            print_warnings(ingested.warnings);
            auto content = sii::select_experimental_sections(ingested.document);
            if (!content) throw std::runtime_error("no experimental section found");
            auto gated = sii::gate_token_limit(*content, gate);
            if (!gated.pass) throw std::runtime_error(gated.reason);
            out << content_to_json(*content).dump() << "\n";
            ++kept;
        } catch (const std::exception& e) {
            std::cerr << "skip: " << doc_id << ": " << e.what() << "\n";
            ++skipped;
        }
    }
    record_stage(opts, {{"token_gate", token_gate_hash(opts)}}, "ingest", {args.out});
    std::cout << "ingest: " << kept << " documents kept, " << skipped << " skipped -> " << args.out
              << "\n";
}

struct MatchArgs {
    std::string contents;
    std::string fair_table;
    std::string out = "ranked.jsonl";
    std::string audit_out = "audit.tsv";
    std::string doc_column = "doc_id";
    std::string delimiter = ",";
};

void run_match(const GlobalOptions& opts, const MatchArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto rules = sii::RuleMap::load(catalog, config_path_or_none(opts));
    auto contents = load_contents_jsonl(args.contents);
    auto by_id = contents_by_id(contents);

    sii::FairTableOptions table_options;
    table_options.doc_ref_column = args.doc_column;
    if (args.delimiter.size() != 1) throw std::runtime_error("delimiter must be one character");
    table_options.delimiter = args.delimiter[0];
    auto fair_rows = sii::load_fair_rows(args.fair_table, catalog, table_options);

    std::map<std::string, std::vector<sii::DeviceRecord>> rows_by_doc;
    std::vector<sii::DeviceRecord> all_records;
    for (const auto& row : fair_rows) {
        rows_by_doc[row.record.source_id].push_back(row.record);
        all_records.push_back(row.record);
    }

    std::vector<sii::RankedSample> samples;
    for (const auto& content : contents) {
        auto it = rows_by_doc.find(content.doc_id);
        if (it == rows_by_doc.end()) {
            std::cerr << "warn: no table rows for doc " << content.doc_id << "\n";
            continue;
        }
        samples.push_back(sii::select_top_schema(it->second, content, rules));
    }
    auto ranked = sii::rank_and_select(std::move(samples), opts.top_n);

    auto out = open_output(args.out);
    for (const auto& sample : ranked) {
        nlohmann::json row = content_to_json(sample.content);
        row["match_rate"] = sample.report.match_rate;
        row["values"] = record_values_json(sample.record, catalog);
        out << row.dump() << "\n";
    }

    auto audit = sii::exact_match_rate_table(all_records, by_id, catalog);
    print_warnings(audit.diagnostics);
    std::ostringstream table;
    table << "element\trate\tsupport\n";
    char buf[32];
    for (const auto& row : audit.rows) {
        std::snprintf(buf, sizeof buf, "%.2f", row.rate);
        table << row.key << "\t" << buf << "\t" << row.support << "\n";
    }
    write_text_file(args.audit_out, table.str());

    record_stage(opts,
                 {{"catalog", catalog.hash()},
                  {"rules", rules.hash()},
                  {"rank", rank_hash(opts)}},
                 "match", {args.out, args.audit_out});
    std::cout << "match: " << ranked.size() << " documents ranked -> " << args.out << ", audit -> "
              << args.audit_out << "\n";
}

struct BuildDatasetArgs {
    std::string ranked;
    std::string train_out = "train.jsonl";
    std::string test_out = "test.jsonl";
    std::string prompts_out = "test_prompts.jsonl";
    std::string gold_out = "test_gold.jsonl";
    std::string meta_out = "dataset_meta.json";
};

void run_build_dataset(const GlobalOptions& opts, const BuildDatasetArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto config = load_config_json(opts);
    auto tune = finetune_config_from(config);
    auto gate = gate_from(opts);

    std::vector<sii::TrainingSample> samples;
    for (const auto& row : read_jsonl(args.ranked)) {
        auto doc_id = row.at("doc_id").get<std::string>();
        auto content = sii::make_extracted_content(doc_id, row.at("text").get<std::string>());
        auto record = record_from_values_json(row.at("values"), doc_id, catalog);
        samples.push_back(sii::build_sample(content, record, catalog, gate));
    }

    sii::SplitConfig split_config{opts.train_size, opts.test_size, opts.seed};
    auto split = sii::split_dataset(std::move(samples), split_config);

    print_warnings(sii::emit_jsonl(split.train, args.train_out));
    print_warnings(sii::emit_jsonl(split.test, args.test_out));
    sii::emit_prompts_jsonl(split.test, args.prompts_out);
    sii::emit_gold_jsonl(split.test, args.gold_out);

    nlohmann::json meta = {{"train_count", split.train.size()},
                           {"test_count", split.test.size()},
                           {"seed", opts.seed},
                           {"token_budget", opts.token_budget},
                           {"catalog_hash", catalog.hash()},
                           {"split_hash", split_hash(opts)},
                           {"finetune_hash", tune.hash()}};
    write_text_file(args.meta_out, meta.dump(2) + "\n");

    record_stage(opts,
                 {{"catalog", catalog.hash()},
                  {"split", split_hash(opts)},
                  {"token_gate", token_gate_hash(opts)},
                  {"finetune", tune.hash()}},
                 "build-dataset",
                 {args.train_out, args.test_out, args.prompts_out, args.gold_out, args.meta_out});
    std::cout << "build-dataset: " << split.train.size() << " train / " << split.test.size()
              << " test -> " << args.train_out << ", " << args.test_out << "\n";
}

struct BaselinePromptsArgs {
    std::string contents;
    std::string out = "baseline_prompts.jsonl";
};

void run_baseline_prompts(const GlobalOptions& opts, const BaselinePromptsArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto contents = load_contents_jsonl(args.contents);
    auto out = open_output(args.out);
    for (const auto& content : contents) {
        nlohmann::json row = {{"doc_id", content.doc_id},
                              {"prompt", sii::build_baseline_prompt(content, catalog)}};
        out << row.dump() << "\n";
    }
    record_stage(opts, {{"catalog", catalog.hash()}}, "baseline-prompts", {args.out});
    std::cout << "baseline-prompts: " << contents.size() << " prompts -> " << args.out << "\n";
}

struct InferArgs {
    std::string prompts;
    std::string out = "predictions.jsonl";
    std::string mock_table;
    bool mock_corrupt = false;
    bool resume = false;
    bool raw = false;
    int concurrency = 1;
    std::string model;
};

void run_infer(const GlobalOptions& opts, const InferArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto backend_config = backend_config_from(opts, load_config_json(opts));
    if (!args.mock_table.empty()) backend_config.mock_table_path = args.mock_table;
    if (args.mock_corrupt) backend_config.mock_corrupt = true;
    if (!args.model.empty()) backend_config.model_id = args.model;
    backend_config.validate();

    auto backend = sii::make_backend(backend_config);
    auto items = sii::load_prompts_jsonl(args.prompts);

    sii::InferenceOptions options;
    options.output_path = args.out;
    options.resume = args.resume;
    options.concurrency = args.concurrency;
    options.parse_records = !args.raw;
    auto outcome = sii::run_inference_batch(items, *backend, catalog, options);
    print_warnings(outcome.diagnostics);

    record_stage(opts, {{"catalog", catalog.hash()}, {"backend", backend_config.hash()}}, "infer",
                 {args.out});
    std::cout << "infer: " << outcome.completed << " completed, " << outcome.resumed
              << " resumed, " << outcome.failed << " failed -> " << args.out << "\n";
}

struct EvalArgs {
    std::string pred;
    std::string gold;
    std::string out;
    std::string manual;     // ner only
    std::string selection;  // subtasks only
};

void run_eval_ner(const GlobalOptions& opts, const EvalArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto golds = sii::load_gold_jsonl(args.gold, catalog);
    std::vector<std::string> diagnostics;
    auto preds = sii::load_predictions_jsonl(args.pred, catalog, &diagnostics);
    print_warnings(diagnostics);

    auto rows = sii::aggregate_ner(align_predictions(preds, golds, catalog), gold_records(golds),
                                   catalog);
    if (!args.manual.empty()) {
        auto manual = sii::ingest_manual_scores(args.manual, catalog);
        emit_report(sii::render_ner_table(rows, &manual), args.out);
    } else {
        emit_report(sii::render_ner_table(rows), args.out);
    }
    if (!args.out.empty())
        record_stage(opts, {{"catalog", catalog.hash()}}, "eval-ner", {args.out});
}

void run_eval_re(const GlobalOptions& opts, const EvalArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto golds = sii::load_gold_jsonl(args.gold, catalog);
    std::vector<std::string> diagnostics;
    auto preds = sii::load_predictions_jsonl(args.pred, catalog, &diagnostics);
    print_warnings(diagnostics);

    auto aligned = align_predictions(preds, golds, catalog);
    auto gold_list = gold_records(golds);
    std::vector<sii::MetricReport> rows;
    for (auto rel : sii::all_relation_types())
        rows.push_back(sii::aggregate_re(aligned, gold_list, rel, catalog));
    emit_report(sii::render_re_table(rows), args.out);
    if (!args.out.empty()) record_stage(opts, {{"catalog", catalog.hash()}}, "eval-re", {args.out});
}

void run_eval_subtasks(const GlobalOptions& opts, const EvalArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto golds = sii::load_gold_jsonl(args.gold, catalog);
    std::vector<std::string> diagnostics;
    auto preds = sii::load_predictions_jsonl(args.pred, catalog, &diagnostics);
    print_warnings(diagnostics);

    auto selection = sii::load_selection_jsonl(args.selection);
    auto scores = sii::score_exact_subtasks(align_predictions(preds, golds, catalog),
                                            gold_records(golds), selection);
    emit_report(sii::render_subtask_table(scores), args.out);
    if (!args.out.empty())
        record_stage(opts, {{"catalog", catalog.hash()}}, "eval-subtasks", {args.out});
}

struct SelectionArgs {
    std::string gold;
    std::string contents;
    std::string out = "subtask_selection.jsonl";
};

void run_subtask_selection(const GlobalOptions& opts, const SelectionArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    auto golds = sii::load_gold_jsonl(args.gold, catalog);
    auto by_id = contents_by_id(load_contents_jsonl(args.contents));
    auto tables = opts.config_path.empty() ? sii::RewriteTables::defaults()
                                           : sii::RewriteTables::load(opts.config_path);

    auto selection = sii::build_subtask_selection(gold_records(golds), by_id, catalog, tables);
    print_warnings(selection.diagnostics);
    sii::save_selection_jsonl(selection, args.out);

    std::map<std::string, std::size_t> counts;
    for (const auto& entry : selection.entries) ++counts[sii::subtask_name(entry.subtask)];
    std::cout << "subtask-selection: " << selection.entries.size() << " pairs (II "
              << counts["II"] << ", ER-U " << counts["ER-U"] << ", ER-T " << counts["ER-T"]
              << ") -> " << args.out << "\n";
}

struct MdpBuildArgs {
    std::string table;
    std::string task = "classification";
    std::string target = "PCE";
    std::string out = "mdp_samples.jsonl";
    std::string prompts_out = "mdp_prompts.jsonl";
    std::string gold_out = "mdp_gold.jsonl";
    std::string doc_column = "doc_id";
    std::string delimiter = ",";
};

void run_mdp_build(const GlobalOptions& opts, const MdpBuildArgs& args) {
    auto catalog = sii::load_catalog(config_path_or_none(opts));
    sii::FairTableOptions table_options;
    table_options.doc_ref_column = args.doc_column;
    if (args.delimiter.size() != 1) throw std::runtime_error("delimiter must be one character");
    table_options.delimiter = args.delimiter[0];
    auto fair_rows = sii::load_fair_rows(args.table, catalog, table_options);

    sii::MdpConfig mdp_config;
    sii::MdpTask task;
    if (args.task == "classification") {
        task.kind = sii::MdpTaskKind::classification;
    } else if (args.task == "regression") {
        task.kind = sii::MdpTaskKind::regression;
        task.target_name = args.target;
        mdp_config.target_column(args.target);  // unknown target fails here
    } else {
        throw std::runtime_error("task must be classification or regression");
    }

    auto filtered = sii::filter_jv_conditions(fair_rows, mdp_config);
    print_warnings(filtered.diagnostics);
    auto built = sii::build_mdp_samples(filtered.kept, task, catalog, mdp_config);
    print_warnings(built.diagnostics);

    auto out = open_output(args.out);
    auto prompts = open_output(args.prompts_out);
    auto gold = open_output(args.gold_out);
    for (const auto& sample : built.samples) {
        out << nlohmann::json{{"prompt", sample.prompt}, {"completion", sample.completion}}.dump()
            << "\n";
        prompts << nlohmann::json{{"doc_id", sample.doc_id}, {"prompt", sample.prompt}}.dump()
                << "\n";
        gold << nlohmann::json{{"doc_id", sample.doc_id}, {"gold", sample.gold}}.dump() << "\n";
    }

    record_stage(opts, {{"catalog", catalog.hash()}}, "mdp-build",
                 {args.out, args.prompts_out, args.gold_out});
    std::cout << "mdp build: " << built.samples.size() << " samples (" << filtered.kept.size()
              << " rows after condition filter) -> " << args.out << "\n";
}

struct MdpScoreArgs {
    std::string task = "classification";
    std::string target = "PCE";
    std::string preds;
    std::string gold;
    std::string out;
    std::string parity_out;
};

void run_mdp_score(const GlobalOptions& opts, const MdpScoreArgs& args) {
    std::map<std::string, std::string> pred_by_id;
    for (const auto& row : read_jsonl(args.preds))
        pred_by_id[row.at("doc_id").get<std::string>()] =
            row.value("completion", std::string());

    std::vector<std::string> preds;
    std::vector<std::string> gold_texts;
    for (const auto& row : read_jsonl(args.gold)) {
        auto doc_id = row.at("doc_id").get<std::string>();
        gold_texts.push_back(row.at("gold").get<std::string>());
        auto it = pred_by_id.find(doc_id);
        if (it == pred_by_id.end()) {
            std::cerr << "warn: no prediction for doc " << doc_id << "\n";
            preds.emplace_back();
        } else {
            preds.push_back(it->second);
        }
    }

    if (args.task == "classification") {
        std::vector<sii::ClassBin> golds;
        for (const auto& text : gold_texts) {
            auto bin = sii::bin_from_name(sii::trim(text));
            if (!bin) throw std::runtime_error("gold label is not a class bin: " + text);
            golds.push_back(*bin);
        }
        emit_report(sii::render_classification_report(sii::score_classification(preds, golds)),
                    args.out);
    } else if (args.task == "regression") {
        std::vector<double> golds;
        for (const auto& text : gold_texts) {
            auto value = sii::parse_prediction_number(text);
            if (!value) throw std::runtime_error("gold value is not a number: " + text);
            golds.push_back(*value);
        }
        std::vector<sii::RegressionRow> rows{{args.target, sii::score_regression(preds, golds)}};
        emit_report(sii::render_regression_table(rows), args.out);
        if (!args.parity_out.empty())
            write_text_file(args.parity_out, sii::render_parity_table(preds, golds));
    } else {
        throw std::runtime_error("task must be classification or regression");
    }
    if (!args.out.empty()) record_stage(opts, {}, "mdp-score", {args.out});
}

struct FinetuneArgs {
    std::string train_file;
    int epochs = -1;
    int batch_size = -1;
    double learning_rate_multiplier = -1;
    double prompt_loss_weight = -1;
    std::string base_model;
};

void run_finetune_submit(const GlobalOptions& opts, const FinetuneArgs& args) {
    auto config = load_config_json(opts);
    auto tune = finetune_config_from(config);
    if (args.epochs >= 0) tune.epochs = args.epochs;
    if (args.batch_size >= 0) tune.batch_size = args.batch_size;
    if (args.learning_rate_multiplier >= 0)
        tune.learning_rate_multiplier = args.learning_rate_multiplier;
    if (args.prompt_loss_weight >= 0) tune.prompt_loss_weight = args.prompt_loss_weight;
    if (!args.base_model.empty()) tune.base_model = args.base_model;

    auto backend_config = backend_config_from(opts, config);
    backend_config.validate();
    auto submission = sii::submit_finetune(args.train_file, tune, backend_config);

    record_stage(opts, {{"finetune", tune.hash()}, {"backend", backend_config.hash()}},
                 "finetune-submit", {args.train_file});
    std::cout << "finetune-submit: job " << submission.job_id;
    if (!submission.model_hint.empty()) std::cout << ", model " << submission.model_hint;
    std::cout << "\n";
}

struct ReportArgs {
    std::string run_id;
};

void run_report(const GlobalOptions& opts, const ReportArgs& args) {
    if (opts.manifest_path.empty()) throw std::runtime_error("report requires --manifest");
    auto manifest = sii::RunManifest::load(opts.manifest_path);
    if (manifest.run_id() != args.run_id)
        throw std::runtime_error("manifest holds run '" + manifest.run_id() + "', not '" +
                                 args.run_id + "'");

    std::ostringstream out;
    out << "run\t" << manifest.run_id() << "\n";
    for (const auto& [key, hash] : manifest.config_hashes())
        out << "config\t" << key << "\t" << hash << "\n";
    for (const auto& stage : manifest.stages()) {
        out << "stage\t" << stage.name << "\t" << stage.timestamp;
        for (const auto& output : stage.outputs) {
            out << "\t" << output;
            if (!std::filesystem::exists(output)) out << " (missing)";
        }
        out << "\n";
    }
    std::cout << out.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schema extraction pipeline: corpus to dataset to inference to evaluation"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "JSON config overlay file");
    app.add_option("--manifest", opts.manifest_path, "run manifest ledger path");
    app.add_option("--run-id", opts.run_id, "run identifier for a fresh manifest");
    app.add_option("--seed", opts.seed, "split shuffle seed");
    app.add_option("--top-n", opts.top_n, "documents kept after ranking");
    app.add_option("--train", opts.train_size, "training split size");
    app.add_option("--test", opts.test_size, "held-out split size");
    app.add_option("--token-budget", opts.token_budget, "prompt plus completion token budget");
    app.add_option("--backend", opts.backend_kind, "backend kind")
        ->check(CLI::IsMember({"remote", "mock"}));
    app.add_option("--rpm", opts.rpm, "request rate limit per minute (0 disables)");

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "extract experimental sections from a corpus");
    ingest->add_option("corpus_dir", ingest_args.corpus_dir, "directory holding article files")
        ->required();
    ingest
        ->add_option("doc_manifest", ingest_args.doc_manifest,
                     "JSONL rows {doc_id, path[, format]}")
        ->required();
    ingest->add_option("--out", ingest_args.out, "contents JSONL output");
    ingest->callback([&] { run_ingest(opts, ingest_args); });

    MatchArgs match_args;
    auto* match = app.add_subcommand("match", "rank documents by schema match rate");
    match->add_option("contents", match_args.contents, "contents JSONL from ingest")->required();
    match->add_option("fair_table", match_args.fair_table, "device table CSV")->required();
    match->add_option("--out", match_args.out, "ranked JSONL output");
    match->add_option("--audit", match_args.audit_out, "per-element verbatim rate TSV");
    match->add_option("--doc-column", match_args.doc_column, "document reference column");
    match->add_option("--delimiter", match_args.delimiter, "table delimiter");
    match->callback([&] { run_match(opts, match_args); });

    BuildDatasetArgs build_args;
    auto* build = app.add_subcommand("build-dataset", "split ranked documents into train/test");
    build->add_option("ranked", build_args.ranked, "ranked JSONL from match")->required();
    build->add_option("--train-out", build_args.train_out, "training JSONL");
    build->add_option("--test-out", build_args.test_out, "held-out JSONL");
    build->add_option("--prompts-out", build_args.prompts_out, "held-out prompts sidecar");
    build->add_option("--gold-out", build_args.gold_out, "held-out gold sidecar");
    build->add_option("--meta-out", build_args.meta_out, "dataset metadata JSON");
    build->callback([&] { run_build_dataset(opts, build_args); });

    BaselinePromptsArgs baseline_args;
    auto* baseline = app.add_subcommand("baseline-prompts", "zero-shot prompts for a contents file");
    baseline->add_option("contents", baseline_args.contents, "contents JSONL")->required();
    baseline->add_option("--out", baseline_args.out, "prompts JSONL output");
    baseline->callback([&] { run_baseline_prompts(opts, baseline_args); });

    InferArgs infer_args;
    auto* infer = app.add_subcommand("infer", "run prompts through a completion backend");
    infer->add_option("prompts", infer_args.prompts, "prompts JSONL {doc_id, prompt}")->required();
    infer->add_option("--out", infer_args.out, "predictions JSONL output");
    infer->add_option("--mock-table", infer_args.mock_table, "mock completion table JSONL");
    infer->add_flag("--mock-corrupt", infer_args.mock_corrupt,
                    "corrupt one word per mock completion");
    infer->add_flag("--resume", infer_args.resume, "skip doc_ids already in the output file");
    infer->add_flag("--raw", infer_args.raw, "skip record parsing");
    infer->add_option("--concurrency", infer_args.concurrency, "parallel requests")
        ->check(CLI::PositiveNumber);
    infer->add_option("--model", infer_args.model, "model identifier");
    infer->callback([&] { run_infer(opts, infer_args); });

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "score predictions against gold records");
    eval->require_subcommand(1);
    auto add_eval_common = [&](CLI::App* sub) {
        sub->add_option("pred", eval_args.pred, "predictions JSONL from infer")->required();
        sub->add_option("gold", eval_args.gold, "gold JSONL sidecar")->required();
        sub->add_option("--out", eval_args.out, "also write the table to a file");
    };
    auto* eval_ner = eval->add_subcommand("ner", "word-basis precision/recall/F1 by element set");
    add_eval_common(eval_ner);
    eval_ner->add_option("--manual", eval_args.manual, "manual 0/1/2 score CSV");
    eval_ner->callback([&] { run_eval_ner(opts, eval_args); });
    auto* eval_re = eval->add_subcommand("re", "collocation precision/recall/F1 per relation");
    add_eval_common(eval_re);
    eval_re->callback([&] { run_eval_re(opts, eval_args); });
    auto* eval_subtasks =
        eval->add_subcommand("subtasks", "exact-match accuracy over selected hard pairs");
    add_eval_common(eval_subtasks);
    eval_subtasks->add_option("--selection", eval_args.selection, "selection JSONL")->required();
    eval_subtasks->callback([&] { run_eval_subtasks(opts, eval_args); });

    SelectionArgs selection_args;
    auto* selection =
        app.add_subcommand("subtask-selection", "pick and label non-verbatim gold pairs");
    selection->add_option("gold", selection_args.gold, "gold JSONL sidecar")->required();
    selection->add_option("contents", selection_args.contents, "contents JSONL")->required();
    selection->add_option("--out", selection_args.out, "selection JSONL output");
    selection->callback([&] { run_subtask_selection(opts, selection_args); });

    auto* mdp = app.add_subcommand("mdp", "device performance prediction tasks");
    mdp->require_subcommand(1);
    MdpBuildArgs mdp_build_args;
    auto* mdp_build = mdp->add_subcommand("build", "build prediction samples from a device table");
    mdp_build->add_option("--table", mdp_build_args.table, "device table CSV")->required();
    mdp_build->add_option("--task", mdp_build_args.task, "classification or regression");
    mdp_build->add_option("--target", mdp_build_args.target, "regression target name");
    mdp_build->add_option("--out", mdp_build_args.out, "samples JSONL");
    mdp_build->add_option("--prompts-out", mdp_build_args.prompts_out, "prompts sidecar");
    mdp_build->add_option("--gold-out", mdp_build_args.gold_out, "gold sidecar");
    mdp_build->add_option("--doc-column", mdp_build_args.doc_column, "document reference column");
    mdp_build->add_option("--delimiter", mdp_build_args.delimiter, "table delimiter");
    mdp_build->callback([&] { run_mdp_build(opts, mdp_build_args); });

    MdpScoreArgs mdp_score_args;
    auto* mdp_score = mdp->add_subcommand("score", "score prediction completions");
    mdp_score->add_option("--task", mdp_score_args.task, "classification or regression");
    mdp_score->add_option("--target", mdp_score_args.target, "regression target name");
    mdp_score->add_option("--preds", mdp_score_args.preds, "predictions JSONL")->required();
    mdp_score->add_option("--gold", mdp_score_args.gold, "gold sidecar JSONL")->required();
    mdp_score->add_option("--out", mdp_score_args.out, "also write the report to a file");
    mdp_score->add_option("--parity", mdp_score_args.parity_out, "gold/pred pair TSV");
    mdp_score->callback([&] { run_mdp_score(opts, mdp_score_args); });

    FinetuneArgs finetune_args;
    auto* finetune = app.add_subcommand("finetune-submit", "submit a training file");
    finetune->add_option("train_file", finetune_args.train_file, "training JSONL")->required();
    finetune->add_option("--epochs", finetune_args.epochs, "training epochs");
    finetune->add_option("--batch-size", finetune_args.batch_size, "batch size");
    finetune->add_option("--lr-mult", finetune_args.learning_rate_multiplier,
                         "learning rate multiplier");
    finetune->add_option("--prompt-loss", finetune_args.prompt_loss_weight, "prompt loss weight");
    finetune->add_option("--base-model", finetune_args.base_model, "base model identifier");
    finetune->callback([&] { run_finetune_submit(opts, finetune_args); });

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "print the run ledger");
    report->add_option("run_id", report_args.run_id, "expected run identifier")->required();
    report->callback([&] { run_report(opts, report_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // help and version requests
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sii::BackendError& e) {
        std::cerr << "error: backend: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
