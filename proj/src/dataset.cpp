#include "sii/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sii/text.hpp"

namespace sii {

std::string FineTuneConfig::hash() const {
    std::ostringstream canon;
    canon << epochs << '|' << batch_size << '|' << learning_rate_multiplier << '|'
          << prompt_loss_weight << '|' << base_model;
    return fnv1a64_hex(canon.str());
}

TrainingSample build_sample(const ExtractedContent& content, const DeviceRecord& gold,
                            const ElementCatalog& catalog, const TokenGate& gate) {
    auto gated = gate_token_limit(content, gate);
    if (!gated.pass) {
        throw std::runtime_error("content for '" + content.doc_id +
                                 "' exceeds token budget: " + gated.reason);
    }
    TrainingSample sample;
    sample.doc_id = content.doc_id;
    sample.prompt = content.text + kPromptTerminator;
    sample.completion = " " + serialize_completion(gold, catalog) + kCompletionStop;
    sample.gold = gold;
    return sample;
}

std::string build_baseline_prompt(const ExtractedContent& content, const ElementCatalog& catalog) {
    std::ostringstream out;
    out << "Read the following paragraphs and extract the information below:\n\n";
    out << content.text << "\n\n";
    for (const auto& element : catalog.elements()) {
        out << element.prompt_line() << "\n";
    }
    return out.str();
}

DatasetSplit split_dataset(std::vector<TrainingSample> samples, const SplitConfig& config) {
    if (samples.size() != config.train_size + config.test_size) {
        throw std::runtime_error("split expects " +
                                 std::to_string(config.train_size + config.test_size) +
                                 " samples, got " + std::to_string(samples.size()));
    }
    std::set<std::string> seen;
    for (const auto& s : samples) {
        if (!seen.insert(s.doc_id).second) {
            throw std::runtime_error("duplicate doc_id in split input: " + s.doc_id);
        }
    }

    // Hand-rolled Fisher-Yates: std::shuffle output is not pinned across
    // standard library implementations, and the split must be reproducible
    // from the seed alone.
    std::mt19937_64 rng(config.seed);
    for (std::size_t i = samples.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(samples[i - 1], samples[j]);
    }

    DatasetSplit split;
    split.train.assign(samples.begin(),
                       samples.begin() + static_cast<std::ptrdiff_t>(config.train_size));
    split.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(config.train_size),
                      samples.end());
    return split;
}

namespace {

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

}  // namespace

std::vector<std::string> emit_jsonl(const std::vector<TrainingSample>& samples,
                                    const std::string& path) {
    std::vector<std::string> warnings;
    if (samples.empty()) warnings.push_back("no samples to write: " + path);
    auto out = open_for_write(path);
    for (const auto& s : samples) {
        nlohmann::json row = {{"prompt", s.prompt}, {"completion", s.completion}};
        out << row.dump() << "\n";
    }
    return warnings;
}

void emit_prompts_jsonl(const std::vector<TrainingSample>& samples, const std::string& path) {
    auto out = open_for_write(path);
    for (const auto& s : samples) {
        nlohmann::json row = {{"doc_id", s.doc_id}, {"prompt", s.prompt}};
        out << row.dump() << "\n";
    }
}

void emit_gold_jsonl(const std::vector<TrainingSample>& samples, const std::string& path) {
    auto out = open_for_write(path);
    for (const auto& s : samples) {
        nlohmann::json values = nlohmann::json::object();
        for (const auto& [key, value] : s.gold.values) values[key] = value;
        nlohmann::json row = {{"doc_id", s.doc_id}, {"values", values}};
        out << row.dump() << "\n";
    }
}

std::vector<GoldRow> load_gold_jsonl(const std::string& path, const ElementCatalog& catalog) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<GoldRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        GoldRow gold;
        gold.doc_id = row.at("doc_id").get<std::string>();
        gold.record = DeviceRecord::with_defaults(catalog, gold.doc_id);
        for (const auto& [key, value] : row.at("values").items()) {
            gold.record.set(key, value.get<std::string>());
        }
        rows.push_back(std::move(gold));
    }
    return rows;
}

}  // namespace sii
