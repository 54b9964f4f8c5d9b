#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sii/catalog.hpp"
#include "sii/corpus.hpp"
#include "sii/matcher.hpp"

namespace sii {

// One prompt/completion pair ready for fine-tuning or inference.
struct TrainingSample {
    std::string doc_id;
    std::string prompt;
    std::string completion;
    DeviceRecord gold;
};

inline constexpr const char* kPromptTerminator = "\n";
inline constexpr const char* kCompletionStop = "\nEND";

struct SplitConfig {
    std::size_t train_size = 360;
    std::size_t test_size = 40;
    std::uint64_t seed = 42;
};

struct FineTuneConfig {
    int epochs = 4;
    int batch_size = 1;
    double learning_rate_multiplier = 0.1;
    double prompt_loss_weight = 0.01;
    std::string base_model = "davinci";

    std::string hash() const;
};

// Joins content and schema into the completion-format pair. Throws if the
// content fails the token gate.
TrainingSample build_sample(const ExtractedContent& content, const DeviceRecord& gold,
                            const ElementCatalog& catalog, const TokenGate& gate = {});

// Zero-shot prompt: instruction, paragraphs, then one line per element.
std::string build_baseline_prompt(const ExtractedContent& content, const ElementCatalog& catalog);

struct DatasetSplit {
    std::vector<TrainingSample> train;
    std::vector<TrainingSample> test;
};

// Deterministic shuffle-then-cut split. Requires train_size + test_size ==
// samples.size() and unique doc_ids.
DatasetSplit split_dataset(std::vector<TrainingSample> samples, const SplitConfig& config);

// Serializes samples as JSONL {"prompt": ..., "completion": ...}. Returns
// warnings (currently only for an empty sample list).
std::vector<std::string> emit_jsonl(const std::vector<TrainingSample>& samples,
                                    const std::string& path);

// Prompt-only and gold-only sidecars for the held-out set.
void emit_prompts_jsonl(const std::vector<TrainingSample>& samples, const std::string& path);
void emit_gold_jsonl(const std::vector<TrainingSample>& samples, const std::string& path);

struct GoldRow {
    std::string doc_id;
    DeviceRecord record;
};

std::vector<GoldRow> load_gold_jsonl(const std::string& path, const ElementCatalog& catalog);

}  // namespace sii
