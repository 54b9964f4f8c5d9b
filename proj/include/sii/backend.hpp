#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sii/catalog.hpp"
#include "sii/dataset.hpp"

namespace sii {

struct BackendConfig {
    std::string kind = "mock";  // "remote" or "mock"
    std::string endpoint = "https://api.openai.com";
    std::string completion_path = "/v1/completions";
    std::string finetune_path = "/v1/fine-tunes";
    std::string model_id = "davinci";
    int max_tokens = 450;
    double temperature = 0.0;
    std::string stop = "\nEND";
    int timeout_ms = 60000;
    int max_retries = 5;
    int requests_per_minute = 60;
    int retry_backoff_ms = 500;  // doubles per extra attempt
    // The credential itself stays in the environment and out of every log,
    // report, and hash.
    std::string credential_env = "SII_API_KEY";
    std::string prompt_field = "prompt";
    std::string model_field = "model";
    std::string response_text_path = "choices.0.text";
    std::string mock_table_path;
    bool mock_corrupt = false;

    void validate() const;
    std::string hash() const;
};

struct CompletionExchange {
    std::string prompt;
    std::string completion;  // stop sequence already stripped
    long long latency_ms = 0;
    int attempt_count = 1;
    std::string backend;
};

class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& message, int status = 0, bool retryable = false)
        : std::runtime_error(message), status_(status), retryable_(retryable) {}

    int status() const { return status_; }
    bool retryable() const { return retryable_; }

private:
    int status_;
    bool retryable_;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual CompletionExchange complete(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

/// Offline deterministic backend over a prompt-hash -> completion table.
/// Table rows are JSONL objects carrying "completion" plus either "prompt"
/// or a precomputed "prompt_hash". With corrupt=true the first known-key
/// line whose value is not Unknown gets its first word replaced, which
/// models a confidently wrong prediction.
class MockBackend : public CompletionBackend {
public:
    explicit MockBackend(std::map<std::string, std::string> table_by_hash, bool corrupt = false,
                         std::string stop = "\nEND");
    static MockBackend from_jsonl(const std::string& path, bool corrupt = false,
                                  const std::string& stop = "\nEND");

    CompletionExchange complete(const std::string& prompt) override;
    std::string name() const override { return "mock"; }

    static std::string corrupt_completion(const std::string& completion);

private:
    std::map<std::string, std::string> table_;
    bool corrupt_;
    std::string stop_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::string error;  // non-empty means the transport itself failed
};

using TransportFn = std::function<HttpResponse(const std::string& endpoint, const std::string& path,
                                               const std::string& body,
                                               const std::map<std::string, std::string>& headers,
                                               int timeout_ms)>;

/// Walks a dotted path ("choices.0.text") through objects and arrays.
std::string extract_json_path(const std::string& body, const std::string& path);

/// Remote completion client: retries timeouts, rate-limit and server-side
/// statuses with exponential backoff, fails fast on other client errors, and
/// spaces request starts to honor requests_per_minute.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(BackendConfig config, TransportFn transport = {});

    CompletionExchange complete(const std::string& prompt) override;
    std::string name() const override { return "remote"; }

private:
    BackendConfig config_;
    TransportFn transport_;
    std::shared_ptr<class RateLimiter> limiter_;
};

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config,
                                                TransportFn transport = {});

struct InferenceItem {
    std::string doc_id;
    std::string prompt;
};

struct InferenceOptions {
    std::string output_path;  // JSONL {"doc_id","completion"[,"error"]}
    bool resume = false;
    int concurrency = 1;  // >1 still writes rows in input order
    bool parse_records = true;
};

struct InferenceOutcome {
    std::vector<DeviceRecord> records;  // aligned with input items
    std::vector<std::string> completions;
    std::vector<std::string> diagnostics;
    std::size_t completed = 0;
    std::size_t resumed = 0;
    std::size_t failed = 0;
};

/// Runs every prompt through the backend, appending one JSONL row per item
/// as soon as it finishes. Per-item failures become all-missing records and
/// diagnostics, never batch aborts. With resume=true, doc_ids already in the
/// output file are not re-requested.
InferenceOutcome run_inference_batch(const std::vector<InferenceItem>& items,
                                     CompletionBackend& backend, const ElementCatalog& catalog,
                                     const InferenceOptions& options);

std::vector<InferenceItem> load_prompts_jsonl(const std::string& path);

/// Reads an inference output file back into records (for eval commands).
std::vector<DeviceRecord> load_predictions_jsonl(const std::string& path,
                                                 const ElementCatalog& catalog,
                                                 std::vector<std::string>* diagnostics = nullptr);

struct FineTuneSubmission {
    std::string job_id;
    std::string model_hint;
};

/// Thin job submission: posts the request (remote) or derives a stable job
/// id from the file content (mock). Job monitoring is out of scope.
FineTuneSubmission submit_finetune(const std::string& training_file, const FineTuneConfig& tune,
                                   const BackendConfig& config, TransportFn transport = {});

}  // namespace sii
