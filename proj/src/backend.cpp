#include "sii/backend.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "sii/text.hpp"

namespace sii {

void BackendConfig::validate() const {
    if (kind != "remote" && kind != "mock") {
        throw std::runtime_error("backend kind must be remote or mock, got \"" + kind + "\"");
    }
    if (temperature < 0.0 || temperature > 2.0) {
        throw std::runtime_error("temperature must be in [0,2], got " +
                                 std::to_string(temperature));
    }
    if (max_tokens <= 0) throw std::runtime_error("max_tokens must be positive");
    if (max_retries < 0) throw std::runtime_error("max_retries must be non-negative");
    if (requests_per_minute < 0) throw std::runtime_error("requests_per_minute must be >= 0");
    if (retry_backoff_ms < 0) throw std::runtime_error("retry_backoff_ms must be >= 0");
}

std::string BackendConfig::hash() const {
    std::ostringstream canon;
    canon << kind << '|' << endpoint << '|' << completion_path << '|' << finetune_path << '|'
          << model_id << '|' << max_tokens << '|' << temperature << '|' << stop << '|'
          << timeout_ms << '|' << max_retries << '|' << requests_per_minute << '|'
          << retry_backoff_ms << '|' << credential_env << '|' << prompt_field << '|'
          << model_field << '|' << response_text_path << '|' << mock_table_path << '|'
          << mock_corrupt;
    return fnv1a64_hex(canon.str());
}

namespace {

std::string strip_stop(std::string text, const std::string& stop) {
    if (stop.empty()) return text;
    auto at = text.find(stop);
    if (at != std::string::npos) text.erase(at);
    return text;
}

}  // namespace

MockBackend::MockBackend(std::map<std::string, std::string> table_by_hash, bool corrupt,
                         std::string stop)
    : table_(std::move(table_by_hash)), corrupt_(corrupt), stop_(std::move(stop)) {}

MockBackend MockBackend::from_jsonl(const std::string& path, bool corrupt,
                                    const std::string& stop) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mock table: " + path);
    std::map<std::string, std::string> table;
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
        std::string hash;
        if (row.contains("prompt_hash")) {
            hash = row.at("prompt_hash").get<std::string>();
        } else if (row.contains("prompt")) {
            hash = fnv1a64_hex(row.at("prompt").get<std::string>());
        } else {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": row needs prompt or prompt_hash");
        }
        table[hash] = row.at("completion").get<std::string>();
    }
    return MockBackend(std::move(table), corrupt, stop);
}

std::string MockBackend::corrupt_completion(const std::string& completion) {
    auto lines = split_lines(completion);
    for (auto& line : lines) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string value = line.substr(colon + 1);
        if (trim(value).empty() || trim(value) == kUnknownValue) continue;

        // replace the first item of the first informative value, keep the rest verbatim
        std::size_t sep_at = std::string::npos;
        for (const auto& sep : evaluation_separators()) {
            auto at = value.find(sep);
            if (at < sep_at) sep_at = at;
        }
        if (sep_at == std::string::npos) {
            line = line.substr(0, colon + 1) + " CORRUPTED";
        } else {
            line = line.substr(0, colon + 1) + " CORRUPTED" + value.substr(sep_at);
        }

        std::string out;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (i) out += "\n";
            out += lines[i];
        }
        return out;
    }
    return completion;
}

CompletionExchange MockBackend::complete(const std::string& prompt) {
    auto it = table_.find(fnv1a64_hex(prompt));
    if (it == table_.end()) {
        throw BackendError("no mock completion for prompt hash " + fnv1a64_hex(prompt), 404,
                           false);
    }
    CompletionExchange exchange;
    exchange.prompt = prompt;
    exchange.completion = strip_stop(it->second, stop_);
    if (corrupt_) exchange.completion = corrupt_completion(exchange.completion);
    exchange.backend = name();
    return exchange;
}

std::string extract_json_path(const std::string& body, const std::string& path) {
    nlohmann::json node;
    try {
        node = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unparseable response body: ") + e.what(), 0, false);
    }
    for (const auto& step : split_on_separators(path, {"."})) {
        if (node.is_array()) {
            std::size_t index = 0;
            try {
                index = std::stoul(step);
            } catch (const std::exception&) {
                throw BackendError("response path step \"" + step + "\" is not an array index",
                                   0, false);
            }
            if (index >= node.size()) {
                throw BackendError("response path index " + step + " out of range", 0, false);
            }
            node = node[index];
        } else if (node.is_object() && node.contains(step)) {
            node = node.at(step);
        } else {
            throw BackendError("response lacks field \"" + step + "\"", 0, false);
        }
    }
    if (!node.is_string()) throw BackendError("response text field is not a string", 0, false);
    return node.get<std::string>();
}

class RateLimiter {
public:
    explicit RateLimiter(int requests_per_minute) {
        if (requests_per_minute > 0) {
            interval_ = std::chrono::milliseconds(60000 / requests_per_minute);
        }
    }

    void acquire() {
        if (interval_.count() == 0) return;
        std::chrono::steady_clock::time_point start;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto now = std::chrono::steady_clock::now();
            start = next_ > now ? next_ : now;
            next_ = start + interval_;
        }
        std::this_thread::sleep_until(start);
    }

private:
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_{};
    std::chrono::milliseconds interval_{0};
};

namespace {

HttpResponse default_transport(const std::string& endpoint, const std::string& path,
                               const std::string& body,
                               const std::map<std::string, std::string>& headers,
                               int timeout_ms) {
    httplib::Client client(endpoint);
    client.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config, TransportFn transport)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : TransportFn(default_transport)),
      limiter_(std::make_shared<RateLimiter>(config_.requests_per_minute)) {
    config_.validate();
}

CompletionExchange HttpBackend::complete(const std::string& prompt) {
    const char* credential = std::getenv(config_.credential_env.c_str());
    if (!credential || !*credential) {
        throw BackendError("credential environment variable " + config_.credential_env +
                               " is not set",
                           0, false);
    }

    nlohmann::json payload = {
        {config_.model_field, config_.model_id}, {config_.prompt_field, prompt},
        {"max_tokens", config_.max_tokens},      {"temperature", config_.temperature},
        {"stop", config_.stop},
    };
    std::map<std::string, std::string> headers = {
        {"Authorization", std::string("Bearer ") + credential}};

    std::string last_error;
    int last_status = 0;
    for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
        limiter_->acquire();
        auto t0 = std::chrono::steady_clock::now();
        auto response =
            transport_(config_.endpoint, config_.completion_path, payload.dump(), headers,
                       config_.timeout_ms);
        auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();

        bool retryable = false;
        if (!response.error.empty()) {
            retryable = true;
            last_error = "transport: " + response.error;
            last_status = 0;
        } else if (response.status >= 200 && response.status < 300) {
            CompletionExchange exchange;
            exchange.prompt = prompt;
            exchange.completion =
                strip_stop(extract_json_path(response.body, config_.response_text_path),
                           config_.stop);
            exchange.latency_ms = latency;
            exchange.attempt_count = attempt;
            exchange.backend = name();
            return exchange;
        } else if (response.status == 401 || response.status == 403) {
            throw BackendError("authentication failed (status " +
                                   std::to_string(response.status) + ")",
                               response.status, false);
        } else if (response.status == 429 || response.status >= 500) {
            retryable = true;
            last_error = "status " + std::to_string(response.status);
            last_status = response.status;
        } else {
            throw BackendError("request rejected (status " + std::to_string(response.status) +
                                   "): " + response.body.substr(0, 200),
                               response.status, false);
        }

        if (retryable && attempt <= config_.max_retries) {
            int shift = attempt - 1 > 20 ? 20 : attempt - 1;
            auto backoff = std::chrono::milliseconds(
                static_cast<long long>(config_.retry_backoff_ms) * (1LL << shift));
            std::this_thread::sleep_for(backoff);
        }
    }
    throw BackendError("retries exhausted after " + std::to_string(config_.max_retries + 1) +
                           " attempts; last failure: " + last_error,
                       last_status, true);
}

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config,
                                                TransportFn transport) {
    config.validate();
    if (config.kind == "mock") {
        if (config.mock_table_path.empty()) {
            throw std::runtime_error("mock backend requires a completion table file");
        }
        return std::make_unique<MockBackend>(
            MockBackend::from_jsonl(config.mock_table_path, config.mock_corrupt, config.stop));
    }
    return std::make_unique<HttpBackend>(config, std::move(transport));
}

namespace {

// Buffers out-of-order results and flushes them to the file in input order,
// so interrupted runs leave a clean doc_id prefix behind.
class OrderedWriter {
public:
    OrderedWriter(const std::string& path, bool append) {
        if (path.empty()) return;
        out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
        open_ = true;
    }

    void deliver(std::size_t index, std::string line) {
        if (!open_) return;
        std::lock_guard<std::mutex> lock(mu_);
        pending_[index] = std::move(line);
        while (!pending_.empty() && pending_.begin()->first == next_) {
            out_ << pending_.begin()->second << "\n";
            out_.flush();
            pending_.erase(pending_.begin());
            ++next_;
        }
    }

private:
    std::ofstream out_;
    bool open_ = false;
    std::mutex mu_;
    std::size_t next_ = 0;
    std::map<std::size_t, std::string> pending_;
};

std::string summarize_parse(const std::string& doc_id, const ParsedCompletion& parsed) {
    std::size_t missing = 0, unmatched = 0, duplicate = 0;
    for (const auto& d : parsed.diagnostics) {
        switch (d.issue) {
            case ParseIssue::missing_key: ++missing; break;
            case ParseIssue::unmatched_line: ++unmatched; break;
            case ParseIssue::duplicate_key: ++duplicate; break;
        }
    }
    std::ostringstream out;
    out << doc_id << ": ";
    const char* sep = "";
    if (missing) {
        out << missing << " missing keys";
        sep = ", ";
    }
    if (unmatched) {
        out << sep << unmatched << " unmatched lines";
        sep = ", ";
    }
    if (duplicate) out << sep << duplicate << " duplicate keys";
    return out.str();
}

}  // namespace

InferenceOutcome run_inference_batch(const std::vector<InferenceItem>& items,
                                     CompletionBackend& backend, const ElementCatalog& catalog,
                                     const InferenceOptions& options) {
    InferenceOutcome outcome;
    outcome.completions.resize(items.size());
    std::vector<std::string> errors(items.size());
    std::vector<bool> done(items.size(), false);

    if (options.resume && !options.output_path.empty()) {
        std::ifstream in(options.output_path, std::ios::binary);
        if (in) {
            std::map<std::string, std::string> finished;  // last successful row wins
            std::string line;
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                nlohmann::json row;
                try {
                    row = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception&) {
                    continue;  // half-written tail line from an interrupted run
                }
                if (!row.contains("doc_id") || !row.contains("completion")) continue;
                if (row.contains("error")) continue;  // failed rows get retried
                finished[row.at("doc_id").get<std::string>()] =
                    row.at("completion").get<std::string>();
            }
            for (std::size_t i = 0; i < items.size(); ++i) {
                auto it = finished.find(items[i].doc_id);
                if (it != finished.end()) {
                    done[i] = true;
                    outcome.completions[i] = it->second;
                    ++outcome.resumed;
                }
            }
        }
    }

    std::vector<std::size_t> to_run;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!done[i]) to_run.push_back(i);
    }

    OrderedWriter writer(options.output_path, options.resume);
    std::mutex state_mu;
    std::atomic<std::size_t> cursor{0};

    auto worker = [&]() {
        while (true) {
            std::size_t slot = cursor.fetch_add(1);
            if (slot >= to_run.size()) return;
            std::size_t index = to_run[slot];
            const auto& item = items[index];

            nlohmann::json row;
            row["doc_id"] = item.doc_id;
            try {
                auto exchange = backend.complete(item.prompt);
                row["completion"] = exchange.completion;
                std::lock_guard<std::mutex> lock(state_mu);
                outcome.completions[index] = exchange.completion;
                ++outcome.completed;
            } catch (const BackendError& e) {
                row["completion"] = "";
                row["error"] = e.what();
                std::lock_guard<std::mutex> lock(state_mu);
                errors[index] = e.what();
                ++outcome.failed;
            }
            writer.deliver(slot, row.dump());
        }
    };

    int threads = options.concurrency > 1 ? options.concurrency : 1;
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!errors[i].empty()) {
            outcome.diagnostics.push_back(items[i].doc_id + ": " + errors[i]);
        }
        if (options.parse_records) {
            auto parsed = parse_completion(outcome.completions[i], catalog, items[i].doc_id);
            if (!parsed.diagnostics.empty() && errors[i].empty()) {
                outcome.diagnostics.push_back(summarize_parse(items[i].doc_id, parsed));
            }
            outcome.records.push_back(std::move(parsed.record));
        }
    }
    return outcome;
}

std::vector<InferenceItem> load_prompts_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<InferenceItem> items;
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
        items.push_back(
            {row.at("doc_id").get<std::string>(), row.at("prompt").get<std::string>()});
    }
    return items;
}

std::vector<DeviceRecord> load_predictions_jsonl(const std::string& path,
                                                 const ElementCatalog& catalog,
                                                 std::vector<std::string>* diagnostics) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::string> order;
    std::map<std::string, std::string> completions;
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
        auto doc_id = row.at("doc_id").get<std::string>();
        if (!completions.count(doc_id)) order.push_back(doc_id);
        completions[doc_id] = row.at("completion").get<std::string>();
    }

    std::vector<DeviceRecord> records;
    for (const auto& doc_id : order) {
        auto parsed = parse_completion(completions.at(doc_id), catalog, doc_id);
        if (diagnostics && !parsed.diagnostics.empty()) {
            diagnostics->push_back(summarize_parse(doc_id, parsed));
        }
        records.push_back(std::move(parsed.record));
    }
    return records;
}

FineTuneSubmission submit_finetune(const std::string& training_file, const FineTuneConfig& tune,
                                   const BackendConfig& config, TransportFn transport) {
    std::ifstream in(training_file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open training file: " + training_file);
    std::ostringstream content;
    content << in.rdbuf();

    if (config.kind == "mock") {
        auto job = "mockft-" + fnv1a64_hex(content.str() + "|" + tune.hash());
        return {job, job + "-model"};
    }

    const char* credential = std::getenv(config.credential_env.c_str());
    if (!credential || !*credential) {
        throw BackendError("credential environment variable " + config.credential_env +
                               " is not set",
                           0, false);
    }
    nlohmann::json payload = {
        {"training_file", training_file},
        {"model", tune.base_model},
        {"n_epochs", tune.epochs},
        {"batch_size", tune.batch_size},
        {"learning_rate_multiplier", tune.learning_rate_multiplier},
        {"prompt_loss_weight", tune.prompt_loss_weight},
    };
    std::map<std::string, std::string> headers = {
        {"Authorization", std::string("Bearer ") + credential}};
    auto send = transport ? transport : TransportFn(default_transport);
    auto response = send(config.endpoint, config.finetune_path, payload.dump(), headers,
                         config.timeout_ms);
    if (!response.error.empty()) {
        throw BackendError("transport: " + response.error, 0, true);
    }
    if (response.status < 200 || response.status >= 300) {
        throw BackendError("job submission rejected (status " + std::to_string(response.status) +
                               "): " + response.body.substr(0, 200),
                           response.status, false);
    }
    FineTuneSubmission submission;
    submission.job_id = extract_json_path(response.body, "id");
    nlohmann::json body = nlohmann::json::parse(response.body);
    if (body.contains("fine_tuned_model") && body["fine_tuned_model"].is_string()) {
        submission.model_hint = body["fine_tuned_model"].get<std::string>();
    }
    return submission;
}

}  // namespace sii
