#include "sii/manifest.hpp"

#include <ctime>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace sii {

RunManifest::RunManifest(std::string run_id, std::map<std::string, std::string> config_hashes)
    : run_id_(std::move(run_id)), config_hashes_(std::move(config_hashes)) {}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    RunManifest manifest;
    manifest.run_id_ = doc.at("run_id").get<std::string>();
    for (const auto& [key, value] : doc.at("config_hashes").items()) {
        manifest.config_hashes_[key] = value.get<std::string>();
    }
    for (const auto& stage : doc.value("stages", nlohmann::json::array())) {
        StageRecord record;
        record.name = stage.at("name").get<std::string>();
        for (const auto& output : stage.at("outputs")) {
            record.outputs.push_back(output.get<std::string>());
        }
        record.timestamp = stage.value("timestamp", "");
        // .items() must run on a named object, not on value()'s temporary
        nlohmann::json stage_hashes = stage.value("config_hashes", nlohmann::json::object());
        for (const auto& [key, value] : stage_hashes.items()) {
            record.config_hashes[key] = value.get<std::string>();
        }
        manifest.stages_.push_back(std::move(record));
    }
    return manifest;
}

void RunManifest::save(const std::string& path) const {
    nlohmann::json doc;
    doc["run_id"] = run_id_;
    doc["config_hashes"] = config_hashes_;
    doc["stages"] = nlohmann::json::array();
    for (const auto& stage : stages_) {
        nlohmann::json record;
        record["name"] = stage.name;
        record["outputs"] = stage.outputs;
        record["timestamp"] = stage.timestamp;
        record["config_hashes"] = stage.config_hashes;
        doc["stages"].push_back(std::move(record));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << doc.dump(2) << "\n";
}

const StageRecord* RunManifest::stage(const std::string& name) const {
    const StageRecord* found = nullptr;
    for (const auto& record : stages_) {
        if (record.name == name) found = &record;
    }
    return found;
}

void RunManifest::merge_config_hashes(const std::map<std::string, std::string>& current) {
    for (const auto& [key, value] : current) {
        auto it = config_hashes_.find(key);
        if (it == config_hashes_.end()) {
            config_hashes_[key] = value;
        } else if (it->second != value) {
            throw std::runtime_error("config hash mismatch for " + key + ": manifest has " +
                                     it->second + ", current is " + value);
        }
    }
}

void RunManifest::record_stage(const std::string& name, std::vector<std::string> outputs) {
    StageRecord record;
    record.name = name;
    record.outputs = std::move(outputs);
    record.timestamp = utc_timestamp();
    record.config_hashes = config_hashes_;
    stages_.push_back(std::move(record));
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buf;
}

}  // namespace sii
