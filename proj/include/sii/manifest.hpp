#pragma once

#include <map>
#include <string>
#include <vector>

namespace sii {

struct StageRecord {
    std::string name;
    std::vector<std::string> outputs;
    std::string timestamp;
    // snapshot of the run's config hashes when the stage was produced
    std::map<std::string, std::string> config_hashes;
};

/// Ledger tying every stage output to the configuration hashes it was built
/// under. Stages communicate only through the files recorded here.
class RunManifest {
public:
    RunManifest() = default;
    RunManifest(std::string run_id, std::map<std::string, std::string> config_hashes);

    static RunManifest load(const std::string& path);
    void save(const std::string& path) const;

    const std::string& run_id() const { return run_id_; }
    const std::map<std::string, std::string>& config_hashes() const { return config_hashes_; }
    const std::vector<StageRecord>& stages() const { return stages_; }

    /// Latest record for a stage name, or null.
    const StageRecord* stage(const std::string& name) const;

    /// Checks current hashes against the stored ones; a changed value is an
    /// error (the run's earlier outputs would no longer be trustworthy).
    /// Hashes for keys not seen before are adopted.
    void merge_config_hashes(const std::map<std::string, std::string>& current);

    void record_stage(const std::string& name, std::vector<std::string> outputs);

private:
    std::string run_id_;
    std::map<std::string, std::string> config_hashes_;
    std::vector<StageRecord> stages_;
};

std::string utc_timestamp();

}  // namespace sii
