#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "sii/manifest.hpp"

using namespace sii;

namespace {

std::filesystem::path temp_manifest(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "sii_manifest_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("manifest ledger") {
    RunManifest manifest("run-1", {{"catalog", "aaaa"}, {"dataset", "bbbb"}});

    SUBCASE("unchanged hashes merge silently, new keys are adopted") {
        manifest.merge_config_hashes({{"catalog", "aaaa"}, {"backend", "cccc"}});
        CHECK(manifest.config_hashes().at("backend") == "cccc");
        CHECK(manifest.config_hashes().at("dataset") == "bbbb");
    }

    SUBCASE("a changed hash is a hard error naming the key") {
        CHECK_THROWS_WITH_AS(manifest.merge_config_hashes({{"dataset", "ffff"}}),
                             doctest::Contains("dataset"), std::runtime_error);
    }

    SUBCASE("stages snapshot the hash state at recording time") {
        manifest.record_stage("ingest", {"contents.jsonl"});
        manifest.merge_config_hashes({{"backend", "cccc"}});
        manifest.record_stage("infer", {"preds.jsonl"});

        REQUIRE(manifest.stages().size() == 2);
        CHECK(manifest.stages()[0].config_hashes.count("backend") == 0);
        CHECK(manifest.stages()[1].config_hashes.at("backend") == "cccc");
        CHECK(manifest.stages()[0].timestamp.size() == 20);  // 2026-01-02T03:04:05Z
        CHECK(manifest.stages()[0].timestamp.back() == 'Z');

        const auto* latest = manifest.stage("infer");
        REQUIRE(latest != nullptr);
        CHECK(latest->outputs == std::vector<std::string>{"preds.jsonl"});
        CHECK(manifest.stage("report") == nullptr);
    }

    SUBCASE("save and load round-trip") {
        manifest.record_stage("ingest", {"contents.jsonl", "skipped.jsonl"});
        auto path = temp_manifest("roundtrip.json");
        manifest.save(path.string());

        auto loaded = RunManifest::load(path.string());
        CHECK(loaded.run_id() == "run-1");
        CHECK(loaded.config_hashes() == manifest.config_hashes());
        REQUIRE(loaded.stages().size() == 1);
        CHECK(loaded.stages()[0].name == "ingest");
        CHECK(loaded.stages()[0].outputs.size() == 2);
    }

    SUBCASE("re-recording a stage keeps history, stage() returns the newest") {
        manifest.record_stage("infer", {"a.jsonl"});
        manifest.record_stage("infer", {"b.jsonl"});
        CHECK(manifest.stages().size() == 2);
        CHECK(manifest.stage("infer")->outputs[0] == "b.jsonl");
    }
}
