#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sii/catalog.hpp"
#include "sii/corpus.hpp"

namespace sii {

struct EntityScore {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;

    void add(const EntityScore& other) {
        tp += other.tp;
        fp += other.fp;
        fn += other.fn;
    }
};

// Precision, recall, and F1 live in [0,1]; zero denominators score 0.
struct MetricReport {
    std::string grouping;
    EntityScore counts;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

MetricReport make_metric_report(std::string grouping, EntityScore counts);

// Word-level comparison of one predicted value against the gold value.
EntityScore score_entity_pair(const std::string& pred, const std::string& gold);

// Scores aligned record lists; returns rows for sets A-D plus "total" (the
// total row also covers elements outside the four sets). Keys flagged missing
// in a prediction contribute only false negatives.
std::vector<MetricReport> aggregate_ner(const std::vector<DeviceRecord>& preds,
                                        const std::vector<DeviceRecord>& golds,
                                        const ElementCatalog& catalog);

enum class RelationType { a_b, a_c, abc_d };

std::string relation_name(RelationType rel);
std::optional<RelationType> relation_from_name(const std::string& name);
std::vector<RelationType> all_relation_types();

struct CollocationSet {
    std::set<std::pair<std::string, std::string>> pairs;
};

// Cross product of the deduplicated word sets on each side of the relation.
// ABC-D fuses sets A, B, and C into one side. Missing keys contribute nothing.
CollocationSet build_collocations(const DeviceRecord& record, RelationType rel,
                                  const ElementCatalog& catalog);

MetricReport aggregate_re(const std::vector<DeviceRecord>& preds,
                          const std::vector<DeviceRecord>& golds, RelationType rel,
                          const ElementCatalog& catalog);

enum class Subtask { ii, er_u, er_t };

std::string subtask_name(Subtask subtask);
std::optional<Subtask> subtask_from_name(const std::string& name);

struct SelectionEntry {
    std::string doc_id;
    std::string key;
    Subtask subtask = Subtask::ii;
};

struct SubtaskSelection {
    std::vector<SelectionEntry> entries;
    std::vector<std::string> diagnostics;
};

struct UnitRule {
    std::string from_unit;
    std::string to_unit;
    double scale = 1.0;
    double offset = 0.0;
};

struct TermRule {
    std::string prefix_word;  // e.g. "mesoporous"
    std::string suffix;       // e.g. "-m"
};

struct RewriteTables {
    std::vector<UnitRule> units;
    std::map<std::string, std::string> unit_aliases;  // lowercased alias -> canonical unit
    std::vector<TermRule> terms;

    static RewriteTables defaults();
    // Overlays fields present in a JSON file onto the defaults.
    static RewriteTables load(const std::string& path);
};

struct UnitToken {
    double magnitude = 0;
    std::string unit;  // canonical
};

// Finds number-plus-unit occurrences ("343K", "60 mins", "0.09 cm2"). The
// number must start at a word boundary so digits inside formulas are skipped.
std::vector<UnitToken> extract_unit_tokens(const std::string& text, const RewriteTables& tables);

// Picks gold elements whose value does not occur verbatim in the document
// text, then labels each: ER-U if a unit-converted form of the value appears,
// ER-T if a terminology-rewritten form appears, II otherwise. "Unknown"
// values are never selected. The result is meant to be saved and hand-edited.
SubtaskSelection build_subtask_selection(const std::vector<DeviceRecord>& golds,
                                         const std::map<std::string, ExtractedContent>& contents,
                                         const ElementCatalog& catalog,
                                         const RewriteTables& tables = RewriteTables::defaults());

void save_selection_jsonl(const SubtaskSelection& selection, const std::string& path);
SubtaskSelection load_selection_jsonl(const std::string& path);

struct SubtaskScore {
    Subtask subtask = Subtask::ii;
    std::size_t support = 0;
    std::size_t correct = 0;
    double accuracy = 0;
};

// Exact-match accuracy (case-sensitive, trimmed) over the selected pairs.
// Rows come back in II, ER-U, ER-T order even when a subtask is empty.
std::vector<SubtaskScore> score_exact_subtasks(const std::vector<DeviceRecord>& preds,
                                               const std::vector<DeviceRecord>& golds,
                                               const SubtaskSelection& selection);

struct ManualGroupScore {
    std::string grouping;
    std::size_t support = 0;
    std::size_t correct = 0;
    double accuracy = 0;
};

// Reads a delimited file with columns doc_id,key,score where score is 0
// (wrong), 1 (right with extra content), or 2 (right). 1 and 2 count as
// correct. Returns rows for sets A-D plus "total".
std::vector<ManualGroupScore> ingest_manual_scores(const std::string& path,
                                                   const ElementCatalog& catalog);

// Tab-separated report renderers.
std::string render_ner_table(const std::vector<MetricReport>& rows,
                             const std::vector<ManualGroupScore>* manual = nullptr);
std::string render_re_table(const std::vector<MetricReport>& rows);
std::string render_subtask_table(const std::vector<SubtaskScore>& rows);

}  // namespace sii
