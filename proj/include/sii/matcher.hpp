#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sii/catalog.hpp"
#include "sii/corpus.hpp"

namespace sii {

enum class MatchRule {
    substring,
    prefix_before_hyphen_or_substring,
    word_subset,
    always_match_unknown,
};

MatchRule match_rule_from_name(const std::string& name);
std::string match_rule_name(MatchRule rule);

/// Every catalog key maps to exactly one rule; substring is the default.
class RuleMap {
public:
    static RuleMap defaults(const ElementCatalog& catalog);

    /// Defaults overlaid with a JSON {"rules": {key: rule}} file.
    static RuleMap load(const ElementCatalog& catalog,
                        const std::optional<std::string>& config_path);

    MatchRule rule_for(const std::string& key) const;
    std::string hash() const;

private:
    std::map<std::string, MatchRule> rules_;
};

struct CandidateItem {
    std::string original;
    std::string comparison;  // lowercased, whitespace-normalized, rewrites applied
};

/// Split a schema value into candidate items on '|', ';' and ':', trimming
/// each and rewriting "spin-coating" to "spin-coated" for comparison.
std::vector<CandidateItem> normalize_value(const std::string& value);

const std::vector<std::string>& match_separators();

struct KeyMatch {
    bool matched = false;
    std::optional<std::string> matching_item;
};

/// Prepared view of extracted content so one document can be matched against
/// many records without re-normalizing.
struct PreparedContent {
    std::string lowered;                    // lowercased, whitespace-normalized
    std::vector<std::string> lowered_words; // whitespace-delimited words of `lowered`
};

PreparedContent prepare_content(const std::string& text);

KeyMatch match_key(const std::string& key, const std::string& value,
                   const PreparedContent& content, const RuleMap& rules);

struct MatchReport {
    std::string doc_id;
    std::string record_ref;
    std::map<std::string, KeyMatch> per_key;
    double match_rate = 0.0;
};

MatchReport match_rate(const DeviceRecord& record, const ExtractedContent& content,
                       const RuleMap& rules);

struct RankedSample {
    ExtractedContent content;
    DeviceRecord record;
    MatchReport report;
};

/// The best-matching record for one document's content; ties keep input order.
RankedSample select_top_schema(const std::vector<DeviceRecord>& records,
                               const ExtractedContent& content, const RuleMap& rules);

/// Sort descending by match rate (ties by doc_id ascending) and keep the
/// first n.
std::vector<RankedSample> rank_and_select(std::vector<RankedSample> samples, size_t n);

struct ElementAuditRow {
    std::string key;
    double rate = 0.0;  // percent of non-Unknown values occurring verbatim
    size_t support = 0; // records with a non-Unknown value
};

struct AuditResult {
    std::vector<ElementAuditRow> rows;  // catalog order
    std::vector<std::string> diagnostics;
};

/// Case-sensitive verbatim-occurrence audit of record values against their
/// documents' extracted content. Records with no resolvable content are
/// skipped with a diagnostic.
AuditResult exact_match_rate_table(const std::vector<DeviceRecord>& records,
                                   const std::map<std::string, ExtractedContent>& contents,
                                   const ElementCatalog& catalog);

}  // namespace sii
