#include "sii/matcher.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sii/text.hpp"

namespace sii {

MatchRule match_rule_from_name(const std::string& name) {
    if (name == "substring") return MatchRule::substring;
    if (name == "prefix_before_hyphen_or_substring")
        return MatchRule::prefix_before_hyphen_or_substring;
    if (name == "word_subset") return MatchRule::word_subset;
    if (name == "always_match_unknown") return MatchRule::always_match_unknown;
    throw std::runtime_error("unknown match rule: '" + name + "'");
}

std::string match_rule_name(MatchRule rule) {
    switch (rule) {
        case MatchRule::substring: return "substring";
        case MatchRule::prefix_before_hyphen_or_substring:
            return "prefix_before_hyphen_or_substring";
        case MatchRule::word_subset: return "word_subset";
        case MatchRule::always_match_unknown: return "always_match_unknown";
    }
    return "?";
}

RuleMap RuleMap::defaults(const ElementCatalog& catalog) {
    RuleMap map;
    for (const auto& key : catalog.keys()) map.rules_[key] = MatchRule::substring;
    if (catalog.has_key("ETL_stack_sequence"))
        map.rules_["ETL_stack_sequence"] = MatchRule::prefix_before_hyphen_or_substring;
    for (const char* key :
         {"Perovskite_composition_long_form", "Perovskite_composition_short_form"}) {
        if (catalog.has_key(key)) map.rules_[key] = MatchRule::word_subset;
    }
    return map;
}

RuleMap RuleMap::load(const ElementCatalog& catalog,
                      const std::optional<std::string>& config_path) {
    RuleMap map = defaults(catalog);
    if (!config_path) return map;
    std::ifstream in(*config_path);
    if (!in) throw std::runtime_error("cannot open rules config: " + *config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed rules config " + *config_path + ": " + e.what());
    }
    // .items() must run on a named object, not on value()'s temporary
    nlohmann::json rules = j.value("rules", nlohmann::json::object());
    for (const auto& [key, value] : rules.items()) {
        if (!catalog.has_key(key))
            throw std::runtime_error("rules config names unknown key '" + key + "'");
        map.rules_[key] = match_rule_from_name(value.get<std::string>());
    }
    return map;
}

MatchRule RuleMap::rule_for(const std::string& key) const {
    auto it = rules_.find(key);
    if (it == rules_.end()) throw std::runtime_error("no match rule for key '" + key + "'");
    return it->second;
}

std::string RuleMap::hash() const {
    std::ostringstream canon;
    for (const auto& [key, rule] : rules_) canon << key << '=' << match_rule_name(rule) << ';';
    return fnv1a64_hex(canon.str());
}

const std::vector<std::string>& match_separators() {
    static const std::vector<std::string> seps = {"|", ";", ":"};
    return seps;
}

std::vector<CandidateItem> normalize_value(const std::string& value) {
    std::vector<CandidateItem> items;
    for (const auto& piece : split_on_separators(value, match_separators())) {
        CandidateItem item;
        item.original = piece;
        item.comparison =
            replace_all(to_lower(normalize_whitespace(piece)), "spin-coating", "spin-coated");
        items.push_back(std::move(item));
    }
    return items;
}

PreparedContent prepare_content(const std::string& text) {
    PreparedContent prepared;
    prepared.lowered = to_lower(normalize_whitespace(text));
    prepared.lowered_words = split_words(prepared.lowered);
    return prepared;
}

namespace {

bool item_matches(MatchRule rule, const std::string& item, const PreparedContent& content) {
    switch (rule) {
        case MatchRule::always_match_unknown:
            return true;
        case MatchRule::substring:
            return contains(content.lowered, item);
        case MatchRule::prefix_before_hyphen_or_substring: {
            if (contains(content.lowered, item)) return true;
            auto hyphen = item.find('-');
            if (hyphen == std::string::npos) return false;
            std::string prefix = trim(item.substr(0, hyphen));
            return !prefix.empty() && contains(content.lowered, prefix);
        }
        case MatchRule::word_subset:
            return std::any_of(content.lowered_words.begin(), content.lowered_words.end(),
                               [&](const std::string& word) { return contains(word, item); });
    }
    return false;
}

}  // namespace

KeyMatch match_key(const std::string& key, const std::string& value,
                   const PreparedContent& content, const RuleMap& rules) {
    MatchRule rule = rules.rule_for(key);
    // Unknown always counts as a match, whatever the key's rule says.
    if (is_unknown(value)) return {true, value};
    for (const auto& item : normalize_value(value)) {
        if (item_matches(rule, item.comparison, content)) return {true, item.original};
    }
    return {false, std::nullopt};
}

MatchReport match_rate(const DeviceRecord& record, const ExtractedContent& content,
                       const RuleMap& rules) {
    MatchReport report;
    report.doc_id = content.doc_id;
    report.record_ref = record.source_id;
    PreparedContent prepared = prepare_content(content.text);
    size_t matched = 0;
    for (const auto& [key, value] : record.values) {
        KeyMatch km = match_key(key, value, prepared, rules);
        if (km.matched) ++matched;
        report.per_key[key] = std::move(km);
    }
    report.match_rate = record.values.empty()
                            ? 0.0
                            : static_cast<double>(matched) /
                                  static_cast<double>(record.values.size());
    return report;
}

RankedSample select_top_schema(const std::vector<DeviceRecord>& records,
                               const ExtractedContent& content, const RuleMap& rules) {
    if (records.empty()) throw std::runtime_error("select_top_schema: no records");
    size_t best = 0;
    MatchReport best_report;
    for (size_t i = 0; i < records.size(); ++i) {
        MatchReport report = match_rate(records[i], content, rules);
        if (i == 0 || report.match_rate > best_report.match_rate) {
            best = i;
            best_report = std::move(report);
        }
    }
    return RankedSample{content, records[best], std::move(best_report)};
}

std::vector<RankedSample> rank_and_select(std::vector<RankedSample> samples, size_t n) {
    if (n == 0) throw std::runtime_error("rank_and_select: n must be positive");
    std::stable_sort(samples.begin(), samples.end(),
                     [](const RankedSample& a, const RankedSample& b) {
                         if (a.report.match_rate != b.report.match_rate)
                             return a.report.match_rate > b.report.match_rate;
                         return a.content.doc_id < b.content.doc_id;
                     });
    if (samples.size() > n) samples.resize(n);
    return samples;
}

AuditResult exact_match_rate_table(const std::vector<DeviceRecord>& records,
                                   const std::map<std::string, ExtractedContent>& contents,
                                   const ElementCatalog& catalog) {
    AuditResult result;
    std::map<std::string, size_t> support;
    std::map<std::string, size_t> hits;

    for (const auto& record : records) {
        auto it = contents.find(record.source_id);
        if (it == contents.end()) {
            result.diagnostics.push_back("record '" + record.source_id +
                                         "' has no extracted content; skipped");
            continue;
        }
        const std::string& text = it->second.text;
        for (const auto& e : catalog.elements()) {
            const std::string& value = record.value(e.key);
            if (is_unknown(value)) continue;
            support[e.key]++;
            if (contains(text, value)) hits[e.key]++;
        }
    }

    for (const auto& e : catalog.elements()) {
        ElementAuditRow row;
        row.key = e.key;
        row.support = support.count(e.key) ? support[e.key] : 0;
        row.rate = row.support == 0 ? 0.0
                                    : 100.0 * static_cast<double>(hits[e.key]) /
                                          static_cast<double>(row.support);
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace sii
