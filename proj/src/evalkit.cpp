#include "sii/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sii/tabular.hpp"
#include "sii/text.hpp"

namespace sii {

namespace {

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

std::set<std::string> word_set(const std::string& value) {
    auto words = split_value_words(value);
    return {words.begin(), words.end()};
}

std::set<std::string> predicted_word_set(const DeviceRecord& pred, const std::string& key) {
    if (pred.key_missing(key)) return {};
    auto it = pred.values.find(key);
    if (it == pred.values.end()) return {};
    return word_set(it->second);
}

// Maps doc_id to gold record, enforcing the by-id alignment contract.
std::map<std::string, const DeviceRecord*> align_golds(const std::vector<DeviceRecord>& preds,
                                                       const std::vector<DeviceRecord>& golds) {
    if (preds.size() != golds.size()) {
        throw std::runtime_error("record lists misaligned: " + std::to_string(preds.size()) +
                                 " predictions vs " + std::to_string(golds.size()) + " golds");
    }
    std::map<std::string, const DeviceRecord*> by_id;
    for (const auto& g : golds) {
        if (!by_id.emplace(g.source_id, &g).second) {
            throw std::runtime_error("record lists misaligned: duplicate gold doc_id " +
                                     g.source_id);
        }
    }
    std::set<std::string> seen;
    for (const auto& p : preds) {
        if (!by_id.count(p.source_id)) {
            throw std::runtime_error("record lists misaligned: no gold for doc_id " + p.source_id);
        }
        if (!seen.insert(p.source_id).second) {
            throw std::runtime_error("record lists misaligned: duplicate predicted doc_id " +
                                     p.source_id);
        }
    }
    return by_id;
}

}  // namespace

MetricReport make_metric_report(std::string grouping, EntityScore counts) {
    MetricReport report;
    report.grouping = std::move(grouping);
    report.counts = counts;
    if (counts.tp + counts.fp > 0) {
        report.precision =
            static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    }
    if (counts.tp + counts.fn > 0) {
        report.recall = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    }
    if (report.precision + report.recall > 0) {
        report.f1 = 2 * report.precision * report.recall / (report.precision + report.recall);
    }
    return report;
}

EntityScore score_entity_pair(const std::string& pred, const std::string& gold) {
    auto sp = word_set(pred);
    auto sa = word_set(gold);
    EntityScore score;
    for (const auto& w : sp) {
        if (sa.count(w)) {
            ++score.tp;
        } else {
            ++score.fp;
        }
    }
    for (const auto& w : sa) {
        if (!sp.count(w)) ++score.fn;
    }
    return score;
}

std::vector<MetricReport> aggregate_ner(const std::vector<DeviceRecord>& preds,
                                        const std::vector<DeviceRecord>& golds,
                                        const ElementCatalog& catalog) {
    auto by_id = align_golds(preds, golds);

    std::map<SetTag, EntityScore> buckets;
    EntityScore total;
    for (const auto& pred : preds) {
        const auto& gold = *by_id.at(pred.source_id);
        for (const auto& element : catalog.elements()) {
            const auto& gold_value = gold.value(element.key);
            EntityScore score;
            if (pred.key_missing(element.key) || !pred.values.count(element.key)) {
                score.fn = static_cast<long long>(word_set(gold_value).size());
            } else {
                score = score_entity_pair(pred.values.at(element.key), gold_value);
            }
            buckets[element.set_tag].add(score);
            total.add(score);
        }
    }

    std::vector<MetricReport> rows;
    for (auto tag : {SetTag::A, SetTag::B, SetTag::C, SetTag::D}) {
        rows.push_back(make_metric_report(set_tag_name(tag), buckets[tag]));
    }
    rows.push_back(make_metric_report("total", total));
    return rows;
}

std::string relation_name(RelationType rel) {
    switch (rel) {
        case RelationType::a_b: return "A-B";
        case RelationType::a_c: return "A-C";
        case RelationType::abc_d: return "ABC-D";
    }
    throw std::logic_error("unreachable relation type");
}

std::optional<RelationType> relation_from_name(const std::string& name) {
    if (name == "A-B") return RelationType::a_b;
    if (name == "A-C") return RelationType::a_c;
    if (name == "ABC-D") return RelationType::abc_d;
    return std::nullopt;
}

std::vector<RelationType> all_relation_types() {
    return {RelationType::a_b, RelationType::a_c, RelationType::abc_d};
}

namespace {

std::pair<std::set<SetTag>, std::set<SetTag>> relation_sides(RelationType rel) {
    switch (rel) {
        case RelationType::a_b: return {{SetTag::A}, {SetTag::B}};
        case RelationType::a_c: return {{SetTag::A}, {SetTag::C}};
        case RelationType::abc_d: return {{SetTag::A, SetTag::B, SetTag::C}, {SetTag::D}};
    }
    throw std::logic_error("unreachable relation type");
}

std::set<std::string> side_word_set(const DeviceRecord& record, const std::set<SetTag>& tags,
                                    const ElementCatalog& catalog) {
    std::set<std::string> out;
    for (const auto& element : catalog.elements()) {
        if (!tags.count(element.set_tag)) continue;
        auto words = predicted_word_set(record, element.key);
        out.insert(words.begin(), words.end());
    }
    return out;
}

}  // namespace

CollocationSet build_collocations(const DeviceRecord& record, RelationType rel,
                                  const ElementCatalog& catalog) {
    auto [left_tags, right_tags] = relation_sides(rel);
    auto left = side_word_set(record, left_tags, catalog);
    auto right = side_word_set(record, right_tags, catalog);
    CollocationSet out;
    for (const auto& lw : left) {
        for (const auto& rw : right) out.pairs.emplace(lw, rw);
    }
    return out;
}

MetricReport aggregate_re(const std::vector<DeviceRecord>& preds,
                          const std::vector<DeviceRecord>& golds, RelationType rel,
                          const ElementCatalog& catalog) {
    auto by_id = align_golds(preds, golds);
    EntityScore totals;
    for (const auto& pred : preds) {
        const auto& gold = *by_id.at(pred.source_id);
        auto rp = build_collocations(pred, rel, catalog).pairs;
        auto ra = build_collocations(gold, rel, catalog).pairs;
        for (const auto& pair : rp) {
            if (ra.count(pair)) {
                ++totals.tp;
            } else {
                ++totals.fp;
            }
        }
        for (const auto& pair : ra) {
            if (!rp.count(pair)) ++totals.fn;
        }
    }
    return make_metric_report(relation_name(rel), totals);
}

std::string subtask_name(Subtask subtask) {
    switch (subtask) {
        case Subtask::ii: return "II";
        case Subtask::er_u: return "ER-U";
        case Subtask::er_t: return "ER-T";
    }
    throw std::logic_error("unreachable subtask");
}

std::optional<Subtask> subtask_from_name(const std::string& name) {
    if (name == "II") return Subtask::ii;
    if (name == "ER-U") return Subtask::er_u;
    if (name == "ER-T") return Subtask::er_t;
    return std::nullopt;
}

RewriteTables RewriteTables::defaults() {
    RewriteTables t;
    t.units = {
        {"C", "K", 1.0, 273.15},    {"K", "C", 1.0, -273.15},  {"h", "min", 60.0, 0.0},
        {"min", "h", 1.0 / 60, 0.0}, {"min", "s", 60.0, 0.0},   {"s", "min", 1.0 / 60, 0.0},
        {"cm2", "mm2", 100.0, 0.0},  {"mm2", "cm2", 0.01, 0.0},
    };
    t.unit_aliases = {
        {"c", "C"},         {"celsius", "C"}, {"k", "K"},       {"h", "h"},
        {"hr", "h"},        {"hrs", "h"},     {"hour", "h"},    {"hours", "h"},
        {"min", "min"},     {"mins", "min"},  {"minute", "min"}, {"minutes", "min"},
        {"s", "s"},         {"sec", "s"},     {"secs", "s"},    {"second", "s"},
        {"seconds", "s"},   {"cm2", "cm2"},   {"mm2", "mm2"},
    };
    t.terms = {{"mesoporous", "-m"}, {"compact", "-c"}};
    return t;
}

RewriteTables RewriteTables::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    auto t = defaults();
    if (doc.contains("units")) {
        t.units.clear();
        for (const auto& u : doc.at("units")) {
            t.units.push_back({u.at("from").get<std::string>(), u.at("to").get<std::string>(),
                               u.value("scale", 1.0), u.value("offset", 0.0)});
        }
    }
    if (doc.contains("unit_aliases")) {
        t.unit_aliases.clear();
        for (const auto& [alias, canon] : doc.at("unit_aliases").items()) {
            t.unit_aliases[to_lower(alias)] = canon.get<std::string>();
        }
    }
    if (doc.contains("terms")) {
        t.terms.clear();
        for (const auto& r : doc.at("terms")) {
            t.terms.push_back(
                {r.at("prefix_word").get<std::string>(), r.at("suffix").get<std::string>()});
        }
    }
    return t;
}

namespace {

bool is_ascii_alnum(unsigned char c) { return std::isalnum(c) != 0; }

// Skips spaces and the degree sign between a number and its unit.
std::size_t skip_unit_gap(const std::string& text, std::size_t i) {
    while (i < text.size()) {
        if (text[i] == ' ' || text[i] == '\t') {
            ++i;
        } else if (i + 1 < text.size() && static_cast<unsigned char>(text[i]) == 0xC2 &&
                   static_cast<unsigned char>(text[i + 1]) == 0xB0) {
            i += 2;  // degree sign
        } else {
            break;
        }
    }
    return i;
}

// Reads letters optionally closed by '2' or the superscript-two codepoint.
std::string read_unit_word(const std::string& text, std::size_t& i) {
    std::string unit;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
        unit += text[i];
        ++i;
    }
    if (unit.empty()) return unit;
    if (i < text.size() && text[i] == '2') {
        unit += '2';
        ++i;
    } else if (i + 1 < text.size() && static_cast<unsigned char>(text[i]) == 0xC2 &&
               static_cast<unsigned char>(text[i + 1]) == 0xB2) {
        unit += '2';
        i += 2;
    }
    return unit;
}

}  // namespace

std::vector<UnitToken> extract_unit_tokens(const std::string& text, const RewriteTables& tables) {
    std::vector<UnitToken> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isalpha(c)) {
            // consume the whole alphanumeric run so digits inside names
            // ("MAPbI3") never start a number
            while (i < text.size() && is_ascii_alnum(static_cast<unsigned char>(text[i]))) ++i;
            continue;
        }
        if (!std::isdigit(c)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        if (i < text.size() && text[i] == '.' && i + 1 < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            ++i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        }
        double magnitude = std::stod(text.substr(start, i - start));
        std::size_t unit_at = skip_unit_gap(text, i);
        std::size_t after_unit = unit_at;
        auto unit = read_unit_word(text, after_unit);
        if (!unit.empty()) {
            auto alias = tables.unit_aliases.find(to_lower(unit));
            if (alias != tables.unit_aliases.end()) {
                tokens.push_back({magnitude, alias->second});
                i = after_unit;
            }
        }
    }
    return tokens;
}

namespace {

bool unit_rewrite_match(const std::vector<UnitToken>& gold_tokens,
                        const std::vector<UnitToken>& content_tokens,
                        const RewriteTables& tables) {
    for (const auto& gt : gold_tokens) {
        for (const auto& rule : tables.units) {
            if (rule.from_unit != gt.unit) continue;
            double expected = gt.magnitude * rule.scale + rule.offset;
            for (const auto& ct : content_tokens) {
                if (ct.unit != rule.to_unit) continue;
                // absorb integer rounding of converted values ("343K" for 70 C)
                if (std::fabs(ct.magnitude - expected) <= 0.5 + 1e-9) return true;
            }
        }
    }
    return false;
}

bool term_rewrite_match(const std::string& value, const std::string& content_lowered,
                        const RewriteTables& tables) {
    for (const auto& item : split_value_words(value)) {
        auto lowered = to_lower(item);
        for (const auto& rule : tables.terms) {
            const auto& suffix = rule.suffix;
            if (lowered.size() > suffix.size() &&
                lowered.compare(lowered.size() - suffix.size(), suffix.size(), suffix) == 0) {
                auto stem = lowered.substr(0, lowered.size() - suffix.size());
                if (contains(content_lowered, rule.prefix_word + " " + stem)) return true;
            }
            auto prefix = rule.prefix_word + " ";
            if (lowered.rfind(prefix, 0) == 0) {
                auto stem = lowered.substr(prefix.size());
                if (!stem.empty() && contains(content_lowered, stem + suffix)) return true;
            }
        }
    }
    return false;
}

}  // namespace

SubtaskSelection build_subtask_selection(const std::vector<DeviceRecord>& golds,
                                         const std::map<std::string, ExtractedContent>& contents,
                                         const ElementCatalog& catalog,
                                         const RewriteTables& tables) {
    SubtaskSelection selection;
    for (const auto& gold : golds) {
        auto content_it = contents.find(gold.source_id);
        if (content_it == contents.end()) {
            selection.diagnostics.push_back("no content for doc_id " + gold.source_id +
                                            "; skipped");
            continue;
        }
        const auto& text = content_it->second.text;
        auto lowered = to_lower(normalize_whitespace(text));
        auto content_tokens = extract_unit_tokens(text, tables);

        for (const auto& element : catalog.elements()) {
            const auto& value = gold.value(element.key);
            if (is_unknown(value)) continue;
            auto needle = to_lower(normalize_whitespace(value));
            if (contains(lowered, needle)) continue;  // answer appears verbatim

            Subtask subtask = Subtask::ii;
            if (unit_rewrite_match(extract_unit_tokens(value, tables), content_tokens, tables)) {
                subtask = Subtask::er_u;
            } else if (term_rewrite_match(value, lowered, tables)) {
                subtask = Subtask::er_t;
            }
            selection.entries.push_back({gold.source_id, element.key, subtask});
        }
    }
    return selection;
}

void save_selection_jsonl(const SubtaskSelection& selection, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& entry : selection.entries) {
        nlohmann::json row = {{"doc_id", entry.doc_id},
                              {"key", entry.key},
                              {"subtask", subtask_name(entry.subtask)}};
        out << row.dump() << "\n";
    }
}

SubtaskSelection load_selection_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    SubtaskSelection selection;
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
        auto subtask = subtask_from_name(row.at("subtask").get<std::string>());
        if (!subtask) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": unknown subtask " + row.at("subtask").dump());
        }
        selection.entries.push_back(
            {row.at("doc_id").get<std::string>(), row.at("key").get<std::string>(), *subtask});
    }
    return selection;
}

std::vector<SubtaskScore> score_exact_subtasks(const std::vector<DeviceRecord>& preds,
                                               const std::vector<DeviceRecord>& golds,
                                               const SubtaskSelection& selection) {
    std::map<std::string, const DeviceRecord*> gold_by_id;
    for (const auto& g : golds) gold_by_id[g.source_id] = &g;
    std::map<std::string, const DeviceRecord*> pred_by_id;
    for (const auto& p : preds) pred_by_id[p.source_id] = &p;

    std::map<Subtask, SubtaskScore> scores;
    for (auto subtask : {Subtask::ii, Subtask::er_u, Subtask::er_t}) {
        scores[subtask].subtask = subtask;
    }

    for (const auto& entry : selection.entries) {
        auto gold_it = gold_by_id.find(entry.doc_id);
        if (gold_it == gold_by_id.end() || !gold_it->second->values.count(entry.key)) {
            throw std::runtime_error("selection references missing gold pair (" + entry.doc_id +
                                     ", " + entry.key + ")");
        }
        auto& score = scores.at(entry.subtask);
        ++score.support;

        auto pred_it = pred_by_id.find(entry.doc_id);
        if (pred_it == pred_by_id.end()) continue;  // no prediction: incorrect
        const auto& pred = *pred_it->second;
        if (pred.key_missing(entry.key) || !pred.values.count(entry.key)) continue;
        if (trim(pred.values.at(entry.key)) == trim(gold_it->second->values.at(entry.key))) {
            ++score.correct;
        }
    }

    std::vector<SubtaskScore> rows;
    for (auto subtask : {Subtask::ii, Subtask::er_u, Subtask::er_t}) {
        auto score = scores.at(subtask);
        if (score.support > 0) {
            score.accuracy = static_cast<double>(score.correct) /
                             static_cast<double>(score.support);
        }
        rows.push_back(score);
    }
    return rows;
}

std::vector<ManualGroupScore> ingest_manual_scores(const std::string& path,
                                                   const ElementCatalog& catalog) {
    auto table = read_delimited_file(path);
    for (const char* column : {"doc_id", "key", "score"}) {
        if (!table.has_column(column)) {
            throw std::runtime_error(path + ": missing column " + column);
        }
    }
    auto key_col = table.column("key");
    auto score_col = table.column("score");

    std::map<std::string, ManualGroupScore> groups;
    for (const auto& name : {"A", "B", "C", "D", "total"}) groups[name].grouping = name;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& key = table.rows[r][key_col];
        if (!catalog.has_key(key)) {
            throw std::runtime_error(path + ": unknown element key " + key);
        }
        const auto& raw_score = table.rows[r][score_col];
        auto trimmed = trim(raw_score);
        if (trimmed != "0" && trimmed != "1" && trimmed != "2") {
            throw std::runtime_error(path + ": score must be 0, 1, or 2; got \"" + raw_score +
                                     "\"");
        }
        bool correct = trimmed != "0";
        auto tag = catalog.element(key).set_tag;
        if (tag != SetTag::Unassigned) {
            auto& group = groups.at(set_tag_name(tag));
            ++group.support;
            if (correct) ++group.correct;
        }
        auto& total = groups.at("total");
        ++total.support;
        if (correct) ++total.correct;
    }

    std::vector<ManualGroupScore> rows;
    for (const auto& name : {"A", "B", "C", "D", "total"}) {
        auto group = groups.at(name);
        if (group.support > 0) {
            group.accuracy = static_cast<double>(group.correct) /
                             static_cast<double>(group.support);
        }
        rows.push_back(group);
    }
    return rows;
}

std::string render_ner_table(const std::vector<MetricReport>& rows,
                             const std::vector<ManualGroupScore>* manual) {
    std::map<std::string, const ManualGroupScore*> manual_by_group;
    if (manual) {
        for (const auto& m : *manual) manual_by_group[m.grouping] = &m;
    }
    std::ostringstream out;
    out << "set\tprecision\trecall\tf1\tmanual\n";
    for (const auto& row : rows) {
        out << row.grouping << '\t' << percent(row.precision) << '\t' << percent(row.recall)
            << '\t' << percent(row.f1) << '\t';
        auto it = manual_by_group.find(row.grouping);
        if (it != manual_by_group.end() && it->second->support > 0) {
            out << percent(it->second->accuracy);
        } else {
            out << "-";
        }
        out << '\n';
    }
    return out.str();
}

std::string render_re_table(const std::vector<MetricReport>& rows) {
    std::ostringstream out;
    out << "relation\tprecision\trecall\tf1\n";
    for (const auto& row : rows) {
        out << row.grouping << '\t' << percent(row.precision) << '\t' << percent(row.recall)
            << '\t' << percent(row.f1) << '\n';
    }
    return out.str();
}

std::string render_subtask_table(const std::vector<SubtaskScore>& rows) {
    std::ostringstream out;
    out << "subtask\tsupport\taccuracy\n";
    for (const auto& row : rows) {
        out << subtask_name(row.subtask) << '\t' << row.support << '\t' << percent(row.accuracy)
            << '\n';
    }
    return out.str();
}

}  // namespace sii
