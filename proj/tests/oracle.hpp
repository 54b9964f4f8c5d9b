// Reference evaluator for the scoring tests. Deliberately reimplements word
// splitting, set partitioning, and collocation counting with different
// machinery (std::set algebra, position scans, a frozen key table) so that a
// defect in the library cannot hide in a shared helper.
#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sii/catalog.hpp"

namespace oracle {

// Frozen copy of the element partition. 'U' marks the unassigned element.
inline const std::map<std::string, char>& key_tags() {
    static const std::map<std::string, char> tags = {
        {"Substrate_stack_sequence", 'A'},
        {"ETL_stack_sequence", 'A'},
        {"ETL_additives_compounds", 'A'},
        {"ETL_deposition_procedure", 'C'},
        {"Perovskite_composition_long_form", 'A'},
        {"Perovskite_composition_short_form", 'A'},
        {"Perovskite_additives_compounds", 'A'},
        {"Perovskite_deposition_solvents", 'C'},
        {"Perovskite_deposition_procedure", 'C'},
        {"Perovskite_deposition_thermal_annealing_temperature", 'C'},
        {"Perovskite_deposition_thermal_annealing_time", 'C'},
        {"HTL_stack_sequence", 'A'},
        {"HTL_additives_compounds", 'A'},
        {"HTL_deposition_procedure", 'C'},
        {"Backcontact_stack_sequence", 'A'},
        {"Backcontact_additives_compounds", 'A'},
        {"Backcontact_deposition_procedure", 'C'},
        {"Stability_measured", 'D'},
        {"Stability_average_over_n_number_of_cells", 'D'},
        {"Stability_temperature_range", 'D'},
        {"Stability_atmosphere", 'D'},
        {"Stability_time_total_exposure", 'D'},
        {"Stability_PCE_initial_value", 'D'},
        {"Stability_PCE_end_of_experiment", 'D'},
        {"Cell_area_measured", 'B'},
        {"Cell_number_of_cells_per_substrate", 'B'},
        {"Cell_architecture", 'B'},
        {"Cell_flexible", 'B'},
        {"Cell_semitransparent", 'B'},
        {"Cell_semitransparent_wavelength_range", 'B'},
        {"Module", 'U'},
    };
    return tags;
}

inline std::set<std::string> words(const std::string& value) {
    static const std::vector<std::string> seps = {">>", ";", "|", ":"};
    std::vector<std::string> parts;
    std::string cur;
    std::size_t i = 0;
    while (i < value.size()) {
        bool hit = false;
        for (const auto& sep : seps) {
            if (value.compare(i, sep.size(), sep) == 0) {
                parts.push_back(cur);
                cur.clear();
                i += sep.size();
                hit = true;
                break;
            }
        }
        if (!hit) {
            cur += value[i];
            ++i;
        }
    }
    parts.push_back(cur);

    std::set<std::string> out;
    for (const auto& part : parts) {
        auto begin = part.find_first_not_of(" \t\r\n\f\v");
        if (begin == std::string::npos) continue;
        auto end = part.find_last_not_of(" \t\r\n\f\v");
        out.insert(part.substr(begin, end - begin + 1));
    }
    return out;
}

struct Counts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
};

template <typename T>
Counts set_counts(const std::set<T>& pred, const std::set<T>& gold) {
    std::vector<T> inter;
    std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(),
                          std::back_inserter(inter));
    Counts c;
    c.tp = static_cast<long long>(inter.size());
    c.fp = static_cast<long long>(pred.size() - inter.size());
    c.fn = static_cast<long long>(gold.size() - inter.size());
    return c;
}

inline Counts pair_counts(const std::string& pred, const std::string& gold) {
    return set_counts(words(pred), words(gold));
}

inline std::set<std::string> predicted_words(const sii::DeviceRecord& pred,
                                             const std::string& key) {
    if (pred.missing.count(key)) return {};
    auto it = pred.values.find(key);
    if (it == pred.values.end()) return {};
    return words(it->second);
}

struct NerTotals {
    std::map<char, Counts> by_tag;  // 'A'..'D' and 'U'
    Counts total;
};

inline const sii::DeviceRecord& gold_for(const std::vector<sii::DeviceRecord>& golds,
                                         const std::string& doc_id) {
    for (const auto& g : golds) {
        if (g.source_id == doc_id) return g;
    }
    throw std::runtime_error("oracle: no gold for " + doc_id);
}

inline NerTotals ner(const std::vector<sii::DeviceRecord>& preds,
                     const std::vector<sii::DeviceRecord>& golds) {
    if (preds.size() != golds.size()) throw std::runtime_error("oracle: length mismatch");
    NerTotals totals;
    for (const auto& pred : preds) {
        const auto& gold = gold_for(golds, pred.source_id);
        for (const auto& [key, tag] : key_tags()) {
            auto gold_words = words(gold.values.at(key));
            auto c = set_counts(predicted_words(pred, key), gold_words);
            auto& bucket = totals.by_tag[tag];
            bucket.tp += c.tp;
            bucket.fp += c.fp;
            bucket.fn += c.fn;
            totals.total.tp += c.tp;
            totals.total.fp += c.fp;
            totals.total.fn += c.fn;
        }
    }
    return totals;
}

inline std::set<std::string> side_words(const sii::DeviceRecord& record,
                                        const std::set<char>& tags, bool is_pred) {
    std::set<std::string> out;
    for (const auto& [key, tag] : key_tags()) {
        if (!tags.count(tag)) continue;
        auto ws = is_pred ? predicted_words(record, key) : words(record.values.at(key));
        out.insert(ws.begin(), ws.end());
    }
    return out;
}

inline std::set<std::pair<std::string, std::string>> record_pairs(const sii::DeviceRecord& record,
                                                                  const std::set<char>& left,
                                                                  const std::set<char>& right,
                                                                  bool is_pred) {
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& lw : side_words(record, left, is_pred)) {
        for (const auto& rw : side_words(record, right, is_pred)) {
            pairs.emplace(lw, rw);
        }
    }
    return pairs;
}

inline Counts re(const std::vector<sii::DeviceRecord>& preds,
                 const std::vector<sii::DeviceRecord>& golds, const std::string& rel) {
    std::set<char> left, right;
    if (rel == "A-B") {
        left = {'A'};
        right = {'B'};
    } else if (rel == "A-C") {
        left = {'A'};
        right = {'C'};
    } else if (rel == "ABC-D") {
        left = {'A', 'B', 'C'};
        right = {'D'};
    } else {
        throw std::runtime_error("oracle: unknown relation " + rel);
    }
    if (preds.size() != golds.size()) throw std::runtime_error("oracle: length mismatch");
    Counts totals;
    for (const auto& pred : preds) {
        const auto& gold = gold_for(golds, pred.source_id);
        auto c = set_counts(record_pairs(pred, left, right, true),
                            record_pairs(gold, left, right, false));
        totals.tp += c.tp;
        totals.fp += c.fp;
        totals.fn += c.fn;
    }
    return totals;
}

struct Prf {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

inline Prf prf(const Counts& c) {
    Prf m;
    if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (m.precision + m.recall > 0)
        m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

}  // namespace oracle
