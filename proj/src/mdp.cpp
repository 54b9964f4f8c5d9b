#include "sii/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "sii/text.hpp"

namespace sii {

std::string bin_name(ClassBin bin) {
    switch (bin) {
        case ClassBin::low: return "low";
        case ClassBin::normal: return "normal";
        case ClassBin::high: return "high";
    }
    throw std::logic_error("unreachable bin");
}

std::optional<ClassBin> bin_from_name(const std::string& name) {
    auto folded = to_lower(trim(name));
    if (folded == "low") return ClassBin::low;
    if (folded == "normal") return ClassBin::normal;
    if (folded == "high") return ClassBin::high;
    return std::nullopt;
}

ClassBin bin_pce(double pce) {
    if (!(pce >= 0)) {
        throw std::runtime_error("pce must be non-negative, got " + std::to_string(pce));
    }
    if (pce < 8.0) return ClassBin::low;
    if (pce <= 18.0) return ClassBin::normal;
    return ClassBin::high;
}

std::string format_two_decimals(double value) {
    long long cents = std::llround(value * 100.0);
    char buf[40];
    if (cents < 0) {
        std::snprintf(buf, sizeof(buf), "-%lld.%02lld", -cents / 100, -cents % 100);
    } else {
        std::snprintf(buf, sizeof(buf), "%lld.%02lld", cents / 100, cents % 100);
    }
    return buf;
}

std::optional<double> parse_prediction_number(const std::string& text) {
    auto trimmed = trim(text);
    if (trimmed.empty()) return std::nullopt;
    const char* begin = trimmed.c_str();
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end != begin + trimmed.size()) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

const std::string& MdpConfig::target_column(const std::string& name) const {
    for (const auto& [target, column] : targets) {
        if (target == name) return column;
    }
    throw std::runtime_error("unknown prediction target: " + name);
}

const std::vector<std::string>& mdp_parameter_keys() {
    static const std::vector<std::string> keys = {
        "Substrate_stack_sequence",
        "ETL_stack_sequence",
        "ETL_additives_compounds",
        "Perovskite_composition_long_form",
        "Perovskite_composition_short_form",
        "Perovskite_additives_compounds",
        "HTL_stack_sequence",
        "HTL_additives_compounds",
        "Backcontact_stack_sequence",
        "Backcontact_additives_compounds",
        "ETL_deposition_procedure",
        "HTL_deposition_procedure",
        "Backcontact_deposition_procedure",
        "Perovskite_deposition_procedure",
        "Perovskite_deposition_solvents",
        "Perovskite_deposition_thermal_annealing_temperature",
        "Perovskite_deposition_thermal_annealing_time",
    };
    return keys;
}

FilterResult filter_jv_conditions(const std::vector<FairRow>& rows, const MdpConfig& config) {
    FilterResult result;
    if (rows.empty()) return result;

    for (const char* column : {config.spectra_column.c_str(), config.intensity_column.c_str()}) {
        if (!rows.front().extras.count(column)) {
            throw std::runtime_error(std::string("condition column missing from input: ") +
                                     column);
        }
    }

    for (const auto& row : rows) {
        const auto& doc = row.record.source_id;
        auto spectra = trim(row.extras.at(config.spectra_column));
        if (spectra.empty()) {
            result.diagnostics.push_back(doc + ": no light spectra value; dropped");
            continue;
        }
        if (!iequals(spectra, config.spectra_value)) continue;

        auto intensity_text = trim(row.extras.at(config.intensity_column));
        if (intensity_text.empty()) {
            result.diagnostics.push_back(doc + ": no light intensity value; dropped");
            continue;
        }
        auto intensity = parse_prediction_number(intensity_text);
        if (!intensity) {
            result.diagnostics.push_back(doc + ": unreadable light intensity \"" +
                                         intensity_text + "\"; dropped");
            continue;
        }
        if (std::fabs(*intensity - config.intensity_value) > 1e-6) continue;
        result.kept.push_back(row);
    }
    return result;
}

namespace {

double target_value_of(const FairRow& row, const std::string& column) {
    auto it = row.extras.find(column);
    if (it == row.extras.end() || trim(it->second).empty()) {
        throw std::runtime_error(row.record.source_id + ": no value for " + column);
    }
    auto value = parse_prediction_number(it->second);
    if (!value) {
        throw std::runtime_error(row.record.source_id + ": unreadable value for " + column +
                                 ": \"" + it->second + "\"");
    }
    return *value;
}

std::string task_question(const MdpTask& task) {
    if (task.kind == MdpTaskKind::classification) {
        return "What's the PCE of the perovskite solar cell with the parameters below:";
    }
    return "What's the " + task.target_name +
           " value of the perovskite solar cell with the parameters below:";
}

}  // namespace

MdpSample build_mdp_sample(const FairRow& row, const MdpTask& task, const ElementCatalog& catalog,
                           const MdpConfig& config) {
    const auto& column = config.target_column(
        task.kind == MdpTaskKind::classification ? "PCE" : task.target_name);
    double target = target_value_of(row, column);

    std::ostringstream prompt;
    prompt << task_question(task) << "\n";
    for (const auto& key : mdp_parameter_keys()) {
        if (!catalog.has_key(key)) {
            throw std::runtime_error("catalog lacks prediction parameter " + key);
        }
        prompt << key << ": " << row.record.value(key) << "\n";
    }

    MdpSample sample;
    sample.doc_id = row.record.source_id;
    sample.prompt = prompt.str();
    sample.gold = task.kind == MdpTaskKind::classification ? bin_name(bin_pce(target))
                                                           : format_two_decimals(target);
    sample.completion = " " + sample.gold + "\nEND";
    return sample;
}

MdpBuildResult build_mdp_samples(const std::vector<FairRow>& rows, const MdpTask& task,
                                 const ElementCatalog& catalog, const MdpConfig& config) {
    MdpBuildResult result;
    for (const auto& row : rows) {
        try {
            result.samples.push_back(build_mdp_sample(row, task, catalog, config));
        } catch (const std::runtime_error& e) {
            result.diagnostics.push_back(std::string(e.what()) + "; skipped");
        }
    }
    return result;
}

RegressionScore score_regression(const std::vector<std::string>& preds,
                                 const std::vector<double>& golds) {
    if (preds.size() != golds.size()) {
        throw std::runtime_error("prediction/gold length mismatch: " +
                                 std::to_string(preds.size()) + " vs " +
                                 std::to_string(golds.size()));
    }
    if (preds.empty()) throw std::runtime_error("nothing to score");

    RegressionScore score;
    double absolute_sum = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto value = parse_prediction_number(preds[i]);
        if (!value) {
            score.unparseable_indices.push_back(i);
            continue;
        }
        absolute_sum += std::fabs(*value - golds[i]);
        ++score.scored;
    }
    if (score.scored == 0) throw std::runtime_error("no prediction parsed as a number");
    score.mae = absolute_sum / static_cast<double>(score.scored);
    return score;
}

ClassificationScore score_classification(const std::vector<std::string>& preds,
                                         const std::vector<ClassBin>& golds) {
    if (preds.size() != golds.size()) {
        throw std::runtime_error("prediction/gold length mismatch: " +
                                 std::to_string(preds.size()) + " vs " +
                                 std::to_string(golds.size()));
    }
    ClassificationScore score;
    score.total = preds.size();
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto gold_row = static_cast<std::size_t>(golds[i]);
        auto pred = bin_from_name(preds[i]);
        if (!pred) {
            ++score.unparseable;
            ++score.confusion[gold_row][3];
            continue;
        }
        ++score.confusion[gold_row][static_cast<std::size_t>(*pred)];
        if (*pred == golds[i]) ++score.correct;
    }
    if (score.total > 0) {
        score.accuracy = static_cast<double>(score.correct) / static_cast<double>(score.total);
    }
    return score;
}

std::string render_regression_table(const std::vector<RegressionRow>& rows) {
    std::ostringstream out;
    out << "target\tsupport\tmae\tunparseable\n";
    for (const auto& row : rows) {
        char mae[32];
        std::snprintf(mae, sizeof(mae), "%.2f", row.score.mae);
        out << row.target << '\t' << row.score.scored << '\t' << mae << '\t'
            << row.score.unparseable_indices.size() << '\n';
    }
    return out.str();
}

std::string render_classification_report(const ClassificationScore& score) {
    std::ostringstream out;
    char acc[32];
    std::snprintf(acc, sizeof(acc), "%.2f", score.accuracy * 100.0);
    out << "accuracy\t" << acc << "\ttotal\t" << score.total << "\tunparseable\t"
        << score.unparseable << "\n";
    out << "gold\\pred\tlow\tnormal\thigh\tunparseable\n";
    const char* labels[] = {"low", "normal", "high"};
    for (std::size_t r = 0; r < 3; ++r) {
        out << labels[r];
        for (std::size_t c = 0; c < 4; ++c) out << '\t' << score.confusion[r][c];
        out << '\n';
    }
    return out.str();
}

std::string render_parity_table(const std::vector<std::string>& preds,
                                const std::vector<double>& golds) {
    if (preds.size() != golds.size()) {
        throw std::runtime_error("prediction/gold length mismatch: " +
                                 std::to_string(preds.size()) + " vs " +
                                 std::to_string(golds.size()));
    }
    std::ostringstream out;
    out << "gold\tpred\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto value = parse_prediction_number(preds[i]);
        if (!value) continue;
        out << format_two_decimals(golds[i]) << '\t' << format_two_decimals(*value) << '\n';
    }
    return out.str();
}

}  // namespace sii
