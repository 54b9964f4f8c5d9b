#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sii/catalog.hpp"
#include "sii/tabular.hpp"

namespace sii {

enum class ClassBin { low, normal, high };

std::string bin_name(ClassBin bin);
std::optional<ClassBin> bin_from_name(const std::string& name);

/// low [0,8), normal [8,18], high (18,inf). Negative input is an error.
ClassBin bin_pce(double pce);

/// Round half away from zero to two decimals, rendered with both digits.
std::string format_two_decimals(double value);

/// Strict numeric parse of a prediction after trimming; nullopt on leftovers.
std::optional<double> parse_prediction_number(const std::string& text);

struct MdpConfig {
    std::string spectra_column = "JV_light_spectra";
    std::string spectra_value = "AM1.5";
    std::string intensity_column = "JV_light_intensity";
    double intensity_value = 1000.0;
    // performance targets in report order: short name -> source column
    std::vector<std::pair<std::string, std::string>> targets = {
        {"Jsc", "JV_default_Jsc"},
        {"Voc", "JV_default_Voc"},
        {"FF", "JV_default_FF"},
        {"PCE", "JV_default_PCE"},
    };

    const std::string& target_column(const std::string& name) const;
};

/// The device parameters quoted in prediction prompts, in prompt order.
const std::vector<std::string>& mdp_parameter_keys();

enum class MdpTaskKind { classification, regression };

struct MdpTask {
    MdpTaskKind kind = MdpTaskKind::classification;
    std::string target_name = "PCE";
};

struct MdpSample {
    std::string doc_id;
    std::string prompt;
    std::string completion;
    std::string gold;  // bin label or 2-decimal number, same text as completion core
};

struct FilterResult {
    std::vector<FairRow> kept;
    std::vector<std::string> diagnostics;
};

/// Keep rows measured under the configured spectra and intensity. A row with
/// a blank or unparseable condition cell is dropped with a diagnostic; a
/// table lacking the condition column entirely is a configuration error.
FilterResult filter_jv_conditions(const std::vector<FairRow>& rows, const MdpConfig& config = {});

/// Question plus the 17 parameter lines; completion carries the bin label or
/// the rounded target value. Throws when the target cell is absent.
MdpSample build_mdp_sample(const FairRow& row, const MdpTask& task, const ElementCatalog& catalog,
                           const MdpConfig& config = {});

struct MdpBuildResult {
    std::vector<MdpSample> samples;
    std::vector<std::string> diagnostics;
};

/// Batch variant: rows with missing targets are skipped, not fatal.
MdpBuildResult build_mdp_samples(const std::vector<FairRow>& rows, const MdpTask& task,
                                 const ElementCatalog& catalog, const MdpConfig& config = {});

struct RegressionScore {
    double mae = 0;
    std::size_t scored = 0;
    std::vector<std::size_t> unparseable_indices;
};

/// MAE over parseable predictions; unparseable entries are excluded and
/// reported. Throws when nothing is parseable.
RegressionScore score_regression(const std::vector<std::string>& preds,
                                 const std::vector<double>& golds);

struct ClassificationScore {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t unparseable = 0;
    double accuracy = 0;  // denominator includes unparseable predictions
    // rows: gold low/normal/high; columns: predicted low/normal/high/unparseable
    std::array<std::array<std::size_t, 4>, 3> confusion{};
};

ClassificationScore score_classification(const std::vector<std::string>& preds,
                                         const std::vector<ClassBin>& golds);

struct RegressionRow {
    std::string target;
    RegressionScore score;
};

std::string render_regression_table(const std::vector<RegressionRow>& rows);
std::string render_classification_report(const ClassificationScore& score);

/// Plain (gold, pred) pairs for external parity plotting.
std::string render_parity_table(const std::vector<std::string>& preds,
                                const std::vector<double>& golds);

}  // namespace sii
