#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "sii/mdp.hpp"
#include "sii/text.hpp"

using namespace sii;

namespace {

FairRow make_row(const ElementCatalog& catalog, const std::string& doc_id,
                 const std::string& spectra, const std::string& intensity,
                 const std::string& pce = "15.0") {
    FairRow row;
    row.record = DeviceRecord::with_defaults(catalog, doc_id);
    row.extras["JV_light_spectra"] = spectra;
    row.extras["JV_light_intensity"] = intensity;
    row.extras["JV_default_PCE"] = pce;
    row.extras["JV_default_Voc"] = "1.0849";
    row.extras["JV_default_Jsc"] = "22.3";
    row.extras["JV_default_FF"] = "0.744";
    return row;
}

}  // namespace

TEST_CASE("bin_pce") {
    SUBCASE("boundaries") {
        CHECK(bin_pce(0.0) == ClassBin::low);
        CHECK(bin_pce(7.99) == ClassBin::low);
        CHECK(bin_pce(8.0) == ClassBin::normal);
        CHECK(bin_pce(18.0) == ClassBin::normal);
        CHECK(bin_pce(18.01) == ClassBin::high);
        CHECK(bin_pce(21.3) == ClassBin::high);
    }

    SUBCASE("negative input rejected") {
        CHECK_THROWS_AS(bin_pce(-0.01), std::runtime_error);
    }

    SUBCASE("0.01 grid over [0,30] maps every point to exactly one bin") {
        int low = 0, normal = 0, high = 0;
        for (int i = 0; i <= 3000; ++i) {
            double pce = i / 100.0;
            auto bin = bin_pce(pce);
            if (bin == ClassBin::low) ++low;
            if (bin == ClassBin::normal) ++normal;
            if (bin == ClassBin::high) ++high;
            // bins are ordered: once past a boundary they never go back
            if (i > 0) CHECK(static_cast<int>(bin) >= static_cast<int>(bin_pce((i - 1) / 100.0)));
        }
        CHECK(low + normal + high == 3001);
        CHECK(low == 800);      // 0.00 .. 7.99
        CHECK(normal == 1001);  // 8.00 .. 18.00
        CHECK(high == 1200);    // 18.01 .. 30.00
    }
}

TEST_CASE("two-decimal formatting") {
    CHECK(format_two_decimals(2.0) == "2.00");
    CHECK(format_two_decimals(1.0849) == "1.08");
    CHECK(format_two_decimals(21.299) == "21.30");
    CHECK(format_two_decimals(0.0) == "0.00");
    CHECK(format_two_decimals(0.005) == "0.01");  // half rounds away from zero
    CHECK(format_two_decimals(18.0) == "18.00");

    SUBCASE("idempotent: a formatted value re-formats to itself") {
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> value(0.0, 30.0);
        for (int i = 0; i < 1000; ++i) {
            auto text = format_two_decimals(value(rng));
            auto parsed = parse_prediction_number(text);
            REQUIRE(parsed.has_value());
            CHECK(format_two_decimals(*parsed) == text);
        }
    }
}

TEST_CASE("parse_prediction_number") {
    CHECK(parse_prediction_number(" 2.00 ") == std::optional<double>{2.0});
    CHECK(parse_prediction_number("18") == std::optional<double>{18.0});
    CHECK_FALSE(parse_prediction_number("").has_value());
    CHECK_FALSE(parse_prediction_number("high").has_value());
    CHECK_FALSE(parse_prediction_number("2.00 END").has_value());
    CHECK_FALSE(parse_prediction_number("nan").has_value());
    CHECK_FALSE(parse_prediction_number("inf").has_value());
}

TEST_CASE("filter_jv_conditions") {
    auto catalog = load_catalog();
    std::vector<FairRow> rows = {
        make_row(catalog, "d0", "AM1.5", "1000"),
        make_row(catalog, "d1", "AM1.5", "500"),
        make_row(catalog, "d2", "indoor", "1000"),
        make_row(catalog, "d3", "AM1.5", ""),
        make_row(catalog, "d4", "", "1000"),
        make_row(catalog, "d5", "am1.5", "1000.0"),
        make_row(catalog, "d6", "AM1.5", "lots"),
    };

    auto result = filter_jv_conditions(rows);
    REQUIRE(result.kept.size() == 2);
    CHECK(result.kept[0].record.source_id == "d0");
    CHECK(result.kept[1].record.source_id == "d5");
    REQUIRE(result.diagnostics.size() == 3);
    CHECK(result.diagnostics[0].find("d3") != std::string::npos);
    CHECK(result.diagnostics[1].find("d4") != std::string::npos);
    CHECK(result.diagnostics[2].find("d6") != std::string::npos);

    SUBCASE("missing condition column is a configuration error") {
        std::vector<FairRow> bare(1);
        bare[0].record = DeviceRecord::with_defaults(catalog, "d0");
        CHECK_THROWS_WITH_AS(filter_jv_conditions(bare),
                             doctest::Contains("condition column missing"), std::runtime_error);
    }

    SUBCASE("empty input stays empty") {
        CHECK(filter_jv_conditions({}).kept.empty());
    }
}

TEST_CASE("build_mdp_sample") {
    auto catalog = load_catalog();
    auto row = make_row(catalog, "d0", "AM1.5", "1000", "2.0");
    row.record.set("Substrate_stack_sequence", "SLG | FTO");

    SUBCASE("classification prompt and completion") {
        auto sample = build_mdp_sample(row, {MdpTaskKind::classification, "PCE"}, catalog);
        CHECK(sample.doc_id == "d0");
        auto lines = split_lines(sample.prompt);
        REQUIRE(lines.size() == 18);
        CHECK(lines[0] == "What's the PCE of the perovskite solar cell with the parameters below:");
        CHECK(lines[1] == "Substrate_stack_sequence: SLG | FTO");
        CHECK(lines[2] == "ETL_stack_sequence: Unknown");
        CHECK(lines[10] == "Backcontact_additives_compounds: Unknown");
        CHECK(lines[11] == "ETL_deposition_procedure: Unknown");
        CHECK(lines[17] == "Perovskite_deposition_thermal_annealing_time: Unknown");
        CHECK(sample.gold == "low");
        CHECK(sample.completion == " low\nEND");
    }

    SUBCASE("regression completions for each target") {
        auto pce = build_mdp_sample(row, {MdpTaskKind::regression, "PCE"}, catalog);
        CHECK(pce.completion == " 2.00\nEND");
        CHECK(pce.prompt.find("What's the PCE value of the perovskite solar cell") == 0);

        auto voc = build_mdp_sample(row, {MdpTaskKind::regression, "Voc"}, catalog);
        CHECK(voc.gold == "1.08");
        CHECK(voc.prompt.find("What's the Voc value of") == 0);

        auto ff = build_mdp_sample(row, {MdpTaskKind::regression, "FF"}, catalog);
        CHECK(ff.gold == "0.74");
    }

    SUBCASE("high-bin classification") {
        auto rich = make_row(catalog, "d1", "AM1.5", "1000", "21.3");
        auto sample = build_mdp_sample(rich, {MdpTaskKind::classification, "PCE"}, catalog);
        CHECK(sample.gold == "high");
    }

    SUBCASE("missing target is an error; the batch builder skips it") {
        auto bad = make_row(catalog, "d2", "AM1.5", "1000", "");
        CHECK_THROWS_WITH_AS(build_mdp_sample(bad, {MdpTaskKind::classification, "PCE"}, catalog),
                             doctest::Contains("JV_default_PCE"), std::runtime_error);

        auto result =
            build_mdp_samples({row, bad}, {MdpTaskKind::classification, "PCE"}, catalog);
        CHECK(result.samples.size() == 1);
        REQUIRE(result.diagnostics.size() == 1);
        CHECK(result.diagnostics[0].find("d2") != std::string::npos);
    }

    SUBCASE("unknown target name") {
        CHECK_THROWS_WITH_AS(build_mdp_sample(row, {MdpTaskKind::regression, "Isc"}, catalog),
                             doctest::Contains("unknown prediction target"), std::runtime_error);
    }
}

TEST_CASE("score_regression") {
    SUBCASE("identity and hand arithmetic") {
        CHECK(score_regression({"2.00", "3.00"}, {2.0, 3.0}).mae == 0.0);
        auto score = score_regression({"1.0", "3.0"}, {2.0, 2.0});
        CHECK(score.mae == 1.0);
        CHECK(score.scored == 2);
        CHECK(score.unparseable_indices.empty());
    }

    SUBCASE("unparseable predictions are excluded and reported") {
        auto score = score_regression({"1.0", "banana", "3.0"}, {1.0, 2.0, 2.0});
        CHECK(score.scored == 2);
        REQUIRE(score.unparseable_indices.size() == 1);
        CHECK(score.unparseable_indices[0] == 1);
        CHECK(score.mae == doctest::Approx(0.5).epsilon(1e-15));
    }

    SUBCASE("all unparseable is an error") {
        CHECK_THROWS_WITH_AS(score_regression({"a", "b"}, {1.0, 2.0}),
                             doctest::Contains("no prediction parsed"), std::runtime_error);
        CHECK_THROWS_AS(score_regression({}, {}), std::runtime_error);
        CHECK_THROWS_AS(score_regression({"1.0"}, {1.0, 2.0}), std::runtime_error);
    }

    SUBCASE("shifting all predictions by c moves MAE by exactly |c|") {
        std::mt19937_64 rng(22);
        std::uniform_real_distribution<double> value(0.0, 30.0);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> golds;
            std::vector<std::string> preds, shifted;
            double c = 5.0;
            for (int i = 0; i < 20; ++i) {
                double g = value(rng);
                golds.push_back(g);
                double p = g + value(rng) / 10.0;  // residuals all positive
                preds.push_back(std::to_string(p));
                shifted.push_back(std::to_string(p + c));
            }
            auto base = score_regression(preds, golds);
            auto moved = score_regression(shifted, golds);
            CHECK(moved.mae == doctest::Approx(base.mae + c).epsilon(1e-9));
        }
    }
}

TEST_CASE("score_classification") {
    using CB = ClassBin;

    SUBCASE("identity") {
        auto score = score_classification({"low", "normal", "high"},
                                          {CB::low, CB::normal, CB::high});
        CHECK(score.accuracy == 1.0);
        CHECK(score.correct == 3);
        CHECK(score.confusion[0][0] == 1);
        CHECK(score.confusion[1][1] == 1);
        CHECK(score.confusion[2][2] == 1);
    }

    SUBCASE("all normal against uniform golds") {
        auto score = score_classification({"normal", "normal", "normal"},
                                          {CB::low, CB::normal, CB::high});
        CHECK(score.accuracy == doctest::Approx(1.0 / 3).epsilon(1e-15));
    }

    SUBCASE("unparseable counts in the denominator and its own column") {
        std::vector<std::string> preds = {"low", "banana", "high", "high", "low",
                                          "normal", "normal", "low", "high", "normal"};
        std::vector<CB> golds = {CB::low, CB::low, CB::high, CB::high, CB::low,
                                 CB::normal, CB::normal, CB::low, CB::high, CB::normal};
        auto score = score_classification(preds, golds);
        CHECK(score.total == 10);
        CHECK(score.correct == 9);
        CHECK(score.unparseable == 1);
        CHECK(score.accuracy == doctest::Approx(0.9).epsilon(1e-15));
        CHECK(score.confusion[0][3] == 1);
    }

    SUBCASE("labels parse case-insensitively with padding") {
        auto score = score_classification({" High "}, {CB::high});
        CHECK(score.accuracy == 1.0);
    }

    SUBCASE("confusion row sums equal gold label counts") {
        std::mt19937_64 rng(23);
        std::uniform_int_distribution<int> pick(0, 3);
        const char* labels[] = {"low", "normal", "high", "???"};
        std::vector<std::string> preds;
        std::vector<CB> golds;
        std::size_t gold_counts[3] = {0, 0, 0};
        for (int i = 0; i < 200; ++i) {
            preds.push_back(labels[pick(rng)]);
            int g = pick(rng) % 3;
            golds.push_back(static_cast<CB>(g));
            ++gold_counts[g];
        }
        auto score = score_classification(preds, golds);
        for (int r = 0; r < 3; ++r) {
            std::size_t sum = 0;
            for (int c = 0; c < 4; ++c) sum += score.confusion[r][c];
            CHECK(sum == gold_counts[r]);
        }
    }
}

TEST_CASE("mdp report rendering") {
    SUBCASE("regression table lists targets in order") {
        std::vector<RegressionRow> rows = {
            {"Jsc", score_regression({"22.3"}, {22.0})},
            {"Voc", score_regression({"1.08"}, {1.08})},
            {"FF", score_regression({"0.74"}, {0.70})},
            {"PCE", score_regression({"15.0", "x"}, {14.0, 15.0})},
        };
        auto lines = split_lines(render_regression_table(rows));
        REQUIRE(lines.size() == 5);
        CHECK(lines[0] == "target\tsupport\tmae\tunparseable");
        CHECK(lines[1].rfind("Jsc\t1\t0.30", 0) == 0);
        CHECK(lines[2].rfind("Voc\t1\t0.00", 0) == 0);
        CHECK(lines[4] == "PCE\t1\t1.00\t1");
    }

    SUBCASE("classification report shape") {
        auto score = score_classification({"low"}, {ClassBin::low});
        auto lines = split_lines(render_classification_report(score));
        REQUIRE(lines.size() == 5);
        CHECK(lines[0].rfind("accuracy\t100.00", 0) == 0);
        CHECK(lines[1] == "gold\\pred\tlow\tnormal\thigh\tunparseable");
        CHECK(lines[2] == "low\t1\t0\t0\t0");
    }

    SUBCASE("parity table skips unparseable rows") {
        auto lines = split_lines(render_parity_table({"1.5", "junk"}, {1.0, 2.0}));
        REQUIRE(lines.size() == 2);
        CHECK(lines[0] == "gold\tpred");
        CHECK(lines[1] == "1.00\t1.50");
    }
}
