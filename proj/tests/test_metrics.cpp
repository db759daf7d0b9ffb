#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "textlens/corpus.hpp"
#include "textlens/errors.hpp"
#include "textlens/metrics.hpp"
#include "textlens/rng.hpp"

#include "helpers.hpp"

using namespace textlens;

namespace {

std::string four_places(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

TEST_CASE("confusion counts agreement per class", "[metrics]") {
    const std::vector<BinaryLabel> actual{BinaryLabel::benign(), BinaryLabel::hateful(),
                                          BinaryLabel::benign(), BinaryLabel::hateful()};
    const std::vector<BinaryLabel> predicted{BinaryLabel::benign(), BinaryLabel::hateful(),
                                             BinaryLabel::hateful(), BinaryLabel::benign()};
    const auto cm = confusion(predicted, actual);
    CHECK(cm.tp == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.fn == 1);
    CHECK(cm.fp == 1);
    CHECK(cm.total() == 4);

    CHECK_THROWS_AS(confusion({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(confusion(predicted, {BinaryLabel::benign()}), std::invalid_argument);
}

TEST_CASE("flipping the matrix swaps the positive class", "[metrics]") {
    const ConfusionMatrix cm{3, 1, 2, 9};
    const auto f = flip(cm);
    CHECK(f.tp == 9);
    CHECK(f.fp == 2);
    CHECK(f.fn == 1);
    CHECK(f.tn == 3);
    CHECK(flip(f) == cm);
}

TEST_CASE("the worked ten-example matrix", "[metrics]") {
    const ConfusionMatrix cm{3, 1, 1, 5};
    const auto r = report(cm);
    CHECK_THAT(r.pos.precision, Catch::Matchers::WithinAbs(0.75, 1e-12));
    CHECK_THAT(r.pos.recall, Catch::Matchers::WithinAbs(0.75, 1e-12));
    CHECK_THAT(r.pos.f1, Catch::Matchers::WithinAbs(0.75, 1e-12));
    CHECK_THAT(r.specificity, Catch::Matchers::WithinAbs(5.0 / 6.0, 1e-12));
    CHECK_THAT(r.accuracy, Catch::Matchers::WithinAbs(0.8, 1e-12));
    CHECK(r.pos.support == 4);
    CHECK(r.neg.support == 6);
    CHECK(r.total == 10);
}

TEST_CASE("a perfect classifier scores one everywhere", "[metrics]") {
    const auto r = report({4, 0, 0, 6});
    CHECK(r.accuracy == 1.0);
    CHECK(r.pos.precision == 1.0);
    CHECK(r.pos.recall == 1.0);
    CHECK(r.pos.f1 == 1.0);
    CHECK(r.neg.f1 == 1.0);
    CHECK(r.specificity == 1.0);
    CHECK(r.macro.f1 == 1.0);
    CHECK(r.weighted.f1 == 1.0);
}

TEST_CASE("reports agree with a recount oracle on random data", "[metrics]") {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 1000; ++round) {
        const auto n = 1 + bounded_u64(rng, 200);
        std::vector<BinaryLabel> actual, predicted;
        for (std::uint64_t i = 0; i < n; ++i) {
            actual.push_back(coin(rng) ? BinaryLabel::benign() : BinaryLabel::hateful());
            predicted.push_back(coin(rng) ? BinaryLabel::benign() : BinaryLabel::hateful());
        }
        const auto cm = confusion(predicted, actual);
        const auto r = report(cm);

        double tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
            const bool a = actual[i].is_pos();
            const bool p = predicted[i].is_pos();
            tp += a && p;
            fp += !a && p;
            fn += a && !p;
            tn += !a && !p;
        }
        const auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
        const double prec_p = ratio(tp, tp + fp);
        const double rec_p = ratio(tp, tp + fn);
        const double f1_p = ratio(2.0 * prec_p * rec_p, prec_p + rec_p);
        const double prec_n = ratio(tn, tn + fn);
        const double rec_n = ratio(tn, tn + fp);
        const double f1_n = ratio(2.0 * prec_n * rec_n, prec_n + rec_n);

        CHECK_THAT(r.accuracy,
                   Catch::Matchers::WithinAbs((tp + tn) / static_cast<double>(n), 1e-12));
        CHECK_THAT(r.pos.precision, Catch::Matchers::WithinAbs(prec_p, 1e-12));
        CHECK_THAT(r.pos.recall, Catch::Matchers::WithinAbs(rec_p, 1e-12));
        CHECK_THAT(r.pos.f1, Catch::Matchers::WithinAbs(f1_p, 1e-12));
        CHECK_THAT(r.neg.precision, Catch::Matchers::WithinAbs(prec_n, 1e-12));
        CHECK_THAT(r.neg.recall, Catch::Matchers::WithinAbs(rec_n, 1e-12));
        CHECK_THAT(r.specificity, Catch::Matchers::WithinAbs(rec_n, 1e-12));
        CHECK_THAT(r.macro.f1, Catch::Matchers::WithinAbs(0.5 * (f1_p + f1_n), 1e-12));
        CHECK(r.macro.f1 >= std::min(f1_p, f1_n) - 1e-12);
        CHECK(r.macro.f1 <= std::max(f1_p, f1_n) + 1e-12);
        const double wf1 = ((tn + fp) * f1_n + (tp + fn) * f1_p) / static_cast<double>(n);
        CHECK_THAT(r.weighted.f1, Catch::Matchers::WithinAbs(wf1, 1e-12));
        // recall weighted by true support is just accuracy again
        CHECK_THAT(r.weighted.recall, Catch::Matchers::WithinAbs(r.accuracy, 1e-12));
    }
}

TEST_CASE("zero denominators flag instead of dividing", "[metrics]") {
    // everything predicted pos, nothing actually pos
    const auto all_pos_pred = report({0, 7, 0, 0});
    CHECK(all_pos_pred.pos.precision == 0.0);
    CHECK_FALSE(all_pos_pred.pos.precision_undefined);
    CHECK(all_pos_pred.pos.recall_undefined);
    CHECK(all_pos_pred.pos.f1_undefined);
    CHECK(all_pos_pred.neg.precision_undefined);
    CHECK_FALSE(all_pos_pred.specificity_undefined);
    CHECK(all_pos_pred.specificity == 0.0);
    CHECK(all_pos_pred.accuracy == 0.0);

    // everything predicted neg, everything actually pos
    const auto all_neg_pred = report({0, 0, 7, 0});
    CHECK(all_neg_pred.pos.precision_undefined);
    CHECK_FALSE(all_neg_pred.pos.recall_undefined);
    CHECK(all_neg_pred.specificity_undefined);
    CHECK(all_neg_pred.specificity == 0.0);

    CHECK_THROWS_AS(report({0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("reporting the flipped matrix swaps the class rows", "[metrics]") {
    const ConfusionMatrix cm{31, 7, 11, 47};
    const auto r = report(cm);
    const auto rf = report(flip(cm));
    CHECK(rf.pos.precision == r.neg.precision);
    CHECK(rf.pos.recall == r.neg.recall);
    CHECK(rf.pos.f1 == r.neg.f1);
    CHECK(rf.neg.precision == r.pos.precision);
    CHECK(rf.accuracy == r.accuracy);
    CHECK(rf.specificity == r.pos.recall);
    CHECK(rf.pos.recall == r.specificity);
}

TEST_CASE("a realizing matrix reproduces the published benchmark row", "[metrics]") {
    // 1649 validation posts: 733 true pos, 108 false pos, 179 false neg, 629 true neg
    const auto r = report({733, 108, 179, 629});
    CHECK(four_places(r.accuracy) == "0.8260");
    CHECK(four_places(r.pos.precision) == "0.8716");
    CHECK(four_places(r.pos.f1) == "0.8363");
    CHECK(four_places(r.specificity) == "0.8535");

    const auto text = render_report(r);
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring(
                         "precision    recall  f1-score   support"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("neg"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("pos"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("macro avg"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("weighted avg"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("accuracy 0.8260"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("precision 0.8716"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("specificity 0.8535"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("f1 0.8363"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("accuracy 82.60%"));
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("precision 87.16%"));
}

TEST_CASE("history CSV survives a round trip, blank scores included", "[metrics]") {
    ScratchDir dir;
    std::vector<EpochRecord> history;
    history.push_back({0, 0, 4e-7, 0.6931471805599453, 0.5, 0.4583333333333333});
    history.push_back({1, 0, 1e-5, 0.52, 0.8125, std::numeric_limits<double>::quiet_NaN()});
    history.push_back({2, 1, 9.999999999999999e-6, 0.4,
                       0.8333333333333334, 0.9166666666666666});

    const auto p = dir / "history.csv";
    emit_curves(history, p);
    const auto parsed = parse_history_csv(p);
    REQUIRE(parsed.size() == 3);
    CHECK(parsed[0] == history[0]);
    CHECK(parsed[2] == history[2]);
    CHECK(parsed[1].epoch == 1);
    CHECK(parsed[1].cycle == 0);
    CHECK(parsed[1].lr == 1e-5);
    CHECK(parsed[1].train_loss == 0.52);
    CHECK(parsed[1].train_acc == 0.8125);
    CHECK(std::isnan(parsed[1].val_acc));

    const auto text = read_text(p);
    CHECK(text.rfind("epoch,cycle,lr,train_loss,train_acc,val_acc\n", 0) == 0);
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring(",nan\n"));
}

TEST_CASE("a one-epoch run serializes to header plus one row", "[metrics]") {
    const std::vector<EpochRecord> history{{0, 0, 1e-5, 0.7, 0.5, 0.5}};
    const auto csv = history_csv(history);
    std::size_t newlines = 0;
    for (const char c : csv) {
        newlines += c == '\n';
    }
    CHECK(newlines == 2);
    CHECK(csv.rfind(kHistoryHeader, 0) == 0);
}

TEST_CASE("malformed history files name the offending line", "[metrics]") {
    ScratchDir dir;
    const auto p = dir / "history.csv";

    write_text(p, "epoch,lr\n");
    try {
        parse_history_csv(p);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("header"));
    }

    write_text(p, std::string(kHistoryHeader) + "\n0,0,0.1,bad,0.5,0.5\n");
    try {
        parse_history_csv(p);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("bad"));
    }

    write_text(p, std::string(kHistoryHeader) + "\n0,0,0.1,0.5\n");
    try {
        parse_history_csv(p);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("6"));
    }

    CHECK_THROWS_AS(parse_history_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("accuracy curves render as an SVG with one line per series", "[metrics]") {
    ScratchDir dir;
    std::vector<EpochRecord> history;
    for (int e = 0; e < 10; ++e) {
        history.push_back({e, 0, 1e-5, 0.7 - 0.05 * e, 0.5 + 0.04 * e, 0.5 + 0.03 * e});
    }
    const auto csv = dir / "h.csv";
    const auto svg = dir / "h.svg";
    emit_curves(history, csv, svg);
    const auto content = read_text(svg);
    CHECK(content.rfind("<svg", 0) == 0);
    CHECK_THAT(content, Catch::Matchers::ContainsSubstring("polyline"));
    CHECK_THAT(content, Catch::Matchers::ContainsSubstring("#1f77b4"));
    CHECK_THAT(content, Catch::Matchers::ContainsSubstring("#d62728"));

    for (auto& r : history) {
        r.val_acc = std::numeric_limits<double>::quiet_NaN();
    }
    emit_curves(history, csv, svg);
    const auto blue_only = read_text(svg);
    CHECK_THAT(blue_only, Catch::Matchers::ContainsSubstring("#1f77b4"));
    CHECK_THAT(blue_only, !Catch::Matchers::ContainsSubstring("#d62728"));

    CHECK_THROWS_AS(emit_curves({}, csv), std::invalid_argument);
}
