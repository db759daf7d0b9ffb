#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "textlens/corpus.hpp"
#include "textlens/errors.hpp"
#include "textlens/model.hpp"

namespace textlens {

// Counts oriented around the pos (non-hateful) class: tp = predicted pos,
// actually pos. Flip the matrix to read the neg class as positive.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(const std::vector<BinaryLabel>& predicted,
                                 const std::vector<BinaryLabel>& actual) {
    if (predicted.empty() || predicted.size() != actual.size()) {
        throw std::invalid_argument("prediction and label lists must be non-empty and parallel");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (actual[i].is_pos()) {
            ++(predicted[i].is_pos() ? cm.tp : cm.fn);
        } else {
            ++(predicted[i].is_pos() ? cm.fp : cm.tn);
        }
    }
    return cm;
}

// Swap which class counts as positive.
inline ConfusionMatrix flip(const ConfusionMatrix& cm) {
    return {cm.tn, cm.fn, cm.fp, cm.tp};
}

// undefined flags mark metrics whose denominator was zero; the value is then
// reported as 0 rather than poisoning averages with NaN.
struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

struct ClassReport {
    ClassMetrics neg;  // hateful class
    ClassMetrics pos;  // non-hateful class
    double accuracy = 0.0;
    double specificity = 0.0;  // true-negative rate in the pos orientation
    bool specificity_undefined = false;
    ClassMetrics macro;
    ClassMetrics weighted;
    std::size_t total = 0;
};

namespace detail {

inline double safe_ratio(double num, double den, bool& undefined) {
    if (den == 0.0) {
        undefined = true;
        return 0.0;
    }
    return num / den;
}

inline ClassMetrics class_metrics(const ConfusionMatrix& cm) {
    ClassMetrics m;
    m.support = cm.tp + cm.fn;
    const auto tp = static_cast<double>(cm.tp);
    m.precision = safe_ratio(tp, static_cast<double>(cm.tp + cm.fp), m.precision_undefined);
    m.recall = safe_ratio(tp, static_cast<double>(cm.tp + cm.fn), m.recall_undefined);
    m.f1 = safe_ratio(2.0 * m.precision * m.recall, m.precision + m.recall, m.f1_undefined);
    return m;
}

}  // namespace detail

inline ClassReport report(const ConfusionMatrix& cm) {
    if (cm.total() == 0) {
        throw std::invalid_argument("cannot report on an empty confusion matrix");
    }
    ClassReport r;
    r.total = cm.total();
    r.pos = detail::class_metrics(cm);
    r.neg = detail::class_metrics(flip(cm));
    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(r.total);
    r.specificity = detail::safe_ratio(static_cast<double>(cm.tn),
                                       static_cast<double>(cm.tn + cm.fp),
                                       r.specificity_undefined);

    r.macro.precision = 0.5 * (r.neg.precision + r.pos.precision);
    r.macro.recall = 0.5 * (r.neg.recall + r.pos.recall);
    r.macro.f1 = 0.5 * (r.neg.f1 + r.pos.f1);
    r.macro.support = r.total;

    const auto wn = static_cast<double>(r.neg.support);
    const auto wp = static_cast<double>(r.pos.support);
    const double wsum = wn + wp;
    r.weighted.precision = (wn * r.neg.precision + wp * r.pos.precision) / wsum;
    r.weighted.recall = (wn * r.neg.recall + wp * r.pos.recall) / wsum;
    r.weighted.f1 = (wn * r.neg.f1 + wp * r.pos.f1) / wsum;
    r.weighted.support = r.total;
    return r;
}

// Per-class table plus summary lines, one with raw fractions at four decimals
// and one with two-decimal percentages. The single-row summary reports the
// pos class.
inline std::string render_report(const ClassReport& r) {
    char buf[160];
    std::string out;
    out += "              precision    recall  f1-score   support\n\n";
    const auto row = [&](const char* label, const ClassMetrics& m) {
        std::snprintf(buf, sizeof(buf), "%12s  %9.4f %9.4f %9.4f %9zu\n", label, m.precision,
                      m.recall, m.f1, m.support);
        out += buf;
    };
    row("neg", r.neg);
    row("pos", r.pos);
    out += '\n';
    std::snprintf(buf, sizeof(buf), "%12s  %9s %9s %9.4f %9zu\n", "accuracy", "", "", r.accuracy,
                  r.total);
    out += buf;
    row("macro avg", r.macro);
    row("weighted avg", r.weighted);
    out += '\n';
    std::snprintf(buf, sizeof(buf),
                  "accuracy %.4f  precision %.4f  recall %.4f  specificity %.4f  f1 %.4f\n",
                  r.accuracy, r.pos.precision, r.pos.recall, r.specificity, r.pos.f1);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "accuracy %.2f%%  precision %.2f%%  recall %.2f%%  specificity %.2f%%  "
                  "f1 %.2f%%\n",
                  100.0 * r.accuracy, 100.0 * r.pos.precision, 100.0 * r.pos.recall,
                  100.0 * r.specificity, 100.0 * r.pos.f1);
    out += buf;
    return out;
}

namespace detail {

// Shortest decimal form that parses back to the same double; NaN prints as
// "nan" so history rows without a validation score survive the round trip.
inline std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double_field(std::string_view s, std::size_t line) {
    if (s == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("invalid number '" + std::string(s) + "'", line);
    }
    return v;
}

inline int parse_int_field(std::string_view s, std::size_t line) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("invalid integer '" + std::string(s) + "'", line);
    }
    return v;
}

}  // namespace detail

inline constexpr const char* kHistoryHeader = "epoch,cycle,lr,train_loss,train_acc,val_acc";

inline std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = kHistoryHeader;
    out += '\n';
    for (const auto& r : history) {
        out += std::to_string(r.epoch);
        out += ',';
        out += std::to_string(r.cycle);
        out += ',';
        out += detail::format_double(r.lr);
        out += ',';
        out += detail::format_double(r.train_loss);
        out += ',';
        out += detail::format_double(r.train_acc);
        out += ',';
        out += detail::format_double(r.val_acc);
        out += '\n';
    }
    return out;
}

inline std::vector<EpochRecord> parse_history_csv(const std::filesystem::path& path) {
    const std::string content = detail::read_file(path);
    std::vector<EpochRecord> out;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string::npos) {
            nl = content.size();
        }
        ++line;
        std::string_view row(content.data() + pos, nl - pos);
        if (!row.empty() && row.back() == '\r') {
            row.remove_suffix(1);
        }
        pos = nl + 1;
        if (row.empty()) {
            if (pos > content.size()) {
                break;
            }
            continue;
        }
        if (line == 1) {
            if (row != kHistoryHeader) {
                throw ParseError("unexpected history header '" + std::string(row) + "'", line);
            }
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t f = 0;
        while (true) {
            const auto c = row.find(',', f);
            fields.push_back(row.substr(f, c - f));
            if (c == std::string_view::npos) {
                break;
            }
            f = c + 1;
        }
        if (fields.size() != 6) {
            throw ParseError("expected 6 history columns, got " + std::to_string(fields.size()),
                             line);
        }
        EpochRecord r;
        r.epoch = detail::parse_int_field(fields[0], line);
        r.cycle = detail::parse_int_field(fields[1], line);
        r.lr = detail::parse_double_field(fields[2], line);
        r.train_loss = detail::parse_double_field(fields[3], line);
        r.train_acc = detail::parse_double_field(fields[4], line);
        r.val_acc = detail::parse_double_field(fields[5], line);
        out.push_back(r);
    }
    return out;
}

namespace detail {

inline std::string svg_curves(const std::vector<EpochRecord>& history) {
    constexpr double kW = 640.0, kH = 400.0;
    constexpr double kL = 50.0, kR = 20.0, kT = 20.0, kB = 40.0;
    const double plot_w = kW - kL - kR;
    const double plot_h = kH - kT - kB;
    const double max_epoch = static_cast<double>(history.size() - 1);

    const auto x_of = [&](int epoch) {
        const double t = max_epoch > 0.0 ? static_cast<double>(epoch) / max_epoch : 0.0;
        return kL + t * plot_w;
    };
    const auto y_of = [&](double acc) { return kT + (1.0 - acc) * plot_h; };
    const auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };

    const auto polyline = [&](const char* color, bool use_val) {
        std::string pts;
        for (const auto& r : history) {
            const double v = use_val ? r.val_acc : r.train_acc;
            if (std::isnan(v)) {
                continue;
            }
            pts += fmt(x_of(r.epoch)) + "," + fmt(y_of(std::clamp(v, 0.0, 1.0))) + " ";
        }
        if (pts.empty()) {
            return std::string();
        }
        pts.pop_back();
        return "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
           "viewBox=\"0 0 640 400\">\n";
    svg += "  <rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double acc = 0.25 * i;
        const std::string y = fmt(y_of(acc));
        svg += "  <line x1=\"" + fmt(kL) + "\" y1=\"" + y + "\" x2=\"" + fmt(kW - kR) +
               "\" y2=\"" + y + "\" stroke=\"#ddd\"/>\n";
        svg += "  <text x=\"" + fmt(kL - 8.0) + "\" y=\"" + y +
               "\" font-size=\"11\" text-anchor=\"end\" dominant-baseline=\"middle\">" +
               fmt(acc) + "</text>\n";
    }
    svg += polyline("#1f77b4", false);
    svg += polyline("#d62728", true);
    svg += "  <text x=\"" + fmt(kL) + "\" y=\"" + fmt(kH - 10.0) +
           "\" font-size=\"11\">epoch (blue: train accuracy, red: validation accuracy)</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace detail

// History CSV with columns epoch, cycle, lr, train_loss, train_acc, val_acc.
// With svg_path set, also draws accuracy-vs-epoch curves.
inline void emit_curves(const std::vector<EpochRecord>& history,
                        const std::filesystem::path& csv_path,
                        const std::filesystem::path& svg_path = {}) {
    if (history.empty()) {
        throw std::invalid_argument("cannot emit curves for an empty history");
    }
    detail::atomic_write(csv_path, history_csv(history));
    if (!svg_path.empty()) {
        detail::atomic_write(svg_path, detail::svg_curves(history));
    }
}

}  // namespace textlens
