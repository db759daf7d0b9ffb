#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textlens/errors.hpp"
#include "textlens/rng.hpp"
#include "textlens/text.hpp"

namespace textlens {

// One row of a delimited input file. task_label is "HOF" or "NOT" when the
// file carries labels, absent otherwise (test-style data).
struct RawRecord {
    std::string id;
    std::string text;
    std::optional<std::string> task_label;
};

struct Document {
    std::string id;
    std::string raw_text;
    std::string normalized_text;
    std::vector<std::string> tokens;
};

inline Document make_document(std::string id, std::string raw_text) {
    Document d;
    d.id = std::move(id);
    d.raw_text = std::move(raw_text);
    d.normalized_text = normalize(d.raw_text);
    d.tokens = tokenize(d.normalized_text);
    return d;
}

// Strictly bipolar: hateful content scores the neg column, anything else the
// pos column, and neg + pos = 1 always.
struct BinaryLabel {
    int neg = 0;
    int pos = 1;

    static BinaryLabel hateful() { return {1, 0}; }
    static BinaryLabel benign() { return {0, 1}; }

    bool is_pos() const { return pos == 1; }

    friend bool operator==(const BinaryLabel&, const BinaryLabel&) = default;
};

struct LabeledCorpus {
    std::vector<Document> documents;
    std::vector<BinaryLabel> labels;

    std::size_t size() const { return documents.size(); }

    void push_back(Document d, BinaryLabel y) {
        documents.push_back(std::move(d));
        labels.push_back(y);
    }
};

enum class Delimiter { autodetect, tab, comma };

namespace detail {

// Splits file content into delimited records. The comma flavour follows CSV
// quoting rules ('"' fields, doubled quotes, delimiters and newlines inside
// quotes); the tab flavour is a plain per-line split. Each record carries the
// 1-based line number it started on.
struct DelimitedRecord {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

inline std::vector<DelimitedRecord> split_delimited(std::string_view content, char delim,
                                                    bool quoted) {
    std::vector<DelimitedRecord> records;
    DelimitedRecord rec;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    rec.line = 1;

    const auto end_field = [&] {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_record = [&] {
        if (field_started || !rec.fields.empty() || !field.empty()) {
            end_field();
            records.push_back(std::move(rec));
            rec = DelimitedRecord{};
        }
        rec.line = line;
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                }
                field.push_back(c);
            }
            continue;
        }
        if (quoted && c == '"' && field.empty()) {
            in_quotes = true;
            field_started = true;
        } else if (c == delim) {
            end_field();
            field_started = true;  // a delimiter opens the next field
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') {
                field.pop_back();
            }
            ++line;
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (!field.empty() && field.back() == '\r') {
        field.pop_back();
    }
    end_record();
    return records;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline std::string trim_copy(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) {
        ++b;
    }
    while (e > b && is_space(s[e - 1])) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Loads id/text(/task_1) rows from a tab- or comma-delimited file with a
// header. The delimiter is auto-detected from the header line unless forced.
inline std::vector<RawRecord> load_records(const std::filesystem::path& path, bool has_labels,
                                           Delimiter delimiter = Delimiter::autodetect) {
    const std::string content = detail::read_file(path);

    if (delimiter == Delimiter::autodetect) {
        const auto header_end = content.find('\n');
        const auto header = content.substr(0, header_end);
        delimiter = header.find('\t') != std::string::npos ? Delimiter::tab : Delimiter::comma;
    }
    const bool quoted = delimiter == Delimiter::comma;
    const char delim = delimiter == Delimiter::comma ? ',' : '\t';

    const auto rows = detail::split_delimited(content, delim, quoted);
    if (rows.empty()) {
        throw ParseError("empty file, expected a header row", 1);
    }

    // header: locate the needed columns; extra columns are ignored
    long id_col = -1, text_col = -1, label_col = -1;
    const auto& header = rows.front();
    for (std::size_t c = 0; c < header.fields.size(); ++c) {
        std::string name = detail::trim_copy(header.fields[c]);
        if (name.starts_with("\xEF\xBB\xBF")) {
            name.erase(0, 3);  // UTF-8 BOM
        }
        if (name == "id") {
            id_col = static_cast<long>(c);
        } else if (name == "text") {
            text_col = static_cast<long>(c);
        } else if (name == "task_1") {
            label_col = static_cast<long>(c);
        }
    }
    if (id_col < 0) {
        throw ParseError("missing required column 'id'", header.line);
    }
    if (text_col < 0) {
        throw ParseError("missing required column 'text'", header.line);
    }
    if (has_labels && label_col < 0) {
        throw ParseError("missing required column 'task_1'", header.line);
    }

    std::vector<RawRecord> out;
    out.reserve(rows.size() - 1);
    std::unordered_set<std::string> seen_ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const auto field = [&](long col) -> std::string {
            return col >= 0 && static_cast<std::size_t>(col) < row.fields.size()
                       ? row.fields[static_cast<std::size_t>(col)]
                       : std::string();
        };
        RawRecord rec;
        rec.id = detail::trim_copy(field(id_col));
        rec.text = field(text_col);
        if (rec.id.empty()) {
            throw ParseError("row is missing an id", row.line);
        }
        if (rec.text.empty()) {
            throw ParseError("row '" + rec.id + "' is missing text", row.line);
        }
        if (!seen_ids.insert(rec.id).second) {
            throw ParseError("duplicate id '" + rec.id + "'", row.line);
        }
        if (has_labels) {
            const std::string label = detail::trim_copy(field(label_col));
            if (label != "HOF" && label != "NOT") {
                throw ParseError("invalid label '" + label + "' for id '" + rec.id +
                                     "', expected HOF or NOT",
                                 row.line);
            }
            rec.task_label = label;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

// HOF -> (neg=1, pos=0), NOT -> (neg=0, pos=1). Documents come out normalized
// and tokenized.
inline LabeledCorpus binarize(const std::vector<RawRecord>& records) {
    LabeledCorpus corpus;
    corpus.documents.reserve(records.size());
    corpus.labels.reserve(records.size());
    for (const auto& rec : records) {
        if (!rec.task_label) {
            throw ParseError("record '" + rec.id + "' has no label to binarize");
        }
        corpus.documents.push_back(make_document(rec.id, rec.text));
        corpus.labels.push_back(*rec.task_label == "HOF" ? BinaryLabel::hateful()
                                                         : BinaryLabel::benign());
    }
    return corpus;
}

// Seeded stratified partition into (train, validation). Per class, the
// validation share is round(valid_fraction * class size), so the realized
// proportion is within one document of the request. Original document order
// is preserved inside each part.
inline std::pair<LabeledCorpus, LabeledCorpus> stratified_split(const LabeledCorpus& corpus,
                                                                double valid_fraction,
                                                                std::uint64_t seed) {
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
        throw std::invalid_argument("valid_fraction must be in (0, 1)");
    }
    if (corpus.size() == 0) {
        throw std::invalid_argument("cannot split an empty corpus");
    }

    std::vector<std::size_t> neg_idx, pos_idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        (corpus.labels[i].is_pos() ? pos_idx : neg_idx).push_back(i);
    }
    if (neg_idx.empty() || pos_idx.empty()) {
        throw std::invalid_argument("each class needs at least one document to stratify");
    }

    std::mt19937_64 rng(seed);
    std::vector<bool> in_valid(corpus.size(), false);
    for (auto* cls : {&neg_idx, &pos_idx}) {
        shuffle_in_place(*cls, rng);
        const auto n_valid = static_cast<std::size_t>(
            std::llround(valid_fraction * static_cast<double>(cls->size())));
        for (std::size_t k = 0; k < n_valid; ++k) {
            in_valid[(*cls)[k]] = true;
        }
    }

    LabeledCorpus train, valid;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        (in_valid[i] ? valid : train).push_back(corpus.documents[i], corpus.labels[i]);
    }
    return {std::move(train), std::move(valid)};
}

// --- canonical corpus files: JSON lines, one object per document ---

inline void write_corpus_jsonl(const LabeledCorpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write file: " + path.string());
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        nlohmann::ordered_json j;
        j["id"] = corpus.documents[i].id;
        j["text"] = corpus.documents[i].normalized_text;
        j["neg"] = corpus.labels[i].neg;
        j["pos"] = corpus.labels[i].pos;
        out << j.dump() << '\n';
    }
}

inline void write_documents_jsonl(const std::vector<Document>& docs,
                                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write file: " + path.string());
    }
    for (const auto& d : docs) {
        nlohmann::ordered_json j;
        j["id"] = d.id;
        j["text"] = d.normalized_text;
        out << j.dump() << '\n';
    }
}

namespace detail {

inline std::vector<std::pair<nlohmann::json, std::size_t>> read_jsonl(
    const std::filesystem::path& path) {
    const std::string content = read_file(path);
    std::vector<std::pair<nlohmann::json, std::size_t>> out;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
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
        if (trim_copy(row).empty()) {
            continue;
        }
        auto j = nlohmann::json::parse(row, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError("invalid JSON", line);
        }
        out.emplace_back(std::move(j), line);
    }
    return out;
}

}  // namespace detail

inline LabeledCorpus read_corpus_jsonl(const std::filesystem::path& path) {
    LabeledCorpus corpus;
    for (const auto& [j, line] : detail::read_jsonl(path)) {
        if (!j.contains("id") || !j.contains("text")) {
            throw ParseError("corpus line needs 'id' and 'text'", line);
        }
        if (!j.contains("neg") || !j.contains("pos")) {
            throw ParseError("corpus line needs 'neg' and 'pos' labels", line);
        }
        try {
            const int neg = j.at("neg").get<int>();
            const int pos = j.at("pos").get<int>();
            if (neg + pos != 1 || neg < 0 || pos < 0) {
                throw ParseError("labels must satisfy neg + pos = 1", line);
            }
            corpus.push_back(make_document(j.at("id").get<std::string>(),
                                           j.at("text").get<std::string>()),
                             BinaryLabel{neg, pos});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad corpus line: ") + e.what(), line);
        }
    }
    return corpus;
}

inline std::vector<Document> read_documents_jsonl(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for (const auto& [j, line] : detail::read_jsonl(path)) {
        if (!j.contains("id") || !j.contains("text")) {
            throw ParseError("document line needs 'id' and 'text'", line);
        }
        try {
            docs.push_back(
                make_document(j.at("id").get<std::string>(), j.at("text").get<std::string>()));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad document line: ") + e.what(), line);
        }
    }
    return docs;
}

}  // namespace textlens
