#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "textlens/corpus.hpp"
#include "textlens/rng.hpp"

// Self-deleting scratch directory for file-based tests.
struct ScratchDir {
    std::filesystem::path path;

    ScratchDir() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "textlens_test_XXXXXX").string();
        if (mkdtemp(tmpl.data()) == nullptr) {
            throw std::runtime_error("mkdtemp failed");
        }
        path = tmpl;
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_text(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Small synthetic corpus where one marker token decides the hateful class.
// Benign vocabulary words are spread over both classes.
inline textlens::LabeledCorpus marker_corpus(std::size_t n_docs, std::uint64_t seed,
                                             const std::string& marker = "darkmark") {
    static const std::vector<std::string> vocab = {
        "sun",  "river", "stone", "quiet", "maple", "cloud", "amber", "field",
        "lamp", "paper", "round", "early", "green", "still", "warm",  "open"};
    std::mt19937_64 rng(seed);
    textlens::LabeledCorpus corpus;
    for (std::size_t i = 0; i < n_docs; ++i) {
        const bool hateful = i % 2 == 0;
        const std::size_t len = 3 + textlens::bounded_u64(rng, 4);
        std::string text;
        for (std::size_t k = 0; k < len; ++k) {
            if (!text.empty()) {
                text += ' ';
            }
            text += vocab[textlens::bounded_u64(rng, vocab.size())];
        }
        if (hateful) {
            const std::size_t words = len + 1;
            const std::size_t slot = textlens::bounded_u64(rng, words);
            std::vector<std::string> parts = textlens::tokenize(text);
            parts.insert(parts.begin() + static_cast<std::ptrdiff_t>(slot % (parts.size() + 1)),
                         marker);
            text.clear();
            for (const auto& w : parts) {
                if (!text.empty()) {
                    text += ' ';
                }
                text += w;
            }
        }
        corpus.push_back(textlens::make_document("doc" + std::to_string(i), text),
                         hateful ? textlens::BinaryLabel::hateful()
                                 : textlens::BinaryLabel::benign());
    }
    return corpus;
}
