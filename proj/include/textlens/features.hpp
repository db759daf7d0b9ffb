#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textlens/corpus.hpp"
#include "textlens/errors.hpp"

namespace textlens {

enum class Weighting { binary, term_frequency };

inline std::string to_string(Weighting w) {
    return w == Weighting::binary ? "binary" : "term_frequency";
}

inline Weighting weighting_from_string(std::string_view s) {
    if (s == "binary") {
        return Weighting::binary;
    }
    if (s == "term_frequency") {
        return Weighting::term_frequency;
    }
    throw ModelFormatError("unknown weighting '" + std::string(s) + "'");
}

struct FeatureConfig {
    int ngram_max = 3;
    int max_tokens = 75;
    std::uint32_t hash_dimension = 1u << 18;
    Weighting weighting = Weighting::binary;
};

inline void validate(const FeatureConfig& cfg) {
    if (cfg.ngram_max < 1 || cfg.ngram_max > 5) {
        throw std::invalid_argument("ngram_max must be in [1, 5]");
    }
    if (cfg.max_tokens < 1) {
        throw std::invalid_argument("max_tokens must be >= 1");
    }
    if (cfg.hash_dimension < 2 || (cfg.hash_dimension & (cfg.hash_dimension - 1)) != 0) {
        throw std::invalid_argument("hash_dimension must be a power of two >= 2");
    }
}

// Sparse vector: entries sorted by index, zero weights omitted.
struct FeatureVector {
    std::vector<std::pair<std::uint32_t, double>> entries;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// The n-gram hash is a fixed constant of the format: FNV-1a 64 folded to the
// low bits. The offset basis is recorded in model files as the hash seed so a
// loaded model can refuse features produced by a different function.
inline constexpr std::uint64_t kHashOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kHashPrime = 1099511628211ull;
inline constexpr const char* kHashAlgorithm = "fnv1a64-xorfold";

inline std::uint64_t hash_ngram(std::string_view gram) {
    std::uint64_t h = kHashOffsetBasis;
    for (const char c : gram) {
        h ^= static_cast<unsigned char>(c);
        h *= kHashPrime;
    }
    return h ^ (h >> 32);
}

// All contiguous n-grams for n = 1..ngram_max over the first max_tokens
// tokens, grouped by n and in positional order within each group. N-gram
// tokens are joined with a single space.
inline std::vector<std::string> extract_ngrams(
    const std::vector<std::string>& tokens, int ngram_max,
    std::size_t max_tokens = std::numeric_limits<std::size_t>::max()) {
    if (ngram_max < 1) {
        throw std::invalid_argument("ngram_max must be >= 1");
    }
    const std::size_t k = std::min(tokens.size(), max_tokens);
    std::vector<std::string> grams;
    for (int n = 1; n <= ngram_max; ++n) {
        const auto un = static_cast<std::size_t>(n);
        if (un > k) {
            break;
        }
        for (std::size_t i = 0; i + un <= k; ++i) {
            std::string gram = tokens[i];
            for (std::size_t j = 1; j < un; ++j) {
                gram += ' ';
                gram += tokens[i + j];
            }
            grams.push_back(std::move(gram));
        }
    }
    return grams;
}

// Hashing-trick vectorizer. Distinct n-grams weigh 1 (binary) or their count
// (term_frequency); n-grams that collide in index space sum their weights.
inline FeatureVector vectorize_tokens(const std::vector<std::string>& tokens,
                                      const FeatureConfig& cfg) {
    validate(cfg);
    const auto grams =
        extract_ngrams(tokens, cfg.ngram_max, static_cast<std::size_t>(cfg.max_tokens));

    std::unordered_map<std::string, int> counts;
    for (const auto& g : grams) {
        ++counts[g];
    }

    const std::uint64_t mask = cfg.hash_dimension - 1;
    std::unordered_map<std::uint32_t, double> acc;
    for (const auto& [gram, count] : counts) {
        const auto index = static_cast<std::uint32_t>(hash_ngram(gram) & mask);
        acc[index] += cfg.weighting == Weighting::binary ? 1.0 : static_cast<double>(count);
    }

    FeatureVector fv;
    fv.entries.assign(acc.begin(), acc.end());
    std::sort(fv.entries.begin(), fv.entries.end());
    return fv;
}

inline FeatureVector vectorize(const Document& doc, const FeatureConfig& cfg) {
    return vectorize_tokens(doc.tokens, cfg);
}

// FeatureConfig travels inside model files.
inline void to_json(nlohmann::ordered_json& j, const FeatureConfig& cfg) {
    j = nlohmann::ordered_json{{"ngram_max", cfg.ngram_max},
                               {"max_tokens", cfg.max_tokens},
                               {"hash_dimension", cfg.hash_dimension},
                               {"weighting", to_string(cfg.weighting)},
                               {"hash_algorithm", kHashAlgorithm},
                               {"hash_seed", kHashOffsetBasis}};
}

inline FeatureConfig feature_config_from_json(const nlohmann::ordered_json& j) {
    FeatureConfig cfg;
    cfg.ngram_max = j.at("ngram_max").get<int>();
    cfg.max_tokens = j.at("max_tokens").get<int>();
    cfg.hash_dimension = j.at("hash_dimension").get<std::uint32_t>();
    cfg.weighting = weighting_from_string(j.at("weighting").get<std::string>());
    if (j.at("hash_algorithm").get<std::string>() != kHashAlgorithm ||
        j.at("hash_seed").get<std::uint64_t>() != kHashOffsetBasis) {
        throw ModelFormatError("model was built with an incompatible feature hash");
    }
    validate(cfg);
    return cfg;
}

}  // namespace textlens
