#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textlens/corpus.hpp"
#include "textlens/errors.hpp"
#include "textlens/features.hpp"
#include "textlens/model.hpp"
#include "textlens/numeric.hpp"
#include "textlens/rng.hpp"

namespace textlens {

enum class TargetClass { pos, neg };

inline std::string to_string(TargetClass t) {
    return t == TargetClass::pos ? "pos" : "neg";
}

inline TargetClass target_class_from_string(std::string_view s) {
    if (s == "pos") {
        return TargetClass::pos;
    }
    if (s == "neg") {
        return TargetClass::neg;
    }
    throw ParseError("unknown target class '" + std::string(s) + "'");
}

struct ExplainConfig {
    int n_samples = 1000;
    double ridge_lambda = 1e-3;
    double kernel_width = 0.25;  // on mask-fraction distance
    std::uint64_t seed = 0;
    double proba_clamp = 1e-6;
};

inline void validate(const ExplainConfig& cfg) {
    if (cfg.n_samples < 1) {
        throw std::invalid_argument("n_samples must be >= 1");
    }
    if (!(cfg.ridge_lambda >= 0.0)) {
        throw std::invalid_argument("ridge_lambda must be >= 0");
    }
    if (!(cfg.kernel_width > 0.0)) {
        throw std::invalid_argument("kernel_width must be > 0");
    }
    if (!(cfg.proba_clamp > 0.0 && cfg.proba_clamp < 0.5)) {
        throw std::invalid_argument("proba_clamp must be in (0, 0.5)");
    }
}

struct TokenContribution {
    std::string token;
    std::size_t position = 0;
    double contribution = 0.0;

    friend bool operator==(const TokenContribution&, const TokenContribution&) = default;
};

// A per-word decomposition of one prediction, expressed in the target-class
// frame: sigmoid(highlighted_sum + bias) is the probability of target_class,
// while score stays on the pos-logit side regardless of the frame.
struct Explanation {
    TargetClass target_class = TargetClass::pos;
    double probability = 0.0;
    double score = 0.0;
    double bias = 0.0;
    double highlighted_sum = 0.0;
    std::vector<TokenContribution> tokens;

    friend bool operator==(const Explanation&, const Explanation&) = default;
};

inline Explanation make_explanation(TargetClass target, std::vector<TokenContribution> tokens,
                                    double bias) {
    Explanation e;
    e.target_class = target;
    e.tokens = std::move(tokens);
    e.bias = bias;
    e.highlighted_sum = 0.0;
    for (const auto& t : e.tokens) {
        e.highlighted_sum += t.contribution;
    }
    const double z = e.highlighted_sum + e.bias;
    e.probability = sigmoid(z);
    e.score = target == TargetClass::pos ? z : -z;
    return e;
}

using Mask = std::vector<std::uint8_t>;

// Masking patterns over token positions. The first sample is always the
// intact sentence; the rest keep each token with probability one half, and
// an all-masked draw is rejected and redrawn.
inline std::vector<Mask> sample_perturbations(std::size_t n_tokens, int n_samples,
                                              std::uint64_t seed) {
    if (n_tokens == 0) {
        throw EmptyInputError("cannot perturb an empty token list");
    }
    if (n_samples < static_cast<int>(n_tokens) + 1) {
        throw std::invalid_argument("n_samples must be at least the token count + 1");
    }
    std::mt19937_64 rng(seed);
    std::vector<Mask> masks;
    masks.reserve(static_cast<std::size_t>(n_samples));
    masks.emplace_back(n_tokens, std::uint8_t{1});
    while (masks.size() < static_cast<std::size_t>(n_samples)) {
        Mask m(n_tokens, 0);
        bool any = false;
        for (auto& bit : m) {
            bit = coin(rng) ? 1 : 0;
            any = any || bit;
        }
        if (any) {
            masks.push_back(std::move(m));
        }
    }
    return masks;
}

struct Surrogate {
    std::vector<double> beta;
    double beta0 = 0.0;
};

namespace detail {

inline std::string masked_text(const std::vector<std::string>& tokens, const Mask& mask) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!mask[i]) {
            continue;
        }
        if (!out.empty()) {
            out += ' ';
        }
        out += tokens[i];
    }
    return out;
}

// Weighted least squares with an L2 penalty on the token coefficients only.
// Normal equations over (beta, beta0), solved by Cholesky.
inline Surrogate solve_weighted_ridge(const std::vector<Mask>& masks,
                                      const std::vector<double>& targets,
                                      const std::vector<double>& weights, double lambda) {
    const std::size_t t = masks.front().size();
    const std::size_t dim = t + 1;
    std::vector<double> a(dim * dim, 0.0);
    std::vector<double> rhs(dim, 0.0);
    std::vector<double> phi(dim, 0.0);

    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            phi[j] = masks[i][j];
        }
        phi[t] = 1.0;
        const double w = weights[i];
        for (std::size_t r = 0; r < dim; ++r) {
            if (phi[r] == 0.0) {
                continue;
            }
            const double wr = w * phi[r];
            for (std::size_t c = r; c < dim; ++c) {
                a[r * dim + c] += wr * phi[c];
            }
            rhs[r] += wr * targets[i];
        }
    }
    double max_diag = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        if (j < t) {
            a[j * dim + j] += lambda;
        }
        max_diag = std::max(max_diag, a[j * dim + j]);
        for (std::size_t r = 0; r < j; ++r) {
            a[j * dim + r] = a[r * dim + j];
        }
    }

    // lower-triangular Cholesky factor, in place
    const double pivot_floor = 1e-12 * max_diag;
    for (std::size_t k = 0; k < dim; ++k) {
        double d = a[k * dim + k];
        for (std::size_t m = 0; m < k; ++m) {
            d -= a[k * dim + m] * a[k * dim + m];
        }
        if (!(d > pivot_floor)) {
            throw ExplainError("surrogate system is singular");
        }
        a[k * dim + k] = std::sqrt(d);
        for (std::size_t r = k + 1; r < dim; ++r) {
            double v = a[r * dim + k];
            for (std::size_t m = 0; m < k; ++m) {
                v -= a[r * dim + m] * a[k * dim + m];
            }
            a[r * dim + k] = v / a[k * dim + k];
        }
    }
    for (std::size_t r = 0; r < dim; ++r) {  // L y = rhs
        double v = rhs[r];
        for (std::size_t m = 0; m < r; ++m) {
            v -= a[r * dim + m] * rhs[m];
        }
        rhs[r] = v / a[r * dim + r];
    }
    for (std::size_t r = dim; r-- > 0;) {  // L^T x = y
        double v = rhs[r];
        for (std::size_t m = r + 1; m < dim; ++m) {
            v -= a[m * dim + r] * rhs[m];
        }
        rhs[r] = v / a[r * dim + r];
    }

    Surrogate s;
    s.beta.assign(rhs.begin(), rhs.begin() + static_cast<std::ptrdiff_t>(t));
    s.beta0 = rhs[t];
    return s;
}

}  // namespace detail

// Fits the local linear surrogate in logit space. Sample weights follow
// exp(-d^2 / kernel_width^2) with d the masked fraction, then get rescaled to
// mean 1 so the ridge penalty's bite does not depend on the kernel's overall
// scale.
inline Surrogate fit_surrogate(const std::vector<Mask>& masks,
                               const std::vector<double>& black_box_probas,
                               const ExplainConfig& cfg) {
    validate(cfg);
    if (masks.empty() || masks.size() != black_box_probas.size()) {
        throw std::invalid_argument("masks and probabilities must be non-empty and parallel");
    }
    const auto t = static_cast<double>(masks.front().size());
    std::vector<double> targets(masks.size());
    std::vector<double> weights(masks.size());
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const double p = black_box_probas[i];
        if (!std::isfinite(p)) {
            throw ExplainError("black box returned a non-finite probability");
        }
        targets[i] = logit(clamp_proba(p, cfg.proba_clamp));
        std::size_t masked = 0;
        for (const auto bit : masks[i]) {
            masked += bit ? 0 : 1;
        }
        const double d = static_cast<double>(masked) / t;
        weights[i] = std::exp(-(d * d) / (cfg.kernel_width * cfg.kernel_width));
        weight_sum += weights[i];
    }
    const double scale = static_cast<double>(masks.size()) / weight_sum;
    for (auto& w : weights) {
        w *= scale;
    }
    return detail::solve_weighted_ridge(masks, targets, weights, cfg.ridge_lambda);
}

// Any callable mapping raw text to the pos-class probability.
using Predictor = std::function<double(const std::string&)>;

inline Predictor make_predictor(const LinearClassifier& model) {
    return [model](const std::string& text) {
        return predict_proba(model, vectorize_tokens(tokenize(normalize(text)),
                                                     model.feature_config));
    };
}

namespace detail {

inline Explanation explain_impl(const Document& doc, const Predictor& predictor,
                                const ExplainConfig& cfg, std::optional<TargetClass> forced) {
    validate(cfg);
    const auto& tokens = doc.tokens;
    if (tokens.empty()) {
        throw EmptyInputError("document '" + doc.id + "' has no tokens after normalization");
    }

    const auto masks = sample_perturbations(tokens.size(), cfg.n_samples, cfg.seed);
    std::vector<double> probas(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        probas[i] = predictor(masked_text(tokens, masks[i]));
        if (!std::isfinite(probas[i])) {
            throw ExplainError("black box returned a non-finite probability");
        }
    }

    const TargetClass target = forced.value_or(probas[0] >= 0.5 ? TargetClass::pos
                                                                : TargetClass::neg);
    const Surrogate s = fit_surrogate(masks, probas, cfg);
    const double sign = target == TargetClass::pos ? 1.0 : -1.0;

    std::vector<TokenContribution> contributions;
    contributions.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        contributions.push_back({tokens[i], i, sign * s.beta[i]});
    }
    return make_explanation(target, std::move(contributions), sign * s.beta0);
}

}  // namespace detail

// Target class is whichever the predictor favours on the intact sentence.
inline Explanation explain(const Document& doc, const Predictor& predictor,
                           const ExplainConfig& cfg) {
    return detail::explain_impl(doc, predictor, cfg, std::nullopt);
}

inline Explanation explain(const Document& doc, const Predictor& predictor,
                           const ExplainConfig& cfg, TargetClass forced) {
    return detail::explain_impl(doc, predictor, cfg, forced);
}

enum class RenderFormat { text, json };

inline nlohmann::ordered_json to_json(const Explanation& e) {
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (const auto& t : e.tokens) {
        tokens.push_back(nlohmann::ordered_json{
            {"token", t.token}, {"position", t.position}, {"contribution", t.contribution}});
    }
    return nlohmann::ordered_json{{"target_class", to_string(e.target_class)},
                                  {"probability", e.probability},
                                  {"score", e.score},
                                  {"bias", e.bias},
                                  {"highlighted_sum", e.highlighted_sum},
                                  {"tokens", std::move(tokens)}};
}

inline Explanation explanation_from_json(const nlohmann::ordered_json& j) {
    try {
        Explanation e;
        e.target_class = target_class_from_string(j.at("target_class").get<std::string>());
        e.probability = j.at("probability").get<double>();
        e.score = j.at("score").get<double>();
        e.bias = j.at("bias").get<double>();
        e.highlighted_sum = j.at("highlighted_sum").get<double>();
        for (const auto& t : j.at("tokens")) {
            e.tokens.push_back({t.at("token").get<std::string>(),
                                t.at("position").get<std::size_t>(),
                                t.at("contribution").get<double>()});
        }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("bad explanation payload: ") + ex.what());
    }
}

// Text layout: a header line, the two-row decomposition table (highlighted
// sum, then the intercept pseudo-feature), then the sentence with each
// token's signed contribution attached. ANSI colour, when enabled, marks the
// strongest tokens.
inline std::string render(const Explanation& e, RenderFormat format, bool ansi = false) {
    if (format == RenderFormat::json) {
        return to_json(e).dump(2) + "\n";
    }
    char buf[128];
    std::string out;
    std::snprintf(buf, sizeof(buf), "y=%s (probability %.3f, score %.3f) top features\n",
                  to_string(e.target_class).c_str(), e.probability, e.score);
    out += buf;
    out += "\nContribution  Feature\n";
    std::snprintf(buf, sizeof(buf), "%+12.3f  Highlighted in text (sum)\n", e.highlighted_sum);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%+12.3f  <BIAS>\n", e.bias);
    out += buf;

    double strongest = 0.0;
    for (const auto& t : e.tokens) {
        strongest = std::max(strongest, std::abs(t.contribution));
    }
    out += '\n';
    for (std::size_t i = 0; i < e.tokens.size(); ++i) {
        const auto& t = e.tokens[i];
        if (i > 0) {
            out += ' ';
        }
        const bool strong = ansi && strongest > 0.0 && std::abs(t.contribution) >= 0.5 * strongest;
        if (strong) {
            out += t.contribution >= 0.0 ? "\x1b[1;32m" : "\x1b[1;31m";
        }
        std::snprintf(buf, sizeof(buf), "%s(%+.3f)", t.token.c_str(), t.contribution);
        out += buf;
        if (strong) {
            out += "\x1b[0m";
        }
    }
    out += '\n';
    return out;
}

}  // namespace textlens
