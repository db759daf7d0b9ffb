#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textlens/corpus.hpp"
#include "textlens/errors.hpp"
#include "textlens/features.hpp"
#include "textlens/numeric.hpp"
#include "textlens/rng.hpp"

namespace textlens {

// Binary logistic classifier over hashed n-gram features:
//   z = w.x + b,  P(pos | x) = sigmoid(z)
struct LinearClassifier {
    std::vector<double> weights;  // length == feature_config.hash_dimension
    double intercept = 0.0;
    FeatureConfig feature_config;
};

inline LinearClassifier make_classifier(const FeatureConfig& cfg) {
    validate(cfg);
    LinearClassifier m;
    m.feature_config = cfg;
    m.weights.assign(cfg.hash_dimension, 0.0);
    return m;
}

inline double predict_logit(const LinearClassifier& model, const FeatureVector& x) {
    double z = model.intercept;
    for (const auto& [index, value] : x.entries) {
        z += model.weights[index] * value;
    }
    return z;
}

// Probability of the pos (non-hateful) class; the neg probability is its
// complement.
inline double predict_proba(const LinearClassifier& model, const FeatureVector& x) {
    return sigmoid(predict_logit(model, x));
}

inline BinaryLabel predict_label(const LinearClassifier& model, const FeatureVector& x) {
    return predict_logit(model, x) >= 0.0 ? BinaryLabel::benign() : BinaryLabel::hateful();
}

struct TrainConfig {
    int batch_size = 16;
    double learning_rate = 1e-5;
    double l2_strength = 1e-4;  // lambda; the inverse of a C-style setting
    int epochs = 1;
    std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
    if (cfg.batch_size < 1) {
        throw std::invalid_argument("batch_size must be >= 1");
    }
    if (cfg.epochs < 0) {
        throw std::invalid_argument("epochs must be >= 0");
    }
    if (!(cfg.l2_strength >= 0.0)) {
        throw std::invalid_argument("l2_strength must be >= 0");
    }
    if (!(cfg.learning_rate > 0.0)) {
        throw std::invalid_argument("learning_rate must be > 0");
    }
}

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_intercept = 0.0;
};

// Mean cross-entropy over the batch plus (lambda/2)||w||^2. Probabilities are
// clamped to [1e-12, 1-1e-12] before the logs; the intercept carries no
// penalty.
inline LossGrad loss_and_gradient(const LinearClassifier& model,
                                  const std::vector<FeatureVector>& xs,
                                  const std::vector<BinaryLabel>& ys, double l2_strength) {
    if (xs.empty() || xs.size() != ys.size()) {
        throw std::invalid_argument("batch must be non-empty with parallel labels");
    }
    constexpr double kClamp = 1e-12;
    const double inv_b = 1.0 / static_cast<double>(xs.size());

    LossGrad out;
    out.grad_weights.assign(model.weights.size(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double p = sigmoid(predict_logit(model, xs[i]));
        const double y = ys[i].is_pos() ? 1.0 : 0.0;
        const double pc = clamp_proba(p, kClamp);
        out.loss -= inv_b * (y * std::log(pc) + (1.0 - y) * std::log1p(-pc));
        const double coeff = inv_b * (p - y);
        for (const auto& [index, value] : xs[i].entries) {
            out.grad_weights[index] += coeff * value;
        }
        out.grad_intercept += coeff;
    }
    if (l2_strength > 0.0) {
        double sq = 0.0;
        for (std::size_t k = 0; k < model.weights.size(); ++k) {
            sq += model.weights[k] * model.weights[k];
            out.grad_weights[k] += l2_strength * model.weights[k];
        }
        out.loss += 0.5 * l2_strength * sq;
    }
    return out;
}

// One history row per epoch; cycle stays 0 outside of multi-cycle plans.
// val_acc is NaN when no validation set was given.
struct EpochRecord {
    int epoch = 0;
    int cycle = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = std::numeric_limits<double>::quiet_NaN();

    // field-wise; two NaN val_acc values compare unequal as usual
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// Per-step learning rate: step counts from 0 across the whole run,
// epoch_position is the fractional epoch (step / steps-per-epoch).
using StepLearningRate =
    std::function<double(long long step, long long total_steps, double epoch_position)>;

struct TrainResult {
    LinearClassifier model;
    std::vector<EpochRecord> history;
};

inline double accuracy(const LinearClassifier& model, const std::vector<FeatureVector>& xs,
                       const std::vector<BinaryLabel>& ys) {
    if (xs.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        hits += (predict_logit(model, xs[i]) >= 0.0) == ys[i].is_pos() ? 1u : 0u;
    }
    return static_cast<double>(hits) / static_cast<double>(xs.size());
}

inline std::vector<FeatureVector> vectorize_corpus(const LabeledCorpus& corpus,
                                                   const FeatureConfig& cfg) {
    std::vector<FeatureVector> xs;
    xs.reserve(corpus.size());
    for (const auto& d : corpus.documents) {
        xs.push_back(vectorize(d, cfg));
    }
    return xs;
}

// Mini-batch SGD with a seeded per-epoch shuffle. Bit-for-bit deterministic
// for a given seed; throws DivergedError with the step index if the loss
// stops being finite.
inline TrainResult train(const LinearClassifier& init, const LabeledCorpus& train_set,
                         const LabeledCorpus* validation, const TrainConfig& cfg,
                         const StepLearningRate& lr_fn = {}) {
    validate(cfg);
    if (train_set.size() == 0) {
        throw std::invalid_argument("cannot train on an empty corpus");
    }

    TrainResult result;
    result.model = init;
    auto& model = result.model;

    const auto xs = vectorize_corpus(train_set, model.feature_config);
    std::vector<FeatureVector> val_xs;
    if (validation != nullptr) {
        val_xs = vectorize_corpus(*validation, model.feature_config);
    }

    const auto n = train_set.size();
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    const long long steps_per_epoch = static_cast<long long>((n + b - 1) / b);
    const long long total_steps = steps_per_epoch * cfg.epochs;

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<FeatureVector> batch_x;
    std::vector<BinaryLabel> batch_y;
    long long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        double loss_sum = 0.0;
        double last_lr = 0.0;
        long long batches = 0;
        for (std::size_t start = 0; start < n; start += b) {
            batch_x.clear();
            batch_y.clear();
            for (std::size_t k = start; k < std::min(start + b, n); ++k) {
                batch_x.push_back(xs[order[k]]);
                batch_y.push_back(train_set.labels[order[k]]);
            }
            const double lr =
                lr_fn ? lr_fn(step, total_steps,
                              static_cast<double>(step) / static_cast<double>(steps_per_epoch))
                      : cfg.learning_rate;

            const LossGrad lg = loss_and_gradient(model, batch_x, batch_y, cfg.l2_strength);
            if (!std::isfinite(lg.loss)) {
                throw DivergedError(step, lg.loss);
            }
            for (std::size_t k = 0; k < model.weights.size(); ++k) {
                model.weights[k] -= lr * lg.grad_weights[k];
            }
            model.intercept -= lr * lg.grad_intercept;

            loss_sum += lg.loss;
            last_lr = lr;
            ++batches;
            ++step;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.cycle = 0;
        rec.lr = last_lr;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.train_acc = accuracy(model, xs, train_set.labels);
        if (validation != nullptr) {
            rec.val_acc = accuracy(model, val_xs, validation->labels);
        }
        result.history.push_back(rec);
    }
    return result;
}

// --- persistence ---

struct TrainMeta {
    std::uint64_t seed = 0;
    int epochs = 0;
    double final_lr = 0.0;
    std::vector<EpochRecord> history;
};

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json epoch_record_to_json(const EpochRecord& r) {
    nlohmann::ordered_json j{{"epoch", r.epoch},   {"cycle", r.cycle},
                             {"lr", r.lr},         {"train_loss", r.train_loss},
                             {"train_acc", r.train_acc}};
    if (std::isnan(r.val_acc)) {
        j["val_acc"] = nullptr;  // JSON has no NaN
    } else {
        j["val_acc"] = r.val_acc;
    }
    return j;
}

inline EpochRecord epoch_record_from_json(const nlohmann::ordered_json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.cycle = j.at("cycle").get<int>();
    r.lr = j.at("lr").get<double>();
    r.train_loss = j.at("train_loss").get<double>();
    r.train_acc = j.at("train_acc").get<double>();
    r.val_acc = j.at("val_acc").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                          : j.at("val_acc").get<double>();
    return r;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write file: " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw IoError("short write: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
    }
}

}  // namespace detail

// Model file: one JSON document with the feature config, the nonzero weights
// as an index -> value map, the intercept, and training metadata. Doubles are
// emitted with round-trip precision, so save/load is bit-exact.
inline void save_model(const LinearClassifier& model, const TrainMeta& meta,
                       const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format_version"] = kModelFormatVersion;
    nlohmann::ordered_json fc;
    to_json(fc, model.feature_config);
    j["feature_config"] = fc;

    nlohmann::ordered_json weights = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        if (model.weights[k] != 0.0) {
            weights[std::to_string(k)] = model.weights[k];
        }
    }
    j["weights"] = std::move(weights);
    j["intercept"] = model.intercept;

    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto& r : meta.history) {
        hist.push_back(detail::epoch_record_to_json(r));
    }
    j["train_meta"] = nlohmann::ordered_json{{"seed", meta.seed},
                                             {"epochs", meta.epochs},
                                             {"final_lr", meta.final_lr},
                                             {"history", std::move(hist)}};

    detail::atomic_write(path, j.dump());
}

struct ModelFile {
    LinearClassifier model;
    TrainMeta meta;
};

inline ModelFile load_model(const std::filesystem::path& path) {
    const std::string content = detail::read_file(path);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ModelFormatError("corrupted model file: " + path.string());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelFormatError("unsupported model format_version " +
                                   std::to_string(version));
        }
        ModelFile out;
        out.model.feature_config = feature_config_from_json(j.at("feature_config"));
        out.model.weights.assign(out.model.feature_config.hash_dimension, 0.0);
        for (const auto& [key, value] : j.at("weights").items()) {
            const auto index = std::stoull(key);
            if (index >= out.model.weights.size()) {
                throw ModelFormatError("weight index " + key + " is outside hash_dimension");
            }
            out.model.weights[index] = value.get<double>();
        }
        out.model.intercept = j.at("intercept").get<double>();

        const auto& meta = j.at("train_meta");
        out.meta.seed = meta.at("seed").get<std::uint64_t>();
        out.meta.epochs = meta.at("epochs").get<int>();
        out.meta.final_lr = meta.at("final_lr").get<double>();
        for (const auto& r : meta.at("history")) {
            out.meta.history.push_back(detail::epoch_record_from_json(r));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError("corrupted model file: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError("corrupted model file: " + std::string(e.what()));
    }
}

}  // namespace textlens
