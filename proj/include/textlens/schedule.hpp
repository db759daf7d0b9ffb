#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "textlens/errors.hpp"
#include "textlens/metrics.hpp"
#include "textlens/model.hpp"
#include "textlens/rng.hpp"

namespace textlens {

// Triangular ramp: lr_max/div_factor up to lr_max over the first
// pct_up*total_steps steps, then down to lr_max/final_div.
struct OneCycleConfig {
    double lr_max = 1e-5;
    long long total_steps = 2;
    double pct_up = 0.5;
    double div_factor = 25.0;
    double final_div = 1e4;
};

inline void validate(const OneCycleConfig& cfg) {
    if (!(cfg.lr_max > 0.0)) {
        throw std::invalid_argument("lr_max must be > 0");
    }
    if (cfg.total_steps < 2) {
        throw std::invalid_argument("total_steps must be >= 2");
    }
    if (!(cfg.pct_up > 0.0 && cfg.pct_up < 1.0)) {
        throw std::invalid_argument("pct_up must be in (0, 1)");
    }
    if (!(cfg.div_factor > 1.0) || !(cfg.final_div > 1.0)) {
        throw std::invalid_argument("div_factor and final_div must be > 1");
    }
}

inline double one_cycle_lr(const OneCycleConfig& cfg, long long step) {
    validate(cfg);
    if (step < 0 || step >= cfg.total_steps) {
        throw std::out_of_range("one-cycle step out of range");
    }
    const auto peak =
        static_cast<long long>(cfg.pct_up * static_cast<double>(cfg.total_steps));
    if (step <= peak) {
        if (peak == 0) {
            return cfg.lr_max;
        }
        const double t = static_cast<double>(step) / static_cast<double>(peak);
        return std::lerp(cfg.lr_max / cfg.div_factor, cfg.lr_max, t);
    }
    const long long last = cfg.total_steps - 1;
    const double t = static_cast<double>(step - peak) / static_cast<double>(last - peak);
    return std::lerp(cfg.lr_max, cfg.lr_max / cfg.final_div, t);
}

// Cosine decay from lr_max to lr_min over one cycle; a restart puts the rate
// back at lr_max.
struct SgdrConfig {
    double lr_max = 1e-6;
    double lr_min = 0.0;
    int cycle_epochs = 1;
    int n_cycles = 1;
};

inline void validate(const SgdrConfig& cfg) {
    if (!(cfg.lr_max > 0.0)) {
        throw std::invalid_argument("lr_max must be > 0");
    }
    if (!(cfg.lr_min >= 0.0 && cfg.lr_min < cfg.lr_max)) {
        throw std::invalid_argument("lr_min must be in [0, lr_max)");
    }
    if (cfg.cycle_epochs < 1 || cfg.n_cycles < 1) {
        throw std::invalid_argument("cycle_epochs and n_cycles must be >= 1");
    }
}

inline double sgdr_lr(const SgdrConfig& cfg, double epoch_in_cycle) {
    validate(cfg);
    if (!(epoch_in_cycle >= 0.0) ||
        epoch_in_cycle > static_cast<double>(cfg.cycle_epochs)) {
        throw std::out_of_range("epoch_in_cycle out of range");
    }
    const double phase =
        std::numbers::pi * epoch_in_cycle / static_cast<double>(cfg.cycle_epochs);
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(phase));
}

// --- learning-rate finder ---

struct LrPoint {
    double lr = 0.0;
    double loss = 0.0;
    double smoothed_loss = 0.0;
};

struct LrScanResult {
    std::vector<LrPoint> points;
    double suggested_lr = 0.0;
    bool aborted = false;  // stopped early because the smoothed loss blew up
};

// Sweeps a geometric learning-rate grid, calling step_fn(lr) once per rate.
// step_fn performs one optimization step at that rate and returns the batch
// loss before the step. Losses are EMA-smoothed (factor 0.98, bias
// corrected); the sweep stops once the smoothed loss exceeds 4x its minimum.
// The suggestion is the rate at the steepest descent of the smoothed curve.
inline LrScanResult lr_scan(const std::function<double(double)>& step_fn, double lr_lo,
                            double lr_hi, int steps) {
    if (!(lr_lo > 0.0) || !(lr_hi > lr_lo)) {
        throw std::invalid_argument("need 0 < lr_lo < lr_hi");
    }
    if (steps < 2) {
        throw std::invalid_argument("steps must be >= 2");
    }
    constexpr double kSmooth = 0.98;
    const double ratio = lr_hi / lr_lo;

    LrScanResult out;
    double avg = 0.0;
    double lowest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < steps; ++k) {
        const double lr =
            lr_lo * std::pow(ratio, static_cast<double>(k) / static_cast<double>(steps - 1));
        const double loss = step_fn(lr);
        if (!std::isfinite(loss)) {
            if (k == 0) {
                throw DivergedError(0, loss);
            }
            out.aborted = true;
            break;
        }
        avg = kSmooth * avg + (1.0 - kSmooth) * loss;
        const double smoothed = avg / (1.0 - std::pow(kSmooth, k + 1));
        out.points.push_back({lr, loss, smoothed});
        lowest = std::min(lowest, smoothed);
        if (smoothed > 4.0 * lowest) {
            out.aborted = true;
            break;
        }
    }

    const auto& pts = out.points;
    if (pts.size() < 2) {
        out.suggested_lr = pts.front().lr;
        return out;
    }
    std::size_t best = 0;
    double best_slope = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 == pts.size() ? i : i + 1;
        const double slope = (pts[b].smoothed_loss - pts[a].smoothed_loss) /
                             static_cast<double>(b - a);
        if (slope < best_slope) {
            best_slope = slope;
            best = i;
        }
    }
    out.suggested_lr = pts[best].lr;
    return out;
}

// Runs the sweep with real mini-batch steps on a throwaway copy of the model.
inline LrScanResult find_lr(const LinearClassifier& model, const LabeledCorpus& corpus,
                            double lr_lo, double lr_hi, int steps, const TrainConfig& cfg) {
    validate(cfg);
    if (corpus.size() == 0) {
        throw std::invalid_argument("cannot scan on an empty corpus");
    }
    LinearClassifier probe = model;
    const auto xs = vectorize_corpus(corpus, model.feature_config);
    const auto n = corpus.size();
    const auto b = static_cast<std::size_t>(cfg.batch_size);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_in_place(order, rng);
    std::size_t cursor = 0;

    std::vector<FeatureVector> batch_x;
    std::vector<BinaryLabel> batch_y;
    const auto step_fn = [&](double lr) {
        batch_x.clear();
        batch_y.clear();
        for (std::size_t k = 0; k < b; ++k) {
            if (cursor == n) {
                shuffle_in_place(order, rng);
                cursor = 0;
            }
            batch_x.push_back(xs[order[cursor]]);
            batch_y.push_back(corpus.labels[order[cursor]]);
            ++cursor;
        }
        const LossGrad lg = loss_and_gradient(probe, batch_x, batch_y, cfg.l2_strength);
        if (std::isfinite(lg.loss)) {
            for (std::size_t k = 0; k < probe.weights.size(); ++k) {
                probe.weights[k] -= lr * lg.grad_weights[k];
            }
            probe.intercept -= lr * lg.grad_intercept;
        }
        return lg.loss;
    };
    return lr_scan(step_fn, lr_lo, lr_hi, steps);
}

// --- multi-cycle training with best-checkpoint retention ---

enum class ScheduleKind { one_cycle, sgdr };

struct CycleSpec {
    ScheduleKind kind = ScheduleKind::one_cycle;
    int epochs = 1;
    double lr_max = 1e-5;
    double pct_up = 0.5;      // one-cycle shape
    double div_factor = 25.0;
    double final_div = 1e4;
    double lr_min = 0.0;      // sgdr floor
};

enum class Retention { keep_best_by_validation_accuracy };

struct CyclePlan {
    std::vector<CycleSpec> cycles;
    Retention retention = Retention::keep_best_by_validation_accuracy;
};

inline void validate(const CyclePlan& plan) {
    if (plan.cycles.empty()) {
        throw std::invalid_argument("plan needs at least one cycle");
    }
    for (const auto& spec : plan.cycles) {
        if (spec.epochs < 1) {
            throw std::invalid_argument("every cycle needs epochs >= 1");
        }
        if (!(spec.lr_max > 0.0)) {
            throw std::invalid_argument("every cycle needs lr_max > 0");
        }
    }
}

// Three consecutive one-cycle runs of 25 epochs at a 1e-5 peak rate.
inline CyclePlan plan_a() {
    CyclePlan plan;
    for (int c = 0; c < 3; ++c) {
        CycleSpec spec;
        spec.kind = ScheduleKind::one_cycle;
        spec.epochs = 25;
        spec.lr_max = 1e-5;
        plan.cycles.push_back(spec);
    }
    return plan;
}

// Five cosine-restart cycles of 8 epochs at a 1e-6 peak rate.
inline CyclePlan plan_b() {
    CyclePlan plan;
    for (int c = 0; c < 5; ++c) {
        CycleSpec spec;
        spec.kind = ScheduleKind::sgdr;
        spec.epochs = 8;
        spec.lr_max = 1e-6;
        plan.cycles.push_back(spec);
    }
    return plan;
}

inline StepLearningRate lr_schedule(const CycleSpec& spec) {
    if (spec.kind == ScheduleKind::one_cycle) {
        return [spec](long long step, long long total_steps, double) {
            OneCycleConfig cfg;
            cfg.lr_max = spec.lr_max;
            cfg.total_steps = total_steps;
            cfg.pct_up = spec.pct_up;
            cfg.div_factor = spec.div_factor;
            cfg.final_div = spec.final_div;
            return one_cycle_lr(cfg, step);
        };
    }
    return [spec](long long, long long, double epoch_position) {
        SgdrConfig cfg;
        cfg.lr_max = spec.lr_max;
        cfg.lr_min = spec.lr_min;
        cfg.cycle_epochs = spec.epochs;
        return sgdr_lr(cfg, std::min(epoch_position, static_cast<double>(spec.epochs)));
    };
}

// Hook for deciding which checkpoint is "best"; defaults to validation
// accuracy.
using ValidationScorer = std::function<double(const LinearClassifier&)>;

struct CyclesResult {
    LinearClassifier best_model;
    double best_val_acc = 0.0;
    int best_cycle = -1;
    std::filesystem::path best_checkpoint;
    std::vector<EpochRecord> history;  // all cycles, epochs numbered globally
};

// Runs the plan cycle by cycle. After each cycle a checkpoint (model file
// plus history CSV sidecar) is written, and the next cycle resumes from the
// best-scoring checkpoint so far, so a bad cycle cannot drag later ones down.
inline CyclesResult run_cycles(const LinearClassifier& init, const LabeledCorpus& train_set,
                               const LabeledCorpus& validation, const CyclePlan& plan,
                               const TrainConfig& base_cfg,
                               const std::filesystem::path& checkpoint_dir,
                               const ValidationScorer& scorer = {}) {
    validate(plan);
    if (validation.size() == 0) {
        throw std::invalid_argument("run_cycles needs a validation split");
    }
    std::filesystem::create_directories(checkpoint_dir);

    const auto val_xs = vectorize_corpus(validation, init.feature_config);
    ValidationScorer score = scorer;
    if (!score) {
        score = [&](const LinearClassifier& m) { return accuracy(m, val_xs, validation.labels); };
    }

    CyclesResult out;
    LinearClassifier current = init;
    int epoch_offset = 0;
    std::string last_good = "none";
    for (std::size_t c = 0; c < plan.cycles.size(); ++c) {
        const auto& spec = plan.cycles[c];
        TrainConfig cfg = base_cfg;
        cfg.epochs = spec.epochs;
        cfg.seed = base_cfg.seed + c;
        cfg.learning_rate = spec.lr_max;

        TrainResult trained = train(current, train_set, &validation, cfg, lr_schedule(spec));
        for (auto rec : trained.history) {
            rec.cycle = static_cast<int>(c);
            rec.epoch += epoch_offset;
            out.history.push_back(rec);
        }
        epoch_offset += spec.epochs;

        TrainMeta meta;
        meta.seed = base_cfg.seed;
        meta.epochs = epoch_offset;
        meta.final_lr = out.history.back().lr;
        meta.history = out.history;
        const auto stem = "cycle_" + std::to_string(c);
        const auto checkpoint = checkpoint_dir / (stem + ".json");
        try {
            save_model(trained.model, meta, checkpoint);
            emit_curves(out.history, checkpoint_dir / (stem + ".history.csv"));
        } catch (const IoError& e) {
            throw IoError(std::string(e.what()) + "; last good checkpoint: " + last_good);
        }
        last_good = checkpoint.string();

        const double acc = score(trained.model);
        if (out.best_cycle < 0 || acc > out.best_val_acc) {
            out.best_val_acc = acc;
            out.best_cycle = static_cast<int>(c);
            out.best_checkpoint = checkpoint;
            out.best_model = trained.model;
        }
        if (c + 1 < plan.cycles.size()) {
            current = load_model(out.best_checkpoint).model;
        }
    }
    return out;
}

}  // namespace textlens
