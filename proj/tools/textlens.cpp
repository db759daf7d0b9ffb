// textlens: train, evaluate and explain a probabilistic text classifier for
// hateful-content detection. Every command is deterministic given its flags.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "textlens/corpus.hpp"
#include "textlens/errors.hpp"
#include "textlens/explain.hpp"
#include "textlens/features.hpp"
#include "textlens/metrics.hpp"
#include "textlens/model.hpp"
#include "textlens/schedule.hpp"

namespace {

namespace tl = textlens;

void add_feature_flags(CLI::App* cmd, tl::FeatureConfig& cfg) {
    cmd->add_option("--ngram-max", cfg.ngram_max, "largest n-gram length (1..5)");
    cmd->add_option("--max-tokens", cfg.max_tokens, "tokens kept per document");
    cmd->add_option("--hash-dimension", cfg.hash_dimension, "feature space size, power of two");
    cmd->add_option_function<std::string>(
        "--weighting",
        [&cfg](const std::string& s) { cfg.weighting = tl::weighting_from_string(s); },
        "binary or term_frequency");
}

void setup_ingest(CLI::App& app) {
    auto* cmd = app.add_subcommand("ingest", "convert a delimited data file into a corpus");
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto no_labels = std::make_shared<bool>(false);
    cmd->add_option("--input", *input, "tab- or comma-delimited file with a header")->required();
    cmd->add_option("--output", *output, "corpus JSON-lines path")->required();
    cmd->add_flag("--no-labels", *no_labels, "input has no task_1 column");
    cmd->callback([input, output, no_labels] {
        const auto records = tl::load_records(*input, !*no_labels);
        if (*no_labels) {
            std::vector<tl::Document> docs;
            docs.reserve(records.size());
            for (const auto& r : records) {
                docs.push_back(tl::make_document(r.id, r.text));
            }
            tl::write_documents_jsonl(docs, *output);
            std::cout << "records=" << docs.size() << "\n";
            return;
        }
        const auto corpus = tl::binarize(records);
        std::size_t neg = 0;
        for (const auto& y : corpus.labels) {
            neg += y.is_pos() ? 0 : 1;
        }
        tl::write_corpus_jsonl(corpus, *output);
        std::cout << "records=" << corpus.size() << " neg=" << neg
                  << " pos=" << corpus.size() - neg << "\n";
    });
}

void setup_split(CLI::App& app) {
    auto* cmd = app.add_subcommand("split", "stratified train/validation partition");
    auto corpus_path = std::make_shared<std::string>();
    auto train_out = std::make_shared<std::string>();
    auto valid_out = std::make_shared<std::string>();
    auto fraction = std::make_shared<double>(0.1);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--corpus", *corpus_path, "corpus JSON-lines")->required();
    cmd->add_option("--valid-fraction", *fraction, "validation share per class")->required();
    cmd->add_option("--train-out", *train_out, "training split path")->required();
    cmd->add_option("--valid-out", *valid_out, "validation split path")->required();
    cmd->add_option("--seed", *seed, "shuffle seed");
    cmd->callback([corpus_path, train_out, valid_out, fraction, seed] {
        const auto corpus = tl::read_corpus_jsonl(*corpus_path);
        const auto [train, valid] = tl::stratified_split(corpus, *fraction, *seed);
        tl::write_corpus_jsonl(train, *train_out);
        tl::write_corpus_jsonl(valid, *valid_out);
        std::cout << "train=" << train.size() << " valid=" << valid.size() << "\n";
    });
}

struct TrainArgs {
    std::string corpus;
    std::string model_out;
    std::string plan = "A";
    std::string checkpoint_dir;
    std::string history_out;
    std::string svg_out;
    double valid_fraction = 0.1;
    std::uint64_t seed = 0;
    int batch_size = 16;
    double l2 = 1e-4;
    tl::FeatureConfig features;
    // custom plan shape
    int cycles = 1;
    int epochs_per_cycle = 1;
    std::string schedule = "one-cycle";
    double lr = 1e-5;
    double lr_min = 0.0;
};

tl::CyclePlan plan_from_args(const TrainArgs& a) {
    if (a.plan == "A") {
        return tl::plan_a();
    }
    if (a.plan == "B") {
        return tl::plan_b();
    }
    tl::CyclePlan plan;
    for (int c = 0; c < a.cycles; ++c) {
        tl::CycleSpec spec;
        spec.kind = a.schedule == "sgdr" ? tl::ScheduleKind::sgdr : tl::ScheduleKind::one_cycle;
        spec.epochs = a.epochs_per_cycle;
        spec.lr_max = a.lr;
        spec.lr_min = a.lr_min;
        plan.cycles.push_back(spec);
    }
    return plan;
}

void setup_train(CLI::App& app) {
    auto* cmd = app.add_subcommand("train", "fit the classifier under a cycle plan");
    auto a = std::make_shared<TrainArgs>();
    cmd->add_option("--corpus", a->corpus, "labeled corpus JSON-lines")->required();
    cmd->add_option("--valid-fraction", a->valid_fraction, "validation share per class");
    cmd->add_option("--plan", a->plan, "A (3x25-epoch one-cycle at 1e-5), "
                                       "B (5x8-epoch sgdr at 1e-6), or custom")
        ->check(CLI::IsMember({"A", "B", "custom"}));
    cmd->add_option("--model-out", a->model_out, "best model destination")->required();
    cmd->add_option("--seed", a->seed, "split/shuffle seed");
    cmd->add_option("--batch-size", a->batch_size, "mini-batch size");
    cmd->add_option("--l2", a->l2, "L2 penalty strength");
    cmd->add_option("--checkpoint-dir", a->checkpoint_dir,
                    "per-cycle checkpoint directory (default: next to the model)");
    cmd->add_option("--history-out", a->history_out,
                    "history CSV path (default: <model-out>.history.csv)");
    cmd->add_option("--svg", a->svg_out, "also draw accuracy curves to this SVG");
    cmd->add_option("--cycles", a->cycles, "custom plan: cycle count");
    cmd->add_option("--epochs-per-cycle", a->epochs_per_cycle, "custom plan: epochs per cycle");
    cmd->add_option("--schedule", a->schedule, "custom plan: one-cycle or sgdr")
        ->check(CLI::IsMember({"one-cycle", "sgdr"}));
    cmd->add_option("--lr", a->lr, "custom plan: peak learning rate");
    cmd->add_option("--lr-min", a->lr_min, "custom plan: sgdr floor rate");
    add_feature_flags(cmd, a->features);
    cmd->callback([a] {
        const auto corpus = tl::read_corpus_jsonl(a->corpus);
        const auto [train_set, valid_set] =
            tl::stratified_split(corpus, a->valid_fraction, a->seed);

        tl::TrainConfig cfg;
        cfg.batch_size = a->batch_size;
        cfg.l2_strength = a->l2;
        cfg.seed = a->seed;

        const std::filesystem::path model_out(a->model_out);
        std::filesystem::path ckpt_dir = a->checkpoint_dir.empty()
            ? model_out.parent_path() / (model_out.stem().string() + "_checkpoints")
            : std::filesystem::path(a->checkpoint_dir);

        const auto result = tl::run_cycles(tl::make_classifier(a->features), train_set,
                                           valid_set, plan_from_args(*a), cfg, ckpt_dir);

        tl::TrainMeta meta;
        meta.seed = a->seed;
        meta.epochs = static_cast<int>(result.history.size());
        meta.final_lr = result.history.back().lr;
        meta.history = result.history;
        tl::save_model(result.best_model, meta, model_out);

        const auto history_out = a->history_out.empty()
            ? std::filesystem::path(a->model_out + ".history.csv")
            : std::filesystem::path(a->history_out);
        tl::emit_curves(result.history, history_out, a->svg_out);

        char buf[96];
        std::snprintf(buf, sizeof(buf), "final validation accuracy %.4f (best cycle %d)\n",
                      result.best_val_acc, result.best_cycle);
        std::cout << "train=" << train_set.size() << " valid=" << valid_set.size()
                  << " epochs=" << result.history.size() << "\n"
                  << buf;
    });
}

void setup_find_lr(CLI::App& app) {
    auto* cmd = app.add_subcommand("find-lr", "sweep learning rates and suggest one");
    auto corpus_path = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto lr_lo = std::make_shared<double>(1e-7);
    auto lr_hi = std::make_shared<double>(1e-1);
    auto steps = std::make_shared<int>(100);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto batch_size = std::make_shared<int>(16);
    auto l2 = std::make_shared<double>(1e-4);
    auto features = std::make_shared<tl::FeatureConfig>();
    cmd->add_option("--corpus", *corpus_path, "labeled corpus JSON-lines")->required();
    cmd->add_option("--output", *output, "scan CSV path (lr, loss, smoothed_loss)");
    cmd->add_option("--lr-lo", *lr_lo, "lowest rate");
    cmd->add_option("--lr-hi", *lr_hi, "highest rate");
    cmd->add_option("--steps", *steps, "sweep length");
    cmd->add_option("--seed", *seed, "shuffle seed");
    cmd->add_option("--batch-size", *batch_size, "mini-batch size");
    cmd->add_option("--l2", *l2, "L2 penalty strength");
    add_feature_flags(cmd, *features);
    cmd->callback([corpus_path, output, lr_lo, lr_hi, steps, seed, batch_size, l2, features] {
        const auto corpus = tl::read_corpus_jsonl(*corpus_path);
        tl::TrainConfig cfg;
        cfg.batch_size = *batch_size;
        cfg.l2_strength = *l2;
        cfg.seed = *seed;
        const auto scan =
            tl::find_lr(tl::make_classifier(*features), corpus, *lr_lo, *lr_hi, *steps, cfg);
        if (!output->empty()) {
            std::string csv = "lr,loss,smoothed_loss\n";
            for (const auto& p : scan.points) {
                csv += tl::detail::format_double(p.lr) + "," +
                       tl::detail::format_double(p.loss) + "," +
                       tl::detail::format_double(p.smoothed_loss) + "\n";
            }
            tl::detail::atomic_write(*output, csv);
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "suggested lr %.6g after %zu points%s\n",
                      scan.suggested_lr, scan.points.size(),
                      scan.aborted ? " (stopped early: loss blew up)" : "");
        std::cout << buf;
    });
}

void setup_evaluate(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "score a model against a labeled corpus");
    auto model_path = std::make_shared<std::string>();
    auto corpus_path = std::make_shared<std::string>();
    cmd->add_option("--model", *model_path, "model JSON file")->required();
    cmd->add_option("--corpus", *corpus_path, "labeled corpus JSON-lines")->required();
    cmd->callback([model_path, corpus_path] {
        const auto loaded = tl::load_model(*model_path);
        const auto corpus = tl::read_corpus_jsonl(*corpus_path);
        if (corpus.size() == 0) {
            throw tl::ParseError("corpus is empty: " + *corpus_path);
        }
        std::vector<tl::BinaryLabel> predicted;
        predicted.reserve(corpus.size());
        for (const auto& doc : corpus.documents) {
            predicted.push_back(
                tl::predict_label(loaded.model, tl::vectorize(doc, loaded.model.feature_config)));
        }
        const auto cm = tl::confusion(predicted, corpus.labels);
        const auto rep = tl::report(cm);
        std::cout << tl::render_report(rep);
        nlohmann::ordered_json j{{"accuracy", rep.accuracy},
                                 {"precision", rep.pos.precision},
                                 {"recall", rep.pos.recall},
                                 {"specificity", rep.specificity},
                                 {"f1", rep.pos.f1},
                                 {"macro_f1", rep.macro.f1},
                                 {"tp", cm.tp},
                                 {"fp", cm.fp},
                                 {"fn", cm.fn},
                                 {"tn", cm.tn}};
        std::cout << j.dump() << "\n";
    });
}

void setup_predict(CLI::App& app) {
    auto* cmd = app.add_subcommand("predict", "pos-class probabilities for documents");
    auto model_path = std::make_shared<std::string>();
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    cmd->add_option("--model", *model_path, "model JSON file")->required();
    cmd->add_option("--input", *input, "documents JSON-lines (id, text)")->required();
    cmd->add_option("--output", *output, "predictions JSON-lines")->required();
    cmd->callback([model_path, input, output] {
        const auto loaded = tl::load_model(*model_path);
        const auto docs = tl::read_documents_jsonl(*input);
        std::string lines;
        for (const auto& doc : docs) {
            const double p =
                tl::predict_proba(loaded.model, tl::vectorize(doc, loaded.model.feature_config));
            nlohmann::ordered_json j{
                {"id", doc.id}, {"pos_proba", p}, {"label", p >= 0.5 ? "pos" : "neg"}};
            lines += j.dump() + "\n";
        }
        tl::detail::atomic_write(*output, lines);
        std::cout << "predicted=" << docs.size() << "\n";
    });
}

void setup_explain(CLI::App& app) {
    auto* cmd = app.add_subcommand("explain", "per-word contributions for one sentence");
    auto model_path = std::make_shared<std::string>();
    auto text = std::make_shared<std::string>();
    auto format = std::make_shared<std::string>("text");
    auto color = std::make_shared<bool>(false);
    auto cfg = std::make_shared<tl::ExplainConfig>();
    cmd->add_option("--model", *model_path, "model JSON file")->required();
    cmd->add_option("--text", *text, "sentence to explain")->required();
    cmd->add_option("--samples", cfg->n_samples, "perturbation count");
    cmd->add_option("--seed", cfg->seed, "perturbation seed");
    cmd->add_option("--ridge-lambda", cfg->ridge_lambda, "surrogate L2 penalty");
    cmd->add_option("--kernel-width", cfg->kernel_width, "locality kernel width");
    cmd->add_option("--format", *format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));
    cmd->add_flag("--color", *color, "ANSI colour for the strongest tokens");
    cmd->callback([model_path, text, format, color, cfg] {
        const auto loaded = tl::load_model(*model_path);
        const auto doc = tl::make_document("cli", *text);
        const auto e = tl::explain(doc, tl::make_predictor(loaded.model), *cfg);
        std::cout << tl::render(
            e, *format == "json" ? tl::RenderFormat::json : tl::RenderFormat::text, *color);
    });
}

void setup_report(CLI::App& app) {
    auto* cmd = app.add_subcommand("report", "re-emit training curves from a history");
    auto history_path = std::make_shared<std::string>();
    auto model_path = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto svg = std::make_shared<std::string>();
    auto* hist_opt = cmd->add_option("--history", *history_path, "history CSV");
    auto* model_opt = cmd->add_option("--model", *model_path, "model with embedded history");
    cmd->add_option("--output", *output, "curves CSV path")->required();
    cmd->add_option("--svg", *svg, "accuracy curves SVG path");
    hist_opt->excludes(model_opt);
    cmd->callback([history_path, model_path, output, svg] {
        std::vector<tl::EpochRecord> history;
        if (!history_path->empty()) {
            history = tl::parse_history_csv(*history_path);
        } else if (!model_path->empty()) {
            history = tl::load_model(*model_path).meta.history;
        } else {
            throw CLI::ValidationError("report", "need --history or --model");
        }
        tl::emit_curves(history, *output, *svg);
        std::cout << "epochs=" << history.size() << "\n";
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"probabilistic text classification with per-word impact scores"};
    app.require_subcommand(1);
    setup_ingest(app);
    setup_split(app);
    setup_train(app);
    setup_find_lr(app);
    setup_evaluate(app);
    setup_predict(app);
    setup_explain(app);
    setup_report(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const tl::DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const tl::EmptyInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const tl::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tl::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const tl::ModelFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
