#pragma once

#include <functional>
#include <random>

#include <json.hpp>

#include "eduvl/model.hpp"

namespace eduvl {

struct TrainingConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 1;  // documents per optimizer step (gradient accumulation)
    int max_epochs = 100;
    int patience = 10;  // epochs without validation R-2 improvement
    uint64_t seed = 42;
    bool trigram_blocking = true;  // validation/test inference
    int label_budget = 8;          // EDU-oracle budget for ground-truth labels

    void validate() const {
        if (learning_rate <= 0.0) throw InputError("learning_rate must be positive");
        if (patience < 1) throw InputError("patience must be >= 1");
        if (batch_size < 1) throw InputError("batch_size must be >= 1");
        if (max_epochs < 1) throw InputError("max_epochs must be >= 1");
    }
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_r2_f1 = 0.0;
    int skipped_docs = 0;
};

struct TrainResult {
    std::vector<EpochLog> epochs;
    int best_epoch = 0;
    double best_val_r2_f1 = 0.0;
};

inline std::string training_log_to_jsonl(const TrainResult& result) {
    std::string out;
    for (const auto& e : result.epochs) {
        nlohmann::json line = {{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"val_r2_f1", e.val_r2_f1},
                               {"skipped_docs", e.skipped_docs}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

using StepObserver = std::function<void(int epoch, int step, const StepResult&)>;

// Epoch loop with seeded shuffling, per-epoch validation on mean R-2 F1, and
// early stopping; leaves params at the best validation epoch.
template <class T>
TrainResult train(ModelParams<T>& params, const Corpus& train_corpus, const Corpus& val_corpus,
                  const CandidateConfig& config, const LossConfig& loss_cfg,
                  const RougeWeights& weights, const TrainingConfig& cfg,
                  const StepObserver& observer = {}) {
    cfg.validate();
    config.validate();
    if (train_corpus.entries.empty()) throw InputError("train: empty training split");
    if (val_corpus.entries.empty()) throw InputError("train: empty validation split");

    // Ground-truth labels are fixed per document; documents with no positive
    // label carry no ground-truth candidate and are skipped.
    std::vector<Labels> labels(train_corpus.entries.size());
    std::vector<size_t> usable;
    int skipped = 0;
    for (size_t i = 0; i < train_corpus.entries.size(); ++i) {
        const auto& entry = train_corpus.entries[i];
        labels[i] = make_labels(entry.document, entry.reference, cfg.label_budget, weights);
        if (labels[i].positive_indices().empty())
            ++skipped;
        else
            usable.push_back(i);
    }
    if (usable.empty()) throw InputError("train: no document has a positive label");

    const auto refs = params.param_refs();
    nn::Adam<T> optimizer(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    optimizer.attach(refs);

    std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);

    TrainResult result;
    ModelParams<T> best_params = params;
    double best_val = -1.0;
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<size_t> order = usable;
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        int steps = 0;
        size_t cursor = 0;
        while (cursor < order.size()) {
            params.zero_grads();
            const size_t batch_end =
                std::min(order.size(), cursor + static_cast<size_t>(cfg.batch_size));
            for (; cursor < batch_end; ++cursor) {
                const auto& entry = train_corpus.entries[order[cursor]];
                StepResult step = accumulate_gradients(params, entry.document, entry.reference,
                                                       labels[order[cursor]], config, loss_cfg,
                                                       weights);
                loss_sum += step.loss.total;
                ++steps;
                if (observer) observer(epoch, steps, step);
            }
            optimizer.step(refs);
        }

        const double val_r2 =
            evaluate(params, val_corpus, config, cfg.trigram_blocking).mean_r2.f1;
        result.epochs.push_back({epoch, loss_sum / steps, val_r2, skipped});

        if (val_r2 > best_val) {
            best_val = val_r2;
            result.best_epoch = epoch;
            best_params = params;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
    }
    result.best_val_r2_f1 = best_val;
    params = std::move(best_params);
    return result;
}

}  // namespace eduvl
