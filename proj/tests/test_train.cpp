#include <doctest.h>

#include "eduvl/train.hpp"
#include "support/gradient_check.hpp"
#include "support/synthetic.hpp"

using namespace eduvl;

namespace {

ModelDims small_dims() {
    ModelDims dims;
    dims.d = 16;
    dims.heads = 2;
    dims.encoder_layers = 1;
    dims.mtl_layers = 1;
    dims.max_positions = 512;
    return dims;
}

const RougeWeights kWeights{0.5, 0.5, 0.0};

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
    int ran = 0;
    uint64_t seed = 11000;
    while (ran < 2 && seed < 11050) {
        auto outcome = testsupport::gradient_check_instance(seed++);
        if (!outcome.ran) continue;
        ++ran;
        INFO("tensor ", outcome.worst_tensor, " scaled diff ", outcome.max_scaled_diff);
        CHECK(outcome.max_scaled_diff <= 1.0);
    }
    CHECK(ran == 2);
}

TEST_CASE("loss decomposition identities hold exactly as computed") {
    Corpus corpus = synth::overfit_corpus(4, 44);
    ModelParams<double> params = init_params<double>(small_dims(), corpus, 17);
    LossConfig cfg;
    for (const auto& entry : corpus.entries) {
        Labels labels = make_labels(entry.document, entry.reference, 4, kWeights);
        if (labels.positive_indices().empty()) continue;
        params.zero_grads();
        StepResult step = accumulate_gradients(params, entry.document, entry.reference, labels,
                                               CandidateConfig{2, 4}, cfg, kWeights);
        CHECK(step.loss.total == step.loss.bce + cfg.rho * step.loss.con);
        CHECK(step.loss.con == step.loss.l1 + step.loss.l2);
        CHECK(step.loss.l1 >= 0.0);
        CHECK(step.loss.l2 >= 0.0);
        CHECK(step.loss.bce > 0.0);
        // Ranked targets never increase along the sorted candidate list.
        for (size_t i = 1; i < step.target_scores.size(); ++i)
            CHECK(step.target_scores[i - 1] >= step.target_scores[i]);
    }
}

TEST_CASE("training runs, logs epochs, and stops on patience") {
    Corpus train_corpus = synth::overfit_corpus(4, 7);
    // Validation documents with one EDU each: summaries cannot change, so
    // the validation metric is constant and patience 1 stops after epoch 2.
    Corpus val_corpus;
    val_corpus.split = Split::validation;
    for (int i = 0; i < 2; ++i) {
        CorpusEntry entry;
        entry.document =
            document_from_edus("val" + std::to_string(i), {{"alpha beta gamma delta"}}, 768);
        entry.reference = {tokenize("alpha beta gamma"), "alpha beta gamma"};
        val_corpus.entries.push_back(entry);
    }

    TrainingConfig cfg;
    cfg.max_epochs = 6;
    cfg.patience = 1;
    cfg.label_budget = 4;
    cfg.seed = 5;

    ModelParams<double> params = init_params<double>(small_dims(), train_corpus, cfg.seed);
    TrainResult result = train(params, train_corpus, val_corpus, CandidateConfig{2, 4},
                               LossConfig{}, kWeights, cfg);
    CHECK(result.epochs.size() == 2);
    CHECK(result.best_epoch == 1);
    for (const auto& epoch : result.epochs) CHECK(epoch.skipped_docs == 0);

    std::string log = training_log_to_jsonl(result);
    CHECK(log.find("\"epoch\":1") != std::string::npos);
    CHECK(log.find("val_r2_f1") != std::string::npos);
    CHECK(log.find("skipped_docs") != std::string::npos);
}

TEST_CASE("training is deterministic under a fixed seed") {
    Corpus train_corpus = synth::overfit_corpus(3, 13);
    Corpus val_corpus = synth::overfit_corpus(2, 14);
    val_corpus.split = Split::validation;

    TrainingConfig cfg;
    cfg.max_epochs = 3;
    cfg.patience = 3;
    cfg.label_budget = 4;
    cfg.seed = 77;

    auto run = [&]() {
        ModelParams<double> params = init_params<double>(small_dims(), train_corpus, cfg.seed);
        TrainResult result = train(params, train_corpus, val_corpus, CandidateConfig{2, 4},
                                   LossConfig{}, kWeights, cfg);
        return std::make_pair(training_log_to_jsonl(result), params.embedding.w.a);
    };
    auto [log_a, emb_a] = run();
    auto [log_b, emb_b] = run();
    CHECK(log_a == log_b);
    CHECK(emb_a == emb_b);
}

TEST_CASE("documents with all-zero labels are skipped and counted") {
    Corpus train_corpus = synth::overfit_corpus(3, 21);
    // A document whose reference shares no vocabulary gets all-zero labels.
    CorpusEntry hopeless;
    hopeless.document = document_from_edus("zz", {{"alpha beta gamma delta"}}, 768);
    hopeless.reference = {tokenize("qq ww ee"), "qq ww ee"};
    train_corpus.entries.push_back(hopeless);

    Corpus val_corpus = synth::overfit_corpus(1, 22);
    val_corpus.split = Split::validation;

    TrainingConfig cfg;
    cfg.max_epochs = 1;
    cfg.label_budget = 4;

    ModelParams<double> params = init_params<double>(small_dims(), train_corpus, 2);
    TrainResult result = train(params, train_corpus, val_corpus, CandidateConfig{2, 4},
                               LossConfig{}, kWeights, cfg);
    CHECK(result.epochs.at(0).skipped_docs == 1);
}

TEST_CASE("the f32 path trains and summarizes") {
    Corpus train_corpus = synth::overfit_corpus(3, 31);
    Corpus val_corpus = synth::overfit_corpus(1, 32);
    val_corpus.split = Split::validation;

    TrainingConfig cfg;
    cfg.max_epochs = 2;
    cfg.patience = 2;
    cfg.label_budget = 4;

    ModelParams<float> params = init_params<float>(small_dims(), train_corpus, 3);
    TrainResult result = train(params, train_corpus, val_corpus, CandidateConfig{2, 4},
                               LossConfig{}, kWeights, cfg);
    CHECK(result.epochs.size() >= 1);
    SummaryOutput out = summarize(params, train_corpus.entries[0].document, CandidateConfig{2, 4},
                                  true);
    CHECK(!out.indices.empty());
}
