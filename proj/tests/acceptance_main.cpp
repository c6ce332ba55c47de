// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits non-zero when any
// criterion fails.
//
// Usage: eduvl_acceptance <path-to-eduvl-cli> [work-dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "eduvl/checkpoint.hpp"
#include "eduvl/corpus.hpp"
#include "eduvl/model.hpp"
#include "eduvl/oracle.hpp"
#include "eduvl/rouge.hpp"
#include "eduvl/train.hpp"
#include "support/gradient_check.hpp"
#include "support/lcs_oracle.hpp"
#include "support/synthetic.hpp"

using namespace eduvl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli_path;
fs::path g_work;
int g_failures = 0;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  criterion %2d  %-24s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path log = g_work / ("cli_" + std::to_string(counter++) + ".log");
    std::string cmd = g_cli_path + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = io::read_file(log);
    return result;
}

fs::path write_corpus(const std::string& name, const Corpus& corpus) {
    fs::path path = g_work / name;
    io::atomic_write(path, corpus_to_pre_segmented_jsonl(corpus));
    return path;
}

TokenList toks(const std::string& text) { return tokenize(text); }

const RougeWeights kWeights{0.5, 0.5, 0.0};

// ---------------------------------------------------------------------------
// 1. ROUGE exactness on hand-derivable fixtures, absolute tolerance 1e-9.
void criterion_1() {
    auto start = Clock::now();
    int checked = 0;
    int failed = 0;
    std::string first_failure;

    auto expect = [&](const std::string& label, double got, double want) {
        ++checked;
        if (std::abs(got - want) > 1e-9) {
            ++failed;
            if (first_failure.empty()) first_failure = label;
        }
    };

    RougeScore s = rouge_n(toks("the cat sat"), toks("the cat"), 1);
    expect("r1 recall", s.recall, 2.0 / 3.0);
    expect("r1 precision", s.precision, 1.0);
    expect("r1 f1", s.f1, 0.8);

    RougeScore s2 = rouge_n(toks("a b c d"), toks("b c d"), 2);
    expect("r2 recall", s2.recall, 2.0 / 3.0);
    expect("r2 precision", s2.precision, 1.0);
    expect("r2 f1", s2.f1, 0.8);

    NGramCounts abab = ngrams(toks("a b a b"), 2);
    expect("ngram ab count", static_cast<double>(abab.counts.at(std::string("a") + '\x1f' + "b")),
           2.0);
    expect("ngram ba count", static_cast<double>(abab.counts.at(std::string("b") + '\x1f' + "a")),
           1.0);
    expect("ngram too short", static_cast<double>(ngrams(toks("a"), 2).total), 0.0);
    expect("unigram total", static_cast<double>(ngrams(toks("p q r s t"), 1).total), 5.0);

    expect("overlap clipped",
           static_cast<double>(overlap_count(ngrams(toks("x x"), 1), ngrams(toks("x"), 1))), 1.0);
    NGramCounts self = ngrams(toks("m n m"), 1);
    expect("overlap self", static_cast<double>(overlap_count(self, self)),
           static_cast<double>(self.total));
    expect("overlap disjoint",
           static_cast<double>(overlap_count(ngrams(toks("a b"), 1), ngrams(toks("c d"), 1))), 0.0);

    expect("lcs fixture", static_cast<double>(lcs_length(toks("a c d b"), toks("a b c d"))), 3.0);
    expect("lcs identity", static_cast<double>(lcs_length(toks("p q r"), toks("p q r"))), 3.0);
    expect("lcs empty", static_cast<double>(lcs_length(toks("p q r"), {})), 0.0);

    RougeScore rl = rouge_l(toks("a b c d"), toks("a c d b"));
    expect("rl recall", rl.recall, 0.75);
    expect("rl precision", rl.precision, 0.75);
    expect("rl f1", rl.f1, 0.75);
    expect("rl identical", rouge_l(toks("u v w"), toks("u v w")).f1, 1.0);
    expect("rl disjoint", rouge_l(toks("a b"), toks("c d")).f1, 0.0);

    expect("composite identical", composite_f1(toks("x y z"), toks("x y z"), kWeights), 1.0);
    expect("composite r1 only",
           composite_f1(toks("the cat sat"), toks("the cat"), RougeWeights{1.0, 0.0, 0.0}), 0.8);
    expect("composite mixed", composite_f1(toks("a b c d"), toks("b c d"), kWeights),
           0.5 * (6.0 / 7.0) + 0.5 * 0.8);

    expect("case folding", rouge_n(toks("The Cat"), toks("the cat"), 1).f1, 1.0);
    expect("clip precision", rouge_n(toks("a a"), toks("a a a"), 1).precision, 2.0 / 3.0);
    expect("empty candidate", rouge_n(toks("a b"), toks(""), 1).f1, 0.0);
    expect("empty reference", rouge_n(toks(""), toks("a b"), 1).recall, 0.0);

    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "%d/%d fixtures within 1e-9, %.2fs%s%s",
                  checked - failed, checked, elapsed,
                  first_failure.empty() ? "" : ", first failure: ",
                  first_failure.c_str());
    report(1, "rouge-exactness", failed == 0 && elapsed < 1.0 && checked >= 20, detail);
}

// ---------------------------------------------------------------------------
// 2. LCS equals the exhaustive-subsequence oracle on 1,000 random pairs.
void criterion_2() {
    auto start = Clock::now();
    std::mt19937_64 rng(271);
    int mismatches = 0;
    for (int round = 0; round < 1000; ++round) {
        auto random_tokens = [&](int max_len) {
            TokenList out;
            const int len = static_cast<int>(rng() % static_cast<uint64_t>(max_len + 1));
            for (int i = 0; i < len; ++i)
                out.push_back(make_token(std::string(1, static_cast<char>('a' + rng() % 4))));
            return out;
        };
        TokenList a = random_tokens(8);
        TokenList b = random_tokens(8);
        if (lcs_length(a, b) != testsupport::lcs_bruteforce(a, b)) ++mismatches;
    }
    const double elapsed = seconds_since(start);
    char detail[120];
    std::snprintf(detail, sizeof(detail), "%d/1000 mismatches, %.2fs", mismatches, elapsed);
    report(2, "lcs-oracle-equivalence", mismatches == 0 && elapsed < 10.0, detail);
}

// ---------------------------------------------------------------------------
// 3. Zero dominance violations over 200 synthetic documents via the CLI.
void criterion_3(const fs::path& corpus_path) {
    auto start = Clock::now();
    fs::path out = g_work / "verify_out";
    CliResult result =
        run_cli("verify-theorem --input " + corpus_path.string() + " --out " + out.string());
    const double elapsed = seconds_since(start);
    const bool zero = result.output.find("violations: 0") != std::string::npos;
    char detail[200];
    std::snprintf(detail, sizeof(detail), "exit %d, %s, %.1fs", result.exit_code,
                  zero ? "violations: 0 over R-1/R-2/R-L" : "violations reported", elapsed);
    report(3, "dominance-sweep", result.exit_code == 0 && zero && elapsed < 120.0, detail);
}

// ---------------------------------------------------------------------------
// 4. EDU oracles win on precision while recall stays within 0.05.
void criterion_4(const Corpus& corpus) {
    OracleAnalysis analysis = analyze_corpus(corpus, 5, 8, kWeights, OracleMode::exhaustive);
    bool precision_ok = true;
    double max_recall_gap = 0.0;
    for (int v = 0; v < 3; ++v) {
        const RougeScore& sent = analysis.sentence_stats.mean_scores[static_cast<size_t>(v)];
        const RougeScore& edu = analysis.edu_stats.mean_scores[static_cast<size_t>(v)];
        if (!(edu.precision > sent.precision)) precision_ok = false;
        max_recall_gap = std::max(max_recall_gap, std::abs(edu.recall - sent.recall));
    }
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "EDU precision > sentence precision on all variants: %s; max recall gap %.4f",
                  precision_ok ? "yes" : "no", max_recall_gap);
    report(4, "breakdown-direction", precision_ok && max_recall_gap <= 0.05, detail);
}

// ---------------------------------------------------------------------------
// 5. Greedy never beats exhaustive and improves strictly step by step.
void criterion_5(const Corpus& corpus) {
    int dominance_violations = 0;
    int monotonicity_violations = 0;
    for (const auto& entry : corpus.entries) {
        for (UnitKind kind : {UnitKind::sentence, UnitKind::edu}) {
            UnitView view = kind == UnitKind::sentence ? UnitView::sentences(entry.document)
                                                       : UnitView::edus(entry.document);
            const int budget = kind == UnitKind::sentence ? 5 : 8;
            OracleResult greedy = greedy_oracle(view, entry.reference, budget, kWeights);
            OracleResult exhaustive = exhaustive_oracle(view, entry.reference, budget, kWeights);
            if (greedy.objective > exhaustive.objective) ++dominance_violations;
            double prev = 0.0;
            for (double value : greedy.step_objectives) {
                if (!(value > prev)) ++monotonicity_violations;
                prev = value;
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%d dominance violations, %d monotonicity violations over %zu documents",
                  dominance_violations, monotonicity_violations, corpus.entries.size());
    report(5, "greedy-soundness", dominance_violations == 0 && monotonicity_violations == 0,
           detail);
}

// ---------------------------------------------------------------------------
// 6. Analytic gradients match central finite differences on 20 instances.
void criterion_6() {
    auto start = Clock::now();
    int ran = 0;
    int failed = 0;
    double worst = 0.0;
    std::string worst_tensor;
    uint64_t seed = 52000;
    while (ran < 20 && seed < 52400) {
        auto outcome = testsupport::gradient_check_instance(seed++);
        if (!outcome.ran) continue;
        ++ran;
        if (outcome.max_scaled_diff > worst) {
            worst = outcome.max_scaled_diff;
            worst_tensor = outcome.worst_tensor;
        }
        if (outcome.max_scaled_diff > 1.0) ++failed;
    }
    const double elapsed = seconds_since(start);
    char detail[220];
    std::snprintf(detail, sizeof(detail),
                  "%d/%d instances within 1e-4 rel (1e-8 floor); worst %.3g of budget in %s; %.1fs",
                  ran - failed, ran, worst, worst_tensor.c_str(), elapsed);
    report(6, "gradient-check", ran == 20 && failed == 0 && elapsed < 60.0, detail);
}

// ---------------------------------------------------------------------------
// 7. Loss identities hold exactly, plus the hand-valued hinge fixtures.
void criterion_7() {
    bool ok = true;
    std::string why;

    LossConfig cfg;
    ContrastiveTerms a = contrastive_loss({0.5, 0.7}, 0.6, cfg);
    if (std::abs(a.l1 - 0.1) > 1e-12) { ok = false; why = "l1 fixture"; }
    ContrastiveTerms b = contrastive_loss({0.8, 0.7, 0.65}, 1.0, cfg);
    if (std::abs(b.l2 - 0.0) > 1e-12) { ok = false; why = "l2 zero fixture"; }
    ContrastiveTerms c = contrastive_loss({0.6, 0.62}, 1.0, cfg);
    if (std::abs(c.l2 - 0.03) > 1e-12) { ok = false; why = "l2 hinge fixture"; }

    Corpus corpus = synth::overfit_corpus(12, 999);
    ModelDims dims;
    dims.d = 16;
    dims.heads = 2;
    dims.encoder_layers = 1;
    dims.mtl_layers = 1;
    dims.max_positions = 512;
    ModelParams<double> params = init_params<double>(dims, corpus, 4242);
    int steps = 0;
    for (const auto& entry : corpus.entries) {
        Labels labels = make_labels(entry.document, entry.reference, 8, kWeights);
        if (labels.positive_indices().empty()) continue;
        params.zero_grads();
        StepResult step = accumulate_gradients(params, entry.document, entry.reference, labels,
                                               CandidateConfig{2, 5}, cfg, kWeights);
        ++steps;
        if (step.loss.total != step.loss.bce + cfg.rho * step.loss.con) {
            ok = false;
            why = "total identity";
        }
        if (step.loss.con != step.loss.l1 + step.loss.l2) {
            ok = false;
            why = "contrastive identity";
        }
        if (step.loss.l1 < 0.0 || step.loss.l2 < 0.0) {
            ok = false;
            why = "hinge negativity";
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail), "identities exact over %d steps; fixtures to 1e-12%s%s",
                  steps, ok ? "" : "; failed: ", ok ? "" : why.c_str());
    report(7, "loss-identities", ok && steps > 0, detail);
}

// ---------------------------------------------------------------------------
// 8/11/12. Overfit experiment, candidate-sort invariant, determinism.
struct OverfitRun {
    TrainResult result;
    double lead_r1 = 0.0;
    double model_r1 = 0.0;
    int lead_k = 0;
    bool sorted_targets_ok = true;
    std::string checkpoint_digest;
    std::string log_bytes;
    double elapsed = 0.0;
};

OverfitRun run_overfit(const Corpus& corpus, const std::string& tag) {
    auto start = Clock::now();
    ModelDims dims;  // default model size
    TrainingConfig cfg;
    cfg.max_epochs = 300;
    cfg.patience = 300;  // the run is bounded by the epoch cap
    cfg.seed = 20240229;
    cfg.label_budget = 8;

    CandidateConfig k_config;  // default 6..10
    LossConfig loss_cfg;       // rho 100, gamma1 0, gamma2 0.01

    OverfitRun run;
    ModelParams<double> params = init_params<double>(dims, corpus, cfg.seed);
    run.result = train(params, corpus, corpus, k_config, loss_cfg, kWeights, cfg,
                       [&](int, int, const StepResult& step) {
                           for (size_t i = 1; i < step.target_scores.size(); ++i)
                               if (step.target_scores[i - 1] < step.target_scores[i])
                                   run.sorted_targets_ok = false;
                       });

    // LEAD baseline at k = round(mean oracle length).
    double oracle_len_sum = 0.0;
    int labeled = 0;
    for (const auto& entry : corpus.entries) {
        Labels labels = make_labels(entry.document, entry.reference, 8, kWeights);
        if (labels.positive_indices().empty()) continue;
        oracle_len_sum += static_cast<double>(labels.positive_indices().size());
        ++labeled;
    }
    run.lead_k = static_cast<int>(std::lround(oracle_len_sum / labeled));
    double lead_sum = 0.0;
    for (const auto& entry : corpus.entries) {
        OracleResult lead =
            lead_k(UnitView::edus(entry.document), run.lead_k, &entry.reference);
        lead_sum += lead.r1.f1;
    }
    run.lead_r1 = lead_sum / static_cast<double>(corpus.entries.size());
    run.model_r1 = evaluate(params, corpus, k_config, true).mean_r1.f1;

    fs::path ckpt = g_work / (tag + "_checkpoint.bin");
    write_checkpoint_file(ckpt, to_checkpoint(params, "f64"));
    char digest[32];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(io::fnv1a64_file(ckpt)));
    run.checkpoint_digest = digest;
    run.log_bytes = training_log_to_jsonl(run.result);
    io::atomic_write(g_work / (tag + "_training_log.jsonl"), run.log_bytes);
    run.elapsed = seconds_since(start);
    return run;
}

void criteria_8_11_12(const Corpus& overfit) {
    OverfitRun first = run_overfit(overfit, "overfit_a");

    const double first_loss = first.result.epochs.front().train_loss;
    const double final_loss = first.result.epochs.back().train_loss;
    const bool loss_ok = final_loss < 0.1 * first_loss;
    const bool beats_lead = first.model_r1 > first.lead_r1;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "loss %.3f -> %.3f (%.1f%%), model R-1 %.3f vs LEAD-%d %.3f, %.0fs",
                  first_loss, final_loss, 100.0 * final_loss / first_loss, first.model_r1,
                  first.lead_k, first.lead_r1, first.elapsed);
    report(8, "overfit-experiment", loss_ok && beats_lead && first.elapsed < 600.0, detail);

    std::snprintf(detail, sizeof(detail), "ranked target scores non-increasing in every step: %s",
                  first.sorted_targets_ok ? "yes" : "no");
    report(11, "candidate-sort-invariant", first.sorted_targets_ok, detail);

    OverfitRun second = run_overfit(overfit, "overfit_b");
    const bool ckpt_same = first.checkpoint_digest == second.checkpoint_digest;
    const bool log_same = first.log_bytes == second.log_bytes;
    std::snprintf(detail, sizeof(detail), "checkpoint digest %s %s; training log %s",
                  first.checkpoint_digest.c_str(), ckpt_same ? "reproduced" : "differs",
                  log_same ? "identical" : "differs");
    report(12, "determinism", ckpt_same && log_same, detail);
}

// ---------------------------------------------------------------------------
// 9. The chosen-k histogram spreads over a heterogeneous test split.
ModelParams<double> criterion_9(const Corpus& het_test, const fs::path& het_test_path) {
    Corpus het_train = synth::heterogeneous_corpus(40, 6101, Split::train);
    Corpus het_val = synth::heterogeneous_corpus(10, 6102, Split::validation);

    ModelDims dims;
    TrainingConfig cfg;
    cfg.max_epochs = 60;
    cfg.patience = 60;
    cfg.seed = 777;
    cfg.label_budget = 8;
    CandidateConfig k_config{1, 5};

    ModelParams<double> params = init_params<double>(dims, het_train, cfg.seed);
    train(params, het_train, het_val, k_config, LossConfig{}, kWeights, cfg);

    fs::path ckpt = g_work / "het_checkpoint.bin";
    write_checkpoint_file(ckpt, to_checkpoint(params, "f64"));

    fs::path out = g_work / "het_eval_out";
    CliResult result = run_cli("evaluate --checkpoint " + ckpt.string() + " --input " +
                               het_test_path.string() + " --k_min 1 --k_max 5 --out " +
                               out.string());
    size_t distinct = 0;
    std::string histogram = "(evaluate failed)";
    if (result.exit_code == 0) {
        auto eval = nlohmann::json::parse(io::read_file(out / "evaluation.json"));
        distinct = eval["chosen_k_histogram"].size();
        histogram = eval["chosen_k_histogram"].dump();
    }
    char detail[240];
    std::snprintf(detail, sizeof(detail), "exit %d, chosen-k histogram %s (%zu distinct values)",
                  result.exit_code, histogram.c_str(), distinct);
    report(9, "varying-length", result.exit_code == 0 && distinct >= 2, detail);
    return params;
}

// ---------------------------------------------------------------------------
// 10. Trigram blocking postcondition, plus the flag-off contrast.
void criterion_10(const ModelParams<double>& params, const Corpus& het_test) {
    bool no_repeats = true;
    for (const auto& entry : het_test.entries) {
        SummaryOutput out = summarize(params, entry.document, CandidateConfig{1, 5}, true);
        std::set<std::string> seen;
        for (int idx : out.indices) {
            for (const auto& trigram : edu_trigrams(entry.document.edu(idx).tokens)) {
                if (!seen.insert(trigram).second) no_repeats = false;
            }
        }
    }

    Corpus duplicates = synth::duplicate_edu_corpus(5, 8181);
    bool duplicate_selected = false;
    bool blocked_clean = true;
    for (const auto& entry : duplicates.entries) {
        SummaryOutput open = summarize(params, entry.document, CandidateConfig{2, 3}, false);
        for (size_t i = 0; i < open.indices.size() && !duplicate_selected; ++i)
            for (size_t j = i + 1; j < open.indices.size(); ++j)
                if (join_text(entry.document.edu(open.indices[i]).tokens) ==
                    join_text(entry.document.edu(open.indices[j]).tokens))
                    duplicate_selected = true;
        SummaryOutput blocked = summarize(params, entry.document, CandidateConfig{2, 3}, true);
        if (blocked.indices.size() != 1) blocked_clean = false;
    }
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "blocking on: trigram repeats %s; blocking off: duplicate pair selected %s; "
                  "duplicates collapse under blocking %s",
                  no_repeats ? "none" : "FOUND", duplicate_selected ? "yes" : "no",
                  blocked_clean ? "yes" : "no");
    report(10, "trigram-blocking", no_repeats && duplicate_selected && blocked_clean, detail);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: eduvl_acceptance <path-to-eduvl-cli> [work-dir]\n";
        return 2;
    }
    g_cli_path = argv[1];
    g_work = argc > 2 ? fs::path(argv[2]) : fs::path("acceptance_work");
    fs::create_directories(g_work);

    criterion_1();
    criterion_2();

    Corpus theorem = synth::theorem_corpus(200, 31415);
    fs::path theorem_path = write_corpus("theorem_corpus.jsonl", theorem);
    criterion_3(theorem_path);
    criterion_4(theorem);
    criterion_5(theorem);

    criterion_6();
    criterion_7();

    Corpus overfit = synth::overfit_corpus(20, 271828);
    criteria_8_11_12(overfit);

    Corpus het_test = synth::heterogeneous_corpus(50, 6103, Split::test);
    fs::path het_test_path = write_corpus("het_test.jsonl", het_test);
    ModelParams<double> het_params = criterion_9(het_test, het_test_path);
    criterion_10(het_params, het_test);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
