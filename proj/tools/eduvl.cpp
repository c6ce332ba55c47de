// eduvl: EDU-level extractive summarization pipeline.
//
// Subcommands: segment, label, oracle-analyze, verify-theorem, train,
// summarize, evaluate. Every command writes a run manifest next to its
// outputs. Exit codes: 0 success, 1 internal error, 2 input error,
// 3 property violation.

#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "eduvl/checkpoint.hpp"
#include "eduvl/corpus.hpp"
#include "eduvl/model.hpp"
#include "eduvl/oracle.hpp"
#include "eduvl/rouge.hpp"
#include "eduvl/train.hpp"

namespace {

constexpr const char* kToolVersion = "0.1.0";

using nlohmann::json;
using namespace eduvl;

struct RunConfig {
    std::string train_path;
    std::string val_path;
    std::string test_path;
    std::string input;  // single-corpus commands
    std::string format = "pre";
    int truncate = 768;
    bool multi_doc = false;
    int sent_budget = 0;  // 0 resolves from multi_doc: 5 or 15
    int edu_budget = 0;   // 0 resolves from multi_doc: 8 or 30
    int k_min = 6;
    int k_max = 10;
    int d = 64;
    int heads = 4;
    int encoder_layers = 2;
    int mtl_layers = 4;
    double rho = 100.0;
    double gamma1 = 0.0;
    double gamma2 = 0.01;
    double learning_rate = 5e-4;
    int batch_size = 1;
    int max_epochs = 100;
    int patience = 10;
    std::string precision = "f64";
    bool trigram_blocking = true;
    double weight_r1 = 0.5;
    double weight_r2 = 0.5;
    double weight_rl = 0.0;
    uint64_t seed = 42;
    int threads = 0;

    int resolved_sent_budget() const { return sent_budget > 0 ? sent_budget : (multi_doc ? 15 : 5); }
    int resolved_edu_budget() const { return edu_budget > 0 ? edu_budget : (multi_doc ? 30 : 8); }

    RougeWeights weights() const {
        RougeWeights w{weight_r1, weight_r2, weight_rl};
        w.validate();
        return w;
    }
    CandidateConfig candidates() const {
        CandidateConfig k{k_min, k_max};
        k.validate();
        return k;
    }
    LossConfig loss() const { return LossConfig{rho, gamma1, gamma2}; }
    ModelDims dims() const {
        ModelDims m{d, heads, encoder_layers, mtl_layers, 3 * truncate + 8};
        m.validate();
        return m;
    }
    TrainingConfig training() const {
        TrainingConfig t;
        t.learning_rate = learning_rate;
        t.batch_size = batch_size;
        t.max_epochs = max_epochs;
        t.patience = patience;
        t.seed = seed;
        t.trigram_blocking = trigram_blocking;
        t.label_budget = resolved_edu_budget();
        t.validate();
        return t;
    }

    json to_json() const {
        return json{{"train_path", train_path},
                    {"val_path", val_path},
                    {"test_path", test_path},
                    {"input", input},
                    {"format", format},
                    {"truncate", truncate},
                    {"multi_doc", multi_doc},
                    {"sent_budget", resolved_sent_budget()},
                    {"edu_budget", resolved_edu_budget()},
                    {"k_min", k_min},
                    {"k_max", k_max},
                    {"d", d},
                    {"heads", heads},
                    {"encoder_layers", encoder_layers},
                    {"mtl_layers", mtl_layers},
                    {"rho", rho},
                    {"gamma1", gamma1},
                    {"gamma2", gamma2},
                    {"learning_rate", learning_rate},
                    {"batch_size", batch_size},
                    {"max_epochs", max_epochs},
                    {"patience", patience},
                    {"precision", precision},
                    {"trigram_blocking", trigram_blocking},
                    {"weight_r1", weight_r1},
                    {"weight_r2", weight_r2},
                    {"weight_rl", weight_rl},
                    {"seed", seed},
                    {"threads", threads}};
    }
};

// Binds one config key to its CLI option so JSON values apply only when the
// flag was not given on the command line.
struct KeyBinding {
    std::string key;
    CLI::Option* option = nullptr;
    std::function<void(const json&)> apply;
};

struct CommandContext {
    RunConfig config;
    std::string config_path;
    std::string out_dir = "out";
    std::vector<KeyBinding> bindings;
    std::vector<std::pair<std::string, uint64_t>> input_digests;
    std::vector<std::string> outputs;
};

template <class T>
void bind_option(CommandContext& ctx, CLI::App* cmd, const std::string& key, T& field,
          const std::string& desc) {
    CLI::Option* opt = cmd->add_option("--" + key, field, desc);
    ctx.bindings.push_back({key, opt, [&field](const json& j) { field = j.get<T>(); }});
}

void bind_flag(CommandContext& ctx, CLI::App* cmd, const std::string& key, bool& field,
               const std::string& desc) {
    CLI::Option* opt = cmd->add_flag("--" + key + ",!--no-" + key, field, desc);
    ctx.bindings.push_back({key, opt, [&field](const json& j) { field = j.get<bool>(); }});
}

void add_common_options(CommandContext& ctx, CLI::App* cmd) {
    cmd->add_option("--config", ctx.config_path, "JSON config file; flat keys mirror the flags");
    cmd->add_option("--out", ctx.out_dir, "output directory");
    RunConfig& c = ctx.config;
    bind_option(ctx, cmd, "seed", c.seed, "master seed for all randomness");
    bind_option(ctx, cmd, "format", c.format, "corpus format: raw|pre");
    bind_option(ctx, cmd, "truncate", c.truncate, "document token budget");
    bind_flag(ctx, cmd, "multi_doc", c.multi_doc, "use multi-document oracle budgets (15/30)");
    bind_option(ctx, cmd, "sent_budget", c.sent_budget, "sentence oracle budget (0 = auto)");
    bind_option(ctx, cmd, "edu_budget", c.edu_budget, "EDU oracle budget (0 = auto)");
    bind_option(ctx, cmd, "k_min", c.k_min, "smallest candidate length");
    bind_option(ctx, cmd, "k_max", c.k_max, "largest candidate length");
    bind_option(ctx, cmd, "d", c.d, "model width");
    bind_option(ctx, cmd, "heads", c.heads, "attention heads");
    bind_option(ctx, cmd, "encoder_layers", c.encoder_layers, "EDU encoder layers");
    bind_option(ctx, cmd, "mtl_layers", c.mtl_layers, "document-level encoder layers");
    bind_option(ctx, cmd, "rho", c.rho, "contrastive loss weight");
    bind_option(ctx, cmd, "gamma1", c.gamma1, "ground-truth margin");
    bind_option(ctx, cmd, "gamma2", c.gamma2, "pairwise rank margin");
    bind_option(ctx, cmd, "learning_rate", c.learning_rate, "Adam learning rate");
    bind_option(ctx, cmd, "batch_size", c.batch_size, "documents per optimizer step");
    bind_option(ctx, cmd, "max_epochs", c.max_epochs, "epoch cap");
    bind_option(ctx, cmd, "patience", c.patience, "early-stop patience in epochs");
    bind_option(ctx, cmd, "precision", c.precision, "numeric precision: f64|f32");
    bind_flag(ctx, cmd, "trigram_blocking", c.trigram_blocking,
              "trigram redundancy filter at inference");
    bind_option(ctx, cmd, "weight_r1", c.weight_r1, "objective weight on R-1 F1");
    bind_option(ctx, cmd, "weight_r2", c.weight_r2, "objective weight on R-2 F1");
    bind_option(ctx, cmd, "weight_rl", c.weight_rl, "objective weight on R-L F1");
    bind_option(ctx, cmd, "threads", c.threads, "worker threads (0 = hardware)");
    bind_option(ctx, cmd, "train_path", c.train_path, "training split JSONL");
    bind_option(ctx, cmd, "val_path", c.val_path, "validation split JSONL");
    bind_option(ctx, cmd, "test_path", c.test_path, "test split JSONL");
}

void apply_config_file(CommandContext& ctx) {
    if (ctx.config_path.empty()) return;
    json parsed;
    try {
        parsed = json::parse(io::read_file(ctx.config_path));
    } catch (const json::exception& e) {
        throw InputError(ctx.config_path + ": malformed config JSON: " + std::string(e.what()));
    }
    if (!parsed.is_object()) throw InputError(ctx.config_path + ": config must be a JSON object");
    // The same key is bound once per subcommand; a flag given on the parsed
    // subcommand wins over the config file for that key.
    std::set<std::string> explicit_keys;
    for (const auto& binding : ctx.bindings)
        if (binding.option->count() > 0) explicit_keys.insert(binding.key);
    std::set<std::string> applied;
    for (auto& binding : ctx.bindings) {
        if (explicit_keys.count(binding.key) || applied.count(binding.key)) continue;
        if (!parsed.contains(binding.key)) continue;
        try {
            binding.apply(parsed[binding.key]);
            applied.insert(binding.key);
        } catch (const json::exception& e) {
            throw InputError(ctx.config_path + ": bad value for '" + binding.key + "': " +
                             e.what());
        }
    }
    ctx.input_digests.emplace_back(ctx.config_path, io::fnv1a64(io::read_file(ctx.config_path)));
}

Corpus load_tracked(CommandContext& ctx, const std::string& path, Split split) {
    if (path.empty()) throw InputError("no corpus path given for the " + to_string(split) + " split");
    ctx.input_digests.emplace_back(path, io::fnv1a64_file(path));
    return load_corpus(path, format_from_string(ctx.config.format), ctx.config.truncate, split);
}

std::filesystem::path out_path(CommandContext& ctx, const std::string& name) {
    std::filesystem::create_directories(ctx.out_dir);
    std::filesystem::path p = std::filesystem::path(ctx.out_dir) / name;
    ctx.outputs.push_back(p.string());
    return p;
}

void write_manifest(CommandContext& ctx, const std::string& command) {
    json manifest;
    manifest["command"] = command;
    manifest["tool_version"] = kToolVersion;
    manifest["seed"] = ctx.config.seed;
    manifest["config"] = ctx.config.to_json();
    json inputs = json::object();
    char hex[32];
    for (const auto& [path, digest] : ctx.input_digests) {
        std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(digest));
        inputs[path] = hex;
    }
    manifest["inputs"] = inputs;
    manifest["outputs"] = ctx.outputs;
    std::filesystem::create_directories(ctx.out_dir);
    io::atomic_write(std::filesystem::path(ctx.out_dir) / ("manifest_" + command + ".json"),
                     manifest.dump(2) + "\n");
}

int cmd_segment(CommandContext& ctx) {
    Corpus corpus = load_tracked(ctx, ctx.config.input, Split::train);
    io::atomic_write(out_path(ctx, "segmented.jsonl"), corpus_to_pre_segmented_jsonl(corpus));
    write_manifest(ctx, "segment");
    std::cout << "segmented " << corpus.entries.size() << " documents\n";
    return 0;
}

int cmd_label(CommandContext& ctx) {
    Corpus corpus = load_tracked(ctx, ctx.config.input, Split::train);
    const RougeWeights weights = ctx.config.weights();
    std::string out;
    for (const auto& entry : corpus.entries) {
        Labels labels = make_labels(entry.document, entry.reference,
                                    ctx.config.resolved_edu_budget(), weights);
        json line = {{"doc_id", entry.document.doc_id}, {"labels", json::array()}};
        for (uint8_t v : labels.values) line["labels"].push_back(static_cast<int>(v));
        out += line.dump();
        out += '\n';
    }
    io::atomic_write(out_path(ctx, "labels.jsonl"), out);
    write_manifest(ctx, "label");
    std::cout << "labeled " << corpus.entries.size() << " documents\n";
    return 0;
}

int cmd_oracle_analyze(CommandContext& ctx, const std::string& mode) {
    Corpus corpus = load_tracked(ctx, ctx.config.input, Split::train);
    const RougeWeights weights = ctx.config.weights();
    const int sent_budget = ctx.config.resolved_sent_budget();
    const int edu_budget = ctx.config.resolved_edu_budget();

    std::vector<std::string> modes;
    if (mode == "both") {
        modes = {"greedy", "exhaustive"};
    } else {
        modes = {mode};
    }
    json combined = json::object();
    for (const std::string& m : modes) {
        OracleAnalysis analysis = analyze_corpus(corpus, sent_budget, edu_budget, weights,
                                                 oracle_mode_from_string(m), ctx.config.threads);
        io::atomic_write(out_path(ctx, "oracle_analysis_" + m + ".csv"), analysis_to_csv(analysis));
        combined[m] = json::parse(analysis_to_json(analysis));
        if (analysis.documents_skipped > 0)
            std::cout << m << ": skipped " << analysis.documents_skipped
                      << " documents over the exhaustive size guard\n";
    }
    io::atomic_write(out_path(ctx, "oracle_analysis.json"), combined.dump(2) + "\n");
    write_manifest(ctx, "oracle-analyze");
    std::cout << "analyzed " << corpus.entries.size() << " documents\n";
    return 0;
}

int cmd_verify_theorem(CommandContext& ctx) {
    Corpus corpus = load_tracked(ctx, ctx.config.input, Split::train);
    const RougeWeights weights = ctx.config.weights();
    const int sent_budget = ctx.config.resolved_sent_budget();

    std::string lines;
    int violations = 0;
    int checked = 0;
    int skipped = 0;
    for (const auto& entry : corpus.entries) {
        json line = {{"doc_id", entry.document.doc_id}};
        try {
            DominanceReport report =
                verify_edu_dominance(entry.document, entry.reference, sent_budget, weights);
            ++checked;
            line["sentence_indices"] = report.sentence_oracle.indices;
            line["component_edus"] = report.component_edus;
            json checks = json::array();
            for (const auto& check : report.checks) {
                checks.push_back({{"variant", variant_name(check.variant)},
                                  {"subset", check.best_subset},
                                  {"f1", check.best_score.f1},
                                  {"sentence_f1", check.variant == RougeVariant::R1
                                                      ? report.sentence_oracle.r1.f1
                                                      : (check.variant == RougeVariant::R2
                                                             ? report.sentence_oracle.r2.f1
                                                             : report.sentence_oracle.rl.f1)},
                                  {"satisfied", check.satisfied},
                                  {"match_preserving_ok", check.match_preserving_ok}});
                if (!check.satisfied) ++violations;
            }
            line["checks"] = std::move(checks);
        } catch (const SizeGuardError& e) {
            ++skipped;
            line["skipped"] = e.what();
        }
        lines += line.dump();
        lines += '\n';
    }
    io::atomic_write(out_path(ctx, "verification.jsonl"), lines);
    write_manifest(ctx, "verify-theorem");
    std::cout << "violations: " << violations << " (checked " << checked << " documents, skipped "
              << skipped << ")\n";
    return violations > 0 ? 3 : 0;
}

template <class T>
int run_train(CommandContext& ctx) {
    Corpus train_corpus = load_tracked(ctx, ctx.config.train_path, Split::train);
    Corpus val_corpus = load_tracked(ctx, ctx.config.val_path, Split::validation);

    ModelParams<T> params =
        init_params<T>(ctx.config.dims(), train_corpus, ctx.config.seed);
    TrainResult result = train(params, train_corpus, val_corpus, ctx.config.candidates(),
                               ctx.config.loss(), ctx.config.weights(), ctx.config.training());

    write_checkpoint_file(out_path(ctx, "checkpoint.bin"),
                          to_checkpoint(params, ctx.config.precision));
    io::atomic_write(out_path(ctx, "training_log.jsonl"), training_log_to_jsonl(result));
    write_manifest(ctx, "train");
    std::cout << "trained " << result.epochs.size() << " epochs; best epoch " << result.best_epoch
              << " with validation R-2 F1 " << result.best_val_r2_f1 << "\n";
    return 0;
}

template <class T>
int run_summarize(CommandContext& ctx, const std::string& checkpoint_path) {
    ctx.input_digests.emplace_back(checkpoint_path, io::fnv1a64_file(checkpoint_path));
    ModelParams<T> params = params_from_checkpoint<T>(read_checkpoint_file(checkpoint_path));
    Corpus corpus = load_tracked(ctx, ctx.config.input, Split::test);

    std::string out;
    for (const auto& entry : corpus.entries) {
        SummaryOutput summary = summarize(params, entry.document, ctx.config.candidates(),
                                          ctx.config.trigram_blocking);
        json line = {{"doc_id", entry.document.doc_id},
                     {"selected_indices", summary.indices},
                     {"chosen_k", summary.chosen_k},
                     {"summary", summary.text}};
        out += line.dump();
        out += '\n';
    }
    io::atomic_write(out_path(ctx, "summaries.jsonl"), out);
    write_manifest(ctx, "summarize");
    std::cout << "summarized " << corpus.entries.size() << " documents\n";
    return 0;
}

template <class T>
int run_evaluate(CommandContext& ctx, const std::string& checkpoint_path) {
    ctx.input_digests.emplace_back(checkpoint_path, io::fnv1a64_file(checkpoint_path));
    ModelParams<T> params = params_from_checkpoint<T>(read_checkpoint_file(checkpoint_path));
    Corpus corpus = load_tracked(ctx, ctx.config.input, Split::test);

    EvalReport report = evaluate(params, corpus, ctx.config.candidates(),
                                 ctx.config.trigram_blocking, ctx.config.threads);
    json j;
    auto score_json = [](const RougeScore& s) {
        return json{{"recall", s.recall}, {"precision", s.precision}, {"f1", s.f1}};
    };
    j["mean"] = {{"R1", score_json(report.mean_r1)},
                 {"R2", score_json(report.mean_r2)},
                 {"RL", score_json(report.mean_rl)}};
    json hist = json::object();
    for (const auto& [k, count] : report.k_histogram) hist[std::to_string(k)] = count;
    j["chosen_k_histogram"] = hist;
    json docs = json::array();
    for (const auto& doc_eval : report.docs) {
        docs.push_back({{"doc_id", doc_eval.doc_id},
                        {"chosen_k", doc_eval.chosen_k},
                        {"selected_indices", doc_eval.summary.indices},
                        {"R1", score_json(doc_eval.r1)},
                        {"R2", score_json(doc_eval.r2)},
                        {"RL", score_json(doc_eval.rl)}});
    }
    j["documents"] = docs;
    io::atomic_write(out_path(ctx, "evaluation.json"), j.dump(2) + "\n");
    write_manifest(ctx, "evaluate");

    std::printf("mean F1  R-1 %.4f  R-2 %.4f  R-L %.4f\n", report.mean_r1.f1, report.mean_r2.f1,
                report.mean_rl.f1);
    std::cout << "chosen-k histogram:";
    for (const auto& [k, count] : report.k_histogram) std::cout << " " << k << ":" << count;
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EDU-level extractive summarization with varying summary lengths"};
    app.require_subcommand(1);

    CommandContext ctx;
    std::string mode = "greedy";
    std::string checkpoint_path;

    auto* segment = app.add_subcommand("segment", "segment a raw corpus into EDUs");
    segment->add_option("--input", ctx.config.input, "corpus JSONL")->required();

    auto* label = app.add_subcommand("label", "emit greedy ground-truth EDU labels");
    label->add_option("--input", ctx.config.input, "corpus JSONL")->required();

    auto* analyze = app.add_subcommand("oracle-analyze", "sentence vs EDU oracle score analysis");
    analyze->add_option("--input", ctx.config.input, "corpus JSONL")->required();
    analyze->add_option("--mode", mode, "greedy|exhaustive|both")->default_val("greedy");

    auto* verify = app.add_subcommand("verify-theorem",
                                      "check that an EDU subset of the sentence oracle always "
                                      "matches or beats it");
    verify->add_option("--input", ctx.config.input, "corpus JSONL")->required();

    auto* train_cmd = app.add_subcommand("train", "train the candidate re-ranking model");

    auto* summarize_cmd = app.add_subcommand("summarize", "write summaries for a corpus");
    summarize_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    summarize_cmd->add_option("--input", ctx.config.input, "corpus JSONL")->required();

    auto* evaluate_cmd = app.add_subcommand("evaluate", "score summaries against references");
    evaluate_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    evaluate_cmd->add_option("--input", ctx.config.input, "corpus JSONL")->required();

    for (CLI::App* cmd : {segment, label, analyze, verify, train_cmd, summarize_cmd, evaluate_cmd})
        add_common_options(ctx, cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        apply_config_file(ctx);
        if (ctx.config.precision != "f64" && ctx.config.precision != "f32")
            throw InputError("precision must be f64 or f32");
        const bool f64 = ctx.config.precision == "f64";

        if (segment->parsed()) return cmd_segment(ctx);
        if (label->parsed()) return cmd_label(ctx);
        if (analyze->parsed()) {
            if (mode != "greedy" && mode != "exhaustive" && mode != "both")
                throw InputError("mode must be greedy, exhaustive, or both");
            return cmd_oracle_analyze(ctx, mode);
        }
        if (verify->parsed()) return cmd_verify_theorem(ctx);
        if (train_cmd->parsed()) return f64 ? run_train<double>(ctx) : run_train<float>(ctx);
        if (summarize_cmd->parsed())
            return f64 ? run_summarize<double>(ctx, checkpoint_path)
                       : run_summarize<float>(ctx, checkpoint_path);
        if (evaluate_cmd->parsed())
            return f64 ? run_evaluate<double>(ctx, checkpoint_path)
                       : run_evaluate<float>(ctx, checkpoint_path);
        throw InputError("no subcommand given");
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SizeGuardError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
