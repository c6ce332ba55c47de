#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

#include "eduvl/common.hpp"
#include "eduvl/corpus.hpp"
#include "support/synthetic.hpp"

using namespace eduvl;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

fs::path work_root() {
    auto root = fs::temp_directory_path() / "eduvl_cli_tests";
    fs::create_directories(root);
    return root;
}

CommandResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path log = work_root() / ("cli_log_" + std::to_string(counter++) + ".txt");
    std::string cmd = std::string(EDUVL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = io::read_file(log);
    return result;
}

fs::path write_file(const std::string& name, const std::string& content) {
    fs::path path = work_root() / name;
    std::ofstream(path, std::ios::trunc) << content;
    return path;
}

}  // namespace

TEST_CASE("segment emits a pre-segmented fixpoint and a manifest") {
    auto raw = write_file("seg_raw.jsonl",
                          R"({"doc_id":"a","summary":"he left","text":"He left the house because it burned. She stayed."})"
                          "\n");
    fs::path out1 = work_root() / "seg_out1";
    auto first = run_cli("segment --input " + raw.string() + " --format raw --out " + out1.string());
    REQUIRE(first.exit_code == 0);
    REQUIRE(fs::exists(out1 / "segmented.jsonl"));
    REQUIRE(fs::exists(out1 / "manifest_segment.json"));

    fs::path out2 = work_root() / "seg_out2";
    auto second = run_cli("segment --input " + (out1 / "segmented.jsonl").string() +
                          " --format pre --out " + out2.string());
    REQUIRE(second.exit_code == 0);
    CHECK(io::read_file(out1 / "segmented.jsonl") == io::read_file(out2 / "segmented.jsonl"));

    auto manifest = nlohmann::json::parse(io::read_file(out1 / "manifest_segment.json"));
    CHECK(manifest["command"] == "segment");
    CHECK(manifest["inputs"].size() == 1);
}

TEST_CASE("segment reports malformed lines with their line number and exits 2") {
    auto bad = write_file("seg_bad.jsonl",
                          R"({"doc_id":"a","summary":"x","text":"Fine here."})"
                          "\n"
                          "{not json\n");
    auto result = run_cli("segment --input " + bad.string() + " --format raw --out " +
                          (work_root() / "seg_bad_out").string());
    CHECK(result.exit_code == 2);
    CHECK(result.output.find(":2:") != std::string::npos);
}

TEST_CASE("segment honors the truncation budget") {
    std::string body;
    for (int i = 0; i < 40; ++i) body += "Alpha beta gamma delta epsilon. ";
    auto raw = write_file("seg_trunc.jsonl",
                          nlohmann::json{{"doc_id", "a"}, {"summary", "alpha"}, {"text", body}}
                              .dump() +
                          "\n");
    fs::path out = work_root() / "seg_trunc_out";
    auto result = run_cli("segment --input " + raw.string() + " --format raw --truncate 64 --out " +
                          out.string());
    REQUIRE(result.exit_code == 0);
    Corpus corpus = load_corpus(out / "segmented.jsonl", CorpusFormat::pre_segmented, 768,
                                Split::train);
    CHECK(corpus.entries[0].document.token_count() <= 64);
}

TEST_CASE("label writes one JSONL record per document") {
    Corpus corpus = synth::theorem_corpus(4, 404);
    auto path = write_file("label_in.jsonl", corpus_to_pre_segmented_jsonl(corpus));
    fs::path out = work_root() / "label_out";
    auto result = run_cli("label --input " + path.string() + " --out " + out.string());
    REQUIRE(result.exit_code == 0);

    std::ifstream in(out / "labels.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        auto record = nlohmann::json::parse(line);
        CHECK(record.contains("doc_id"));
        REQUIRE(record["labels"].is_array());
        for (const auto& v : record["labels"]) CHECK((v == 0 || v == 1));
        ++lines;
    }
    CHECK(lines == 4);
}

TEST_CASE("oracle-analyze writes the pinned CSV schema") {
    Corpus corpus = synth::theorem_corpus(6, 505);
    auto path = write_file("analyze_in.jsonl", corpus_to_pre_segmented_jsonl(corpus));
    fs::path out = work_root() / "analyze_out";
    auto result =
        run_cli("oracle-analyze --input " + path.string() + " --mode both --out " + out.string());
    REQUIRE(result.exit_code == 0);

    std::string csv = io::read_file(out / "oracle_analysis_greedy.csv");
    CHECK(csv.rfind("unit_kind,variant,recall,precision,f1,mean_units,mean_words\n", 0) == 0);
    int rows = -1;  // discount header
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 6);
    CHECK(fs::exists(out / "oracle_analysis_exhaustive.csv"));

    auto combined = nlohmann::json::parse(io::read_file(out / "oracle_analysis.json"));
    // Exhaustive dominates greedy per unit kind and variant.
    for (const char* kind : {"sentence", "edu"}) {
        for (const char* variant : {"R1", "R2", "RL"}) {
            double greedy = combined["greedy"][kind][variant]["f1"].get<double>();
            double exhaustive = combined["exhaustive"][kind][variant]["f1"].get<double>();
            CHECK(exhaustive >= greedy - 1e-12);
        }
    }
}

TEST_CASE("verify-theorem prints a violation summary and exits cleanly") {
    Corpus corpus = synth::theorem_corpus(5, 606);
    auto path = write_file("verify_in.jsonl", corpus_to_pre_segmented_jsonl(corpus));
    fs::path out = work_root() / "verify_out";
    auto result = run_cli("verify-theorem --input " + path.string() + " --out " + out.string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("violations: 0") != std::string::npos);
    CHECK(fs::exists(out / "verification.jsonl"));
    CHECK(fs::exists(out / "manifest_verify-theorem.json"));
}

TEST_CASE("train, summarize, and evaluate chain with a reproducible checkpoint") {
    Corpus train_corpus = synth::overfit_corpus(3, 707);
    Corpus val_corpus = synth::overfit_corpus(2, 708);
    auto train_path = write_file("cli_train.jsonl", corpus_to_pre_segmented_jsonl(train_corpus));
    auto val_path = write_file("cli_val.jsonl", corpus_to_pre_segmented_jsonl(val_corpus));

    const std::string model_flags =
        " --d 16 --heads 2 --encoder_layers 1 --mtl_layers 1 --k_min 2 --k_max 4 "
        "--max_epochs 2 --patience 2 --seed 9";

    fs::path out1 = work_root() / "train_out1";
    auto r1 = run_cli("train --train_path " + train_path.string() + " --val_path " +
                      val_path.string() + model_flags + " --out " + out1.string());
    REQUIRE(r1.exit_code == 0);
    REQUIRE(fs::exists(out1 / "checkpoint.bin"));
    REQUIRE(fs::exists(out1 / "training_log.jsonl"));

    fs::path out2 = work_root() / "train_out2";
    auto r2 = run_cli("train --train_path " + train_path.string() + " --val_path " +
                      val_path.string() + model_flags + " --out " + out2.string());
    REQUIRE(r2.exit_code == 0);
    CHECK(io::fnv1a64_file(out1 / "checkpoint.bin") == io::fnv1a64_file(out2 / "checkpoint.bin"));
    CHECK(io::read_file(out1 / "training_log.jsonl") ==
          io::read_file(out2 / "training_log.jsonl"));

    fs::path sum_out = work_root() / "sum_out";
    auto rs = run_cli("summarize --checkpoint " + (out1 / "checkpoint.bin").string() +
                      " --input " + val_path.string() + " --k_min 2 --k_max 4 --out " +
                      sum_out.string());
    REQUIRE(rs.exit_code == 0);
    std::ifstream in(sum_out / "summaries.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        auto record = nlohmann::json::parse(line);
        CHECK(record.contains("doc_id"));
        CHECK(record.contains("selected_indices"));
        CHECK(record.contains("chosen_k"));
        CHECK(record.contains("summary"));
        ++lines;
    }
    CHECK(lines == 2);

    fs::path eval_out = work_root() / "eval_out";
    auto re = run_cli("evaluate --checkpoint " + (out1 / "checkpoint.bin").string() + " --input " +
                      val_path.string() + " --k_min 2 --k_max 4 --out " + eval_out.string());
    REQUIRE(re.exit_code == 0);
    CHECK(re.output.find("mean F1") != std::string::npos);
    CHECK(re.output.find("chosen-k histogram") != std::string::npos);
    auto eval = nlohmann::json::parse(io::read_file(eval_out / "evaluation.json"));
    CHECK(eval.contains("mean"));
    CHECK(eval.contains("chosen_k_histogram"));
    CHECK(eval["documents"].size() == 2);
}

TEST_CASE("config file keys apply unless a flag overrides them") {
    Corpus corpus = synth::theorem_corpus(2, 909);
    auto path = write_file("cfg_in.jsonl", corpus_to_pre_segmented_jsonl(corpus));
    auto cfg = write_file("cfg.json", nlohmann::json{{"truncate", 32}}.dump());

    fs::path out = work_root() / "cfg_out";
    auto result = run_cli("segment --input " + path.string() + " --format pre --config " +
                          cfg.string() + " --out " + out.string());
    REQUIRE(result.exit_code == 0);
    Corpus reloaded =
        load_corpus(out / "segmented.jsonl", CorpusFormat::pre_segmented, 768, Split::train);
    for (const auto& entry : reloaded.entries) CHECK(entry.document.token_count() <= 32);

    // The explicit flag wins over the config value.
    fs::path out2 = work_root() / "cfg_out2";
    auto result2 = run_cli("segment --input " + path.string() + " --format pre --config " +
                           cfg.string() + " --truncate 768 --out " + out2.string());
    REQUIRE(result2.exit_code == 0);
    auto manifest = nlohmann::json::parse(io::read_file(out2 / "manifest_segment.json"));
    CHECK(manifest["config"]["truncate"] == 768);
}

TEST_CASE("unknown corpus path exits with the input-error code") {
    auto result = run_cli("label --input /nonexistent/nope.jsonl --out " +
                          (work_root() / "nope_out").string());
    CHECK(result.exit_code == 2);
}
